//! Replicate, summary and density CSV files.

use std::path::Path;

use super::config::Study;
use super::{file_err, format_real, write_atomic, IoError};
use crate::calibration::DensityCurves;
use crate::harness::{CalibrationRecord, ScenarioSummary, TriadRecord};
use crate::triads::TriadStatus;

pub const CALIBRATION_COLUMNS: &[&str] = &[
    "scenario_id",
    "alpha",
    "lambda_wx",
    "rho_mw",
    "replicate",
    "beta0_hat",
    "beta1_hat",
    "tilde_beta1",
    "apparent_beta1",
    "ratio",
    "mae",
];

pub const TRIAD_COLUMNS: &[&str] = &[
    "scenario_id",
    "lambda_rx",
    "lambda_wx",
    "rho_rw",
    "replicate",
    "rho_mw_hat",
    "rho_wr_hat",
    "rho_mr_hat",
    "vc_hat",
    "vc_true",
    "status",
];

const CALIBRATION_METRICS: &[&str] = &[
    "beta0_hat",
    "beta1_hat",
    "tilde_beta1",
    "apparent_beta1",
    "ratio",
    "mae",
];
const TRIAD_METRICS: &[&str] = &["rho_mw_hat", "rho_wr_hat", "rho_mr_hat", "vc_hat", "vc_true"];
const STAT_NAMES: &[&str] = &["mean", "sd", "se", "min", "q1", "median", "q3", "max"];

/// Records read back from a replicate CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum Replicates {
    Calibration(Vec<CalibrationRecord>),
    Triads(Vec<TriadRecord>),
}

impl Replicates {
    pub fn study(&self) -> Study {
        match self {
            Replicates::Calibration(_) => Study::Calibration,
            Replicates::Triads(_) => Study::Triads,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Replicates::Calibration(r) => r.len(),
            Replicates::Triads(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn to_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, IoError> {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| IoError::File {
        path: "<buffer>".into(),
        source: e.into_error(),
    })
}

pub fn calibration_replicates_csv(records: &[CalibrationRecord]) -> Result<Vec<u8>, IoError> {
    to_bytes(
        CALIBRATION_COLUMNS,
        records.iter().map(|r| {
            vec![
                r.scenario_id.clone(),
                format_real(r.alpha),
                format_real(r.lambda_wx),
                format_real(r.rho_mw),
                r.replicate.to_string(),
                format_real(r.beta0_hat),
                format_real(r.beta1_hat),
                format_real(r.tilde_beta1),
                format_real(r.apparent_beta1),
                format_real(r.ratio),
                format_real(r.mae),
            ]
        }),
    )
}

pub fn triad_replicates_csv(records: &[TriadRecord]) -> Result<Vec<u8>, IoError> {
    to_bytes(
        TRIAD_COLUMNS,
        records.iter().map(|r| {
            vec![
                r.scenario_id.clone(),
                format_real(r.lambda_rx),
                format_real(r.lambda_wx),
                format_real(r.rho_rw),
                r.replicate.to_string(),
                format_real(r.rho_mw_hat),
                format_real(r.rho_wr_hat),
                format_real(r.rho_mr_hat),
                opt(r.vc_hat),
                format_real(r.vc_true),
                r.status.as_str().to_string(),
            ]
        }),
    )
}

/// Writes one row per record, in the order given (runs return them sorted
/// by scenario id and replicate).
pub fn write_replicates_csv(records: &Replicates, path: &Path) -> Result<(), IoError> {
    if records.is_empty() {
        return Err(IoError::Model(crate::Error::TooFewObservations {
            required: 1,
            actual: 0,
        }));
    }
    let bytes = match records {
        Replicates::Calibration(r) => calibration_replicates_csv(r)?,
        Replicates::Triads(r) => triad_replicates_csv(r)?,
    };
    write_atomic(path, &bytes)
}

struct Columns {
    index: Vec<usize>,
}

impl Columns {
    fn locate(headers: &::csv::StringRecord, wanted: &[&str]) -> Result<Self, IoError> {
        let index = wanted
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == *name)
                    .ok_or_else(|| IoError::MissingColumn(name.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Columns { index })
    }
}

struct Row<'a> {
    record: &'a ::csv::StringRecord,
    cols: &'a Columns,
    line: u64,
}

impl Row<'_> {
    fn raw(&self, i: usize) -> &str {
        self.record.get(self.cols.index[i]).unwrap_or("")
    }

    fn real(&self, i: usize, name: &str) -> Result<f64, IoError> {
        self.raw(i).parse().map_err(|_| IoError::Parse {
            line: self.line,
            reason: format!("`{name}` value `{}` is not a number", self.raw(i)),
        })
    }

    fn opt_real(&self, i: usize, name: &str) -> Result<Option<f64>, IoError> {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.real(i, name).map(Some)
        }
    }

    fn replicate(&self, i: usize) -> Result<u32, IoError> {
        self.raw(i).parse().map_err(|_| IoError::Parse {
            line: self.line,
            reason: format!("replicate `{}` is not a non-negative integer", self.raw(i)),
        })
    }
}

/// Reads a replicate CSV, detecting the study from the header.
pub fn read_replicates_csv(path: &Path) -> Result<Replicates, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    parse_replicates_csv(&text)
}

pub fn parse_replicates_csv(text: &str) -> Result<Replicates, IoError> {
    let mut reader = ::csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let is_triads = headers.iter().any(|h| h == "vc_hat" || h == "vc_true" || h == "status");
    let is_calibration = headers.iter().any(|h| h == "ratio" || h == "mae" || h == "alpha");
    let wanted = match (is_triads, is_calibration) {
        (true, false) => TRIAD_COLUMNS,
        (false, true) => CALIBRATION_COLUMNS,
        _ => {
            return Err(IoError::Parse {
                line: 1,
                reason: "header matches neither the calibration nor the triads layout".into(),
            })
        }
    };
    let cols = Columns::locate(&headers, wanted)?;
    let mut calib = Vec::new();
    let mut triads = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() < headers.len() {
            return Err(IoError::Parse {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let row = Row {
            record: &rec,
            cols: &cols,
            line,
        };
        let name = |j: usize| wanted[j];
        if is_triads {
            let status = TriadStatus::parse(row.raw(10)).ok_or_else(|| IoError::Parse {
                line,
                reason: format!("unknown status `{}`", row.raw(10)),
            })?;
            triads.push(TriadRecord {
                scenario_id: row.raw(0).to_string(),
                lambda_rx: row.real(1, name(1))?,
                lambda_wx: row.real(2, name(2))?,
                rho_rw: row.real(3, name(3))?,
                replicate: row.replicate(4)?,
                rho_mw_hat: row.real(5, name(5))?,
                rho_wr_hat: row.real(6, name(6))?,
                rho_mr_hat: row.real(7, name(7))?,
                vc_hat: row.opt_real(8, name(8))?,
                vc_true: row.real(9, name(9))?,
                status,
            });
        } else {
            calib.push(CalibrationRecord {
                scenario_id: row.raw(0).to_string(),
                alpha: row.real(1, name(1))?,
                lambda_wx: row.real(2, name(2))?,
                rho_mw: row.real(3, name(3))?,
                replicate: row.replicate(4)?,
                beta0_hat: row.real(5, name(5))?,
                beta1_hat: row.real(6, name(6))?,
                tilde_beta1: row.real(7, name(7))?,
                apparent_beta1: row.real(8, name(8))?,
                ratio: row.real(9, name(9))?,
                mae: row.real(10, name(10))?,
            });
        }
    }
    let out = if is_triads {
        Replicates::Triads(triads)
    } else {
        Replicates::Calibration(calib)
    };
    if out.is_empty() {
        return Err(IoError::Parse {
            line: 2,
            reason: "no data rows".into(),
        });
    }
    Ok(out)
}

pub fn aggregate_replicates(records: &Replicates) -> Result<Vec<ScenarioSummary>, IoError> {
    Ok(match records {
        Replicates::Calibration(r) => crate::harness::aggregate(r)?,
        Replicates::Triads(r) => crate::harness::aggregate(r)?,
    })
}

fn summary_header(study: Study) -> Vec<String> {
    let (params, metrics): (&[&str], &[&str]) = match study {
        Study::Triads => (&["lambda_rx", "lambda_wx", "rho_rw"], TRIAD_METRICS),
        _ => (&["alpha", "lambda_wx", "rho_mw"], CALIBRATION_METRICS),
    };
    let mut h: Vec<String> = std::iter::once("scenario_id")
        .chain(params.iter().copied())
        .chain(["replicates", "n_ok", "n_heywood", "n_negative"])
        .map(String::from)
        .collect();
    if study == Study::Triads {
        h.push("t_statistic".into());
        h.push("p_value_vs_truth".into());
    }
    for m in metrics {
        for s in STAT_NAMES {
            h.push(format!("{m}_{s}"));
        }
    }
    h
}

pub fn summary_csv(summaries: &[ScenarioSummary], study: Study) -> Result<Vec<u8>, IoError> {
    let header = summary_header(study);
    let (params, metrics): (&[&str], &[&str]) = match study {
        Study::Triads => (&["lambda_rx", "lambda_wx", "rho_rw"], TRIAD_METRICS),
        _ => (&["alpha", "lambda_wx", "rho_mw"], CALIBRATION_METRICS),
    };
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    to_bytes(
        &header_refs,
        summaries.iter().map(|s| {
            let mut row = vec![s.scenario_id.clone()];
            row.extend(params.iter().map(|p| opt(s.param(p))));
            row.extend(
                [s.replicates, s.n_ok, s.n_heywood, s.n_negative]
                    .iter()
                    .map(ToString::to_string),
            );
            if study == Study::Triads {
                row.push(opt(s.t_statistic));
                row.push(opt(s.p_value_vs_truth));
            }
            for m in metrics {
                match s.metric(m) {
                    Some(x) => row.extend(
                        [
                            Some(x.mean),
                            x.sd,
                            x.se,
                            Some(x.min),
                            Some(x.q1),
                            Some(x.median),
                            Some(x.q3),
                            Some(x.max),
                        ]
                        .map(opt),
                    ),
                    None => row.extend(std::iter::repeat_n(String::new(), STAT_NAMES.len())),
                }
            }
            row
        }),
    )
}

pub fn write_summary_csv(summaries: &[ScenarioSummary], study: Study, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &summary_csv(summaries, study)?)
}

/// Long-format density grid: one row per (scenario, series, grid point).
pub fn write_density_csvs(
    curves: &[(String, DensityCurves)],
    curves_path: &Path,
    summary_path: &Path,
) -> Result<(), IoError> {
    let rows = curves.iter().flat_map(|(id, c)| {
        [&c.truth, &c.biomarker].into_iter().flat_map(move |curve| {
            curve
                .grid
                .iter()
                .zip(&curve.density)
                .map(move |(g, d)| vec![id.clone(), curve.label.clone(), format_real(*g), format_real(*d)])
        })
    });
    write_atomic(
        curves_path,
        &to_bytes(&["scenario_id", "series", "grid", "density"], rows)?,
    )?;
    let rows = curves.iter().flat_map(|(id, c)| {
        [&c.truth, &c.biomarker].into_iter().map(move |curve| {
            vec![
                id.clone(),
                curve.label.clone(),
                format_real(c.w_band.0),
                format_real(c.w_band.1),
                curve.count.to_string(),
                format_real(curve.mean),
                format_real(curve.variance),
                format_real(curve.bandwidth),
            ]
        })
    });
    write_atomic(
        summary_path,
        &to_bytes(
            &[
                "scenario_id",
                "series",
                "band_low",
                "band_high",
                "count",
                "mean",
                "variance",
                "bandwidth",
            ],
            rows,
        )?,
    )
}
