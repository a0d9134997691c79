//! SVG figures with companion long-format CSVs holding the plotted numbers.
//!
//! * `ratio_box` / `mae_box`: box-and-whisker per (λ_WX, α) cell at one
//!   ρ_MW, one panel per λ_WX. Whiskers reach the most extreme value within
//!   1.5·IQR of the box; anything beyond is drawn as an outlier point.
//! * `vc_strip`: every triad estimate per replicate, one panel per ρ_RW,
//!   with the analytic validity coefficient as a dashed line.
//! * `density`: band-conditional KDEs of X and M with vertical mean lines.

use std::path::{Path, PathBuf};

use super::svg::{nice_ticks, padded_range, tick_label, Scale, Svg};
use super::{format_real, write_atomic, IoError};
use crate::calibration::DensityCurves;
use crate::harness::{CalibrationRecord, TriadRecord};
use crate::kernel::summary::quantile_sorted;
use crate::triads::TriadStatus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FigureKind {
    RatioBox { rho_mw: f64 },
    MaeBox { rho_mw: f64 },
    VcStrip { lambda_rx: f64, lambda_wx: f64 },
    Density,
}

impl FigureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FigureKind::RatioBox { .. } => "ratio_box",
            FigureKind::MaeBox { .. } => "mae_box",
            FigureKind::VcStrip { .. } => "vc_strip",
            FigureKind::Density => "density",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FigureInput<'a> {
    Calibration(&'a [CalibrationRecord]),
    Triads(&'a [TriadRecord]),
    Density(&'a DensityCurves),
}

/// One plotted number.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub panel: String,
    pub series: String,
    pub kind: String,
    pub x: Option<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FigureData {
    pub rows: Vec<FigureRow>,
}

impl FigureData {
    fn push(&mut self, panel: &str, series: &str, kind: &str, x: Option<f64>, y: f64) {
        self.rows.push(FigureRow {
            panel: panel.to_string(),
            series: series.to_string(),
            kind: kind.to_string(),
            x,
            y,
        });
    }

    pub fn select<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a FigureRow> + 'a {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    fn to_csv(&self) -> Result<Vec<u8>, IoError> {
        let mut w = ::csv::Writer::from_writer(Vec::new());
        w.write_record(["panel", "series", "kind", "x", "y"])?;
        for r in &self.rows {
            w.write_record([
                r.panel.clone(),
                r.series.clone(),
                r.kind.clone(),
                r.x.map(format_real).unwrap_or_default(),
                format_real(r.y),
            ])?;
        }
        w.into_inner().map_err(|e| IoError::File {
            path: "<buffer>".into(),
            source: e.into_error(),
        })
    }
}

pub fn companion_csv_path(svg_path: &Path) -> PathBuf {
    svg_path.with_extension("csv")
}

/// Renders `kind` from `input` to `path` (SVG) and its companion CSV.
pub fn emit_figure(input: FigureInput<'_>, kind: FigureKind, path: &Path) -> Result<FigureData, IoError> {
    let (svg, data) = match (input, kind) {
        (FigureInput::Calibration(r), FigureKind::RatioBox { rho_mw }) => {
            box_figure(r, rho_mw, |rec| rec.ratio, "coefficient ratio", true)?
        }
        (FigureInput::Calibration(r), FigureKind::MaeBox { rho_mw }) => {
            box_figure(r, rho_mw, |rec| rec.mae, "mean absolute error", false)?
        }
        (FigureInput::Triads(r), FigureKind::VcStrip { lambda_rx, lambda_wx }) => {
            strip_figure(r, lambda_rx, lambda_wx)?
        }
        (FigureInput::Density(c), FigureKind::Density) => density_figure(c),
        _ => {
            return Err(IoError::FacetMismatch(format!(
                "{} cannot be drawn from this input",
                kind.name()
            )))
        }
    };
    write_atomic(path, svg.as_bytes())?;
    write_atomic(&companion_csv_path(path), &data.to_csv()?)?;
    Ok(data)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn unique_sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| close(*a, *b));
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&s, 0.25);
    let median = quantile_sorted(&s, 0.5);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence).collect();
    BoxStats {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: s.into_iter().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
    }
}

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 300.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const GAP: f64 = 30.0;

fn y_axis(svg: &mut Svg, scale: &Scale, x: f64, lo: f64, hi: f64) {
    svg.line(x, scale.map(lo), x, scale.map(hi), "#333333", false);
    for t in nice_ticks(lo, hi, 5) {
        let y = scale.map(t);
        svg.line(x - 4.0, y, x, y, "#333333", false);
        svg.text(x - 6.0, y + 4.0, 10.0, "end", &tick_label(t));
    }
}

fn box_figure(
    records: &[CalibrationRecord],
    rho_mw: f64,
    metric: impl Fn(&CalibrationRecord) -> f64,
    label: &str,
    reference_band: bool,
) -> Result<(String, FigureData), IoError> {
    let lambdas = unique_sorted(records.iter().map(|r| r.lambda_wx));
    let alphas = unique_sorted(records.iter().map(|r| r.alpha));
    let selected: Vec<&CalibrationRecord> = records.iter().filter(|r| close(r.rho_mw, rho_mw)).collect();
    if selected.is_empty() {
        return Err(IoError::FacetMismatch(format!("no records with rho_mw = {rho_mw}")));
    }
    let mut cells = Vec::new();
    for &lambda in &lambdas {
        let mut row = Vec::new();
        for &alpha in &alphas {
            let values: Vec<f64> = selected
                .iter()
                .filter(|r| close(r.lambda_wx, lambda) && close(r.alpha, alpha))
                .map(|r| metric(r))
                .collect();
            if values.is_empty() {
                return Err(IoError::FacetMismatch(format!(
                    "no records for alpha = {alpha}, lambda_wx = {lambda}, rho_mw = {rho_mw}"
                )));
            }
            row.push((alpha, values.len(), box_stats(&values)));
        }
        cells.push((lambda, row));
    }

    let width = LEFT + lambdas.len() as f64 * (PANEL_W + GAP);
    let height = TOP + PANEL_H + BOTTOM;
    let mut svg = Svg::new(width, height);
    let mut data = FigureData::default();
    svg.text(
        width / 2.0,
        20.0,
        14.0,
        "middle",
        &format!("{label}, rho_MW = {rho_mw}"),
    );

    for (p, (lambda, row)) in cells.iter().enumerate() {
        let panel = format!("lambda_wx={lambda}");
        let x0 = LEFT + p as f64 * (PANEL_W + GAP);
        let extra: &[f64] = if reference_band { &[0.95, 1.05] } else { &[] };
        let (lo, hi) = padded_range(
            row.iter()
                .flat_map(|(_, _, b)| {
                    [b.whisker_low, b.whisker_high]
                        .into_iter()
                        .chain(b.outliers.iter().copied())
                })
                .chain(extra.iter().copied()),
        );
        let ys = Scale::new(lo, hi, TOP + PANEL_H, TOP);
        svg.rect(x0, TOP, PANEL_W, PANEL_H, "#f4f4f4", "#999999");
        y_axis(&mut svg, &ys, x0, lo, hi);
        svg.text(
            x0 + PANEL_W / 2.0,
            TOP + PANEL_H + 38.0,
            12.0,
            "middle",
            &format!("lambda_WX = {lambda}"),
        );
        if reference_band {
            for (v, kind) in [(0.95, "band_low"), (1.0, "reference"), (1.05, "band_high")] {
                let y = ys.map(v);
                svg.line(
                    x0,
                    y,
                    x0 + PANEL_W,
                    y,
                    if kind == "reference" { "#1f4e9c" } else { "#888888" },
                    true,
                );
                data.push(&panel, "reference", kind, None, v);
            }
        }
        let slot = PANEL_W / row.len() as f64;
        for (i, (alpha, n, b)) in row.iter().enumerate() {
            let series = format!("alpha={alpha}");
            let cx = x0 + slot * (i as f64 + 0.5);
            let half = slot * 0.3;
            svg.line(cx, ys.map(b.whisker_low), cx, ys.map(b.q1), "#333333", false);
            svg.line(cx, ys.map(b.q3), cx, ys.map(b.whisker_high), "#333333", false);
            svg.line(
                cx - half / 2.0,
                ys.map(b.whisker_low),
                cx + half / 2.0,
                ys.map(b.whisker_low),
                "#333333",
                false,
            );
            svg.line(
                cx - half / 2.0,
                ys.map(b.whisker_high),
                cx + half / 2.0,
                ys.map(b.whisker_high),
                "#333333",
                false,
            );
            let top = ys.map(b.q3);
            svg.rect(
                cx - half,
                top,
                2.0 * half,
                (ys.map(b.q1) - top).max(0.5),
                "#cfe0f5",
                "#333333",
            );
            svg.line(
                cx - half,
                ys.map(b.median),
                cx + half,
                ys.map(b.median),
                "#000000",
                false,
            );
            for o in &b.outliers {
                svg.circle(cx, ys.map(*o), 2.0, "#333333");
            }
            svg.text(cx, TOP + PANEL_H + 16.0, 10.0, "middle", &format!("a={alpha}"));
            let x = Some(*alpha);
            data.push(&panel, &series, "n", x, *n as f64);
            for (kind, v) in [
                ("whisker_low", b.whisker_low),
                ("q1", b.q1),
                ("median", b.median),
                ("q3", b.q3),
                ("whisker_high", b.whisker_high),
            ] {
                data.push(&panel, &series, kind, x, v);
            }
            for o in &b.outliers {
                data.push(&panel, &series, "outlier", x, *o);
            }
        }
    }
    Ok((svg.finish(), data))
}

fn strip_figure(records: &[TriadRecord], lambda_rx: f64, lambda_wx: f64) -> Result<(String, FigureData), IoError> {
    let rhos = unique_sorted(records.iter().map(|r| r.rho_rw));
    let selected: Vec<&TriadRecord> = records
        .iter()
        .filter(|r| close(r.lambda_rx, lambda_rx) && close(r.lambda_wx, lambda_wx))
        .collect();
    let mut panels = Vec::new();
    for &rho in &rhos {
        let cell: Vec<&TriadRecord> = selected.iter().copied().filter(|r| close(r.rho_rw, rho)).collect();
        if cell.is_empty() {
            return Err(IoError::FacetMismatch(format!(
                "no records for lambda = ({lambda_rx}, {lambda_wx}), rho_rw = {rho}"
            )));
        }
        panels.push((rho, cell));
    }
    let points = || {
        panels
            .iter()
            .flat_map(|(_, c)| c.iter())
            .filter(|r| r.status == TriadStatus::Ok)
            .filter_map(|r| r.vc_hat)
    };
    let truth = panels[0].1[0].vc_true;
    let (lo, hi) = padded_range(points().chain([truth]));
    let max_rep = panels
        .iter()
        .flat_map(|(_, c)| c.iter().map(|r| r.replicate))
        .max()
        .unwrap_or(0) as f64;

    let panel_h = 140.0;
    let plot_w = 560.0;
    let width = LEFT + plot_w + 110.0;
    let height = TOP + panels.len() as f64 * (panel_h + 10.0) + BOTTOM;
    let mut svg = Svg::new(width, height);
    let mut data = FigureData::default();
    svg.text(
        width / 2.0,
        20.0,
        14.0,
        "middle",
        &format!("VC estimates, (lambda_RX, lambda_WX) = ({lambda_rx}, {lambda_wx})"),
    );
    let xs = Scale::new(0.0, max_rep.max(1.0), LEFT + 5.0, LEFT + plot_w - 5.0);
    for (p, (rho, cell)) in panels.iter().enumerate() {
        let panel = format!("rho_rw={rho}");
        let y0 = TOP + p as f64 * (panel_h + 10.0);
        let ys = Scale::new(lo, hi, y0 + panel_h, y0);
        svg.rect(LEFT, y0, plot_w, panel_h, "#f4f4f4", "#999999");
        y_axis(&mut svg, &ys, LEFT, lo, hi);
        svg.text(
            LEFT + plot_w + 10.0,
            y0 + panel_h / 2.0,
            12.0,
            "start",
            &format!("rho_RW = {rho}"),
        );
        for r in cell.iter() {
            if let (TriadStatus::Ok, Some(v)) = (r.status, r.vc_hat) {
                svg.circle(xs.map(r.replicate as f64), ys.map(v), 1.8, "#c0392b");
                data.push(&panel, "vc_hat", "point", Some(r.replicate as f64), v);
            }
        }
        let t = cell[0].vc_true;
        svg.line(LEFT, ys.map(t), LEFT + plot_w, ys.map(t), "#1f4ed8", true);
        data.push(&panel, "vc_true", "truth", None, t);
    }
    svg.text(LEFT + plot_w / 2.0, height - 15.0, 12.0, "middle", "replicate");
    Ok((svg.finish(), data))
}

pub const DENSITY_PLOT_WIDTH: f64 = 560.0;

fn density_figure(c: &DensityCurves) -> (String, FigureData) {
    let plot_h = 320.0;
    let width = LEFT + DENSITY_PLOT_WIDTH + 40.0;
    let height = TOP + plot_h + BOTTOM;
    let mut svg = Svg::new(width, height);
    let mut data = FigureData::default();
    let grid = &c.truth.grid;
    let (x_lo, x_hi) = (grid[0], grid[grid.len() - 1]);
    let y_hi = c
        .truth
        .density
        .iter()
        .chain(&c.biomarker.density)
        .fold(0.0f64, |a, b| a.max(*b))
        * 1.05;
    let xs = Scale::new(x_lo, x_hi, LEFT, LEFT + DENSITY_PLOT_WIDTH);
    let ys = Scale::new(0.0, y_hi.max(1e-12), TOP + plot_h, TOP);
    svg.text(
        width / 2.0,
        20.0,
        14.0,
        "middle",
        &format!(
            "Densities for W in [{}, {}]",
            tick_label(c.w_band.0),
            tick_label(c.w_band.1)
        ),
    );
    svg.rect(LEFT, TOP, DENSITY_PLOT_WIDTH, plot_h, "#f4f4f4", "#999999");
    y_axis(&mut svg, &ys, LEFT, 0.0, y_hi);
    for t in nice_ticks(x_lo, x_hi, 6) {
        let x = xs.map(t);
        svg.line(x, TOP + plot_h, x, TOP + plot_h + 4.0, "#333333", false);
        svg.text(x, TOP + plot_h + 16.0, 10.0, "middle", &tick_label(t));
    }
    for (curve, colour, dashed) in [(&c.truth, "#c0392b", false), (&c.biomarker, "#1f4ed8", true)] {
        let pts: Vec<(f64, f64)> = curve
            .grid
            .iter()
            .zip(&curve.density)
            .map(|(g, d)| (xs.map(*g), ys.map(*d)))
            .collect();
        svg.polyline(&pts, colour, dashed);
        let mx = xs.map(curve.mean);
        svg.line(mx, TOP, mx, TOP + plot_h, colour, dashed);
        for (g, d) in curve.grid.iter().zip(&curve.density) {
            data.push("", &curve.label, "density", Some(*g), *d);
        }
        data.push("", &curve.label, "mean", Some(curve.mean), mx);
    }
    svg.text(
        LEFT + DENSITY_PLOT_WIDTH - 80.0,
        TOP + 18.0,
        11.0,
        "start",
        "X|W (solid)",
    );
    svg.text(
        LEFT + DENSITY_PLOT_WIDTH - 80.0,
        TOP + 34.0,
        11.0,
        "start",
        "M|W (dashed)",
    );
    (svg.finish(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_statistics_with_outlier() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]);
        assert_eq!(b.median, 3.5);
        assert_eq!(b.q1, 2.25);
        assert_eq!(b.q3, 4.75);
        assert_eq!(b.whisker_high, 5.0);
        assert_eq!(b.whisker_low, 1.0);
        assert_eq!(b.outliers, vec![100.0]);
    }

    #[test]
    fn wrong_input_for_kind() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_figure(
            FigureInput::Calibration(&[]),
            FigureKind::Density,
            &dir.path().join("x.svg"),
        )
        .unwrap_err();
        assert!(matches!(err, IoError::FacetMismatch(_)));
    }
}
