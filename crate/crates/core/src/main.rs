fn main() {
    std::process::exit(dietcalib::cli::cli_main(std::env::args_os()));
}
