fn main() {
    std::process::exit(topojscc::cli::run(std::env::args_os()));
}
