fn main() {
    std::process::exit(haiscan::cli::run_cli(std::env::args_os()));
}
