fn main() {
    std::process::exit(holozero_cli::run_from_args(std::env::args_os()));
}
