fn main() {
    std::process::exit(dynsbm::cli::run_from_args(std::env::args_os()));
}
