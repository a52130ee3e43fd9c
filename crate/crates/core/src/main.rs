fn main() {
    std::process::exit(shallow_vacuum::cli::run_cli(std::env::args_os()));
}
