fn main() {
    std::process::exit(wfa_cli::run(std::env::args_os()));
}
