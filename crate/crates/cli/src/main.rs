fn main() {
    std::process::exit(pnpqkd_cli::run(std::env::args_os()));
}
