fn main() {
    std::process::exit(sfi_cli::run_cli(std::env::args_os()));
}
