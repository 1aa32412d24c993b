fn main() {
    std::process::exit(han_ddi_cli::run(std::env::args_os()));
}
