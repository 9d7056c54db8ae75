fn main() {
    std::process::exit(optrec_cli::run(std::env::args_os()));
}
