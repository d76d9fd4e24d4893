fn main() {
    std::process::exit(pica_cli::run(std::env::args_os()));
}
