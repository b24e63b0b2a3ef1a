fn main() {
    std::process::exit(pencil_cli::run(std::env::args_os()));
}
