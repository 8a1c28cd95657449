fn main() {
    std::process::exit(miseal_cli::run(std::env::args_os()));
}
