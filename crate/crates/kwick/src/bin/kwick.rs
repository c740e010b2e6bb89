fn main() {
    std::process::exit(kwick::cli::run_command(std::env::args_os()));
}
