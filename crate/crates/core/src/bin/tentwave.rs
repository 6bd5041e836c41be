fn main() {
    std::process::exit(tentwave::cli::run(std::env::args_os()));
}
