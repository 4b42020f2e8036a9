fn main() {
    std::process::exit(macstate::cli::run(std::env::args_os()));
}
