fn main() {
    std::process::exit(keen_delay::cli::run(std::env::args_os()));
}
