fn main() {
    std::process::exit(chaoskit::cli::run(std::env::args_os()));
}
