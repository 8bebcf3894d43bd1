fn main() {
    std::process::exit(lunarkit::cli::run(std::env::args_os()));
}
