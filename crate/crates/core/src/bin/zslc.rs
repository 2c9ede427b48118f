fn main() {
    std::process::exit(zslc::cli::run(std::env::args_os()));
}
