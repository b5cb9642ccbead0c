fn main() {
    std::process::exit(prevtrial::cli::run(std::env::args_os()));
}
