fn main() {
    std::process::exit(preflex::cli::run(std::env::args().collect()));
}
