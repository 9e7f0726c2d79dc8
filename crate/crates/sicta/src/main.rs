fn main() {
    std::process::exit(sicta::cli::run());
}
