fn main() {
    std::process::exit(coded_caching::cli::main());
}
