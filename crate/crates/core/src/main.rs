fn main() {
    std::process::exit(nira::cli::main());
}
