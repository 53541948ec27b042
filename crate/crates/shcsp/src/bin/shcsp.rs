fn main() {
    std::process::exit(shcsp::cli::main());
}
