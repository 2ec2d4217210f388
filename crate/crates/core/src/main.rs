fn main() {
    std::process::exit(pssa::cli::main());
}
