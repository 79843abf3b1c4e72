fn main() {
    std::process::exit(qklab::cli::main());
}
