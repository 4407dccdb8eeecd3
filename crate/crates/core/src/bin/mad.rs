fn main() {
    std::process::exit(mad::cli::main());
}
