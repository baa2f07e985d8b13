fn main() {
    std::process::exit(sliceparse::cli::main());
}
