fn main() {
    std::process::exit(demobench::cli::main());
}
