fn main() {
    std::process::exit(progenykit::cli::main());
}
