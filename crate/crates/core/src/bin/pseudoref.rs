fn main() {
    std::process::exit(pseudoref::cli::main_entry());
}
