fn main() {
    std::process::exit(subjective_bubbles::cli::main_exit());
}
