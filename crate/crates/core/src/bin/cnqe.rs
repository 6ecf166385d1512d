fn main() {
    std::process::exit(cnqe::cli::main_entry());
}
