fn main() {
    std::process::exit(protoxor::cli::main_entry());
}
