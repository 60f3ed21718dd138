fn main() {
    std::process::exit(kicked_tops::cli::main_entry());
}
