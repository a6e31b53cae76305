fn main() {
    std::process::exit(icf::cli::main_entry(std::env::args_os()));
}
