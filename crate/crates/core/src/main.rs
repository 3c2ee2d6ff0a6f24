fn main() {
    std::process::exit(mortcast::cli::main_with(std::env::args_os()));
}
