fn main() {
    std::process::exit(mimo_secrecy::cli::main_with_args(std::env::args_os()));
}
