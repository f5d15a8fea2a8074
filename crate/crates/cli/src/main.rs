fn main() {
    std::process::exit(duality_cli::main_with_args(std::env::args_os()));
}
