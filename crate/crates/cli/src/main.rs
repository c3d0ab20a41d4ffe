fn main() {
    std::process::exit(splitsde_cli::main_with_args(std::env::args_os()));
}
