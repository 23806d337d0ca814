fn main() {
    std::process::exit(stabilis_cli::main_with_args(std::env::args_os()));
}
