fn main() {
    std::process::exit(ddsplit_cli::main_with_args(std::env::args_os()));
}
