fn main() {
    std::process::exit(mellow::cli::main_with_args(std::env::args_os()));
}
