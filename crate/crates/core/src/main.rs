fn main() {
    std::process::exit(ylab::cli::main_with_args(std::env::args_os()));
}
