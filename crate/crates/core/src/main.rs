fn main() {
    std::process::exit(garchnn::cli::main_with_args(std::env::args_os()));
}
