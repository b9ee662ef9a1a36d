fn main() {
    std::process::exit(pluridyn::cli::main_with_args(std::env::args_os()));
}
