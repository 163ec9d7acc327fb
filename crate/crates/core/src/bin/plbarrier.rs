fn main() {
    std::process::exit(plbarrier::cli::main_with_args(std::env::args_os()));
}
