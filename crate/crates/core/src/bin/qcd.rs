fn main() {
    std::process::exit(qcd::cli::main_with_args(std::env::args_os()));
}
