fn main() {
    std::process::exit(aczel::cli::main_with_args(std::env::args_os()));
}
