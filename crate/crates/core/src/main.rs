fn main() {
    std::process::exit(qmest::cli::main_with_args(std::env::args_os()));
}
