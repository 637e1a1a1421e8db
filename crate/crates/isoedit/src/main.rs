fn main() {
    std::process::exit(isoedit::cli::main_with_args(std::env::args_os()));
}
