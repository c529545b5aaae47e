fn main() {
    std::process::exit(workbench::cli::main_with_args(std::env::args_os()));
}
