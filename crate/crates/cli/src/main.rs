fn main() {
    std::process::exit(scalebench_cli::main_with_args(std::env::args_os()));
}
