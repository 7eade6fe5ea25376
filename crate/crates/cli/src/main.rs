fn main() {
    std::process::exit(qamcs_cli::main_with_args(std::env::args_os()));
}
