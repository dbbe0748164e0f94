fn main() -> std::process::ExitCode {
    interflow::cli::main_with_args(std::env::args_os())
}
