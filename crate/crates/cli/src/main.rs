fn main() -> std::process::ExitCode {
    stgibbs_cli::main_with_args(std::env::args_os())
}
