fn main() -> std::process::ExitCode {
    mmbridge::cli::main_with_args(std::env::args_os())
}
