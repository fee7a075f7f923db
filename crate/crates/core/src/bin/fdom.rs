fn main() -> std::process::ExitCode {
    fdom_core::cli::main_with(std::env::args_os())
}
