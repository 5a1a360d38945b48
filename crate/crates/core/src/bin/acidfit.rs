fn main() -> std::process::ExitCode {
    acidfit::cli::main()
}
