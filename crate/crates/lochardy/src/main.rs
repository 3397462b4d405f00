fn main() -> std::process::ExitCode {
    lochardy::cli::main()
}
