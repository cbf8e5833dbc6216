fn main() -> std::process::ExitCode {
    drivethru::cli::main()
}
