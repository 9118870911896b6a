fn main() -> std::process::ExitCode {
    spatok::cli::main()
}
