fn main() -> std::process::ExitCode {
    arfa::cli::main()
}
