fn main() -> std::process::ExitCode {
    premem::cli::main()
}
