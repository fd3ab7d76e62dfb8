fn main() -> std::process::ExitCode {
    hdprior::cli::main()
}
