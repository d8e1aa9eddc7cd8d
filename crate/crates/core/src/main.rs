fn main() -> std::process::ExitCode {
    stochflock::harness::cli::main()
}
