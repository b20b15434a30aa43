fn main() -> std::process::ExitCode {
    wast_cli::main_entry()
}
