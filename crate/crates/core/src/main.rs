fn main() -> std::process::ExitCode {
    rtspec::cli::main_entry()
}
