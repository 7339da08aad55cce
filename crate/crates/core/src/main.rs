use std::process::ExitCode;

fn main() -> ExitCode {
    vexlab::cli::main()
}
