use std::process::ExitCode;

fn main() -> ExitCode {
    loadsphere::cli::main_entry()
}
