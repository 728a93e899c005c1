use std::process::ExitCode;

fn main() -> ExitCode {
    swarm_cli::main_with(std::env::args_os())
}
