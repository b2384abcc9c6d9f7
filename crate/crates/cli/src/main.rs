use std::process::ExitCode;

use actin_machine_cli::args::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.command.run().and_then(|(m, out)| out.write_to(&m.output_dir));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("adm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
