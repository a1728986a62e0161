use clap::Parser;
use smd_core::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let report = run(&cli);
    let text = report.render(cli.format);
    if report.exit == smd_core::cli::EXIT_INPUT && cli.format == smd_core::cli::Format::Human {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    std::process::exit(report.exit);
}
