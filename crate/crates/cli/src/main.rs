use clap::Parser;
use gazefusion_cli::{run, Cli};

fn main() {
    // clap exits with 2 on usage errors and 0 for --help
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("{}", e.line());
            std::process::exit(1);
        }
    }
}
