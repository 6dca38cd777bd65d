use clap::Parser;
use nvx_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("nvx: {e}");
        std::process::exit(e.exit_code());
    }
}
