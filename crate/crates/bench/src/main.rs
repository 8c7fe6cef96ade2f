use clap::Parser;
use qapbench::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("qapbench: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
