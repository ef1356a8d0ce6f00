use clap::Parser;
use gazekit_service::cli::{run, Cli};

fn main() {
    match run(Cli::parse()) {
        Ok(msg) => println!("{msg}"),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            std::process::exit(if e.status().is_client_error() { 2 } else { 1 });
        }
    }
}
