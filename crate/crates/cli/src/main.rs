use clap::Parser;
use tracing::Level;

fn main() {
    let level = std::env::var("QNS_LOG")
        .ok()
        .and_then(|v| v.parse::<Level>().ok())
        .unwrap_or(Level::INFO);
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    let cli = qns_cli::Cli::parse();
    if let Err(e) = qns_cli::execute(&cli) {
        eprintln!("qns: {e}");
        std::process::exit(e.exit_code());
    }
}
