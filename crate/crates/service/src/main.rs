use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use pcl_service::{router, AppState, Journal, Registry};

#[derive(Parser)]
#[command(name = "pcl-serve", about = "HTTP API for live part-wise elicitation sessions")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for session journals; sessions found there are restored at startup.
    #[arg(long)]
    journal: Option<PathBuf>,
    /// Directory of additional problem files, registered by file stem.
    #[arg(long)]
    problems: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let mut registry = Registry::with_builtins()?;
    if let Some(dir) = &args.problems {
        let n = registry.load_dir(dir)?;
        eprintln!("registered {n} problem file(s) from {}", dir.display());
    }
    let journal = args.journal.map(Journal::open).transpose()?;
    let state = AppState::new(registry, journal);
    let report = state.restore()?;
    eprintln!("restored {} session(s)", report.restored.len());
    for (path, error) in &report.failed {
        eprintln!("could not restore {}: {error}", path.display());
    }
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
