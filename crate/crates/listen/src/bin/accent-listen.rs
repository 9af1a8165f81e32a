use std::path::PathBuf;
use std::sync::Arc;

use accent_listen::http::{router, AppState};
use accent_listen::ListenService;
use clap::Parser;

/// Serve XAB accent listening tests.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Append-only event log; replayed on start.
    #[arg(long, default_value = "listen-events.jsonl")]
    data: PathBuf,
    /// Directory of `<audio_id>.wav` stimuli.
    #[arg(long)]
    audio_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let service = match ListenService::open(&args.data) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(3);
        }
    };
    let app = router(AppState {
        service: Arc::new(service),
        audio_dir: args.audio_dir,
    });
    let listener = match tokio::net::TcpListener::bind(&args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.addr);
            std::process::exit(2);
        }
    };
    log::info!("listening on {}", args.addr);
    if let Err(e) = axum::serve(listener, app).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
