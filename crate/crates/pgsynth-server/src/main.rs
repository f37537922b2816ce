use clap::Parser;
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

/// HTTP/JSON service for Petri-game synthesis.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "PGSYNTH_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::from_default_env()).init();
    let args = Args::parse();
    let listener = TcpListener::bind(&args.bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    tokio::select! {
        r = pgsynth_server::serve(listener) => r,
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}
