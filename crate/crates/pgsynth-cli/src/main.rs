//! `pgsynth`: command-line client of the synthesis service.
//!
//! Without `--server` an embedded service is started on a loopback port.

mod bench;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgsynth_api::{ErrorKind, RunRequest, RunResponse};
use pgsynth_client::{Client, ClientError};

#[derive(Parser)]
#[command(name = "pgsynth", version, about = "Symmetry-reduced synthesis for high-level Petri games")]
struct Cli {
    /// Base URL of a running pgsynth service; an embedded one is started otherwise.
    #[arg(long, env = "PGSYNTH_SERVER", global = true)]
    server: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a benchmark model.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Build the game graph and report its size.
    Build {
        model: PathBuf,
        #[arg(long, default_value = "canonical")]
        approach: String,
        /// Write the stats JSON here.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write the game graph as DOT here.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Build and solve the game; optionally generate a strategy.
    Solve {
        model: PathBuf,
        #[arg(long, default_value = "canonical")]
        approach: String,
        /// Generate, validate and write the strategy as DOT here.
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Write the cuts of every strategy tree node as JSON here.
        #[arg(long)]
        cuts: Option<PathBuf>,
        /// Depth bound of the strategy tree.
        #[arg(long)]
        max_depth: Option<usize>,
        /// Bound on strategy tree nodes and on strategy places plus transitions.
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Write the stats JSON here.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Exit with status 2 when the game is not realizable.
        #[arg(long)]
        require_realizable: bool,
        /// Node budget of the game graph.
        #[arg(long)]
        max_game_nodes: Option<usize>,
        /// Wall-clock budget of the game construction in seconds.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Run every `*.pg` model of a directory with several approaches.
    Bench {
        dir: PathBuf,
        /// Comma-separated approaches.
        #[arg(long, default_value = "explicit,membership,canonical", value_delimiter = ',')]
        approaches: Vec<String>,
        /// Per-cell budget in seconds.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Write the report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Node budget per cell.
        #[arg(long)]
        max_nodes: Option<usize>,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Client/Server with N computers.
    Cs {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Budget {
    /// Node budget of the game graph.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Budget(String),
    Internal(String),
    NotRealizable,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::NotRealizable => 2,
            Failure::Input(_) => 3,
            Failure::Budget(_) => 4,
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api { body, .. } => match body.kind {
                ErrorKind::Input => Failure::Input(body.message),
                ErrorKind::Budget => Failure::Budget(body.message),
                ErrorKind::Internal => Failure::Internal(body.message),
            },
            e @ ClientError::Transport(_) => Failure::Internal(e.to_string()),
        }
    }
}

fn read_model(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Internal(e.to_string()))?;
    s.push('\n');
    write(path, &s)
}

pub fn model_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

fn timeout_ms(secs: Option<f64>) -> Result<Option<u64>, Failure> {
    match secs {
        Some(s) if !(s > 0.0 && s.is_finite()) => Err(Failure::Input(format!("timeout must be positive, got {s}"))),
        Some(s) => Ok(Some((s * 1000.0).round() as u64)),
        None => Ok(None),
    }
}

async fn connect(server: Option<String>) -> Result<Client, Failure> {
    if let Some(url) = server {
        return Ok(Client::new(url));
    }
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| Failure::Internal(format!("cannot start the embedded service: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Failure::Internal(e.to_string()))?;
    tokio::spawn(pgsynth_server::serve(listener));
    Ok(Client::direct(format!("http://{addr}")))
}

fn summary(r: &RunResponse) -> String {
    let s = &r.stats;
    let verdict = match s.realizable {
        Some(true) => " realizable=yes",
        Some(false) => " realizable=no",
        None => "",
    };
    format!(
        "{} {}: |V|={} |E|={} |V_F|={} |xi|={}{} build={}ms solve={}ms",
        s.model, s.approach, s.num_nodes, s.num_edges, s.num_accepting, s.num_symmetries, verdict, s.build_ms, s.solve_ms
    )
}

fn warn(r: &RunResponse) {
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

async fn run(cli: Cli) -> Result<(), Failure> {
    let client = connect(cli.server).await?;
    match cli.cmd {
        Cmd::Gen { family: Family::Cs { n, out } } => {
            let model = client.gen_cs(n).await?;
            match out {
                Some(p) => write(&p, &model)?,
                None => print!("{model}"),
            }
        }
        Cmd::Build { model, approach, stats, dot, budget } => {
            let req = RunRequest {
                name: Some(model_name(&model)),
                model: read_model(&model)?,
                approach,
                max_nodes: budget.max_nodes,
                timeout_ms: timeout_ms(budget.timeout)?,
                game_dot: dot.is_some(),
                ..Default::default()
            };
            let r = client.build(&req).await?;
            warn(&r);
            println!("{}", summary(&r));
            if let Some(p) = stats {
                write_json(&p, &r.stats)?;
            }
            if let (Some(p), Some(d)) = (dot, &r.game_dot) {
                write(&p, d)?;
            }
        }
        Cmd::Solve {
            model,
            approach,
            strategy,
            cuts,
            max_depth,
            max_nodes,
            stats,
            require_realizable,
            max_game_nodes,
            timeout,
        } => {
            let req = RunRequest {
                name: Some(model_name(&model)),
                model: read_model(&model)?,
                approach,
                max_nodes: max_game_nodes,
                timeout_ms: timeout_ms(timeout)?,
                synthesize: strategy.is_some() || cuts.is_some(),
                max_depth,
                max_strategy_nodes: max_nodes,
                ..Default::default()
            };
            let r = client.solve(&req).await?;
            warn(&r);
            println!("{}", summary(&r));
            if let Some(p) = stats {
                write_json(&p, &r.stats)?;
            }
            if let Some(s) = &r.strategy {
                let v = &s.validation;
                println!(
                    "strategy: {} places, {} transitions, {} tree nodes, {} lassos ({}); validated on {} cuts",
                    s.places, s.transitions, s.tree_nodes, s.lassos, s.lasso_policy, v.cuts_checked
                );
                if let Some(p) = &strategy {
                    write(p, &s.dot)?;
                }
                if let Some(p) = &cuts {
                    write_json(p, &s.cuts)?;
                }
            } else if strategy.is_some() || cuts.is_some() {
                eprintln!("no strategy: the game is not realizable");
            }
            if require_realizable && r.stats.realizable != Some(true) {
                return Err(Failure::NotRealizable);
            }
        }
        Cmd::Bench { dir, approaches, timeout, json, max_nodes } => {
            let report = bench::run(&client, &dir, &approaches, timeout, max_nodes).await?;
            print!("{}", bench::table(&report));
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(m) | Failure::Budget(m) | Failure::Internal(m) => eprintln!("error: {m}"),
                Failure::NotRealizable => eprintln!("not realizable"),
            }
            ExitCode::from(f.code())
        }
    }
}
