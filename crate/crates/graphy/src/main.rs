use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphy::scrape::scrape;
use graphy::{App, AppConfig};
use graphy_core::generation::{IntentEdit, ReportFormat, ReportJob};
use graphy_core::graph::{export_csv, export_jsonl, NodeId};
use graphy_core::navigation::{canonical_id, ExpansionBudget};

#[derive(Parser)]
#[command(name = "graphy", version, about = "Build, explore and report on Fact/Dimension document graphs")]
struct Cli {
    /// Path to the JSON service config.
    #[arg(long, global = true, env = "GRAPHY_CONFIG", default_value = "graphy.json")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect seed documents (paths or titles) and expand along their references.
    Scrape {
        seeds: Vec<String>,
        /// Overrides the configured expansion depth.
        #[arg(long)]
        depth: Option<u32>,
        /// Overrides the configured cap on new facts.
        #[arg(long)]
        max_new: Option<usize>,
    },
    /// Write the graph out for a graph database.
    Export {
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
        #[arg(long, default_value = "export")]
        out: PathBuf,
    },
    /// Run the REST API.
    Serve {
        /// Overrides the configured bind address.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Generate a report over the given papers without the UI.
    Report {
        /// Paper ids or titles.
        #[arg(long = "select", required = true)]
        selected: Vec<String>,
        #[arg(long)]
        instruction: String,
        #[arg(long, value_enum, default_value_t = OutFormat::Latex)]
        format: OutFormat,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Markdown,
    Latex,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let config = match AppConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let app = match App::new(config) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match run(app, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_FAILURE, format!("{e:#}")),
    }
}

fn run(app: App, command: Command) -> anyhow::Result<()> {
    match command {
        Command::Scrape { seeds, depth, max_new } => {
            let mut budget: ExpansionBudget = app.config.budget;
            if let Some(d) = depth {
                budget.max_depth = d;
            }
            if let Some(n) = max_new {
                budget.max_new_facts = n;
            }
            let mut store = app.open_store()?;
            let summary = scrape(&app, &mut store, &seeds, budget)?;
            store.compact()?;
            println!("{summary}");
        }
        Command::Export { format, out } => {
            let store = app.open_store()?;
            let files = match format {
                Format::Jsonl => export_jsonl(store.graph(), &out)?,
                Format::Csv => export_csv(store.graph(), &out)?,
            };
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Serve { bind } => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(app.config.workers)
                .build_global()
                .ok();
            let addr = bind.unwrap_or_else(|| app.config.bind.clone());
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(app.config.workers)
                .enable_all()
                .build()?;
            runtime.block_on(async move {
                let state = graphy::server::state(app)?;
                let listener = graphy::server::bind(&addr).await?;
                let shutdown = async {
                    tokio::signal::ctrl_c().await.ok();
                };
                graphy::server::serve(listener, state, shutdown).await
            })?;
        }
        Command::Report {
            selected,
            instruction,
            format,
            out,
        } => {
            let store = app.open_store()?;
            let graph = store.graph();
            let ids = selected
                .iter()
                .map(|s| s.parse::<NodeId>().or_else(|_| canonical_id(s)))
                .collect::<Result<Vec<_>, _>>()?;
            let model = app.model.as_ref();
            let mut job = ReportJob::start(graph, ids, &instruction, model)?;
            job.confirm_intent(graph, &IntentEdit::default())?;
            job.propose_mindmap(model, None)?;
            job.confirm_mindmap(None)?;
            job.write_draft(model)?;
            let format = match format {
                OutFormat::Markdown => ReportFormat::Markdown,
                OutFormat::Latex => ReportFormat::Latex,
            };
            let text = job.render(format)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, text)?;
                    println!("{}", path.display());
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
