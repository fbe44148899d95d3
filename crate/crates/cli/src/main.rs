//! `toolgate` — build, query, serve, and evaluate a semantic MCP tool index.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use toolgate::config::{load_config, AppConfig, ConfigError};
use toolgate::document::EnrichmentTable;
use toolgate::embedding::{Provider, ProviderKind, ProviderSpec};
use toolgate::evalkit::{self, render_report, ReportFormat};
use toolgate::gateway;
use toolgate::index::{self, IndexSnapshot};
use toolgate::pipeline::{select_tools, PipelineError};
use toolgate::tokens::TokenizerSpec;

#[derive(Parser)]
#[command(name = "toolgate", version, about = "Semantic tool discovery for MCP servers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ProviderChoice {
    Reference,
    Remote,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TokenizerChoice {
    WhitespacePunct,
    ApproximateChars,
    ExternalVocab,
}

#[derive(Subcommand)]
enum Command {
    /// Discover tools from the configured servers and persist an index
    Index {
        /// Config file naming servers, provider, and tokenizer
        #[arg(long)]
        config: PathBuf,
        /// Where to write the index file
        #[arg(long)]
        out: PathBuf,
        /// Override the provider kind from the config
        #[arg(long)]
        provider: Option<ProviderChoice>,
        /// Override the tokenizer kind from the config
        #[arg(long)]
        tokenizer: Option<TokenizerChoice>,
    },
    /// Rank tools from a persisted index for one query
    Search {
        /// Index file written by `toolgate index`
        #[arg(long)]
        index: PathBuf,
        /// Query text
        query: String,
        /// Number of tools to retrieve
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Minimum similarity; below it the fallback applies
        #[arg(long)]
        threshold: Option<f32>,
        /// Config file (needed to reach a remote provider)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        provider: Option<ProviderChoice>,
    },
    /// Run the HTTP gateway
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a labeled dataset against an index and render reports
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// K values to sweep (repeatable); defaults to 1 2 3 5 10
        #[arg(long = "k")]
        ks: Vec<usize>,
        #[arg(long)]
        threshold: Option<f32>,
        /// Report format: md or csv
        #[arg(long, default_value = "md")]
        format: String,
        /// Directory for report and metrics output
        #[arg(long)]
        out: PathBuf,
        /// Include measured latency columns in the rendered tables
        /// (they vary run to run, so golden comparisons leave them out)
        #[arg(long)]
        latency: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        provider: Option<ProviderChoice>,
    },
    /// Print a text listing of a persisted index
    Inspect {
        #[arg(long)]
        index: PathBuf,
    },
}

/// Failure classes mapped onto exit codes: usage 1, runtime 2, validation 3.
enum CliError {
    Usage(String),
    Runtime(String),
    Validation(String),
}

impl CliError {
    fn exit(self) -> ExitCode {
        let (code, class, message) = match self {
            CliError::Usage(m) => (1, "usage", m),
            CliError::Runtime(m) => (2, "runtime", m),
            CliError::Validation(m) => (3, "validation", m),
        };
        eprintln!("toolgate: {class} error: {message}");
        ExitCode::from(code)
    }
}

impl From<ConfigError> for CliError {
    fn from(err: ConfigError) -> Self {
        match err {
            ConfigError::Unreadable { .. } => CliError::Runtime(err.to_string()),
            ConfigError::Parse(_) | ConfigError::Invalid(_) => {
                CliError::Validation(err.to_string())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version are successful exits, anything else is a usage error
            if err.use_stderr() {
                let _ = err.print();
                return ExitCode::from(1);
            }
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => err.exit(),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Index {
            config,
            out,
            provider,
            tokenizer,
        } => cmd_index(&config, &out, provider, tokenizer),
        Command::Search {
            index,
            query,
            k,
            threshold,
            config,
            provider,
        } => cmd_search(&index, &query, k, threshold, config.as_deref(), provider),
        Command::Serve { config } => cmd_serve(&config),
        Command::Eval {
            index,
            dataset,
            ks,
            threshold,
            format,
            out,
            latency,
            config,
            provider,
        } => cmd_eval(
            &index,
            &dataset,
            &ks,
            threshold,
            &format,
            &out,
            latency,
            config.as_deref(),
            provider,
        ),
        Command::Inspect { index } => cmd_inspect(&index),
    }
}

fn apply_overrides(
    mut config: AppConfig,
    provider: Option<ProviderChoice>,
    tokenizer: Option<TokenizerChoice>,
) -> Result<AppConfig, CliError> {
    match provider {
        None => {}
        Some(ProviderChoice::Reference) => {
            config.provider = ProviderSpec::reference(config.provider.dimension());
        }
        Some(ProviderChoice::Remote)
            if !matches!(config.provider.kind, ProviderKind::RemoteHttp { .. }) =>
        {
            return Err(CliError::Usage(
                "--provider remote needs a remote-http [provider] block in the config".into(),
            ));
        }
        Some(ProviderChoice::Remote) => {}
    }
    match tokenizer {
        None => {}
        Some(TokenizerChoice::WhitespacePunct) => {
            config.tokenizer = TokenizerSpec::WhitespacePunct;
        }
        Some(TokenizerChoice::ApproximateChars) => {
            config.tokenizer = TokenizerSpec::ApproximateChars { chars_per_token: 4 };
        }
        Some(TokenizerChoice::ExternalVocab)
            if !matches!(config.tokenizer, TokenizerSpec::ExternalVocab { .. }) =>
        {
            return Err(CliError::Usage(
                "--tokenizer external-vocab needs tokenizer.vocab_path in the config".into(),
            ));
        }
        Some(TokenizerChoice::ExternalVocab) => {}
    }
    Ok(config)
}

fn load_enrichments(config: &AppConfig) -> Result<EnrichmentTable, CliError> {
    match &config.enrichment_path {
        Some(path) => EnrichmentTable::load(path).map_err(|e| CliError::Runtime(e.to_string())),
        None => Ok(EnrichmentTable::empty()),
    }
}

fn cmd_index(
    config_path: &Path,
    out: &Path,
    provider: Option<ProviderChoice>,
    tokenizer: Option<TokenizerChoice>,
) -> Result<(), CliError> {
    let config = apply_overrides(load_config(config_path)?, provider, tokenizer)?;
    if config.endpoints.is_empty() {
        return Err(CliError::Usage(
            "config lists no MCP servers to discover from".into(),
        ));
    }
    let provider = Provider::new(&config.provider).map_err(|e| CliError::Runtime(e.to_string()))?;
    let enrichments = load_enrichments(&config)?;
    let catalog = toolgate::mcp::snapshot_catalog(&config.endpoints, config.discovery_mode)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for diagnostic in &catalog.diagnostics {
        eprintln!(
            "warning: server {} failed: {}",
            diagnostic.server_id, diagnostic.error
        );
    }
    let snapshot = index::build(&catalog, &provider, &enrichments, &config.tokenizer)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    index::persist(&snapshot, out).map_err(|e| CliError::Runtime(e.to_string()))?;

    for (server_id, count) in catalog.per_server_counts() {
        println!("server {server_id}: {count} tools");
    }
    println!("catalog: {} tools", snapshot.len());
    println!("baseline tokens: {}", snapshot.baseline_tokens());
    println!("catalog_hash: {}", snapshot.catalog_hash);
    println!("index written to {}", out.display());
    Ok(())
}

/// Reconstruct the embedding provider for a loaded snapshot. A reference
/// index carries everything needed; a remote one needs the config file.
fn provider_for_snapshot(
    snapshot: &IndexSnapshot,
    config_path: Option<&Path>,
    choice: Option<ProviderChoice>,
) -> Result<Provider, CliError> {
    let spec = match config_path {
        Some(path) => apply_overrides(load_config(path)?, choice, None)?.provider,
        None if snapshot.provider_id == "reference" => {
            ProviderSpec::reference(snapshot.dimension)
        }
        None => {
            return Err(CliError::Usage(format!(
                "index was built by provider `{}`; pass --config to configure it",
                snapshot.provider_id
            )))
        }
    };
    if spec.provider_id != snapshot.provider_id {
        return Err(CliError::Validation(format!(
            "provider `{}` does not match the index provider `{}`",
            spec.provider_id, snapshot.provider_id
        )));
    }
    if spec.dimension() != snapshot.dimension {
        return Err(CliError::Validation(format!(
            "provider dimension {} does not match the index dimension {}",
            spec.dimension(),
            snapshot.dimension
        )));
    }
    Provider::new(&spec).map_err(|e| CliError::Runtime(e.to_string()))
}

fn cmd_search(
    index_path: &Path,
    query: &str,
    k: usize,
    threshold: Option<f32>,
    config_path: Option<&Path>,
    choice: Option<ProviderChoice>,
) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Usage("k must be at least 1".into()));
    }
    let snapshot = index::load(index_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let provider = provider_for_snapshot(&snapshot, config_path, choice)?;
    let selection = select_tools(&snapshot, &provider, query, k, threshold).map_err(|e| match e {
        PipelineError::EmptyQuery => CliError::Usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;

    println!("{:<4} {:<40} {:>8} {:>7}", "rank", "tool", "score", "tokens");
    for (position, ranked) in selection.ranked.iter().enumerate() {
        let tokens = snapshot
            .entry(&ranked.key)
            .map(|e| e.schema_token_count)
            .unwrap_or(0);
        println!(
            "{:<4} {:<40} {:>8.4} {:>7}",
            position + 1,
            ranked.key.to_string(),
            ranked.score,
            tokens
        );
    }
    if selection.fallback_applied {
        println!("fallback applied: no tool met the threshold, returning unthresholded top-k");
    }
    println!(
        "selected tokens: {} of {} (TRR {:.4})",
        selection.selected_tokens, selection.baseline_tokens, selection.trr
    );
    Ok(())
}

fn cmd_serve(config_path: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    if config.endpoints.is_empty() {
        return Err(CliError::Usage(
            "config lists no MCP servers to discover from".into(),
        ));
    }
    gateway::serve(config).map_err(|e| match e {
        gateway::GatewayError::Config(m) => CliError::Validation(m),
        other => CliError::Runtime(other.to_string()),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    index_path: &Path,
    dataset_path: &Path,
    ks: &[usize],
    threshold: Option<f32>,
    format: &str,
    out: &Path,
    latency: bool,
    config_path: Option<&Path>,
    choice: Option<ProviderChoice>,
) -> Result<(), CliError> {
    let format: ReportFormat = format
        .parse()
        .map_err(|e: evalkit::ReportError| CliError::Usage(e.to_string()))?;
    let snapshot = index::load(index_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let provider = provider_for_snapshot(&snapshot, config_path, choice)?;
    let dataset = evalkit::load_dataset(dataset_path, &snapshot)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let ks: Vec<usize> = if ks.is_empty() {
        evalkit::DEFAULT_KS.to_vec()
    } else {
        ks.to_vec()
    };
    let report = evalkit::evaluate(&snapshot, &provider, &dataset, &ks, threshold)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("create {}: {e}", out.display())))?;
    let rendered =
        render_report(&report, format, latency).map_err(|e| CliError::Runtime(e.to_string()))?;
    let report_path = out.join(match format {
        ReportFormat::Markdown => "report.md",
        ReportFormat::Csv => "report.csv",
    });
    std::fs::write(&report_path, &rendered)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", report_path.display())))?;
    let metrics_path = out.join("metrics.json");
    let metrics_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(&metrics_path, metrics_json)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", metrics_path.display())))?;

    println!(
        "evaluated {} queries over {} tools at k = {:?}",
        report.query_count, report.catalog_size, report.ks
    );
    println!("report written to {}", report_path.display());
    println!("metrics written to {}", metrics_path.display());
    Ok(())
}

fn cmd_inspect(index_path: &Path) -> Result<(), CliError> {
    let snapshot = index::load(index_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    print!("{}", snapshot.export_text());
    Ok(())
}
