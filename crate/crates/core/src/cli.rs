//! Command-line entry points: `build`, `neighbors`, `metrics`, `serve` and
//! `export-edges`.
//!
//! Exit codes: 0 on success, 1 for user errors, 2 for internal failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bundle::{build_from_files, Bundle};
use crate::config::{parse_lang_path, BuildConfig};
use crate::corpus::CorpusFormat;
use crate::embedding::{Metric, Mode};
use crate::error::{Error, Result};
use crate::graph::{csv_row, default_sweep, mode_label, parse_sweep, pretty_table, MetricsOptions, CSV_HEADER};
use crate::service::{neighbors_body, ServiceOptions, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "dualneighbors", version, about = "Word and embedding neighbors for corpus exploration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index bundle from a corpus and word vectors.
    Build(BuildArgs),
    /// Print neighbor lists as JSON lines.
    Neighbors(NeighborsArgs),
    /// Connectivity metrics over a sweep of (nw, ne) pairs.
    Metrics(MetricsArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write the recommendation graph as a TSV edge list.
    ExportEdges(ExportArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// key = value configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub default_lang: Option<String>,
    /// Vector file for a language, as LANG=PATH (repeatable).
    #[arg(long = "embedding", value_name = "LANG=PATH")]
    pub embeddings: Vec<String>,
    /// Lemma table for a language, as LANG=PATH (repeatable).
    #[arg(long = "lemmas", value_name = "LANG=PATH")]
    pub lemmas: Vec<String>,
    #[arg(long)]
    pub min_df: Option<usize>,
    #[arg(long)]
    pub max_df_ratio: Option<f64>,
    /// Neighborhood size of the term neighbor function.
    #[arg(short = 'M', long = "m")]
    pub m: Option<usize>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub nw: Option<usize>,
    #[arg(long)]
    pub ne: Option<usize>,
    /// Neighbors cached per document and source.
    #[arg(long)]
    pub cache_k: Option<usize>,
    #[arg(long)]
    pub positive_only: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Rebuild even when the inputs are unchanged.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Document id.
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    pub id: Option<String>,
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub nw: Option<usize>,
    #[arg(long)]
    pub ne: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Replacement,
    Expansion,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Table,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Pairs "nw,ne" separated by ';' (default 12,0;11,1;...;6,6).
    #[arg(long)]
    pub sweep: Option<String>,
    /// Embedding mode(s); defaults to the bundle's mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long)]
    pub exact_threshold: Option<usize>,
    #[arg(long)]
    pub sample_sources: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory of explorer UI assets served under /ui.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Seconds a metrics request waits before answering 202.
    #[arg(long, default_value_t = 2.0)]
    pub metrics_wait: f64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub nw: Option<usize>,
    #[arg(long)]
    pub ne: Option<usize>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn output_sink<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

pub fn build_config(args: &BuildArgs) -> Result<BuildConfig> {
    let mut config = match &args.config {
        Some(path) => BuildConfig::from_file(path)?,
        None => BuildConfig::default(),
    };
    if let Some(corpus) = &args.corpus {
        config.corpus = Some(corpus.clone());
    }
    if let Some(format) = args.format {
        config.format = Some(format);
    }
    if let Some(lang) = &args.default_lang {
        config.default_lang = lang.to_ascii_lowercase();
    }
    for spec in &args.embeddings {
        let (lang, path) = parse_lang_path(spec)?;
        config.embeddings.insert(lang, path);
    }
    for spec in &args.lemmas {
        let (lang, path) = parse_lang_path(spec)?;
        config.lemmas.insert(lang, path);
    }
    if let Some(v) = args.min_df {
        config.lexicon.min_df = v;
    }
    if let Some(v) = args.max_df_ratio {
        config.lexicon.max_df_ratio = v;
    }
    if let Some(v) = args.m {
        config.index.m = v;
    }
    if let Some(v) = args.mode {
        config.index.mode = v;
    }
    if let Some(v) = args.metric {
        config.index.metric = v;
    }
    if let Some(v) = args.nw {
        config.index.nw = v;
    }
    if let Some(v) = args.ne {
        config.index.ne = v;
    }
    if let Some(v) = args.cache_k {
        config.index.cache_k = v;
    }
    if args.positive_only {
        config.index.positive_only = true;
    }
    if let Some(v) = &args.output {
        config.output = v.clone();
    }
    Ok(config)
}

fn cmd_build(args: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let config = build_config(args)?;
    let summary = build_from_files(&config, args.force)?;
    if summary.skipped {
        writeln!(out, "bundle {} is up to date", config.output.display())?;
    }
    writeln!(
        out,
        "n={} lexicon={} p={} empty_documents={} time={:.2}s",
        summary.n, summary.lexicon_size, summary.dim, summary.empty_documents, summary.seconds
    )?;
    Ok(())
}

fn cmd_neighbors(args: &NeighborsArgs, stdout: &mut dyn Write) -> Result<()> {
    let bundle = Bundle::load(&args.bundle)?;
    let nw = args.nw.unwrap_or(bundle.config().nw);
    let ne = args.ne.unwrap_or(bundle.config().ne);
    let mut out = output_sink(args.output.as_deref(), stdout)?;
    if args.all {
        for doc in bundle.corpus.documents() {
            match neighbors_body(&bundle, &doc.id, nw, ne) {
                Ok(body) => serde_json::to_writer(&mut out, &body)?,
                Err(Error::EmptyQuery(_)) => serde_json::to_writer(
                    &mut out,
                    &serde_json::json!({
                        "config": crate::service::ConfigEcho::of(&bundle),
                        "id": doc.id,
                        "error": "empty_query",
                    }),
                )?,
                Err(e) => return Err(e),
            }
            out.write_all(b"\n")?;
        }
    } else {
        let id = args.id.as_deref().expect("clap requires an id");
        let body = neighbors_body(&bundle, id, nw, ne)?;
        serde_json::to_writer(&mut out, &body)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs, stdout: &mut dyn Write) -> Result<()> {
    let sweep = match &args.sweep {
        Some(s) => parse_sweep(s)?,
        None => default_sweep(),
    };
    let bundle = Bundle::load(&args.bundle)?;
    let mut options = MetricsOptions::default();
    if let Some(v) = args.exact_threshold {
        options.exact_threshold = v;
    }
    if let Some(v) = args.sample_sources {
        options.sample_sources = v;
    }
    let (modes, collapse) = match args.mode {
        None => (vec![bundle.config().mode], false),
        Some(ModeChoice::Replacement) => (vec![Mode::Replacement], false),
        Some(ModeChoice::Expansion) => (vec![Mode::Expansion], false),
        Some(ModeChoice::Both) => (vec![Mode::Replacement, Mode::Expansion], true),
    };
    let mut rows = Vec::new();
    for (m, &mode) in modes.iter().enumerate() {
        for &(nw, ne) in &sweep {
            // without embedding edges the mode is irrelevant; report such rows once
            if collapse && ne == 0 && m > 0 {
                continue;
            }
            let report = bundle.metrics(nw, ne, mode, &options)?;
            rows.push((mode_label(&report, collapse).to_string(), report));
        }
    }
    let mut out = output_sink(args.output.as_deref(), stdout)?;
    match args.format {
        ReportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for (label, report) in &rows {
                writeln!(out, "{}", csv_row(report, label))?;
            }
        }
        ReportFormat::Table => out.write_all(pretty_table(&rows).as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

fn cmd_export(args: &ExportArgs, stdout: &mut dyn Write) -> Result<()> {
    let bundle = Bundle::load(&args.bundle)?;
    let nw = args.nw.unwrap_or(bundle.config().nw);
    let ne = args.ne.unwrap_or(bundle.config().ne);
    let g = bundle.graph(nw, ne, args.mode.unwrap_or(bundle.config().mode))?;
    let ids: Vec<String> = bundle.corpus.documents().iter().map(|d| d.id.clone()).collect();
    let mut out = output_sink(args.output.as_deref(), stdout)?;
    g.write_tsv(&mut out, &ids)?;
    out.flush()?;
    Ok(())
}

fn cmd_serve(args: &ServeArgs) -> Result<()> {
    let options = ServiceOptions {
        sync_wait: Duration::from_secs_f64(args.metrics_wait.max(0.0)),
        static_dir: args.static_dir.clone(),
        ..ServiceOptions::default()
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(crate::service::serve(
        args.bundle.clone(),
        SocketAddr::new(args.host, args.port),
        options,
    ))
}

/// Run a parsed command.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Build(args) => cmd_build(args, stdout),
        Command::Neighbors(args) => cmd_neighbors(args, stdout),
        Command::Metrics(args) => cmd_metrics(args, stdout),
        Command::Serve(args) => cmd_serve(args),
        Command::ExportEdges(args) => cmd_export(args, stdout),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}
