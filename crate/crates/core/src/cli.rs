//! Command-line front end: `convert`, `info`, `derive`, `marginalize`,
//! `profile`, `regions`, `export`, `plot`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::binning::{bin_store, Axes, BinSpec1D, BinSpec2D, GridKind, Reduction};
use crate::error::{Error, Result};
use crate::expr::{derive_column, parse_expression};
use crate::regions::{hpd_thresholds, wilks_thresholds};
use crate::render::{
    export_grid, read_grid_document, render_plot, Colormap, ExportFormat, PlotOptions,
};
use crate::store::{
    convert_chain, read_names_file, ChainStore, ConvertOptions, DEFAULT_CHUNK_ROWS,
};

#[derive(Debug, Parser)]
#[command(
    name = "chainforge",
    version,
    about = "Out-of-core marginalized posteriors and profile likelihoods from nested-sampling chains"
)]
struct Cli {
    /// Rows per chunk (store creation) or per read (binning, derive).
    #[arg(long, global = true, env = "CHAINFORGE_CHUNK_ROWS")]
    chunk_rows: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a plain-text chain into a store.
    Convert {
        /// Text chain: weight, -2 lnL, then one column per parameter.
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated parameter names, in column order.
        #[arg(long, value_delimiter = ',', conflicts_with = "params_file")]
        params: Vec<String>,
        /// File with one parameter name per line.
        #[arg(long)]
        params_file: Option<PathBuf>,
        /// Replace an existing store at the output path.
        #[arg(long)]
        overwrite: bool,
    },
    /// Print store metadata, total weight and best log-likelihood.
    Info {
        store: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Add a column computed from an expression over existing columns.
    Derive {
        store: PathBuf,
        #[arg(long)]
        name: String,
        /// e.g. "log10(m)" or "0.001 * `m_{\chi}`".
        #[arg(long)]
        expr: String,
    },
    /// Marginalized posterior (per-bin weight sums) over one or two axes.
    Marginalize(BinArgs),
    /// Profile likelihood (per-bin maximum ln L) over one or two axes.
    Profile(BinArgs),
    /// Compute region thresholds and store them in a grid document.
    Regions {
        grid: PathBuf,
        /// Credible levels for a posterior grid, e.g. 0.95,0.68.
        #[arg(long, value_delimiter = ',', required_unless_present = "confidence")]
        credible: Vec<f64>,
        /// Confidence levels for a profile grid.
        #[arg(long, value_delimiter = ',', conflicts_with = "credible")]
        confidence: Vec<f64>,
        /// Output document (defaults to rewriting the input).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-export a grid document as CSV or JSON.
    Export {
        grid: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        format: Option<String>,
    },
    /// Render a grid document (with any stored thresholds) to PNG.
    Plot {
        grid: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 800)]
        width: u32,
        #[arg(long, default_value_t = 600)]
        height: u32,
        #[arg(long)]
        xlabel: Option<String>,
        #[arg(long)]
        ylabel: Option<String>,
        #[arg(long, default_value = "viridis")]
        colormap: String,
    },
}

#[derive(Debug, Args)]
struct BinArgs {
    store: PathBuf,
    #[arg(short = 'x', long = "xvar")]
    xvar: String,
    /// Lower and upper x limit, e.g. 0,3.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    xlim: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    xbins: usize,
    #[arg(short = 'y', long = "yvar")]
    yvar: Option<String>,
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    ylim: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    ybins: usize,
    #[arg(short, long)]
    output: PathBuf,
    /// csv or json; inferred from the output extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Bin chunks on all cores (deterministic, merged in chunk order).
    #[arg(long)]
    parallel: bool,
}

fn limits(name: &str, values: &[f64]) -> Result<(f64, f64)> {
    match values {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::Invalid(format!(
            "--{name} takes two comma-separated numbers, e.g. 0,3"
        ))),
    }
}

impl BinArgs {
    fn axes(&self) -> Result<Axes> {
        let (xlo, xhi) = limits("xlim", &self.xlim)?;
        let x = BinSpec1D::new(self.xvar.clone(), xlo, xhi, self.xbins)?;
        match &self.yvar {
            None => {
                if !self.ylim.is_empty() {
                    return Err(Error::Invalid("--ylim given without -y".into()));
                }
                Ok(Axes::One(x))
            }
            Some(yvar) => {
                let (ylo, yhi) = limits("ylim", &self.ylim)?;
                let y = BinSpec1D::new(yvar.clone(), ylo, yhi, self.ybins)?;
                Ok(Axes::Two(BinSpec2D::new(x, y)?))
            }
        }
    }
}

fn output_format(explicit: Option<&str>, path: &Path) -> Result<ExportFormat> {
    match explicit {
        Some(name) => ExportFormat::from_name(name),
        None => Ok(ExportFormat::from_path(path).unwrap_or(ExportFormat::Json)),
    }
}

fn open_store(path: &Path, chunk_rows: Option<usize>) -> Result<ChainStore> {
    let store = ChainStore::open(path)?;
    match chunk_rows {
        Some(n) => store.with_chunk_rows(n),
        None => Ok(store),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Convert {
            input,
            output,
            params,
            params_file,
            overwrite,
        } => {
            let names = match params_file {
                Some(p) => read_names_file(p)?,
                None => params,
            };
            let options = ConvertOptions {
                chunk_rows: cli.chunk_rows.unwrap_or(DEFAULT_CHUNK_ROWS),
                overwrite,
            };
            let store = convert_chain(&input, &names, &output, &options)?;
            writeln!(
                out,
                "wrote {} rows x {} columns to {}",
                store.n_rows(),
                store.columns().len(),
                output.display()
            )
            .map_err(io_err)?;
        }
        Command::Info { store, json } => {
            let store = open_store(&store, cli.chunk_rows)?;
            let info = store.info()?;
            if json {
                let columns: Vec<_> = info
                    .columns
                    .iter()
                    .map(|c| {
                        serde_json::json!({
                            "name": c.name,
                            "derived": c.derived,
                            "source_expr": c.source_expr,
                        })
                    })
                    .collect();
                let doc = serde_json::json!({
                    "n_rows": info.n_rows,
                    "chunk_rows": info.chunk_rows,
                    "n_chunks": info.n_chunks,
                    "total_weight": info.total_weight,
                    "max_loglike": info.max_loglike,
                    "columns": columns,
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&doc).unwrap()).map_err(io_err)?;
            } else {
                writeln!(out, "rows:         {}", info.n_rows).map_err(io_err)?;
                writeln!(out, "chunk_rows:   {}", info.chunk_rows).map_err(io_err)?;
                writeln!(out, "chunks:       {}", info.n_chunks).map_err(io_err)?;
                writeln!(out, "total_weight: {}", info.total_weight).map_err(io_err)?;
                writeln!(out, "max_loglike:  {}", info.max_loglike).map_err(io_err)?;
                writeln!(out, "columns:").map_err(io_err)?;
                for c in &info.columns {
                    match &c.source_expr {
                        Some(e) => writeln!(out, "  {} = {}", c.name, e),
                        None if c.derived => writeln!(out, "  {} (derived)", c.name),
                        None => writeln!(out, "  {}", c.name),
                    }
                    .map_err(io_err)?;
                }
            }
        }
        Command::Derive { store, name, expr } => {
            let store = open_store(&store, cli.chunk_rows)?;
            let expr = parse_expression(&expr)?;
            derive_column(&store, &name, &expr)?;
            writeln!(out, "added column '{name}' = {expr}").map_err(io_err)?;
        }
        Command::Marginalize(args) => bin_command(args, GridKind::Posterior, cli.chunk_rows)?,
        Command::Profile(args) => bin_command(args, GridKind::Profile, cli.chunk_rows)?,
        Command::Regions {
            grid,
            credible,
            confidence,
            output,
        } => {
            let mut doc = read_grid_document(&grid)?;
            let g = doc.to_grid()?;
            let thresholds = if !credible.is_empty() {
                hpd_thresholds(&g, &credible)?
            } else {
                wilks_thresholds(&g, &confidence)?
            };
            for (p, t) in thresholds.requested.iter().zip(&thresholds.thresholds) {
                writeln!(out, "{p}\t{t}").map_err(io_err)?;
            }
            doc.thresholds = Some(thresholds);
            let path = output.unwrap_or(grid);
            std::fs::write(&path, doc.to_json()).map_err(|e| Error::io(&path, e))?;
        }
        Command::Export {
            grid,
            output,
            format,
        } => {
            let doc = read_grid_document(&grid)?;
            let g = doc.to_grid()?;
            let format = output_format(format.as_deref(), &output)?;
            export_grid(&g, doc.thresholds.as_ref(), format, &output)?;
        }
        Command::Plot {
            grid,
            output,
            width,
            height,
            xlabel,
            ylabel,
            colormap,
        } => {
            let doc = read_grid_document(&grid)?;
            let g = doc.to_grid()?;
            let options = PlotOptions {
                width,
                height,
                xlabel,
                ylabel,
                colormap: Colormap::from_name(&colormap)?,
            };
            let report = render_plot(&g, doc.thresholds.as_ref(), &output, &options)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
        }
    }
    Ok(())
}

fn bin_command(args: BinArgs, kind: GridKind, chunk_rows: Option<usize>) -> Result<()> {
    let store = open_store(&args.store, chunk_rows)?;
    let axes = args.axes()?;
    let reduction = if args.parallel {
        Reduction::Parallel
    } else {
        Reduction::Sequential
    };
    let grid = bin_store(&store, axes, kind, reduction)?;
    let format = output_format(args.format.as_deref(), &args.output)?;
    export_grid(&grid, None, format, &args.output)
}

/// Runs the CLI with explicit output streams; returns the process exit code.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return e.exit_code();
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error: {message}");
            1
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
