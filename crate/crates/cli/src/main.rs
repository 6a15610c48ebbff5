use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdcb_cli::{load_spec, run_experiment, write_csv, CliError};
use tdcb_core::codebook::{rotate_resampling, rvq_codebook, CodebookKind};
use tdcb_core::correlation::CorrelationEstimate;
use tdcb_core::correlation::CorrelationMethod;
use tdcb_core::flatfile;
use tdcb_core::linalg::psd_sqrt;
use tdcb_core::simulator::user_correlation;
use tdcb_core::tucker::{mismatch, rotation_sqrt, tucker_pipeline};

#[derive(Parser)]
#[command(
    name = "tdcb",
    version,
    about = "Tucker-decomposed rotated codebooks for 3D MIMO limited feedback"
)]
struct Cli {
    /// Overrides the seed of the spec or command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: the spec's `output`, else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment spec and write the CSV table.
    Simulate { spec: PathBuf },
    /// Tucker-decompose a correlation matrix file and report the mismatch.
    Decompose {
        matrix: PathBuf,
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
    },
    /// Write the analytic correlation of one simulated user.
    GenCorr {
        spec: PathBuf,
        /// Sweep cell index (row order of `simulate`).
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value_t = 0)]
        user: usize,
    },
    /// Write a base RVQ codebook, optionally rotated.
    Codebook {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        bits: u32,
        /// Rotate by the square root of this correlation matrix file.
        #[arg(long, conflicts_with = "tucker")]
        rotate: Option<PathBuf>,
        /// Rotate by the square root of this Tucker rotation file.
        #[arg(long)]
        tucker: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, text: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { spec } => {
            let spec_data = load_spec(&spec)?;
            let rows = run_experiment(&spec_data, cli.seed)?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            emit(cli.out.as_deref().or(spec_data.output.as_deref()), &buf)
        }
        Command::Decompose { matrix, n1, n2 } => {
            let r = flatfile::read_matrix::<f64>(&read(&matrix)?)?;
            let est = CorrelationEstimate::new(r, 1, CorrelationMethod::SampleAverage)?;
            let t = tucker_pipeline(&est, n1, n2)?;
            let m = mismatch(&est, &t)?;
            let out = cli.out.unwrap_or_else(|| matrix.with_extension("tucker"));
            emit(Some(&out), flatfile::write_tucker(&t).as_bytes())?;
            println!("absolute_mismatch {:.16e}", m.absolute);
            println!("relative_mismatch {:.16e}", m.relative);
            println!(
                "parameters {} of {} reals (reduction {:.6})",
                t.stored_reals(),
                t.full_matrix_reals(),
                t.stored_reals() as f64 / t.full_matrix_reals() as f64
            );
            println!("rotation written to {}", out.display());
            Ok(())
        }
        Command::GenCorr {
            spec,
            cell,
            trial,
            user,
        } => {
            let spec_data = load_spec(&spec)?;
            let cells = spec_data.cells();
            let base = cells
                .get(cell)
                .ok_or_else(|| CliError::Config(format!("cell {cell} out of range, spec has {}", cells.len())))?;
            let mut cfg = base.to_sim_config()?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let est = user_correlation::<f64>(&cfg, trial, 0, user)?;
            emit(cli.out.as_deref(), flatfile::write_matrix(&est.r).as_bytes())
        }
        Command::Codebook {
            dim,
            bits,
            rotate,
            tucker,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let base = rvq_codebook::<f64>(seed, dim, bits)?;
            let cb = if let Some(p) = rotate {
                let s = psd_sqrt(&flatfile::read_matrix(&read(&p)?)?)?;
                rotate_resampling(&base, &s, CodebookKind::Rotated, seed)?
            } else if let Some(p) = tucker {
                let s = rotation_sqrt(&flatfile::read_tucker(&read(&p)?)?);
                rotate_resampling(&base, &s, CodebookKind::TuckerRotated, seed)?
            } else {
                base
            };
            emit(cli.out.as_deref(), flatfile::write_codebook(&cb).as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
