//! `ric`: adaptive arithmetic coding of symbol sequences, information-
//! criterion order selection, MDL histogram partitioning, and grayscale
//! image quantization.
//!
//! Subcommands write machine-readable output (sequence/model text, `RIC1`
//! code files, CSV, JSON, PGM) to `-o PATH`, or to stdout when no path is
//! given; diagnostics go to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ric_core::arithcode::{decode_adaptive, encode_adaptive_message, CodedMessage};
use ric_core::criteria::{criterion_curve, select_order, Criterion};
use ric_core::histogram::{
    bin_sample, dp_select, CellGrid, HistogramReport, PartitionReport, SubPartition,
};
use ric_core::image::{
    gray_histogram, psnr, read_pgm, write_pgm, GrayImage, QuantizationReport, Quantizer,
};
use ric_core::markov::{read_model, read_sequence, simulate, write_sequence};

/// Seed used by the sampling subcommands when none is given, so published
/// command lines reproduce exactly.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "ric",
    version,
    about = "Adaptive arithmetic coding, order selection, and MDL histogram tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a sequence from a Markov model file.
    Simulate {
        /// Model text file: `m k` header, then m^k probability rows.
        #[arg(long)]
        model: PathBuf,
        /// Number of symbols to draw.
        #[arg(short = 'n', long)]
        length: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output sequence file (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode a sequence file into a RIC1 code file.
    Encode {
        /// Sequence text file: `m k` header, then the symbols.
        input: PathBuf,
        /// Coding order; defaults to the order recorded in the input file.
        #[arg(short = 'k', long)]
        order: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decode a RIC1 code file back into a sequence file.
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the order minimizing each criterion, one `name k` line each.
    OrderSelect {
        input: PathBuf,
        /// Largest order to consider.
        #[arg(long, default_value_t = 7)]
        kmax: usize,
    },
    /// Tabulate per-order criterion values as CSV.
    Curve {
        input: PathBuf,
        #[arg(long, default_value_t = 7)]
        kmax: usize,
        /// Use the exact coders instead of the fast length accounting.
        #[arg(long)]
        exact: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Select the MDL-optimal sub-partition of a regular grid over a sample.
    HistSelect {
        /// Sample file, one real per line.
        input: PathBuf,
        /// Lower end of the grid.
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        /// Upper end of the grid.
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        /// Grid step; the cell count is `(hi - lo) / step` rounded.
        #[arg(long)]
        step: f64,
        /// Sample precision as a bit count, `r = 2^-BITS`.
        #[arg(long)]
        precision_bits: Option<u32>,
        /// Include the constant `-n log2(r)` term in the reported value.
        #[arg(long, requires = "precision_bits")]
        include_precision: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw a truncated Laplace sample, one real per line.
    SampleLaplace {
        #[arg(short = 'n', long)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Gray-level histogram of a PGM image as JSON.
    ImgHist {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Quantize a PGM image onto a partition of its gray levels.
    ImgQuantize {
        input: PathBuf,
        /// Partition JSON with gray-level boundaries; when omitted, the
        /// MDL-optimal partition of the image histogram is selected.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Output PGM (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Where to write the JSON report with levels and PSNR.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            model,
            length,
            seed,
            output,
        } => {
            let text = read_text(&model)?;
            let model = read_model(&text).with_context(|| format!("parsing {}", model.display()))?;
            let seq = simulate(&model, length, seed);
            emit(output.as_deref(), write_sequence(&seq, model.order()).as_bytes())
        }
        Command::Encode {
            input,
            order,
            output,
        } => {
            let (seq, file_k) = read_sequence_file(&input)?;
            let k = order.unwrap_or(file_k);
            let msg = encode_adaptive_message(&seq, k)
                .with_context(|| format!("encoding {}", input.display()))?;
            emit(output.as_deref(), &msg.to_bytes())
        }
        Command::Decode { input, output } => {
            let bytes =
                fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let msg = CodedMessage::from_bytes(&bytes)
                .with_context(|| format!("parsing {}", input.display()))?;
            let seq = decode_adaptive(&msg)
                .with_context(|| format!("decoding {}", input.display()))?;
            emit(output.as_deref(), write_sequence(&seq, msg.order()).as_bytes())
        }
        Command::OrderSelect { input, kmax } => {
            let (seq, _) = read_sequence_file(&input)?;
            if seq.len() <= kmax {
                bail!(
                    "{}: sequence length {} must exceed --kmax {}",
                    input.display(),
                    seq.len(),
                    kmax
                );
            }
            let mut out = String::new();
            for (name, criterion) in [
                ("ric", Criterion::Ric),
                ("adaptive", Criterion::AdaptiveLength),
                ("mv", Criterion::Mv),
            ] {
                let k = select_order(&seq, kmax, criterion)
                    .with_context(|| format!("selecting order for {}", input.display()))?;
                out.push_str(&format!("{name} {k}\n"));
            }
            emit(None, out.as_bytes())
        }
        Command::Curve {
            input,
            kmax,
            exact,
            output,
        } => {
            let (seq, _) = read_sequence_file(&input)?;
            if seq.len() <= kmax {
                bail!(
                    "{}: sequence length {} must exceed --kmax {}",
                    input.display(),
                    seq.len(),
                    kmax
                );
            }
            let curve = criterion_curve(&seq, kmax, exact)
                .with_context(|| format!("evaluating criteria for {}", input.display()))?;
            emit(output.as_deref(), curve.to_csv().as_bytes())
        }
        Command::HistSelect {
            input,
            lo,
            hi,
            step,
            precision_bits,
            include_precision,
            output,
        } => {
            let grid_args_valid = step > 0.0 && hi > lo;
            if !grid_args_valid {
                bail!("need lo < hi and a positive --step");
            }
            let data = read_sample(&input)?;
            let cells = ((hi - lo) / step).round() as usize;
            if cells > 1_000_000 {
                bail!("--step {step} gives {cells} cells; selection is quadratic, refusing more than 1000000");
            }
            let grid = CellGrid::regular(lo, hi, cells.max(1))
                .with_context(|| "building the grid".to_string())?;
            let mut sample = bin_sample(&data, &grid)
                .with_context(|| format!("binning {}", input.display()))?;
            if sample.n() == 0 {
                bail!("{}: sample is empty", input.display());
            }
            if include_precision {
                let bits = precision_bits.expect("clap enforces the dependency");
                sample = sample
                    .with_precision((2.0f64).powi(-(bits as i32)))
                    .context("recording the sample precision")?;
            }
            let (part, crit_bits) = dp_select(&sample);
            let report = PartitionReport::new(&sample, &part, crit_bits);
            emit(output.as_deref(), report.to_json().as_bytes())
        }
        Command::SampleLaplace {
            count,
            seed,
            lo,
            hi,
            output,
        } => {
            if !(lo < 0.0 && 0.0 < hi) {
                bail!("the interval [{lo}, {hi}] must contain 0");
            }
            let xs = ric_core::histogram::sample_laplace(count, seed, lo, hi);
            let mut text = String::new();
            for x in xs {
                text.push_str(&format!("{x}\n"));
            }
            emit(output.as_deref(), text.as_bytes())
        }
        Command::ImgHist { input, output } => {
            let img = read_image(&input)?;
            let report = HistogramReport::new(&gray_histogram(&img));
            emit(output.as_deref(), report.to_json().as_bytes())
        }
        Command::ImgQuantize {
            input,
            partition,
            output,
            report,
        } => {
            let img = read_image(&input)?;
            let hist = gray_histogram(&img);
            let part = match &partition {
                Some(path) => load_gray_partition(path)?,
                None => dp_select(&hist).0,
            };
            let quantizer = Quantizer::from_histogram(&hist, &part)
                .with_context(|| format!("applying the partition to {}", input.display()))?;
            let reconstructed = quantizer.apply(&img);
            let db = psnr(&img, &reconstructed).expect("dimensions match by construction");
            emit(output.as_deref(), &write_pgm(&reconstructed))?;
            if let Some(report_path) = report {
                let report = QuantizationReport {
                    m: part.interval_count(),
                    levels: quantizer.levels().to_vec(),
                    psnr_db: db,
                };
                fs::write(&report_path, report.to_json())
                    .with_context(|| format!("writing {}", report_path.display()))?;
            }
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_sequence_file(path: &Path) -> Result<(ric_core::markov::SymbolSeq, usize)> {
    let text = read_text(path)?;
    read_sequence(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: invalid real {line:?}", path.display(), i + 1))?;
        data.push(value);
    }
    Ok(data)
}

fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_pgm(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// Converts a partition report back into cut indices on the 256-level
/// gray grid.
fn load_gray_partition(path: &Path) -> Result<SubPartition> {
    let report = PartitionReport::from_json(&read_text(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let mut cuts = Vec::with_capacity(report.boundaries.len());
    for &b in &report.boundaries {
        let cut = b.round();
        if (b - cut).abs() > 1e-9 || !(0.0..=256.0).contains(&cut) {
            bail!(
                "{}: boundary {b} is not a gray level in 0..=256",
                path.display()
            );
        }
        cuts.push(cut as usize);
    }
    SubPartition::new(cuts, 256)
        .with_context(|| format!("{}: boundaries do not span 0..=256", path.display()))
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => {
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).context("writing to stdout")?;
            stdout.flush().context("flushing stdout")
        }
    }
}
