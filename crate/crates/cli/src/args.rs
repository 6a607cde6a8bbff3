use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dqa", version, about = "Quality metrics for dehazed images")]
pub struct Cli {
    /// Machine-readable JSON on standard output.
    #[arg(long, global = true)]
    pub json: bool,

    /// TOML file with default settings (flags take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Viewing geometry in pixels per degree.
    #[arg(long, global = true)]
    pub ppd: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduced-reference score (lower is better).
    #[command(subcommand)]
    Rrpd(RrpdCommand),
    /// No-reference score (higher is better).
    #[command(subcommand)]
    Nrbp(NrbpCommand),
    /// Correlation criteria of predictions against a manifest's MOS.
    Eval {
        #[arg(long, value_name = "CSV")]
        pred: PathBuf,
        #[arg(long, value_name = "CSV")]
        manifest: PathBuf,
    },
    /// Repeated content-wise train/test evaluation of the NRBP regressor.
    Protocol {
        #[arg(long, value_name = "CSV")]
        manifest: PathBuf,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "JSON")]
        out: Option<PathBuf>,
    },
    /// Rank dehazing outputs produced with different parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum RrpdCommand {
    /// Extract the sender-side feature packet of a reference image.
    Extract {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score a dehazed image against a packet.
    Score {
        #[arg(long)]
        packet: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum NrbpCommand {
    /// Write the 284-value feature vector of an image.
    Features {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a regressor on a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Box constraint; disables the grid search.
        #[arg(long, conflicts_with = "grid")]
        c: Option<f64>,
        /// RBF width (default 1/dim); requires --c.
        #[arg(long, requires = "c")]
        gamma: Option<f64>,
        /// Cross-validated search over c and gamma (the default).
        #[arg(long)]
        grid: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict quality of one image or every image of a manifest.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(short, long, conflicts_with = "manifest", required_unless_present = "manifest")]
        input: Option<PathBuf>,
        #[arg(long, requires = "output")]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Rrpd,
    Nrbp,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub mode: SweepMode,
    /// Directory of candidate images.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Reference image or packet (rrpd mode).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Trained model (nrbp mode).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write the ranking as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
