// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use bzshape::experiments::DEFAULT_SCALES;
use bzshape::ShapeKind;
use bzshape_cli::commands::{self, CorpusSource, DecodeArgs, Outcome};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bzshape", version, about = "Encode binary masks as piecewise Bezier contours")]
struct Cli {
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit contours to PGM masks; writes <stem>.json and fit_report.csv.
    Encode {
        /// PGM files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        smooth_radius: usize,
        /// Gray values above this are foreground.
        #[arg(long, default_value_t = 127)]
        threshold: u8,
    },
    /// Rasterize contour JSON files to PGM masks.
    Decode(FrameArgs),
    /// Draw contour JSON files as grayscale previews (fill 128, outline 255).
    Render(FrameArgs),
    /// Compare predictions (PGM or contour JSON) with ground-truth masks.
    Eval {
        #[arg(long, required_unless_present = "manifest")]
        pred: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest")]
        gt: Option<PathBuf>,
        /// `id,pred,gt` lines, used instead of pairing by file stem.
        #[arg(long, conflicts_with_all = ["pred", "gt"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        samples: usize,
        #[arg(long, default_value_t = 127)]
        threshold: u8,
    },
    /// Encode, decode and score a corpus.
    Fidelity {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        smooth_radius: usize,
    },
    /// Noise robustness of the contour against an equal-size polygon.
    Sensitivity {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10,15,20")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Fidelity and arc residual across contour degrees.
    DegreeSweep {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,9")]
        degrees: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        smooth_radius: usize,
    },
    /// Write synthetic shape masks as <id>.pgm.
    GenSynthetic {
        #[arg(long, default_value = "blob")]
        kind: ShapeKind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = DEFAULT_SCALES.0)]
        scale_min: f64,
        #[arg(long, default_value_t = DEFAULT_SCALES.1)]
        scale_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the analytic loss gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 72)]
        n_loss_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional per-pair CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FrameArgs {
    /// Contour JSON files or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Output width; the contour is rescaled from its own frame.
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    #[arg(long, default_value_t = 128)]
    samples: usize,
}

impl From<FrameArgs> for DecodeArgs {
    fn from(a: FrameArgs) -> Self {
        DecodeArgs {
            inputs: a.inputs,
            out: a.out,
            size: a.width.zip(a.height),
            samples: a.samples,
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// PGM files or directories; synthetic shapes when absent.
    #[arg(long, num_args = 1..)]
    masks: Vec<PathBuf>,
    #[arg(long, default_value_t = 127)]
    threshold: u8,
    /// Synthetic kind; the default mixed corpus when absent.
    #[arg(long)]
    kind: Option<ShapeKind>,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = DEFAULT_SCALES.0)]
    scale_min: f64,
    #[arg(long, default_value_t = DEFAULT_SCALES.1)]
    scale_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CorpusArgs {
    fn source(&self) -> CorpusSource {
        if self.masks.is_empty() {
            CorpusSource::Synthetic {
                kind: self.kind,
                count: self.count,
                size: self.size,
                scales: (self.scale_min, self.scale_max),
                seed: self.seed,
            }
        } else {
            CorpusSource::Masks {
                inputs: self.masks.clone(),
                threshold: self.threshold,
            }
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Encode {
            inputs,
            out,
            degree,
            smooth_radius,
            threshold,
        } => commands::encode(&commands::EncodeArgs {
            inputs,
            out,
            degree,
            smooth_radius,
            threshold,
        }),
        Command::Decode(a) => commands::decode(&a.into()),
        Command::Render(a) => commands::render(&a.into()),
        Command::Eval {
            pred,
            gt,
            manifest,
            out,
            samples,
            threshold,
        } => commands::eval(&commands::EvalArgs {
            pred,
            gt,
            manifest,
            out,
            samples,
            threshold,
        }),
        Command::Fidelity {
            corpus,
            out,
            degree,
            smooth_radius,
        } => commands::fidelity(&commands::FidelityArgs {
            source: corpus.source(),
            out,
            degree,
            smooth_radius,
        }),
        Command::Sensitivity {
            corpus,
            out,
            deltas,
            trials,
        } => commands::sensitivity(&commands::SensitivityArgs {
            seed: corpus.seed,
            source: corpus.source(),
            out,
            deltas,
            trials,
        }),
        Command::DegreeSweep {
            corpus,
            out,
            degrees,
            smooth_radius,
        } => commands::degree_sweep_cmd(&commands::DegreeSweepArgs {
            source: corpus.source(),
            out,
            degrees,
            smooth_radius,
        }),
        Command::GenSynthetic {
            kind,
            count,
            size,
            scale_min,
            scale_max,
            seed,
            out,
        } => {
            if scale_min > scale_max {
                bail!("--scale-min {scale_min} exceeds --scale-max {scale_max}");
            }
            commands::gen_synthetic(&commands::GenArgs {
                kind,
                count,
                size,
                scales: (scale_min, scale_max),
                seed,
                out,
            })
        }
        Command::Gradcheck {
            pairs,
            size,
            n_loss_samples,
            seed,
            out,
        } => commands::gradcheck(&commands::GradcheckArgs {
            pairs,
            size,
            n_loss_samples,
            seed,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for s in &outcome.skipped {
                eprintln!("skipped: {s}");
            }
            for f in &outcome.failures {
                eprintln!("failed: {}: {}", f.item, f.message);
            }
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} item(s) failed", outcome.failures.len());
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
