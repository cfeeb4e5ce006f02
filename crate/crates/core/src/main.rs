use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "convexalign", version, about = "Concept convexity and odd-one-out alignment of embedding spaces")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Report format(s) to write.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Both)]
    format: ReportFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
    Both,
}

impl ReportFormat {
    pub fn csv(self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Arbitrary,
    MaxSameClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointsArg {
    Include,
    InteriorOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    All,
    Halves,
    PerModel,
    PretrainedVsFinetuned,
    DepthBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbeddingFormatArg {
    Emb1,
    Csv,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Embedding file, or a directory of `layer_NNN.emb1` files.
    #[arg(long)]
    pub emb: PathBuf,
    /// Labels JSON sidecar.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Arbitrary)]
    pub mode: ModeArg,
    /// Cap on same-class pairs per class.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long, value_enum, default_value_t = EndpointsArg::Include)]
    pub endpoints: EndpointsArg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Graph convexity per class and layer.
    Convexity {
        #[command(flatten)]
        graph: GraphArgs,
        /// Also write each layer's kNN graph as an edge list.
        #[arg(long)]
        dump_graph: bool,
    },
    /// Convexity under random label permutations.
    Baseline {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Odd-one-out accuracy against triplet judgments.
    Oooa {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        triplets: PathBuf,
        /// Evaluate raw rather than centered representations.
        #[arg(long)]
        no_center: bool,
    },
    /// Fit the affine naive transform on triplet judgments.
    Fit {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        triplets: PathBuf,
        /// Held-out triplets for a before/after accuracy report.
        #[arg(long)]
        test_triplets: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        #[arg(long = "lr", default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        /// 0 = full batch.
        #[arg(long, default_value_t = 0)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.1)]
        val_fraction: f64,
        #[arg(long, default_value_t = 10)]
        patience: usize,
        #[arg(long)]
        no_center: bool,
    },
    /// Apply a fitted transform to embeddings.
    Apply {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        transform: PathBuf,
        #[arg(long)]
        no_center: bool,
        #[arg(long, value_enum, default_value_t = EmbeddingFormatArg::Emb1)]
        output_format: EmbeddingFormatArg,
    },
    /// Correlate convexity and accuracy across layers and plot both.
    Correlate {
        /// CSV with columns model,layer,convexity,oooa,training,size.
        #[arg(long)]
        series: PathBuf,
        #[arg(long, value_enum, default_value_t = GroupingArg::All)]
        grouping: GroupingArg,
        /// Bin count for `depth-bins`.
        #[arg(long, default_value_t = 4)]
        bins: usize,
    },
    /// Write synthetic fixtures.
    Synth {
        /// One of hi_conv_hi_align, hi_conv_lo_align, lo_conv_hi_align, lo_conv_lo_align.
        #[arg(long, conflicts_with = "planted")]
        scenario: Option<String>,
        /// Planted-transform fixture instead of a mixture.
        #[arg(long)]
        planted: bool,
        #[arg(long, default_value_t = 27)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long = "triplets", default_value_t = 1000)]
        n_triplets: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let ctx = commands::Context {
        seed: cli.seed,
        threads: cli.threads,
        out_dir: cli.out_dir,
        format: cli.format,
    };
    let result = match cli.command {
        Command::Convexity { graph, dump_graph } => commands::convexity(&ctx, &graph, dump_graph),
        Command::Baseline { graph, trials } => commands::baseline(&ctx, &graph, trials),
        Command::Oooa {
            emb,
            triplets,
            no_center,
        } => commands::oooa(&ctx, &emb, &triplets, !no_center),
        Command::Fit {
            emb,
            triplets,
            test_triplets,
            lambda,
            learning_rate,
            epochs,
            batch_size,
            val_fraction,
            patience,
            no_center,
        } => {
            let cfg = convexalign::transform::FitConfig {
                lambda,
                learning_rate,
                max_epochs: epochs,
                batch_size,
                val_fraction,
                patience,
                seed: ctx.seed,
            };
            commands::fit(&ctx, &emb, &triplets, test_triplets.as_deref(), &cfg, !no_center)
        }
        Command::Apply {
            emb,
            transform,
            no_center,
            output_format,
        } => commands::apply(&ctx, &emb, &transform, !no_center, output_format),
        Command::Correlate {
            series,
            grouping,
            bins,
        } => commands::correlate(&ctx, &series, grouping, bins),
        Command::Synth {
            scenario,
            planted,
            classes,
            items,
            dim,
            separation,
            n_triplets,
            noise,
        } => commands::synth(
            &ctx,
            scenario.as_deref(),
            planted,
            commands::SynthArgs {
                classes,
                items,
                dim,
                separation,
                n_triplets,
                noise,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
