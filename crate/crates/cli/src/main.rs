use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curveseg::io::ReadOptions;
use curveseg::Error;

mod commands;

#[derive(Parser)]
#[command(name = "curveseg", version, about = "Cluster sampled curves and summarize each cluster with an optimal piecewise prototype")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct InputArgs {
    /// CSV file, one curve per row
    #[arg(long)]
    input: PathBuf,

    /// First row holds the sampling abscissae
    #[arg(long)]
    header_row: bool,

    /// First column holds curve ids
    #[arg(long)]
    id_column: bool,

    /// Curves are stored as columns
    #[arg(long)]
    transpose: bool,

    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

impl InputArgs {
    fn options(&self) -> ReadOptions {
        ReadOptions {
            header_row: self.header_row,
            id_column: self.id_column,
            transpose: self.transpose,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct SomArgs {
    /// Map shape as ROWSxCOLS
    #[arg(long, default_value = "4x5")]
    som_grid: String,

    /// Starting neighbourhood radii to try, comma separated [default: max(rows, cols) / 2]
    #[arg(long, value_delimiter = ',')]
    som_radius: Vec<f64>,

    #[arg(long, default_value_t = 30)]
    som_epochs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal segmentation of individual curves
    Segment {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "const-l2")]
        model: String,
        /// How segment errors combine: sum or max
        #[arg(long, default_value = "sum")]
        aggregate: String,
        #[arg(long = "P")]
        p: usize,
        /// Row indices to segment (0-based, repeatable) [default: all]
        #[arg(long)]
        curve: Vec<usize>,
        /// Segment counts to plot (comma separated) [default: P]
        #[arg(long, value_delimiter = ',')]
        plot: Vec<usize>,
    },
    /// One summary for the whole set of curves
    SummarizeSet {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "const-l2")]
        model: String,
        /// Error over curves: sum or max
        #[arg(long, default_value = "sum")]
        aggregate: String,
        #[arg(long = "P")]
        p: usize,
    },
    /// Clustering with piecewise prototypes
    Cluster(ClusterArgs),
    /// Plain K-means on the raw curves
    Kmeans {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Ward hierarchical clustering
    Ward {
        #[command(flatten)]
        input: InputArgs,
        /// Also cut the tree into this many clusters
        #[arg(long = "K")]
        k: Option<usize>,
    },
    /// Batch self-organizing map
    Som {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        som: SomArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare run manifests
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
}

#[derive(Args, Clone, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "P")]
    p: Option<usize>,
    /// uniform, optimal or kmeans
    #[arg(long, default_value = "optimal")]
    mode: String,
    #[arg(long, default_value = "const-l2")]
    model: String,
    /// Limit each cluster to ceil(cap * P / K) segments
    #[arg(long)]
    cap: Option<f64>,
    /// Number of restarts, using seeds seed, seed + 1, ...
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// random, ward or som
    #[arg(long, default_value = "random")]
    init: String,
    #[command(flatten)]
    som: SomArgs,
    /// Run K-means first and start from its partition
    #[arg(long)]
    two_phase: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::Config(_) | Error::Domain(_) => 3,
        Error::Internal(_) => 4,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("CURVESEG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("CURVESEG_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Segment {
            input,
            model,
            aggregate,
            p,
            curve,
            plot,
        } => commands::segment(&input, &model, &aggregate, p, &curve, &plot),
        Command::SummarizeSet {
            input,
            model,
            aggregate,
            p,
        } => commands::summarize_set(&input, &model, &aggregate, p),
        Command::Cluster(args) => commands::cluster(&args, "cluster"),
        Command::Kmeans {
            input,
            k,
            seed,
            seeds,
            max_iter,
        } => {
            let args = ClusterArgs {
                input,
                k: Some(k),
                p: None,
                mode: "kmeans".into(),
                model: "const-l2".into(),
                cap: None,
                seeds,
                seed,
                max_iter,
                init: "random".into(),
                som: SomArgs {
                    som_grid: "4x5".into(),
                    som_radius: Vec::new(),
                    som_epochs: 30,
                },
                two_phase: false,
            };
            commands::cluster(&args, "kmeans")
        }
        Command::Ward { input, k } => commands::ward(&input, k),
        Command::Som { input, som, seed } => commands::som(&input, &som, seed),
        Command::Report {
            manifests,
            output_dir,
        } => commands::report(&manifests, &output_dir),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
