//! Command-line interface: diagram computation, posterior inference,
//! classification, the polar-curve sensitivity study, and synthetic data
//! generation.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numerical failure,
//! 3 i/o error.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{self, GridSpec};
use crate::params;
use crate::persistence::{
    subsample_diagram, tilt, vr_persistence, vr_persistence_auto, SubsampleStrategy,
};
use crate::pointprocess::{BinomialCardinality, ObservationModel, UnexpectedModel};
use crate::posterior::compute_posterior;
use crate::synthetic;

#[derive(Parser)]
#[command(
    name = "bayespd",
    about = "Persistence diagrams and Bayesian inference on them",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a tilted persistence diagram from a CSV point cloud.
    Pd {
        /// Input point cloud (CSV, one point per line).
        #[arg(long)]
        input: PathBuf,
        /// Homology dimension of the emitted diagram (0 or 1).
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Filtration cap; defaults to the maximum pairwise distance.
        #[arg(long)]
        max_radius: Option<f64>,
        /// Output diagram (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Keep only this many points.
        #[arg(long)]
        subsample: Option<usize>,
        /// Subsampling rule.
        #[arg(long, value_enum, default_value_t = StrategyArg::TopPersistence)]
        strategy: StrategyArg,
        /// Seed for the uniform-random strategy.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the posterior over one or more observed diagrams.
    Posterior {
        /// Model configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Observed diagrams (JSON), one or more.
        #[arg(long, num_args = 1.., required = true)]
        diagrams: Vec<PathBuf>,
        /// Output posterior summary (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Intensity grid as B P NB NP (extents and point counts).
        #[arg(long, num_args = 4, value_names = ["B", "P", "NB", "NP"])]
        grid: Option<Vec<f64>>,
        /// Output CSV for the max-normalized intensity grid.
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Cross-validate the Bayes-factor classifier on a labeled dataset.
    Classify {
        /// Model configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Labeled dataset manifest (JSON).
        #[arg(long)]
        data: PathBuf,
        /// Fold count (overrides the config's classifier block).
        #[arg(long)]
        folds: Option<usize>,
        /// Bayes-factor threshold (overrides the config).
        #[arg(long)]
        c: Option<f64>,
        /// Fold-shuffling seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Output evaluation report (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one polar-curve sensitivity case end to end.
    Sensitivity {
        /// Case number: 1, 2, or 3 (ascending cloud noise).
        #[arg(long)]
        case: u8,
        /// Prior intensity.
        #[arg(long, value_enum)]
        prior: PriorArg,
        /// Prior cardinality.
        #[arg(long, value_enum)]
        cardinality: CardinalityArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the case's likelihood-kernel variance.
        #[arg(long)]
        sigma_yo: Option<f64>,
        /// Override the case's unexpected-feature decay rate.
        #[arg(long)]
        mu_yu: Option<f64>,
        /// Override the case's unexpected-feature count probability.
        #[arg(long)]
        rho_y: Option<f64>,
        /// Points sampled from the curve.
        #[arg(long, default_value_t = params::POLAR_FIXTURE_N)]
        n: usize,
        /// Cloud seed.
        #[arg(long, default_value_t = params::POLAR_FIXTURE_SEED)]
        seed: u64,
    },
    /// Generate a synthetic point cloud.
    Synth {
        /// Generator family.
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Points on the polar curve.
        #[arg(long, default_value_t = params::POLAR_FIXTURE_N)]
        n: usize,
        /// Polar-curve noise variance.
        #[arg(long, default_value_t = 0.001)]
        noise_var: f64,
        /// Loop-network class (1, 2, or 3).
        #[arg(long)]
        class_id: Option<u8>,
        /// Generator seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output point cloud (CSV).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    TopPersistence,
    UniformRandom,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Informative,
    Uninformative,
}

#[derive(Clone, Copy, ValueEnum)]
enum CardinalityArg {
    Informative,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Polar,
    Network,
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Pd {
            input,
            dim,
            max_radius,
            out,
            subsample,
            strategy,
            seed,
        } => cmd_pd(input, dim, max_radius, out, subsample, strategy, seed),
        Command::Posterior {
            config,
            diagrams,
            out,
            grid,
            grid_out,
        } => cmd_posterior(config, diagrams, out, grid, grid_out),
        Command::Classify {
            config,
            data,
            folds,
            c,
            seed,
            out,
        } => cmd_classify(config, data, folds, c, seed, out),
        Command::Sensitivity {
            case,
            prior,
            cardinality,
            out,
            sigma_yo,
            mu_yu,
            rho_y,
            n,
            seed,
        } => cmd_sensitivity(
            case,
            prior,
            cardinality,
            out,
            sigma_yo,
            mu_yu,
            rho_y,
            n,
            seed,
        ),
        Command::Synth {
            kind,
            n,
            noise_var,
            class_id,
            seed,
            out,
        } => cmd_synth(kind, n, noise_var, class_id, seed, out),
    }
}

fn cmd_pd(
    input: PathBuf,
    dim: usize,
    max_radius: Option<f64>,
    out: PathBuf,
    subsample: Option<usize>,
    strategy: StrategyArg,
    seed: u64,
) -> Result<()> {
    if dim > 1 {
        return Err(Error::invalid(format!(
            "homology dimension {} is unsupported (only 0 and 1)",
            dim
        )));
    }
    let cloud = io::read_point_cloud(&input)?;
    let diagrams = match max_radius {
        Some(r) => vr_persistence(&cloud, dim, r)?,
        None => vr_persistence_auto(&cloud, dim)?,
    };
    let mut pd = tilt(&diagrams[dim]);
    if let Some(k) = subsample {
        let strat = match strategy {
            StrategyArg::TopPersistence => SubsampleStrategy::TopPersistence,
            StrategyArg::UniformRandom => SubsampleStrategy::UniformRandom,
        };
        pd = subsample_diagram(&pd, k, strat, seed)?;
    }
    io::write_diagram(&out, &pd)
}

fn cmd_posterior(
    config: PathBuf,
    diagrams: Vec<PathBuf>,
    out: PathBuf,
    grid: Option<Vec<f64>>,
    grid_out: Option<PathBuf>,
) -> Result<()> {
    let cfg = io::read_config(&config)?;
    let observed = diagrams
        .iter()
        .map(|p| io::read_diagram(p))
        .collect::<Result<Vec<_>>>()?;
    let post = compute_posterior(
        &cfg.intensity,
        &cfg.prior_cardinality,
        &cfg.obs,
        &cfg.unexpected,
        &observed,
        cfg.n_max,
    )?;
    let grid_csv = match (&grid_out, grid) {
        (Some(_), flag) => {
            let spec = match flag {
                Some(v) => GridSpec {
                    b_max: v[0],
                    p_max: v[1],
                    nb: v[2] as usize,
                    np: v[3] as usize,
                },
                None => cfg.grid.unwrap_or(GridSpec {
                    b_max: 1.0,
                    p_max: 1.0,
                    nb: 100,
                    np: 100,
                }),
            };
            if !(spec.b_max > 0.0) || !(spec.p_max > 0.0) || spec.nb < 2 || spec.np < 2 {
                return Err(Error::invalid(
                    "grid needs positive extents and at least 2 points per axis",
                ));
            }
            Some(io::render_intensity_grid(&post, &spec)?)
        }
        (None, Some(_)) => {
            return Err(Error::invalid("--grid requires --grid-out"));
        }
        (None, None) => None,
    };
    io::write_posterior(&out, &post)?;
    if let (Some(path), Some(csv)) = (grid_out, grid_csv) {
        io::write_atomic(&path, &csv)?;
    }
    Ok(())
}

fn cmd_classify(
    config: PathBuf,
    data: PathBuf,
    folds: Option<usize>,
    c: Option<f64>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<()> {
    let cfg = io::read_config(&config)?;
    let dataset = io::read_manifest(&data)?;
    let spec = cfg.classifier;
    let folds = folds.or(spec.map(|s| s.k)).unwrap_or(10);
    let c = c.or(spec.map(|s| s.c)).unwrap_or(1.0);
    let seed = seed.or(spec.map(|s| s.seed)).unwrap_or(0);
    let model = crate::classify::ModelConfig {
        intensity: cfg.intensity,
        cardinality: cfg.prior_cardinality,
        obs: cfg.obs,
        unexpected: cfg.unexpected,
        n_max: cfg.n_max,
    };
    let report = crate::classify::cross_validate(&dataset, folds, &model, c, seed)?;
    io::write_report(&out, &report)
}

#[derive(Serialize)]
struct SensitivitySummary {
    case: u8,
    prior: &'static str,
    cardinality: &'static str,
    noise_var: f64,
    sigma_yo: f64,
    mu_yu: f64,
    rho_y: f64,
    alpha: f64,
    n_points: usize,
    seed: u64,
    observed_features: usize,
    map: usize,
    mean: f64,
    variance: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sensitivity(
    case: u8,
    prior: PriorArg,
    cardinality: CardinalityArg,
    out: PathBuf,
    sigma_yo: Option<f64>,
    mu_yu: Option<f64>,
    rho_y: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<()> {
    let mut case_params = params::case_params(case)?;
    if let Some(v) = sigma_yo {
        case_params.sigma_yo = v;
    }
    if let Some(v) = mu_yu {
        case_params.mu_yu = v;
    }
    if let Some(v) = rho_y {
        case_params.rho_y = v;
    }

    let intensity = match prior {
        PriorArg::Informative => params::informative_intensity(),
        PriorArg::Uninformative => params::uninformative_intensity(),
    };
    let prior_card = match cardinality {
        CardinalityArg::Informative => params::informative_cardinality(),
        CardinalityArg::Uniform => params::uniform_cardinality(),
    };
    let obs = ObservationModel::new(params::SENSITIVITY_ALPHA, case_params.sigma_yo)?;
    let unexpected = UnexpectedModel::new(
        case_params.mu_yu,
        BinomialCardinality::new(params::SENSITIVITY_M0, case_params.rho_y)?,
    )?;

    let cloud = synthetic::polar_curve_sample(n, case_params.noise_var, seed)?;
    let diagrams = vr_persistence_auto(&cloud, 1)?;
    let pd = tilt(&diagrams[1]);
    let post = compute_posterior(
        &intensity,
        &prior_card,
        &obs,
        &unexpected,
        std::slice::from_ref(&pd),
        params::SENSITIVITY_N0,
    )?;
    let stats = post.cardinality_stats();
    let grid = GridSpec {
        b_max: 1.2,
        p_max: 1.2,
        nb: 100,
        np: 100,
    };
    let grid_csv = io::render_intensity_grid(&post, &grid)?;

    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    io::write_point_cloud(&out.join("cloud.csv"), &cloud)?;
    io::write_diagram(&out.join("diagram.json"), &pd)?;
    io::write_atomic(&out.join("intensity.csv"), &grid_csv)?;
    io::write_cardinality_csv(&out.join("cardinality.csv"), post.cardinality())?;
    let summary = SensitivitySummary {
        case,
        prior: match prior {
            PriorArg::Informative => "informative",
            PriorArg::Uninformative => "uninformative",
        },
        cardinality: match cardinality {
            CardinalityArg::Informative => "informative",
            CardinalityArg::Uniform => "uniform",
        },
        noise_var: case_params.noise_var,
        sigma_yo: case_params.sigma_yo,
        mu_yu: case_params.mu_yu,
        rho_y: case_params.rho_y,
        alpha: params::SENSITIVITY_ALPHA,
        n_points: n,
        seed,
        observed_features: pd.points.len(),
        map: stats.map,
        mean: stats.mean,
        variance: stats.variance,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    io::write_atomic(&out.join("summary.json"), &text)
}

fn cmd_synth(
    kind: KindArg,
    n: usize,
    noise_var: f64,
    class_id: Option<u8>,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let cloud = match kind {
        KindArg::Polar => synthetic::polar_curve_sample(n, noise_var, seed)?,
        KindArg::Network => {
            let class = class_id.ok_or_else(|| {
                Error::invalid("--class-id is required for the network generator")
            })?;
            synthetic::loop_network_generate(class, seed)?
        }
    };
    io::write_point_cloud(&out, &cloud)
}
