//! Readers and writers for the on-disk formats: CSV point clouds, JSON
//! diagrams, JSON model configurations, JSON posterior summaries, CSV
//! intensity grids, and JSON evaluation reports.
//!
//! Writers are atomic (write to a sibling temp file, then rename), so a
//! failed run never leaves partial output behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::EvalReport;
use crate::error::{Error, Result};
use crate::persistence::{PersistenceDiagram, PointCloud};
use crate::pointprocess::{
    BinomialCardinality, GaussianComponent, GaussianMixtureIntensity, ObservationModel,
    UnexpectedModel,
};
use crate::posterior::{CardinalityPmf, PosteriorDistribution};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write `contents` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

// ---------------------------------------------------------------------------
// Point clouds: CSV, one point per line, comma-separated coordinates.
// ---------------------------------------------------------------------------

/// Read a point cloud from CSV. A first line that does not parse as numbers
/// is accepted as a header when every following line parses; otherwise the
/// first offending line is reported.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_point_cloud(&text, &path.display().to_string())
}

fn parse_point_cloud(text: &str, path: &str) -> Result<PointCloud> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let parsed: Vec<(usize, std::result::Result<Vec<f64>, String>)> = lines
        .iter()
        .map(|&(lineno, line)| (lineno, parse_row(line)))
        .collect();
    let skip_header = parsed.len() >= 2
        && parsed[0].1.is_err()
        && parsed[1..].iter().all(|(_, r)| r.is_ok());
    let mut points = Vec::with_capacity(parsed.len());
    for (lineno, row) in parsed.into_iter().skip(usize::from(skip_header)) {
        match row {
            Ok(coords) => points.push(coords),
            Err(message) => {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: lineno,
                    message,
                })
            }
        }
    }
    PointCloud::new(points)
}

fn parse_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(',')
        .map(|field| {
            let field = field.trim();
            field
                .parse::<f64>()
                .map_err(|_| format!("cannot parse {:?} as a number", field))
        })
        .collect()
}

/// Write a point cloud as CSV with full `f64` round-trip precision.
pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for point in cloud.points() {
        let row: Vec<String> = point.iter().map(|c| format!("{}", c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// Diagrams: JSON {"dim": d, "points": [[b, p], ...]}.
// ---------------------------------------------------------------------------

pub fn read_diagram(path: &Path) -> Result<PersistenceDiagram> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::invalid(format!("{}: invalid diagram JSON: {}", path.display(), e))
    })
}

pub fn write_diagram(path: &Path, diagram: &PersistenceDiagram) -> Result<()> {
    let text = serde_json::to_string_pretty(diagram).expect("diagram serializes");
    write_atomic(path, &text)
}

// ---------------------------------------------------------------------------
// Model configuration.
// ---------------------------------------------------------------------------

/// Validated run configuration: the three model blocks plus optional
/// truncation, grid, and classifier settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub intensity: GaussianMixtureIntensity,
    pub prior_cardinality: CardinalityPmf,
    pub obs: ObservationModel,
    pub unexpected: UnexpectedModel,
    pub n_max: usize,
    pub grid: Option<GridSpec>,
    pub classifier: Option<ClassifierSpec>,
}

/// Evaluation grid for intensity export: `nb x np` points spanning
/// `[0, b_max] x [0, p_max]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub b_max: f64,
    pub p_max: f64,
    pub nb: usize,
    pub np: usize,
}

/// Classifier settings: Bayes-factor threshold, fold count, and fold seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub c: f64,
    pub k: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    prior: RawPrior,
    obs: RawObs,
    unexpected: RawUnexpected,
    #[serde(default)]
    n_max: Option<usize>,
    #[serde(default)]
    grid: Option<GridSpec>,
    #[serde(default)]
    classifier: Option<ClassifierSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    components: Vec<RawComponent>,
    #[serde(rename = "N0", default)]
    n0: Option<usize>,
    #[serde(default)]
    rho_x: Option<f64>,
    #[serde(default)]
    cardinality: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    c: f64,
    mu: [f64; 2],
    sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObs {
    alpha: f64,
    sigma_yo: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnexpected {
    mu_yu: f64,
    #[serde(rename = "M0")]
    m0: usize,
    rho_y: f64,
}

/// Read and fully validate a run configuration. No partially constructed
/// models escape: every block is checked before the config is returned.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Invalid(msg) => Error::invalid(format!("{}: {}", path.display(), msg)),
        other => other,
    })
}

fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text)
        .map_err(|e| Error::invalid(format!("invalid config JSON: {}", e)))?;

    let components = raw
        .prior
        .components
        .iter()
        .map(|rc| GaussianComponent {
            weight: rc.c,
            mean: rc.mu,
            var: rc.sigma,
        })
        .collect();
    let intensity = GaussianMixtureIntensity::new(components)
        .map_err(|e| Error::invalid(format!("prior.components: {}", e)))?;

    let prior_cardinality = match (raw.prior.n0, raw.prior.rho_x, raw.prior.cardinality) {
        (Some(n0), Some(rho_x), None) => {
            let binom = BinomialCardinality::new(n0, rho_x)
                .map_err(|e| Error::invalid(format!("prior.rho_x: {}", e)))?;
            CardinalityPmf::from_binomial(&binom)
        }
        (None, None, Some(pmf)) => CardinalityPmf::new(pmf)
            .map_err(|e| Error::invalid(format!("prior.cardinality: {}", e)))?,
        (None, Some(_), None) => {
            return Err(Error::invalid("prior.N0 is missing (required with rho_x)"))
        }
        (Some(_), None, None) => {
            return Err(Error::invalid("prior.rho_x is missing (required with N0)"))
        }
        (None, None, None) => {
            return Err(Error::invalid(
                "prior needs either N0 + rho_x or an explicit cardinality pmf",
            ))
        }
        _ => {
            return Err(Error::invalid(
                "prior must use either N0 + rho_x or cardinality, not both",
            ))
        }
    };

    let obs = ObservationModel::new(raw.obs.alpha, raw.obs.sigma_yo)
        .map_err(|e| Error::invalid(format!("obs: {}", e)))?;
    let card_yu = BinomialCardinality::new(raw.unexpected.m0, raw.unexpected.rho_y)
        .map_err(|e| Error::invalid(format!("unexpected.rho_y: {}", e)))?;
    let unexpected = UnexpectedModel::new(raw.unexpected.mu_yu, card_yu)
        .map_err(|e| Error::invalid(format!("unexpected.mu_yu: {}", e)))?;

    let n_max = raw
        .n_max
        .unwrap_or_else(|| prior_cardinality.probs().len() - 1);
    if n_max < prior_cardinality.support_max() {
        return Err(Error::invalid(format!(
            "n_max = {} truncates the prior cardinality support (max {})",
            n_max,
            prior_cardinality.support_max()
        )));
    }
    if let Some(grid) = &raw.grid {
        if !(grid.b_max > 0.0) || !(grid.p_max > 0.0) || grid.nb < 2 || grid.np < 2 {
            return Err(Error::invalid(
                "grid needs positive extents and at least 2 points per axis",
            ));
        }
    }
    if let Some(clf) = &raw.classifier {
        if !(clf.c > 0.0) || clf.k < 2 {
            return Err(Error::invalid(
                "classifier needs a positive threshold c and k >= 2",
            ));
        }
    }

    Ok(RunConfig {
        intensity,
        prior_cardinality,
        obs,
        unexpected,
        n_max,
        grid: raw.grid,
        classifier: raw.classifier,
    })
}

// ---------------------------------------------------------------------------
// Posterior summary: the serializable face of a posterior distribution.
// ---------------------------------------------------------------------------

/// Serializable posterior: evaluate the intensity as
/// `vanished_scale * lambda_prior(x) + sum_j C_j N*(x; mu_j, sigma_j I)`
/// (the averaging over observed diagrams is already folded in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorSummary {
    pub cardinality: Vec<f64>,
    pub vanished_scale: f64,
    pub components: Vec<SummaryComponent>,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryComponent {
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: [f64; 2],
    pub sigma: f64,
}

impl From<&PosteriorDistribution> for PosteriorSummary {
    fn from(post: &PosteriorDistribution) -> Self {
        PosteriorSummary {
            cardinality: post.cardinality().to_vec(),
            vanished_scale: post.vanished_scale(),
            components: post
                .components()
                .iter()
                .map(|c| SummaryComponent {
                    c: c.ln_weight.exp(),
                    mu: c.mean,
                    sigma: c.var,
                })
                .collect(),
            m: post.m(),
        }
    }
}

pub fn write_posterior(path: &Path, post: &PosteriorDistribution) -> Result<()> {
    let summary = PosteriorSummary::from(post);
    let text = serde_json::to_string_pretty(&summary).expect("posterior serializes");
    write_atomic(path, &text)
}

pub fn read_posterior_summary(path: &Path) -> Result<PosteriorSummary> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::invalid(format!("{}: invalid posterior JSON: {}", path.display(), e))
    })
}

// ---------------------------------------------------------------------------
// Intensity grid and cardinality exports (CSV).
// ---------------------------------------------------------------------------

/// Evaluate the posterior intensity on the grid and render CSV rows
/// `b,p,normalized_intensity` with values divided by the grid maximum.
pub fn render_intensity_grid(post: &PosteriorDistribution, grid: &GridSpec) -> Result<String> {
    let bs: Vec<f64> = (0..grid.nb)
        .map(|i| i as f64 * grid.b_max / (grid.nb - 1) as f64)
        .collect();
    let ps: Vec<f64> = (0..grid.np)
        .map(|j| j as f64 * grid.p_max / (grid.np - 1) as f64)
        .collect();

    let eval_row = |&b: &f64| -> Result<Vec<f64>> {
        ps.iter().map(|&p| post.intensity_at([b, p])).collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = bs.par_iter().map(eval_row).collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = bs.iter().map(eval_row).collect::<Result<Vec<_>>>()?;

    let max = rows
        .iter()
        .flatten()
        .cloned()
        .fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::numerical(
            "posterior intensity vanishes on the whole grid".to_string(),
        ));
    }
    let mut out = String::with_capacity(grid.nb * grid.np * 24);
    for (i, b) in bs.iter().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", b, p, rows[i][j] / max));
        }
    }
    Ok(out)
}

pub fn write_intensity_grid(
    path: &Path,
    post: &PosteriorDistribution,
    grid: &GridSpec,
) -> Result<()> {
    write_atomic(path, &render_intensity_grid(post, grid)?)
}

/// CSV rows `n,probability` of a cardinality pmf.
pub fn write_cardinality_csv(path: &Path, pmf: &[f64]) -> Result<()> {
    let mut out = String::new();
    for (n, p) in pmf.iter().enumerate() {
        out.push_str(&format!("{},{}\n", n, p));
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// Labeled dataset manifest and evaluation report.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    label: String,
    diagram: DiagramRef,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DiagramRef {
    Path(String),
    Inline(PersistenceDiagram),
}

/// Read a labeled dataset manifest: a JSON list of
/// `{"label": ..., "diagram": path-or-inline}`. Relative diagram paths
/// resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PersistenceDiagram)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| {
        Error::invalid(format!("{}: invalid manifest JSON: {}", path.display(), e))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    entries
        .into_iter()
        .map(|entry| {
            let diagram = match entry.diagram {
                DiagramRef::Inline(d) => d,
                DiagramRef::Path(p) => {
                    let full = base.join(&p);
                    read_diagram(&full)?
                }
            };
            Ok((entry.label, diagram))
        })
        .collect()
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    write_atomic(path, &text)
}
