//! Model components for diagrams viewed as i.i.d. cluster point processes on
//! the wedge `W`: a Gaussian-mixture prior intensity with binomial prior
//! cardinality, a constant-detection Gaussian observation kernel, and an
//! exponential intensity for unexpected (noise) features.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// True when `x` lies in the wedge `W = {(b, p) : b >= 0, p >= 0}`.
pub fn in_wedge(x: [f64; 2]) -> bool {
    x[0] >= 0.0 && x[1] >= 0.0 && x[0].is_finite() && x[1].is_finite()
}

fn require_in_wedge(x: [f64; 2], what: &str) -> Result<()> {
    if in_wedge(x) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{} ({}, {}) lies outside the wedge W",
            what, x[0], x[1]
        )))
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Log-density of the isotropic bivariate normal with per-axis variance
/// `var` at `x`.
pub fn iso_normal_ln_pdf(x: [f64; 2], mean: [f64; 2], var: f64) -> f64 {
    let d2 = (x[0] - mean[0]).powi(2) + (x[1] - mean[1]).powi(2);
    -LN_2PI - var.ln() - d2 / (2.0 * var)
}

/// Density of the isotropic bivariate normal with per-axis variance `var`.
pub fn iso_normal_pdf(x: [f64; 2], mean: [f64; 2], var: f64) -> f64 {
    iso_normal_ln_pdf(x, mean, var).exp()
}

/// ln C(n, k) via log-gamma.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// ln of the permutation coefficient P^n_k = n!/(n-k)!; -inf when k > n.
pub fn ln_perm(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// One component of a Gaussian-mixture intensity: positive weight, mean in
/// `W`, and a scalar per-axis variance (isotropic covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub var: f64,
}

/// Gaussian-mixture intensity on the wedge. The mixture is an intensity, not
/// a probability density: weights need not sum to 1 and the mass on `W` is
/// the expected feature count contributed by each component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureIntensity {
    components: Vec<GaussianComponent>,
}

impl GaussianMixtureIntensity {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("intensity needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::invalid(format!(
                    "component {} weight must be positive and finite, got {}",
                    i, c.weight
                )));
            }
            if !(c.var > 0.0) || !c.var.is_finite() {
                return Err(Error::invalid(format!(
                    "component {} variance must be positive and finite, got {}",
                    i, c.var
                )));
            }
            if !c.mean[0].is_finite() || !c.mean[1].is_finite() {
                return Err(Error::invalid(format!("component {} mean not finite", i)));
            }
        }
        Ok(GaussianMixtureIntensity { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// Intensity value at `x` in `W` (the indicator is implicit: callers must
    /// pass a wedge point, enforced here).
    pub fn density(&self, x: [f64; 2]) -> Result<f64> {
        require_in_wedge(x, "evaluation point")?;
        Ok(self.density_unchecked(x))
    }

    pub(crate) fn density_unchecked(&self, x: [f64; 2]) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * iso_normal_pdf(x, c.mean, c.var))
            .sum()
    }

    pub(crate) fn ln_density_unchecked(&self, x: [f64; 2]) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        for c in &self.components {
            acc = crate::posterior::log_sum_exp(
                acc,
                c.weight.ln() + iso_normal_ln_pdf(x, c.mean, c.var),
            );
        }
        acc
    }

    /// Total mass of the (unnormalized, wedge-restricted) intensity:
    /// `sum_l c_l * mass_W(mu_l, sigma_l)`.
    pub fn wedge_mass(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * truncated_gaussian_mass(c.mean, c.var))
            .sum()
    }
}

/// Binomial cardinality: `rho(n) = C(n_max, n) p^n (1-p)^(n_max - n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinomialCardinality {
    pub n_max: usize,
    pub p: f64,
}

impl BinomialCardinality {
    pub fn new(n_max: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "binomial probability must lie in [0, 1], got {}",
                p
            )));
        }
        Ok(BinomialCardinality { n_max, p })
    }

    /// Exact pmf at `n` (0 outside `0..=n_max`), computed through log-gamma
    /// so large `n_max` cannot overflow.
    pub fn pmf(&self, n: usize) -> f64 {
        let ln = self.ln_pmf(n);
        if ln == f64::NEG_INFINITY {
            0.0
        } else {
            ln.exp()
        }
    }

    pub fn ln_pmf(&self, n: usize) -> f64 {
        if n > self.n_max {
            return f64::NEG_INFINITY;
        }
        // Degenerate endpoints avoid 0 * ln 0.
        if self.p == 0.0 {
            return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if self.p == 1.0 {
            return if n == self.n_max {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        ln_choose(self.n_max, n)
            + n as f64 * self.p.ln()
            + (self.n_max - n) as f64 * (1.0 - self.p).ln()
    }

    /// Pmf vector over `0..=n_max`.
    pub fn pmf_vec(&self) -> Vec<f64> {
        (0..=self.n_max).map(|n| self.pmf(n)).collect()
    }
}

/// Constant detection probability and Gaussian likelihood-kernel variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub alpha: f64,
    pub sigma_yo: f64,
}

impl ObservationModel {
    pub fn new(alpha: f64, sigma_yo: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0, 1], got {}",
                alpha
            )));
        }
        if !(sigma_yo > 0.0) || !sigma_yo.is_finite() {
            return Err(Error::invalid(format!(
                "sigma_yo must be positive and finite, got {}",
                sigma_yo
            )));
        }
        Ok(ObservationModel { alpha, sigma_yo })
    }
}

/// Exponential intensity and binomial cardinality for unexpected features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnexpectedModel {
    pub mu_yu: f64,
    pub cardinality: BinomialCardinality,
}

impl UnexpectedModel {
    pub fn new(mu_yu: f64, cardinality: BinomialCardinality) -> Result<Self> {
        if !(mu_yu > 0.0) || !mu_yu.is_finite() {
            return Err(Error::invalid(format!(
                "mu_yu must be positive and finite, got {}",
                mu_yu
            )));
        }
        Ok(UnexpectedModel {
            mu_yu,
            cardinality,
        })
    }

    /// `mu^2 exp(-mu (b + p))` at a wedge point.
    pub fn intensity(&self, y: [f64; 2]) -> Result<f64> {
        require_in_wedge(y, "unexpected-feature point")?;
        Ok(self.ln_intensity_unchecked(y).exp())
    }

    pub(crate) fn ln_intensity_unchecked(&self, y: [f64; 2]) -> f64 {
        2.0 * self.mu_yu.ln() - self.mu_yu * (y[0] + y[1])
    }
}

/// Prior over diagrams: Gaussian-mixture intensity plus binomial cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct IidClusterPrior {
    pub intensity: GaussianMixtureIntensity,
    pub cardinality: BinomialCardinality,
}

/// Prior intensity evaluated at a wedge point.
pub fn eval_prior_intensity(prior: &IidClusterPrior, x: [f64; 2]) -> Result<f64> {
    prior.intensity.density(x)
}

/// Mass of the isotropic Gaussian `N(.; mean, var I)` on the first quadrant:
/// `Phi(mean_b / sqrt(var)) * Phi(mean_p / sqrt(var))`.
pub fn truncated_gaussian_mass(mean: [f64; 2], var: f64) -> f64 {
    let s = var.sqrt();
    std_normal_cdf(mean[0] / s) * std_normal_cdf(mean[1] / s)
}
