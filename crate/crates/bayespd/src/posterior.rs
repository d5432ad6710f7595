//! Closed-form posterior intensity and cardinality for diagrams modeled as
//! i.i.d. cluster point processes with a Gaussian-mixture prior intensity,
//! a constant detection probability, a Gaussian observation kernel, and an
//! exponential unexpected-feature intensity.
//!
//! All combinatorial sums are accumulated as log-magnitudes with
//! log-sum-exp; every term is nonnegative, so no sign tracking is needed.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma as ln_gamma_fn;

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;
use crate::pointprocess::{
    in_wedge, iso_normal_ln_pdf, iso_normal_pdf, ln_perm, BinomialCardinality, GaussianComponent,
    GaussianMixtureIntensity, ObservationModel, UnexpectedModel,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// ln(e^a + e^b) without overflow; -inf is the additive identity.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

fn ln_factorial(n: usize) -> f64 {
    ln_gamma_fn(n as f64 + 1.0)
}

/// A finite cardinality distribution over `0..probs.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityPmf {
    probs: Vec<f64>,
}

impl CardinalityPmf {
    /// Validates a pmf: nonnegative entries summing to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("cardinality pmf must be nonempty"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("cardinality pmf entries must be >= 0"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "cardinality pmf sums to {}, expected 1",
                total
            )));
        }
        Ok(CardinalityPmf { probs })
    }

    /// Normalizes arbitrary nonnegative weights into a pmf.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("cardinality weights must be nonempty"));
        }
        if weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("cardinality weights must be >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("cardinality weights sum to zero"));
        }
        Ok(CardinalityPmf {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n_max: usize) -> Self {
        CardinalityPmf {
            probs: vec![1.0 / (n_max + 1) as f64; n_max + 1],
        }
    }

    pub fn from_binomial(card: &BinomialCardinality) -> Self {
        CardinalityPmf {
            probs: card.pmf_vec(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Largest n with positive probability.
    pub fn support_max(&self) -> usize {
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }
}

/// `q_l(y) = N(y; mu_l, (sigma_yo + sigma_l) I)`: the marginal density of an
/// observation generated by prior component `l`.
pub fn marginal_q(component: &GaussianComponent, obs: &ObservationModel, y: [f64; 2]) -> f64 {
    iso_normal_pdf(y, component.mean, component.var + obs.sigma_yo)
}

fn ln_marginal_q(component: &GaussianComponent, obs: &ObservationModel, y: [f64; 2]) -> f64 {
    iso_normal_ln_pdf(y, component.mean, component.var + obs.sigma_yo)
}

/// Association weight of each observed point:
/// `nu_y = alpha <c, q(y)> / lambda_yu(y)`, in diagram order.
pub fn nu_values(
    diagram: &PersistenceDiagram,
    intensity: &GaussianMixtureIntensity,
    obs: &ObservationModel,
    unexpected: &UnexpectedModel,
) -> Result<Vec<f64>> {
    Ok(ln_nu_values(diagram, intensity, obs, unexpected)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

fn ln_nu_values(
    diagram: &PersistenceDiagram,
    intensity: &GaussianMixtureIntensity,
    obs: &ObservationModel,
    unexpected: &UnexpectedModel,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(diagram.points.len());
    for p in &diagram.points {
        let y = p.coords();
        if !in_wedge(y) {
            return Err(Error::invalid(format!(
                "observed diagram point ({}, {}) lies outside the wedge W",
                y[0], y[1]
            )));
        }
        if obs.alpha == 0.0 {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let mut ln_cq = f64::NEG_INFINITY;
        for c in intensity.components() {
            ln_cq = log_sum_exp(ln_cq, c.weight.ln() + ln_marginal_q(c, obs, y));
        }
        out.push(obs.alpha.ln() + ln_cq - unexpected.ln_intensity_unchecked(y));
    }
    Ok(out)
}

/// Elementary symmetric polynomials `e[k]` of `values`, `k = 0..=K`, by the
/// O(K^2) in-place recurrence; `e[0] = 1`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let k = values.len();
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

/// Same recurrence carried in log space (entries may be -inf).
fn ln_elementary_symmetric(ln_values: &[f64]) -> Vec<f64> {
    let k = ln_values.len();
    let mut e = vec![f64::NEG_INFINITY; k + 1];
    e[0] = 0.0;
    for (i, &lv) in ln_values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] = log_sum_exp(e[j], lv + e[j - 1]);
        }
    }
    e
}

/// Leave-one-out downdate of the elementary-symmetric vector: removes one
/// value from the DP in O(K). Returns None when the subtraction cancels too
/// many digits, in which case the caller recomputes from scratch.
fn ln_downdate(ln_e: &[f64], ln_nu_y: f64) -> Option<Vec<f64>> {
    let k = ln_e.len() - 1;
    if ln_nu_y == f64::NEG_INFINITY {
        return Some(ln_e[..k].to_vec());
    }
    let mut out = vec![f64::NEG_INFINITY; k];
    out[0] = 0.0;
    // Rounding-error bound in ulps; each cancelling step divides the
    // accumulated error by the surviving fraction.
    let mut err_ulps = 0.0f64;
    for j in 1..k {
        let t = ln_nu_y + out[j - 1];
        let target = ln_e[j];
        if t == f64::NEG_INFINITY {
            out[j] = target;
            continue;
        }
        if target == f64::NEG_INFINITY {
            return None;
        }
        // e'_j = e_j - nu * e'_{j-1}; both operands are nonnegative and the
        // true result is too, so only cancellation can hurt.
        let delta = t - target;
        let remainder = -f64::exp_m1(delta); // 1 - e^delta
        if remainder <= 0.0 {
            return None;
        }
        err_ulps = (err_ulps + 4.0) / remainder;
        if err_ulps > 1e5 {
            return None;
        }
        out[j] = target + remainder.ln();
    }
    Some(out)
}

/// One summand family of the posterior formulas:
///
/// `Gamma^{a,b}(tau) = sum_k (K-k-a)! P^tau_{k+b} rho_yu(K-k-a)
///                     (lambda[1-alpha])^(tau-k-b) e_{K-a,k}`
///
/// `e` holds the elementary symmetric values of the K-a retained points
/// (length at least K-a+1). The convention 0^0 = 1 applies when
/// `lambda[1-alpha]` is zero and its exponent vanishes.
pub fn gamma_term(
    a: usize,
    b: usize,
    tau: usize,
    k: usize,
    e: &[f64],
    unexpected_card: &BinomialCardinality,
    lam_one_minus_alpha: f64,
) -> Result<f64> {
    if a > 1 || b > 1 {
        return Err(Error::invalid("gamma indices a, b must be 0 or 1"));
    }
    if k < a || e.len() < k - a + 1 {
        return Err(Error::invalid(format!(
            "elementary-symmetric vector too short: need {} entries, got {}",
            k as isize - a as isize + 1,
            e.len()
        )));
    }
    if e.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("elementary-symmetric values must be >= 0"));
    }
    if !(lam_one_minus_alpha >= 0.0) {
        return Err(Error::invalid("lambda[1-alpha] must be >= 0"));
    }
    let ln_e: Vec<f64> = e.iter().map(|&v| v.ln()).collect();
    let ln_lam = if lam_one_minus_alpha == 0.0 {
        f64::NEG_INFINITY
    } else {
        lam_one_minus_alpha.ln()
    };
    Ok(ln_gamma_ab(a, b, tau, k, &ln_e, &|j| unexpected_card.ln_pmf(j), ln_lam).exp())
}

fn ln_gamma_ab(
    a: usize,
    b: usize,
    tau: usize,
    k_full: usize,
    ln_e: &[f64],
    ln_rho_yu: &dyn Fn(usize) -> f64,
    ln_lam: f64,
) -> f64 {
    let j_max = k_full - a; // number of retained observed points
    let mut acc = f64::NEG_INFINITY;
    for k in 0..=j_max.min(tau) {
        if k + b > tau {
            continue;
        }
        let exponent = tau - k - b;
        let pow = if exponent == 0 {
            0.0 // 0^0 := 1 when lambda[1-alpha] vanishes
        } else if ln_lam == f64::NEG_INFINITY {
            continue;
        } else {
            exponent as f64 * ln_lam
        };
        let term = ln_factorial(j_max - k)
            + ln_perm(tau, k + b)
            + ln_rho_yu(j_max - k)
            + pow
            + ln_e[k];
        acc = log_sum_exp(acc, term);
    }
    acc
}

/// One Gaussian component of the observed part of a posterior intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PostComponent {
    pub ln_weight: f64,
    pub mean: [f64; 2],
    pub var: f64,
}

/// Summary statistics of a posterior cardinality pmf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardinalityStats {
    pub mean: f64,
    pub variance: f64,
    pub map: usize,
}

/// Closed-form posterior: a scaled copy of the prior intensity for vanished
/// features, a Gaussian mixture anchored at observed points, and a truncated
/// cardinality pmf, all averaged over the observed diagrams.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDistribution {
    prior_intensity: GaussianMixtureIntensity,
    alpha: f64,
    vanished_scale: f64,
    components: Vec<PostComponent>,
    cardinality: Vec<f64>,
    m: usize,
    n_max: usize,
}

struct ObservationPosterior {
    ln_b_empty: f64,
    components: Vec<PostComponent>,
    ln_card: Vec<f64>,
}

/// Posterior from a Gaussian-mixture intensity and an arbitrary finite prior
/// cardinality pmf, given `observations` (the m independent diagrams). The
/// cardinality is truncated to `0..=n_max`, which must cover the prior
/// support.
pub fn compute_posterior(
    intensity: &GaussianMixtureIntensity,
    prior_cardinality: &CardinalityPmf,
    obs: &ObservationModel,
    unexpected: &UnexpectedModel,
    observations: &[PersistenceDiagram],
    n_max: usize,
) -> Result<PosteriorDistribution> {
    if observations.is_empty() {
        return Err(Error::invalid("at least one observed diagram is required"));
    }
    if n_max < prior_cardinality.support_max() {
        return Err(Error::invalid(format!(
            "n_max = {} truncates the prior cardinality support (max {})",
            n_max,
            prior_cardinality.support_max()
        )));
    }
    let ln_rho_x: Vec<f64> = (0..=n_max)
        .map(|n| {
            let p = prior_cardinality.prob(n);
            if p > 0.0 {
                p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let ln_lam = {
        let one_minus_alpha = 1.0 - obs.alpha;
        if one_minus_alpha == 0.0 {
            f64::NEG_INFINITY
        } else {
            one_minus_alpha.ln() + intensity.wedge_mass().ln()
        }
    };

    let run = |diagram: &PersistenceDiagram| -> Result<ObservationPosterior> {
        observation_posterior(diagram, intensity, obs, unexpected, &ln_rho_x, ln_lam, n_max)
    };

    #[cfg(feature = "parallel")]
    let per_obs: Vec<ObservationPosterior> = observations
        .par_iter()
        .map(run)
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let per_obs: Vec<ObservationPosterior> = observations
        .iter()
        .map(run)
        .collect::<Result<Vec<_>>>()?;

    let m = per_obs.len();
    let ln_m = (m as f64).ln();
    let ln_one_minus_alpha = if obs.alpha == 1.0 {
        f64::NEG_INFINITY
    } else {
        (1.0 - obs.alpha).ln()
    };

    let mut cardinality = vec![0.0; n_max + 1];
    let mut vanished_scale = 0.0;
    let mut components = Vec::new();
    for o in &per_obs {
        for (n, &lc) in o.ln_card.iter().enumerate() {
            cardinality[n] += lc.exp();
        }
        vanished_scale += (ln_one_minus_alpha + o.ln_b_empty).exp();
        components.extend(o.components.iter().map(|c| PostComponent {
            ln_weight: c.ln_weight - ln_m,
            mean: c.mean,
            var: c.var,
        }));
    }
    for c in &mut cardinality {
        *c /= m as f64;
    }
    vanished_scale /= m as f64;
    let total: f64 = cardinality.iter().sum();
    if !(total > 0.0) {
        return Err(Error::numerical(
            "posterior cardinality normalizer vanished".to_string(),
        ));
    }
    for c in &mut cardinality {
        *c /= total;
    }

    Ok(PosteriorDistribution {
        prior_intensity: intensity.clone(),
        alpha: obs.alpha,
        vanished_scale,
        components,
        cardinality,
        m,
        n_max,
    })
}

/// Posterior with the binomial prior cardinality of an i.i.d. cluster prior;
/// `n_max` defaults to the prior's maximum count.
pub fn compute_posterior_binomial(
    prior: &crate::pointprocess::IidClusterPrior,
    obs: &ObservationModel,
    unexpected: &UnexpectedModel,
    observations: &[PersistenceDiagram],
    n_max: Option<usize>,
) -> Result<PosteriorDistribution> {
    compute_posterior(
        &prior.intensity,
        &CardinalityPmf::from_binomial(&prior.cardinality),
        obs,
        unexpected,
        observations,
        n_max.unwrap_or(prior.cardinality.n_max),
    )
}

fn observation_posterior(
    diagram: &PersistenceDiagram,
    intensity: &GaussianMixtureIntensity,
    obs: &ObservationModel,
    unexpected: &UnexpectedModel,
    ln_rho_x: &[f64],
    ln_lam: f64,
    n_max: usize,
) -> Result<ObservationPosterior> {
    let k_full = diagram.points.len();
    let ln_nu = ln_nu_values(diagram, intensity, obs, unexpected)?;
    let ln_e = ln_elementary_symmetric(&ln_nu);
    let ln_rho_yu = |j: usize| unexpected.cardinality.ln_pmf(j);

    let ln_g00: Vec<f64> = (0..=n_max)
        .map(|n| ln_gamma_ab(0, 0, n, k_full, &ln_e, &ln_rho_yu, ln_lam))
        .collect();
    let mut ln_den = f64::NEG_INFINITY;
    for n in 0..=n_max {
        ln_den = log_sum_exp(ln_den, ln_rho_x[n] + ln_g00[n]);
    }
    if ln_den == f64::NEG_INFINITY {
        return Err(Error::numerical(format!(
            "the model assigns zero likelihood to an observed diagram with {} points",
            k_full
        )));
    }

    let ln_card: Vec<f64> = (0..=n_max)
        .map(|n| ln_rho_x[n] + ln_g00[n] - ln_den)
        .collect();

    let mut ln_b_empty = f64::NEG_INFINITY;
    for n in 0..=n_max {
        let g01 = ln_gamma_ab(0, 1, n, k_full, &ln_e, &ln_rho_yu, ln_lam);
        ln_b_empty = log_sum_exp(ln_b_empty, ln_rho_x[n] + g01);
    }
    let ln_b_empty = ln_b_empty - ln_den;

    let mut components = Vec::new();
    if obs.alpha > 0.0 {
        let ln_alpha = obs.alpha.ln();
        for (t, p) in diagram.points.iter().enumerate() {
            let y = p.coords();
            let ln_e_minus = match ln_downdate(&ln_e, ln_nu[t]) {
                Some(v) => v,
                None => {
                    let mut reduced = ln_nu.clone();
                    reduced.remove(t);
                    ln_elementary_symmetric(&reduced)
                }
            };
            let mut ln_num = f64::NEG_INFINITY;
            for n in 0..=n_max {
                let g11 = ln_gamma_ab(1, 1, n, k_full, &ln_e_minus, &ln_rho_yu, ln_lam);
                ln_num = log_sum_exp(ln_num, ln_rho_x[n] + g11);
            }
            let ln_b_y = ln_num - ln_den;
            let ln_yu = unexpected.ln_intensity_unchecked(y);
            for c in intensity.components() {
                let ln_weight =
                    ln_b_y + ln_alpha + c.weight.ln() + ln_marginal_q(c, obs, y) - ln_yu;
                if ln_weight == f64::NEG_INFINITY {
                    continue;
                }
                let denom = c.var + obs.sigma_yo;
                components.push(PostComponent {
                    ln_weight,
                    mean: [
                        (c.var * y[0] + obs.sigma_yo * c.mean[0]) / denom,
                        (c.var * y[1] + obs.sigma_yo * c.mean[1]) / denom,
                    ],
                    var: obs.sigma_yo * c.var / denom,
                });
            }
        }
    }

    Ok(ObservationPosterior {
        ln_b_empty,
        components,
        ln_card,
    })
}

impl PosteriorDistribution {
    pub fn cardinality(&self) -> &[f64] {
        &self.cardinality
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn vanished_scale(&self) -> f64 {
        self.vanished_scale
    }

    pub fn components(&self) -> &[PostComponent] {
        &self.components
    }

    pub fn prior_intensity(&self) -> &GaussianMixtureIntensity {
        &self.prior_intensity
    }

    /// Posterior intensity at a wedge point.
    pub fn intensity_at(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.ln_intensity_at(x)?.exp())
    }

    /// Log posterior intensity at a wedge point (-inf where it vanishes).
    pub fn ln_intensity_at(&self, x: [f64; 2]) -> Result<f64> {
        if !in_wedge(x) {
            return Err(Error::invalid(format!(
                "evaluation point ({}, {}) lies outside the wedge W",
                x[0], x[1]
            )));
        }
        Ok(self.ln_intensity_unchecked(x))
    }

    fn ln_intensity_unchecked(&self, x: [f64; 2]) -> f64 {
        let mut acc = if self.vanished_scale > 0.0 {
            self.vanished_scale.ln() + self.prior_intensity.ln_density_unchecked(x)
        } else {
            f64::NEG_INFINITY
        };
        for c in &self.components {
            acc = log_sum_exp(acc, c.ln_weight + iso_normal_ln_pdf(x, c.mean, c.var));
        }
        acc
    }

    /// Mean, variance, and mode of the truncated posterior cardinality.
    pub fn cardinality_stats(&self) -> CardinalityStats {
        let mean: f64 = self
            .cardinality
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum();
        let variance: f64 = self
            .cardinality
            .iter()
            .enumerate()
            .map(|(n, &p)| (n as f64 - mean).powi(2) * p)
            .sum();
        let mut map = 0;
        for (n, &p) in self.cardinality.iter().enumerate() {
            if p > self.cardinality[map] {
                map = n;
            }
        }
        CardinalityStats {
            mean,
            variance,
            map,
        }
    }

    /// Log of the diagram density `rho(|D|) * prod_d lambda(d)`; -inf when
    /// the pmf or the intensity vanishes on the diagram.
    pub fn diagram_log_density(&self, diagram: &PersistenceDiagram) -> Result<f64> {
        let n = diagram.points.len();
        if n > self.n_max {
            return Err(Error::invalid(format!(
                "diagram has {} points, beyond the cardinality truncation {}",
                n, self.n_max
            )));
        }
        let rho = self.cardinality[n];
        if rho == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let mut total = rho.ln();
        for p in &diagram.points {
            let x = p.coords();
            if !in_wedge(x) {
                return Err(Error::invalid(format!(
                    "diagram point ({}, {}) lies outside the wedge W",
                    x[0], x[1]
                )));
            }
            let lx = self.ln_intensity_unchecked(x);
            if lx == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += lx;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::DiagramPoint;
    use crate::pointprocess::IidClusterPrior;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diagram(points: &[[f64; 2]]) -> PersistenceDiagram {
        PersistenceDiagram {
            dim: 1,
            points: points
                .iter()
                .map(|p| DiagramPoint::new(p[0], p[1]))
                .collect(),
        }
    }

    fn single_component(weight: f64, mean: [f64; 2], var: f64) -> GaussianMixtureIntensity {
        GaussianMixtureIntensity::new(vec![GaussianComponent { weight, mean, var }]).unwrap()
    }

    #[test]
    fn marginal_q_peak_and_symmetry() {
        let comp = GaussianComponent {
            weight: 1.0,
            mean: [0.4, 0.7],
            var: 0.5,
        };
        let obs = ObservationModel::new(0.9, 0.5).unwrap();
        let v = marginal_q(&comp, &obs, [0.4, 0.7]);
        assert_relative_eq!(v, 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-12);

        // Swapping the two variances leaves q unchanged.
        let comp2 = GaussianComponent {
            weight: 1.0,
            mean: [0.4, 0.7],
            var: 0.2,
        };
        let obs2 = ObservationModel::new(0.9, 0.5).unwrap();
        let comp3 = GaussianComponent {
            weight: 1.0,
            mean: [0.4, 0.7],
            var: 0.5,
        };
        let obs3 = ObservationModel::new(0.9, 0.2).unwrap();
        for y in [[0.1, 0.2], [1.0, 0.0], [0.4, 0.7]] {
            assert_relative_eq!(
                marginal_q(&comp2, &obs2, y),
                marginal_q(&comp3, &obs3, y),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn marginal_q_table_parameters() {
        // Informative component 1 with sigma_yo = 0.01, evaluated at its mean.
        let comp = GaussianComponent {
            weight: 2.0,
            mean: [0.2, 0.55],
            var: 0.0018,
        };
        let obs = ObservationModel::new(0.95, 0.01).unwrap();
        let v = marginal_q(&comp, &obs, [0.2, 0.55]);
        assert_relative_eq!(
            v,
            1.0 / (2.0 * std::f64::consts::PI * 0.0118),
            epsilon = 1e-12
        );
        assert!((v - 13.49).abs() < 0.01);
    }

    #[test]
    fn nu_examples() {
        let gm = single_component(1.0, [1.0, 1.0], 0.5);
        let unexpected =
            UnexpectedModel::new(1.0, BinomialCardinality::new(10, 0.5).unwrap()).unwrap();
        let d = diagram(&[[1.0, 1.0]]);

        let obs0 = ObservationModel::new(0.0, 0.5).unwrap();
        assert_eq!(nu_values(&d, &gm, &obs0, &unexpected).unwrap(), vec![0.0]);

        let obs1 = ObservationModel::new(1.0, 0.5).unwrap();
        let nu = nu_values(&d, &gm, &obs1, &unexpected).unwrap();
        let expect = (1.0 / (2.0 * std::f64::consts::PI)) / (-2.0f64).exp();
        assert_relative_eq!(nu[0], expect, epsilon = 1e-12);
        assert!((nu[0] - 1.176).abs() < 1e-3);

        // nu scales linearly in alpha.
        let obs_half = ObservationModel::new(0.5, 0.5).unwrap();
        let nu_half = nu_values(&d, &gm, &obs_half, &unexpected).unwrap();
        assert_relative_eq!(nu_half[0], 0.5 * nu[0], epsilon = 1e-12);
    }

    #[test]
    fn elementary_symmetric_examples() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0]), vec![1.0, 6.0, 11.0, 6.0]);
        assert_eq!(elementary_symmetric(&[]), vec![1.0]);
        let e = elementary_symmetric(&[0.3, 0.0, 2.5, 7.1]);
        assert_eq!(e[0], 1.0);
    }

    #[test]
    fn elementary_symmetric_matches_subset_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let k = rng.gen_range(0..=10);
            let values: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..5.0)).collect();
            let fast = elementary_symmetric(&values);
            let slow = brute_force_esp(&values);
            for (f, s) in fast.iter().zip(&slow) {
                if *s == 0.0 {
                    assert_eq!(*f, 0.0);
                } else {
                    assert!((f - s).abs() <= 1e-12 * s.abs());
                }
            }
        }
    }

    fn brute_force_esp(values: &[f64]) -> Vec<f64> {
        let k = values.len();
        let mut e = vec![0.0; k + 1];
        for mask in 0u32..(1 << k) {
            let mut prod = 1.0;
            for (i, &v) in values.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    prod *= v;
                }
            }
            e[mask.count_ones() as usize] += prod;
        }
        e
    }

    #[test]
    fn ln_elementary_symmetric_matches_linear() {
        let values = [0.5, 3.0, 0.0, 7.0, 0.01];
        let lin = elementary_symmetric(&values);
        let ln: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let le = ln_elementary_symmetric(&ln);
        for (a, b) in lin.iter().zip(&le) {
            if *a == 0.0 {
                assert_eq!(*b, f64::NEG_INFINITY);
            } else {
                assert_relative_eq!(a.ln(), *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn downdate_matches_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let k = rng.gen_range(1..=12);
            let ln_nu: Vec<f64> = (0..k).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let ln_e = ln_elementary_symmetric(&ln_nu);
            for t in 0..k {
                let direct = {
                    let mut reduced = ln_nu.clone();
                    reduced.remove(t);
                    ln_elementary_symmetric(&reduced)
                };
                if let Some(down) = ln_downdate(&ln_e, ln_nu[t]) {
                    for (a, b) in down.iter().zip(&direct) {
                        if *b == f64::NEG_INFINITY {
                            assert_eq!(*a, f64::NEG_INFINITY);
                        } else {
                            assert!((a - b).abs() < 1e-9, "downdate {} vs direct {}", a, b);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_term_base_cases() {
        let card = BinomialCardinality::new(10, 0.3).unwrap();
        // K = 0: Gamma(tau) = rho_yu(0) * lam^tau.
        let e0 = vec![1.0];
        for tau in 0..5 {
            let g = gamma_term(0, 0, tau, 0, &e0, &card, 0.7).unwrap();
            assert_relative_eq!(g, card.pmf(0) * 0.7f64.powi(tau as i32), epsilon = 1e-12);
        }
        // alpha = 1 so lam = 0: only tau = 0 survives (0^0 = 1).
        assert_relative_eq!(
            gamma_term(0, 0, 0, 0, &e0, &card, 0.0).unwrap(),
            card.pmf(0),
            epsilon = 1e-14
        );
        assert_eq!(gamma_term(0, 0, 3, 0, &e0, &card, 0.0).unwrap(), 0.0);
        // b = 1 with tau = 0: the permutation coefficient vanishes.
        let e2 = elementary_symmetric(&[0.5, 2.0]);
        assert_eq!(gamma_term(0, 1, 0, 2, &e2, &card, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn gamma_term_matches_direct_sum() {
        let card = BinomialCardinality::new(6, 0.4).unwrap();
        let nu = [0.7, 1.3, 0.2, 3.0];
        let e = elementary_symmetric(&nu);
        let lam = 0.35f64;
        for tau in 0..8usize {
            for (a, b) in [(0usize, 0usize), (0, 1), (1, 1)] {
                let k_full = nu.len() + a; // e always holds k_full - a values here
                let mut direct = 0.0;
                for k in 0..=(nu.len()).min(tau) {
                    if k + b > tau {
                        continue;
                    }
                    let perm: f64 = ((tau - (k + b) + 1)..=tau).map(|v| v as f64).product();
                    direct += fact(nu.len() - k)
                        * perm
                        * card.pmf(nu.len() - k)
                        * lam.powi((tau - k - b) as i32)
                        * e[k];
                }
                let got = gamma_term(a, b, tau, k_full, &e, &card, lam).unwrap();
                if direct == 0.0 {
                    assert_eq!(got, 0.0);
                } else {
                    assert_relative_eq!(got, direct, max_relative = 1e-11);
                }
            }
        }
    }

    fn fact(n: usize) -> f64 {
        (1..=n).map(|v| v as f64).product()
    }

    fn simple_models() -> (
        GaussianMixtureIntensity,
        CardinalityPmf,
        ObservationModel,
        UnexpectedModel,
    ) {
        let gm = single_component(1.0, [0.5, 0.5], 0.25);
        let card = CardinalityPmf::from_binomial(&BinomialCardinality::new(6, 0.5).unwrap());
        let obs = ObservationModel::new(0.9, 0.05).unwrap();
        let unexpected =
            UnexpectedModel::new(2.0, BinomialCardinality::new(6, 0.3).unwrap()).unwrap();
        (gm, card, obs, unexpected)
    }

    #[test]
    fn alpha_one_empty_diagram_gives_delta_zero() {
        let (gm, card, _, unexpected) = simple_models();
        let obs = ObservationModel::new(1.0, 0.05).unwrap();
        let post =
            compute_posterior(&gm, &card, &obs, &unexpected, &[diagram(&[])], 6).unwrap();
        assert_eq!(post.cardinality()[0], 1.0);
        for n in 1..=6 {
            assert_eq!(post.cardinality()[n], 0.0);
        }
        let stats = post.cardinality_stats();
        assert_eq!(stats.map, 0);
        assert_eq!(stats.mean, 0.0);
        assert_eq!(stats.variance, 0.0);
        // With alpha = 1 the vanished term contributes nothing anywhere.
        assert_eq!(post.vanished_scale(), 0.0);
    }

    #[test]
    fn equal_variances_give_midpoint_components() {
        let gm = single_component(1.0, [0.4, 0.6], 0.05);
        let card = CardinalityPmf::from_binomial(&BinomialCardinality::new(4, 0.5).unwrap());
        let obs = ObservationModel::new(0.9, 0.05).unwrap();
        let unexpected =
            UnexpectedModel::new(1.0, BinomialCardinality::new(4, 0.3).unwrap()).unwrap();
        let y = [0.2, 0.8];
        let post =
            compute_posterior(&gm, &card, &obs, &unexpected, &[diagram(&[y])], 4).unwrap();
        assert_eq!(post.components().len(), 1);
        let c = &post.components()[0];
        assert_relative_eq!(c.mean[0], (y[0] + 0.4) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(c.mean[1], (y[1] + 0.6) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(c.var, 0.05 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn repeated_observations_match_single() {
        let (gm, card, obs, unexpected) = simple_models();
        let d = diagram(&[[0.45, 0.52], [0.1, 0.05]]);
        let once = compute_posterior(&gm, &card, &obs, &unexpected, &[d.clone()], 6).unwrap();
        let twice = compute_posterior(
            &gm,
            &card,
            &obs,
            &unexpected,
            &[d.clone(), d.clone()],
            6,
        )
        .unwrap();
        // Averaging two identical observations divides by an exact power of
        // two, so the cardinality matches bitwise.
        assert_eq!(once.cardinality(), twice.cardinality());
        assert_eq!(once.vanished_scale(), twice.vanished_scale());
        for x in [[0.5, 0.5], [0.2, 0.1], [1.0, 0.7]] {
            assert_relative_eq!(
                once.intensity_at(x).unwrap(),
                twice.intensity_at(x).unwrap(),
                max_relative = 1e-12
            );
        }
        let thrice =
            compute_posterior(&gm, &card, &obs, &unexpected, &[d.clone(), d.clone(), d], 6)
                .unwrap();
        for (a, b) in once.cardinality().iter().zip(thrice.cardinality()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn posterior_cardinality_normalizes_and_is_nonnegative() {
        let (gm, card, obs, unexpected) = simple_models();
        let d = diagram(&[[0.4, 0.4], [0.6, 0.6], [0.05, 0.02]]);
        let post = compute_posterior(&gm, &card, &obs, &unexpected, &[d], 6).unwrap();
        let total: f64 = post.cardinality().iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        assert!(post.cardinality().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn posterior_intensity_nonnegative_and_rejects_outside_w() {
        let (gm, card, obs, unexpected) = simple_models();
        let d = diagram(&[[0.4, 0.4]]);
        let post = compute_posterior(&gm, &card, &obs, &unexpected, &[d], 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
            assert!(post.intensity_at(x).unwrap() >= 0.0);
        }
        assert!(post.intensity_at([-0.01, 0.4]).is_err());
    }

    #[test]
    fn cardinality_stats_uniform() {
        let (gm, _, obs, _unexpected) = simple_models();
        // Force a uniform posterior by checking the stats helper directly.
        let post = PosteriorDistribution {
            prior_intensity: gm,
            alpha: obs.alpha,
            vanished_scale: 0.0,
            components: vec![],
            cardinality: vec![1.0 / 3.0; 3],
            m: 1,
            n_max: 2,
        };
        let stats = post.cardinality_stats();
        assert_relative_eq!(stats.mean, 1.0, epsilon = 1e-12);
        assert_relative_eq!(stats.variance, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(stats.map, 0); // ties break to the smallest index
    }

    #[test]
    fn diagram_log_density_behaviour() {
        let (gm, card, obs, unexpected) = simple_models();
        let d = diagram(&[[0.45, 0.52]]);
        let post = compute_posterior(&gm, &card, &obs, &unexpected, &[d], 6).unwrap();

        let empty = diagram(&[]);
        assert_relative_eq!(
            post.diagram_log_density(&empty).unwrap(),
            post.cardinality()[0].ln(),
            epsilon = 1e-12
        );

        // Permutation invariance.
        let d1 = diagram(&[[0.1, 0.2], [0.5, 0.6], [0.3, 0.01]]);
        let d2 = diagram(&[[0.3, 0.01], [0.1, 0.2], [0.5, 0.6]]);
        assert_eq!(
            post.diagram_log_density(&d1).unwrap(),
            post.diagram_log_density(&d2).unwrap()
        );

        // Oversized diagrams are rejected.
        let big = diagram(&[[0.1, 0.1]; 7]);
        assert!(post.diagram_log_density(&big).is_err());
    }

    #[test]
    fn gaussian_product_lemma_identity() {
        // N(y; x, s' I) N(x; m, s I) = q(y) N(x; m_hat, p_hat I) with
        // m_hat, p_hat as in the closed-form posterior.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let y = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let x = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let m = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let s = rng.gen_range(0.01..1.5);
            let sp = rng.gen_range(0.01..1.5);
            let lhs = iso_normal_pdf(y, x, sp) * iso_normal_pdf(x, m, s);
            let q = iso_normal_pdf(y, m, s + sp);
            let m_hat = [
                (s * y[0] + sp * m[0]) / (s + sp),
                (s * y[1] + sp * m[1]) / (s + sp),
            ];
            let p_hat = s * sp / (s + sp);
            let rhs = q * iso_normal_pdf(x, m_hat, p_hat);
            if lhs > 1e-290 {
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
            }
        }
    }

    #[test]
    fn binomial_prior_defaults_n_max() {
        let prior = IidClusterPrior {
            intensity: single_component(1.0, [0.5, 0.5], 0.25),
            cardinality: BinomialCardinality::new(6, 0.5).unwrap(),
        };
        let obs = ObservationModel::new(0.9, 0.05).unwrap();
        let unexpected =
            UnexpectedModel::new(2.0, BinomialCardinality::new(6, 0.3).unwrap()).unwrap();
        let post = compute_posterior_binomial(
            &prior,
            &obs,
            &unexpected,
            &[diagram(&[[0.4, 0.4]])],
            None,
        )
        .unwrap();
        assert_eq!(post.cardinality().len(), 7);
        assert_eq!(post.n_max(), 6);
    }

    #[test]
    fn n_max_must_cover_prior_support() {
        let (gm, card, obs, unexpected) = simple_models();
        let err = compute_posterior(&gm, &card, &obs, &unexpected, &[diagram(&[])], 3);
        assert!(err.is_err());
    }
}
