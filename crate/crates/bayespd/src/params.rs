//! Shipped model parameters: the informative/uninformative sensitivity
//! priors, the per-case observation and unexpected-feature settings, and the
//! classification configuration.

use crate::error::{Error, Result};
use crate::pointprocess::{
    BinomialCardinality, GaussianComponent, GaussianMixtureIntensity, IidClusterPrior,
    ObservationModel, UnexpectedModel,
};
use crate::posterior::CardinalityPmf;

/// Maximum prior count for the sensitivity study.
pub const SENSITIVITY_N0: usize = 15;
/// Detection probability used throughout the sensitivity study. Kept high
/// so that the vanished-feature mass stays well below one expected point;
/// at 0.95 the flat-cardinality posterior sits on a knife edge between 4
/// and 5 points for the reference fixture.
pub const SENSITIVITY_ALPHA: f64 = 0.99;
/// Maximum unexpected-feature count for the sensitivity study.
pub const SENSITIVITY_M0: usize = 10;
/// Point count of the reference polar-curve fixture.
pub const POLAR_FIXTURE_N: usize = 96;
/// Seed of the reference polar-curve fixture.
pub const POLAR_FIXTURE_SEED: u64 = 1;

/// Two equally weighted tight components sitting on the four-feature
/// structure of the polar curve (one per symmetric pair).
pub fn informative_intensity() -> GaussianMixtureIntensity {
    GaussianMixtureIntensity::new(vec![
        GaussianComponent {
            weight: 2.0,
            mean: [0.2, 0.55],
            var: 0.0018,
        },
        GaussianComponent {
            weight: 2.0,
            mean: [0.17, 0.35],
            var: 0.0018,
        },
    ])
    .expect("valid informative intensity")
}

/// Single broad component centered in the unit wedge square.
pub fn uninformative_intensity() -> GaussianMixtureIntensity {
    GaussianMixtureIntensity::new(vec![GaussianComponent {
        weight: 1.0,
        mean: [0.5, 0.5],
        var: 0.5,
    }])
    .expect("valid uninformative intensity")
}

/// Discrete prior cardinality peaked at 4 (a discretized unit-variance
/// Gaussian over 0..=15).
pub fn informative_cardinality() -> CardinalityPmf {
    let weights: Vec<f64> = (0..=SENSITIVITY_N0)
        .map(|n| (-((n as f64 - 4.0).powi(2)) / 2.0).exp())
        .collect();
    CardinalityPmf::normalized(weights).expect("valid informative cardinality")
}

/// Discrete uniform prior cardinality over 0..=15.
pub fn uniform_cardinality() -> CardinalityPmf {
    CardinalityPmf::uniform(SENSITIVITY_N0)
}

/// Observation and unexpected-feature parameters of one sensitivity case,
/// together with the generator noise for the corresponding point cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseParams {
    pub noise_var: f64,
    pub sigma_yo: f64,
    pub mu_yu: f64,
    pub rho_y: f64,
}

/// Base parameters per case: ascending noise levels with a shared
/// observation/unexpected configuration.
pub fn case_params(case: u8) -> Result<CaseParams> {
    let noise_var = match case {
        1 => 0.001,
        2 => 0.005,
        3 => 0.01,
        _ => {
            return Err(Error::invalid(format!(
                "sensitivity case must be 1, 2, or 3, got {}",
                case
            )))
        }
    };
    Ok(CaseParams {
        noise_var,
        sigma_yo: 0.01,
        mu_yu: 20.0,
        rho_y: 0.5,
    })
}

/// Observation model of a sensitivity case (detection fixed at
/// [`SENSITIVITY_ALPHA`]).
pub fn sensitivity_observation(params: &CaseParams) -> ObservationModel {
    ObservationModel::new(SENSITIVITY_ALPHA, params.sigma_yo).expect("valid observation model")
}

/// Unexpected-feature model of a sensitivity case.
pub fn sensitivity_unexpected(params: &CaseParams) -> Result<UnexpectedModel> {
    UnexpectedModel::new(
        params.mu_yu,
        BinomialCardinality::new(SENSITIVITY_M0, params.rho_y)?,
    )
}

/// Flat single-component prior, observation, and unexpected models used for
/// the classification benchmark.
pub fn classification_models() -> (IidClusterPrior, ObservationModel, UnexpectedModel) {
    let prior = IidClusterPrior {
        intensity: GaussianMixtureIntensity::new(vec![GaussianComponent {
            weight: 1.0,
            mean: [1.0, 2.0],
            var: 6.0,
        }])
        .expect("valid classification intensity"),
        cardinality: BinomialCardinality::new(25, 24.0 / 25.0).expect("valid cardinality"),
    };
    let obs = ObservationModel::new(0.95, 0.01).expect("valid observation model");
    let unexpected = UnexpectedModel::new(
        1.0,
        BinomialCardinality::new(25, 2.0 / 25.0).expect("valid cardinality"),
    )
    .expect("valid unexpected model");
    (prior, obs, unexpected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn informative_cardinality_peaks_at_four() {
        let pmf = informative_cardinality();
        let max = pmf
            .probs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(max, 4);
        assert_eq!(pmf.probs().len(), SENSITIVITY_N0 + 1);
    }

    #[test]
    fn case_params_match_noise_table() {
        assert_eq!(case_params(1).unwrap().noise_var, 0.001);
        assert_eq!(case_params(2).unwrap().noise_var, 0.005);
        assert_eq!(case_params(3).unwrap().noise_var, 0.01);
        assert!(case_params(4).is_err());
        let p = case_params(1).unwrap();
        assert_eq!((p.sigma_yo, p.mu_yu, p.rho_y), (0.01, 20.0, 0.5));
    }

    #[test]
    fn classification_models_match_configuration() {
        let (prior, obs, unexpected) = classification_models();
        let comp = &prior.intensity.components()[0];
        assert_eq!(comp.mean, [1.0, 2.0]);
        assert_eq!(comp.var, 6.0);
        assert_eq!(comp.weight, 1.0);
        assert_eq!(prior.cardinality.n_max, 25);
        assert_eq!(prior.cardinality.p, 24.0 / 25.0);
        assert_eq!(obs.alpha, 0.95);
        assert_eq!(obs.sigma_yo, 0.01);
        assert_eq!(unexpected.mu_yu, 1.0);
        assert_eq!(unexpected.cardinality.n_max, 25);
        assert_eq!(unexpected.cardinality.p, 2.0 / 25.0);
    }
}
