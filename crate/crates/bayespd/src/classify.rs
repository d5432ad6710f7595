//! Bayes-factor classification of persistence diagrams with majority voting,
//! stratified k-fold cross-validation, and rank-based ROC AUC.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;
use crate::pointprocess::{GaussianMixtureIntensity, ObservationModel, UnexpectedModel};
use crate::posterior::{compute_posterior, CardinalityPmf, PosteriorDistribution};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Model configuration shared by every class of a classifier.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub intensity: GaussianMixtureIntensity,
    pub cardinality: CardinalityPmf,
    pub obs: ObservationModel,
    pub unexpected: UnexpectedModel,
    pub n_max: usize,
}

/// One posterior per class, fit on that class's training diagrams, plus the
/// Bayes-factor threshold.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    classes: Vec<String>,
    posteriors: Vec<PosteriorDistribution>,
    threshold: f64,
}

/// Fit one posterior per class. `training` must hold at least two classes,
/// each with at least one diagram; class order is preserved and defines the
/// class indices used everywhere else.
pub fn fit(
    training: &[(String, Vec<PersistenceDiagram>)],
    config: &ModelConfig,
    threshold: f64,
) -> Result<TrainedClassifier> {
    if training.len() < 2 {
        return Err(Error::invalid("a classifier needs at least two classes"));
    }
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::invalid(format!(
            "Bayes-factor threshold must be positive, got {}",
            threshold
        )));
    }
    for (label, diagrams) in training {
        if diagrams.is_empty() {
            return Err(Error::invalid(format!(
                "class {:?} has no training diagrams",
                label
            )));
        }
    }
    let posteriors = training
        .iter()
        .map(|(label, diagrams)| {
            compute_posterior(
                &config.intensity,
                &config.cardinality,
                &config.obs,
                &config.unexpected,
                diagrams,
                config.n_max,
            )
            .map_err(|e| match e {
                Error::Numerical(msg) => {
                    Error::Numerical(format!("class {:?}: {}", label, msg))
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedClassifier {
        classes: training.iter().map(|(label, _)| label.clone()).collect(),
        posteriors,
        threshold,
    })
}

impl TrainedClassifier {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn posteriors(&self) -> &[PosteriorDistribution] {
        &self.posteriors
    }

    /// `BF^{ij} = p(D | class i) / p(D | class j)`, evaluated in log space.
    pub fn bayes_factor(&self, diagram: &PersistenceDiagram, i: usize, j: usize) -> Result<f64> {
        if i == j || i >= self.classes.len() || j >= self.classes.len() {
            return Err(Error::invalid(format!(
                "class indices ({}, {}) must be distinct and within range",
                i, j
            )));
        }
        let li = self.posteriors[i].diagram_log_density(diagram)?;
        let lj = self.posteriors[j].diagram_log_density(diagram)?;
        if li == f64::NEG_INFINITY && lj == f64::NEG_INFINITY {
            return Err(Error::numerical(
                "diagram has zero density under both class models".to_string(),
            ));
        }
        Ok((li - lj).exp())
    }

    /// Majority vote over all unordered class pairs. For each pair {i, j}
    /// with i < j, one comparison is made: class i receives the vote when
    /// BF^{ij} strictly exceeds the threshold, class j otherwise. Ties in
    /// the vote count resolve to the smallest class index.
    pub fn predict(&self, diagram: &PersistenceDiagram) -> Result<(usize, Vec<usize>)> {
        let k = self.classes.len();
        let log_densities: Vec<f64> = self
            .posteriors
            .iter()
            .map(|p| p.diagram_log_density(diagram))
            .collect::<Result<Vec<_>>>()?;
        let mut votes = vec![0usize; k];
        let ln_c = self.threshold.ln();
        for i in 0..k {
            for j in (i + 1)..k {
                if log_densities[i] == f64::NEG_INFINITY
                    && log_densities[j] == f64::NEG_INFINITY
                {
                    return Err(Error::numerical(
                        "diagram has zero density under two class models".to_string(),
                    ));
                }
                if log_densities[i] - log_densities[j] > ln_c {
                    votes[i] += 1;
                } else {
                    votes[j] += 1;
                }
            }
        }
        let mut best = 0;
        for i in 1..k {
            if votes[i] > votes[best] {
                best = i;
            }
        }
        Ok((best, votes))
    }
}

/// Per-instance record of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPrediction {
    pub fold: usize,
    pub true_label: String,
    pub predicted: String,
    pub votes: Vec<usize>,
}

/// Cross-validation report: per-instance predictions, the pooled confusion
/// matrix (rows = true class, columns = predicted), and the pooled
/// macro one-vs-rest AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub fold_predictions: Vec<FoldPrediction>,
    pub confusion: Vec<Vec<usize>>,
    pub auc: f64,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..self.classes.len()).map(|i| self.confusion[i][i]).sum();
        let total: usize = self.confusion.iter().flatten().sum();
        correct as f64 / total as f64
    }
}

/// Stratified k-fold split: within each class, indices are shuffled with the
/// seeded RNG and dealt into k near-equal chunks. Returns per-fold index
/// lists into `labels`.
fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for class in 0..n_classes {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        // Deal contiguous chunks, sized as evenly as possible.
        let n = idx.len();
        let base = n / k;
        let extra = n % k;
        let mut cursor = 0;
        for (f, fold) in folds.iter_mut().enumerate() {
            let size = base + usize::from(f < extra);
            fold.extend_from_slice(&idx[cursor..cursor + size]);
            cursor += size;
        }
    }
    folds
}

/// Stratified k-fold cross-validation of the Bayes-factor classifier.
/// Per-class AUC scores are the vote fractions of the pooled held-out
/// predictions; the reported AUC is their macro one-vs-rest average.
pub fn cross_validate(
    data: &[(String, PersistenceDiagram)],
    k: usize,
    config: &ModelConfig,
    threshold: f64,
    seed: u64,
) -> Result<EvalReport> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs k >= 2 folds"));
    }
    // Class order: first appearance in the data.
    let mut classes: Vec<String> = Vec::new();
    for (label, _) in data {
        if !classes.contains(label) {
            classes.push(label.clone());
        }
    }
    if classes.len() < 2 {
        return Err(Error::invalid("cross-validation needs at least two classes"));
    }
    let labels: Vec<usize> = data
        .iter()
        .map(|(label, _)| classes.iter().position(|c| c == label).unwrap())
        .collect();
    for (ci, class) in classes.iter().enumerate() {
        let count = labels.iter().filter(|&&l| l == ci).count();
        if count < k {
            return Err(Error::invalid(format!(
                "class {:?} has {} instances, fewer than k = {}",
                class, count, k
            )));
        }
    }

    let folds = stratified_folds(&labels, classes.len(), k, seed);

    let run_fold = |fold_id: usize| -> Result<Vec<(usize, usize, usize, Vec<usize>)>> {
        let test_idx = &folds[fold_id];
        let mut training: Vec<(String, Vec<PersistenceDiagram>)> = classes
            .iter()
            .map(|c| (c.clone(), Vec::new()))
            .collect();
        for (i, (_, diagram)) in data.iter().enumerate() {
            if !test_idx.contains(&i) {
                training[labels[i]].1.push(diagram.clone());
            }
        }
        let clf = fit(&training, config, threshold)?;
        let mut rows = Vec::with_capacity(test_idx.len());
        for &i in test_idx {
            let (pred, votes) = clf.predict(&data[i].1)?;
            rows.push((i, labels[i], pred, votes));
        }
        Ok(rows)
    };

    #[cfg(feature = "parallel")]
    let fold_rows: Vec<Vec<(usize, usize, usize, Vec<usize>)>> = (0..k)
        .into_par_iter()
        .map(run_fold)
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let fold_rows: Vec<Vec<(usize, usize, usize, Vec<usize>)>> =
        (0..k).map(run_fold).collect::<Result<Vec<_>>>()?;

    let n_classes = classes.len();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut fold_predictions = Vec::with_capacity(data.len());
    let mut pooled_labels = Vec::with_capacity(data.len());
    let mut pooled_scores: Vec<Vec<f64>> = Vec::with_capacity(data.len());
    let pair_count = n_classes - 1;
    for (fold_id, rows) in fold_rows.iter().enumerate() {
        for (_, true_label, pred, votes) in rows {
            confusion[*true_label][*pred] += 1;
            fold_predictions.push(FoldPrediction {
                fold: fold_id,
                true_label: classes[*true_label].clone(),
                predicted: classes[*pred].clone(),
                votes: votes.clone(),
            });
            pooled_labels.push(*true_label);
            pooled_scores.push(
                votes
                    .iter()
                    .map(|&v| v as f64 / pair_count as f64)
                    .collect(),
            );
        }
    }

    let auc = macro_ovr_auc(&pooled_labels, &pooled_scores, n_classes)?;
    Ok(EvalReport {
        classes,
        fold_predictions,
        confusion,
        auc,
    })
}

/// Binary AUC by the Mann-Whitney rank statistic with midrank ties:
/// the probability a random positive outranks a random negative.
pub fn roc_auc_binary(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::invalid("labels and scores differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("AUC scores must be finite"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid(
            "AUC needs at least one positive and one negative instance",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l)
        .map(|(_, &r)| r)
        .sum();
    Ok((rank_sum - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// Macro-averaged one-vs-rest AUC over per-class score columns.
pub fn macro_ovr_auc(labels: &[usize], scores: &[Vec<f64>], n_classes: usize) -> Result<f64> {
    if scores.iter().any(|s| s.len() < n_classes) {
        return Err(Error::invalid(format!(
            "score rows must carry one column per class ({})",
            n_classes
        )));
    }
    let mut total = 0.0;
    for class in 0..n_classes {
        let binary: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        let class_scores: Vec<f64> = scores.iter().map(|s| s[class]).collect();
        total += roc_auc_binary(&binary, &class_scores).map_err(|e| match e {
            Error::Invalid(msg) => Error::invalid(format!("class {}: {}", class, msg)),
            other => other,
        })?;
    }
    Ok(total / n_classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::DiagramPoint;
    use crate::pointprocess::{BinomialCardinality, GaussianComponent};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn diagram(points: &[[f64; 2]]) -> PersistenceDiagram {
        PersistenceDiagram {
            dim: 1,
            points: points
                .iter()
                .map(|p| DiagramPoint::new(p[0], p[1]))
                .collect(),
        }
    }

    fn test_config() -> ModelConfig {
        ModelConfig {
            intensity: GaussianMixtureIntensity::new(vec![GaussianComponent {
                weight: 1.0,
                mean: [0.5, 0.5],
                var: 1.0,
            }])
            .unwrap(),
            cardinality: CardinalityPmf::from_binomial(
                &BinomialCardinality::new(8, 0.5).unwrap(),
            ),
            obs: ObservationModel::new(0.9, 0.05).unwrap(),
            unexpected: UnexpectedModel::new(
                1.0,
                BinomialCardinality::new(8, 0.25).unwrap(),
            )
            .unwrap(),
            n_max: 8,
        }
    }

    #[test]
    fn identical_training_sets_give_unit_bayes_factors() {
        let config = test_config();
        let train = vec![diagram(&[[0.3, 0.4], [0.6, 0.2]]), diagram(&[[0.5, 0.5]])];
        let clf = fit(
            &[
                ("a".to_string(), train.clone()),
                ("b".to_string(), train.clone()),
            ],
            &config,
            1.0,
        )
        .unwrap();
        let d = diagram(&[[0.4, 0.3]]);
        let bf = clf.bayes_factor(&d, 0, 1).unwrap();
        assert_relative_eq!(bf, 1.0, epsilon = 1e-12);
        // Exact threshold: the strict comparison sends the vote to j.
        let (label, votes) = clf.predict(&d).unwrap();
        assert_eq!(votes, vec![0, 1]);
        assert_eq!(label, 1);
    }

    #[test]
    fn bayes_factor_antisymmetry() {
        let config = test_config();
        let clf = fit(
            &[
                ("a".to_string(), vec![diagram(&[[0.2, 0.7], [0.3, 0.6]])]),
                ("b".to_string(), vec![diagram(&[[0.9, 0.1]])]),
            ],
            &config,
            1.0,
        )
        .unwrap();
        let d = diagram(&[[0.25, 0.65]]);
        let ij = clf.bayes_factor(&d, 0, 1).unwrap();
        let ji = clf.bayes_factor(&d, 1, 0).unwrap();
        assert_relative_eq!(ij * ji, 1.0, epsilon = 1e-9);
        assert!(ij > 1.0); // d sits in class a's high-density region
    }

    #[test]
    fn two_class_prediction_casts_one_vote() {
        let config = test_config();
        let clf = fit(
            &[
                ("a".to_string(), vec![diagram(&[[0.2, 0.7]])]),
                ("b".to_string(), vec![diagram(&[[0.9, 0.1]])]),
            ],
            &config,
            1.0,
        )
        .unwrap();
        let (label, votes) = clf.predict(&diagram(&[[0.21, 0.69]])).unwrap();
        assert_eq!(votes.iter().sum::<usize>(), 1);
        assert_eq!(label, 0);
    }

    #[test]
    fn three_class_votes_sum_to_pair_count() {
        let config = test_config();
        let clf = fit(
            &[
                ("a".to_string(), vec![diagram(&[[0.2, 0.7]])]),
                ("b".to_string(), vec![diagram(&[[0.9, 0.1]])]),
                ("c".to_string(), vec![diagram(&[[0.5, 0.5]])]),
            ],
            &config,
            1.0,
        )
        .unwrap();
        let (_, votes) = clf.predict(&diagram(&[[0.4, 0.4], [0.6, 0.2]])).unwrap();
        assert_eq!(votes.iter().sum::<usize>(), 3);
    }

    #[test]
    fn fit_validates_input() {
        let config = test_config();
        assert!(fit(&[("a".to_string(), vec![diagram(&[])])], &config, 1.0).is_err());
        assert!(fit(
            &[
                ("a".to_string(), vec![]),
                ("b".to_string(), vec![diagram(&[])])
            ],
            &config,
            1.0
        )
        .is_err());
        assert!(fit(
            &[
                ("a".to_string(), vec![diagram(&[])]),
                ("b".to_string(), vec![diagram(&[])])
            ],
            &config,
            0.0
        )
        .is_err());
    }

    #[test]
    fn stratified_folds_partition_each_class() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1];
        let folds = stratified_folds(&labels, 2, 3, 7);
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        for fold in &folds {
            let zeros = fold.iter().filter(|&&i| labels[i] == 0).count();
            assert!((1..=2).contains(&zeros));
        }
    }

    #[test]
    fn cross_validate_is_deterministic_and_partitions() {
        let config = test_config();
        let mut data = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..8 {
            let off = if i % 2 == 0 { 0.0 } else { 0.5 };
            let label = if i % 2 == 0 { "a" } else { "b" };
            let pts: Vec<[f64; 2]> = (0..3)
                .map(|_| {
                    [
                        rng.gen_range(0.1..0.3) + off,
                        rng.gen_range(0.4..0.6) - off * 0.5,
                    ]
                })
                .collect();
            data.push((label.to_string(), diagram(&pts)));
        }
        let r1 = cross_validate(&data, 4, &config, 1.0, 42).unwrap();
        let r2 = cross_validate(&data, 4, &config, 1.0, 42).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.fold_predictions.len(), data.len());
        let total: usize = r1.confusion.iter().flatten().sum();
        assert_eq!(total, data.len());
        // Leave-one-out per class when k equals the per-class count.
        let r3 = cross_validate(&data, 4, &config, 1.0, 43).unwrap();
        assert_eq!(r3.fold_predictions.len(), data.len());
    }

    #[test]
    fn cross_validate_rejects_small_classes() {
        let config = test_config();
        let data = vec![
            ("a".to_string(), diagram(&[[0.1, 0.1]])),
            ("a".to_string(), diagram(&[[0.1, 0.2]])),
            ("b".to_string(), diagram(&[[0.5, 0.5]])),
        ];
        assert!(cross_validate(&data, 2, &config, 1.0, 0).is_err());
    }

    #[test]
    fn auc_perfect_and_uninformative() {
        let labels = [true, true, false, false];
        assert_relative_eq!(
            roc_auc_binary(&labels, &[0.9, 0.8, 0.2, 0.1]).unwrap(),
            1.0
        );
        assert_relative_eq!(
            roc_auc_binary(&labels, &[0.5, 0.5, 0.5, 0.5]).unwrap(),
            0.5
        );
        assert_relative_eq!(
            roc_auc_binary(&labels, &[0.1, 0.2, 0.8, 0.9]).unwrap(),
            0.0
        );
    }

    #[test]
    fn auc_matches_pair_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(2..=50);
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            // Coarse scores force ties to exercise the midrank path.
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let fast = roc_auc_binary(&labels, &scores).unwrap();
            let slow = pair_counting_auc(&labels, &scores);
            assert_relative_eq!(fast, slow, epsilon = 1e-12);
        }
    }

    fn pair_counting_auc(labels: &[bool], scores: &[f64]) -> f64 {
        let mut concordant = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    concordant += 1.0;
                } else if scores[i] == scores[j] {
                    concordant += 0.5;
                }
            }
        }
        concordant / pairs
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn macro_auc_requires_every_class() {
        let labels = vec![0, 0, 1, 1];
        let scores = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.1, 0.9],
            vec![0.4, 0.6],
        ];
        assert_relative_eq!(macro_ovr_auc(&labels, &scores, 2).unwrap(), 1.0);
        assert!(macro_ovr_auc(&labels, &scores, 3).is_err());
    }

}
