//! Vietoris–Rips persistence from point clouds.
//!
//! A point cloud is filtered by the Vietoris–Rips complex (a simplex enters at
//! the length of its longest edge), persistence pairs are extracted by Z/2
//! column reduction of the boundary matrix, and diagrams are tilted to
//! (birth, persistence) coordinates in the wedge
//! `W = {(b, p) : b >= 0, p >= 0}`.

mod reduction;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of points in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    /// Validates and wraps raw coordinates: at least one point, all
    /// coordinates finite, all points of equal dimension.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud must contain at least 1 point"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("points must have at least 1 coordinate"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "point {} has {} coordinates, expected {}",
                    i,
                    p.len(),
                    dim
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!(
                    "point {} has a non-finite coordinate",
                    i
                )));
            }
        }
        Ok(PointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one point
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Symmetric pairwise-distance matrix stored as the strict lower triangle.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    lower: Vec<f64>, // d(1,0), d(2,0), d(2,1), d(3,0), ...
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Distance between points `i` and `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i > j { (i, j) } else { (j, i) };
        self.lower[a * (a - 1) / 2 + b]
    }

    /// Largest pairwise distance (0 for a single point).
    pub fn max(&self) -> f64 {
        self.lower.iter().copied().fold(0.0, f64::max)
    }
}

/// Euclidean pairwise distances of a cloud.
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let pts = cloud.points();
    let mut lower = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            let d2: f64 = pts[i]
                .iter()
                .zip(&pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            lower.push(d2.sqrt());
        }
    }
    DistanceMatrix { n, lower }
}

/// Persistence pairs in (birth, death) coordinates for one homology
/// dimension, plus the births of features still alive at `max_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathDiagram {
    pub dim: usize,
    pub pairs: Vec<(f64, f64)>,
    pub essential: Vec<f64>,
    pub max_radius: f64,
}

/// A point of a tilted diagram: birth and persistence, both nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct DiagramPoint {
    pub birth: f64,
    pub pers: f64,
}

impl From<DiagramPoint> for [f64; 2] {
    fn from(p: DiagramPoint) -> [f64; 2] {
        [p.birth, p.pers]
    }
}

impl TryFrom<[f64; 2]> for DiagramPoint {
    type Error = String;

    fn try_from(v: [f64; 2]) -> std::result::Result<Self, String> {
        if !v[0].is_finite() || !v[1].is_finite() {
            return Err(format!("diagram point [{}, {}] is not finite", v[0], v[1]));
        }
        if v[0] < 0.0 || v[1] < 0.0 {
            return Err(format!(
                "diagram point [{}, {}] lies outside the wedge",
                v[0], v[1]
            ));
        }
        Ok(DiagramPoint {
            birth: v[0],
            pers: v[1],
        })
    }
}

impl DiagramPoint {
    pub fn new(birth: f64, pers: f64) -> Self {
        DiagramPoint { birth, pers }
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.birth, self.pers]
    }
}

/// Tilted persistence diagram: a multiset of (birth, persistence) points in
/// the wedge, tagged with its homology dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Vietoris–Rips persistence of a cloud for homology dimensions
/// `0..=max_dim` with the filtration capped at `max_radius`.
///
/// A k-simplex enters the filtration at the length of its longest edge;
/// simplices are ordered by (filtration value, dimension, lexicographic
/// vertex order) and the Z/2 boundary matrix is reduced column by column.
/// Pairs with zero persistence (birth == death) are discarded; features
/// alive at `max_radius` are reported in `essential`.
pub fn vr_persistence(
    cloud: &PointCloud,
    max_dim: usize,
    max_radius: f64,
) -> Result<Vec<BirthDeathDiagram>> {
    if max_dim > 1 {
        return Err(Error::invalid(format!(
            "homology dimension {} is unsupported (only 0 and 1)",
            max_dim
        )));
    }
    if !(max_radius > 0.0) || !max_radius.is_finite() {
        return Err(Error::invalid(format!(
            "max_radius must be a positive finite number, got {}",
            max_radius
        )));
    }
    let dist = pairwise_distances(cloud);
    reduction::reduce(&dist, max_dim, max_radius)
}

/// Same as [`vr_persistence`] with `max_radius` defaulted to the maximum
/// pairwise distance of the cloud (so H0 ends with a single component).
pub fn vr_persistence_auto(cloud: &PointCloud, max_dim: usize) -> Result<Vec<BirthDeathDiagram>> {
    let dist = pairwise_distances(cloud);
    let r = dist.max();
    // A 1-point cloud has no edges; any positive cap gives the same diagram.
    let r = if r > 0.0 { r } else { 1.0 };
    if max_dim > 1 {
        return Err(Error::invalid(format!(
            "homology dimension {} is unsupported (only 0 and 1)",
            max_dim
        )));
    }
    reduction::reduce(&dist, max_dim, r)
}

/// Tilt a (birth, death) diagram to (birth, persistence) coordinates.
/// Essential features are capped at the filtration radius:
/// `(b, max_radius - b)`.
pub fn tilt(diagram: &BirthDeathDiagram) -> PersistenceDiagram {
    let mut points: Vec<DiagramPoint> = diagram
        .pairs
        .iter()
        .map(|&(b, d)| DiagramPoint::new(b, d - b))
        .collect();
    points.extend(
        diagram
            .essential
            .iter()
            .map(|&b| DiagramPoint::new(b, diagram.max_radius - b)),
    );
    PersistenceDiagram {
        dim: diagram.dim,
        points,
    }
}

/// How to pick the retained points when subsampling a diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleStrategy {
    /// Keep the k points of largest persistence; ties prefer smaller birth,
    /// then earlier input position.
    TopPersistence,
    /// Draw k points without replacement with a seeded RNG.
    UniformRandom,
}

/// Retain `min(k, |pd|)` points of `pd`. Selected points are emitted in
/// their original input order, so the result is a sub-multiset of `pd`.
pub fn subsample_diagram(
    pd: &PersistenceDiagram,
    k: usize,
    strategy: SubsampleStrategy,
    seed: u64,
) -> Result<PersistenceDiagram> {
    if k == 0 {
        return Err(Error::invalid("subsample size k must be at least 1"));
    }
    let n = pd.points.len();
    if k >= n {
        return Ok(pd.clone());
    }
    let mut keep: Vec<usize> = match strategy {
        SubsampleStrategy::TopPersistence => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                let pa = &pd.points[a];
                let pb = &pd.points[b];
                pb.pers
                    .partial_cmp(&pa.pers)
                    .unwrap()
                    .then(pa.birth.partial_cmp(&pb.birth).unwrap())
                    .then(a.cmp(&b))
            });
            idx.truncate(k);
            idx
        }
        SubsampleStrategy::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, n, k).into_vec()
        }
    };
    keep.sort_unstable();
    Ok(PersistenceDiagram {
        dim: pd.dim,
        points: keep.into_iter().map(|i| pd.points[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cloud(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn distances_three_four_five() {
        let c = cloud(&[[0.0, 0.0], [3.0, 4.0]]);
        let d = pairwise_distances(&c);
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn distances_single_point() {
        let c = cloud(&[[2.0, -1.0]]);
        let d = pairwise_distances(&c);
        assert_eq!(d.n(), 1);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.max(), 0.0);
    }

    #[test]
    fn distances_unit_square() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let d = pairwise_distances(&c);
        let mut all: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in 0..i {
                all.push(d.get(i, j));
            }
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(&all[..4], &[1.0, 1.0, 1.0, 1.0]);
        assert_relative_eq!(all[4], 2f64.sqrt());
        assert_relative_eq!(all[5], 2f64.sqrt());
    }

    #[test]
    fn distance_triangle_inequality() {
        let pts: Vec<[f64; 2]> = (0..7)
            .map(|i| {
                let t = i as f64;
                [t.sin() * 2.0 + t, (t * 1.7).cos()]
            })
            .collect();
        let c = cloud(&pts);
        let d = pairwise_distances(&c);
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cloud_rejects_bad_input() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![vec![0.0, f64::NAN]]).is_err());
        assert!(PointCloud::new(vec![vec![0.0, 1.0], vec![0.0]]).is_err());
    }

    #[test]
    fn equilateral_triangle_has_empty_h1() {
        let s = 3f64.sqrt() / 2.0;
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [0.5, s]]);
        let diagrams = vr_persistence(&c, 1, 2.0).unwrap();
        // The 2-simplex enters with the last edge, so the loop dies at birth.
        assert!(diagrams[1].pairs.is_empty());
        assert!(diagrams[1].essential.is_empty());
    }

    #[test]
    fn unit_square_h1() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let diagrams = vr_persistence(&c, 1, 2.0).unwrap();
        assert_eq!(diagrams[1].pairs.len(), 1);
        let (b, d) = diagrams[1].pairs[0];
        assert_eq!(b, 1.0);
        assert_relative_eq!(d, 2f64.sqrt(), max_relative = 1e-15);
        // H0: 4 points born at 0; three merge deaths at 1, one component left.
        assert_eq!(diagrams[0].pairs.len(), 3);
        assert!(diagrams[0].pairs.iter().all(|&(b, d)| b == 0.0 && d == 1.0));
        assert_eq!(diagrams[0].essential, vec![0.0]);
    }

    #[test]
    fn h0_count_matches_points() {
        let pts: Vec<[f64; 2]> = (0..9)
            .map(|i| {
                let t = i as f64 * 0.83;
                [t.cos() * (1.0 + t / 7.0), t.sin()]
            })
            .collect();
        let c = cloud(&pts);
        let diagrams = vr_persistence_auto(&c, 0).unwrap();
        assert_eq!(
            diagrams[0].pairs.len() + diagrams[0].essential.len(),
            pts.len()
        );
        assert!(diagrams[0].pairs.iter().all(|&(b, _)| b == 0.0));
    }

    #[test]
    fn vr_rejects_bad_args() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        assert!(vr_persistence(&c, 2, 1.0).is_err());
        assert!(vr_persistence(&c, 1, 0.0).is_err());
        assert!(vr_persistence(&c, 1, f64::INFINITY).is_err());
    }

    #[test]
    fn tilt_examples() {
        let bd = BirthDeathDiagram {
            dim: 1,
            pairs: vec![(1.0, 2f64.sqrt())],
            essential: vec![],
            max_radius: 2.0,
        };
        let pd = tilt(&bd);
        assert_eq!(pd.points.len(), 1);
        assert_eq!(pd.points[0].birth, 1.0);
        assert_relative_eq!(pd.points[0].pers, 2f64.sqrt() - 1.0);

        let empty = BirthDeathDiagram {
            dim: 1,
            pairs: vec![],
            essential: vec![],
            max_radius: 2.0,
        };
        assert!(tilt(&empty).points.is_empty());

        let bd = BirthDeathDiagram {
            dim: 0,
            pairs: vec![(0.0, 0.5), (0.2, 0.9)],
            essential: vec![0.1],
            max_radius: 1.0,
        };
        let pd = tilt(&bd);
        assert_eq!(pd.points[0], DiagramPoint::new(0.0, 0.5));
        assert_relative_eq!(pd.points[1].pers, 0.7);
        assert_relative_eq!(pd.points[2].pers, 0.9); // essential capped at 1.0
        assert_eq!(pd.points.len(), bd.pairs.len() + bd.essential.len());
    }

    #[test]
    fn subsample_small_diagram_returns_all() {
        let pd = PersistenceDiagram {
            dim: 1,
            points: vec![
                DiagramPoint::new(0.1, 0.5),
                DiagramPoint::new(0.2, 0.3),
                DiagramPoint::new(0.0, 0.9),
            ],
        };
        let out = subsample_diagram(&pd, 5, SubsampleStrategy::TopPersistence, 0).unwrap();
        assert_eq!(out, pd);
    }

    #[test]
    fn subsample_top_persistence_keeps_largest() {
        let mut points = Vec::new();
        for i in 0..40 {
            points.push(DiagramPoint::new(i as f64 * 0.01, (40 - i) as f64 * 0.1));
        }
        let pd = PersistenceDiagram { dim: 1, points };
        let out = subsample_diagram(&pd, 25, SubsampleStrategy::TopPersistence, 0).unwrap();
        assert_eq!(out.points.len(), 25);
        // The 25 largest persistences are 1.6..=4.0, i.e. the first 25 inputs.
        assert_eq!(out.points.as_slice(), &pd.points[..25]);
    }

    #[test]
    fn subsample_tie_breaks_by_birth() {
        let pd = PersistenceDiagram {
            dim: 1,
            points: vec![
                DiagramPoint::new(0.5, 1.0),
                DiagramPoint::new(0.1, 1.0),
                DiagramPoint::new(0.3, 2.0),
            ],
        };
        let out = subsample_diagram(&pd, 2, SubsampleStrategy::TopPersistence, 0).unwrap();
        // Top: the 2.0, then between the two 1.0s the smaller birth wins.
        assert_eq!(
            out.points,
            vec![DiagramPoint::new(0.1, 1.0), DiagramPoint::new(0.3, 2.0)]
        );
    }

    #[test]
    fn subsample_random_is_deterministic_and_subset() {
        let points: Vec<DiagramPoint> = (0..30)
            .map(|i| DiagramPoint::new(i as f64, (i * i % 13) as f64))
            .collect();
        let pd = PersistenceDiagram { dim: 1, points };
        let a = subsample_diagram(&pd, 10, SubsampleStrategy::UniformRandom, 42).unwrap();
        let b = subsample_diagram(&pd, 10, SubsampleStrategy::UniformRandom, 42).unwrap();
        assert_eq!(a, b);
        let c = subsample_diagram(&pd, 10, SubsampleStrategy::UniformRandom, 43).unwrap();
        assert_eq!(c.points.len(), 10);
        for p in &a.points {
            assert!(pd.points.contains(p));
        }
    }
}
