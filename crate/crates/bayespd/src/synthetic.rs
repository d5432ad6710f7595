//! Seeded generators for benchmark point clouds: the four-petal polar curve
//! used in the sensitivity study and a three-class family of planar loop
//! networks for the classification benchmark.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::persistence::PointCloud;

/// Petal balance of the curve: the negative-radius arcs form the two inner
/// loops, and shrinking this constant toward zero evens out petal sizes.
const PETAL_OFFSET: f64 = 0.12;
/// Overall scale of the curve.
const CURVE_SCALE: f64 = 1.2;

/// Radius of the reference curve: two large petals along the x-axis and two
/// small inner loops along the y-axis (negative-radius arcs).
fn polar_radius(theta: f64) -> f64 {
    CURVE_SCALE * (PETAL_OFFSET + (2.0 * theta).cos())
}

fn curve_point(theta: f64) -> [f64; 2] {
    let r = polar_radius(theta);
    [r * theta.cos(), r * theta.sin()]
}

/// Sample `n` points uniformly in arc length from the curve
/// `r(θ) = 1.2 (0.12 + cos 2θ)`, then perturb each coordinate with centered
/// Gaussian noise of variance `noise_var`. Deterministic for a fixed seed.
///
/// For even `n` the noiseless sample is exactly symmetric under point
/// reflection through the origin (the curve satisfies r(θ+π) = r(θ)), so the
/// four H1 features come in two pairs with identical persistence.
pub fn polar_curve_sample(n: usize, noise_var: f64, seed: u64) -> Result<PointCloud> {
    if n < 4 {
        return Err(Error::invalid(format!(
            "polar curve sample needs n >= 4, got {}",
            n
        )));
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::invalid(format!(
            "noise variance must be finite and >= 0, got {}",
            noise_var
        )));
    }

    let mut points = if n % 2 == 0 {
        // Half the curve (θ in [0, π)) thinned to n/2 points, then mirrored.
        let half = thin_uniform_arc(0.0, std::f64::consts::PI, n / 2);
        let mut pts = half.clone();
        pts.extend(half.iter().map(|p| [-p[0], -p[1]]));
        pts
    } else {
        thin_uniform_arc(0.0, 2.0 * std::f64::consts::PI, n)
    };

    if noise_var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_var.sqrt()).expect("finite std");
        for p in &mut points {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    PointCloud::new(points.into_iter().map(|p| p.to_vec()).collect())
}

/// Dense polyline over `[theta0, theta1)`, thinned to `count` points at
/// equal arc-length spacing.
fn thin_uniform_arc(theta0: f64, theta1: f64, count: usize) -> Vec<[f64; 2]> {
    let oversample = (count * 64).max(4096);
    let step = (theta1 - theta0) / oversample as f64;
    let mut trace = Vec::with_capacity(oversample + 1);
    for i in 0..=oversample {
        trace.push(curve_point(theta0 + i as f64 * step));
    }
    let mut cumlen = Vec::with_capacity(trace.len());
    cumlen.push(0.0);
    for w in trace.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        cumlen.push(cumlen.last().unwrap() + d);
    }
    let total = *cumlen.last().unwrap();
    let mut out = Vec::with_capacity(count);
    let mut cursor = 0usize;
    for j in 0..count {
        let target = j as f64 * total / count as f64;
        while cursor + 1 < cumlen.len() && cumlen[cursor + 1] < target {
            cursor += 1;
        }
        // Interpolate the parameter within segment [cursor, cursor+1] and
        // re-evaluate the curve so the emitted point lies exactly on it.
        let seg = cumlen[cursor + 1] - cumlen[cursor];
        let t = if seg > 0.0 {
            (target - cumlen[cursor]) / seg
        } else {
            0.0
        };
        out.push(curve_point(theta0 + (cursor as f64 + t) * step));
    }
    out
}

/// Per-class knobs of the loop-network generator. Loop count shrinks and
/// loop size grows with the class id; class 3 is sampled more densely and
/// with a wider cable width.
struct NetworkParams {
    grid: usize,
    spacing: f64,
    cable_sigma: f64,
    drop_prob: f64,
}

fn network_params(class_id: u8) -> Result<NetworkParams> {
    match class_id {
        1 => Ok(NetworkParams {
            grid: 5,
            spacing: 0.15,
            cable_sigma: 0.010,
            drop_prob: 0.15,
        }),
        2 => Ok(NetworkParams {
            grid: 4,
            spacing: 0.125,
            cable_sigma: 0.018,
            drop_prob: 0.15,
        }),
        3 => Ok(NetworkParams {
            grid: 3,
            spacing: 0.10,
            cable_sigma: 0.026,
            drop_prob: 0.15,
        }),
        _ => Err(Error::invalid(format!(
            "loop-network class must be 1, 2, or 3, got {}",
            class_id
        ))),
    }
}

const NETWORK_SIDE: f64 = 2.0;

/// Generate a point cloud sampled along the edges of a jittered planar grid
/// network over `[0, 2]^2`. Class 1 has many small loops, class 3 fewer and
/// larger ones with denser, wider cables. Deterministic for a fixed
/// (class, seed).
pub fn loop_network_generate(class_id: u8, seed: u64) -> Result<PointCloud> {
    let params = network_params(class_id)?;
    let g = params.grid;
    let cell = NETWORK_SIDE / g as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((class_id as u64) << 56));

    // Jittered node positions, indexed (ix, iy) with 0..=g each.
    let mut nodes = vec![[0.0f64; 2]; (g + 1) * (g + 1)];
    for iy in 0..=g {
        for ix in 0..=g {
            let jx = rng.gen_range(-0.08 * cell..0.08 * cell);
            let jy = rng.gen_range(-0.08 * cell..0.08 * cell);
            nodes[iy * (g + 1) + ix] = [ix as f64 * cell + jx, iy as f64 * cell + jy];
        }
    }

    // Grid edges; interior ones may be dropped, merging adjacent loops.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for iy in 0..=g {
        for ix in 0..g {
            let interior = iy != 0 && iy != g;
            if !interior || rng.gen::<f64>() >= params.drop_prob {
                edges.push((iy * (g + 1) + ix, iy * (g + 1) + ix + 1));
            }
        }
    }
    for ix in 0..=g {
        for iy in 0..g {
            let interior = ix != 0 && ix != g;
            if !interior || rng.gen::<f64>() >= params.drop_prob {
                edges.push((iy * (g + 1) + ix, (iy + 1) * (g + 1) + ix));
            }
        }
    }

    let cable = Normal::new(0.0, params.cable_sigma).expect("finite std");
    let mut points: Vec<Vec<f64>> = Vec::new();
    for &node in &nodes {
        points.push(vec![
            node[0] + cable.sample(&mut rng),
            node[1] + cable.sample(&mut rng),
        ]);
    }
    for &(a, b) in &edges {
        let (pa, pb) = (nodes[a], nodes[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let segments = (len / params.spacing).ceil().max(1.0) as usize;
        for s in 1..segments {
            let t = s as f64 / segments as f64;
            points.push(vec![
                pa[0] + t * (pb[0] - pa[0]) + cable.sample(&mut rng),
                pa[1] + t * (pb[1] - pa[1]) + cable.sample(&mut rng),
            ]);
        }
    }
    PointCloud::new(points)
}
