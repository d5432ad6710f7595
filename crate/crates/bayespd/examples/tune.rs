//! Scratch probe for the Case-1 posterior: MAP cardinality and intensity
//! maxima for all four prior combinations. Not shipped.

use bayespd::params::*;
use bayespd::persistence::{tilt, vr_persistence_auto};
use bayespd::posterior::compute_posterior;
use bayespd::synthetic::polar_curve_sample;

fn main() {
    let case = case_params(1).unwrap();
    let cloud = polar_curve_sample(POLAR_FIXTURE_N, case.noise_var, POLAR_FIXTURE_SEED).unwrap();
    let diagrams = vr_persistence_auto(&cloud, 1).unwrap();
    let pd = tilt(&diagrams[1]);
    let mut pts = pd.points.clone();
    pts.sort_by(|a, b| b.pers.partial_cmp(&a.pers).unwrap());
    println!(
        "observed |H1| = {}; top6 = {:?}",
        pd.points.len(),
        pts.iter()
            .take(6)
            .map(|p| (p.birth, p.pers))
            .collect::<Vec<_>>()
    );
    let top4: Vec<[f64; 2]> = pts.iter().take(4).map(|p| p.coords()).collect();

    let obs = sensitivity_observation(&case);
    let unexpected = sensitivity_unexpected(&case).unwrap();
    for (iname, intensity) in [
        ("II", informative_intensity()),
        ("UI", uninformative_intensity()),
    ] {
        for (cname, card) in [
            ("IC", informative_cardinality()),
            ("UC", uniform_cardinality()),
        ] {
            let post = compute_posterior(
                &intensity,
                &card,
                &obs,
                &unexpected,
                std::slice::from_ref(&pd),
                SENSITIVITY_N0,
            )
            .unwrap();
            let stats = post.cardinality_stats();
            // Grid local maxima over [0, 1.2]^2.
            let g = 240usize;
            let h = 1.2 / g as f64;
            let mut grid = vec![0.0f64; (g + 1) * (g + 1)];
            for i in 0..=g {
                for j in 0..=g {
                    grid[i * (g + 1) + j] = post
                        .intensity_at([i as f64 * h, j as f64 * h])
                        .unwrap();
                }
            }
            let peak = grid.iter().cloned().fold(0.0, f64::max);
            let mut maxima = Vec::new();
            for i in 1..g {
                for j in 1..g {
                    let v = grid[i * (g + 1) + j];
                    if v < 1e-6 * peak {
                        continue;
                    }
                    let mut is_max = true;
                    for di in -1i32..=1 {
                        for dj in -1i32..=1 {
                            if di == 0 && dj == 0 {
                                continue;
                            }
                            let w = grid[(i as i32 + di) as usize * (g + 1)
                                + (j as i32 + dj) as usize];
                            if w >= v {
                                is_max = false;
                            }
                        }
                    }
                    if is_max {
                        maxima.push(([i as f64 * h, j as f64 * h], v / peak));
                    }
                }
            }
            let worst = maxima
                .iter()
                .map(|(m, _)| {
                    top4.iter()
                        .map(|t| (m[0] - t[0]).abs().max((m[1] - t[1]).abs()))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0f64, f64::max);
            println!(
                "{}+{}: map={} mean={:.3} var={:.3} maxima={} worst_dist={:.3} pmf={:?}",
                iname,
                cname,
                stats.map,
                stats.mean,
                stats.variance,
                maxima.len(),
                worst,
                post.cardinality()
                    .iter()
                    .map(|p| (p * 1000.0).round() / 1000.0)
                    .collect::<Vec<_>>()
            );
        }
    }
}
