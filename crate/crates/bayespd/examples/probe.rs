//! Scratch probe for generator geometry: prints H1 features of synthetic
//! clouds at a few sizes. Not part of the shipped interface.

use bayespd::persistence::{tilt, vr_persistence_auto};
use bayespd::synthetic::{loop_network_generate, polar_curve_sample};

fn main() {
    for &n in &[60usize, 80, 100, 150, 300] {
        for &noise in &[0.0, 0.001] {
            let t0 = std::time::Instant::now();
            let cloud = polar_curve_sample(n, noise, 1).unwrap();
            let diagrams = vr_persistence_auto(&cloud, 1).unwrap();
            let pd = tilt(&diagrams[1]);
            let mut pts = pd.points.clone();
            pts.sort_by(|a, b| b.pers.partial_cmp(&a.pers).unwrap());
            let top: Vec<String> = pts
                .iter()
                .take(6)
                .map(|p| format!("({:.3},{:.3})", p.birth, p.pers))
                .collect();
            println!(
                "polar n={:3} noise={:>5}: |H1|={:3} top6={} [{:?}]",
                n,
                noise,
                pd.points.len(),
                top.join(" "),
                t0.elapsed()
            );
        }
    }
    for class in 1..=3u8 {
        for seed in 0..3u64 {
            let t0 = std::time::Instant::now();
            let cloud = loop_network_generate(class, seed).unwrap();
            let diagrams =
                bayespd::persistence::vr_persistence(&cloud, 1, 1.5).unwrap();
            let pd = tilt(&diagrams[1]);
            let mut pts = pd.points.clone();
            pts.sort_by(|a, b| b.pers.partial_cmp(&a.pers).unwrap());
            let top: Vec<String> = pts
                .iter()
                .take(5)
                .map(|p| format!("({:.2},{:.2})", p.birth, p.pers))
                .collect();
            println!(
                "network class={} seed={} pts={:3}: |H1|={:3} top5={} [{:?}]",
                class,
                seed,
                cloud.len(),
                pd.points.len(),
                top.join(" "),
                t0.elapsed()
            );
        }
    }
}
