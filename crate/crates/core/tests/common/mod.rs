#![allow(dead_code)]

use mot_stability::measure::DiscreteMeasure;
use mot_stability::transport::{Coupling, CouplingRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `n` atoms on a grid of step 1/8 in `[-4, 4]` with total mass `mass`.
pub fn measure(rng: &mut ChaCha8Rng, n: usize, mass: f64) -> DiscreteMeasure {
    let k = rng.gen_range(1..=n);
    let raw: Vec<(f64, f64)> =
        (0..k).map(|_| (rng.gen_range(-32..=32) as f64 / 8.0, rng.gen_range(0.05..1.0))).collect();
    let total: f64 = raw.iter().map(|p| p.1).sum();
    DiscreteMeasure::new(raw.into_iter().map(|(x, w)| (x, w * mass / total))).unwrap()
}

/// Applies one or two rounds of random mean-preserving two-point spreads to `mu`.
pub fn spread(rng: &mut ChaCha8Rng, mu: &DiscreteMeasure) -> DiscreteMeasure {
    let mut m = mu.clone();
    for _ in 0..rng.gen_range(1..=2) {
        let mut pairs = Vec::new();
        for (k, a) in m.atoms().iter().enumerate() {
            if rng.gen_bool(0.3) && (k + 1 < m.len() || pairs.len() > k) {
                pairs.push((a.position, a.weight));
                continue;
            }
            let (l, r) = (rng.gen_range(1..=12) as f64 / 8.0, rng.gen_range(1..=12) as f64 / 8.0);
            pairs.push((a.position - l, a.weight * r / (l + r)));
            pairs.push((a.position + r, a.weight * l / (l + r)));
        }
        m = DiscreteMeasure::new(pairs).unwrap();
    }
    m
}

/// A pair `mu <=_c nu` of probability measures.
pub fn ordered_pair(rng: &mut ChaCha8Rng, n: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = measure(rng, n, 1.0);
    let nu = spread(rng, &mu);
    (mu, nu)
}

/// A martingale coupling with two-point kernels, built without any solver.
pub fn martingale(rng: &mut ChaCha8Rng, n: usize) -> Coupling {
    let mu = measure(rng, n, 1.0);
    let rows = mu
        .atoms()
        .iter()
        .map(|a| {
            let kernel = if rng.gen_bool(0.2) {
                DiscreteMeasure::dirac(a.position)
            } else {
                let (l, r) = (rng.gen_range(1..=16) as f64 / 8.0, rng.gen_range(1..=16) as f64 / 8.0);
                DiscreteMeasure::new([(a.position - l, r / (l + r)), (a.position + r, l / (l + r))]).unwrap()
            };
            CouplingRow { x: a.position, weight: a.weight, kernel }
        })
        .collect();
    Coupling::new(rows).unwrap()
}

/// A coupling with at most `n` rows, kernels of at most `n` atoms and total mass `mass`.
pub fn coupling(rng: &mut ChaCha8Rng, n: usize, mass: f64) -> Coupling {
    let mu = measure(rng, n, mass);
    let rows = mu
        .atoms()
        .iter()
        .map(|a| CouplingRow { x: a.position, weight: a.weight, kernel: measure(rng, n, 1.0) })
        .collect();
    Coupling::new(rows).unwrap()
}

/// Moves every atom by `t·z` with `z` uniform in `(-1, 1)` and restores the barycentre.
pub fn jitter(rng: &mut ChaCha8Rng, m: &DiscreteMeasure, t: f64) -> DiscreteMeasure {
    let z: Vec<f64> = (0..m.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    jitter_with(m, &z, t)
}

pub fn jitter_with(m: &DiscreteMeasure, z: &[f64], t: f64) -> DiscreteMeasure {
    let moved = DiscreteMeasure::new(m.atoms().iter().zip(z).map(|(a, z)| (a.position + t * z, a.weight))).unwrap();
    let shift = m.barycenter().unwrap() - moved.barycenter().unwrap();
    moved.translate(shift)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
