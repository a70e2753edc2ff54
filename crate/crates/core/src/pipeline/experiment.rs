use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{approximate, repair_convex_order, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::transport::{w_1d, Coupling};

/// How one level of a convergence experiment perturbs the marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelSpec {
    /// Both marginals unchanged.
    Identity,
    /// Each marginal moved towards the conditional means of its `n` equal-mass quantile bins.
    ///
    /// Without `w1` the marginals are replaced by the coarsening. With `w1`
    /// the quantile functions are interpolated towards the coarsening until
    /// the larger marginal `W_1` error equals `w1` times the support diameter.
    QuantileCoarsen {
        n: usize,
        #[serde(default)]
        w1: Option<f64>,
    },
    /// Every atom moved by `t·z` with a seeded `z` in `(-1, 1)`.
    ///
    /// `t` is `scale` when given, otherwise it is tuned so that the larger
    /// marginal `W_1` error equals `w1` times the support diameter.
    Jitter {
        #[serde(default)]
        scale: Option<f64>,
        #[serde(default)]
        w1: Option<f64>,
    },
}

/// Input of the `converge` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path of the coupling file.
    pub coupling: String,
    pub levels: Vec<LevelSpec>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub level: usize,
    pub w1_mu: f64,
    pub w1_nu: f64,
    /// `AW_1(π^k, π)`, `NaN` when the level failed.
    pub aw1: f64,
    pub fallbacks: usize,
    /// Wall-clock time of the level in milliseconds.
    pub ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Conditional means of `n` equal-mass quantile bins of a probability measure.
pub fn quantile_coarsen(m: &DiscreteMeasure, n: usize) -> Result<DiscreteMeasure> {
    quantile_homotopy(m, n, 1.0)
}

/// The measure whose quantile function is `(1 - t) F^{-1} + t G^{-1}`, with `G`
/// the CDF of the `n`-bin conditional-mean coarsening of `m`.
///
/// CDF jumps of the result refine those of `m`, and `W_1(m, result)` is linear in `t`.
pub fn quantile_homotopy(m: &DiscreteMeasure, n: usize, t: f64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::domain("quantile coarsening needs at least one bin"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("homotopy parameter must lie in [0, 1], got {t}")));
    }
    let total = m.total_mass();
    let edges: Vec<f64> = (1..=n).map(|k| if k == n { total } else { total * k as f64 / n as f64 }).collect();
    let mut pieces = Vec::new();
    let mut means = vec![(0.0, 0.0); n];
    let mut s = 0.0;
    for a in m.atoms() {
        let end = s + a.weight;
        let mut lo = s;
        let mut bin = edges.partition_point(|&e| e <= lo).min(n - 1);
        while lo < end {
            let hi = end.min(edges[bin]);
            if hi > lo || bin == n - 1 {
                let w = if bin == n - 1 { end - lo } else { hi - lo };
                pieces.push((a.position, w, bin));
                means[bin].0 += w;
                means[bin].1 += w * a.position;
                if bin == n - 1 {
                    break;
                }
            }
            lo = hi;
            bin += 1;
        }
        s = end;
    }
    Ok(DiscreteMeasure::from_pairs_lossy(pieces.into_iter().map(|(x, w, bin)| {
        let target = means[bin].1 / means[bin].0;
        let pos = if t == 0.0 {
            x
        } else if t == 1.0 {
            target
        } else {
            (1.0 - t) * x + t * target
        };
        (pos, w)
    })))
}

fn jitter(m: &DiscreteMeasure, z: &[f64], t: f64) -> DiscreteMeasure {
    DiscreteMeasure::from_pairs_lossy(m.atoms().iter().zip(z).map(|(a, &z)| (a.position + t * z, a.weight)))
}

struct Perturbed {
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    w1_mu: f64,
    w1_nu: f64,
}

fn perturb(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    spec: LevelSpec,
    z_mu: &[f64],
    z_nu: &[f64],
) -> Result<Perturbed> {
    let make = |a: DiscreteMeasure, b: DiscreteMeasure| -> Result<Perturbed> {
        let (a, b) = repair_convex_order(&a, &b)?;
        Ok(Perturbed { w1_mu: w_1d(mu, &a, 1.0)?, w1_nu: w_1d(nu, &b, 1.0)?, mu: a, nu: b })
    };
    match spec {
        LevelSpec::Identity => make(mu.clone(), nu.clone()),
        LevelSpec::QuantileCoarsen { n, w1: None } => make(quantile_coarsen(mu, n)?, quantile_coarsen(nu, n)?),
        LevelSpec::QuantileCoarsen { n, w1: Some(w1) } => {
            let mix = |t: f64| make(quantile_homotopy(mu, n, t)?, quantile_homotopy(nu, n, t)?);
            tune(w1 * diameter(mu, nu), mix, false)
        }
        LevelSpec::Jitter { scale: Some(t), .. } => make(jitter(mu, z_mu, t), jitter(nu, z_nu, t)),
        LevelSpec::Jitter { scale: None, w1: Some(w1) } => {
            tune(w1 * diameter(mu, nu), |t| make(jitter(mu, z_mu, t), jitter(nu, z_nu, t)), true)
        }
        LevelSpec::Jitter { scale: None, w1: None } => Err(Error::domain("jitter level needs scale or w1")),
    }
}

fn diameter(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    mu.support_bounds().zip(nu.support_bounds()).map_or(0.0, |(a, b)| a.1.max(b.1) - a.0.min(b.0))
}

/// Bisects the amplitude `t` of `make` until the larger marginal error equals `goal`.
///
/// Amplitudes live in `[0, 1]` unless `unbounded`, in which case the upper end is doubled until it overshoots.
fn tune(goal: f64, make: impl Fn(f64) -> Result<Perturbed>, unbounded: bool) -> Result<Perturbed> {
    let err = |t: f64| -> Result<(f64, Perturbed)> {
        let p = make(t)?;
        Ok((p.w1_mu.max(p.w1_nu), p))
    };
    if !(goal > 0.0) {
        return Ok(err(0.0)?.1);
    }
    let mut t_hi = if unbounded { goal } else { 1.0 };
    for _ in 0..60 {
        if err(t_hi)?.0 >= goal {
            break;
        }
        if !unbounded {
            return Err(Error::domain(format!("marginal W_1 error {goal} is out of reach")));
        }
        t_hi *= 2.0;
    }
    let mut t_lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (t_lo + t_hi);
        if err(mid)?.0 < goal {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    Ok(err(t_hi)?.1)
}

/// Jitter directions for the atoms of both marginals.
fn directions(mu: &DiscreteMeasure, nu: &DiscreteMeasure, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_mu = (0..mu.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let z_nu = (0..nu.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (z_mu, z_nu)
}

/// The perturbed pair `(μ^k, ν^k)` of one level, in convex order.
pub fn level_marginals(p: &Coupling, spec: LevelSpec, seed: u64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let (mu, nu) = (p.first_marginal(), p.second_marginal());
    let (z_mu, z_nu) = directions(&mu, &nu, seed);
    let pert = perturb(&mu, &nu, spec, &z_mu, &z_nu)?;
    Ok((pert.mu, pert.nu))
}

/// Runs [`approximate`] on perturbed marginals of `p` for every level.
///
/// Jitter directions are drawn once per call from a ChaCha generator seeded
/// with `seed`, so jitter levels differ only in their amplitude, and
/// [`level_marginals`] reproduces the marginals of any level. Failed levels
/// are recorded with their error and `aw1 = NaN`.
pub fn convergence_experiment(p: &Coupling, levels: &[LevelSpec], eps: f64, seed: u64) -> Result<Vec<ExperimentRow>> {
    let mu = p.first_marginal();
    let nu = p.second_marginal();
    let (z_mu, z_nu) = directions(&mu, &nu, seed);
    let mut rows = Vec::with_capacity(levels.len());
    for (level, &spec) in levels.iter().enumerate() {
        let start = Instant::now();
        let pert = perturb(&mu, &nu, spec, &z_mu, &z_nu)?;
        let outcome = approximate(p, &pert.mu, &pert.nu, eps, None);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let (aw1, fallbacks, error) = match outcome {
            Ok((_, report)) => (report.aw1, report.fallbacks, None),
            Err(e @ (Error::PipelineFailure { .. } | Error::SideMassMissing(_))) => (f64::NAN, 0, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        rows.push(ExperimentRow { level, w1_mu: pert.w1_mu, w1_nu: pert.w1_nu, aw1, fallbacks, ms, error });
    }
    Ok(rows)
}
