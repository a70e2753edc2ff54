//! One-dimensional Wasserstein distances, exact discrete transport, couplings
//! and the adapted Wasserstein distance.

mod aw;
mod coupling;
mod network;

pub use aw::{aw_distance, aw_oracle_j_embedding, joint_wasserstein, AwResult};
pub use coupling::{Coupling, CouplingRow};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{check_order, DiscreteMeasure};

/// Tolerance for equal-mass preconditions.
pub fn mass_tol(mass: f64) -> f64 {
    1e-9 * (1.0 + mass)
}

pub(crate) fn check_equal_mass(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > mass_tol(a.max(b)) {
        return Err(Error::domain(format!("mass mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// `W_r(mu, nu)^r` from the quantile coupling.
pub fn w_pow(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64) -> Result<f64> {
    check_order(r)?;
    check_equal_mass(mu.total_mass(), nu.total_mass())?;
    Ok(quantile_cost(mu, nu, |d| d.powf(r)))
}

/// `∫ cost(|F_mu^{-1}(u) - F_nu^{-1}(u)|) du` over the common mass range.
pub(crate) fn quantile_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: impl Fn(f64) -> f64) -> f64 {
    let (ca, cb) = (mu.cumulative(), nu.cumulative());
    let (xa, xb) = (mu.atoms(), nu.atoms());
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut acc = 0.0;
    while i < xa.len() && j < xb.len() {
        let next = ca[i].min(cb[j]);
        let len = next - prev;
        if len > 0.0 {
            acc += len * cost((xa[i].position - xb[j].position).abs());
        }
        prev = next;
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    acc
}

/// Wasserstein distance of order `r` between two measures of equal mass.
pub fn w_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64) -> Result<f64> {
    Ok(w_pow(mu, nu, r)?.powf(1.0 / r))
}

/// A transport plan between two discrete measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    #[serde(skip)]
    pub source: DiscreteMeasure,
    #[serde(skip)]
    pub target: DiscreteMeasure,
    /// `(source index, target index, mass)` with positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    pub objective: f64,
}

impl TransportPlan {
    /// `(source position, target position, mass)` triples.
    pub fn triples(&self) -> Vec<(f64, f64, f64)> {
        let (s, t) = (self.source.atoms(), self.target.atoms());
        self.entries.iter().map(|&(i, j, w)| (s[i].position, t[j].position, w)).collect()
    }
}

/// Exact optimal plan for the discrete transport problem with cost table `cost[i][j]`.
pub fn ot_exact(cost: &[Vec<f64>], a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<TransportPlan> {
    check_equal_mass(a.total_mass(), b.total_mass())?;
    if cost.len() != a.len() || cost.iter().any(|row| row.len() != b.len()) {
        return Err(Error::domain("cost table does not match the marginals"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::domain("cost table must be finite"));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(TransportPlan { source: a.clone(), target: b.clone(), entries: Vec::new(), objective: 0.0 });
    }
    let supply: Vec<f64> = a.weights().collect();
    let ratio = a.total_mass() / b.total_mass();
    let demand: Vec<f64> = b.weights().map(|w| w * ratio).collect();
    let mut t = network::Transportation::new(cost, &supply, &demand);
    t.solve();
    let mut entries: Vec<(usize, usize, f64)> = t.flows().filter(|e| e.2 > 0.0).collect();
    entries.sort_by_key(|x| (x.0, x.1));
    let objective = entries.iter().map(|&(i, j, w)| w * cost[i][j]).sum();
    Ok(TransportPlan { source: a.clone(), target: b.clone(), entries, objective })
}

/// Cost table `|x_i - y_j|^r` between the atoms of two measures.
pub fn power_cost(a: &DiscreteMeasure, b: &DiscreteMeasure, r: f64) -> Vec<Vec<f64>> {
    a.positions().map(|x| b.positions().map(|y| (x - y).abs().powf(r)).collect()).collect()
}
