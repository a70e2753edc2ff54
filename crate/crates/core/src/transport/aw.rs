use rayon::prelude::*;
use serde::Serialize;

use super::{check_equal_mass, ot_exact, power_cost, quantile_cost, Coupling, TransportPlan};
use crate::error::{Error, Result};
use crate::measure::{check_order, DiscreteMeasure};
use crate::simplex::{self, LinearProgram, LpOutcome};

/// Adapted Wasserstein distance with the optimal outer plan.
#[derive(Debug, Clone, Serialize)]
pub struct AwResult {
    pub distance: f64,
    pub outer_plan: TransportPlan,
    /// `W_r^r(π_x, π'_x')` for every pair of rows.
    pub inner_costs: Vec<Vec<f64>>,
}

/// `AW_r(p, q)`: outer transport between the first marginals with cost
/// `|x - x'|^r + W_r^r(p_x, q_x')`.
pub fn aw_distance(p: &Coupling, q: &Coupling, r: f64) -> Result<AwResult> {
    check_order(r)?;
    check_equal_mass(p.total_mass(), q.total_mass())?;
    let inner_costs: Vec<Vec<f64>> = p
        .rows()
        .par_iter()
        .map(|a| q.rows().iter().map(|b| quantile_cost(&a.kernel, &b.kernel, |d| d.powf(r))).collect())
        .collect();
    let cost: Vec<Vec<f64>> = p
        .rows()
        .iter()
        .zip(&inner_costs)
        .map(|(a, inner)| q.rows().iter().zip(inner).map(|(b, w)| (a.x - b.x).abs().powf(r) + w).collect())
        .collect();
    let outer_plan = ot_exact(&cost, &p.first_marginal(), &q.first_marginal())?;
    let distance = outer_plan.objective.max(0.0).powf(1.0 / r);
    Ok(AwResult { distance, outer_plan, inner_costs })
}

/// `AW_r(p, q)` as `W_r(J(p), J(q))`, where `J` maps a coupling to the law of
/// `(x, π_x)` on the product of the line with the space of kernels.
///
/// Kernel distances are solved as general transport problems and the outer
/// problem as a dense linear program, sharing no code with [`aw_distance`]
/// beyond the data model.
pub fn aw_oracle_j_embedding(p: &Coupling, q: &Coupling, r: f64) -> Result<f64> {
    check_order(r)?;
    check_equal_mass(p.total_mass(), q.total_mass())?;
    let (m, n) = (p.len(), q.len());
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    let mut cost = Vec::with_capacity(m * n);
    for a in p.rows() {
        for b in q.rows() {
            let plan = ot_exact(&power_cost(&a.kernel, &b.kernel, r), &a.kernel, &b.kernel)?;
            cost.push((a.x - b.x).abs().powf(r) + plan.objective);
        }
    }
    let scale = q.total_mass() / p.total_mass();
    let mut a_rows = Vec::with_capacity(m + n);
    let mut b = Vec::with_capacity(m + n);
    for (i, row) in p.rows().iter().enumerate() {
        let mut line = vec![0.0; m * n];
        line[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        a_rows.push(line);
        b.push(row.weight * scale);
    }
    for (j, row) in q.rows().iter().enumerate() {
        let mut line = vec![0.0; m * n];
        (0..m).for_each(|i| line[i * n + j] = 1.0);
        a_rows.push(line);
        b.push(row.weight);
    }
    let lp = LinearProgram { a: a_rows, b, c: cost };
    match simplex::solve(&lp, 1e-9 * (1.0 + q.total_mass())) {
        LpOutcome::Optimal { objective, .. } => Ok(objective.max(0.0).powf(1.0 / r)),
        other => Err(Error::Internal(format!("outer transport program failed: {other:?}"))),
    }
}

/// `W_r` between the couplings viewed as measures on the plane, with cost
/// `|x - x'|^r + |y - y'|^r`.
pub fn joint_wasserstein(p: &Coupling, q: &Coupling, r: f64) -> Result<f64> {
    check_order(r)?;
    check_equal_mass(p.total_mass(), q.total_mass())?;
    let (a, b) = (p.joint_measure(), q.joint_measure());
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|&(x, y, _)| b.iter().map(|&(x2, y2, _)| (x - x2).abs().powf(r) + (y - y2).abs().powf(r)).collect())
        .collect();
    // Index measures: atom k of each side sits at position k so that ot_exact sees one atom per triple.
    let index = |t: &[(f64, f64, f64)]| {
        DiscreteMeasure::from_pairs_lossy(t.iter().enumerate().map(|(k, &(_, _, w))| (k as f64, w)))
    };
    let plan = ot_exact(&cost, &index(&a), &index(&b))?;
    Ok(plan.objective.max(0.0).powf(1.0 / r))
}
