//! Martingale couplings: diagnostics, construction, composition and splitting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{check_convex_order, default_tol, IrreducibleDecomposition};
use crate::measure::DiscreteMeasure;
use crate::simplex::{self, LinearProgram, LpOutcome};
use crate::transport::{mass_tol, Coupling, CouplingRow};

/// Barycentre defects of a coupling's kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleDiagnostics {
    /// `max_x |∫ y π_x(dy) - x|`.
    pub max_defect: f64,
    /// `∫ |∫ y π_x(dy) - x| μ(dx) / μ(ℝ)`.
    pub mean_defect: f64,
    pub is_martingale: bool,
}

/// Kernel barycentre defect of every row.
pub fn row_defects(p: &Coupling) -> Vec<f64> {
    p.rows().iter().map(|r| (r.kernel.first_moment() / r.kernel.total_mass() - r.x).abs()).collect()
}

pub fn martingale_diagnostics(p: &Coupling, tol: f64) -> MartingaleDiagnostics {
    let defects = row_defects(p);
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    let mean_defect = if p.total_mass() > 0.0 {
        p.rows().iter().zip(&defects).map(|(r, d)| r.weight * d).sum::<f64>() / p.total_mass()
    } else {
        0.0
    };
    MartingaleDiagnostics { max_defect, mean_defect: mean_defect.min(max_defect), is_martingale: max_defect <= tol }
}

/// Scale `1 + max |position|` used for defect tolerances.
pub fn position_scale(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    1.0 + mu.support_radius().max(nu.support_radius())
}

/// Some martingale coupling of `mu <=_c nu`.
///
/// The coupling returned is the one of [`min_cost_martingale`], so `mu = nu`
/// yields the identity coupling.
pub fn strassen_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Coupling> {
    min_cost_martingale(mu, nu)
}

/// Martingale coupling of `mu <=_c nu` minimising `∫ |x - y|`.
pub fn min_cost_martingale(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Coupling> {
    martingale_program(mu, nu, |x, y| (x - y).abs())
}

fn martingale_program(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: impl Fn(f64, f64) -> f64) -> Result<Coupling> {
    check_convex_order(mu, nu, default_tol(mu, nu))?;
    if mu.is_empty() {
        return Ok(Coupling::zero());
    }
    if mu.len() == 1 {
        return Coupling::product(mu, nu);
    }
    let (m, n) = (mu.len(), nu.len());
    let xs: Vec<f64> = mu.positions().collect();
    let ys: Vec<f64> = nu.positions().collect();
    let rescale = mu.total_mass() / nu.total_mass();

    let mut a = Vec::with_capacity(2 * m + n);
    let mut b = Vec::with_capacity(2 * m + n);
    for (i, atom) in mu.atoms().iter().enumerate() {
        let mut row = vec![0.0; m * n];
        row[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        a.push(row);
        b.push(atom.weight);
    }
    for (j, atom) in nu.atoms().iter().enumerate() {
        let mut row = vec![0.0; m * n];
        (0..m).for_each(|i| row[i * n + j] = 1.0);
        a.push(row);
        b.push(atom.weight * rescale);
    }
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        let s = 1.0 / (1.0 + x.abs());
        for (j, &y) in ys.iter().enumerate() {
            row[i * n + j] = (y - x) * s;
        }
        a.push(row);
        b.push(0.0);
    }
    let cost = &cost;
    let c: Vec<f64> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| cost(x, y))).collect();
    let scale = position_scale(mu, nu);
    let feas = 1e-9 * (1.0 + mu.total_mass()) * scale;
    let x = match simplex::solve(&LinearProgram { a, b, c }, feas) {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible { residual } => {
            let (witness, excess) = crate::lattice::max_potential_excess(mu, nu);
            return Err(Error::ConvexOrderViolation { witness, excess: excess.max(residual) });
        }
        LpOutcome::Unbounded => return Err(Error::Internal("martingale program unbounded".into())),
    };
    let rows = mu
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, atom)| {
            let floor = LP_NOISE * atom.weight;
            let kernel = DiscreteMeasure::from_pairs_lossy(
                ys.iter().zip(&x[i * n..(i + 1) * n]).filter(|(_, &g)| g > floor).map(|(&y, &g)| (y, g)),
            );
            if kernel.is_empty() {
                return Err(Error::Internal(format!("martingale program left row x = {} empty", atom.position)));
            }
            Ok(CouplingRow { x: atom.position, weight: atom.weight, kernel })
        })
        .collect::<Result<Vec<_>>>()?;
    let light = LIGHT_ROW * mu.total_mass();
    let tol = 1e-9 * scale;
    let rows = rows
        .into_iter()
        .map(|row| {
            let defect = (row.kernel.barycenter()? - row.x).abs();
            if defect > tol && row.weight <= light {
                return Ok(CouplingRow { kernel: bracketing_kernel(row.x, &ys), ..row });
            }
            if defect > POLISH_TOL * scale {
                return Ok(CouplingRow { kernel: polish_barycenter(row.x, &row.kernel, &ys)?, ..row });
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = Coupling::from_rows_unchecked(rows);
    let (mut heavy, mut light_mass) = (0.0f64, 0.0);
    for (row, defect) in out.rows().iter().zip(row_defects(&out)) {
        if row.weight <= light {
            light_mass += row.weight * defect;
        } else {
            heavy = heavy.max(defect);
        }
    }
    if heavy > tol || light_mass > tol * mu.total_mass() {
        return Err(Error::Internal(format!("martingale program returned defect {:e}", heavy.max(light_mass))));
    }
    Ok(out)
}

/// Program entries at most this fraction of their row's mass are rounding noise and dropped.
const LP_NOISE: f64 = 1e-12;

/// Rows at most this fraction of the mass are too light for the program's barycentre rows to pin down.
///
/// Their defects are only bounded in total, since a light atom may sit just outside the target's support.
const LIGHT_ROW: f64 = 1e-10;

/// Defects above this multiple of the position scale are removed after the program is solved.
const POLISH_TOL: f64 = 1e-13;

/// Mixes `kernel` with the extreme atom of `ys` on the far side of `x` so that its barycentre is exactly `x`.
fn polish_barycenter(x: f64, kernel: &DiscreteMeasure, ys: &[f64]) -> Result<DiscreteMeasure> {
    let bary = kernel.barycenter()?;
    let far = if bary > x { ys[0] } else { ys[ys.len() - 1] };
    if (far - x) * (bary - x) >= 0.0 {
        return Ok(kernel.clone());
    }
    let lambda = (bary - x) / (bary - far);
    let mass = kernel.total_mass();
    Ok(kernel.scaled(1.0 - lambda).add(&DiscreteMeasure::point(far, lambda * mass)))
}

/// The martingale kernel at `x` on the two atoms of `ys` (sorted) that bracket it.
fn bracketing_kernel(x: f64, ys: &[f64]) -> DiscreteMeasure {
    let j = ys.partition_point(|&y| y < x);
    if j == ys.len() || ys[j] == x || j == 0 {
        return DiscreteMeasure::dirac(ys[j.min(ys.len() - 1)]);
    }
    let (lo, hi) = (ys[j - 1], ys[j]);
    let w_hi = (x - lo) / (hi - lo);
    DiscreteMeasure::from_pairs_lossy([(lo, 1.0 - w_hi), (hi, w_hi)])
}

/// Transport cost `∫ |x - y| dπ`.
pub fn transport_cost(p: &Coupling) -> f64 {
    p.joint_measure().iter().map(|&(x, y, w)| w * (x - y).abs()).sum()
}

/// Chains kernels: `out_x(dy) = Σ_z p_x({z}) m_z(dy)`.
pub fn compose(p: &Coupling, m: &Coupling) -> Result<Coupling> {
    let mid = p.second_marginal();
    let first = m.first_marginal();
    let gap = mid.max_weight_gap(&first);
    if gap > mass_tol(mid.total_mass()) {
        return Err(Error::domain(format!(
            "second marginal of the first coupling differs from the first marginal of the second by {gap:e}"
        )));
    }
    let rows = p
        .rows()
        .iter()
        .map(|row| {
            let mut pairs = Vec::new();
            for a in row.kernel.atoms() {
                let k = m
                    .rows()
                    .binary_search_by(|r| r.x.total_cmp(&a.position))
                    .map_err(|_| Error::domain(format!("no row at z = {} in the second coupling", a.position)))?;
                pairs.extend(m.rows()[k].kernel.atoms().iter().map(|b| (b.position, a.weight * b.weight)));
            }
            Ok(CouplingRow { x: row.x, weight: row.weight, kernel: DiscreteMeasure::from_pairs_lossy(pairs) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Coupling::from_rows_unchecked(rows))
}

/// Splits a martingale coupling of a decomposed pair into component parts.
///
/// Returns `(π_n)` with `π_n` the rows of `p` inside `(l_n, r_n)` and the
/// identity part `χ = (id, id)_* η`.
pub fn decompose_coupling(p: &Coupling, d: &IrreducibleDecomposition) -> Result<(Vec<Coupling>, Coupling)> {
    let tol = mass_tol(p.total_mass());
    let mut parts = Vec::with_capacity(d.components.len());
    for c in &d.components {
        let part = p.restrict_rows(c.interval());
        let gap = part.first_marginal().max_weight_gap(&c.mu);
        if gap > tol {
            return Err(Error::domain(format!("rows inside ({}, {}) do not match the component", c.l, c.r)));
        }
        parts.push(part);
    }
    let outside: Vec<&CouplingRow> = p.rows().iter().filter(|r| d.component_of(r.x).is_none()).collect();
    for r in &outside {
        if r.kernel.len() != 1 || r.kernel.atoms()[0].position != r.x {
            return Err(Error::domain(format!("row x = {} outside the components is not the identity", r.x)));
        }
    }
    let eta_rows = DiscreteMeasure::from_pairs_lossy(outside.iter().map(|r| (r.x, r.weight)));
    if eta_rows.max_weight_gap(&d.eta) > tol {
        return Err(Error::domain("rows outside the components do not match the common part"));
    }
    Ok((parts, Coupling::identity(&eta_rows)))
}

/// A quantile slice of a coupling and its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub coupling: Coupling,
}

impl Slice {
    fn from_coupling(coupling: Coupling) -> Self {
        Slice { mu: coupling.first_marginal(), nu: coupling.second_marginal(), coupling }
    }
}

/// Result of [`slice_pair_by_quantiles`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSlices {
    pub slices: Vec<Slice>,
    pub remainder: Slice,
}

/// Cuts `p_k` along mass intervals of its first marginal.
///
/// Slice `n` carries the rows whose CDF jump `(F(x-), F(x)]` meets
/// `boundaries[n]`, each with the length of the intersection as weight. Rows
/// straddling a boundary are split proportionally.
pub fn slice_pair_by_quantiles(p_k: &Coupling, boundaries: &[(f64, f64)]) -> Result<QuantileSlices> {
    let total = p_k.total_mass();
    let mut order: Vec<usize> = (0..boundaries.len()).collect();
    order.sort_by(|&a, &b| boundaries[a].0.total_cmp(&boundaries[b].0));
    for &k in &order {
        let (lo, hi) = boundaries[k];
        if !(lo >= 0.0 && lo <= hi && hi <= total + mass_tol(total)) {
            return Err(Error::domain(format!("invalid quantile interval ({lo}, {hi})")));
        }
    }
    for w in order.windows(2) {
        if boundaries[w[0]].1 > boundaries[w[1]].0 {
            return Err(Error::domain("quantile intervals overlap"));
        }
    }
    let mut pieces: Vec<Vec<CouplingRow>> = vec![Vec::new(); boundaries.len()];
    let mut rest = Vec::new();
    let mut s = 0.0;
    for row in p_k.rows() {
        let t = s + row.weight;
        let mut used = 0.0;
        for (k, &(lo, hi)) in boundaries.iter().enumerate() {
            let ov = (t.min(hi) - s.max(lo)).max(0.0);
            if ov > 0.0 {
                let w = ov.min(row.weight - used);
                used += w;
                pieces[k].push(CouplingRow { x: row.x, weight: w, kernel: row.kernel.clone() });
            }
        }
        let left = row.weight - used;
        if left > 0.0 {
            rest.push(CouplingRow { x: row.x, weight: left, kernel: row.kernel.clone() });
        }
        s = t;
    }
    Ok(QuantileSlices {
        slices: pieces.into_iter().map(|rows| Slice::from_coupling(Coupling::from_rows_unchecked(rows))).collect(),
        remainder: Slice::from_coupling(Coupling::from_rows_unchecked(rest)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::irreducible_components;

    fn m(pairs: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn diagnostics_examples() {
        let split = Coupling::product(&DiscreteMeasure::dirac(0.0), &m(&[(-1.0, 0.5), (1.0, 0.5)])).unwrap();
        let d = martingale_diagnostics(&split, 1e-12);
        assert_eq!(d.max_defect, 0.0);
        assert!(d.is_martingale);
        let shift = Coupling::product(&DiscreteMeasure::dirac(0.0), &DiscreteMeasure::dirac(1.0)).unwrap();
        let d = martingale_diagnostics(&shift, 1e-12);
        assert_eq!(d.max_defect, 1.0);
        assert!(!d.is_martingale);
        let id = Coupling::identity(&m(&[(0.0, 0.5), (1.0, 0.5)]));
        assert_eq!(martingale_diagnostics(&id, 0.0).max_defect, 0.0);
    }

    #[test]
    fn strassen_examples() {
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let p = strassen_coupling(&DiscreteMeasure::dirac(0.0), &nu).unwrap();
        assert_eq!(p, Coupling::product(&DiscreteMeasure::dirac(0.0), &nu).unwrap());

        let mu = m(&[(-1.0, 0.3), (0.5, 0.2), (2.0, 0.5)]);
        assert_eq!(strassen_coupling(&mu, &mu).unwrap(), Coupling::identity(&mu));

        let wide = m(&[(-2.0, 0.5), (2.0, 0.5)]);
        let p = strassen_coupling(&nu, &wide).unwrap();
        let k0 = &p.rows()[0].kernel;
        let k1 = &p.rows()[1].kernel;
        assert!((k0.weight_at(-2.0) - 0.75).abs() < 1e-12 && (k0.weight_at(2.0) - 0.25).abs() < 1e-12);
        assert!((k1.weight_at(-2.0) - 0.25).abs() < 1e-12 && (k1.weight_at(2.0) - 0.75).abs() < 1e-12);
        // The martingale coupling is unique here; its cost is 1.5 <= 2 W_1 = 2.
        assert!((transport_cost(&p) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn strassen_rejects_reversed_pair() {
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        match strassen_coupling(&nu, &DiscreteMeasure::dirac(0.0)) {
            Err(Error::ConvexOrderViolation { excess, .. }) => assert!(excess > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_cost_examples() {
        let mu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        assert_eq!(transport_cost(&min_cost_martingale(&mu, &mu).unwrap()), 0.0);
        let p = min_cost_martingale(&DiscreteMeasure::dirac(0.0), &mu).unwrap();
        assert_eq!(transport_cost(&p), 1.0);
    }

    #[test]
    fn compose_examples() {
        let p = Coupling::product(&DiscreteMeasure::dirac(0.0), &m(&[(-1.0, 0.5), (1.0, 0.5)])).unwrap();
        assert_eq!(compose(&p, &Coupling::identity(&p.second_marginal())).unwrap(), p);
        assert_eq!(compose(&Coupling::identity(&p.first_marginal()), &p).unwrap(), p);
        let mk = Coupling::new(vec![
            CouplingRow { x: -1.0, weight: 0.5, kernel: m(&[(-2.0, 0.5), (0.0, 0.5)]) },
            CouplingRow { x: 1.0, weight: 0.5, kernel: m(&[(0.0, 0.5), (2.0, 0.5)]) },
        ])
        .unwrap();
        let out = compose(&p, &mk).unwrap();
        assert_eq!(out.rows()[0].kernel, m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]));
    }

    #[test]
    fn decompose_two_components() {
        let mu = m(&[(-2.0, 0.5), (2.0, 0.5)]);
        let nu = m(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let d = irreducible_components(&mu, &nu).unwrap();
        let p = strassen_coupling(&mu, &nu).unwrap();
        let (parts, chi) = decompose_coupling(&p, &d).unwrap();
        assert!(chi.is_empty());
        assert_eq!(parts.len(), 2);
        for (part, c) in parts.iter().zip(&d.components) {
            assert!(martingale_diagnostics(part, 1e-12).is_martingale);
            assert!(part.second_marginal().max_weight_gap(&c.nu) < 1e-12);
        }
    }

    #[test]
    fn decompose_identity_pair() {
        let mu = m(&[(-1.0, 0.3), (2.0, 0.7)]);
        let d = irreducible_components(&mu, &mu).unwrap();
        let p = Coupling::identity(&mu);
        let (parts, chi) = decompose_coupling(&p, &d).unwrap();
        assert!(parts.is_empty());
        assert_eq!(chi, p);
    }

    #[test]
    fn slicing_examples() {
        let p = strassen_coupling(&m(&[(-1.0, 0.5), (1.0, 0.5)]), &m(&[(-2.0, 0.5), (2.0, 0.5)])).unwrap();
        let whole = slice_pair_by_quantiles(&p, &[(0.0, 1.0)]).unwrap();
        assert_eq!(whole.slices[0].coupling, p);
        assert!(whole.remainder.coupling.is_empty());
        let none = slice_pair_by_quantiles(&p, &[]).unwrap();
        assert_eq!(none.remainder.coupling, p);
        let halves = slice_pair_by_quantiles(&p, &[(0.0, 0.5), (0.5, 1.0)]).unwrap();
        assert_eq!(halves.slices[0].mu, DiscreteMeasure::point(-1.0, 0.5));
        assert_eq!(halves.slices[1].mu, DiscreteMeasure::point(1.0, 0.5));
        for s in &halves.slices {
            assert!(crate::lattice::convex_order_leq(&s.mu, &s.nu, 1e-12));
        }
        assert!(slice_pair_by_quantiles(&p, &[(0.0, 0.6), (0.5, 1.0)]).is_err());
    }
}
