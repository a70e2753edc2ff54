//! Approximating a coupling on new marginals through its copula.
//!
//! A coupling `π = μ × π_x` on the line is carried to the unit square by
//! sending `(x, y)` to the CDF jumps of its marginals. The resulting copula
//! is piecewise constant in the first coordinate and a finite union of
//! uniform blocks in the second, so averaging it over the CDF jumps of a new
//! first marginal and pulling it back through the quantile function of a new
//! second marginal is exact interval arithmetic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{check_order, DiscreteMeasure};
use crate::transport::{aw_distance, w_pow, Coupling, CouplingRow};

/// Uniform mass `mass` spread over the interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Block {
    pub fn density(&self) -> f64 {
        self.mass / (self.hi - self.lo)
    }
}

/// The copula of a coupling, one kernel on `(0, 1]` per CDF jump of the first marginal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopulaKernelTable {
    /// `(F_μ(x-), F_μ(x)]` for each row `x`.
    pub u_intervals: Vec<(f64, f64)>,
    /// Kernel of each interval as blocks over CDF jumps of the second marginal.
    pub kernels: Vec<Vec<Block>>,
}

impl CopulaKernelTable {
    /// Density of kernel `row` at `v`.
    pub fn density_at(&self, row: usize, v: f64) -> f64 {
        self.kernels[row].iter().filter(|b| b.lo < v && v <= b.hi).map(Block::density).sum()
    }

    /// `(F_m^{-1})_* C_row` for a probability measure `m`.
    pub fn pushforward(&self, row: usize, m: &DiscreteMeasure) -> DiscreteMeasure {
        let breaks = unit_breaks(m);
        let mut out = Vec::new();
        for b in &self.kernels[row] {
            push_block(*b, &breaks, m, &mut out);
        }
        DiscreteMeasure::from_pairs_lossy(out)
    }
}

/// Estimate check `AW_r^r(π, π^k) <= W_r^r(μ, μ^k) + W_r^r(ν, ν^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

const PROB_TOL: f64 = 1e-9;

fn check_probability(mass: f64, what: &str) -> Result<()> {
    if (mass - 1.0).abs() > PROB_TOL {
        return Err(Error::domain(format!("{what} must have unit mass, got {mass}")));
    }
    Ok(())
}

/// Right endpoints of the CDF jumps of `m`, rescaled so the last one is exactly 1.
fn unit_breaks(m: &DiscreteMeasure) -> Vec<f64> {
    let total = m.total_mass();
    let mut c: Vec<f64> = m.cumulative().into_iter().map(|v| v / total).collect();
    if let Some(last) = c.last_mut() {
        *last = 1.0;
    }
    c
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Pushes a uniform block through the quantile function with jump ends `breaks`.
fn push_block(b: Block, breaks: &[f64], m: &DiscreteMeasure, out: &mut Vec<(f64, f64)>) {
    let atoms = m.atoms();
    let start = breaks.partition_point(|&h| h <= b.lo);
    let mut prev = if start == 0 { 0.0 } else { breaks[start - 1] };
    for (j, &h) in breaks.iter().enumerate().skip(start) {
        let ov = overlap((b.lo, b.hi), (prev, h));
        if ov > 0.0 {
            let mass = if ov == b.hi - b.lo { b.mass } else { b.density() * ov };
            out.push((atoms[j].position, mass));
        }
        if h >= b.hi {
            break;
        }
        prev = h;
    }
}

/// The copula kernels `C_u` of a probability coupling.
pub fn copula_of(p: &Coupling) -> Result<CopulaKernelTable> {
    check_probability(p.total_mass(), "coupling")?;
    let nu = p.second_marginal();
    let g = unit_breaks(&nu);
    let s = unit_breaks(&p.first_marginal());
    let mut u_intervals = Vec::with_capacity(p.len());
    let mut kernels = Vec::with_capacity(p.len());
    let mut prev = 0.0;
    for (row, &t) in p.rows().iter().zip(&s) {
        u_intervals.push((prev, t));
        prev = t;
        let blocks = row
            .kernel
            .atoms()
            .iter()
            .map(|a| {
                let j = nu.index_of(a.position).expect("kernel atoms lie in the second marginal");
                let lo = if j == 0 { 0.0 } else { g[j - 1] };
                Block { lo, hi: g[j], mass: a.weight }
            })
            .collect();
        kernels.push(blocks);
    }
    Ok(CopulaKernelTable { u_intervals, kernels })
}

/// A coupling of `mu_k` and `nu_k` built from the copula of `p`.
///
/// The kernel of each atom of `mu_k` is the copula kernel averaged over the
/// atom's CDF jump, pulled back through the quantile function of `nu_k`.
/// The first marginal is reproduced exactly and the second up to rounding.
pub fn approx_coupling(p: &Coupling, mu_k: &DiscreteMeasure, nu_k: &DiscreteMeasure, r: f64) -> Result<Coupling> {
    check_order(r)?;
    check_probability(mu_k.total_mass(), "new first marginal")?;
    check_probability(nu_k.total_mass(), "new second marginal")?;
    let table = copula_of(p)?;
    let nu = p.second_marginal();
    let g = unit_breaks(&nu);
    let hk = unit_breaks(mu_k);
    let nk = unit_breaks(nu_k);

    let jumps: Vec<(f64, f64)> =
        hk.iter().enumerate().map(|(i, &t)| (if i == 0 { 0.0 } else { hk[i - 1] }, t)).collect();
    let rows: Vec<CouplingRow> = mu_k
        .atoms()
        .par_iter()
        .zip(jumps.par_iter())
        .map(|(atom, &(s, t))| {
            let len = t - s;
            let mut block_mass = vec![0.0; g.len()];
            let first = table.u_intervals.partition_point(|iv| iv.1 <= s);
            for (iv, blocks) in table.u_intervals[first..].iter().zip(&table.kernels[first..]) {
                if iv.0 >= t {
                    break;
                }
                let ov = overlap(*iv, (s, t));
                if ov <= 0.0 {
                    continue;
                }
                let lambda = if ov == len { 1.0 } else { ov / len };
                for b in blocks {
                    let j = g.partition_point(|&v| v < b.hi);
                    block_mass[j] += lambda * b.mass;
                }
            }
            let mut pairs = Vec::new();
            for (j, &mass) in block_mass.iter().enumerate() {
                if mass > 0.0 {
                    let lo = if j == 0 { 0.0 } else { g[j - 1] };
                    push_block(Block { lo, hi: g[j], mass }, &nk, nu_k, &mut pairs);
                }
            }
            CouplingRow { x: atom.position, weight: atom.weight, kernel: DiscreteMeasure::from_pairs_lossy(pairs) }
        })
        .collect();
    let out = Coupling::from_rows_unchecked(rows);
    let gap = out.second_marginal().max_weight_gap(nu_k);
    if gap > 1e-12 {
        return Err(Error::Internal(format!("copula pullback misses the second marginal by {gap:e}")));
    }
    Ok(out)
}

/// Compares `AW_r^r(p, p_k)` with `W_r^r(μ, μ^k) + W_r^r(ν, ν^k)`.
pub fn check_estimate(p: &Coupling, p_k: &Coupling, r: f64) -> Result<EstimateCheck> {
    let lhs = aw_distance(p, p_k, r)?.outer_plan.objective;
    let rhs =
        w_pow(&p.first_marginal(), &p_k.first_marginal(), r)? + w_pow(&p.second_marginal(), &p_k.second_marginal(), r)?;
    Ok(EstimateCheck { lhs, rhs, holds: lhs <= rhs + 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(pairs.iter().copied()).unwrap()
    }

    fn comonotone() -> Coupling {
        Coupling::from_joint([(0.0, 0.0, 0.5), (1.0, 1.0, 0.5)]).unwrap()
    }

    #[test]
    fn copula_of_point_coupling_is_uniform() {
        let p = Coupling::product(&DiscreteMeasure::dirac(0.0), &DiscreteMeasure::dirac(1.0)).unwrap();
        let t = copula_of(&p).unwrap();
        assert_eq!(t.u_intervals, vec![(0.0, 1.0)]);
        assert_eq!(t.kernels[0], vec![Block { lo: 0.0, hi: 1.0, mass: 1.0 }]);
    }

    #[test]
    fn copula_of_split_kernel_is_uniform() {
        let p = Coupling::product(&DiscreteMeasure::dirac(0.0), &m(&[(-1.0, 0.5), (1.0, 0.5)])).unwrap();
        let t = copula_of(&p).unwrap();
        for v in [0.1, 0.5, 0.6, 1.0] {
            assert_eq!(t.density_at(0, v), 1.0);
        }
        assert_eq!(t.pushforward(0, &p.second_marginal()), p.rows()[0].kernel);
    }

    #[test]
    fn copula_of_comonotone() {
        let t = copula_of(&comonotone()).unwrap();
        assert_eq!(t.u_intervals, vec![(0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(t.kernels[0], vec![Block { lo: 0.0, hi: 0.5, mass: 1.0 }]);
        assert_eq!(t.kernels[1], vec![Block { lo: 0.5, hi: 1.0, mass: 1.0 }]);
    }

    #[test]
    fn unchanged_marginals_reproduce_coupling() {
        let p = Coupling::new(vec![
            CouplingRow { x: -1.0, weight: 0.5, kernel: m(&[(-2.0, 0.75), (2.0, 0.25)]) },
            CouplingRow { x: 1.0, weight: 0.5, kernel: m(&[(-2.0, 0.25), (2.0, 0.75)]) },
        ])
        .unwrap();
        let out = approx_coupling(&p, &p.first_marginal(), &p.second_marginal(), 1.0).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn single_row_pullback() {
        let p = Coupling::product(&DiscreteMeasure::dirac(0.0), &m(&[(-1.0, 0.5), (1.0, 0.5)])).unwrap();
        let nu_k = m(&[(-2.0, 0.5), (2.0, 0.5)]);
        let out = approx_coupling(&p, &DiscreteMeasure::dirac(0.0), &nu_k, 1.0).unwrap();
        assert_eq!(out, Coupling::product(&DiscreteMeasure::dirac(0.0), &nu_k).unwrap());
        let est = check_estimate(&p, &out, 1.0).unwrap();
        assert_eq!((est.lhs, est.rhs, est.holds), (1.0, 1.0, true));
    }

    #[test]
    fn comonotone_stays_comonotone() {
        let nu_k = m(&[(0.0, 0.5), (1.5, 0.5)]);
        let out = approx_coupling(&comonotone(), &m(&[(0.0, 0.5), (1.0, 0.5)]), &nu_k, 1.0).unwrap();
        assert_eq!(out, Coupling::from_joint([(0.0, 0.0, 0.5), (1.0, 1.5, 0.5)]).unwrap());
    }

    #[test]
    fn identical_couplings_satisfy_estimate() {
        let p = comonotone();
        let est = check_estimate(&p, &p, 2.0).unwrap();
        assert!(est.holds && est.lhs == 0.0);
    }

    #[test]
    fn rejects_sub_probability_marginals() {
        let p = comonotone();
        assert!(approx_coupling(&p, &DiscreteMeasure::point(0.0, 0.5), &DiscreteMeasure::dirac(0.0), 1.0).is_err());
    }
}
