//! Potential functions and the convex-order lattice.
//!
//! The potential of a measure `m` is `u_m(y) = ∫ |y - x| m(dx)`. For a finite
//! measure it is convex and piecewise linear, with slope `-mass` to the left
//! of the support and `+mass` to the right. Two measures of equal mass and
//! mean are in convex order exactly when their potentials are ordered
//! pointwise, and the lattice operations act on potentials directly.

mod decompose;

pub use decompose::{irreducible_components, Component, IrreducibleDecomposition};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Piecewise-linear convex function `u_m` stored by its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialFunction {
    /// `(y, u(y))` pairs with strictly increasing `y`.
    pub breakpoints: Vec<(f64, f64)>,
    /// Total mass: the absolute slope of both asymptotes.
    pub mass: f64,
    /// Barycentre: the asymptotes meet at `(mean, 0)`.
    pub mean: f64,
}

impl PotentialFunction {
    pub fn eval(&self, y: f64) -> f64 {
        let bp = &self.breakpoints;
        let Some(&(y0, v0)) = bp.first() else {
            return self.mass * (y - self.mean).abs();
        };
        let &(yn, vn) = bp.last().expect("nonempty");
        if y <= y0 {
            return v0 + self.mass * (y0 - y);
        }
        if y >= yn {
            return vn + self.mass * (y - yn);
        }
        let k = bp.partition_point(|p| p.0 <= y);
        let (ya, va) = bp[k - 1];
        let (yb, vb) = bp[k];
        va + (vb - va) * (y - ya) / (yb - ya)
    }

    /// Slopes of the linear pieces, from `-mass` on the far left to `+mass` on the far right.
    pub fn slopes(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.breakpoints.len() + 1);
        s.push(-self.mass);
        for w in self.breakpoints.windows(2) {
            s.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
        }
        s.push(self.mass);
        s
    }
}

/// `u_m(y)` by direct summation.
pub fn potential_at(m: &DiscreteMeasure, y: f64) -> f64 {
    m.atoms().iter().map(|a| a.weight * (y - a.position).abs()).sum()
}

/// Potential function of a nonzero measure, with breakpoints at the atoms.
pub fn potential_of(m: &DiscreteMeasure) -> Result<PotentialFunction> {
    let mean = m.barycenter()?;
    let breakpoints = m.positions().map(|y| (y, potential_at(m, y))).collect();
    Ok(PotentialFunction { breakpoints, mass: m.total_mass(), mean })
}

/// Measure whose potential is `u`: one atom per kink, weighing half the slope jump.
pub fn measure_of(u: &PotentialFunction) -> Result<DiscreteMeasure> {
    let bp = &u.breakpoints;
    if !(u.mass > 0.0) {
        return Err(Error::domain("potential function with nonpositive mass"));
    }
    if bp.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::domain("potential breakpoints must be strictly increasing"));
    }
    let scale = bp.iter().fold(u.mean.abs(), |s, p| s.max(p.0.abs()));
    let tol = 1e-9 * (1.0 + u.mass * scale);
    for &(y, v) in bp {
        if v < u.mass * (y - u.mean).abs() - tol {
            return Err(Error::domain(format!("potential below its asymptotes at y = {y}")));
        }
    }
    let slope_tol = 1e-9 * (1.0 + u.mass);
    for (k, s) in u.slopes().windows(2).enumerate() {
        if s[1] - s[0] < -slope_tol {
            return Err(Error::domain(format!("potential not convex at y = {}", bp[k].0)));
        }
    }
    Ok(hull_measure(bp, u.mass))
}

/// Relative weight below which a kink of a computed potential is rounding residue.
const HULL_WEIGHT_FLOOR: f64 = 1e-12;

fn slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.1) / (b.0 - a.0)
}

/// Lower convex hull of x-sorted points.
fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while h.len() >= 2 && slope(h[h.len() - 2], h[h.len() - 1]) >= slope(h[h.len() - 1], p) {
            h.pop();
        }
        h.push(p);
    }
    h
}

/// Measure of the convex function given by the lower hull of `points`,
/// extended by slopes `-mass` and `+mass` outside.
fn hull_measure(points: &[(f64, f64)], mass: f64) -> DiscreteMeasure {
    let h = lower_hull(points);
    let mut slopes = Vec::with_capacity(h.len() + 1);
    slopes.push(-mass);
    for w in h.windows(2) {
        slopes.push(slope(w[0], w[1]));
    }
    slopes.push(mass);
    let floor = HULL_WEIGHT_FLOOR * mass;
    DiscreteMeasure::from_pairs_lossy(
        h.iter().enumerate().map(|(k, p)| (p.0, 0.5 * (slopes[k + 1] - slopes[k]))).filter(|&(_, w)| w > floor),
    )
}

fn scale_of(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    mu.support_radius().max(nu.support_radius())
}

/// Default convex-order tolerance `1e-9 (1 + ∫|x| dmu + ∫|y| dnu)`.
pub fn default_tol(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let m = |x: &DiscreteMeasure| x.atoms().iter().map(|a| a.weight * a.position.abs()).sum::<f64>();
    1e-9 * (1.0 + m(mu) + m(nu))
}

/// Tolerance for strict inequalities and equalities that must hold up to rounding.
pub fn strict_tol(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mass = mu.total_mass().max(nu.total_mass());
    1e-12 * (1.0 + mass * scale_of(mu, nu))
}

/// Sorted union of the atom positions of both measures.
pub(crate) fn merged_grid(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut g: Vec<f64> = mu.positions().chain(nu.positions()).collect();
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| a == b);
    g
}

/// Point where `u_mu - u_nu` is largest, evaluated on both supports and two far points.
pub fn max_potential_excess(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> (f64, f64) {
    let mut grid = merged_grid(mu, nu);
    if let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) {
        let reach = 1.0 + (hi - lo);
        grid.insert(0, lo - reach);
        grid.push(hi + reach);
    } else {
        return (0.0, 0.0);
    }
    grid.iter().map(|&y| (y, potential_at(mu, y) - potential_at(nu, y))).fold((0.0, f64::NEG_INFINITY), |best, c| {
        if c.1 > best.1 {
            c
        } else {
            best
        }
    })
}

/// Checks `mu <=_c nu` at tolerance `tol`, reporting a witness on failure.
pub fn check_convex_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<()> {
    let (witness, excess) = max_potential_excess(mu, nu);
    if excess > tol {
        return Err(Error::ConvexOrderViolation { witness, excess });
    }
    if (mu.total_mass() - nu.total_mass()).abs() > tol {
        return Err(Error::domain(format!("mass mismatch: {} vs {}", mu.total_mass(), nu.total_mass())));
    }
    if (mu.first_moment() - nu.first_moment()).abs() > tol {
        let grid = merged_grid(mu, nu);
        let witness = if nu.first_moment() > mu.first_moment() { grid[grid.len() - 1] } else { grid[0] };
        return Err(Error::ConvexOrderViolation { witness, excess: (mu.first_moment() - nu.first_moment()).abs() });
    }
    Ok(())
}

/// `mu <=_c nu` up to `tol`: equal mass and mean, and `u_mu <= u_nu + tol` on both supports.
pub fn convex_order_leq(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    if (mu.total_mass() - nu.total_mass()).abs() > tol {
        return false;
    }
    if (mu.first_moment() - nu.first_moment()).abs() > tol {
        return false;
    }
    merged_grid(mu, nu).iter().all(|&y| potential_at(mu, y) <= potential_at(nu, y) + tol)
}

fn check_lattice_inputs(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<f64> {
    if (mu.total_mass() - nu.total_mass()).abs() > tol {
        return Err(Error::domain(format!(
            "lattice operation needs equal masses, got {} and {}",
            mu.total_mass(),
            nu.total_mass()
        )));
    }
    if (mu.first_moment() - nu.first_moment()).abs() > tol {
        return Err(Error::domain(format!(
            "lattice operation needs equal means, got {} and {}",
            mu.first_moment(),
            nu.first_moment()
        )));
    }
    Ok(tol)
}

/// Grid of both supports plus the points where the two potentials cross.
fn crossing_grid(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Vec<(f64, f64, f64)> {
    let grid = merged_grid(mu, nu);
    let vals: Vec<(f64, f64, f64)> = grid.iter().map(|&y| (y, potential_at(mu, y), potential_at(nu, y))).collect();
    let floor = 1e-3 * tol;
    let mut out = Vec::with_capacity(vals.len() * 2);
    for (k, &p) in vals.iter().enumerate() {
        out.push(p);
        if let Some(&q) = vals.get(k + 1) {
            let da = p.1 - p.2;
            let db = q.1 - q.2;
            if (da > floor && db < -floor) || (da < -floor && db > floor) {
                let y = p.0 + (q.0 - p.0) * da / (da - db);
                if y > p.0 && y < q.0 {
                    out.push((y, potential_at(mu, y), potential_at(nu, y)));
                }
            }
        }
    }
    out
}

fn ordered_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Option<bool> {
    let grid = merged_grid(mu, nu);
    let diffs: Vec<f64> = grid.iter().map(|&y| potential_at(mu, y) - potential_at(nu, y)).collect();
    if diffs.iter().all(|&d| d <= tol) {
        Some(true)
    } else if diffs.iter().all(|&d| d >= -tol) {
        Some(false)
    } else {
        None
    }
}

/// `mu ∨_c nu`: the measure whose potential is `max(u_mu, u_nu)`.
pub fn sup_c(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    sup_c_tol(mu, nu, strict_tol(mu, nu))
}

/// [`sup_c`] with an explicit tolerance on the mass and mean mismatch.
pub(crate) fn sup_c_tol(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<DiscreteMeasure> {
    let tol = check_lattice_inputs(mu, nu, tol)?;
    if mu.is_empty() {
        return Ok(nu.clone());
    }
    match ordered_pair(mu, nu, tol) {
        Some(true) => return Ok(nu.clone()),
        Some(false) => return Ok(mu.clone()),
        None => {}
    }
    let pts: Vec<(f64, f64)> = crossing_grid(mu, nu, tol).into_iter().map(|(y, a, b)| (y, a.max(b))).collect();
    Ok(hull_measure(&pts, mu.total_mass()))
}

/// `mu ∧_c nu`: the measure whose potential is the convex envelope of `min(u_mu, u_nu)`.
pub fn inf_c(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    inf_c_tol(mu, nu, strict_tol(mu, nu))
}

/// [`inf_c`] with an explicit tolerance on the mass and mean mismatch.
pub(crate) fn inf_c_tol(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<DiscreteMeasure> {
    let tol = check_lattice_inputs(mu, nu, tol)?;
    if mu.is_empty() {
        return Ok(nu.clone());
    }
    match ordered_pair(mu, nu, tol) {
        Some(true) => return Ok(mu.clone()),
        Some(false) => return Ok(nu.clone()),
        None => {}
    }
    let pts: Vec<(f64, f64)> = crossing_grid(mu, nu, tol).into_iter().map(|(y, a, b)| (y, a.min(b))).collect();
    Ok(hull_measure(&pts, mu.total_mass()))
}

/// Convex-order minorant of `p` carried by `[-radius, radius]`.
///
/// Returns `p ∧_c η` where `η` is the two-point measure on `{-radius, radius}`
/// with the mass and mean of `p`, or the point mass at the mean when the
/// mean lies outside the interval.
pub fn compactify(p: &DiscreteMeasure, radius: f64) -> Result<DiscreteMeasure> {
    if !(radius >= 0.0) {
        return Err(Error::domain(format!("radius must be nonnegative, got {radius}")));
    }
    let mass = p.total_mass();
    let m1 = p.barycenter()?;
    if radius < m1.abs() || radius == 0.0 {
        return Ok(DiscreteMeasure::point(m1, mass));
    }
    if p.support_radius() <= radius {
        return Ok(p.clone());
    }
    let extremes = DiscreteMeasure::from_pairs_lossy([
        (-radius, mass * (radius - m1) / (2.0 * radius)),
        (radius, mass * (radius + m1) / (2.0 * radius)),
    ]);
    inf_c(p, &extremes)
}
