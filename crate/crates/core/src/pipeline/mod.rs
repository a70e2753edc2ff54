//! Martingale couplings on perturbed marginals that stay close to a given one.
//!
//! For a martingale coupling `π` of `μ <=_c ν` and perturbed marginals
//! `μ^k <=_c ν^k`, [`approximate`] builds `π^k ∈ Π_M(μ^k, ν^k)` close to `π`
//! in `AW_1`. The pair `(μ, ν)` is split into irreducible components, the
//! perturbed pair is cut along the same quantile levels, and every component
//! runs four steps:
//!
//! 1. kernels are compactified and shrunk towards their row (`π^{R,α}`);
//! 2. the copula of `π^{R,α}` is carried to the new marginals and the kernel
//!    barycentres are repaired with mass from both sides of the core;
//! 3. the repaired part is completed to a martingale coupling with a blended
//!    target second marginal;
//! 4. a cheapest martingale coupling from that target to `ν^k` is chained on.

mod experiment;

pub use experiment::{
    convergence_experiment, level_marginals, quantile_coarsen, quantile_homotopy, ExperimentConfig, ExperimentRow,
    LevelSpec,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::copula::approx_coupling;
use crate::error::{Error, Result, Side};
use crate::lattice::{check_convex_order, compactify, default_tol, inf_c_tol, irreducible_components, sup_c_tol};
use crate::martingale::{
    compose, decompose_coupling, martingale_diagnostics, min_cost_martingale, position_scale, slice_pair_by_quantiles,
    strassen_coupling, transport_cost,
};
use crate::measure::{DiscreteMeasure, Interval};
use crate::transport::{aw_distance, mass_tol, w_1d, Coupling, CouplingRow};

/// Default blending weight `ε`.
pub const DEFAULT_EPS: f64 = 0.05;
const MAX_FALLBACKS: usize = 10;
const MIN_KEEP: f64 = 1e-3;
const MAX_SIDE_RETRIES: usize = 4;

/// Parameters of one component run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineParams {
    pub eps: f64,
    /// Compactification radius `R`.
    pub radius: f64,
    /// Kernel shrink factor `α`.
    pub alpha: f64,
    /// Core `K = [a, b]` carrying all but `ε` of the first marginal.
    pub k: (f64, f64),
    pub a_tilde: f64,
    pub b_tilde: f64,
    /// Open neighbourhood `K̃` of the core.
    pub k_tilde: (f64, f64),
    /// Open side interval `L̃_-` left of the core.
    pub l_minus: (f64, f64),
    /// Open side interval `L̃_+` right of the core.
    pub l_plus: (f64, f64),
    /// Open interval `L̊` carrying the shrunk kernels of core rows.
    pub l_ring: (f64, f64),
    /// Whether the values were chosen by [`choose_params`].
    pub auto: bool,
}

/// Diagnostics of one component run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub l: f64,
    pub r: f64,
    /// Mass of the component in the perturbed first marginal.
    pub mass: f64,
    pub params: PipelineParams,
    /// `AW_1(π^{R,α}, π)` on the normalised component.
    pub step1_aw1: f64,
    /// `∫ (c_- + c_+) / d dμ̂^k`.
    pub repair_mass: f64,
    /// Rows left to Step 3 because their repair needed an empty side interval.
    pub dropped_rows: usize,
    /// Smallest potential gap of the Step-3 residual pair on `[l̃, r̃]`.
    pub residual_margin: f64,
    pub keep_fraction: f64,
    pub fallbacks: usize,
    /// `∫ |x - y| dM^k` of the final chaining coupling.
    pub step4_cost: f64,
    /// `AW_1` between the normalised component couplings.
    pub aw1: f64,
}

/// Diagnostics of [`approximate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub eps: f64,
    pub components: Vec<ComponentReport>,
    /// `W_1(μ, μ^k)`.
    pub w1_mu: f64,
    /// `W_1(ν, ν^k)`.
    pub w1_nu: f64,
    /// Largest kernel barycentre defect of the output.
    pub max_defect: f64,
    pub fallbacks: usize,
    /// `AW_1(π^k, π)`.
    pub aw1: f64,
}

/// Parameters for an irreducible probability coupling `p` on `(l, r)`.
pub fn choose_params(p: &Coupling, l: f64, r: f64, eps: f64) -> Result<PipelineParams> {
    let mu = p.first_marginal();
    let nu = p.second_marginal();
    let a = mu.quantile(eps / 2.0)?;
    let b = mu.quantile(1.0 - eps / 2.0)?;
    let a_tilde = ((l + a) / 2.0).max(a - 1.0);
    let b_tilde = (b + 1.0).min((b + r) / 2.0);
    derive_params(p, &mu, &nu, l, r, eps, a, b, a_tilde, b_tilde)
}

#[allow(clippy::too_many_arguments)]
fn derive_params(
    p: &Coupling,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    l: f64,
    r: f64,
    eps: f64,
    a: f64,
    b: f64,
    a_tilde: f64,
    b_tilde: f64,
) -> Result<PipelineParams> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let mut radius = (-a).max(b).max(nu.support_radius()).max(f64::MIN_POSITIVE);
    for _ in 0..64 {
        let p_r = step1_compact_scale(p, radius, 1.0)?;
        let nu_r = p_r.second_marginal();
        let change: f64 = p
            .rows()
            .iter()
            .zip(p_r.rows())
            .map(|(x, y)| x.weight * w_1d(&x.kernel, &y.kernel, 1.0).unwrap_or(f64::INFINITY))
            .sum();
        let left = nu_r.restrict(Interval { lo: l, hi: a_tilde, lo_closed: true, hi_closed: false }).total_mass();
        let right = nu_r.restrict(Interval { lo: b_tilde, hi: r, lo_closed: false, hi_closed: true }).total_mass();
        if change < eps && left > 0.0 && right > 0.0 {
            break;
        }
        radius *= 2.0;
    }
    let moments = 1.0 + mu.moment(1.0, 0.0)? + nu.moment(1.0, 0.0)?;
    let alpha = ((2.0 * radius - a - a_tilde) / (2.0 * radius - 2.0 * a_tilde))
        .max((b + b_tilde + 2.0 * radius) / (2.0 * b_tilde + 2.0 * radius))
        .max(1.0 - eps / moments);
    let l_ring = (
        (l + (-radius).max(alpha * l + (1.0 - alpha) * a)) / 2.0,
        (r + radius.min(alpha * r + (1.0 - alpha) * b)) / 2.0,
    );
    let nu_ra = step1_compact_scale(p, radius, alpha)?.second_marginal();
    let (lo_ra, hi_ra) = nu_ra.support_bounds().unwrap_or((l, r));
    let l_tilde = (l + l_ring.0.min(lo_ra)) / 2.0;
    let r_tilde = (r + l_ring.1.max(hi_ra)) / 2.0;
    Ok(PipelineParams {
        eps,
        radius,
        alpha,
        k: (a, b),
        a_tilde,
        b_tilde,
        k_tilde: ((3.0 * a + a_tilde) / 4.0, (3.0 * b + b_tilde) / 4.0),
        l_minus: (l_tilde, (a + a_tilde) / 2.0),
        l_plus: ((b + b_tilde) / 2.0, r_tilde),
        l_ring,
        auto: true,
    })
}

/// Compactifies every kernel to `[-radius, radius]` and shrinks it towards its row by `alpha`.
pub fn step1_compact_scale(p: &Coupling, radius: f64, alpha: f64) -> Result<Coupling> {
    if !(radius > 0.0) {
        return Err(Error::domain(format!("radius must be positive, got {radius}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let rows = p
        .rows()
        .iter()
        .map(|row| {
            let compact = compactify(&row.kernel, radius)?;
            let kernel = if alpha == 1.0 { compact } else { compact.map_positions(|y| alpha * (y - row.x) + row.x) };
            Ok(CouplingRow { x: row.x, weight: row.weight, kernel })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Coupling::from_rows_unchecked(rows))
}

/// `ν^k ∧_c (μ^k ∨_c T_k ν^{R,α})` with `T_k` moving `ν^{R,α}` to the mean of `ν^k`.
pub fn build_target_second_marginal(
    nu_k: &DiscreteMeasure,
    mu_k: &DiscreteMeasure,
    nu_r_alpha: &DiscreteMeasure,
) -> Result<DiscreteMeasure> {
    let tol = default_tol(mu_k, nu_k);
    check_convex_order(mu_k, nu_k, tol)?;
    let shift = nu_k.barycenter()? - nu_r_alpha.barycenter()?;
    let moved = nu_r_alpha.translate(shift);
    let upper = sup_c_tol(mu_k, &moved, tol.max(default_tol(mu_k, &moved)))?;
    inf_c_tol(nu_k, &upper, tol.max(default_tol(nu_k, &upper)))
}

/// Barycentre repair of one kernel with side masses `nu_minus` (left of `x`) and `nu_plus` (right of `x`).
///
/// Returns the repaired kernel and `(c_-, c_+, d)`.
pub fn repair_kernel(
    x: f64,
    kernel: &DiscreteMeasure,
    nu_minus: &DiscreteMeasure,
    nu_plus: &DiscreteMeasure,
) -> Result<(DiscreteMeasure, f64, f64, f64)> {
    let bary = kernel.barycenter()?;
    let mut c_minus = 0.0;
    let mut c_plus = 0.0;
    if bary > x {
        if nu_minus.is_empty() {
            return Err(Error::SideMassMissing(Side::Left));
        }
        c_minus = (bary - x) / (x * nu_minus.total_mass() - nu_minus.first_moment());
    } else if bary < x {
        if nu_plus.is_empty() {
            return Err(Error::SideMassMissing(Side::Right));
        }
        c_plus = (x - bary) / (nu_plus.first_moment() - x * nu_plus.total_mass());
    }
    let d = 1.0 + c_minus * nu_minus.total_mass() + c_plus * nu_plus.total_mass();
    let out = kernel
        .scaled(1.0 / (kernel.total_mass() * d))
        .add(&nu_minus.scaled(c_minus / d))
        .add(&nu_plus.scaled(c_plus / d));
    Ok((out, c_minus, c_plus, d))
}

fn open(iv: (f64, f64)) -> Interval {
    Interval::open(iv.0, iv.1)
}

/// Step 2: copula approximation restricted to the core, then barycentre repair.
///
/// Returns the sub-probability martingale coupling `π̃^k` and its repair mass.
pub fn step2_approx_and_repair(
    p_r_alpha: &Coupling,
    mu_k: &DiscreteMeasure,
    target_nu: &DiscreteMeasure,
    params: &PipelineParams,
) -> Result<(Coupling, f64)> {
    let (partial, repair_mass, _) = approx_and_repair(p_r_alpha, mu_k, target_nu, params, false)?;
    Ok((partial, repair_mass))
}

/// Step 2, optionally dropping rows whose repair needs an empty side interval.
fn approx_and_repair(
    p_r_alpha: &Coupling,
    mu_k: &DiscreteMeasure,
    target_nu: &DiscreteMeasure,
    params: &PipelineParams,
    drop_unrepairable: bool,
) -> Result<(Coupling, f64, usize)> {
    let full = approx_coupling(p_r_alpha, mu_k, target_nu, 1.0)?;
    let nu_minus = target_nu.restrict(open(params.l_minus));
    let nu_plus = target_nu.restrict(open(params.l_plus));
    let core = open(params.k_tilde);
    let ring = open(params.l_ring);
    let mut rows = Vec::new();
    let mut repair_mass = 0.0;
    let mut dropped = 0;
    for row in full.rows().iter().filter(|row| core.contains(row.x)) {
        let kept = row.kernel.restrict(ring);
        let weight = row.weight * kept.total_mass();
        if !(weight > 0.0) {
            continue;
        }
        let repaired = repair_kernel(row.x, &kept, &nu_minus, &nu_plus).and_then(|(kernel, c_minus, c_plus, d)| {
            let mut mass = (c_minus + c_plus) / d;
            let tol = 1e-13 * (1.0 + row.x.abs());
            if (kernel.barycenter()? - row.x).abs() > tol {
                let (again, c2m, c2p, d2) = repair_kernel(row.x, &kernel, &nu_minus, &nu_plus)?;
                mass += (c2m + c2p) / d2;
                return Ok((again, mass));
            }
            Ok((kernel, mass))
        });
        match repaired {
            Ok((kernel, mass)) => {
                repair_mass += weight * mass;
                rows.push(CouplingRow { x: row.x, weight, kernel });
            }
            Err(Error::SideMassMissing(_)) if drop_unrepairable => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((Coupling::from_rows_unchecked(rows), repair_mass, dropped))
}

/// Step 3: completes `keep_fraction · partial` to a martingale coupling of
/// `mu_k` and `blended_target = ε ν^k + (1 - ε) target`.
pub fn step3_complement(
    mu_k: &DiscreteMeasure,
    blended_target: &DiscreteMeasure,
    partial: &Coupling,
    keep_fraction: f64,
) -> Result<Coupling> {
    let kept = partial.scaled(keep_fraction);
    let tol = 1e-12 * (1.0 + mu_k.total_mass());
    let res_mu = mu_k.sub_clamped(&kept.first_marginal(), tol)?;
    let res_nu = blended_target.sub_clamped(&kept.second_marginal(), tol)?;
    check_convex_order(&res_mu, &res_nu, default_tol(&res_mu, &res_nu))?;
    let eta = strassen_coupling(&res_mu, &res_nu)?;
    Ok(eta.add(&kept))
}

/// Step 4: chains a cheapest martingale coupling from the second marginal of `p_bar` to `nu_k`.
pub fn step4_finalize(p_bar: &Coupling, nu_k: &DiscreteMeasure) -> Result<Coupling> {
    let m = min_cost_martingale(&p_bar.second_marginal(), nu_k)?;
    compose(p_bar, &m)
}

/// Largest `t <= 1` with `t · part <= whole` atomwise, shrunk by a rounding margin.
fn dominated_fraction(whole: &DiscreteMeasure, part: &DiscreteMeasure) -> f64 {
    let t = part.atoms().iter().map(|a| whole.weight_at(a.position) / a.weight).fold(1.0, f64::min);
    t * (1.0 - 1e-9)
}

/// Smallest `u_nu - u_mu` over the merged support inside `(lo, hi)`.
fn potential_margin(mu: &DiscreteMeasure, nu: &DiscreteMeasure, lo: f64, hi: f64) -> f64 {
    mu.positions()
        .chain(nu.positions())
        .filter(|&y| y > lo && y < hi)
        .map(|y| crate::lattice::potential_at(nu, y) - crate::lattice::potential_at(mu, y))
        .fold(f64::INFINITY, f64::min)
}

struct ComponentRun {
    coupling: Coupling,
    report: ComponentReport,
}

/// Steps 1-4 on one irreducible probability coupling `p` on `(l, r)`.
fn run_component(
    p: &Coupling,
    l: f64,
    r: f64,
    mu_k: &DiscreteMeasure,
    nu_k: &DiscreteMeasure,
    eps: f64,
    fixed: Option<PipelineParams>,
) -> Result<ComponentRun> {
    let mu = p.first_marginal();
    let nu = p.second_marginal();
    let mut params = match fixed {
        Some(pp) => pp,
        None => choose_params(p, l, r, eps)?,
    };
    let mut retries = 0;
    let mut fallbacks = 0;
    let (p_ra, target, partial, repair_mass, dropped_rows) = loop {
        let p_ra = step1_compact_scale(p, params.radius, params.alpha)?;
        let target = build_target_second_marginal(nu_k, mu_k, &p_ra.second_marginal())?;
        let (lo_t, hi_t) = target.support_bounds().unwrap_or((l, r));
        params.l_minus.0 = params.l_minus.0.min(lo_t - 1.0);
        params.l_plus.1 = params.l_plus.1.max(hi_t + 1.0);
        let lenient = params.auto && retries == MAX_SIDE_RETRIES;
        match approx_and_repair(&p_ra, mu_k, &target, &params, lenient) {
            Ok((partial, repair, dropped)) => {
                fallbacks += usize::from(dropped > 0);
                break (p_ra, target, partial, repair, dropped);
            }
            Err(Error::SideMassMissing(side)) if params.auto && retries < MAX_SIDE_RETRIES => {
                retries += 1;
                let (a, b) = params.k;
                let (a_tilde, b_tilde) = match side {
                    Side::Left => ((params.a_tilde + a) / 2.0, params.b_tilde),
                    Side::Right => (params.a_tilde, (params.b_tilde + b) / 2.0),
                };
                params = derive_params(p, &mu, &nu, l, r, eps, a, b, a_tilde, b_tilde)?;
            }
            Err(e) => return Err(e),
        }
    };

    let blended = nu_k.scaled(eps).add(&target.scaled(1.0 - eps));
    let mut keep = (1.0 - 2.0 * eps).min(dominated_fraction(&blended, &partial.second_marginal()));
    let p_bar = loop {
        match step3_complement(mu_k, &blended, &partial, keep) {
            Ok(c) => break c,
            Err(Error::ConvexOrderViolation { .. } | Error::NegativeResidual { .. }) => {
                fallbacks += 1;
                keep *= 0.5;
                if fallbacks > MAX_FALLBACKS || keep < MIN_KEEP {
                    return Err(Error::PipelineFailure {
                        reason: format!("residual pair not in convex order after {fallbacks} fallbacks on ({l}, {r})"),
                        report: None,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    };
    let kept = partial.scaled(keep);
    let res_mu = mu_k.sub_clamped(&kept.first_marginal(), f64::INFINITY).unwrap_or_default();
    let res_nu = blended.sub_clamped(&kept.second_marginal(), f64::INFINITY).unwrap_or_default();
    let residual_margin = potential_margin(&res_mu, &res_nu, params.l_minus.0, params.l_plus.1);

    let m = min_cost_martingale(&p_bar.second_marginal(), nu_k)?;
    let step4_cost = transport_cost(&m);
    let coupling = compose(&p_bar, &m)?;
    let report = ComponentReport {
        l,
        r,
        mass: 1.0,
        params,
        step1_aw1: aw_distance(&p_ra, p, 1.0)?.distance,
        repair_mass,
        dropped_rows,
        residual_margin,
        keep_fraction: keep,
        fallbacks,
        step4_cost,
        aw1: aw_distance(&coupling, p, 1.0)?.distance,
    };
    Ok(ComponentRun { coupling, report })
}

fn check_probability(mass: f64, what: &str) -> Result<()> {
    if (mass - 1.0).abs() > mass_tol(1.0) {
        return Err(Error::domain(format!("{what} must have unit mass, got {mass}")));
    }
    Ok(())
}

/// A martingale coupling of `mu_k <=_c nu_k` close to the martingale coupling `p` in `AW_1`.
///
/// `params`, when given, is used for every component instead of [`choose_params`].
pub fn approximate(
    p: &Coupling,
    mu_k: &DiscreteMeasure,
    nu_k: &DiscreteMeasure,
    eps: f64,
    params: Option<PipelineParams>,
) -> Result<(Coupling, PipelineReport)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    check_probability(p.total_mass(), "coupling")?;
    check_probability(mu_k.total_mass(), "perturbed first marginal")?;
    check_probability(nu_k.total_mass(), "perturbed second marginal")?;
    let mu = p.first_marginal();
    let nu = p.second_marginal();
    let scale = position_scale(&mu, &nu).max(position_scale(mu_k, nu_k));
    if !martingale_diagnostics(p, 1e-8 * scale).is_martingale {
        return Err(Error::domain("input coupling is not a martingale coupling"));
    }
    check_convex_order(mu_k, nu_k, default_tol(mu_k, nu_k))?;

    let dec = irreducible_components(&mu, &nu)?;
    let (parts, _chi) = decompose_coupling(p, &dec)?;
    let base = min_cost_martingale(mu_k, nu_k)?;
    let boundaries: Vec<(f64, f64)> = dec.components.iter().map(|c| (mu.cdf(c.l), mu.cdf_left(c.r))).collect();
    let sliced = slice_pair_by_quantiles(&base, &boundaries)?;

    let runs: Vec<Result<(Coupling, ComponentReport)>> = dec
        .components
        .par_iter()
        .zip(parts.par_iter())
        .zip(sliced.slices.par_iter())
        .map(|((c, part), slice)| {
            let mass = slice.coupling.total_mass();
            if mass <= 0.0 {
                return Ok((Coupling::zero(), empty_report(c.l, c.r, eps)));
            }
            let run = run_component(
                &part.normalized()?,
                c.l,
                c.r,
                &slice.mu.normalized()?,
                &slice.nu.normalized()?,
                eps,
                params,
            )?;
            let mut report = run.report;
            report.mass = mass;
            Ok((run.coupling.scaled(mass), report))
        })
        .collect();

    let mut total = Coupling::zero();
    let mut components = Vec::with_capacity(runs.len());
    for run in runs {
        let (c, report) = run?;
        total = total.add(&c);
        components.push(report);
    }
    total = total.add(&sliced.remainder.coupling);
    let out = total.with_first_marginal(mu_k)?;

    let gap = out.second_marginal().max_weight_gap(nu_k);
    let diag = martingale_diagnostics(&out, 1e-8 * scale);
    let fallbacks = components.iter().map(|c| c.fallbacks).sum();
    let report = PipelineReport {
        eps,
        components,
        w1_mu: w_1d(&mu, mu_k, 1.0)?,
        w1_nu: w_1d(&nu, nu_k, 1.0)?,
        max_defect: diag.max_defect,
        fallbacks,
        aw1: aw_distance(&out, p, 1.0)?.distance,
    };
    if gap > 1e-10 || !diag.is_martingale {
        return Err(Error::PipelineFailure {
            reason: format!("output check failed: marginal gap {gap:e}, defect {:e}", diag.max_defect),
            report: Some(Box::new(report)),
        });
    }
    Ok((out, report))
}

fn empty_report(l: f64, r: f64, eps: f64) -> ComponentReport {
    ComponentReport {
        l,
        r,
        mass: 0.0,
        params: PipelineParams {
            eps,
            radius: 0.0,
            alpha: 1.0,
            k: (l, r),
            a_tilde: l,
            b_tilde: r,
            k_tilde: (l, r),
            l_minus: (l, l),
            l_plus: (r, r),
            l_ring: (l, r),
            auto: false,
        },
        step1_aw1: 0.0,
        repair_mass: 0.0,
        dropped_rows: 0,
        residual_margin: 0.0,
        keep_fraction: 0.0,
        fallbacks: 0,
        step4_cost: 0.0,
        aw1: 0.0,
    }
}

/// Moves `nu_tilde` to the mean of `mu_tilde` and lifts it to `nu_tilde ∨_c mu_tilde`.
pub fn repair_convex_order(
    mu_tilde: &DiscreteMeasure,
    nu_tilde: &DiscreteMeasure,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    check_probability(mu_tilde.total_mass(), "first measure")?;
    check_probability(nu_tilde.total_mass(), "second measure")?;
    let shift = mu_tilde.barycenter()? - nu_tilde.barycenter()?;
    let rounding = 8.0 * f64::EPSILON * (1.0 + mu_tilde.support_radius().max(nu_tilde.support_radius()));
    let moved = if shift.abs() <= rounding { nu_tilde.clone() } else { nu_tilde.translate(shift) };
    let lifted = sup_c_tol(&moved, mu_tilde, default_tol(mu_tilde, &moved))?;
    Ok((mu_tilde.clone(), lifted))
}
