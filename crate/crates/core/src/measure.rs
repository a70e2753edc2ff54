//! Finitely supported measures on the real line.
//!
//! A [`DiscreteMeasure`] keeps its atoms sorted by position with strictly
//! increasing positions; atoms landing on the same position are merged by
//! exact floating-point equality. The zero measure is a valid value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A weighted point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// An interval of the real line with independently open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// `(lo, hi]`
    pub fn left_open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

/// Finite positive measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "MeasureRepr", try_from = "MeasureRepr")]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<(f64, f64)>,
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr { atoms: m.atoms.iter().map(|a| (a.position, a.weight)).collect() }
    }
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        DiscreteMeasure::new(r.atoms)
    }
}

impl DiscreteMeasure {
    /// Builds a measure from `(position, weight)` pairs.
    ///
    /// Zero weights are dropped, equal positions are merged. Non-finite
    /// values and negative weights are rejected.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms = Vec::new();
        for (position, weight) in pairs {
            if !position.is_finite() {
                return Err(Error::domain(format!("non-finite position {position}")));
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::domain(format!("invalid weight {weight} at {position}")));
            }
            if weight > 0.0 {
                atoms.push(Atom { position, weight });
            }
        }
        Ok(Self::from_atoms_unchecked(atoms))
    }

    /// Sorts and merges atoms that are already known to be finite and positive.
    pub(crate) fn from_atoms_unchecked(mut atoms: Vec<Atom>) -> Self {
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.position == a.position => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        let total_mass = merged.iter().map(|a| a.weight).sum();
        DiscreteMeasure { atoms: merged, total_mass }
    }

    /// Like [`DiscreteMeasure::new`] but silently drops non-positive weights.
    pub(crate) fn from_pairs_lossy(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let atoms =
            pairs.into_iter().filter(|&(_, w)| w > 0.0).map(|(position, weight)| Atom { position, weight }).collect();
        Self::from_atoms_unchecked(atoms)
    }

    pub fn zero() -> Self {
        DiscreteMeasure::default()
    }

    /// Unit point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self::point(x, 1.0)
    }

    /// Point mass `w·δ_x`.
    pub fn point(x: f64, w: f64) -> Self {
        Self::from_pairs_lossy([(x, w)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.position)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.weight)
    }

    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|a| (a.position, a.weight)).collect()
    }

    /// Smallest and largest atom position.
    pub fn support_bounds(&self) -> Option<(f64, f64)> {
        Some((self.atoms.first()?.position, self.atoms.last()?.position))
    }

    /// Largest `|x|` over the support, 0 for the zero measure.
    pub fn support_radius(&self) -> f64 {
        self.support_bounds().map_or(0.0, |(a, b)| a.abs().max(b.abs()))
    }

    /// Mass of the atom at exactly `x`.
    pub fn weight_at(&self, x: f64) -> f64 {
        self.index_of(x).map_or(0.0, |i| self.atoms[i].weight)
    }

    pub(crate) fn index_of(&self, x: f64) -> Option<usize> {
        self.atoms
            .binary_search_by(|a| a.position.total_cmp(&x))
            .ok()
            .or_else(|| self.atoms.iter().position(|a| a.position == x))
    }

    /// Running sums `F(x_k)` at each atom.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.atoms
            .iter()
            .map(|a| {
                acc += a.weight;
                acc
            })
            .collect()
    }

    /// `F(x) = m((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.position <= x);
        self.atoms[..k].iter().fold(0.0, |s, a| s + a.weight)
    }

    /// `F(x-) = m((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.position < x);
        self.atoms[..k].iter().fold(0.0, |s, a| s + a.weight)
    }

    /// Left-continuous quantile `inf{x : F(x) >= u}` for `u` in `(0, total_mass]`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let m = self.total_mass;
        if !(u > 0.0) || u > m + 1e-12 * (1.0 + m) {
            return Err(Error::domain(format!("quantile level {u} outside (0, {m}]")));
        }
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.weight;
            if acc >= u {
                return Ok(a.position);
            }
        }
        Ok(self.atoms.last().expect("positive mass").position)
    }

    pub fn quantile_partition(&self) -> QuantilePartition {
        let breakpoints = self.cumulative().into_iter().zip(self.positions()).collect();
        QuantilePartition { breakpoints }
    }

    /// `Σ w x`.
    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.position).sum()
    }

    /// Mean position `Σ w x / Σ w`.
    pub fn barycenter(&self) -> Result<f64> {
        if self.total_mass <= 0.0 {
            return Err(Error::domain("barycenter of the zero measure"));
        }
        Ok(self.first_moment() / self.total_mass)
    }

    /// `Σ w |x - x0|^r`.
    pub fn moment(&self, r: f64, x0: f64) -> Result<f64> {
        check_order(r)?;
        Ok(self.atoms.iter().map(|a| a.weight * (a.position - x0).abs().powf(r)).sum())
    }

    /// Largest `r`-th moment about `x0` carried by a sub-measure of mass at most `eps`.
    ///
    /// Evaluated as the integral of the quantile function of the image of the
    /// measure under `x ↦ |x - x0|^r` over the top `eps` of its mass.
    pub fn i_epsilon(&self, eps: f64, r: f64, x0: f64) -> Result<f64> {
        check_order(r)?;
        if !(eps >= 0.0) {
            return Err(Error::domain(format!("eps must be nonnegative, got {eps}")));
        }
        if eps >= self.total_mass {
            return self.moment(r, x0);
        }
        let image = self.map_positions(|x| (x - x0).abs().powf(r));
        let mut remaining = eps;
        let mut acc = 0.0;
        for a in image.atoms.iter().rev() {
            if remaining <= 0.0 {
                break;
            }
            let take = a.weight.min(remaining);
            acc += take * a.position;
            remaining -= take;
        }
        Ok(acc)
    }

    /// Image under `y ↦ alpha (y - m1) + m1` where `m1` is the barycentre.
    pub fn scale_about_barycenter(&self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("scale factor must be nonnegative, got {alpha}")));
        }
        let m1 = self.barycenter()?;
        if alpha == 0.0 {
            return Ok(Self::point(m1, self.total_mass));
        }
        Ok(self.map_positions(|y| alpha * (y - m1) + m1))
    }

    /// Pushforward under `f`, merging collisions.
    pub fn map_positions(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_atoms_unchecked(
            self.atoms.iter().map(|a| Atom { position: f(a.position), weight: a.weight }).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut atoms = Vec::with_capacity(self.len() + other.len());
        atoms.extend_from_slice(&self.atoms);
        atoms.extend_from_slice(&other.atoms);
        Self::from_atoms_unchecked(atoms)
    }

    /// `c · m` for `c >= 0`.
    pub fn mul(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("scalar must be nonnegative, got {c}")));
        }
        Ok(self.scaled(c))
    }

    pub(crate) fn scaled(&self, c: f64) -> Self {
        Self::from_pairs_lossy(self.atoms.iter().map(|a| (a.position, a.weight * c)))
    }

    pub fn restrict(&self, interval: Interval) -> Self {
        let atoms = self.atoms.iter().copied().filter(|a| interval.contains(a.position)).collect();
        Self::from_atoms_unchecked(atoms)
    }

    pub fn translate(&self, c: f64) -> Self {
        self.map_positions(|x| x + c)
    }

    /// Rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if self.total_mass <= 0.0 {
            return Err(Error::domain("cannot normalise the zero measure"));
        }
        Ok(self.scaled(1.0 / self.total_mass))
    }

    /// `self - other`, requiring `other <= self` atomwise up to `tol`.
    ///
    /// Differences within `tol` of zero are dropped.
    pub fn sub_clamped(&self, other: &Self, tol: f64) -> Result<Self> {
        let mut out = Vec::with_capacity(self.len());
        for b in &other.atoms {
            if self.index_of(b.position).is_none() && b.weight > tol {
                return Err(Error::NegativeResidual { position: b.position, deficit: b.weight });
            }
        }
        for a in &self.atoms {
            let w = a.weight - other.weight_at(a.position);
            if w < -tol {
                return Err(Error::NegativeResidual { position: a.position, deficit: -w });
            }
            if w > tol {
                out.push((a.position, w));
            }
        }
        Ok(Self::from_pairs_lossy(out))
    }

    /// Largest absolute atom-weight difference against `other`, matching positions exactly.
    pub fn max_weight_gap(&self, other: &Self) -> f64 {
        let mut gap: f64 = 0.0;
        for a in &self.atoms {
            gap = gap.max((a.weight - other.weight_at(a.position)).abs());
        }
        for b in &other.atoms {
            if self.index_of(b.position).is_none() {
                gap = gap.max(b.weight);
            }
        }
        gap
    }
}

pub(crate) fn check_order(r: f64) -> Result<()> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::domain(format!("order r must be >= 1, got {r}")));
    }
    Ok(())
}

/// Step-function description of a quantile function.
///
/// Each breakpoint `(u, value)` states that the quantile equals `value` on
/// the mass interval ending at `u` and starting at the previous breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantilePartition {
    pub breakpoints: Vec<(f64, f64)>,
}

impl QuantilePartition {
    pub fn total_mass(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |b| b.0)
    }

    /// Quantile value at `u`.
    pub fn value_at(&self, u: f64) -> Option<f64> {
        let k = self.breakpoints.partition_point(|b| b.0 < u);
        self.breakpoints.get(k).map(|b| b.1)
    }

    /// Pushes Lebesgue measure on `(0, total_mass]` through the step function.
    pub fn to_measure(&self) -> DiscreteMeasure {
        let mut prev = 0.0;
        DiscreteMeasure::from_pairs_lossy(self.breakpoints.iter().map(|&(u, x)| {
            let w = u - prev;
            prev = u;
            (x, w)
        }))
    }
}
