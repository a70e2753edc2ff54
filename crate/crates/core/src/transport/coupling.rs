use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Atom, DiscreteMeasure, Interval};

/// One atom `x` of the first marginal with its mass and conditional law.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub x: f64,
    pub weight: f64,
    /// Probability kernel `π_x`.
    pub kernel: DiscreteMeasure,
}

/// A finitely supported coupling `π(dx, dy) = μ(dx) π_x(dy)` stored by rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "CouplingRepr", try_from = "CouplingRepr")]
pub struct Coupling {
    rows: Vec<CouplingRow>,
    total_mass: f64,
}

#[derive(Serialize, Deserialize)]
struct RowRepr {
    x: f64,
    w: f64,
    kernel: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct CouplingRepr {
    rows: Vec<RowRepr>,
}

impl From<Coupling> for CouplingRepr {
    fn from(c: Coupling) -> Self {
        let rows = c.rows.into_iter().map(|r| RowRepr { x: r.x, w: r.weight, kernel: r.kernel.to_pairs() }).collect();
        CouplingRepr { rows }
    }
}

impl TryFrom<CouplingRepr> for Coupling {
    type Error = Error;

    fn try_from(repr: CouplingRepr) -> Result<Self> {
        let rows = repr
            .rows
            .into_iter()
            .map(|r| Ok(CouplingRow { x: r.x, weight: r.w, kernel: DiscreteMeasure::new(r.kernel)? }))
            .collect::<Result<Vec<_>>>()?;
        Coupling::new(rows)
    }
}

impl Coupling {
    /// Builds a coupling from rows, normalising kernels and merging equal `x`.
    pub fn new(rows: Vec<CouplingRow>) -> Result<Self> {
        for (k, row) in rows.iter().enumerate() {
            if !row.x.is_finite() {
                return Err(Error::domain(format!("row {}: non-finite x {}", k + 1, row.x)));
            }
            if !row.weight.is_finite() || row.weight <= 0.0 {
                return Err(Error::domain(format!("row {}: weight must be positive, got {}", k + 1, row.weight)));
            }
            if row.kernel.total_mass() <= 0.0 {
                return Err(Error::domain(format!("row {}: empty kernel at x = {}", k + 1, row.x)));
            }
        }
        Ok(Self::from_rows_unchecked(rows))
    }

    /// Sorts rows by `x`, normalises kernels and mixes kernels of equal `x`.
    pub(crate) fn from_rows_unchecked(mut rows: Vec<CouplingRow>) -> Self {
        rows.retain(|r| r.weight > 0.0 && r.kernel.total_mass() > 0.0);
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut merged: Vec<CouplingRow> = Vec::with_capacity(rows.len());
        for row in rows {
            let kernel = normalize(&row.kernel);
            match merged.last_mut() {
                Some(last) if last.x == row.x => {
                    let total = last.weight + row.weight;
                    last.kernel = last.kernel.scaled(last.weight / total).add(&kernel.scaled(row.weight / total));
                    last.weight = total;
                }
                _ => merged.push(CouplingRow { x: row.x, weight: row.weight, kernel }),
            }
        }
        let total_mass = merged.iter().map(|r| r.weight).sum();
        Coupling { rows: merged, total_mass }
    }

    pub fn zero() -> Self {
        Coupling::default()
    }

    /// The product coupling `mu × kernel`.
    pub fn product(mu: &DiscreteMeasure, kernel: &DiscreteMeasure) -> Result<Self> {
        if kernel.total_mass() <= 0.0 && !mu.is_empty() {
            return Err(Error::domain("product with an empty kernel"));
        }
        Ok(Self::from_rows_unchecked(
            mu.atoms()
                .iter()
                .map(|a| CouplingRow { x: a.position, weight: a.weight, kernel: kernel.clone() })
                .collect(),
        ))
    }

    /// `(id, id)_* mu`.
    pub fn identity(mu: &DiscreteMeasure) -> Self {
        Self::from_rows_unchecked(
            mu.atoms()
                .iter()
                .map(|a| CouplingRow { x: a.position, weight: a.weight, kernel: DiscreteMeasure::dirac(a.position) })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[CouplingRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn first_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_atoms_unchecked(
            self.rows.iter().map(|r| Atom { position: r.x, weight: r.weight }).collect(),
        )
    }

    /// `Σ weight · kernel`.
    pub fn second_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs_lossy(self.joint_measure().into_iter().map(|(_, y, w)| (y, w)))
    }

    /// Flattened `(x, y, mass)` triples in row order.
    pub fn joint_measure(&self) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .flat_map(|r| r.kernel.atoms().iter().map(move |a| (r.x, a.position, r.weight * a.weight)))
            .collect()
    }

    /// Inverse of [`Coupling::joint_measure`]; masses must be positive.
    pub fn from_joint(triples: impl IntoIterator<Item = (f64, f64, f64)>) -> Result<Self> {
        let mut by_x: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
        let mut triples: Vec<(f64, f64, f64)> = triples.into_iter().collect();
        for (k, &(x, y, w)) in triples.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::domain(format!("entry {k}: non-finite position")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::domain(format!("entry {k}: mass must be positive, got {w}")));
            }
        }
        triples.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, y, w) in triples {
            match by_x.last_mut() {
                Some((lx, ks)) if *lx == x => ks.push((y, w)),
                _ => by_x.push((x, vec![(y, w)])),
            }
        }
        let rows = by_x
            .into_iter()
            .map(|(x, ks)| {
                let kernel = DiscreteMeasure::from_pairs_lossy(ks);
                CouplingRow { x, weight: kernel.total_mass(), kernel }
            })
            .collect();
        Ok(Self::from_rows_unchecked(rows))
    }

    /// `c · π` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::from_rows_unchecked(
            self.rows.iter().map(|r| CouplingRow { x: r.x, weight: r.weight * c, kernel: r.kernel.clone() }).collect(),
        )
    }

    /// Sum of two couplings as measures on the plane.
    pub fn add(&self, other: &Self) -> Self {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Self::from_rows_unchecked(rows)
    }

    /// Rows with `x` in `interval`.
    pub fn restrict_rows(&self, interval: Interval) -> Self {
        Coupling { rows: self.rows.iter().filter(|r| interval.contains(r.x)).cloned().collect(), total_mass: 0.0 }
            .recount()
    }

    /// Rescales to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if self.total_mass <= 0.0 {
            return Err(Error::domain("cannot normalise the zero coupling"));
        }
        Ok(self.scaled(1.0 / self.total_mass))
    }

    /// Replaces row weights by those of `mu`, which must share the row positions.
    pub(crate) fn with_first_marginal(&self, mu: &DiscreteMeasure) -> Result<Self> {
        if mu.len() != self.rows.len() || mu.positions().zip(&self.rows).any(|(x, r)| x != r.x) {
            return Err(Error::domain("first marginal positions do not match the coupling rows"));
        }
        Ok(Coupling {
            rows: self
                .rows
                .iter()
                .zip(mu.atoms())
                .map(|(r, a)| CouplingRow { x: r.x, weight: a.weight, kernel: r.kernel.clone() })
                .collect(),
            total_mass: mu.total_mass(),
        })
    }

    /// Largest difference of joint masses against `other`.
    pub fn max_joint_gap(&self, other: &Self) -> f64 {
        let key = |c: &Self| {
            let mut v = c.joint_measure();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            v
        };
        let (a, b) = (key(self), key(other));
        let (mut i, mut j) = (0, 0);
        let mut gap: f64 = 0.0;
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(p), Some(q)) => p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match ord {
                std::cmp::Ordering::Less => {
                    gap = gap.max(a[i].2);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    gap = gap.max(b[j].2);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    gap = gap.max((a[i].2 - b[j].2).abs());
                    i += 1;
                    j += 1;
                }
            }
        }
        gap
    }

    fn recount(mut self) -> Self {
        self.total_mass = self.rows.iter().map(|r| r.weight).sum();
        self
    }
}

/// Kernels within this distance of unit mass are kept as they are, so that normalised kernels round-trip.
const UNIT_ROUNDING: f64 = 64.0 * f64::EPSILON;

fn normalize(kernel: &DiscreteMeasure) -> DiscreteMeasure {
    let m = kernel.total_mass();
    if (m - 1.0).abs() <= UNIT_ROUNDING {
        kernel.clone()
    } else {
        kernel.scaled(1.0 / m)
    }
}
