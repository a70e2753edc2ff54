//! Splitting a convex-ordered pair into irreducible components.

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use super::{check_convex_order, default_tol, merged_grid, potential_at, strict_tol};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Interval};

/// One irreducible pair `(mu_n, nu_n)` living on the open interval `(l, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub l: f64,
    pub r: f64,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

impl Component {
    pub fn interval(&self) -> Interval {
        Interval::open(self.l, self.r)
    }
}

/// `mu = eta + Σ mu_n`, `nu = eta + Σ nu_n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IrreducibleDecomposition {
    pub components: Vec<Component>,
    /// Common part, `mu` restricted to `{u_mu = u_nu}`.
    pub eta: DiscreteMeasure,
}

impl IrreducibleDecomposition {
    /// Index of the component whose interval contains `x`.
    pub fn component_of(&self, x: f64) -> Option<usize> {
        self.components.iter().position(|c| c.l < x && x < c.r)
    }
}

impl Serialize for Component {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Component", 4)?;
        st.serialize_field("l", &self.l)?;
        st.serialize_field("r", &self.r)?;
        st.serialize_field("mu", &self.mu.to_pairs())?;
        st.serialize_field("nu", &self.nu.to_pairs())?;
        st.end()
    }
}

impl Serialize for IrreducibleDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("IrreducibleDecomposition", 2)?;
        st.serialize_field("components", &self.components)?;
        st.serialize_field("eta", &self.eta.to_pairs())?;
        st.end()
    }
}

/// Decomposes a pair `mu <=_c nu` along the open set `{u_mu < u_nu}`.
///
/// Atoms of `nu` sitting on an endpoint shared with the common part or with a
/// neighbouring component are split so that every component has equal mass
/// and mean on both sides.
pub fn irreducible_components(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<IrreducibleDecomposition> {
    check_convex_order(mu, nu, default_tol(mu, nu))?;
    let tol = strict_tol(mu, nu);
    let grid = merged_grid(mu, nu);
    if grid.is_empty() {
        return Ok(IrreducibleDecomposition::default());
    }
    let last = grid.len() - 1;
    let zero: Vec<bool> = grid
        .iter()
        .enumerate()
        .map(|(k, &y)| k == 0 || k == last || potential_at(nu, y) - potential_at(mu, y) <= tol)
        .collect();
    let zeros: Vec<usize> = (0..grid.len()).filter(|&k| zero[k]).collect();

    let mut components = Vec::new();
    for w in zeros.windows(2) {
        if w[1] > w[0] + 1 {
            let (l, r) = (grid[w[0]], grid[w[1]]);
            components.push(split_component(mu, nu, l, r)?);
        }
    }

    let eta = DiscreteMeasure::from_pairs_lossy(
        mu.atoms()
            .iter()
            .filter(|a| !components.iter().any(|c| c.l < a.position && a.position < c.r))
            .map(|a| (a.position, a.weight)),
    );

    let dec = IrreducibleDecomposition { components, eta };
    let rebuilt = dec.components.iter().fold(dec.eta.clone(), |acc, c| acc.add(&c.nu));
    let gap = rebuilt.max_weight_gap(nu);
    if gap > 1e-9 * (1.0 + nu.total_mass()) {
        return Err(Error::Internal(format!("decomposition does not re-sum to nu (gap {gap:e})")));
    }
    Ok(dec)
}

fn split_component(mu: &DiscreteMeasure, nu: &DiscreteMeasure, l: f64, r: f64) -> Result<Component> {
    let open = Interval::open(l, r);
    let mu_n = mu.restrict(open);
    let inner = nu.restrict(open);
    let mass = mu_n.total_mass() - inner.total_mass();
    let moment = mu_n.first_moment() - inner.first_moment();
    let mut right = (moment - l * mass) / (r - l);
    let mut left = mass - right;
    let cap = 1e-9 * (1.0 + mu_n.total_mass());
    if left < -cap || right < -cap {
        return Err(Error::Internal(format!(
            "boundary allocation infeasible on ({l}, {r}): left {left:e}, right {right:e}"
        )));
    }
    if left > nu.weight_at(l) + cap || right > nu.weight_at(r) + cap {
        return Err(Error::Internal(format!("boundary allocation exceeds available mass on ({l}, {r})")));
    }
    left = left.clamp(0.0, nu.weight_at(l));
    right = right.clamp(0.0, nu.weight_at(r));
    let nu_n = inner.add(&DiscreteMeasure::from_pairs_lossy([(l, left), (r, right)]));
    Ok(Component { l, r, mu: mu_n, nu: nu_n })
}
