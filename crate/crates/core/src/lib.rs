//! Martingale couplings of finitely supported measures on the real line.
//!
//! The crate computes adapted Wasserstein distances between couplings,
//! builds martingale couplings of measures in convex order, and approximates
//! a given martingale coupling by martingale couplings with perturbed
//! marginals so that the adapted distance shrinks with the marginal error.
//!
//! - [`measure`]: [`DiscreteMeasure`], CDF and quantile calculus, moments and `I_ε`.
//! - [`lattice`]: potential functions, convex order, `∨_c`/`∧_c` and irreducible components.
//! - [`transport`]: 1-D Wasserstein distances, exact discrete transport, [`Coupling`] and `AW_r`.
//! - [`copula`]: transfer of a coupling to new marginals through its copula.
//! - [`martingale`]: martingale diagnostics, Strassen couplings, composition and slicing.
//! - [`pipeline`]: the four-step stable approximation and convergence experiments.
//! - [`io`] and [`cli`]: file formats and the `mot-stability` command line.
//!
//! ```
//! use mot_stability::{aw_distance, Coupling};
//!
//! let k = 2.0;
//! let p = Coupling::from_joint([(1.0 / k, 1.0, 1.0), (-1.0 / k, -1.0, 1.0)]).unwrap();
//! let q = Coupling::from_joint([(0.0, 1.0, 1.0), (0.0, -1.0, 1.0)]).unwrap();
//! let aw = aw_distance(&p, &q, 1.0).unwrap();
//! assert!((aw.distance - (2.0 / k + 2.0)).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod copula;
pub mod error;
pub mod io;
pub mod lattice;
pub mod martingale;
pub mod measure;
pub mod pipeline;
pub mod simplex;
pub mod transport;

pub use copula::approx_coupling;
pub use error::{Error, Result};
pub use lattice::{check_convex_order, convex_order_leq, inf_c, irreducible_components, sup_c};
pub use martingale::{martingale_diagnostics, min_cost_martingale, strassen_coupling};
pub use measure::DiscreteMeasure;
pub use pipeline::{approximate, PipelineReport};
pub use transport::{aw_distance, w_1d, Coupling};
