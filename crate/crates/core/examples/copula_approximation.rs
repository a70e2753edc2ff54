// Carrying a coupling to new marginals through its copula and checking the distance estimate.

use std::error::Error;

use mot_stability::copula::{approx_coupling, check_estimate, copula_of};
use mot_stability::measure::DiscreteMeasure;
use mot_stability::transport::Coupling;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = Coupling::from_joint([(-1.0, -2.0, 0.3), (-1.0, 1.0, 0.2), (1.0, -1.0, 0.1), (1.0, 2.0, 0.4)])?;
    let table = copula_of(&p)?;
    for (iv, blocks) in table.u_intervals.iter().zip(&table.kernels) {
        println!("u in ({:.2}, {:.2}]: {blocks:?}", iv.0, iv.1);
    }

    let mu_k = DiscreteMeasure::new([(-1.1, 0.25), (-0.9, 0.25), (0.8, 0.2), (1.2, 0.3)])?;
    let nu_k = DiscreteMeasure::new([(-2.5, 0.3), (-0.5, 0.1), (1.0, 0.2), (2.0, 0.4)])?;
    let p_k = approx_coupling(&p, &mu_k, &nu_k, 1.0)?;
    for row in p_k.rows() {
        println!("x = {:5.2}  w = {:.3}  kernel {:?}", row.x, row.weight, row.kernel.to_pairs());
    }
    for r in [1.0, 2.0] {
        let est = check_estimate(&p, &p_k, r)?;
        println!("r = {r}: AW^r = {:.6} <= W^r + W^r = {:.6}: {}", est.lhs, est.rhs, est.holds);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
