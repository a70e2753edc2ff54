// Martingale couplings of measures in convex order, their diagnostics and chaining.

use std::error::Error;

use mot_stability::martingale::{
    compose, martingale_diagnostics, min_cost_martingale, strassen_coupling, transport_cost,
};
use mot_stability::measure::DiscreteMeasure;
use mot_stability::transport::w_1d;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mu = DiscreteMeasure::new([(-1.0, 0.5), (1.0, 0.5)])?;
    let nu = DiscreteMeasure::new([(-2.0, 0.5), (2.0, 0.5)])?;
    let p = strassen_coupling(&mu, &nu)?;
    for row in p.rows() {
        println!("x = {:4}  kernel {:?}", row.x, row.kernel.to_pairs());
    }
    println!("{:?}", martingale_diagnostics(&p, 1e-9));

    let identity = strassen_coupling(&mu, &mu)?;
    println!("mu against itself: {:?}", identity.joint_measure());

    let rho = DiscreteMeasure::new([(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)])?;
    let m = min_cost_martingale(&nu, &rho)?;
    println!("cost {:.6} <= 2 W_1 = {:.6}", transport_cost(&m), 2.0 * w_1d(&nu, &rho, 1.0)?);
    let chained = compose(&p, &m)?;
    println!("chained coupling of mu and rho: {} rows, {:?}", chained.len(), martingale_diagnostics(&chained, 1e-9));
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
