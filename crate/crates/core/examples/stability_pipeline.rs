// Approximating a martingale coupling by one with perturbed marginals and reading the report.

use std::error::Error;

use mot_stability::martingale::min_cost_martingale;
use mot_stability::measure::DiscreteMeasure;
use mot_stability::pipeline::{approximate, quantile_homotopy, repair_convex_order, DEFAULT_EPS};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mu = DiscreteMeasure::new([(-2.0, 0.2), (-1.0, 0.2), (0.0, 0.2), (1.0, 0.2), (2.0, 0.2)])?;
    let nu = DiscreteMeasure::new((-4..=4).map(|i| (i as f64, 1.0 / 9.0)))?;
    let p = min_cost_martingale(&mu, &nu)?;

    let mu_k = quantile_homotopy(&mu, 2, 0.3)?;
    let nu_k = quantile_homotopy(&nu, 3, 0.3)?;
    let (mu_k, nu_k) = repair_convex_order(&mu_k, &nu_k)?;
    let (q, report) = approximate(&p, &mu_k, &nu_k, DEFAULT_EPS, None)?;

    println!("W_1(mu, mu_k) = {:.6}  W_1(nu, nu_k) = {:.6}", report.w1_mu, report.w1_nu);
    println!("AW_1(q, p) = {:.6}  max defect {:.2e}  fallbacks {}", report.aw1, report.max_defect, report.fallbacks);
    for c in &report.components {
        println!(
            "component ({}, {}): R = {:.3} alpha = {:.4} repair mass {:.4} keep {:.4}",
            c.l, c.r, c.params.radius, c.params.alpha, c.repair_mass, c.keep_fraction
        );
    }
    for row in q.rows() {
        println!("x = {:7.4}  barycenter {:7.4}", row.x, row.kernel.barycenter()?);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
