// Runs the stability pipeline on shrinking perturbations of a fixed pair and prints the table.

use std::error::Error;

use mot_stability::martingale::min_cost_martingale;
use mot_stability::measure::DiscreteMeasure;
use mot_stability::pipeline::{convergence_experiment, ExperimentRow, LevelSpec, DEFAULT_EPS};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mu = DiscreteMeasure::new([(-2.0, 0.2), (-1.0, 0.2), (0.0, 0.2), (1.0, 0.2), (2.0, 0.2)])?;
    let nu = DiscreteMeasure::new((-4..=4).map(|i| (i as f64, 1.0 / 9.0)))?;
    let p = min_cost_martingale(&mu, &nu)?;
    let targets = [0.2, 0.1, 0.05, 0.02];
    let coarsen: Vec<LevelSpec> = targets.iter().map(|&w1| LevelSpec::QuantileCoarsen { n: 1, w1: Some(w1) }).collect();
    let jitter: Vec<LevelSpec> = targets.iter().map(|&w1| LevelSpec::Jitter { scale: None, w1: Some(w1) }).collect();
    for (name, levels) in [("quantile coarsening", coarsen), ("jitter", jitter)] {
        println!("{name}");
        print_table(&convergence_experiment(&p, &levels, DEFAULT_EPS, 1)?);
    }
    Ok(())
}

fn print_table(rows: &[ExperimentRow]) {
    println!("level  w1_mu        w1_nu        aw1          fallbacks  ms");
    for row in rows {
        println!(
            "{:<6} {:<12.9} {:<12.9} {:<12.9} {:<10} {:.1}",
            row.level, row.w1_mu, row.w1_nu, row.aw1, row.fallbacks, row.ms
        );
        if let Some(e) = &row.error {
            println!("       failed: {e}");
        }
    }
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
