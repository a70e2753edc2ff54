// Adapted Wasserstein distance against the plain Wasserstein distance of the joint laws.

use std::error::Error;

use mot_stability::transport::{aw_distance, aw_oracle_j_embedding, joint_wasserstein, Coupling};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let q = Coupling::from_joint([(0.0, 1.0, 1.0), (0.0, -1.0, 1.0)])?;
    println!("k    W_1        AW_1       oracle     2/k + 2");
    for k in [1.0, 2.0, 5.0, 10.0] {
        let p = Coupling::from_joint([(1.0 / k, 1.0, 1.0), (-1.0 / k, -1.0, 1.0)])?;
        let aw = aw_distance(&p, &q, 1.0)?;
        let oracle = aw_oracle_j_embedding(&p, &q, 1.0)?;
        let w = joint_wasserstein(&p, &q, 1.0)?;
        println!("{k:<4} {w:<10.6} {:<10.6} {oracle:<10.6} {:.6}", aw.distance, 2.0 / k + 2.0);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
