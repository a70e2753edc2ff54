// Potential functions, convex order, the lattice operations and irreducible components.

use std::error::Error;

use mot_stability::lattice::{
    check_convex_order, default_tol, inf_c, irreducible_components, measure_of, potential_of, sup_c,
};
use mot_stability::measure::DiscreteMeasure;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mu = DiscreteMeasure::new([(-2.0, 0.5), (2.0, 0.5)])?;
    let nu = DiscreteMeasure::new([(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)])?;

    let u = potential_of(&nu)?;
    println!("u_nu breakpoints {:?}", u.breakpoints);
    assert_eq!(measure_of(&u)?.positions().collect::<Vec<_>>(), nu.positions().collect::<Vec<_>>());

    check_convex_order(&mu, &nu, default_tol(&mu, &nu))?;
    println!("mu <=_c nu");
    match check_convex_order(&nu, &mu, default_tol(&nu, &mu)) {
        Err(e) => println!("reverse order fails: {e}"),
        Ok(()) => return Err("reverse order unexpectedly holds".into()),
    }

    let a = DiscreteMeasure::new([(-1.0, 0.5), (1.0, 0.5)])?;
    let b = DiscreteMeasure::new([(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)])?;
    println!("a v_c b = {:?}", sup_c(&a, &b)?.to_pairs());
    println!("a ^_c b = {:?}", inf_c(&a, &b)?.to_pairs());

    let d = irreducible_components(&mu, &nu)?;
    for c in &d.components {
        println!("component ({}, {}): mu {:?} nu {:?}", c.l, c.r, c.mu.to_pairs(), c.nu.to_pairs());
    }
    println!("common part {:?}", d.eta.to_pairs());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
