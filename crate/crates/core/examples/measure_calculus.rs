// CDF and quantile calculus, moments, tail functionals and barycentric scaling of a discrete measure.

use std::error::Error;

use mot_stability::measure::DiscreteMeasure;
use mot_stability::transport::w_1d;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let m = DiscreteMeasure::new([(0.0, 0.25), (1.0, 0.25), (4.0, 0.5)])?;
    println!("atoms {:?}", m.to_pairs());
    for x in [0.0, 0.5, 1.0, 4.0] {
        println!("F({x}) = {:.4}  F({x}-) = {:.4}", m.cdf(x), m.cdf_left(x));
    }
    for u in [0.25, 0.5, 0.75, 1.0] {
        println!("F^-1({u}) = {}", m.quantile(u)?);
    }
    assert_eq!(m.quantile_partition().to_measure(), m);

    println!("barycenter {:.4}", m.barycenter()?);
    println!("second moment about the barycenter {:.4}", m.moment(2.0, m.barycenter()?)?);
    for eps in [0.0, 0.1, 0.25, 0.5, 1.0] {
        println!("I_eps({eps}) = {:.4}", m.i_epsilon(eps, 1.0, 0.0)?);
    }

    let (a, b) = (0.5, 2.0);
    let (ma, mb) = (m.scale_about_barycenter(a)?, m.scale_about_barycenter(b)?);
    let m1 = m.barycenter()?;
    println!(
        "W_1(m^{a}, m^{b}) = {:.6}, |b - a| E|X - m1| = {:.6}",
        w_1d(&ma, &mb, 1.0)?,
        (b - a) * m.moment(1.0, m1)?
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
