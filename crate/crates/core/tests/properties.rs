mod common;

use common::{close, coupling, jitter, martingale, measure, ordered_pair, rng, spread};
use mot_stability::copula::approx_coupling;
use mot_stability::lattice::{
    convex_order_leq, inf_c, irreducible_components, measure_of, potential_at, potential_of, sup_c,
};
use mot_stability::martingale::{
    compose, decompose_coupling, martingale_diagnostics, min_cost_martingale, position_scale, row_defects,
    slice_pair_by_quantiles, strassen_coupling, transport_cost,
};
use mot_stability::measure::DiscreteMeasure;
use mot_stability::pipeline::{
    approximate, convergence_experiment, level_marginals, repair_kernel, step1_compact_scale, step4_finalize,
    LevelSpec, DEFAULT_EPS,
};
use mot_stability::transport::{aw_distance, joint_wasserstein, w_1d, Coupling};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-9;

fn aw1(p: &Coupling, q: &Coupling) -> f64 {
    aw_distance(p, q, 1.0).unwrap().distance
}

/// Two measures with equal mass and mean, both spreads of a common base.
fn sibling_pair(seed: u64) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut g = rng(seed);
    let base = measure(&mut g, 5, 1.0);
    (spread(&mut g, &base), spread(&mut g, &base))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_and_cdf_are_a_galois_connection(seed in any::<u64>(), mass in 0.5..3.0f64) {
        let mut g = rng(seed);
        let m = measure(&mut g, 12, mass);
        let mut us: Vec<f64> = m.cumulative();
        us.extend((0..16).map(|_| g.gen_range(0.0..1.0f64).max(1e-12) * m.total_mass()));
        for &u in &us {
            let q = m.quantile(u).unwrap();
            for x in m.positions() {
                prop_assert_eq!(q <= x, u <= m.cdf(x), "u = {}, x = {}", u, x);
            }
        }
    }

    #[test]
    fn quantile_partition_reconstructs_the_measure(seed in any::<u64>(), mass in 0.5..3.0f64) {
        let mut g = rng(seed);
        let m = measure(&mut g, 16, mass);
        let back = m.quantile_partition().to_measure();
        prop_assert!(back.positions().eq(m.positions()));
        prop_assert!(back.max_weight_gap(&m) <= 4.0 * f64::EPSILON * mass);
    }

    #[test]
    fn i_epsilon_is_monotone_in_the_measure_and_vanishes(seed in any::<u64>(), r in 1.0..3.0f64) {
        let mut g = rng(seed);
        let m = measure(&mut g, 8, 1.0);
        let bigger = m.add(&measure(&mut g, 4, 0.5));
        let x0 = g.gen_range(-2.0..2.0);
        let mut prev = f64::INFINITY;
        for eps in [0.5, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-6, 0.0] {
            let small = m.i_epsilon(eps, r, x0).unwrap();
            prop_assert!(small <= bigger.i_epsilon(eps, r, x0).unwrap() + 1e-12);
            prop_assert!(small <= prev + 1e-12);
            prop_assert!(small <= eps * 8f64.powf(r) + 1e-12);
            prev = small;
        }
        prop_assert_eq!(m.i_epsilon(0.0, r, x0).unwrap(), 0.0);
    }

    #[test]
    fn i_epsilon_of_order_one_follows_the_convex_order(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (mu, nu) = ordered_pair(&mut g, 6);
        let x0 = g.gen_range(-3.0..3.0);
        for eps in [1e-3, 0.01, 0.1, 0.25, 0.5, 0.9, 1.0] {
            prop_assert!(mu.i_epsilon(eps, 1.0, x0).unwrap() <= nu.i_epsilon(eps, 1.0, x0).unwrap() + 1e-12);
        }
    }

    #[test]
    fn barycentric_scaling_is_a_peacock(seed in any::<u64>(), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let mut g = rng(seed);
        let m = measure(&mut g, 8, 1.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (small, large) = (m.scale_about_barycenter(lo).unwrap(), m.scale_about_barycenter(hi).unwrap());
        prop_assert!(convex_order_leq(&small, &large, TOL));
    }

    #[test]
    fn potential_round_trip_recovers_the_measure(seed in any::<u64>(), mass in 0.5..3.0f64) {
        let mut g = rng(seed);
        let m = measure(&mut g, 64, mass);
        let back = measure_of(&potential_of(&m).unwrap()).unwrap();
        prop_assert!(back.positions().eq(m.positions()));
        prop_assert!(back.max_weight_gap(&m) <= 1e-12 * mass);
    }

    #[test]
    fn convex_order_lattice_laws(seed in any::<u64>()) {
        let (mu, nu) = sibling_pair(seed);
        let (lo, hi) = (inf_c(&mu, &nu).unwrap(), sup_c(&mu, &nu).unwrap());
        prop_assert!(convex_order_leq(&lo, &mu, TOL) && convex_order_leq(&lo, &nu, TOL));
        prop_assert!(convex_order_leq(&mu, &hi, TOL) && convex_order_leq(&nu, &hi, TOL));
        prop_assert!(inf_c(&nu, &mu).unwrap().max_weight_gap(&lo) <= 1e-12);
        prop_assert!(sup_c(&nu, &mu).unwrap().max_weight_gap(&hi) <= 1e-12);
        prop_assert!(sup_c(&mu, &mu).unwrap().max_weight_gap(&mu) <= 1e-12);
        prop_assert!(inf_c(&mu, &mu).unwrap().max_weight_gap(&mu) <= 1e-12);
    }

    #[test]
    fn ordered_pairs_are_fixed_by_the_lattice(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (mu, nu) = ordered_pair(&mut g, 6);
        prop_assert!(inf_c(&mu, &nu).unwrap().max_weight_gap(&mu) <= 1e-12);
        prop_assert!(sup_c(&mu, &nu).unwrap().max_weight_gap(&nu) <= 1e-12);
    }

    #[test]
    fn potentials_move_by_at_most_w1(seed in any::<u64>(), t in 0.0..1.0f64) {
        let mut g = rng(seed);
        let m = measure(&mut g, 10, 1.0);
        let mk = jitter(&mut g, &m, t);
        let w1 = w_1d(&m, &mk, 1.0).unwrap();
        for i in 0..=200 {
            let y = -6.0 + 0.06 * i as f64;
            prop_assert!((potential_at(&mk, y) - potential_at(&m, y)).abs() <= w1 + 1e-12);
        }
    }

    #[test]
    fn components_charge_their_finite_endpoints(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (mu, nu) = ordered_pair(&mut g, 6);
        let d = irreducible_components(&mu, &nu).unwrap();
        for c in &d.components {
            prop_assert!(c.l.is_infinite() || c.nu.weight_at(c.l) > 0.0, "left endpoint {}", c.l);
            prop_assert!(c.r.is_infinite() || c.nu.weight_at(c.r) > 0.0, "right endpoint {}", c.r);
        }
    }

    #[test]
    fn adapted_distance_is_a_metric(seed in any::<u64>(), r in prop::sample::select(vec![1.0, 2.0])) {
        let mut g = rng(seed);
        let (p, q, s) = (coupling(&mut g, 5, 1.0), coupling(&mut g, 5, 1.0), coupling(&mut g, 5, 1.0));
        let pq = aw_distance(&p, &q, r).unwrap().distance;
        prop_assert!(close(pq, aw_distance(&q, &p, r).unwrap().distance, 1e-10));
        prop_assert!(pq <= aw_distance(&p, &s, r).unwrap().distance + aw_distance(&s, &q, r).unwrap().distance + 1e-9);
        prop_assert!(aw_distance(&p, &p, r).unwrap().distance <= 1e-12);
    }

    #[test]
    fn adapted_distance_dominates_the_joint_distance(seed in any::<u64>(), r in prop::sample::select(vec![1.0, 2.0])) {
        let mut g = rng(seed);
        let (p, q) = (coupling(&mut g, 5, 1.0), coupling(&mut g, 5, 1.0));
        let aw = aw_distance(&p, &q, r).unwrap();
        prop_assert!(aw.distance + 1e-12 >= joint_wasserstein(&p, &q, r).unwrap());
        prop_assert!(close(aw.distance.powf(r), aw.outer_plan.objective, 1e-10));
    }

    #[test]
    fn joint_measure_round_trip(seed in any::<u64>(), mass in 0.5..2.0f64) {
        let mut g = rng(seed);
        let p = coupling(&mut g, 6, mass);
        prop_assert!(Coupling::from_joint(p.joint_measure()).unwrap().max_joint_gap(&p) <= 1e-15);
    }

    #[test]
    fn copula_approximation_has_exact_marginals(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = coupling(&mut g, 6, 1.0);
        let (mu_k, nu_k) = (measure(&mut g, 8, 1.0), measure(&mut g, 8, 1.0));
        let q = approx_coupling(&p, &mu_k, &nu_k, 1.0).unwrap();
        prop_assert!(q.first_marginal().max_weight_gap(&mu_k) <= 1e-12);
        prop_assert!(q.second_marginal().max_weight_gap(&nu_k) <= 1e-12);
    }

    #[test]
    fn martingale_defect_is_bounded_by_the_adapted_distance(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 6);
        let (mu_k, nu_k) = (measure(&mut g, 8, 1.0), measure(&mut g, 8, 1.0));
        let q = approx_coupling(&p, &mu_k, &nu_k, 1.0).unwrap();
        let defect: f64 = q.rows().iter().zip(row_defects(&q)).map(|(r, d)| r.weight * d).sum();
        prop_assert!(defect <= aw1(&p, &q) + 1e-12);
    }

    #[test]
    fn strassen_couplings_are_valid_and_cheap(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (mu, nu) = ordered_pair(&mut g, 6);
        let p = strassen_coupling(&mu, &nu).unwrap();
        prop_assert!(martingale_diagnostics(&p, 1e-9 * position_scale(&mu, &nu)).is_martingale);
        prop_assert!(p.first_marginal().max_weight_gap(&mu) <= 1e-12);
        prop_assert!(p.second_marginal().max_weight_gap(&nu) <= 1e-10);
        let cheap = min_cost_martingale(&mu, &nu).unwrap();
        prop_assert!(transport_cost(&cheap) <= 2.0 * w_1d(&mu, &nu, 1.0).unwrap() + TOL);
    }

    #[test]
    fn decomposed_couplings_reassemble(seed in any::<u64>()) {
        let mut g = rng(seed);
        let (mu, nu) = ordered_pair(&mut g, 6);
        let p = strassen_coupling(&mu, &nu).unwrap();
        let (parts, chi) = decompose_coupling(&p, &irreducible_components(&mu, &nu).unwrap()).unwrap();
        let whole = parts.iter().fold(chi, |acc, part| acc.add(part));
        prop_assert!(whole.max_joint_gap(&p) <= 1e-12);
    }

    #[test]
    fn quantile_slices_partition_the_coupling(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 8);
        let mut cuts: Vec<f64> = (0..4).map(|_| g.gen_range(0.0..1.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let boundaries = [(cuts[0], cuts[1]), (cuts[2], cuts[3])];
        let sliced = slice_pair_by_quantiles(&p, &boundaries).unwrap();
        let masses: f64 = sliced.slices.iter().map(|s| s.coupling.total_mass()).sum::<f64>()
            + sliced.remainder.coupling.total_mass();
        prop_assert!(close(masses, 1.0, 1e-12));
        for (s, (lo, hi)) in sliced.slices.iter().zip(boundaries) {
            prop_assert!(close(s.coupling.total_mass(), hi - lo, 1e-12));
            prop_assert!(convex_order_leq(&s.mu, &s.nu, TOL));
        }
        let whole = sliced.slices.iter().fold(sliced.remainder.coupling.clone(), |acc, s| acc.add(&s.coupling));
        prop_assert!(whole.max_joint_gap(&p) <= 1e-12);
    }

    #[test]
    fn composition_preserves_the_martingale_property(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 6);
        let mid = p.second_marginal();
        let m = strassen_coupling(&mid, &spread(&mut g, &mid)).unwrap();
        let bound = martingale_diagnostics(&p, 0.0).max_defect + martingale_diagnostics(&m, 0.0).max_defect + 1e-12;
        prop_assert!(martingale_diagnostics(&compose(&p, &m).unwrap(), 0.0).max_defect <= bound);
    }

    #[test]
    fn step1_shrinks_the_second_marginal(seed in any::<u64>(), radius in 0.5..5.0f64, alpha in 0.05..1.0f64) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 6);
        let out = step1_compact_scale(&p, radius, alpha).unwrap();
        prop_assert!(convex_order_leq(&out.second_marginal(), &p.second_marginal(), TOL));
        prop_assert!(out.first_marginal().max_weight_gap(&p.first_marginal()) <= 1e-15);
    }

    #[test]
    fn repair_is_exact_and_its_mass_bounded(
        seed in any::<u64>(),
        x in -1.0..1.0f64,
        gap in 0.1..1.0f64,
        left in 0.05..0.5f64,
        right in 0.05..0.5f64,
    ) {
        let mut g = rng(seed);
        let kernel = measure(&mut g, 5, 1.0).map_positions(|y| x + y / 4.0);
        let minus = measure(&mut g, 3, left).map_positions(|y| x - gap - (y + 4.0) / 4.0);
        let plus = measure(&mut g, 3, right).map_positions(|y| x + gap + (y + 4.0) / 4.0);
        let (out, c_minus, c_plus, d) = repair_kernel(x, &kernel, &minus, &plus).unwrap();
        prop_assert!((out.barycenter().unwrap() - x).abs() <= 1e-12 * (1.0 + x.abs()));
        prop_assert!(close(out.total_mass(), 1.0, 1e-12));
        let defect = (kernel.barycenter().unwrap() - x).abs();
        let side = minus.total_mass().min(plus.total_mass());
        prop_assert!((c_minus + c_plus) / d <= defect / (gap * side) + 1e-12);
    }

    #[test]
    fn step4_costs_at_most_twice_w1(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 6);
        let mid = p.second_marginal();
        let nu_k = spread(&mut g, &mid);
        let out = step4_finalize(&p, &nu_k).unwrap();
        prop_assert!(aw1(&out, &p) <= 2.0 * w_1d(&mid, &nu_k, 1.0).unwrap() + TOL);
        prop_assert!(out.second_marginal().max_weight_gap(&nu_k) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn successful_approximations_are_valid(seed in any::<u64>(), scale in 0.01..0.3f64) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 6);
        let (mu_k, nu_k) = level_marginals(&p, LevelSpec::Jitter { scale: Some(scale), w1: None }, seed).unwrap();
        if let Ok((q, report)) = approximate(&p, &mu_k, &nu_k, DEFAULT_EPS, None) {
            let bound = 1e-8 * position_scale(&mu_k, &nu_k);
            prop_assert!(martingale_diagnostics(&q, bound).is_martingale);
            prop_assert!(q.first_marginal().max_weight_gap(&mu_k) <= 1e-10);
            prop_assert!(q.second_marginal().max_weight_gap(&nu_k) <= 1e-10);
            prop_assert!(report.aw1 >= 0.0 && report.w1_mu >= 0.0 && report.w1_nu >= 0.0);
        }
    }

    #[test]
    fn experiments_are_deterministic(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = martingale(&mut g, 5);
        let levels = [LevelSpec::Jitter { scale: Some(0.2), w1: None }, LevelSpec::QuantileCoarsen { n: 2, w1: None }];
        let strip = |rows: Vec<mot_stability::pipeline::ExperimentRow>| {
            rows.into_iter().map(|r| (r.level, r.w1_mu.to_bits(), r.w1_nu.to_bits(), r.aw1.to_bits(), r.fallbacks, r.error)).collect::<Vec<_>>()
        };
        let first = strip(convergence_experiment(&p, &levels, DEFAULT_EPS, seed).unwrap());
        prop_assert_eq!(first, strip(convergence_experiment(&p, &levels, DEFAULT_EPS, seed).unwrap()));
    }
}
