#[allow(dead_code)]
mod measure_calculus_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/measure_calculus.rs"));
}

#[test]
fn measure_calculus_runs() {
    measure_calculus_example::run_example().expect("measure calculus example runs");
}

#[allow(dead_code)]
mod convex_lattice_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/convex_lattice.rs"));
}

#[test]
fn convex_lattice_runs() {
    convex_lattice_example::run_example().expect("convex lattice example runs");
}

#[allow(dead_code)]
mod adapted_distance_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/adapted_distance.rs"));
}

#[test]
fn adapted_distance_runs() {
    adapted_distance_example::run_example().expect("adapted distance example runs");
}

#[allow(dead_code)]
mod copula_approximation_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/copula_approximation.rs"));
}

#[test]
fn copula_approximation_runs() {
    copula_approximation_example::run_example().expect("copula approximation example runs");
}

#[allow(dead_code)]
mod martingale_couplings_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/martingale_couplings.rs"));
}

#[test]
fn martingale_couplings_runs() {
    martingale_couplings_example::run_example().expect("martingale couplings example runs");
}

#[allow(dead_code)]
mod stability_pipeline_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/stability_pipeline.rs"));
}

#[test]
fn stability_pipeline_runs() {
    stability_pipeline_example::run_example().expect("stability pipeline example runs");
}

#[allow(dead_code)]
mod convergence_experiment_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/convergence_experiment.rs"));
}

#[test]
fn convergence_experiment_runs() {
    convergence_experiment_example::run_example().expect("convergence experiment example runs");
}
