//! The `mot-stability` command line.
//!
//! Every subcommand reads its inputs through [`crate::io`], calls one library
//! operation and writes the result. Exit code 0 means success, 2 a usage,
//! parse or domain error, and 3 a failure of the stability pipeline.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{self, Document, Format};
use crate::lattice::{check_convex_order, default_tol, irreducible_components, max_potential_excess};
use crate::martingale::{martingale_diagnostics, position_scale, strassen_coupling};
use crate::measure::DiscreteMeasure;
use crate::pipeline::{approximate, convergence_experiment, DEFAULT_EPS};
use crate::transport::{aw_distance, Coupling};

#[derive(Debug, Parser)]
#[command(
    name = "mot-stability",
    version,
    about = "Martingale couplings, adapted Wasserstein distances and stable approximation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Order r of the Wasserstein distances.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub order: f64,
    /// Tolerance for martingale and convex-order checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed of the experiment perturbations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "MOT_STABILITY_THREADS")]
    pub threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Output encoding.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Checks the invariants of a measure or coupling file, or the convex order of two measures.
    Validate {
        #[arg(required = true, num_args = 1..=2)]
        files: Vec<PathBuf>,
    },
    /// Adapted Wasserstein distance between two couplings; the outer plan goes to --output.
    AwDist { p: PathBuf, q: PathBuf },
    /// A martingale coupling of two measures in convex order.
    Strassen { mu: PathBuf, nu: PathBuf },
    /// Irreducible decomposition of two measures in convex order, as JSON.
    Decompose { mu: PathBuf, nu: PathBuf },
    /// Approximates a martingale coupling by one with new marginals.
    Approx {
        coupling: PathBuf,
        mu_k: PathBuf,
        nu_k: PathBuf,
        /// Mass parameter of the construction.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Report file (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Runs a convergence experiment described by a JSON config.
    Converge { config: PathBuf },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a thread pool sized by `--threads`.
pub fn execute(cli: &Cli) -> Result<()> {
    if !(cli.order >= 1.0) {
        return Err(Error::Domain(format!("--order must be at least 1, got {}", cli.order)));
    }
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Domain(format!("--threads: {e}")))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let out = cli.output.as_deref();
    let format = cli.format.unwrap_or(Format::Csv);
    match &cli.command {
        Command::Validate { files } => validate(files, cli.tol),
        Command::AwDist { p, q } => {
            let (p, q) = (io::read_coupling(p)?, io::read_coupling(q)?);
            let aw = aw_distance(&p, &q, cli.order)?;
            println!("{:.9}", aw.distance);
            if let Some(path) = out {
                io::emit(Some(path), &io::plan_to_string(aw.distance, &aw.outer_plan, &aw.inner_costs, format))?;
            }
            Ok(())
        }
        Command::Strassen { mu, nu } => {
            let p = strassen_coupling(&io::read_measure(mu)?, &io::read_measure(nu)?)?;
            io::emit(out, &io::coupling_to_string(&p, format))
        }
        Command::Decompose { mu, nu } => {
            if cli.format == Some(Format::Csv) {
                return Err(Error::Domain("decompositions are written as JSON only".into()));
            }
            let d = irreducible_components(&io::read_measure(mu)?, &io::read_measure(nu)?)?;
            io::emit(out, &io::json_string(&d))
        }
        Command::Approx { coupling, mu_k, nu_k, eps, report } => {
            let p = io::read_coupling(coupling)?;
            let (mu_k, nu_k) = (io::read_measure(mu_k)?, io::read_measure(nu_k)?);
            match approximate(&p, &mu_k, &nu_k, *eps, None) {
                Ok((q, rep)) => {
                    if let Some(path) = report {
                        io::emit(Some(path), &io::json_string(&rep))?;
                    }
                    eprintln!(
                        "aw1 {:.9}  w1_mu {:.9}  w1_nu {:.9}  max_defect {:.3e}  fallbacks {}",
                        rep.aw1, rep.w1_mu, rep.w1_nu, rep.max_defect, rep.fallbacks
                    );
                    io::emit(out, &io::coupling_to_string(&q, format))
                }
                Err(Error::PipelineFailure { reason, report: Some(rep) }) => {
                    if let Some(path) = report {
                        io::emit(Some(path), &io::json_string(&rep))?;
                    }
                    Err(Error::PipelineFailure { reason, report: Some(rep) })
                }
                Err(e) => Err(e),
            }
        }
        Command::Converge { config } => {
            let config = io::read_experiment_config(config)?;
            let p = io::read_coupling(Path::new(&config.coupling))?;
            let rows = convergence_experiment(&p, &config.levels, config.eps, cli.seed.unwrap_or(config.seed))?;
            for r in rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("level {} failed: {}", r.level, r.error.as_deref().unwrap_or_default());
            }
            io::emit(out, &io::experiment_to_string(&rows, format))
        }
    }
}

fn validate(files: &[PathBuf], tol: Option<f64>) -> Result<()> {
    let docs = files.iter().map(|f| io::read_document(f)).collect::<Result<Vec<_>>>()?;
    for (file, doc) in files.iter().zip(&docs) {
        println!("{}", file.display());
        match doc {
            Document::Measure(m) => describe_measure("measure", m),
            Document::Coupling(p) => describe_coupling(p, tol),
        }
    }
    if let [Document::Measure(mu), Document::Measure(nu)] = docs.as_slice() {
        let tol = tol.unwrap_or_else(|| default_tol(mu, nu));
        let (y, excess) = max_potential_excess(mu, nu);
        println!("convex order: max u_mu - u_nu = {excess:.3e} at y = {y:.9}");
        check_convex_order(mu, nu, tol)?;
        println!("convex order holds");
    }
    Ok(())
}

fn describe_measure(name: &str, m: &DiscreteMeasure) {
    print!("  {name}: {} atoms, mass {:.9}", m.len(), m.total_mass());
    match (m.barycenter(), m.support_bounds()) {
        (Ok(b), Some((lo, hi))) => println!(", barycenter {b:.9}, support [{lo:.9}, {hi:.9}]"),
        _ => println!(),
    }
}

fn describe_coupling(p: &Coupling, tol: Option<f64>) {
    let (mu, nu) = (p.first_marginal(), p.second_marginal());
    println!("  coupling: {} rows, mass {:.9}", p.len(), p.total_mass());
    describe_measure("first marginal", &mu);
    describe_measure("second marginal", &nu);
    let tol = tol.unwrap_or_else(|| 1e-9 * position_scale(&mu, &nu));
    let d = martingale_diagnostics(p, tol);
    println!(
        "  martingale: {} (max defect {:.3e}, mean defect {:.3e}, tol {:.3e})",
        if d.is_martingale { "yes" } else { "no" },
        d.max_defect,
        d.mean_defect,
        tol
    );
}
