//! Run configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! a = 1.0            # or alpha/beta; inf is allowed
//! b = inf
//! mu = 1.0
//! seed = 0
//! boundary = "isolated"
//! output_dir = "out"
//!
//! [grid]
//! n = 64
//! box_length = 20.0
//!
//! [solver]
//! tol_grad = 1e-8
//!
//! [potential]
//! bounded = { shape = "plateau", level = 0.1 }
//! [[potential.term]]
//! q = -2.0
//! alpha = 1.0
//! center = [0.0, 0.0, 0.0]
//!
//! [sweep]
//! mu_list = [0.5, 1.0, 2.0]
//!
//! [verify]
//! samples = 100
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use nlgs::functionals::Boundary;
use nlgs::physics::graviton_masses;
use nlgs::potentials::{BoundedPart, PotentialSpec, PowerTerm};
use nlgs::solver::SolverConfig;
use nlgs::KernelParams;

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "NLGS_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "nlgs-out";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub seed: Option<u64>,
    pub boundary: Option<Boundary>,
    pub output_dir: Option<PathBuf>,
    pub grid: Option<GridSection>,
    pub solver: Option<SolverSection>,
    pub potential: Option<PotentialSection>,
    pub sweep: Option<SweepSection>,
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<usize>,
    pub box_length: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tau: Option<f64>,
    pub tau_max: Option<f64>,
    pub tol_grad: Option<f64>,
    pub tol_energy: Option<f64>,
    pub stall_window: Option<usize>,
    pub max_iters: Option<usize>,
    pub n_starts: Option<usize>,
    pub accelerate: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub term: Vec<TermSection>,
    pub bounded: Option<BoundedPart>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub q: f64,
    pub alpha: f64,
    #[serde(default)]
    pub center: [f64; 3],
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub mu_list: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub samples: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Screening a (number or inf).
    #[arg(long)]
    pub a: Option<f64>,
    /// Screening b (number or inf).
    #[arg(long)]
    pub b: Option<f64>,
    /// Gravity coupling α, with --beta instead of --a/--b.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "grid-n")]
    pub grid_n: Option<usize>,
    /// Box side length.
    #[arg(long = "box")]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides NLGS_OUTPUT_DIR and the file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Comma-separated ascending masses for `sweep`.
    #[arg(long = "mu-list", value_delimiter = ',')]
    pub mu_list: Option<Vec<f64>>,
    /// Random fields for the inequality suite in `verify`.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum BoundaryArg {
    Isolated,
    Periodic,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Isolated => Boundary::Isolated,
            BoundaryArg::Periodic => Boundary::Periodic,
        }
    }
}

/// Fully resolved configuration; its JSON form is hashed into file names.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub kernel: Option<KernelParams>,
    pub potential: Option<PotentialSpec>,
    pub solver: SolverConfig,
    pub mu_list: Vec<f64>,
    pub samples: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

pub fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn kernel_from(
    a: Option<f64>,
    b: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<Option<KernelParams>, CliError> {
    match (a, b, alpha, beta) {
        (None, None, None, None) => Ok(None),
        (Some(a), Some(b), None, None) => Ok(Some(KernelParams::new(a, b)?)),
        (None, None, Some(al), Some(be)) => Ok(Some(graviton_masses(al, be)?)),
        (Some(_) | None, Some(_) | None, None, None) => {
            Err(CliError::Config("both a and b are required".into()))
        }
        (None, None, _, _) => Err(CliError::Config("both alpha and beta are required".into())),
        _ => Err(CliError::Config(
            "give the kernel either as a, b or as alpha, beta, not both".into(),
        )),
    }
}

/// Merge `file` and `flags` (flags win) and validate the result.
pub fn resolve(file: FileConfig, flags: &Flags) -> Result<RunConfig, CliError> {
    let file_kernel = kernel_from(file.a, file.b, file.alpha, file.beta)?;
    let flag_kernel = kernel_from(flags.a, flags.b, flags.alpha, flags.beta)?;
    let kernel = flag_kernel.or(file_kernel);

    let grid = file.grid.unwrap_or_default();
    let s = file.solver.unwrap_or_default();
    let d = SolverConfig::default();
    let solver = SolverConfig {
        n: flags.grid_n.or(grid.n).unwrap_or(d.n),
        box_length: flags.box_length.or(grid.box_length).unwrap_or(d.box_length),
        mu: flags.mu.or(file.mu).unwrap_or(d.mu),
        tau: s.tau.unwrap_or(d.tau),
        tau_max: s.tau_max.unwrap_or(d.tau_max),
        tol_grad: s.tol_grad.unwrap_or(d.tol_grad),
        tol_energy: s.tol_energy.unwrap_or(d.tol_energy),
        stall_window: s.stall_window.unwrap_or(d.stall_window),
        max_iters: s.max_iters.unwrap_or(d.max_iters),
        n_starts: s.n_starts.unwrap_or(d.n_starts),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        boundary: flags
            .boundary
            .map(Boundary::from)
            .or(file.boundary)
            .unwrap_or(d.boundary),
        accelerate: s.accelerate.unwrap_or(d.accelerate),
    };
    solver.validate()?;

    let potential = match file.potential {
        Some(p) => {
            let spec = PotentialSpec {
                terms: p
                    .term
                    .into_iter()
                    .map(|t| PowerTerm {
                        q: t.q,
                        alpha: t.alpha,
                        center: t.center,
                    })
                    .collect(),
                bounded: p.bounded,
            };
            spec.validate(Some(&solver.grid()?))?;
            Some(spec)
        }
        None => None,
    };

    let mu_list = flags
        .mu_list
        .clone()
        .or(file.sweep.and_then(|s| s.mu_list))
        .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]);
    if mu_list.is_empty()
        || mu_list.iter().any(|m| !(*m > 0.0 && m.is_finite()))
        || mu_list.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(CliError::Config(
            "mu_list must be positive and strictly ascending".into(),
        ));
    }
    let samples = flags
        .samples
        .or(file.verify.and_then(|v| v.samples))
        .unwrap_or(100);
    if samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }

    let output_dir = flags
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    Ok(RunConfig {
        kernel,
        potential,
        solver,
        mu_list,
        samples,
        output_dir,
    })
}

pub fn load(flags: &Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    resolve(file, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlgs::Screening;

    fn parse(s: &str) -> Result<RunConfig, CliError> {
        let file: FileConfig = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        resolve(file, &Flags::default())
    }

    #[test]
    fn minimal_choquard() {
        let c = parse("a = inf\nb = inf\n").unwrap();
        assert_eq!(c.kernel, Some(KernelParams::CHOQUARD));
        assert_eq!(
            (
                c.solver.n,
                c.solver.box_length,
                c.solver.mu,
                c.solver.tol_grad
            ),
            (64, 20.0, 1.0, 1e-8)
        );
    }

    #[test]
    fn couplings_map_to_screenings() {
        let c = parse("alpha = 0\nbeta = 0\n").unwrap();
        assert_eq!(
            c.kernel,
            Some(KernelParams {
                a: Screening::Infinite,
                b: Screening::Infinite
            })
        );
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse("a = 1\nb = 1\nalpha = 0\nbeta = 0\n").unwrap_err();
        assert!(e.to_string().contains("not both"));
        let e = parse("a = 1\nb = 1\nwidth = 3\n").unwrap_err();
        assert!(e.to_string().contains("expected one of"), "{e}");
        let e = parse("a = 1\nb = 1\n[[potential.term]]\nq = -1\nalpha = 2.5\n").unwrap_err();
        assert!(
            matches!(e, CliError::Lib(nlgs::Error::InvalidPotential(_))),
            "{e}"
        );
        assert!(parse("[sweep]\nmu_list = [2.0, 1.0]\n").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("a = 1\nb = 1\nmu = 3\n[grid]\nn = 16\n").unwrap();
        let flags = Flags {
            a: Some(2.0),
            b: Some(1.0),
            grid_n: Some(32),
            ..Flags::default()
        };
        let c = resolve(file, &flags).unwrap();
        assert_eq!(c.kernel, Some(KernelParams::new(2.0, 1.0).unwrap()));
        assert_eq!((c.solver.n, c.solver.mu), (32, 3.0));
    }
}
