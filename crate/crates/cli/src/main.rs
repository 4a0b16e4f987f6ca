use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use maval::convexfn::{add_affine, AffineFunctional, ConvexFunction};
use maval::decompose::{
    homogeneous_decomposition, translative_decomposition, BlackBoxFunctional, FnFunctional, SpecFunctional,
    HELD_OUT_T,
};
use maval::functionals::{evaluate, FunctionalSpec};
use maval::measure::{pair, Region, TestFunction, DEFAULT_ORDER};
use maval::verify::{self, Report};
use maval::Error;

#[derive(Parser)]
#[command(name = "maval", version, about = "Evaluate, decompose and test measure-valued functionals of convex functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a functional and print the measure (or its pairing with --phi).
    Eval {
        function: PathBuf,
        functional: PathBuf,
        region: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        /// `const` for the total mass, or a test-function JSON file.
        #[arg(long)]
        phi: Option<String>,
        /// Write the measure here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Homogeneous or translative components paired with a test function.
    Decompose {
        functional: PathBuf,
        function: PathBuf,
        region: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Homogeneous)]
        mode: Mode,
        /// Affine function JSON, required for the translative mode.
        #[arg(long)]
        ell: Option<PathBuf>,
        #[arg(long, default_value = "const")]
        phi: String,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
    /// Run a verification suite and print its JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Restrict the independence suite to one (n, k, d).
        #[arg(long, requires_all = ["k", "d"])]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Homogeneous,
    Translative,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Valuation,
    Invariance,
    Independence,
    Counterexample,
    Seminorm,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch { .. } => 3,
            _ => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn parse_error(path: &Path, msg: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {msg}", path.display()),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| parse_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e))
}

fn load_inputs(function: &Path, functional: &Path, region: &Path) -> Result<(ConvexFunction, FunctionalSpec, Region), Failure> {
    let f: ConvexFunction = read_json(function)?;
    let spec: FunctionalSpec = read_json(functional)?;
    let region: Region = read_json(region)?;
    f.validate()?;
    spec.validate()?;
    region.validate()?;
    Ok((f, spec.canonical(), region))
}

enum Phi {
    Const,
    Bump(TestFunction),
}

fn load_phi(arg: &str) -> Result<Phi, Failure> {
    if arg == "const" {
        return Ok(Phi::Const);
    }
    let phi: TestFunction = read_json(Path::new(arg))?;
    phi.validate()?;
    Ok(Phi::Bump(phi))
}

/// Fixed-point text with 15 significant digits, scientific outside
/// a moderate exponent range.
fn format_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.14e}")
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn cmd_eval(
    function: &Path,
    functional: &Path,
    region: &Path,
    order: usize,
    phi: Option<&str>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let (f, spec, region) = load_inputs(function, functional, region)?;
    let phi = phi.map(load_phi).transpose()?;
    let mu = evaluate(&spec, &f, &region, order)?;
    match phi {
        Some(Phi::Const) => println!("{}", format_significant(mu.mass())),
        Some(Phi::Bump(p)) => println!("{}", format_significant(pair(&mu, &p)?)),
        None => {
            let text = to_json(&mu);
            match out {
                Some(path) => fs::write(path, text + "\n").map_err(|e| Failure {
                    code: 4,
                    message: format!("{}: {e}", path.display()),
                })?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct HeldOut {
    t: f64,
    direct: f64,
    reconstructed: f64,
    residual: f64,
}

#[derive(Serialize)]
struct DecomposeReport {
    mode: &'static str,
    /// Largest index: `n + d` (homogeneous) or `d` (translative).
    max_index: usize,
    components: Vec<f64>,
    held_out: HeldOut,
}

fn held_out(direct: f64, reconstructed: f64) -> HeldOut {
    let scale = direct.abs().max(reconstructed.abs());
    HeldOut {
        t: HELD_OUT_T,
        direct,
        reconstructed,
        residual: if scale == 0.0 { 0.0 } else { (direct - reconstructed).abs() / scale },
    }
}

fn cmd_decompose(
    functional: &Path,
    function: &Path,
    region: &Path,
    mode: Mode,
    ell: Option<&Path>,
    phi: &str,
    order: usize,
) -> Result<(), Failure> {
    let (f, spec, region) = load_inputs(function, functional, region)?;
    let phi = load_phi(phi)?;
    let ell: Option<AffineFunctional> = ell.map(read_json).transpose()?;
    let n = spec.dim;
    let by_spec = SpecFunctional::new(spec.clone(), order);
    let total = FnFunctional {
        dim: n,
        degree: spec.polynomial_degree(),
        f: |g: &ConvexFunction, b: &Region, _: &TestFunction| Ok(evaluate(&spec, g, b, order)?.mass()),
    };
    // the total-mass black box ignores its test function
    let (psi, test): (&dyn BlackBoxFunctional, TestFunction) = match phi {
        Phi::Const => (&total, TestFunction::bump(vec![0.0; n], 1.0)),
        Phi::Bump(p) => (&by_spec, p),
    };
    let report = match mode {
        Mode::Homogeneous => {
            let dec = homogeneous_decomposition(psi, &f, &region, &test)?;
            let direct = psi.pairing(&f.scaled(HELD_OUT_T)?, &region, &test)?;
            DecomposeReport {
                mode: "homogeneous",
                max_index: dec.max_degree(),
                held_out: held_out(direct, dec.reconstruct(HELD_OUT_T)),
                components: dec.components,
            }
        }
        Mode::Translative => {
            let Some(ell) = ell else {
                return Err(Failure {
                    code: 2,
                    message: "--mode translative needs --ell".into(),
                });
            };
            let dec = translative_decomposition(psi, &f, &ell, &region, &test)?;
            let direct = psi.pairing(&add_affine(&f, &ell.scaled(HELD_OUT_T))?, &region, &test)?;
            DecomposeReport {
                mode: "translative",
                max_index: dec.components.len() - 1,
                held_out: held_out(direct, dec.reconstruct(HELD_OUT_T)),
                components: dec.components,
            }
        }
    };
    println!("{}", to_json(&report));
    Ok(())
}

fn cmd_verify(suite: Suite, seed: u64, trials: usize, nkd: Option<(usize, usize, usize)>) -> Result<bool, Failure> {
    let report: Report = match suite {
        Suite::Valuation => verify::valuation_suite(seed, trials)?,
        Suite::Invariance => verify::invariance_suite(seed, trials)?,
        Suite::Independence => match nkd {
            Some((n, k, d)) => verify::check_linear_independence(n, k, d, seed)?,
            None => verify::independence_suite(seed)?,
        },
        Suite::Counterexample => verify::counterexample_suite(seed)?,
        Suite::Seminorm => verify::seminorm_suite(seed, trials)?,
    };
    println!("{}", report.to_json());
    Ok(report.pass)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("MAVAL_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| Failure {
        code: 2,
        message: format!("MAVAL_THREADS must be a positive integer, got {value:?}"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global()
        .map_err(|e| Failure {
            code: 4,
            message: e.to_string(),
        })
}

fn run(cli: Cli) -> Result<bool, Failure> {
    configure_threads()?;
    match cli.command {
        Command::Eval {
            function,
            functional,
            region,
            order,
            phi,
            out,
        } => cmd_eval(&function, &functional, &region, order, phi.as_deref(), out.as_deref()).map(|_| true),
        Command::Decompose {
            functional,
            function,
            region,
            mode,
            ell,
            phi,
            order,
        } => cmd_decompose(&functional, &function, &region, mode, ell.as_deref(), &phi, order).map(|_| true),
        Command::Verify {
            suite,
            seed,
            trials,
            n,
            k,
            d,
        } => {
            let nkd = match (n, k, d) {
                (Some(n), Some(k), Some(d)) => Some((n, k, d)),
                _ => None,
            };
            cmd_verify(suite, seed, trials, nkd)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("maval: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::format_significant;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(1.0), "1.00000000000000");
        assert_eq!(format_significant(std::f64::consts::PI / 6.0), "0.523598775598299");
        assert_eq!(format_significant(-2.0), "-2.00000000000000");
        assert_eq!(format_significant(0.0), "0");
        assert_eq!(format_significant(1.5e-9), "1.50000000000000e-9");
    }
}
