//! Command-line front end. [`run_cli`] does all the work so it can be driven
//! in-process; the binary only wires it to the process streams.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::AlternatingChainSpec;
use crate::error::Error;
use crate::instances::{potts_instance, random_instance, PottsInstance, DEFAULT_MAX_STATES};
use crate::io::{read_spec_json, write_potts_json, write_spec_json};
use crate::measures::JointMeasure;
use crate::verify::{emit_trace, verify_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID_SPEC: i32 = 3;

/// Environment variable overriding the instance size cap.
pub const MAX_STATES_ENV: &str = "ALTPROJ_MAX_STATES";

#[derive(Debug, Parser)]
#[command(
    name = "altproj",
    version,
    about = "Alternating Markov chains as reverse-KL alternating projections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a spec (JSON).
    Gen(GenArgs),
    /// Run the chain and write the divergence trace (CSV).
    Run(RunArgs),
    /// Run all theorem checks; exit 0 iff every check passes.
    Verify(VerifyArgs),
    /// Like `run`, with per-step diagnostic columns.
    Trace(RunArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("generator").required(true).args(["random", "potts"])))]
pub struct GenArgs {
    /// Random instance: NX NY DENSITY SEED.
    #[arg(long, num_args = 4, value_names = ["NX", "NY", "DENSITY", "SEED"])]
    pub random: Option<Vec<String>>,
    /// Potts instance: V Q BETA (requires --edges).
    #[arg(long, num_args = 3, value_names = ["V", "Q", "BETA"], requires = "edges")]
    pub potts: Option<Vec<String>>,
    /// Edges as `u-v`.
    #[arg(long, num_args = 1.., value_name = "U-V", requires = "potts")]
    pub edges: Option<Vec<String>>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// `uniform`, `dirac` (first support pair) or `dirac:x,y`.
    #[arg(long, default_value = "dirac")]
    pub start: String,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Random starts for the projection checks.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value = "dirac")]
    pub start: String,
    /// Write the full report (JSON) here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Relative tolerance for the Pythagorean identity.
    #[arg(long)]
    pub pythagorean_tol: Option<f64>,
    /// Max-norm tolerance for oracle agreement.
    #[arg(long)]
    pub oracle_tol: Option<f64>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn spec(e: Error) -> Self {
        Self {
            code: EXIT_INVALID_SPEC,
            message: format!("invalid spec: {e}"),
        }
    }
}

fn max_states() -> Result<usize, Failure> {
    match std::env::var(MAX_STATES_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::usage(format!(
                "{MAX_STATES_ENV} must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_MAX_STATES),
    }
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, Failure> {
    s.trim()
        .parse()
        .map_err(|_| Failure::usage(format!("cannot parse {what} from {s:?}")))
}

fn parse_edge(s: &str) -> Result<(usize, usize), Failure> {
    let (u, v) = s
        .split_once('-')
        .ok_or_else(|| Failure::usage(format!("edge must look like u-v, got {s:?}")))?;
    Ok((parse("edge endpoint", u)?, parse("edge endpoint", v)?))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(format!("cannot write output: {e}"))),
    }
}

fn load_spec(path: &Path) -> Result<AlternatingChainSpec<f64>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let spec = read_spec_json::<f64>(&text).map_err(Failure::spec)?;
    let cap = max_states()?;
    let states = spec.nx() * spec.ny();
    if states > cap {
        return Err(Failure::spec(Error::CapExceeded {
            what: format!("spec with {states} states"),
            cap,
        }));
    }
    Ok(spec)
}

/// Parses `uniform`, `dirac` or `dirac:x,y` against the spec's support.
pub fn parse_start(spec: &AlternatingChainSpec<f64>, s: &str) -> Result<JointMeasure<f64>, String> {
    let support = spec.support().clone();
    match s.trim() {
        "uniform" => Ok(JointMeasure::uniform(support)),
        "dirac" => {
            let (x, y) = support.pairs().next().expect("support is nonempty");
            JointMeasure::dirac(support, x, y).map_err(|e| e.to_string())
        }
        other => {
            let coords = other.strip_prefix("dirac:").ok_or_else(|| {
                format!("start must be uniform, dirac or dirac:x,y, got {other:?}")
            })?;
            let (x, y) = coords
                .split_once(',')
                .ok_or_else(|| format!("dirac start needs x,y, got {coords:?}"))?;
            let x: usize = x
                .trim()
                .parse()
                .map_err(|_| format!("bad x in {coords:?}"))?;
            let y: usize = y
                .trim()
                .parse()
                .map_err(|_| format!("bad y in {coords:?}"))?;
            if x >= support.nx() || y >= support.ny() || !support.contains(x, y) {
                return Err(format!("({x}, {y}) is not in the support"));
            }
            JointMeasure::dirac(support, x, y).map_err(|e| e.to_string())
        }
    }
}

fn gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let cap = max_states()?;
    let text = if let Some(r) = &args.random {
        let nx: usize = parse("NX", &r[0])?;
        let ny: usize = parse("NY", &r[1])?;
        let density: f64 = parse("DENSITY", &r[2])?;
        let seed: u64 = parse("SEED", &r[3])?;
        if nx.checked_mul(ny).is_none_or(|n| n > cap) {
            return Err(Failure::spec(Error::CapExceeded {
                what: format!("{nx}x{ny} random instance"),
                cap,
            }));
        }
        let spec = random_instance::<f64>(nx, ny, density, seed).map_err(Failure::spec)?;
        write_spec_json(&spec)
    } else {
        let p = args.potts.as_ref().expect("clap enforces one generator");
        let vertices: usize = parse("V", &p[0])?;
        let q: usize = parse("Q", &p[1])?;
        let beta: f64 = parse("BETA", &p[2])?;
        let edges = args
            .edges
            .iter()
            .flatten()
            .map(|e| parse_edge(e))
            .collect::<Result<Vec<_>, _>>()?;
        let inst = PottsInstance::new(vertices, edges, q, beta).map_err(Failure::spec)?;
        let potts = potts_instance::<f64>(&inst, cap).map_err(Failure::spec)?;
        write_potts_json(&potts)
    };
    emit(&args.out, &text, stdout)?;
    Ok(EXIT_OK)
}

fn run_trace(args: &RunArgs, extended: bool, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let spec = load_spec(&args.spec)?;
    let pi0 = parse_start(&spec, &args.start).map_err(Failure::usage)?;
    let trace = emit_trace(&spec, &pi0, args.steps).map_err(Failure::spec)?;
    let csv = if extended {
        trace.to_csv_extended()
    } else {
        trace.to_csv()
    };
    emit(&args.out, &csv, stdout)?;
    Ok(EXIT_OK)
}

fn verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let spec = load_spec(&args.spec)?;
    let pi0 = parse_start(&spec, &args.start).map_err(Failure::usage)?;
    let mut options = VerifyOptions::default();
    if let Some(tol) = args.pythagorean_tol {
        options.pythagorean_tol = tol;
    }
    if let Some(tol) = args.oracle_tol {
        options.oracle_tol = tol;
    }
    let report = verify_all(&spec, &pi0, args.steps, args.trials, args.seed, &options)
        .map_err(Failure::spec)?;
    let t0 = spec.burn_in();
    let d_t0 = report
        .trace
        .rows
        .get(t0)
        .map_or_else(|| "n/a".to_string(), |r| format!("{:.16e}", r.d_joint));
    let mut text = report.summary();
    text.push_str(&format!("burn_in={t0} d_joint(t0)={d_t0}\n"));
    let passed = report.passed();
    text.push_str(if passed {
        "verify: PASS\n"
    } else {
        "verify: FAIL\n"
    });
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Failure::usage(format!("cannot write output: {e}")))?;
    if let Some(path) = &args.report {
        fs::write(path, report.to_json())
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if passed {
        EXIT_OK
    } else {
        EXIT_VERIFICATION_FAILED
    })
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit code.
pub fn run_cli<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = target.write_all(rendered.as_bytes());
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Gen(a) => gen(a, stdout),
        Command::Run(a) => run_trace(a, false, stdout),
        Command::Trace(a) => run_trace(a, true, stdout),
        Command::Verify(a) => verify(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "altproj: {}", f.message);
            f.code
        }
    }
}
