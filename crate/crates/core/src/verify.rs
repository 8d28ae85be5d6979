//! Numerical certificates for the projection theorem and the duality theorem.
//! Every check is a worst-case violation compared against a tolerance; a
//! failed check is a report entry, never an error.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::divergences::{bregman_dual, rkl, Divergence};
use crate::dynamics::{half_step, run, AlternatingChainSpec, ChainState, ES_DISINTEGRATION_TOL};
use crate::error::Result;
use crate::measures::{check_disintegration, marginal, Axis, JointMeasure, SupportSet};
use crate::projections::{
    affine_residual, affine_subspace, log_denormalize, oracle_project, project, OracleOptions,
};
use crate::scalar::{compensated_sum, Real};

/// Tolerances for all harnesses. Defaults are tuned for `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub disintegration_tol: f64,
    pub oracle_tol: f64,
    pub affine_tol: f64,
    pub dual_form_slack: f64,
    /// Dual-form competitors drawn per projection.
    pub dual_form_samples: usize,
    /// Relative, scaled by `max(1, d_joint(t))`.
    pub pythagorean_tol: f64,
    pub inequality_slack: f64,
    pub oracle: OracleOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            disintegration_tol: ES_DISINTEGRATION_TOL,
            oracle_tol: 1e-6,
            affine_tol: 1e-10,
            dual_form_slack: 1e-8,
            dual_form_samples: 8,
            pythagorean_tol: 1e-10,
            inequality_slack: 1e-12,
            oracle: OracleOptions::default(),
        }
    }
}

fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

fn serialize_extended_opt<S: Serializer>(
    v: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => serialize_extended(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(serialize_with = "serialize_extended")]
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Running maximum of a violation; NaN counts as `+∞`.
#[derive(Clone, Debug)]
struct Worst {
    name: &'static str,
    tolerance: f64,
    value: f64,
}

impl Worst {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            value: 0.0,
        }
    }

    fn observe(&mut self, v: f64) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.value = self.value.max(v);
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.to_string(),
            max_violation: self.value,
            tolerance: self.tolerance,
            pass: self.value <= self.tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    #[serde(serialize_with = "serialize_extended")]
    pub d_joint: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub d_mu: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub d_nu: f64,
    /// `rkl(π_t, π_{t−1})`; absent at `t = 0`.
    #[serde(serialize_with = "serialize_extended_opt")]
    pub progress: Option<f64>,
}

/// Divergences to the ES measure along one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DivergenceTrace {
    pub burn_in: usize,
    pub rows: Vec<TraceRow>,
}

fn fmt_value(out: &mut String, v: f64) {
    if v.is_finite() {
        write!(out, "{v:.16e}").expect("write to string");
    } else {
        out.push_str("inf");
    }
}

impl DivergenceTrace {
    pub const CSV_HEADER: &'static str = "t,d_joint,d_mu,d_nu,progress";

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Floats with 17 significant digits, `inf` for infinite divergences and
    /// an empty progress cell at `t = 0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            self.push_row(&mut out, row);
            out.push('\n');
        }
        out
    }

    /// [`to_csv`](Self::to_csv) plus per-step diagnostics: the Pythagorean
    /// residual `d_joint(t−1) − d_joint(t) − progress(t)`, the data-processing
    /// gap `d_joint − max(d_mu, d_nu)`, and whether `t ≥ t0`.
    pub fn to_csv_extended(&self) -> String {
        let mut out = format!(
            "{},pythagorean_residual,dpi_gap,post_burn_in\n",
            Self::CSV_HEADER
        );
        for (i, row) in self.rows.iter().enumerate() {
            self.push_row(&mut out, row);
            out.push(',');
            if i > 0 {
                let prev = self.rows[i - 1].d_joint;
                let residual = prev - row.d_joint - row.progress.unwrap_or(f64::NAN);
                if residual.is_finite() {
                    fmt_value(&mut out, residual);
                } else {
                    out.push_str("nan");
                }
            }
            out.push(',');
            let gap = row.d_joint - row.d_mu.max(row.d_nu);
            if gap.is_finite() {
                fmt_value(&mut out, gap);
            } else {
                out.push_str("nan");
            }
            out.push(',');
            out.push(if row.t >= self.burn_in { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    fn push_row(&self, out: &mut String, row: &TraceRow) {
        write!(out, "{},", row.t).expect("write to string");
        fmt_value(out, row.d_joint);
        out.push(',');
        fmt_value(out, row.d_mu);
        out.push(',');
        fmt_value(out, row.d_nu);
        out.push(',');
        if let Some(p) = row.progress {
            fmt_value(out, p);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub trace: DivergenceTrace,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Appends `other`'s checks; keeps `other`'s trace if this one is empty.
    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        if self.trace.is_empty() {
            self.trace = other.trace;
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One line per check: `PASS name max_violation tolerance`.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            let mut v = String::new();
            fmt_value(&mut v, c.max_violation);
            writeln!(
                out,
                "{status} {} max_violation={v} tolerance={:e}",
                c.name, c.tolerance
            )
            .expect("write to string");
        }
        out
    }
}

/// Random strictly positive joint on `support`, weights uniform on `[0.05, 1]`.
pub fn random_full_support_start<T: Real, R: Rng>(
    support: &SupportSet,
    rng: &mut R,
) -> JointMeasure<T> {
    let mut raw = vec![T::zero(); support.nx() * support.ny()];
    for (x, y) in support.pairs() {
        raw[support.index(x, y)] = T::lit(rng.gen_range(0.05..=1.0));
    }
    let total = compensated_sum(raw.iter().copied());
    let weights = raw.into_iter().map(|w| w / total).collect();
    JointMeasure::probability(support.clone(), weights).expect("positive weights on the support")
}

fn disintegration_check<T: Real>(spec: &AlternatingChainSpec<T>, tol: f64) -> Check {
    let mut worst = Worst::new("es_disintegration", tol);
    worst.observe(check_disintegration(spec.es(), spec.kernel_y_given_x()).as_f64());
    worst.observe(check_disintegration(spec.es(), spec.kernel_x_given_y()).as_f64());
    worst.finish()
}

/// Certifies that each half-step is the reverse-KL projection onto its set:
/// for `trials` seeded random full-support starts and both step parities,
/// (a) the half-step equals the closed-form projection exactly, (b) it agrees
/// with the independent oracle, (c) its log-likelihood lies in the step's
/// affine subspace, and (d) it minimizes the dual Bregman form over sampled
/// members of that subspace.
pub fn verify_projection_theorem<T: Real>(
    spec: &AlternatingChainSpec<T>,
    trials: usize,
    seed: u64,
) -> VerificationReport {
    verify_projection_theorem_with(spec, trials, seed, &VerifyOptions::default())
}

pub fn verify_projection_theorem_with<T: Real>(
    spec: &AlternatingChainSpec<T>,
    trials: usize,
    seed: u64,
    options: &VerifyOptions,
) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exact = Worst::new("half_step_equals_projection", 0.0);
    let mut oracle = Worst::new("oracle_agreement", options.oracle_tol);
    let mut affine = Worst::new("affine_membership", options.affine_tol);
    let mut dual = Worst::new("dual_form_minimality", options.dual_form_slack);

    let subspaces = [
        affine_subspace(spec.kernel_at(0)),
        affine_subspace(spec.kernel_at(1)),
    ];
    for _ in 0..trials {
        let pi = random_full_support_start::<T, _>(spec.support(), &mut rng);
        for (t, subspace) in subspaces.iter().enumerate() {
            let kernel = spec.kernel_at(t);
            let state = ChainState { t, pi: pi.clone() };
            let stepped = match half_step(&state, spec) {
                Ok(s) => s.pi,
                Err(_) => {
                    for w in [&mut exact, &mut oracle, &mut affine, &mut dual] {
                        w.observe(f64::INFINITY);
                    }
                    continue;
                }
            };
            match project(&pi, kernel) {
                Ok(p) => exact.observe(p.max_abs_diff(&stepped).as_f64()),
                Err(_) => exact.observe(f64::INFINITY),
            }
            match oracle_project(&pi, kernel, &options.oracle) {
                Ok(o) => oracle.observe(o.joint.max_abs_diff(&stepped).as_f64()),
                Err(_) => oracle.observe(f64::INFINITY),
            }
            let (l_hat, l_pi) = match (log_denormalize(&stepped), log_denormalize(&pi)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    affine.observe(f64::INFINITY);
                    dual.observe(f64::INFINITY);
                    continue;
                }
            };
            let subspace = match subspace {
                Ok(s) => s,
                Err(_) => {
                    affine.observe(f64::INFINITY);
                    dual.observe(f64::INFINITY);
                    continue;
                }
            };
            affine.observe(affine_residual(&l_hat, subspace).as_f64());
            dual.observe(dual_form_violation(
                &l_hat,
                &l_pi,
                &stepped,
                kernel.conditioning_axis(),
                subspace,
                options.dual_form_samples,
                &mut rng,
            ));
        }
    }
    VerificationReport {
        checks: vec![
            disintegration_check(spec, options.disintegration_tol),
            exact.finish(),
            oracle.finish(),
            affine.finish(),
            dual.finish(),
        ],
        trace: DivergenceTrace::default(),
    }
}

/// `max(0, B(l̂, l) − min_l' B(l', l))` over competitors: half of them global
/// draws of the block coefficients, half small perturbations of `l̂`'s own.
fn dual_form_violation<T: Real, R: Rng>(
    l_hat: &JointMeasure<T>,
    l_pi: &JointMeasure<T>,
    stepped: &JointMeasure<T>,
    axis: Axis,
    subspace: &crate::projections::AffineSubspace<T>,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let best = match bregman_dual(l_hat, l_pi) {
        Ok(b) => b,
        Err(_) => return f64::INFINITY,
    };
    let own: Vec<T> = match marginal(stepped, axis) {
        Ok(m) => m.weights().iter().map(|w| w.ln()).collect(),
        Err(_) => return f64::INFINITY,
    };
    let mut violation = 0.0f64;
    for i in 0..samples {
        let coeffs: Vec<T> = if i % 2 == 0 {
            let scale: f64 = rng.gen_range(0.5..2.0);
            (0..subspace.dim())
                .map(|_| T::lit((rng.gen_range(0.05..1.0f64) * scale).ln()))
                .collect()
        } else {
            own.iter()
                .map(|&c| c + T::lit(rng.gen_range(-0.01..0.01)))
                .collect()
        };
        let value = subspace.point(&coeffs).and_then(|l| bregman_dual(&l, l_pi));
        match value {
            Ok(v) => violation = violation.max((best - v).as_f64()),
            Err(_) => return f64::INFINITY,
        }
    }
    violation
}

struct RawRow<T> {
    d_joint: Divergence<T>,
    d_mu: Divergence<T>,
    d_nu: Divergence<T>,
    progress: Option<Divergence<T>>,
}

type RawRun<T> = (Vec<ChainState<T>>, Vec<RawRow<T>>);

fn raw_trace<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
) -> Result<RawRun<T>> {
    let states = run(spec, pi0, steps)?;
    let es = spec.es();
    let mu_es = marginal(es, Axis::X)?;
    let nu_es = marginal(es, Axis::Y)?;
    let mut rows = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        rows.push(RawRow {
            d_joint: rkl(es, &s.pi)?,
            d_mu: rkl(&mu_es, &marginal(&s.pi, Axis::X)?)?,
            d_nu: rkl(&nu_es, &marginal(&s.pi, Axis::Y)?)?,
            progress: if i == 0 {
                None
            } else {
                Some(rkl(&s.pi, &states[i - 1].pi)?)
            },
        });
    }
    Ok((states, rows))
}

fn to_trace<T: Real>(spec: &AlternatingChainSpec<T>, rows: &[RawRow<T>]) -> DivergenceTrace {
    DivergenceTrace {
        burn_in: spec.burn_in(),
        rows: rows
            .iter()
            .enumerate()
            .map(|(t, r)| TraceRow {
                t,
                d_joint: r.d_joint.to_f64(),
                d_mu: r.d_mu.to_f64(),
                d_nu: r.d_nu.to_f64(),
                progress: r.progress.map(Divergence::to_f64),
            })
            .collect(),
    }
}

/// Rows `t = 0..=steps` of `rkl` divergences to the ES measure and its
/// marginals, plus the per-step progress `rkl(π_t, π_{t−1})`.
pub fn emit_trace<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
) -> Result<DivergenceTrace> {
    let (_, rows) = raw_trace(spec, pi0, steps)?;
    Ok(to_trace(spec, &rows))
}

fn finite_or_inf<T: Real>(d: Divergence<T>) -> T {
    d.value().unwrap_or_else(T::infinity)
}

/// `d(t) = d(t+1) + progress(t+1)` for every `t ≥ t0`, the same identity
/// recomputed through the dual Bregman divergence on log-likelihoods, and
/// monotone decay of `d_joint`.
pub fn verify_pythagorean<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
) -> Result<VerificationReport> {
    verify_pythagorean_with(spec, pi0, steps, &VerifyOptions::default())
}

pub fn verify_pythagorean_with<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let (states, rows) = raw_trace(spec, pi0, steps)?;
    let t0 = spec.burn_in();
    let mut identity = Worst::new("pythagorean_identity", options.pythagorean_tol);
    let mut bregman = Worst::new("bregman_pythagorean_equality", options.pythagorean_tol);
    let mut monotone = Worst::new("d_joint_non_increasing", options.inequality_slack);
    let l_es = log_denormalize(spec.es());

    for t in t0..states.len().saturating_sub(1) {
        let d_t = finite_or_inf(rows[t].d_joint);
        let d_next = finite_or_inf(rows[t + 1].d_joint);
        let progress = finite_or_inf(rows[t + 1].progress.expect("t + 1 ≥ 1"));
        let scale = T::one().max(d_t);
        identity.observe(((d_t - d_next - progress).abs() / scale).as_f64());
        monotone.observe((d_next - d_t).as_f64());

        let dual_route = match (
            &l_es,
            log_denormalize(&states[t].pi),
            log_denormalize(&states[t + 1].pi),
        ) {
            (Ok(l_es), Ok(l_t), Ok(l_next)) => {
                let parts = (
                    bregman_dual(l_es, &l_t),
                    bregman_dual(l_es, &l_next),
                    bregman_dual(&l_next, &l_t),
                );
                match parts {
                    (Ok(whole), Ok(near), Ok(step)) => {
                        ((whole - near - step).abs() / T::one().max(whole)).as_f64()
                    }
                    _ => f64::INFINITY,
                }
            }
            _ => f64::INFINITY,
        };
        bregman.observe(dual_route);
    }
    Ok(VerificationReport {
        checks: vec![identity.finish(), bregman.finish(), monotone.finish()],
        trace: to_trace(spec, &rows),
    })
}

/// For even `t ≥ t0`: `d_mu(t) ≥ d_mu(t+1) ≥ d_nu(t+1) ≥ d_nu(t+2) ≥ d_mu(t+2)`,
/// each as a signed-slack check. At every `t`: marginal divergences are
/// bounded by the joint one.
pub fn verify_duality_chain<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
) -> Result<VerificationReport> {
    verify_duality_chain_with(spec, pi0, steps, &VerifyOptions::default())
}

pub fn verify_duality_chain_with<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let (_, rows) = raw_trace(spec, pi0, steps)?;
    let t0 = spec.burn_in();
    let slack = options.inequality_slack;
    let mut links = [
        Worst::new("duality_mu_step", slack),
        Worst::new("duality_mu_to_nu", slack),
        Worst::new("duality_nu_step", slack),
        Worst::new("duality_nu_to_mu", slack),
    ];
    let mut dpi = Worst::new("data_processing", slack);

    // Signed violation of `a ≥ b`.
    let excess = |a: Divergence<T>, b: Divergence<T>| -> f64 {
        match (a, b) {
            (Divergence::Infinite, _) => 0.0,
            (Divergence::Finite(_), Divergence::Infinite) => f64::INFINITY,
            (Divergence::Finite(x), Divergence::Finite(y)) => (y - x).as_f64(),
        }
    };

    let start = t0 + t0 % 2;
    let mut t = start;
    while t + 2 < rows.len() {
        let chain = [
            rows[t].d_mu,
            rows[t + 1].d_mu,
            rows[t + 1].d_nu,
            rows[t + 2].d_nu,
            rows[t + 2].d_mu,
        ];
        for (i, link) in links.iter_mut().enumerate() {
            link.observe(excess(chain[i], chain[i + 1]));
        }
        t += 2;
    }
    for r in &rows {
        dpi.observe(excess(r.d_joint, r.d_mu));
        dpi.observe(excess(r.d_joint, r.d_nu));
    }
    let mut checks: Vec<Check> = links.into_iter().map(Worst::finish).collect();
    checks.push(dpi.finish());
    Ok(VerificationReport {
        checks,
        trace: to_trace(spec, &rows),
    })
}

/// All three harnesses; the trace is the one from `pi0`.
pub fn verify_all<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
    trials: usize,
    seed: u64,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let mut report = verify_pythagorean_with(spec, pi0, steps, options)?;
    report.merge(verify_duality_chain_with(spec, pi0, steps, options)?);
    let projection = verify_projection_theorem_with(spec, trials, seed, options);
    let mut checks = projection.checks;
    checks.extend(report.checks);
    report.checks = checks;
    Ok(report)
}
