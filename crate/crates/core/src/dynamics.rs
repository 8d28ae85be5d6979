//! Alternating chains: exact half-step evolution of the product-chain
//! distribution, the induced primal/dual transition matrices, ergodicity,
//! stationary distributions, the Edwards-Sokal coupling and burn-in.
//!
//! Parity convention: an even half-step resamples `y` from `P[y|x]` (keeps
//! the X-marginal, lands in S1); an odd half-step resamples `x` from `P[x|y]`
//! (keeps the Y-marginal, lands in S2).

use crate::error::{Error, Result};
use crate::measures::{
    check_disintegration, joint_from, marginal, Axis, ConditionalKernel, Direction, JointMeasure,
    MarginalDistribution, SupportSet, View,
};
use crate::scalar::{compensated_sum, CompensatedSum, Real};

/// Disintegration tolerance the ES coupling must meet on a valid spec.
pub const ES_DISINTEGRATION_TOL: f64 = 1e-10;
/// Tolerance used by [`es_from_kernels`] to declare two kernels incompatible.
pub const COMPATIBILITY_TOL: f64 = 1e-8;
/// Iteration cap for stationary power iteration.
pub const STATIONARY_MAX_ITERATIONS: usize = 1_000_000;

/// Default burn-in search cap, `2 (nx² + ny²)` half-steps.
pub fn default_burn_in_cap(nx: usize, ny: usize) -> usize {
    2 * (nx * nx + ny * ny)
}

/// Row-stochastic matrix on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix<T> {
    axis: Axis,
    n: usize,
    entries: Vec<T>,
}

impl<T: Real> TransitionMatrix<T> {
    pub fn new(axis: Axis, rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("empty transition matrix".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < T::zero()) {
                return Err(Error::InvalidKernel(format!(
                    "row {i} has a negative entry"
                )));
            }
            let total = compensated_sum(row.iter().copied());
            if (total - T::one()).abs() > T::representation_tol() {
                return Err(Error::InvalidKernel(format!("row {i} sums to {total}")));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { axis, n, entries })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Row vector times matrix, `dist · M`.
    pub fn apply(&self, dist: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|j| compensated_sum((0..self.n).map(|i| dist[i] * self.get(i, j))))
            .collect()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&p| p > T::zero())
    }
}

/// Composes two resampling kernels into a chain on the first kernel's
/// conditioning axis: `M(a, a') = Σ_b first[a][b] · second[b][a']`.
pub fn compose_kernels<T: Real>(
    first: &ConditionalKernel<T>,
    second: &ConditionalKernel<T>,
) -> Result<TransitionMatrix<T>> {
    let axis = first.conditioning_axis();
    if second.conditioning_axis() != axis.other() {
        return Err(Error::AxisMismatch {
            kernel: second.conditioning_axis(),
            marginal: axis.other(),
        });
    }
    let (fs, ss) = (first.support(), second.support());
    if fs.nx() != ss.nx() || fs.ny() != ss.ny() {
        return Err(Error::ShapeMismatch(
            "kernels live on different grids".into(),
        ));
    }
    let n = first.conditioning_len();
    let m = first.other_len();
    let mut entries = vec![T::zero(); n * n];
    for a in 0..n {
        let row = first.row(a);
        for a2 in 0..n {
            let mut acc = CompensatedSum::new();
            for (b, &p) in row.iter().enumerate().take(m) {
                if p > T::zero() {
                    acc.add(p * second.get(b, a2));
                }
            }
            entries[a * n + a2] = acc.value();
        }
    }
    Ok(TransitionMatrix { axis, n, entries })
}

/// Irreducibility and aperiodicity of a transition matrix's positive-entry digraph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ergodicity {
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Period of the class reachable from state 0.
    pub period: usize,
}

impl Ergodicity {
    pub fn is_ergodic(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bfs_levels<F: Fn(usize, usize) -> bool>(n: usize, edge: F) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    let mut queue = std::collections::VecDeque::new();
    level[0] = Some(0);
    queue.push_back(0);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap_or(0);
        for v in 0..n {
            if edge(u, v) && level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

/// Strong connectivity via forward and backward BFS from state 0; the period
/// is the gcd of `level(u) + 1 − level(v)` over edges inside the BFS tree.
pub fn check_ergodic<T: Real>(m: &TransitionMatrix<T>) -> Ergodicity {
    let n = m.n();
    let forward = bfs_levels(n, |u, v| m.get(u, v) > T::zero());
    let backward = bfs_levels(n, |u, v| m.get(v, u) > T::zero());
    let irreducible = forward.iter().all(Option::is_some) && backward.iter().all(Option::is_some);
    let mut period = 0usize;
    for u in 0..n {
        let Some(lu) = forward[u] else { continue };
        for v in 0..n {
            if m.get(u, v) > T::zero() {
                if let Some(lv) = forward[v] {
                    period = gcd(period, (lu + 1).abs_diff(lv));
                }
            }
        }
    }
    Ergodicity {
        irreducible,
        aperiodic: period == 1,
        period,
    }
}

/// Power-iteration settings.
#[derive(Clone, Copy, Debug)]
pub struct StationaryOptions<T> {
    /// L1 threshold on successive iterates.
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for StationaryOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::stationary_tol(),
            max_iterations: STATIONARY_MAX_ITERATIONS,
        }
    }
}

/// Stationary distribution by power iteration from uniform.
pub fn stationary<T: Real>(
    m: &TransitionMatrix<T>,
    options: StationaryOptions<T>,
) -> Result<MarginalDistribution<T>> {
    let ergodicity = check_ergodic(m);
    if !ergodicity.is_ergodic() {
        return Err(Error::NotErgodic {
            irreducible: ergodicity.irreducible,
            aperiodic: ergodicity.aperiodic,
        });
    }
    let n = m.n();
    let mut dist = vec![T::one() / T::from_usize(n).expect("state count representable"); n];
    for _ in 0..options.max_iterations {
        let mut next = m.apply(&dist);
        let total = compensated_sum(next.iter().copied());
        next.iter_mut().for_each(|p| *p = *p / total);
        let change = compensated_sum(dist.iter().zip(&next).map(|(&a, &b)| (a - b).abs()));
        dist = next;
        if change <= options.tol {
            return Ok(MarginalDistribution::from_raw(m.axis(), dist));
        }
    }
    Err(Error::NotConverged {
        iterations: options.max_iterations,
    })
}

/// Stationary distribution by solving `π (M − I) = 0, Σ π = 1` with
/// partially pivoted Gaussian elimination. Fallback for slow mixing.
pub fn stationary_direct<T: Real>(m: &TransitionMatrix<T>) -> Result<MarginalDistribution<T>> {
    let n = m.n();
    // Rows of A are equations: (Mᵀ − I) π = 0 with the last replaced by Σ π = 1.
    let mut a = vec![T::zero(); n * (n + 1)];
    let w = n + 1;
    for i in 0..n {
        for j in 0..n {
            a[i * w + j] = m.get(j, i) - if i == j { T::one() } else { T::zero() };
        }
    }
    for j in 0..n {
        a[(n - 1) * w + j] = T::one();
    }
    a[(n - 1) * w + n] = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * w + col]
                    .abs()
                    .partial_cmp(&a[r2 * w + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[pivot * w + col].abs() <= T::epsilon() {
            return Err(Error::NotErgodic {
                irreducible: false,
                aperiodic: true,
            });
        }
        if pivot != col {
            for j in 0..w {
                a.swap(col * w + j, pivot * w + j);
            }
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * w + col] / a[col * w + col];
            if factor != T::zero() {
                for j in col..w {
                    a[r * w + j] = a[r * w + j] - factor * a[col * w + j];
                }
            }
        }
    }
    let mut dist: Vec<T> = (0..n)
        .map(|i| (a[i * w + n] / a[i * w + i]).max(T::zero()))
        .collect();
    let total = compensated_sum(dist.iter().copied());
    dist.iter_mut().for_each(|p| *p = *p / total);
    Ok(MarginalDistribution::from_raw(m.axis(), dist))
}

/// [`COMPATIBILITY_TOL`], widened to the scalar's representation tolerance
/// for low-precision types.
fn compatibility_tol<T: Real>() -> T {
    T::lit(COMPATIBILITY_TOL).max(T::representation_tol())
}

/// The unique coupling consistent with both kernels:
/// `μ_ES = stationary(primal)`, `π_ES = P[y|x] · μ_ES`, then the second
/// disintegration is checked against `compatibility_tol`.
pub fn es_from_kernels<T: Real>(
    kernel_y_given_x: &ConditionalKernel<T>,
    kernel_x_given_y: &ConditionalKernel<T>,
) -> Result<JointMeasure<T>> {
    es_from_kernels_with(
        kernel_y_given_x,
        kernel_x_given_y,
        StationaryOptions::default(),
        compatibility_tol(),
    )
}

pub fn es_from_kernels_with<T: Real>(
    kernel_y_given_x: &ConditionalKernel<T>,
    kernel_x_given_y: &ConditionalKernel<T>,
    options: StationaryOptions<T>,
    compatibility_tol: T,
) -> Result<JointMeasure<T>> {
    check_directions(kernel_y_given_x, kernel_x_given_y)?;
    let primal = compose_kernels(kernel_y_given_x, kernel_x_given_y)?;
    let mu = match stationary(&primal, options) {
        Err(Error::NotConverged { .. }) => stationary_direct(&primal)?,
        other => other?,
    };
    let es = joint_from(kernel_y_given_x, &mu)?.renormalized();
    let violation = check_disintegration(&es, kernel_x_given_y);
    if !(violation <= compatibility_tol) {
        return Err(Error::CompatibilityViolation {
            max_violation: violation.as_f64(),
        });
    }
    Ok(es)
}

fn check_directions<T: Real>(
    kernel_y_given_x: &ConditionalKernel<T>,
    kernel_x_given_y: &ConditionalKernel<T>,
) -> Result<()> {
    if kernel_y_given_x.direction() != Direction::YGivenX
        || kernel_x_given_y.direction() != Direction::XGivenY
    {
        return Err(Error::InvalidKernel(
            "expected a y|x kernel followed by an x|y kernel".into(),
        ));
    }
    Ok(())
}

/// Knobs for building an [`AlternatingChainSpec`].
#[derive(Clone, Copy, Debug)]
pub struct SpecOptions<T> {
    pub stationary: StationaryOptions<T>,
    pub compatibility_tol: T,
    /// `None` selects [`default_burn_in_cap`].
    pub burn_in_cap: Option<usize>,
}

impl<T: Real> Default for SpecOptions<T> {
    fn default() -> Self {
        Self {
            stationary: StationaryOptions::default(),
            compatibility_tol: compatibility_tol(),
            burn_in_cap: None,
        }
    }
}

/// A compatible pair of kernels with the derived ES coupling and burn-in time.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingChainSpec<T> {
    support: SupportSet,
    kernel_y_given_x: ConditionalKernel<T>,
    kernel_x_given_y: ConditionalKernel<T>,
    es: JointMeasure<T>,
    burn_in: usize,
}

impl<T: Real> AlternatingChainSpec<T> {
    pub fn new(
        kernel_y_given_x: ConditionalKernel<T>,
        kernel_x_given_y: ConditionalKernel<T>,
    ) -> Result<Self> {
        Self::with_options(kernel_y_given_x, kernel_x_given_y, SpecOptions::default())
    }

    pub fn with_options(
        kernel_y_given_x: ConditionalKernel<T>,
        kernel_x_given_y: ConditionalKernel<T>,
        options: SpecOptions<T>,
    ) -> Result<Self> {
        check_directions(&kernel_y_given_x, &kernel_x_given_y)?;
        let primal = compose_kernels(&kernel_y_given_x, &kernel_x_given_y)?;
        let ergodicity = check_ergodic(&primal);
        if !ergodicity.is_ergodic() {
            return Err(Error::NotErgodic {
                irreducible: ergodicity.irreducible,
                aperiodic: ergodicity.aperiodic,
            });
        }
        if kernel_y_given_x.support() != kernel_x_given_y.support() {
            return Err(Error::SupportMismatch);
        }
        for k in [&kernel_y_given_x, &kernel_x_given_y] {
            if !k.is_positive_on_support() {
                return Err(Error::InvalidKernel(format!(
                    "{:?} kernel vanishes on a support pair",
                    k.direction()
                )));
            }
        }
        let es = es_from_kernels_with(
            &kernel_y_given_x,
            &kernel_x_given_y,
            options.stationary,
            options.compatibility_tol,
        )?;
        let support = kernel_y_given_x.support().clone();
        for axis in [Axis::X, Axis::Y] {
            if let Some(state) = es.axis_sums(axis).iter().position(|&m| !(m > T::zero())) {
                return Err(Error::ZeroMarginal { axis, state });
            }
        }
        let cap = options
            .burn_in_cap
            .unwrap_or_else(|| default_burn_in_cap(support.nx(), support.ny()));
        let burn_in = burn_in_from_kernels(&kernel_y_given_x, &kernel_x_given_y, cap)?;
        Ok(Self {
            support,
            kernel_y_given_x,
            kernel_x_given_y,
            es,
            burn_in,
        })
    }

    /// Assembles a spec without any checks. Intended for negative controls
    /// (corrupted kernels next to a stale coupling); see [`Self::validate`].
    pub fn from_parts_unchecked(
        kernel_y_given_x: ConditionalKernel<T>,
        kernel_x_given_y: ConditionalKernel<T>,
        es: JointMeasure<T>,
        burn_in: usize,
    ) -> Self {
        Self {
            support: kernel_y_given_x.support().clone(),
            kernel_y_given_x,
            kernel_x_given_y,
            es,
            burn_in,
        }
    }

    /// Re-checks the representation invariants: common support, kernels
    /// positive exactly on it, both disintegrations of the stored coupling
    /// within [`ES_DISINTEGRATION_TOL`], ergodic primal chain.
    pub fn validate(&self) -> Result<()> {
        if self.kernel_x_given_y.support() != &self.support || self.es.support() != &self.support {
            return Err(Error::SupportMismatch);
        }
        for k in [&self.kernel_y_given_x, &self.kernel_x_given_y] {
            if !k.is_positive_on_support() {
                return Err(Error::InvalidKernel(format!(
                    "{:?} kernel vanishes on a support pair",
                    k.direction()
                )));
            }
            let violation = check_disintegration(&self.es, k);
            if !(violation <= T::lit(ES_DISINTEGRATION_TOL).max(T::representation_tol())) {
                return Err(Error::CompatibilityViolation {
                    max_violation: violation.as_f64(),
                });
            }
        }
        let ergodicity = check_ergodic(&primal_kernel(self)?);
        if !ergodicity.is_ergodic() {
            return Err(Error::NotErgodic {
                irreducible: ergodicity.irreducible,
                aperiodic: ergodicity.aperiodic,
            });
        }
        Ok(())
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn kernel_y_given_x(&self) -> &ConditionalKernel<T> {
        &self.kernel_y_given_x
    }

    pub fn kernel_x_given_y(&self) -> &ConditionalKernel<T> {
        &self.kernel_x_given_y
    }

    /// Kernel applied at half-step `t` under the parity convention.
    pub fn kernel_at(&self, t: usize) -> &ConditionalKernel<T> {
        if t.is_multiple_of(2) {
            &self.kernel_y_given_x
        } else {
            &self.kernel_x_given_y
        }
    }

    pub fn es(&self) -> &JointMeasure<T> {
        &self.es
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn nx(&self) -> usize {
        self.support.nx()
    }

    pub fn ny(&self) -> usize {
        self.support.ny()
    }
}

/// Distribution of the product chain after `t` half-steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<T> {
    pub t: usize,
    pub pi: JointMeasure<T>,
}

/// Keeps the kernel's conditioning marginal and replaces the conditional:
/// the shared formula behind half-steps and analytic projections.
pub(crate) fn resample<T: Real>(
    kernel: &ConditionalKernel<T>,
    pi: &JointMeasure<T>,
) -> Result<JointMeasure<T>> {
    let m = marginal(pi, kernel.conditioning_axis())?;
    Ok(joint_from(kernel, &m)?.renormalized())
}

pub fn half_step<T: Real>(
    state: &ChainState<T>,
    spec: &AlternatingChainSpec<T>,
) -> Result<ChainState<T>> {
    Ok(ChainState {
        t: state.t + 1,
        pi: resample(spec.kernel_at(state.t), &state.pi)?,
    })
}

/// Re-homes a start distribution onto the spec's support, rejecting mass
/// outside it.
pub fn restrict_to_support<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi: &JointMeasure<T>,
) -> Result<JointMeasure<T>> {
    pi.ensure_view(View::Probability)?;
    if pi.nx() != spec.nx() || pi.ny() != spec.ny() {
        return Err(Error::ShapeMismatch(format!(
            "start is {}x{}, spec is {}x{}",
            pi.nx(),
            pi.ny(),
            spec.nx(),
            spec.ny()
        )));
    }
    for x in 0..pi.nx() {
        for y in 0..pi.ny() {
            if pi.get(x, y) != T::zero() && !spec.support().contains(x, y) {
                return Err(Error::InvalidMeasure(format!(
                    "start puts mass on ({x}, {y}) outside the support"
                )));
            }
        }
    }
    Ok(JointMeasure::from_raw(
        spec.support().clone(),
        pi.weights().to_vec(),
        View::Probability,
    ))
}

/// `steps` half-steps from `pi0`; returns `steps + 1` states including `pi0`.
pub fn run<T: Real>(
    spec: &AlternatingChainSpec<T>,
    pi0: &JointMeasure<T>,
    steps: usize,
) -> Result<Vec<ChainState<T>>> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(ChainState {
        t: 0,
        pi: restrict_to_support(spec, pi0)?,
    });
    for _ in 0..steps {
        let next = half_step(states.last().expect("nonempty"), spec)?;
        states.push(next);
    }
    Ok(states)
}

/// `M(x, x') = Σ_y P[y|x] P[x'|y]`.
pub fn primal_kernel<T: Real>(spec: &AlternatingChainSpec<T>) -> Result<TransitionMatrix<T>> {
    compose_kernels(spec.kernel_y_given_x(), spec.kernel_x_given_y())
}

/// `N(y, y') = Σ_x P[x|y] P[y'|x]`.
pub fn dual_kernel<T: Real>(spec: &AlternatingChainSpec<T>) -> Result<TransitionMatrix<T>> {
    compose_kernels(spec.kernel_x_given_y(), spec.kernel_y_given_x())
}

pub fn burn_in<T: Real>(spec: &AlternatingChainSpec<T>, cap: usize) -> Result<usize> {
    burn_in_from_kernels(spec.kernel_y_given_x(), spec.kernel_x_given_y(), cap)
}

/// Boolean support propagation. `t0` is the smallest half-step index at which
/// every Dirac start on the support has spread to the whole support.
///
/// After one even half-step a Dirac at `(x, y)` covers `{x} × row(x)`
/// regardless of `y`, so starts are grouped by `x`.
pub fn burn_in_from_kernels<T: Real>(
    kernel_y_given_x: &ConditionalKernel<T>,
    kernel_x_given_y: &ConditionalKernel<T>,
    cap: usize,
) -> Result<usize> {
    let support = kernel_y_given_x.support();
    let (nx, ny) = (support.nx(), support.ny());
    if support.len() == 1 {
        return Ok(0);
    }
    let target = support.mask();
    let step = |current: &[bool], t: usize| -> Vec<bool> {
        let mut next = vec![false; nx * ny];
        if t.is_multiple_of(2) {
            let alive: Vec<bool> = (0..nx)
                .map(|x| current[x * ny..(x + 1) * ny].contains(&true))
                .collect();
            for x in (0..nx).filter(|&x| alive[x]) {
                for y in 0..ny {
                    next[x * ny + y] = kernel_y_given_x.at(x, y) > T::zero();
                }
            }
        } else {
            let alive: Vec<bool> = (0..ny)
                .map(|y| (0..nx).any(|x| current[x * ny + y]))
                .collect();
            for y in (0..ny).filter(|&y| alive[y]) {
                for x in 0..nx {
                    next[x * ny + y] = kernel_x_given_y.at(x, y) > T::zero();
                }
            }
        }
        next
    };

    let mut worst = 0usize;
    for x0 in 0..nx {
        let y0 = support.row(x0).next().expect("support rows are nonempty");
        let mut current = vec![false; nx * ny];
        current[x0 * ny + y0] = true;
        let mut t = 0usize;
        let mut first_full = None;
        while t < cap {
            current = step(&current, t);
            t += 1;
            if current == target {
                first_full = Some(t);
                break;
            }
        }
        let Some(t_full) = first_full else {
            return Err(Error::CapExceeded {
                what: format!("burn-in from x = {x0}"),
                cap,
            });
        };
        // Full support must persist under both parities.
        let mut probe = current.clone();
        for k in 0..2 {
            probe = step(&probe, t_full + k);
            if probe != target {
                return Err(Error::CapExceeded {
                    what: format!("support stabilisation from x = {x0}"),
                    cap,
                });
            }
        }
        worst = worst.max(t_full);
    }
    Ok(worst)
}
