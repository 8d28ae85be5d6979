//! Reverse-KL projections onto the sets of joints with a prescribed
//! conditional, a numerical projection oracle that shares none of the
//! closed-form machinery, and the affine structure of the log-denormalized
//! sets.

use crate::divergences::{entropy_gradient, entropy_gradient_inverse, kl_slices};
use crate::dynamics::resample;
use crate::error::{Error, Result};
use crate::measures::{Axis, ConditionalKernel, Direction, JointMeasure, SupportSet, View};
use crate::scalar::{compensated_sum, CompensatedSum, Real};

fn require_full_support<T: Real>(
    pi: &JointMeasure<T>,
    kernel: &ConditionalKernel<T>,
) -> Result<JointMeasure<T>> {
    pi.ensure_view(View::Probability)?;
    let support = kernel.support();
    if pi.nx() != support.nx() || pi.ny() != support.ny() {
        return Err(Error::ShapeMismatch(
            "measure and kernel grids differ".into(),
        ));
    }
    for x in 0..support.nx() {
        for y in 0..support.ny() {
            let w = pi.get(x, y);
            if support.contains(x, y) != (w > T::zero()) {
                return Err(Error::DegenerateSupport);
            }
        }
    }
    Ok(JointMeasure::from_raw(
        support.clone(),
        pi.weights().to_vec(),
        View::Probability,
    ))
}

/// RKL projection onto the set of joints whose conditional along the
/// kernel's direction is the kernel: keeps `pi`'s conditioning marginal.
pub fn project<T: Real>(
    pi: &JointMeasure<T>,
    kernel: &ConditionalKernel<T>,
) -> Result<JointMeasure<T>> {
    let pi = require_full_support(pi, kernel)?;
    resample(kernel, &pi)
}

/// Projection onto S1 (joints with `y|x`-conditional `P[y|x]`).
pub fn project_s1<T: Real>(
    pi: &JointMeasure<T>,
    kernel_y_given_x: &ConditionalKernel<T>,
) -> Result<JointMeasure<T>> {
    expect_direction(kernel_y_given_x, Direction::YGivenX)?;
    project(pi, kernel_y_given_x)
}

/// Projection onto S2 (joints with `x|y`-conditional `P[x|y]`).
pub fn project_s2<T: Real>(
    pi: &JointMeasure<T>,
    kernel_x_given_y: &ConditionalKernel<T>,
) -> Result<JointMeasure<T>> {
    expect_direction(kernel_x_given_y, Direction::XGivenY)?;
    project(pi, kernel_x_given_y)
}

fn expect_direction<T: Real>(kernel: &ConditionalKernel<T>, d: Direction) -> Result<()> {
    if kernel.direction() == d {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!(
            "expected a {d:?} kernel, got {:?}",
            kernel.direction()
        )))
    }
}

/// Settings for [`oracle_project`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Max-norm of the projected-gradient mapping at termination.
    pub tol: f64,
    pub max_iterations: usize,
    /// Exhaustive grid search seeds the descent when the hull has at most
    /// this many vertices.
    pub grid_max_states: usize,
    pub grid_resolution: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 200_000,
            grid_max_states: 2,
            grid_resolution: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleOutcome<T> {
    pub joint: JointMeasure<T>,
    /// Convex-hull weights, one per conditioning state.
    pub weights: Vec<T>,
    /// `KL(pi ‖ joint)` at the returned point.
    pub objective: T,
    pub iterations: usize,
    /// Best grid point, when the grid stage ran.
    pub grid_weights: Option<Vec<T>>,
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_onto_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = T::zero();
    let mut theta = T::zero();
    for (i, &u) in sorted.iter().enumerate() {
        cumulative = cumulative + u;
        let candidate = (cumulative - T::one()) / T::from_usize(i + 1).expect("index");
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Convex-hull parameterization of the set with a fixed conditional: vertex
/// `a` is the joint with Dirac conditioning marginal at `a`.
struct Hull<'a, T> {
    kernel: &'a ConditionalKernel<T>,
    target: &'a [T],
    axis: Axis,
    ny: usize,
    n_vertices: usize,
}

impl<T: Real> Hull<'_, T> {
    fn vertex_of(&self, i: usize) -> usize {
        let (x, y) = (i / self.ny, i % self.ny);
        if self.axis == Axis::X {
            x
        } else {
            y
        }
    }

    fn point(&self, w: &[T]) -> Vec<T> {
        (0..self.target.len())
            .map(|i| {
                let (x, y) = (i / self.ny, i % self.ny);
                w[self.vertex_of(i)] * self.kernel.at(x, y)
            })
            .collect()
    }

    fn objective(&self, w: &[T]) -> T {
        match kl_slices(self.target, &self.point(w)) {
            Ok(d) => d.value().unwrap_or_else(T::infinity),
            Err(_) => T::infinity(),
        }
    }

    fn gradient(&self, w: &[T]) -> Vec<T> {
        let point = self.point(w);
        let mut grad = vec![CompensatedSum::new(); self.n_vertices];
        for (i, (&p, &q)) in self.target.iter().zip(&point).enumerate() {
            if p > T::zero() {
                let (x, y) = (i / self.ny, i % self.ny);
                grad[self.vertex_of(i)].add(-(p * self.kernel.at(x, y) / q));
            }
        }
        grad.iter().map(CompensatedSum::value).collect()
    }
}

fn simplex_grid(n: usize, steps: usize, prefix: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if prefix.len() + 1 == n {
        let used: usize = prefix.iter().sum();
        prefix.push(steps - used);
        out(prefix);
        prefix.pop();
        return;
    }
    let used: usize = prefix.iter().sum();
    for k in 0..=(steps - used) {
        prefix.push(k);
        simplex_grid(n, steps, prefix, out);
        prefix.pop();
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    compensated_sum(a.iter().zip(b).map(|(&u, &v)| u * v))
}

/// Minimizes `RKL(π_w, pi) = KL(pi ‖ π_w)` over the hull weights `w` with
/// spectral projected gradient descent and Armijo backtracking, optionally
/// seeded by an exhaustive grid. The closed-form projection is never used.
pub fn oracle_project<T: Real>(
    pi: &JointMeasure<T>,
    kernel: &ConditionalKernel<T>,
    options: &OracleOptions,
) -> Result<OracleOutcome<T>> {
    let pi = require_full_support(pi, kernel)?;
    let hull = Hull {
        kernel,
        target: pi.weights(),
        axis: kernel.conditioning_axis(),
        ny: pi.ny(),
        n_vertices: kernel.conditioning_len(),
    };
    let n = hull.n_vertices;
    let tol = T::lit(options.tol);

    let mut grid_weights = None;
    let mut w = vec![T::one() / T::from_usize(n).expect("count"); n];
    if n <= options.grid_max_states && n > 1 {
        let steps = (1.0 / options.grid_resolution).round() as usize;
        let scale = T::from_usize(steps).expect("grid steps");
        let mut best = (T::infinity(), w.clone());
        simplex_grid(n, steps, &mut Vec::with_capacity(n), &mut |ks| {
            let cand: Vec<T> = ks
                .iter()
                .map(|&k| T::from_usize(k).expect("grid index") / scale)
                .collect();
            let f = hull.objective(&cand);
            if f < best.0 {
                best = (f, cand);
            }
        });
        w = best.1.clone();
        grid_weights = Some(best.1);
    }

    let mut f = hull.objective(&w);
    let mut g = hull.gradient(&w);
    let mut alpha = T::one();
    let noise = T::lit(16.0) * T::epsilon();
    let mut iterations = 0;
    let converged = loop {
        let stepped: Vec<T> = w.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let mapping = project_onto_simplex(&stepped)
            .iter()
            .zip(&w)
            .fold(T::zero(), |m, (&p, &a)| m.max((p - a).abs()));
        if mapping <= tol {
            break true;
        }
        if iterations >= options.max_iterations {
            break false;
        }
        iterations += 1;

        let trial: Vec<T> = w.iter().zip(&g).map(|(&a, &b)| a - alpha * b).collect();
        let direction: Vec<T> = project_onto_simplex(&trial)
            .iter()
            .zip(&w)
            .map(|(&p, &a)| p - a)
            .collect();
        let slope = dot(&g, &direction);
        let mut lambda = T::one();
        let (w_new, f_new) = loop {
            let cand: Vec<T> = w
                .iter()
                .zip(&direction)
                .map(|(&a, &d)| (a + lambda * d).max(T::zero()))
                .collect();
            let fc = hull.objective(&cand);
            let allowance = T::lit(1e-4) * lambda * slope + noise * f.abs().max(T::one());
            if fc.is_finite() && fc <= f + allowance {
                break (cand, fc);
            }
            lambda = lambda * T::lit(0.5);
            if lambda < T::lit(1e-30) {
                return Err(Error::NotConverged { iterations });
            }
        };
        let g_new = hull.gradient(&w_new);
        let s: Vec<T> = w_new.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy > T::zero() {
            (dot(&s, &s) / sy).max(T::lit(1e-12)).min(T::lit(1e12))
        } else {
            T::lit(1e12)
        };
        w = w_new;
        f = f_new;
        g = g_new;
    };
    if !converged {
        return Err(Error::NotConverged { iterations });
    }
    if let Some(grid) = &grid_weights {
        let slack = T::lit(options.grid_resolution) * T::from_usize(n).expect("count");
        let gap = grid
            .iter()
            .zip(&w)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        if gap > slack {
            return Err(Error::NotConverged { iterations });
        }
    }
    let joint = JointMeasure::from_raw(pi.support().clone(), hull.point(&w), View::Probability);
    Ok(OracleOutcome {
        joint,
        weights: w,
        objective: f,
        iterations,
        grid_weights,
    })
}

pub fn oracle_project_s1<T: Real>(
    pi: &JointMeasure<T>,
    kernel_y_given_x: &ConditionalKernel<T>,
    options: &OracleOptions,
) -> Result<OracleOutcome<T>> {
    expect_direction(kernel_y_given_x, Direction::YGivenX)?;
    oracle_project(pi, kernel_y_given_x, options)
}

pub fn oracle_project_s2<T: Real>(
    pi: &JointMeasure<T>,
    kernel_x_given_y: &ConditionalKernel<T>,
    options: &OracleOptions,
) -> Result<OracleOutcome<T>> {
    expect_direction(kernel_x_given_y, Direction::XGivenY)?;
    oracle_project(pi, kernel_x_given_y, options)
}

/// Coordinate-wise logarithm of a strictly positive measure.
pub fn log_denormalize<T: Real>(pi: &JointMeasure<T>) -> Result<JointMeasure<T>> {
    entropy_gradient(pi)
}

/// Coordinate-wise exponential of a log-likelihood.
pub fn exp_denormalize<T: Real>(l: &JointMeasure<T>) -> Result<JointMeasure<T>> {
    entropy_gradient_inverse(l)
}

/// `offset + span(basis)` inside `R^T`, where the basis holds one block
/// indicator per conditioning state.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSubspace<T> {
    support: SupportSet,
    direction: Direction,
    offset: Vec<T>,
    basis: Vec<Vec<T>>,
}

impl<T: Real> AffineSubspace<T> {
    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Dense offset, `log P` on the support and zero elsewhere.
    pub fn offset(&self) -> &[T] {
        &self.offset
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `offset + Σ_a c_a · basis_a` as a log-likelihood.
    pub fn point(&self, coefficients: &[T]) -> Result<JointMeasure<T>> {
        if coefficients.len() != self.basis.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a {}-dimensional subspace",
                coefficients.len(),
                self.basis.len()
            )));
        }
        let mut v = self.offset.clone();
        for (c, b) in coefficients.iter().zip(&self.basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi = *vi + *c * *bi;
            }
        }
        JointMeasure::log_likelihood(self.support.clone(), v)
    }
}

/// The log-denormalized set `log S̃` for the kernel's conditional.
pub fn affine_subspace<T: Real>(kernel: &ConditionalKernel<T>) -> Result<AffineSubspace<T>> {
    let support = kernel.support().clone();
    let (nx, ny) = (support.nx(), support.ny());
    let axis = kernel.conditioning_axis();
    let mut offset = vec![T::zero(); nx * ny];
    let mut basis = vec![vec![T::zero(); nx * ny]; kernel.conditioning_len()];
    for (x, y) in support.pairs() {
        let p = kernel.at(x, y);
        if !(p > T::zero()) {
            return Err(Error::NonPositiveEntry { x, y });
        }
        let i = support.index(x, y);
        offset[i] = p.ln();
        let cond = if axis == Axis::X { x } else { y };
        basis[cond][i] = T::one();
    }
    Ok(AffineSubspace {
        support,
        direction: kernel.direction(),
        offset,
        basis,
    })
}

/// Euclidean distance from `l` to the affine subspace. The basis blocks are
/// disjoint, so the least-squares fit is the per-block mean of `l − offset`.
/// Returns `+∞` when supports differ.
pub fn affine_residual<T: Real>(l: &JointMeasure<T>, sub: &AffineSubspace<T>) -> T {
    if l.support() != sub.support() {
        return T::infinity();
    }
    let mut total = CompensatedSum::new();
    for block in sub.basis() {
        let members: Vec<usize> = block
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == T::one())
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let deltas: Vec<T> = members
            .iter()
            .map(|&i| l.weights()[i] - sub.offset()[i])
            .collect();
        let mean = compensated_sum(deltas.iter().copied())
            / T::from_usize(deltas.len()).expect("block size");
        for d in deltas {
            total.add((d - mean) * (d - mean));
        }
    }
    total.value().sqrt()
}
