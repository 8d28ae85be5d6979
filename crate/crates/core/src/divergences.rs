//! KL and reverse-KL divergences, the entropy Bregman divergence on
//! denormalized measures, its Fenchel dual on log-likelihoods, and the two
//! decompositions (scalar + KL, and the KL chain rule).

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::measures::{Axis, JointMeasure, MarginalDistribution, View};
use crate::scalar::{compensated_sum, xlogxy, CompensatedSum, Real};

/// Nonnegative extended real. `Infinite` is exact: it never enters a float sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Divergence<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Divergence<T> {
    pub fn is_finite(self) -> bool {
        matches!(self, Divergence::Finite(_))
    }

    pub fn value(self) -> Option<T> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    /// Float view with `+∞` for the infinite variant. Only for reporting.
    pub fn to_f64(self) -> f64 {
        match self {
            Divergence::Finite(v) => v.as_f64(),
            Divergence::Infinite => f64::INFINITY,
        }
    }
}

impl<T: Real> PartialOrd for Divergence<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Divergence::Finite(a), Divergence::Finite(b)) => a.partial_cmp(b),
            (Divergence::Finite(_), Divergence::Infinite) => Some(Ordering::Less),
            (Divergence::Infinite, Divergence::Finite(_)) => Some(Ordering::Greater),
            (Divergence::Infinite, Divergence::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl<T: Real> fmt::Display for Divergence<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(v) => write!(f, "{:.16e}", v.as_f64()),
            Divergence::Infinite => f.write_str("inf"),
        }
    }
}

/// Anything that is a probability vector over a fixed index set.
pub trait ProbabilityVector<T: Real> {
    /// Dense masses; index sets must agree for two vectors to be compared.
    fn masses(&self) -> &[T];
    fn shape_matches(&self, other: &Self) -> bool;
    fn ensure_probability(&self) -> Result<()> {
        Ok(())
    }
}

impl<T: Real> ProbabilityVector<T> for JointMeasure<T> {
    fn masses(&self) -> &[T] {
        self.weights()
    }
    fn shape_matches(&self, other: &Self) -> bool {
        self.nx() == other.nx() && self.ny() == other.ny()
    }
    fn ensure_probability(&self) -> Result<()> {
        self.ensure_view(View::Probability)
    }
}

impl<T: Real> ProbabilityVector<T> for MarginalDistribution<T> {
    fn masses(&self) -> &[T] {
        self.weights()
    }
    fn shape_matches(&self, other: &Self) -> bool {
        self.axis() == other.axis() && self.len() == other.len()
    }
}

/// `Σ p log(p/q)` over two equally indexed slices, `0 · log 0 = 0`.
pub fn kl_slices<T: Real>(p: &[T], q: &[T]) -> Result<Divergence<T>> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} entries",
            p.len(),
            q.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for (&a, &b) in p.iter().zip(q) {
        if a > T::zero() {
            if b <= T::zero() {
                return Ok(Divergence::Infinite);
            }
            acc.add(xlogxy(a, b));
        }
    }
    Ok(Divergence::Finite(acc.value().max(T::zero())))
}

/// Kullback-Leibler divergence `KL(p ‖ q)`.
pub fn kl<T: Real, P: ProbabilityVector<T>>(p: &P, q: &P) -> Result<Divergence<T>> {
    if !p.shape_matches(q) {
        return Err(Error::ShapeMismatch(
            "kl arguments live on different index sets".into(),
        ));
    }
    p.ensure_probability()?;
    q.ensure_probability()?;
    kl_slices(p.masses(), q.masses())
}

/// Reverse KL: `RKL(p, q) = KL(q ‖ p)`.
pub fn rkl<T: Real, P: ProbabilityVector<T>>(p: &P, q: &P) -> Result<Divergence<T>> {
    kl(q, p)
}

/// Bregman divergence of the scalar entropy `h(x) = x log x − x`.
pub fn b_h<T: Real>(a: T, b: T) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::NonPositiveInput(a.as_f64()));
    }
    if !(b > T::zero()) {
        return Err(Error::NonPositiveInput(b.as_f64()));
    }
    Ok(a * (a / b).ln() - a + b)
}

fn ensure_positive_pair<T: Real>(pi: &JointMeasure<T>, rho: &JointMeasure<T>) -> Result<()> {
    if pi.support() != rho.support() {
        return Err(Error::SupportMismatch);
    }
    for m in [pi, rho] {
        if m.view() == View::LogLikelihood {
            return Err(Error::ViewMismatch {
                expected: View::Denormalized.name(),
                found: m.view().name(),
            });
        }
        if let Some((x, y, _)) = m.iter().find(|&(_, _, w)| !(w > T::zero())) {
            return Err(Error::NonPositiveEntry { x, y });
        }
    }
    Ok(())
}

/// `B_H(π, ρ) = Σ_T π log(π/ρ) − π + ρ` for strictly positive measures on the
/// same support. Each summand is itself nonnegative.
pub fn bregman_entropy<T: Real>(pi: &JointMeasure<T>, rho: &JointMeasure<T>) -> Result<T> {
    ensure_positive_pair(pi, rho)?;
    let terms = pi
        .iter()
        .zip(rho.iter())
        .map(|((_, _, a), (_, _, b))| xlogxy(a, b) - a + b);
    Ok(compensated_sum(terms).max(T::zero()))
}

/// Splits `B_H(π, ρ)` into the total-mass part `b_h(π(T), ρ(T))` and the
/// shape part `π(T) · KL(π/π(T) ‖ ρ/ρ(T))`.
pub fn decompose_bregman_entropy<T: Real>(
    pi: &JointMeasure<T>,
    rho: &JointMeasure<T>,
) -> Result<(T, T)> {
    ensure_positive_pair(pi, rho)?;
    let mass_pi = pi.total_mass();
    let mass_rho = rho.total_mass();
    let scalar_part = b_h(mass_pi, mass_rho)?;
    let p: Vec<T> = pi.iter().map(|(_, _, w)| w / mass_pi).collect();
    let q: Vec<T> = rho.iter().map(|(_, _, w)| w / mass_rho).collect();
    let shape = kl_slices(&p, &q)?
        .value()
        .expect("positive measures are mutually absolutely continuous");
    Ok((scalar_part, mass_pi * shape))
}

/// Dual Bregman divergence on log-likelihoods,
/// `B_{H*}(l1, l2) = Σ_T e^{l1} − e^{l2} − e^{l2}(l1 − l2)`.
pub fn bregman_dual<T: Real>(l1: &JointMeasure<T>, l2: &JointMeasure<T>) -> Result<T> {
    if l1.support() != l2.support() {
        return Err(Error::ShapeMismatch(
            "log-likelihoods live on different supports".into(),
        ));
    }
    let terms = l1.iter().zip(l2.iter()).map(|((_, _, a), (_, _, b))| {
        let (ea, eb) = (a.exp(), b.exp());
        ea - eb - eb * (a - b)
    });
    Ok(compensated_sum(terms).max(T::zero()))
}

/// Entropy `H(π) = Σ_T π log π − π` on the positive cone.
pub fn entropy<T: Real>(pi: &JointMeasure<T>) -> Result<T> {
    if let Some((x, y, _)) = pi.iter().find(|&(_, _, w)| w < T::zero()) {
        return Err(Error::NonPositiveEntry { x, y });
    }
    Ok(compensated_sum(
        pi.iter().map(|(_, _, w)| xlogxy(w, T::one()) - w),
    ))
}

/// `∇H(π)`: the coordinate-wise logarithm on the support.
pub fn entropy_gradient<T: Real>(pi: &JointMeasure<T>) -> Result<JointMeasure<T>> {
    if pi.view() == View::LogLikelihood {
        return Err(Error::ViewMismatch {
            expected: View::Denormalized.name(),
            found: pi.view().name(),
        });
    }
    let mut logs = vec![T::zero(); pi.weights().len()];
    for (x, y, w) in pi.iter() {
        if !(w > T::zero()) {
            return Err(Error::NonPositiveEntry { x, y });
        }
        logs[pi.support().index(x, y)] = w.ln();
    }
    JointMeasure::log_likelihood(pi.support().clone(), logs)
}

/// `∇H*(l)`: the coordinate-wise exponential, landing in the positive cone.
pub fn entropy_gradient_inverse<T: Real>(l: &JointMeasure<T>) -> Result<JointMeasure<T>> {
    l.ensure_view(View::LogLikelihood)?;
    let mut w = vec![T::zero(); l.weights().len()];
    for (x, y, v) in l.iter() {
        w[l.support().index(x, y)] = v.exp();
    }
    JointMeasure::denormalized(l.support().clone(), w)
}

/// KL chain rule along `axis`: returns `(KL(p_a ‖ q_a), Σ_a p_a(a) KL(p[·|a] ‖ q[·|a]))`.
pub fn kl_chain_rule<T: Real>(
    p: &JointMeasure<T>,
    q: &JointMeasure<T>,
    axis: Axis,
) -> Result<(T, T)> {
    if !p.shape_matches(q) {
        return Err(Error::ShapeMismatch(
            "chain rule arguments differ in shape".into(),
        ));
    }
    p.ensure_view(View::Probability)?;
    q.ensure_view(View::Probability)?;
    let (nx, ny) = (p.nx(), p.ny());
    for x in 0..nx {
        for y in 0..ny {
            if p.get(x, y) > T::zero() && !(q.get(x, y) > T::zero()) {
                return Err(Error::AbsoluteContinuityViolation { x, y });
            }
        }
    }
    let pa = p.axis_sums(axis);
    let qa = q.axis_sums(axis);
    let marginal_term = kl_slices(&pa, &qa)?
        .value()
        .expect("absolute continuity checked above");

    let n_other = p.support().axis_len(axis.other());
    let mut conditional_term = CompensatedSum::new();
    for (a, (&mp, &mq)) in pa.iter().zip(&qa).enumerate() {
        if !(mp > T::zero()) {
            continue;
        }
        let mut row = CompensatedSum::new();
        for b in 0..n_other {
            let (x, y) = crate::measures::oriented(axis, a, b);
            row.add(xlogxy(p.get(x, y) / mp, q.get(x, y) / mq));
        }
        conditional_term.add(mp * row.value());
    }
    Ok((marginal_term, conditional_term.value()))
}
