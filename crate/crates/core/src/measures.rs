//! Finite product-space measure algebra: supports, joints, marginals and
//! conditional kernels on `X × Y`.
//!
//! Everything is stored densely in row-major `x * ny + y` order together with
//! an explicit support mask. Entries off the mask are hard zeros.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Real};

/// One of the two coordinates of the product space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("X"),
            Axis::Y => f.write_str("Y"),
        }
    }
}

/// Which coordinate a conditional kernel resamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `P[y|x]`: rows indexed by `x`.
    YGivenX,
    /// `P[x|y]`: rows indexed by `y`.
    XGivenY,
}

impl Direction {
    /// The axis the kernel conditions on (indexes its rows).
    pub fn conditioning_axis(self) -> Axis {
        match self {
            Direction::YGivenX => Axis::X,
            Direction::XGivenY => Axis::Y,
        }
    }

    pub fn conditioning_on(axis: Axis) -> Direction {
        match axis {
            Axis::X => Direction::YGivenX,
            Axis::Y => Direction::XGivenY,
        }
    }
}

/// Interpretation of the weights carried by a [`JointMeasure`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum View {
    /// Nonnegative, sums to one.
    Probability,
    /// Strictly positive on the support, any total mass.
    Denormalized,
    /// Arbitrary finite reals on the support; `exp` of it is denormalized.
    LogLikelihood,
}

impl View {
    pub fn name(self) -> &'static str {
        match self {
            View::Probability => "probability",
            View::Denormalized => "denormalized",
            View::LogLikelihood => "log-likelihood",
        }
    }
}

/// Maps `(conditioning state, other state)` to `(x, y)`.
#[inline]
pub(crate) fn oriented(axis: Axis, a: usize, b: usize) -> (usize, usize) {
    match axis {
        Axis::X => (a, b),
        Axis::Y => (b, a),
    }
}

/// The set `T ⊆ X × Y` carrying every measure of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SupportSet {
    nx: usize,
    ny: usize,
    mask: Vec<bool>,
}

impl SupportSet {
    /// Builds a support from a dense row-major mask. Every `x` and every `y`
    /// must occur in at least one pair.
    pub fn new(nx: usize, ny: usize, mask: Vec<bool>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidSupport(format!(
                "empty state space {nx}x{ny}"
            )));
        }
        if mask.len() != nx * ny {
            return Err(Error::InvalidSupport(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                nx * ny
            )));
        }
        let support = Self { nx, ny, mask };
        if let Some(x) = (0..nx).find(|&x| support.row(x).next().is_none()) {
            return Err(Error::InvalidSupport(format!(
                "x = {x} has no pair in the support"
            )));
        }
        if let Some(y) = (0..ny).find(|&y| support.col(y).next().is_none()) {
            return Err(Error::InvalidSupport(format!(
                "y = {y} has no pair in the support"
            )));
        }
        Ok(support)
    }

    pub fn full(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, vec![true; nx * ny])
    }

    pub fn from_pairs(nx: usize, ny: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mask = vec![false; nx * ny];
        for &(x, y) in pairs {
            if x >= nx || y >= ny {
                return Err(Error::InvalidSupport(format!(
                    "pair ({x}, {y}) outside {nx}x{ny}"
                )));
            }
            mask[x * ny + y] = true;
        }
        Self::new(nx, ny, mask)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn axis_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        x * self.ny + y
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.nx && y < self.ny && self.mask[x * self.ny + y]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of pairs in the support.
    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Support pairs in lexicographic `(x, y)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ny = self.ny;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(i, _)| (i / ny, i % ny))
    }

    /// `y` values paired with `x`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.ny).filter(move |&y| self.mask[x * self.ny + y])
    }

    /// `x` values paired with `y`.
    pub fn col(&self, y: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nx).filter(move |&x| self.mask[x * self.ny + y])
    }
}

/// Nonnegative weights on `X × Y`, supported within a [`SupportSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct JointMeasure<T> {
    support: SupportSet,
    weights: Vec<T>,
    view: View,
}

impl<T: Real> JointMeasure<T> {
    /// A probability measure: nonnegative on the support, zero off it, summing
    /// to one within the scalar's representation tolerance.
    pub fn probability(support: SupportSet, weights: Vec<T>) -> Result<Self> {
        Self::probability_with_tol(support, weights, T::representation_tol())
    }

    pub fn probability_with_tol(support: SupportSet, weights: Vec<T>, tol: T) -> Result<Self> {
        check_dense_len(&support, weights.len())?;
        for (i, (&w, &m)) in weights.iter().zip(support.mask()).enumerate() {
            let (x, y) = (i / support.ny(), i % support.ny());
            if !m && w != T::zero() {
                return Err(Error::InvalidMeasure(format!(
                    "nonzero weight at ({x}, {y}) outside the support"
                )));
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidMeasure(format!(
                    "weight at ({x}, {y}) is {w}"
                )));
            }
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            support,
            weights,
            view: View::Probability,
        })
    }

    /// An element of the positive cone over the support.
    pub fn denormalized(support: SupportSet, weights: Vec<T>) -> Result<Self> {
        check_dense_len(&support, weights.len())?;
        for (i, (&w, &m)) in weights.iter().zip(support.mask()).enumerate() {
            let (x, y) = (i / support.ny(), i % support.ny());
            if m && !(w.is_finite() && w > T::zero()) {
                return Err(Error::NonPositiveEntry { x, y });
            }
            if !m && w != T::zero() {
                return Err(Error::InvalidMeasure(format!(
                    "nonzero weight at ({x}, {y}) outside the support"
                )));
            }
        }
        Ok(Self {
            support,
            weights,
            view: View::Denormalized,
        })
    }

    /// Log-likelihood coordinates. Off-support entries are stored as zero and
    /// never read.
    pub fn log_likelihood(support: SupportSet, weights: Vec<T>) -> Result<Self> {
        check_dense_len(&support, weights.len())?;
        let mut weights = weights;
        for (i, (w, &m)) in weights.iter_mut().zip(support.mask()).enumerate() {
            if m && !w.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "log-likelihood at ({}, {}) is {}",
                    i / support.ny(),
                    i % support.ny(),
                    w
                )));
            }
            if !m {
                *w = T::zero();
            }
        }
        Ok(Self {
            support,
            weights,
            view: View::LogLikelihood,
        })
    }

    pub fn uniform(support: SupportSet) -> Self {
        let n = T::from_usize(support.len()).expect("support size representable");
        let w = T::one() / n;
        let weights = support
            .mask()
            .iter()
            .map(|&m| if m { w } else { T::zero() })
            .collect();
        Self {
            support,
            weights,
            view: View::Probability,
        }
    }

    pub fn dirac(support: SupportSet, x: usize, y: usize) -> Result<Self> {
        if !support.contains(x, y) {
            return Err(Error::InvalidMeasure(format!(
                "Dirac point ({x}, {y}) is not in the support"
            )));
        }
        let mut weights = vec![T::zero(); support.nx() * support.ny()];
        weights[support.index(x, y)] = T::one();
        Ok(Self {
            support,
            weights,
            view: View::Probability,
        })
    }

    /// Wraps weights that are valid by construction.
    pub(crate) fn from_raw(support: SupportSet, weights: Vec<T>, view: View) -> Self {
        debug_assert_eq!(weights.len(), support.nx() * support.ny());
        Self {
            support,
            weights,
            view,
        }
    }

    #[inline]
    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    #[inline]
    pub fn view(&self) -> View {
        self.view
    }

    /// Dense row-major weights, zero off the support.
    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.weights[self.support.index(x, y)]
    }

    pub fn nx(&self) -> usize {
        self.support.nx()
    }

    pub fn ny(&self) -> usize {
        self.support.ny()
    }

    /// `(x, y, weight)` over the support in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.support
            .pairs()
            .map(move |(x, y)| (x, y, self.weights[self.support.index(x, y)]))
    }

    /// `π(T)`, summed over the support only.
    pub fn total_mass(&self) -> T {
        compensated_sum(self.iter().map(|(_, _, w)| w))
    }

    /// True when every support pair carries strictly positive weight.
    pub fn has_full_support(&self) -> bool {
        self.iter().all(|(_, _, w)| w > T::zero())
    }

    /// Divides by the total mass, yielding a probability view.
    pub fn renormalized(&self) -> Self {
        let total = compensated_sum(self.weights.iter().copied());
        let weights = self.weights.iter().map(|&w| w / total).collect();
        Self::from_raw(self.support.clone(), weights, View::Probability)
    }

    /// `c · π` as a denormalized measure.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::NonPositiveInput(c.as_f64()));
        }
        let weights = self.weights.iter().map(|&w| w * c).collect();
        Self::denormalized(self.support.clone(), weights)
    }

    /// Max-norm distance between the dense weight vectors.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.support.nx() != other.support.nx() || self.support.ny() != other.support.ny() {
            return T::infinity();
        }
        self.weights
            .iter()
            .zip(&other.weights)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub(crate) fn ensure_view(&self, expected: View) -> Result<()> {
        if self.view == expected {
            Ok(())
        } else {
            Err(Error::ViewMismatch {
                expected: expected.name(),
                found: self.view.name(),
            })
        }
    }

    /// Sums along the other coordinate, regardless of view.
    pub(crate) fn axis_sums(&self, axis: Axis) -> Vec<T> {
        let (nx, ny) = (self.nx(), self.ny());
        match axis {
            Axis::X => (0..nx)
                .map(|x| compensated_sum(self.weights[x * ny..(x + 1) * ny].iter().copied()))
                .collect(),
            Axis::Y => (0..ny)
                .map(|y| compensated_sum((0..nx).map(|x| self.weights[x * ny + y])))
                .collect(),
        }
    }
}

fn check_dense_len(support: &SupportSet, len: usize) -> Result<()> {
    let expected = support.nx() * support.ny();
    if len != expected {
        return Err(Error::ShapeMismatch(format!(
            "{len} weights for a {}x{} grid",
            support.nx(),
            support.ny()
        )));
    }
    Ok(())
}

/// A probability vector on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalDistribution<T> {
    axis: Axis,
    weights: Vec<T>,
}

impl<T: Real> MarginalDistribution<T> {
    pub fn new(axis: Axis, weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty marginal".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < T::zero()) {
            return Err(Error::InvalidMeasure(format!("marginal weight {w}")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - T::one()).abs() > T::representation_tol() {
            return Err(Error::InvalidMeasure(format!(
                "marginal sums to {total}, not 1"
            )));
        }
        Ok(Self { axis, weights })
    }

    pub(crate) fn from_raw(axis: Axis, weights: Vec<T>) -> Self {
        Self { axis, weights }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.weights[i]
    }
}

/// A row-stochastic family `P[y|x]` or `P[x|y]` restricted to a support.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalKernel<T> {
    direction: Direction,
    support: SupportSet,
    /// conditioning_len × other_len, row-major.
    rows: Vec<T>,
}

impl<T: Real> ConditionalKernel<T> {
    /// Validates row-stochasticity (within the representation tolerance),
    /// nonnegativity and exact zeros off the support.
    pub fn new(direction: Direction, support: SupportSet, rows: Vec<Vec<T>>) -> Result<Self> {
        let axis = direction.conditioning_axis();
        let n_cond = support.axis_len(axis);
        let n_other = support.axis_len(axis.other());
        if rows.len() != n_cond {
            return Err(Error::ShapeMismatch(format!(
                "kernel has {} rows, expected {n_cond}",
                rows.len()
            )));
        }
        let mut flat = Vec::with_capacity(n_cond * n_other);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != n_other {
                return Err(Error::ShapeMismatch(format!(
                    "kernel row {a} has {} entries, expected {n_other}",
                    row.len()
                )));
            }
            for (b, &p) in row.iter().enumerate() {
                let (x, y) = oriented(axis, a, b);
                if !p.is_finite() || p < T::zero() {
                    return Err(Error::InvalidKernel(format!("entry ({x}, {y}) is {p}")));
                }
                if !support.contains(x, y) && p != T::zero() {
                    return Err(Error::InvalidKernel(format!(
                        "nonzero entry at ({x}, {y}) outside the support"
                    )));
                }
            }
            let total = compensated_sum(row.iter().copied());
            if (total - T::one()).abs() > T::representation_tol() {
                return Err(Error::InvalidKernel(format!("row {a} sums to {total}")));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            direction,
            support,
            rows: flat,
        })
    }

    pub(crate) fn from_raw(direction: Direction, support: SupportSet, rows: Vec<T>) -> Self {
        Self {
            direction,
            support,
            rows,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn conditioning_axis(&self) -> Axis {
        self.direction.conditioning_axis()
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn conditioning_len(&self) -> usize {
        self.support.axis_len(self.conditioning_axis())
    }

    pub fn other_len(&self) -> usize {
        self.support.axis_len(self.conditioning_axis().other())
    }

    /// Probability of `other` given the conditioning state `cond`.
    #[inline]
    pub fn get(&self, cond: usize, other: usize) -> T {
        self.rows[cond * self.other_len() + other]
    }

    /// Kernel value at the product-space pair `(x, y)`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> T {
        match self.direction {
            Direction::YGivenX => self.get(x, y),
            Direction::XGivenY => self.get(y, x),
        }
    }

    pub fn row(&self, cond: usize) -> &[T] {
        let n = self.other_len();
        &self.rows[cond * n..(cond + 1) * n]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.conditioning_len())
            .map(|a| self.row(a).to_vec())
            .collect()
    }

    /// True when the kernel is strictly positive on every support pair.
    pub fn is_positive_on_support(&self) -> bool {
        self.support.pairs().all(|(x, y)| self.at(x, y) > T::zero())
    }

    /// Moves `amount` of probability from `from` to `to` within row `cond`.
    /// The result stays row-stochastic; entries may leave the support.
    pub fn with_transfer(&self, cond: usize, from: usize, to: usize, amount: T) -> Self {
        let mut out = self.clone();
        let n = self.other_len();
        out.rows[cond * n + from] = out.rows[cond * n + from] - amount;
        out.rows[cond * n + to] = out.rows[cond * n + to] + amount;
        out
    }
}

/// Marginal of a probability measure on `axis`.
pub fn marginal<T: Real>(pi: &JointMeasure<T>, axis: Axis) -> Result<MarginalDistribution<T>> {
    pi.ensure_view(View::Probability)?;
    Ok(MarginalDistribution::from_raw(axis, pi.axis_sums(axis)))
}

/// Disintegrates `pi` into the kernel of the requested direction.
pub fn conditional<T: Real>(
    pi: &JointMeasure<T>,
    direction: Direction,
) -> Result<ConditionalKernel<T>> {
    pi.ensure_view(View::Probability)?;
    let axis = direction.conditioning_axis();
    let sums = pi.axis_sums(axis);
    if let Some(state) = sums.iter().position(|&m| m <= T::zero()) {
        return Err(Error::ZeroMarginal { axis, state });
    }
    let support = pi.support().clone();
    let n_other = support.axis_len(axis.other());
    let mut rows = Vec::with_capacity(sums.len() * n_other);
    for (a, &mass) in sums.iter().enumerate() {
        for b in 0..n_other {
            let (x, y) = oriented(axis, a, b);
            rows.push(pi.get(x, y) / mass);
        }
    }
    Ok(ConditionalKernel::from_raw(direction, support, rows))
}

/// Couples a kernel with a marginal on its conditioning axis:
/// `result(x, y) = kernel[cond][other] · marg[cond]`.
pub fn joint_from<T: Real>(
    kernel: &ConditionalKernel<T>,
    marg: &MarginalDistribution<T>,
) -> Result<JointMeasure<T>> {
    let axis = kernel.conditioning_axis();
    if marg.axis() != axis {
        return Err(Error::AxisMismatch {
            kernel: axis,
            marginal: marg.axis(),
        });
    }
    if marg.len() != kernel.conditioning_len() {
        return Err(Error::ShapeMismatch(format!(
            "marginal has {} states, kernel conditions on {}",
            marg.len(),
            kernel.conditioning_len()
        )));
    }
    let support = kernel.support().clone();
    let (nx, ny) = (support.nx(), support.ny());
    let mut weights = vec![T::zero(); nx * ny];
    for x in 0..nx {
        for y in 0..ny {
            let cond = if axis == Axis::X { x } else { y };
            weights[x * ny + y] = kernel.at(x, y) * marg.get(cond);
        }
    }
    Ok(JointMeasure::from_raw(support, weights, View::Probability))
}

/// `max |pi(x,y) − kernel(x,y) · marginal(cond)|` over the whole grid.
/// Returns `+∞` when the grids differ in shape.
pub fn check_disintegration<T: Real>(pi: &JointMeasure<T>, kernel: &ConditionalKernel<T>) -> T {
    let (nx, ny) = (pi.nx(), pi.ny());
    if kernel.support().nx() != nx || kernel.support().ny() != ny {
        return T::infinity();
    }
    let axis = kernel.conditioning_axis();
    let sums = pi.axis_sums(axis);
    let mut worst = T::zero();
    for x in 0..nx {
        for y in 0..ny {
            let cond = if axis == Axis::X { x } else { y };
            let v = (pi.get(x, y) - kernel.at(x, y) * sums[cond]).abs();
            worst = worst.max(v);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid_2x2(w: [f64; 4]) -> JointMeasure<f64> {
        JointMeasure::probability(SupportSet::full(2, 2).unwrap(), w.to_vec()).unwrap()
    }

    #[test]
    fn support_requires_nonempty_rows_and_columns() {
        assert!(SupportSet::from_pairs(2, 2, &[(0, 0), (0, 1)]).is_err());
        assert!(SupportSet::from_pairs(2, 2, &[(0, 0), (1, 0)]).is_err());
        assert!(SupportSet::from_pairs(2, 2, &[(0, 0), (1, 1)]).is_ok());
        assert!(SupportSet::full(0, 3).is_err());
        assert!(SupportSet::from_pairs(2, 2, &[(0, 0), (2, 1)]).is_err());
    }

    #[test]
    fn support_pairs_are_lexicographic() {
        let s = SupportSet::from_pairs(2, 3, &[(1, 2), (0, 1), (1, 0)]).unwrap();
        assert_eq!(s.pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 0), (1, 2)]);
        assert_eq!(s.row(1).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(s.col(1).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn probability_view_is_validated() {
        let s = SupportSet::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert!(JointMeasure::probability(s.clone(), vec![0.5, 0.0, 0.0, 0.5]).is_ok());
        assert!(JointMeasure::probability(s.clone(), vec![0.5, 0.1, 0.0, 0.4]).is_err());
        assert!(JointMeasure::probability(s.clone(), vec![0.6, 0.0, 0.0, 0.5]).is_err());
        assert!(JointMeasure::probability(s.clone(), vec![1.5, 0.0, 0.0, -0.5]).is_err());
        assert!(JointMeasure::denormalized(s.clone(), vec![2.0, 0.0, 0.0, 0.0]).is_err());
        assert!(JointMeasure::denormalized(s, vec![2.0, 0.0, 0.0, 3.0]).is_ok());
    }

    #[test]
    fn marginal_examples() {
        let u = JointMeasure::<f64>::uniform(SupportSet::full(2, 2).unwrap());
        assert_eq!(marginal(&u, Axis::X).unwrap().weights(), &[0.5, 0.5]);

        let d = JointMeasure::<f64>::dirac(SupportSet::full(2, 3).unwrap(), 0, 0).unwrap();
        assert_eq!(marginal(&d, Axis::Y).unwrap().weights(), &[1.0, 0.0, 0.0]);

        let pi = grid_2x2([0.1, 0.2, 0.3, 0.4]);
        let m = marginal(&pi, Axis::X).unwrap();
        assert_abs_diff_eq!(m.get(0), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(1), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn marginal_rejects_log_view() {
        let s = SupportSet::full(1, 2).unwrap();
        let l = JointMeasure::log_likelihood(s, vec![-1.0, 3.0]).unwrap();
        assert!(matches!(
            marginal(&l, Axis::X),
            Err(Error::ViewMismatch { .. })
        ));
    }

    #[test]
    fn conditional_examples() {
        let u = JointMeasure::<f64>::uniform(SupportSet::full(2, 2).unwrap());
        let k = conditional(&u, Direction::YGivenX).unwrap();
        assert_eq!(k.rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);

        let d = JointMeasure::<f64>::dirac(SupportSet::full(2, 2).unwrap(), 0, 0).unwrap();
        assert_eq!(
            conditional(&d, Direction::YGivenX),
            Err(Error::ZeroMarginal {
                axis: Axis::X,
                state: 1
            })
        );

        let pi = grid_2x2([0.1, 0.2, 0.3, 0.4]);
        let k = conditional(&pi, Direction::YGivenX).unwrap();
        assert_abs_diff_eq!(k.get(0, 0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.get(0, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.get(1, 0), 3.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.get(1, 1), 4.0 / 7.0, epsilon = 1e-15);

        let kx = conditional(&pi, Direction::XGivenY).unwrap();
        assert_abs_diff_eq!(kx.get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(kx.at(1, 0), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn joint_from_examples() {
        let s = SupportSet::full(2, 2).unwrap();
        let rows = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let k = ConditionalKernel::new(Direction::YGivenX, s.clone(), rows).unwrap();

        let half = MarginalDistribution::new(Axis::X, vec![0.5, 0.5]).unwrap();
        assert_eq!(joint_from(&k, &half).unwrap().weights(), &[0.25; 4]);

        let point = MarginalDistribution::new(Axis::X, vec![1.0, 0.0]).unwrap();
        assert_eq!(
            joint_from(&k, &point).unwrap().weights(),
            &[0.5, 0.5, 0.0, 0.0]
        );

        let diag = SupportSet::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let k = ConditionalKernel::new(
            Direction::YGivenX,
            diag,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let m = MarginalDistribution::new(Axis::X, vec![0.3, 0.7]).unwrap();
        assert_eq!(joint_from(&k, &m).unwrap().weights(), &[0.3, 0.0, 0.0, 0.7]);

        let wrong = MarginalDistribution::new(Axis::Y, vec![0.3, 0.7]).unwrap();
        assert!(matches!(
            joint_from(&k, &wrong),
            Err(Error::AxisMismatch { .. })
        ));
    }

    #[test]
    fn joint_from_conditions_on_y() {
        let pi = grid_2x2([0.1, 0.2, 0.3, 0.4]);
        let k = conditional(&pi, Direction::XGivenY).unwrap();
        let nu = marginal(&pi, Axis::Y).unwrap();
        let back = joint_from(&k, &nu).unwrap();
        assert!(back.max_abs_diff(&pi) < 1e-15);
    }

    #[test]
    fn disintegration_examples() {
        let u = JointMeasure::<f64>::uniform(SupportSet::full(2, 2).unwrap());
        let diag = ConditionalKernel::new(
            Direction::YGivenX,
            SupportSet::full(2, 2).unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(check_disintegration(&u, &diag), 0.25, epsilon = 1e-15);

        let pi = grid_2x2([0.1, 0.2, 0.3, 0.4]);
        for d in [Direction::YGivenX, Direction::XGivenY] {
            let k = conditional(&pi, d).unwrap();
            assert!(check_disintegration(&pi, &k) <= 1e-15);
        }
    }

    #[test]
    fn kernel_validation() {
        let s = SupportSet::from_pairs(2, 2, &[(0, 0), (1, 0), (1, 1)]).unwrap();
        // off-support mass at (0, 1)
        let bad = ConditionalKernel::new(
            Direction::YGivenX,
            s.clone(),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        );
        assert!(matches!(bad, Err(Error::InvalidKernel(_))));
        let unnormalized = ConditionalKernel::new(
            Direction::YGivenX,
            s.clone(),
            vec![vec![1.0, 0.0], vec![0.5, 0.6]],
        );
        assert!(unnormalized.is_err());
        let ok =
            ConditionalKernel::new(Direction::XGivenY, s, vec![vec![0.5, 0.5], vec![0.0, 1.0]])
                .unwrap();
        assert_eq!(ok.at(1, 1), 1.0);
        assert_eq!(ok.at(0, 0), 0.5);
    }

    #[test]
    fn f32_instantiation_works() {
        let pi = JointMeasure::<f32>::probability(
            SupportSet::full(2, 2).unwrap(),
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let k = conditional(&pi, Direction::YGivenX).unwrap();
        let back = joint_from(&k, &marginal(&pi, Axis::X).unwrap()).unwrap();
        assert!(back.max_abs_diff(&pi) < 1e-6);
    }

    fn arb_joint() -> impl Strategy<Value = JointMeasure<f64>> {
        (1usize..5, 1usize..5)
            .prop_flat_map(|(nx, ny)| {
                (
                    Just(nx),
                    Just(ny),
                    proptest::collection::vec(0.01f64..1.0, nx * ny),
                )
            })
            .prop_map(|(nx, ny, w)| {
                let total: f64 = w.iter().sum();
                let w = w.into_iter().map(|v| v / total).collect();
                JointMeasure::probability(SupportSet::full(nx, ny).unwrap(), w).unwrap()
            })
    }

    proptest! {
        #[test]
        fn conditional_round_trip(pi in arb_joint()) {
            for d in [Direction::YGivenX, Direction::XGivenY] {
                let k = conditional(&pi, d).unwrap();
                let m = marginal(&pi, d.conditioning_axis()).unwrap();
                let back = joint_from(&k, &m).unwrap();
                prop_assert!(back.max_abs_diff(&pi) <= 1e-14);
                let m2 = marginal(&back, d.conditioning_axis()).unwrap();
                for (a, b) in m.weights().iter().zip(m2.weights()) {
                    prop_assert!((a - b).abs() <= 1e-14);
                }
            }
        }

        #[test]
        fn marginals_sum_to_one(pi in arb_joint()) {
            for axis in [Axis::X, Axis::Y] {
                let m = marginal(&pi, axis).unwrap();
                let s: f64 = m.weights().iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }
}
