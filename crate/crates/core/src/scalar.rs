//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the measure algebra is generic over (`f32` or `f64`).
///
/// Besides the arithmetic, each scalar carries the default tolerances used by
/// representation checks. They are tight for `f64` and loosened to the
/// precision that `f32` can actually deliver.
pub trait Real: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Tolerance for "sums to one" and row-stochasticity checks.
    fn representation_tol() -> Self;
    /// Tolerance for exact algebraic round trips (joint -> conditional -> joint).
    fn round_trip_tol() -> Self;
    /// L1 convergence threshold for stationary power iteration.
    fn stationary_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which never happens for finite literals and the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn representation_tol() -> Self {
        1e-12
    }
    fn round_trip_tol() -> Self {
        1e-14
    }
    fn stationary_tol() -> Self {
        1e-13
    }
}

impl Real for f32 {
    fn representation_tol() -> Self {
        1e-5
    }
    fn round_trip_tol() -> Self {
        1e-6
    }
    fn stationary_tol() -> Self {
        1e-6
    }
}

/// Neumaier-compensated accumulator. Terms are added in call order, so a fixed
/// iteration order gives bit-identical results across runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, term: T) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation = self.compensation + ((self.sum - t) + term);
        } else {
            self.compensation = self.compensation + ((term - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(terms: I) -> T {
    let mut acc = CompensatedSum::new();
    for term in terms {
        acc.add(term);
    }
    acc.value()
}

/// `x * ln(x / y)` with the convention `0 * anything = 0`.
#[inline]
pub(crate) fn xlogxy<T: Real>(x: T, y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * (x / y).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let terms = [1.0f64, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(terms), 2.0);
        let naive: f64 = terms.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn zero_times_log_zero_is_zero() {
        assert_eq!(xlogxy(0.0f64, 0.0), 0.0);
        assert_eq!(xlogxy(0.0f64, 1.0), 0.0);
        assert!((xlogxy(1.0f64, std::f64::consts::E) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn f32_tolerances_are_looser() {
        assert!(f32::representation_tol() as f64 > f64::representation_tol());
        assert_eq!(f64::lit(0.5), 0.5);
    }
}
