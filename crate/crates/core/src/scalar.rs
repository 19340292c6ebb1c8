//! Numeric abstractions the game machinery is generic over.
//!
//! [`Scalar`] covers everything that only needs field arithmetic and an
//! ordering (validation, effective-game construction, exact policy
//! evaluation), so it is satisfied by `f32`, `f64` and `BigRational`.
//! [`Real`] adds the floating-point operations needed by value iteration
//! and the stochastic learning dynamics.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field element usable in the tabular game model.
pub trait Scalar: Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + Copy {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into `T`.
///
/// Panics only for values `T` cannot represent, which never happens for the
/// finite literals used inside this crate.
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite literal representable in scalar type")
}

/// Default equality tolerance for probability and zero-sum checks: `1e-12`,
/// or `1e-5` when `T` cannot resolve a `1e-12` offset from one (`f32`).
pub fn default_tol<T: Scalar>() -> T {
    let probe = lit::<T>(1.0 + 1e-12) - T::one();
    if probe == T::zero() {
        lit(1e-5)
    } else {
        lit(1e-12)
    }
}

pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

pub fn abs<T: Scalar>(x: &T) -> T {
    if *x < T::zero() {
        T::zero() - x.clone()
    } else {
        x.clone()
    }
}

pub fn max<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Maximum of a non-empty sequence; `None` when empty.
pub fn max_of<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> Option<T> {
    iter.into_iter().reduce(max)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax<T: Scalar>(row: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in row.iter().enumerate() {
        match best {
            Some(b) if !(*x > row[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub fn sum<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.clone())
}
