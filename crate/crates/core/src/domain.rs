use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BoundViolation, Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned box, serialized as `[[lo, hi], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds<T>(Vec<[T; 2]>);

impl<T: Scalar> Bounds<T> {
    pub fn new(sides: Vec<[T; 2]>) -> Result<Self> {
        let b = Self(sides);
        b.validate()?;
        Ok(b)
    }

    pub fn uniform(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![[lo, hi]; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Input("bounds must have at least one dimension".into()));
        }
        for (i, [lo, hi]) in self.0.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Input(format!("dimension {} has empty or invalid side [{lo}, {hi}]", i + 1)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sides(&self) -> &[[T; 2]] {
        &self.0
    }

    pub fn lo(&self, i: usize) -> T {
        self.0[i][0]
    }

    pub fn hi(&self, i: usize) -> T {
        self.0[i][1]
    }

    pub fn width(&self, i: usize) -> T {
        self.0[i][1] - self.0[i][0]
    }

    /// Euclidean length of the box diagonal.
    pub fn diagonal(&self) -> T {
        self.0.iter().map(|[lo, hi]| (*hi - *lo) * (*hi - *lo)).sum::<T>().sqrt()
    }

    pub fn center(&self) -> Vec<T> {
        self.0.iter().map(|[lo, hi]| (*lo + *hi) / T::lit(2.0)).collect()
    }

    /// Checks membership, naming every offending dimension.
    pub fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        let violations: Vec<_> = x
            .iter()
            .zip(&self.0)
            .enumerate()
            .filter(|(_, (v, [lo, hi]))| !(**v >= *lo && **v <= *hi))
            .map(|(i, (v, [lo, hi]))| BoundViolation { dim: i + 1, value: v.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() })
            .collect();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::OutOfBounds(violations))
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.check(x).is_ok()
    }

    pub fn clamp(&self, i: usize, v: T) -> T {
        v.max(self.lo(i)).min(self.hi(i))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.0
            .iter()
            .map(|[lo, hi]| {
                let u = T::lit(rng.random::<f64>());
                *lo + u * (*hi - *lo)
            })
            .collect()
    }

    pub fn to_f64(&self) -> Bounds<f64> {
        Bounds(self.0.iter().map(|[lo, hi]| [lo.as_f64(), hi.as_f64()]).collect())
    }
}
