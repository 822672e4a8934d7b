//! Covariance functions, optionally composed with a feature map.
//!
//! A feature map `p` turns any base kernel `k` into `k(p(x), p(x'))`. This is
//! how a domain expert's notion of "relevant quantities" is given to a GP:
//! a linear kernel over `p` models a linear heuristic in those quantities, a
//! polynomial kernel a Taylor-style one, and a squared-exponential kernel a
//! similarity judgement made in feature space.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::benchmarks;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, squared_distance, Scalar};

/// Deterministic map from the search domain into a feature space.
#[derive(Clone)]
pub struct FeatureMap<T> {
    name: String,
    dim_in: usize,
    dim_out: usize,
    apply: fn(&[T]) -> Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(name: impl Into<String>, dim_in: usize, dim_out: usize, apply: fn(&[T]) -> Vec<T>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::Input("feature map dimensions must be positive".into()));
        }
        Ok(Self { name: name.into(), dim_in, dim_out, apply })
    }

    /// Looks up one of the shipped maps (`matyas-2d`, `ackley-4d`,
    /// `rastrigin-5d`, `levy-6d`).
    pub fn builtin(name: &str) -> Result<Self> {
        let (dim_in, dim_out, apply) = benchmarks::feature_map_fn::<T>(name)
            .ok_or_else(|| Error::Input(format!("unknown feature map '{name}'")))?;
        Self::new(name, dim_in, dim_out, apply)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim_in {
            return Err(Error::Dimension { expected: self.dim_in, got: x.len() });
        }
        let out = (self.apply)(x);
        debug_assert_eq!(out.len(), self.dim_out);
        Ok(out)
    }
}

impl<T> fmt::Debug for FeatureMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureMap")
            .field("name", &self.name)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .finish()
    }
}

impl<T> PartialEq for FeatureMap<T> {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.dim_in == other.dim_in && self.dim_out == other.dim_out
    }
}

impl<T> Serialize for FeatureMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for FeatureMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        FeatureMap::builtin(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Linear,
    Polynomial,
}

/// Kernel family plus hyperparameters.
///
/// `lengthscale` is only read by the squared-exponential family and `degree`
/// only by the polynomial one; both are still validated so a spec can be
/// switched between families without surprises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub lengthscale: T,
    pub signal_variance: T,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub feature_map: Option<FeatureMap<T>>,
}

fn default_degree() -> u32 {
    2
}

impl<T: Scalar> KernelSpec<T> {
    pub fn squared_exponential(lengthscale: T, signal_variance: T) -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            lengthscale,
            signal_variance,
            degree: default_degree(),
            feature_map: None,
        }
    }

    pub fn linear(signal_variance: T) -> Self {
        Self { family: KernelFamily::Linear, lengthscale: T::one(), signal_variance, degree: 1, feature_map: None }
    }

    pub fn polynomial(degree: u32, signal_variance: T) -> Self {
        Self { family: KernelFamily::Polynomial, lengthscale: T::one(), signal_variance, degree, feature_map: None }
    }

    pub fn with_feature_map(mut self, map: FeatureMap<T>) -> Self {
        self.feature_map = Some(map);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > T::zero()) || !self.lengthscale.is_finite() {
            return Err(Error::Input(format!("lengthscale must be positive, got {}", self.lengthscale)));
        }
        if !(self.signal_variance > T::zero()) || !self.signal_variance.is_finite() {
            return Err(Error::Input(format!("signal_variance must be positive, got {}", self.signal_variance)));
        }
        if self.degree < 1 {
            return Err(Error::Input("polynomial degree must be at least 1".into()));
        }
        Ok(())
    }

    /// Input dimension imposed by the feature map, if any.
    pub fn input_dim(&self) -> Option<usize> {
        self.feature_map.as_ref().map(FeatureMap::dim_in)
    }

    /// `p(x)`, or `x` itself when no map is attached.
    pub fn features<'a>(&self, x: &'a [T]) -> Result<Cow<'a, [T]>> {
        match &self.feature_map {
            Some(map) => map.apply(x).map(Cow::Owned),
            None => Ok(Cow::Borrowed(x)),
        }
    }

    /// Kernel value on already-mapped feature vectors.
    pub fn eval_features(&self, p: &[T], q: &[T]) -> T {
        match self.family {
            KernelFamily::SquaredExponential => {
                let l2 = self.lengthscale * self.lengthscale;
                self.signal_variance * (-squared_distance(p, q) / (T::lit(2.0) * l2)).exp()
            }
            KernelFamily::Linear => self.signal_variance * dot(p, q),
            KernelFamily::Polynomial => self.signal_variance * (T::one() + dot(p, q)).powi(self.degree as i32),
        }
    }

    /// `K(x, x2)`.
    pub fn eval(&self, x: &[T], x2: &[T]) -> Result<T> {
        if x.len() != x2.len() {
            return Err(Error::Dimension { expected: x.len(), got: x2.len() });
        }
        let p = self.features(x)?;
        let q = self.features(x2)?;
        Ok(self.eval_features(&p, &q))
    }

    /// Maps every row once; errors if rows disagree in dimension.
    pub fn feature_rows(&self, xs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let Some(first) = xs.first() else { return Ok(Vec::new()) };
        let dim = first.len();
        xs.iter()
            .map(|x| {
                if x.len() != dim {
                    return Err(Error::Dimension { expected: dim, got: x.len() });
                }
                self.features(x).map(Cow::into_owned)
            })
            .collect()
    }

    /// Gram matrix `[K(x_i, x_j)]`.
    pub fn gram(&self, xs: &[Vec<T>]) -> Result<Matrix<T>> {
        let feats = self.feature_rows(xs)?;
        Ok(gram_from_features(self, &feats))
    }

    /// True when `K(x, x)` does not depend on `x` (stationary families).
    pub fn has_constant_diagonal(&self) -> bool {
        self.family == KernelFamily::SquaredExponential
    }
}

pub(crate) fn gram_from_features<T: Scalar>(k: &KernelSpec<T>, feats: &[Vec<T>]) -> Matrix<T> {
    let n = feats.len();
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval_features(&feats[i], &feats[j]);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// Free-function form of [`KernelSpec::eval`].
pub fn kernel_eval<T: Scalar>(k: &KernelSpec<T>, x: &[T], x2: &[T]) -> Result<T> {
    k.eval(x, x2)
}

/// Free-function form of [`KernelSpec::gram`].
pub fn gram<T: Scalar>(k: &KernelSpec<T>, xs: &[Vec<T>]) -> Result<Matrix<T>> {
    k.gram(xs)
}
