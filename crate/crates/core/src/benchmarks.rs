//! Synthetic test objectives and the expert feature maps that go with them.
//!
//! | name          | dim | features |
//! |---------------|-----|----------|
//! | `matyas`      | 2   | x₁², x₂², x₁x₂ |
//! | `ackley`      | 4   | cos xᵢ (×4), ‖x‖₂ |
//! | `rastrigin`   | 5   | xᵢ² (×5), cos xᵢ (×5) |
//! | `levy`        | 6   | sin²x₁, xⱼ² sin²xⱼ (×6) |
//!
//! All four are minimization problems with a known global minimum of 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BUILTIN_NAMES: [&str; 4] = ["matyas", "ackley", "rastrigin", "levy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    #[default]
    Minimize,
    Maximize,
}

impl Goal {
    /// Multiplier that turns the user's orientation into maximization.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Goal::Minimize => -T::one(),
            Goal::Maximize => T::one(),
        }
    }
}

/// A noiseless analytic objective.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec<T> {
    pub name: String,
    pub dim: usize,
    pub bounds: Bounds<T>,
    pub goal: Goal,
    pub eval: fn(&[T]) -> T,
    pub optimum_x: Option<Vec<T>>,
    pub optimum_value: Option<T>,
    /// Name of the matching expert feature map.
    pub feature_map: Option<String>,
}

impl<T: Scalar> ObjectiveSpec<T> {
    pub fn evaluate(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        Ok((self.eval)(x))
    }

    /// Spread of objective values over the box, estimated from a fixed
    /// 4096-point uniform sample plus the optimum. Deterministic.
    pub fn range_estimate(&self) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_0b1ec7);
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        let mut note = |v: T| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        if let Some(v) = self.optimum_value {
            note(v);
        }
        for _ in 0..4096 {
            let x = self.bounds.sample(&mut rng);
            note((self.eval)(&x));
        }
        let r = hi - lo;
        if r > T::zero() && r.is_finite() {
            r
        } else {
            T::one()
        }
    }
}

/// Looks up a built-in objective by name (case-insensitive; a `-Nd` suffix
/// such as `ackley-4d` is accepted).
pub fn builtin<T: Scalar>(name: &str) -> Result<ObjectiveSpec<T>> {
    let key = name.to_ascii_lowercase();
    let key = key.split('-').next().unwrap_or_default();
    let spec = match key {
        "matyas" => ObjectiveSpec {
            name: "matyas".into(),
            dim: 2,
            bounds: Bounds::uniform(2, T::lit(-10.0), T::lit(10.0))?,
            goal: Goal::Minimize,
            eval: matyas::<T>,
            optimum_x: Some(vec![T::zero(); 2]),
            optimum_value: Some(T::zero()),
            feature_map: Some("matyas-2d".into()),
        },
        "ackley" => ObjectiveSpec {
            name: "ackley".into(),
            dim: 4,
            bounds: Bounds::uniform(4, T::lit(-32.768), T::lit(32.768))?,
            goal: Goal::Minimize,
            eval: ackley::<T>,
            optimum_x: Some(vec![T::zero(); 4]),
            optimum_value: Some(T::zero()),
            feature_map: Some("ackley-4d".into()),
        },
        "rastrigin" => ObjectiveSpec {
            name: "rastrigin".into(),
            dim: 5,
            bounds: Bounds::uniform(5, T::lit(-5.12), T::lit(5.12))?,
            goal: Goal::Minimize,
            eval: rastrigin::<T>,
            optimum_x: Some(vec![T::zero(); 5]),
            optimum_value: Some(T::zero()),
            feature_map: Some("rastrigin-5d".into()),
        },
        "levy" => ObjectiveSpec {
            name: "levy".into(),
            dim: 6,
            bounds: Bounds::uniform(6, T::lit(-10.0), T::lit(10.0))?,
            goal: Goal::Minimize,
            eval: levy::<T>,
            optimum_x: Some(vec![T::one(); 6]),
            optimum_value: Some(T::zero()),
            feature_map: Some("levy-6d".into()),
        },
        _ => return Err(Error::Input(format!("unknown benchmark '{name}' (expected one of {BUILTIN_NAMES:?})"))),
    };
    Ok(spec)
}

pub fn matyas<T: Scalar>(x: &[T]) -> T {
    let (a, b) = (x[0], x[1]);
    T::lit(0.26) * (a * a + b * b) - T::lit(0.48) * a * b
}

/// Ackley with a = 20, b = 0.2, c = 2π.
pub fn ackley<T: Scalar>(x: &[T]) -> T {
    let (a, b, c) = (T::lit(20.0), T::lit(0.2), T::TAU());
    let d = T::lit(x.len() as f64);
    let sq = x.iter().map(|&v| v * v).sum::<T>() / d;
    let cs = x.iter().map(|&v| (c * v).cos()).sum::<T>() / d;
    -a * (-b * sq.sqrt()).exp() - cs.exp() + a + T::E()
}

pub fn rastrigin<T: Scalar>(x: &[T]) -> T {
    let ten = T::lit(10.0);
    ten * T::lit(x.len() as f64) + x.iter().map(|&v| v * v - ten * (T::TAU() * v).cos()).sum::<T>()
}

pub fn levy<T: Scalar>(x: &[T]) -> T {
    let pi = T::PI();
    let one = T::one();
    let w: Vec<T> = x.iter().map(|&v| one + (v - one) / T::lit(4.0)).collect();
    let d = w.len();
    let sin2 = |v: T| {
        let s = v.sin();
        s * s
    };
    let head = sin2(pi * w[0]);
    let body: T = w[..d - 1]
        .iter()
        .map(|&wi| (wi - one) * (wi - one) * (one + T::lit(10.0) * sin2(pi * wi + one)))
        .sum();
    let wd = w[d - 1];
    let tail = (wd - one) * (wd - one) * (one + sin2(T::TAU() * wd));
    head + body + tail
}

fn matyas_features<T: Scalar>(x: &[T]) -> Vec<T> {
    vec![x[0] * x[0], x[1] * x[1], x[0] * x[1]]
}

fn ackley_features<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut f: Vec<T> = x.iter().map(|v| v.cos()).collect();
    f.push(x.iter().map(|&v| v * v).sum::<T>().sqrt());
    f
}

fn rastrigin_features<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v * v).chain(x.iter().map(|v| v.cos())).collect()
}

fn levy_features<T: Scalar>(x: &[T]) -> Vec<T> {
    let s0 = x[0].sin();
    std::iter::once(s0 * s0)
        .chain(x.iter().map(|&v| {
            let s = v.sin();
            v * v * s * s
        }))
        .collect()
}

/// `(dim_in, dim_out, map)` for a named expert feature map.
pub(crate) fn feature_map_fn<T: Scalar>(name: &str) -> Option<(usize, usize, fn(&[T]) -> Vec<T>)> {
    match name {
        "matyas-2d" => Some((2, 3, matyas_features::<T>)),
        "ackley-4d" => Some((4, 5, ackley_features::<T>)),
        "rastrigin-5d" => Some((5, 10, rastrigin_features::<T>)),
        "levy-6d" => Some((6, 7, levy_features::<T>)),
        _ => None,
    }
}
