//! Zero-mean Gaussian-process posterior over a shared observation list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_from_features, KernelFamily, KernelSpec};
use crate::linalg::Cholesky;
use crate::scalar::{dot, Scalar};

/// Who proposed an observed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Human,
    Ai,
    Init,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Human => "human",
            Source::Ai => "ai",
            Source::Init => "init",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub x: Vec<T>,
    pub y: T,
    pub source: Source,
}

impl<T> Observation<T> {
    pub fn new(x: Vec<T>, y: T, source: Source) -> Self {
        Self { x, y, source }
    }
}

/// Fitted posterior: `α = (K + σ²I)⁻¹ y` with the factor of `K + σ²I` cached.
#[derive(Debug, Clone)]
pub struct GpPosterior<T> {
    kernel: KernelSpec<T>,
    noise_variance: T,
    data: Vec<Observation<T>>,
    features: Vec<Vec<T>>,
    factor: Cholesky<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GpPosterior<T> {
    /// Conditions the prior on `data`. With no data the result is the prior.
    pub fn fit(kernel: KernelSpec<T>, data: Vec<Observation<T>>, noise_variance: T) -> Result<Self> {
        kernel.validate()?;
        if !(noise_variance > T::zero()) || !noise_variance.is_finite() {
            return Err(Error::Input(format!("noise variance must be positive, got {noise_variance}")));
        }
        if let (Some(first), Some(dim)) = (data.first(), kernel.input_dim()) {
            if first.x.len() != dim {
                return Err(Error::Dimension { expected: dim, got: first.x.len() });
            }
        }
        let xs: Vec<Vec<T>> = data.iter().map(|o| o.x.clone()).collect();
        let features = kernel.feature_rows(&xs)?;
        let mut system = gram_from_features(&kernel, &features);
        for i in 0..system.dim() {
            system.set(i, i, system.get(i, i) + noise_variance);
        }
        let factor = Cholesky::factor_with_jitter(&system)?;
        let ys: Vec<T> = data.iter().map(|o| o.y).collect();
        let weights = factor.solve(&ys);
        Ok(Self { kernel, noise_variance, data, features, factor, weights })
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn data(&self) -> &[Observation<T>] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn factor(&self) -> &Cholesky<T> {
        &self.factor
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        let expected = match (self.data.first(), self.kernel.input_dim()) {
            (Some(o), _) => o.x.len(),
            (None, Some(d)) => d,
            (None, None) => return Ok(()),
        };
        if x.len() != expected {
            return Err(Error::Dimension { expected, got: x.len() });
        }
        Ok(())
    }

    /// `(k(x), K(x, x))` in feature space.
    fn cross(&self, x: &[T]) -> Result<(Vec<T>, T)> {
        self.check_dim(x)?;
        let p = self.kernel.features(x)?;
        let k: Vec<T> = self.features.iter().map(|f| self.kernel.eval_features(f, &p)).collect();
        Ok((k, self.kernel.eval_features(&p, &p)))
    }

    pub fn mean(&self, x: &[T]) -> Result<T> {
        let (k, _) = self.cross(x)?;
        Ok(dot(&k, &self.weights))
    }

    /// Posterior variance, clamped into `[0, K(x, x)]`.
    pub fn variance(&self, x: &[T]) -> Result<T> {
        self.predict(x).map(|(_, v)| v)
    }

    /// Mean and variance from a single cross-covariance evaluation.
    pub fn predict(&self, x: &[T]) -> Result<(T, T)> {
        let (k, prior) = self.cross(x)?;
        let mean = dot(&k, &self.weights);
        let v = self.factor.solve_lower(&k);
        let var = (prior - dot(&v, &v)).max(T::zero()).min(prior.max(T::zero()));
        Ok((mean, var))
    }

    /// `ln(1 + σ⁻² σ²(x))` for this (pre-update) posterior.
    pub fn information_gain_increment(&self, x: &[T]) -> Result<T> {
        let var = self.variance(x)?;
        Ok((var / self.noise_variance).ln_1p())
    }

    /// `yᵀ (K + σ²I)⁻¹ y`.
    pub fn rkhs_norm_estimate(&self) -> Result<T> {
        if self.data.is_empty() {
            return Err(Error::Input("RKHS norm estimate needs at least one observation".into()));
        }
        Ok(self.data.iter().zip(&self.weights).map(|(o, &a)| o.y * a).sum())
    }

    /// `−½ yᵀα − ½ ln|K + σ²I| − (n/2) ln 2π`.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = T::lit(self.data.len() as f64);
        let half = T::lit(0.5);
        let fit: T = self.data.iter().zip(&self.weights).map(|(o, &a)| o.y * a).sum();
        -half * fit - half * self.factor.log_det() - half * n * T::TAU().ln()
    }

    /// Returns a posterior with `obs` appended, keeping kernel and noise.
    pub fn with_observation(&self, obs: Observation<T>) -> Result<Self> {
        let mut data = self.data.clone();
        data.push(obs);
        Self::fit(self.kernel.clone(), data, self.noise_variance)
    }
}

/// Free-function form of [`GpPosterior::fit`].
pub fn fit<T: Scalar>(kernel: KernelSpec<T>, data: Vec<Observation<T>>, noise_variance: T) -> Result<GpPosterior<T>> {
    GpPosterior::fit(kernel, data, noise_variance)
}

/// Sum of sequential information-gain increments: each point is scored
/// against the posterior holding every point before it.
pub fn accumulated_information_gain<T: Scalar>(
    kernel: &KernelSpec<T>,
    xs: &[Vec<T>],
    noise_variance: T,
) -> Result<T> {
    let mut gp = GpPosterior::fit(kernel.clone(), Vec::new(), noise_variance)?;
    let mut total = T::zero();
    for x in xs {
        total = total + gp.information_gain_increment(x)?;
        gp = gp.with_observation(Observation::new(x.clone(), T::zero(), Source::Init))?;
    }
    Ok(total)
}

/// Log-spaced candidates `[1e-2, 1e1]·scale`, 25 points.
pub fn lengthscale_grid<T: Scalar>(scale: T) -> Vec<T> {
    log_grid(T::lit(1e-2) * scale, T::lit(1e1) * scale, 25)
}

pub fn log_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * T::lit(i as f64) / T::lit((n - 1) as f64)).exp())
        .collect()
}

/// Unbiased sample variance, or `None` below two points or when degenerate.
pub fn sample_variance<T: Scalar>(ys: &[T]) -> Option<T> {
    if ys.len() < 2 {
        return None;
    }
    let n = T::lit(ys.len() as f64);
    let mean = ys.iter().copied().sum::<T>() / n;
    let v = ys.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / (n - T::one());
    (v > T::zero() && v.is_finite()).then_some(v)
}

/// Grid-search maximum-likelihood hyperparameters.
///
/// For the squared-exponential family `candidates` are lengthscales and the
/// signal variance is pinned to the sample variance of `y`. For the linear
/// and polynomial families `candidates` are signal variances. The feature map
/// and degree of `template` are kept. Ties go to the earliest candidate.
pub fn fit_hyperparameters<T: Scalar>(
    template: &KernelSpec<T>,
    data: &[Observation<T>],
    noise_variance: T,
    candidates: &[T],
) -> Result<KernelSpec<T>> {
    if data.len() < 2 {
        return Err(Error::Input(format!("hyperparameter fitting needs at least 2 observations, got {}", data.len())));
    }
    if candidates.is_empty() {
        return Err(Error::Input("empty hyperparameter grid".into()));
    }
    let ys: Vec<T> = data.iter().map(|o| o.y).collect();
    let signal = sample_variance(&ys).unwrap_or_else(T::one);

    let mut best: Option<(T, KernelSpec<T>)> = None;
    for &c in candidates {
        let mut k = template.clone();
        match k.family {
            KernelFamily::SquaredExponential => {
                k.lengthscale = c;
                k.signal_variance = signal;
            }
            KernelFamily::Linear | KernelFamily::Polynomial => k.signal_variance = c,
        }
        let Ok(gp) = GpPosterior::fit(k.clone(), data.to_vec(), noise_variance) else { continue };
        let lml = gp.log_marginal_likelihood();
        if !lml.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _)| lml > *b) {
            best = Some((lml, k));
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::Numerical("every hyperparameter candidate failed to factorize".into()))
}
