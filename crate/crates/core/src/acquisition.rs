//! Acquisition functions, the exploration schedule for the AI agent, and a
//! box-constrained acquisition maximizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::scalar::{normal_cdf, normal_pdf, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcquisitionSpec<T> {
    /// `μ + √β σ`
    GpUcb { beta: T },
    /// Enlarged-confidence UCB for mis-specified models:
    /// `μ + (√β + ε√t / σ_noise) σ`.
    EcGpUcb { beta: T, epsilon: T, t: u64, sigma: T },
    /// Expected improvement over `best_y`.
    ExpectedImprovement { best_y: T },
    /// Posterior standard deviation.
    PureExploration,
}

impl<T: Scalar> AcquisitionSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcquisitionSpec::GpUcb { beta } if !(beta >= T::zero()) => {
                Err(Error::Input(format!("beta must be nonnegative, got {beta}")))
            }
            AcquisitionSpec::EcGpUcb { beta, epsilon, t, sigma } => {
                if !(beta >= T::zero()) || !(epsilon >= T::zero()) {
                    Err(Error::Input("beta and epsilon must be nonnegative".into()))
                } else if !(sigma > T::zero()) {
                    Err(Error::Input(format!("sigma must be positive, got {sigma}")))
                } else if t == 0 {
                    Err(Error::Input("t must be positive".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Acquisition value from a posterior mean and standard deviation.
    pub fn from_moments(&self, mean: T, sd: T) -> T {
        match *self {
            AcquisitionSpec::GpUcb { beta } => mean + beta.sqrt() * sd,
            AcquisitionSpec::EcGpUcb { beta, epsilon, t, sigma } => {
                mean + (beta.sqrt() + epsilon * T::lit(t as f64).sqrt() / sigma) * sd
            }
            AcquisitionSpec::ExpectedImprovement { best_y } => {
                if sd > T::zero() {
                    let z = (mean - best_y) / sd;
                    ((mean - best_y) * normal_cdf(z) + sd * normal_pdf(z)).max(T::zero())
                } else {
                    T::zero()
                }
            }
            AcquisitionSpec::PureExploration => sd,
        }
    }

    pub fn value(&self, gp: &GpPosterior<T>, x: &[T]) -> Result<T> {
        let (mean, var) = gp.predict(x)?;
        Ok(self.from_moments(mean, var.sqrt()))
    }
}

/// Free-function form of [`AcquisitionSpec::value`].
pub fn acquisition_value<T: Scalar>(a: &AcquisitionSpec<T>, gp: &GpPosterior<T>, x: &[T]) -> Result<T> {
    a.value(gp, x)
}

/// Running state behind the AI's trade-off parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule<T> {
    pub delta: T,
    /// Accumulated information gain `γ̆`.
    pub running_gamma: T,
    /// Running RKHS-norm estimate `B̆`, starts at 1 and only grows.
    pub running_b: T,
    /// Model noise standard deviation (taken equal to the true noise).
    pub sigma: T,
    pub zeta: T,
}

pub const DEFAULT_ZETA: f64 = 7.0;

impl<T: Scalar> BetaSchedule<T> {
    pub fn new(delta: T, sigma: T, zeta: T) -> Result<Self> {
        let s = Self { delta, running_gamma: T::zero(), running_b: T::one(), sigma, zeta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::Domain { value: self.delta.as_f64(), domain: "delta in (0, 1)" });
        }
        if !(self.sigma > T::zero()) {
            return Err(Error::Domain { value: self.sigma.as_f64(), domain: "sigma > 0" });
        }
        if !(self.zeta >= T::one()) {
            return Err(Error::Domain { value: self.zeta.as_f64(), domain: "zeta >= 1" });
        }
        if !(self.running_gamma >= T::zero()) || !(self.running_b >= T::one()) {
            return Err(Error::Input("running gamma must be >= 0 and running B >= 1".into()));
        }
        Ok(())
    }

    /// `(√σ √(2 ln(1/δ) + 1 + γ̆) + B̆)²`, the sufficient exploration level
    /// with model noise equal to the true noise.
    pub fn chi(&self) -> T {
        let two = T::lit(2.0);
        let root = (two * self.delta.recip().ln() + T::one() + self.running_gamma).sqrt();
        let inner = self.sigma.sqrt() * root + self.running_b;
        inner * inner
    }

    /// `ζ · χ̆`.
    pub fn beta(&self) -> T {
        self.zeta * self.chi()
    }

    /// Adds an information-gain increment.
    pub fn add_gain(&mut self, gain: T) {
        self.running_gamma = self.running_gamma + gain.max(T::zero());
    }

    /// `B̆ ← max(B̆, estimate)`.
    pub fn update_b(&mut self, estimate: T) {
        if estimate > self.running_b {
            self.running_b = estimate;
        }
    }
}

/// Free-function form of [`BetaSchedule::beta`].
pub fn bo_muse_beta<T: Scalar>(s: &BetaSchedule<T>) -> T {
    s.beta()
}

/// Smallest over-exploration multiplier that keeps the team's regret below
/// the AI-only rate: `(1 + ln(1/(2 − e^φ)) / φ)²` for `φ ∈ (0, ln 2)`.
pub fn zeta_lower_bound<T: Scalar>(phi: T) -> Result<T> {
    if !(phi > T::zero() && phi < T::LN_2()) {
        return Err(Error::Domain { value: phi.as_f64(), domain: "phi in (0, ln 2)" });
    }
    let h = (T::lit(2.0) - phi.exp()).recip().ln() / phi;
    let r = T::one() + h;
    Ok(r * r)
}

/// `2 ln(|D| t² π² / (6δ))` with a virtual grid of `grid_size` points.
pub fn srinivas_beta<T: Scalar>(t: u64, delta: T, grid_size: T) -> T {
    let t = T::lit(t.max(1) as f64);
    let pi2 = T::PI() * T::PI();
    T::lit(2.0) * (grid_size * t * t * pi2 / (T::lit(6.0) * delta)).ln()
}

const MAX_SWEEPS: usize = 50;
const MAX_CORNER_DIM: usize = 10;

/// Search effort for [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaximizerConfig {
    pub probes: usize,
    pub starts: usize,
    pub rounds: usize,
}

impl Default for MaximizerConfig {
    fn default() -> Self {
        Self { probes: 512, starts: 8, rounds: 20 }
    }
}

/// Finds a high-value point of `objective` in `bounds`: uniform random probes
/// plus the box corners (up to ten dimensions), then compass search from the best few, halving the step once a full sweep
/// of the axes finds nothing better. The returned point
/// scores at least as high as every evaluated candidate; ties go to the
/// earliest candidate.
pub fn maximize_with<T: Scalar>(
    objective: impl Fn(&[T]) -> Result<T>,
    bounds: &Bounds<T>,
    seed: u64,
    cfg: MaximizerConfig,
) -> Result<(Vec<T>, T)> {
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let score = |x: &[T]| -> Result<T> {
        let v = objective(x)?;
        Ok(if v.is_nan() { T::neg_infinity() } else { v })
    };

    let mut probes: Vec<(Vec<T>, T)> = Vec::with_capacity(cfg.probes.max(1));
    for _ in 0..cfg.probes.max(1) {
        let x = bounds.sample(&mut rng);
        let v = score(&x)?;
        probes.push((x, v));
    }
    // corners catch maxima pinned to the boundary, common for UCB near the edges
    if bounds.dim() <= MAX_CORNER_DIM {
        for mask in 0..1usize << bounds.dim() {
            let x: Vec<T> = (0..bounds.dim())
                .map(|i| if mask >> i & 1 == 1 { bounds.hi(i) } else { bounds.lo(i) })
                .collect();
            let v = score(&x)?;
            probes.push((x, v));
        }
    }

    let mut order: Vec<usize> = (0..probes.len()).collect();
    // stable: equal scores keep probe order
    order.sort_by(|&a, &b| probes[b].1.partial_cmp(&probes[a].1).unwrap_or(std::cmp::Ordering::Equal));

    let (mut best_x, mut best_v) = probes[order[0]].clone();
    for &start in order.iter().take(cfg.starts) {
        let (mut x, mut v) = probes[start].clone();
        let mut steps: Vec<T> = (0..bounds.dim()).map(|i| bounds.width(i) * T::lit(0.1)).collect();
        for _ in 0..cfg.rounds {
            // sweep the axes at this step size until a sweep stops helping
            for _ in 0..MAX_SWEEPS {
                let mut moved = false;
                for d in 0..bounds.dim() {
                    for dir in [T::one(), -T::one()] {
                        let mut cand = x.clone();
                        cand[d] = bounds.clamp(d, x[d] + dir * steps[d]);
                        if cand[d] == x[d] {
                            continue;
                        }
                        let cv = score(&cand)?;
                        if cv > v {
                            x = cand;
                            v = cv;
                            moved = true;
                            break;
                        }
                    }
                }
                if !moved {
                    break;
                }
            }
            for s in &mut steps {
                *s = *s * T::lit(0.5);
            }
        }
        if v > best_v {
            best_x = x;
            best_v = v;
        }
    }
    Ok((best_x, best_v))
}

/// Maximizes an acquisition over the box; deterministic for a given seed.
pub fn maximize<T: Scalar>(a: &AcquisitionSpec<T>, gp: &GpPosterior<T>, bounds: &Bounds<T>, seed: u64) -> Result<Vec<T>> {
    a.validate()?;
    maximize_with(|x| a.value(gp, x), bounds, seed, MaximizerConfig::default()).map(|(x, _)| x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Observation, Source};
    use crate::kernels::KernelSpec;

    fn toy_gp() -> GpPosterior<f64> {
        let data = vec![
            Observation::new(vec![0.0], 1.0, Source::Init),
            Observation::new(vec![1.5], -0.5, Source::Init),
        ];
        GpPosterior::fit(KernelSpec::squared_exponential(1.0, 1.0), data, 0.01).unwrap()
    }

    #[test]
    fn ucb_with_zero_beta_is_the_mean() {
        let gp = toy_gp();
        for x in [-1.0, 0.2, 0.9, 3.0] {
            let a = AcquisitionSpec::GpUcb { beta: 0.0 }.value(&gp, &[x]).unwrap();
            assert_eq!(a, gp.mean(&[x]).unwrap());
        }
    }

    #[test]
    fn ec_gp_ucb_hand_value() {
        let a = AcquisitionSpec::EcGpUcb { beta: 4.0, epsilon: 0.1, t: 9, sigma: 1.0 };
        assert!((a.from_moments(1.0, 0.5) - 2.15_f64).abs() < 1e-12);
    }

    #[test]
    fn ei_is_zero_without_uncertainty() {
        let a = AcquisitionSpec::ExpectedImprovement { best_y: 0.3 };
        assert_eq!(a.from_moments(5.0, 0.0), 0.0);
        assert!(a.from_moments(0.0, 1e-9) < 1e-12);
        assert!(a.from_moments(0.3, 1.0) > 0.0);
    }

    #[test]
    fn beta_hand_value() {
        // δ = 1/e so 2 ln(1/δ) = 2; 7(√1·√3 + 1)²
        let s = BetaSchedule { delta: (-1.0f64).exp(), running_gamma: 0.0, running_b: 1.0, sigma: 1.0, zeta: 7.0 };
        let expected = 7.0 * (3.0f64.sqrt() + 1.0).powi(2);
        assert!((bo_muse_beta(&s) - expected).abs() < 1e-10);
        assert!((expected - 52.248_711_305_964_28).abs() < 1e-9);
    }

    #[test]
    fn beta_grows_with_gamma_and_b() {
        let mut s = BetaSchedule::new(0.1, 0.01, 7.0).unwrap();
        let b0 = s.beta();
        s.add_gain(0.5);
        let b1 = s.beta();
        assert!(b1 > b0);
        s.update_b(3.0);
        assert!(s.beta() > b1);
        s.update_b(2.0);
        assert_eq!(s.running_b, 3.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(BetaSchedule::new(0.0, 1.0, 7.0).is_err());
        assert!(BetaSchedule::new(0.5, 0.0, 7.0).is_err());
        assert!(BetaSchedule::new(0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn zeta_at_log_three_halves() {
        let z = zeta_lower_bound((1.5f64).ln()).unwrap();
        let closed = (1.0 + 2.0f64.ln() / 1.5f64.ln()).powi(2);
        assert!((z - closed).abs() < 1e-12);
        assert!(z > 7.30 && z < 7.40, "{z}");
    }

    #[test]
    fn zeta_domain() {
        assert!(zeta_lower_bound(0.0f64).is_err());
        assert!(zeta_lower_bound(std::f64::consts::LN_2).is_err());
        assert!(zeta_lower_bound(-0.1f64).is_err());
        let near_top = zeta_lower_bound(std::f64::consts::LN_2 - 1e-12).unwrap();
        assert!(near_top > 1e3);
    }

    #[test]
    fn maximizer_flat_surface_stays_in_bounds() {
        let gp = GpPosterior::fit(KernelSpec::squared_exponential(1.0, 1.0), vec![], 0.01).unwrap();
        let b = Bounds::new(vec![[-2.0, 3.0], [0.0, 1.0]]).unwrap();
        let x = maximize(&AcquisitionSpec::PureExploration, &gp, &b, 3).unwrap();
        assert!(b.contains(&x));
    }

    #[test]
    fn maximizer_is_deterministic() {
        let gp = toy_gp();
        let b = Bounds::new(vec![[-3.0, 3.0]]).unwrap();
        let a = AcquisitionSpec::GpUcb { beta: 2.0 };
        assert_eq!(maximize(&a, &gp, &b, 11).unwrap(), maximize(&a, &gp, &b, 11).unwrap());
    }

    #[test]
    fn srinivas_beta_increases() {
        assert!(srinivas_beta(2, 0.1, 1e4) > srinivas_beta(1, 0.1, 1e4));
    }
}
