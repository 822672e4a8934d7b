//! Numerical checks of the inequalities the regret analysis rests on:
//! monotonicity of power means, three upper bounds on `min(a ⊙ b)` in terms
//! of power means of `a` and `b`, and a bracket around the GP posterior
//! variance at a fixed point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, Observation, Source};
use crate::kernels::KernelSpec;
use crate::scalar::Scalar;

/// Order `θ ∈ [−∞, +∞]` of a power mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeanOrder<T>(pub T);

impl<T: Scalar> MeanOrder<T> {
    pub const fn new(theta: T) -> Self {
        Self(theta)
    }

    pub fn min() -> Self {
        Self(T::neg_infinity())
    }

    pub fn max() -> Self {
        Self(T::infinity())
    }

    pub fn theta(self) -> T {
        self.0
    }
}

/// Signature shared by [`generalized_mean`] and any stand-in used to exercise
/// the audits.
pub type MeanFn<T> = dyn Fn(MeanOrder<T>, &[T]) -> Result<T> + Sync;

/// Power mean `M_θ(a)`. Finite orders are evaluated relative to the extreme
/// element with `expm1`/`ln_1p`, so there is no overflow for large `|θ|` and
/// the `θ → 0` limit is approached smoothly.
pub fn generalized_mean<T: Scalar>(order: MeanOrder<T>, a: &[T]) -> Result<T> {
    if a.is_empty() {
        return Err(Error::Input("power mean of an empty vector".into()));
    }
    if let Some(&bad) = a.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::Domain { value: bad.as_f64(), domain: "positive finite entries" });
    }
    let theta = order.theta();
    if theta.is_nan() {
        return Err(Error::Input("mean order is NaN".into()));
    }
    let lo = a.iter().copied().fold(T::infinity(), T::min);
    let hi = a.iter().copied().fold(T::neg_infinity(), T::max);
    if theta == T::neg_infinity() {
        return Ok(lo);
    }
    if theta == T::infinity() {
        return Ok(hi);
    }
    let n = T::lit(a.len() as f64);
    if theta == T::zero() {
        let mean_log = a.iter().map(|v| v.ln()).sum::<T>() / n;
        return Ok(mean_log.exp());
    }
    let pivot = if theta > T::zero() { hi } else { lo };
    let s = a.iter().map(|&v| (theta * (v / pivot).ln()).exp_m1()).sum::<T>() / n;
    Ok(pivot * (s.ln_1p() / theta).exp())
}

fn tolerance<T: Scalar>(rel: f64) -> T {
    T::lit(rel).max(T::epsilon() * T::lit(64.0))
}

/// `M_{θ1}(a) ≤ M_{θ2}(a)` up to `1e-12` relative.
pub fn check_mean_monotonicity<T: Scalar>(a: &[T], theta1: MeanOrder<T>, theta2: MeanOrder<T>) -> Result<bool> {
    check_mean_monotonicity_with(&generalized_mean, a, theta1, theta2)
}

pub fn check_mean_monotonicity_with<T: Scalar>(
    mean: &MeanFn<T>,
    a: &[T],
    theta1: MeanOrder<T>,
    theta2: MeanOrder<T>,
) -> Result<bool> {
    if theta1.theta() > theta2.theta() {
        return Err(Error::Input("monotonicity check needs theta1 <= theta2".into()));
    }
    let m1 = mean(theta1, a)?;
    let m2 = mean(theta2, a)?;
    let tol = tolerance::<T>(1e-12);
    Ok(m1 <= m2 + tol * m2.abs().max(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck<T> {
    pub rhs: T,
    /// `rhs − lhs`; negative means violated.
    pub slack: T,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HadamardReport<T> {
    /// `M_{−∞}(a ⊙ b) = min_i a_i b_i`
    pub lhs: T,
    /// `M_{−z}(a) M_z(b)`
    pub dual_orders: InequalityCheck<T>,
    /// `M_{|zq|}(a) M_{|zq'|}(b)`
    pub holder: InequalityCheck<T>,
    /// `M_{−|z|}(a) M_{q|z|/(q−1)}(b)`
    pub reverse_holder: InequalityCheck<T>,
}

impl<T: Scalar> HadamardReport<T> {
    pub fn all_hold(&self) -> bool {
        self.dual_orders.holds && self.holder.holds && self.reverse_holder.holds
    }

    pub fn checks(&self) -> [InequalityCheck<T>; 3] {
        [self.dual_orders, self.holder, self.reverse_holder]
    }
}

/// Product on the extended reals with `0 · ∞ = 0`.
fn ext_mul<T: Scalar>(a: T, b: T) -> T {
    if a == T::zero() || b == T::zero() {
        T::zero()
    } else {
        a * b
    }
}

/// Hölder conjugate `q/(q−1)`, with `1 ↔ ∞`.
fn conjugate<T: Scalar>(q: T) -> T {
    if q == T::one() {
        T::infinity()
    } else if q.is_infinite() {
        T::one()
    } else {
        q / (q - T::one())
    }
}

/// Evaluates the three bounds on `min_i a_i b_i` for `z ∈ [−∞, ∞]` and
/// Hölder exponent `q ∈ [1, ∞]`, with a relative tolerance of `1e-10`.
pub fn check_hadamard_mean_bounds<T: Scalar>(a: &[T], b: &[T], z: T, q: T) -> Result<HadamardReport<T>> {
    check_hadamard_mean_bounds_with(&generalized_mean, a, b, z, q)
}

pub fn check_hadamard_mean_bounds_with<T: Scalar>(
    mean: &MeanFn<T>,
    a: &[T],
    b: &[T],
    z: T,
    q: T,
) -> Result<HadamardReport<T>> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    if z.is_nan() {
        return Err(Error::Input("z is NaN".into()));
    }
    if !(q >= T::one()) {
        return Err(Error::Domain { value: q.as_f64(), domain: "q in [1, inf]" });
    }
    let ab: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    let lhs = mean(MeanOrder::min(), &ab)?;
    let qc = conjugate(q);
    let za = z.abs();

    let tol = tolerance::<T>(1e-10);
    let judge = |rhs: T| InequalityCheck { rhs, slack: rhs - lhs, holds: lhs <= rhs + tol * rhs.abs() };

    let r1 = mean(MeanOrder(-z), a)? * mean(MeanOrder(z), b)?;
    let r2 = mean(MeanOrder(ext_mul(za, q)), a)? * mean(MeanOrder(ext_mul(za, qc)), b)?;
    let r3 = mean(MeanOrder(-za), a)? * mean(MeanOrder(ext_mul(za, qc)), b)?;
    Ok(HadamardReport { lhs, dual_orders: judge(r1), holder: judge(r2), reverse_holder: judge(r3) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBracket<T> {
    pub lower: T,
    pub upper: T,
    pub actual: T,
    /// `K(x*, x*)`
    pub prior: T,
    pub within_lower: bool,
    pub within_upper: bool,
}

/// Lower and upper bounds on `σ²(x*)` built from `D_t = K** − |K(x*, x_t)|`:
///
/// * lower `K**(σ² + 2n D↓ − n D↓²/K**) / (σ² + n K**)`, `D↓ = min_t D_t`
/// * upper `K**(σ² + 2ΣD_t − ΣD_t²/K**) / (σ² + n K**)`
///
/// Needs a kernel with constant diagonal.
pub fn posterior_variance_bracket<T: Scalar>(gp: &GpPosterior<T>, x_star: &[T]) -> Result<VarianceBracket<T>> {
    let k = gp.kernel();
    if !k.has_constant_diagonal() {
        return Err(Error::Unsupported(format!("{:?} kernel has a non-constant diagonal", k.family)));
    }
    let kss = k.eval(x_star, x_star)?;
    let actual = gp.variance(x_star)?;
    let n = gp.len();
    if n == 0 {
        return Ok(VarianceBracket { lower: kss, upper: kss, actual, prior: kss, within_lower: true, within_upper: true });
    }
    let diag_tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) * kss;
    let mut d = Vec::with_capacity(n);
    for obs in gp.data() {
        if (k.eval(&obs.x, &obs.x)? - kss).abs() > diag_tol {
            return Err(Error::Unsupported("kernel diagonal differs between points".into()));
        }
        d.push(kss - k.eval(x_star, &obs.x)?.abs());
    }
    let s2 = gp.noise_variance();
    let nn = T::lit(n as f64);
    let two = T::lit(2.0);
    let denom = s2 + nn * kss;
    let d_min = d.iter().copied().fold(T::infinity(), T::min);
    let lower = kss * (s2 + two * nn * d_min - nn * d_min * d_min / kss) / denom;
    let sum_d: T = d.iter().copied().sum();
    let sum_d2: T = d.iter().map(|&v| v * v).sum();
    let upper = kss * (s2 + two * sum_d - sum_d2 / kss) / denom;
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(64.0));
    Ok(VarianceBracket {
        lower,
        upper,
        actual,
        prior: kss,
        within_lower: actual + tol >= lower,
        within_upper: actual <= upper + tol,
    })
}

/// Outcome of one randomized audit, as emitted by `verify-theory`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub check: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest relative excess `(lhs − rhs)/|rhs|` seen; negative when every
    /// trial held with margin.
    pub max_slack: f64,
    /// Hard checks fail the run; soft ones are informational.
    pub hard: bool,
}

fn random_positive_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect()
}

fn random_order(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..10) {
        0 => f64::NEG_INFINITY,
        1 => f64::INFINITY,
        2 => 0.0,
        _ => rng.random_range(-20.0..20.0),
    }
}

fn relative_excess(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE)
}

/// Random `(a, θ1 ≤ θ2)` draws with `n ≤ 8`.
pub fn audit_mean_monotonicity(trials: usize, seed: u64, mean: &MeanFn<f64>) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_slack = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(1..=8);
        let a = random_positive_vec(&mut rng, n);
        let (t1, t2) = {
            let (u, v) = (random_order(&mut rng), random_order(&mut rng));
            if u <= v { (u, v) } else { (v, u) }
        };
        if !check_mean_monotonicity_with(mean, &a, MeanOrder(t1), MeanOrder(t2))? {
            violations += 1;
        }
        max_slack = max_slack.max(relative_excess(mean(MeanOrder(t1), &a)?, mean(MeanOrder(t2), &a)?));
    }
    Ok(AuditReport { check: "mean_monotonicity".into(), trials, violations, max_slack, hard: true })
}

/// Random draws with `n ≤ 8`, `z ∈ [−5, 5]`, `q ∈ [1, 10]` (plus the
/// `z = 0`, `z = ±∞` and `q = ∞` corners now and then). A trial violates if
/// any of the three bounds fails.
pub fn audit_hadamard_bounds(trials: usize, seed: u64, mean: &MeanFn<f64>) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_slack = f64::NEG_INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(1..=8);
        let a = random_positive_vec(&mut rng, n);
        let b = random_positive_vec(&mut rng, n);
        let z = match rng.random_range(0..20) {
            0 => 0.0,
            1 => f64::INFINITY,
            2 => f64::NEG_INFINITY,
            _ => rng.random_range(-5.0..=5.0),
        };
        let q = match rng.random_range(0..20) {
            0 => f64::INFINITY,
            1 => 1.0,
            _ => rng.random_range(1.0..=10.0),
        };
        let r = check_hadamard_mean_bounds_with(mean, &a, &b, z, q)?;
        if !r.all_hold() {
            violations += 1;
        }
        for c in r.checks() {
            max_slack = max_slack.max(relative_excess(r.lhs, c.rhs));
        }
    }
    Ok(AuditReport { check: "hadamard_mean_bounds".into(), trials, violations, max_slack, hard: true })
}

/// Random squared-exponential posteriors (`n ≤ 20`, dimension 1–3). Returns
/// the hard upper-bound audit and the informational lower-bound audit.
pub fn audit_variance_bracket(instances: usize, seed: u64) -> Result<(AuditReport, AuditReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut up_viol, mut lo_viol) = (0, 0);
    let (mut up_slack, mut lo_slack) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..instances {
        let dim = rng.random_range(1..=3);
        let n = rng.random_range(0..=20);
        let l = 10f64.powf(rng.random_range(-1.0..1.0));
        let v = 10f64.powf(rng.random_range(-1.0..1.0));
        let noise = 10f64.powf(rng.random_range(-4.0..0.0));
        let point = |r: &mut ChaCha8Rng| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let data: Vec<_> = (0..n).map(|_| Observation::new(point(&mut rng), 0.0, Source::Init)).collect();
        let x_star = point(&mut rng);
        let gp = GpPosterior::fit(KernelSpec::squared_exponential(l, v), data, noise)?;
        let br = posterior_variance_bracket(&gp, &x_star)?;
        if !br.within_upper {
            up_viol += 1;
        }
        if !br.within_lower {
            lo_viol += 1;
            tracing::debug!(lower = br.lower, actual = br.actual, "variance lower bound exceeded");
        }
        up_slack = up_slack.max(relative_excess(br.actual, br.upper));
        lo_slack = lo_slack.max(relative_excess(br.lower, br.actual));
    }
    Ok((
        AuditReport { check: "variance_bracket_upper".into(), trials: instances, violations: up_viol, max_slack: up_slack, hard: true },
        AuditReport { check: "variance_bracket_lower".into(), trials: instances, violations: lo_viol, max_slack: lo_slack, hard: false },
    ))
}
