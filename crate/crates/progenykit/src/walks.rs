//! First-passage times of bounded-jump random walks.
//!
//! All walks start at 0; `T` is the first time the walk reaches level >= 1
//! (for the kinds built here the maximal up-step is 1, so the level hit is
//! exactly 1). Exact distributions come from the progeny series of the
//! embedded 2-type branching process; tails come from closed convolution
//! formulas over double-factorial sequences.

use crate::gwmodel::GWModel;
use crate::progeny::{progeny_series_21, progeny_series_stay, ProgenyError};
use crate::series::{inv_sqrt_one_minus_u_coeffs, sqrt_one_minus_xu_abs_coeffs, TruncatedSeries};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("jump probabilities must be positive and sum to 1 (sum {0})")]
    BadProbabilities(f64),
    #[error("parameter {name} = {value} outside {domain}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("negative discriminant {0}")]
    NegativeDiscriminant(f64),
    #[error("walk descriptor: {0}")]
    Descriptor(String),
    #[error(transparent)]
    Progeny(#[from] ProgenyError),
}

/// Jump distribution of a bounded-jump random walk.
#[derive(Clone, Debug, PartialEq)]
pub enum WalkSpec {
    /// `+1` with probability `p`, `-1` otherwise.
    Simple { p: f64 },
    /// `+1`/`-1`/`0` with probabilities `p`/`q`/`r`.
    Stay { p: f64, q: f64, r: f64 },
    /// `+1`/`-1`/`-2` with probabilities `p`/`q1`/`q2`.
    TwoOne { p: f64, q1: f64, q2: f64 },
    /// Jumps `-l` with probability `down[l-1]` and `+r` with `up[r-1]`.
    General { down: Vec<f64>, up: Vec<f64> },
}

const PROB_TOL: f64 = 1e-12;

impl WalkSpec {
    pub fn validate(&self) -> Result<(), WalkError> {
        let probs: Vec<f64> = match self {
            WalkSpec::Simple { p } => vec![*p, 1.0 - *p],
            WalkSpec::Stay { p, q, r } => vec![*p, *q, *r],
            WalkSpec::TwoOne { p, q1, q2 } => vec![*p, *q1, *q2],
            WalkSpec::General { down, up } => {
                if down.is_empty() || up.is_empty() {
                    return Err(WalkError::Descriptor(
                        "general walk needs at least one down and one up jump".into(),
                    ));
                }
                down.iter().chain(up).copied().collect()
            }
        };
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&x| x <= 0.0) || (sum - 1.0).abs() > PROB_TOL {
            return Err(WalkError::BadProbabilities(sum));
        }
        Ok(())
    }

    /// Mean jump `E(X_1)`.
    pub fn drift(&self) -> f64 {
        match self {
            WalkSpec::Simple { p } => 2.0 * p - 1.0,
            WalkSpec::Stay { p, q, .. } => p - q,
            WalkSpec::TwoOne { p, q1, q2 } => p - q1 - 2.0 * q2,
            WalkSpec::General { down, up } => {
                let d: f64 = down
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i as f64 + 1.0) * x)
                    .sum();
                let u: f64 = up
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i as f64 + 1.0) * x)
                    .sum();
                u - d
            }
        }
    }

    /// The kind-specific condition under which `T` is finite a.s. and its
    /// distribution is honest: nonnegative drift.
    pub fn drift_condition_holds(&self) -> bool {
        self.drift() >= 0.0
    }

    /// Largest up-jump.
    pub fn max_up(&self) -> usize {
        match self {
            WalkSpec::General { up, .. } => up.len(),
            _ => 1,
        }
    }

    /// The embedded branching-process model, for the kinds with a built-in
    /// branching structure (`None` for general walks).
    pub fn branching_model(&self) -> Option<GWModel> {
        match self {
            WalkSpec::Simple { p } => GWModel::simple_walk(*p).ok(),
            WalkSpec::Stay { p, q, r } => GWModel::stay_walk(*p, *q, *r).ok(),
            WalkSpec::TwoOne { p, q1, q2 } => GWModel::two_one_walk(*p, *q1, *q2).ok(),
            WalkSpec::General { .. } => None,
        }
    }

    /// Strict JSON parser for walk descriptors, e.g.
    /// `{"kind":"stay","p":0.4,"q":0.3,"r":0.3}`. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, WalkError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| WalkError::Descriptor(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| WalkError::Descriptor("walk descriptor must be a JSON object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| WalkError::Descriptor("missing string key \"kind\"".into()))?;
        let check_keys = |allowed: &[&str]| -> Result<(), WalkError> {
            for key in obj.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(WalkError::Descriptor(format!("unknown key \"{key}\"")));
                }
            }
            Ok(())
        };
        let number = |key: &str| -> Result<f64, WalkError> {
            obj.get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| WalkError::Descriptor(format!("missing numeric key \"{key}\"")))
        };
        let spec = match kind {
            "simple" => {
                check_keys(&["kind", "p"])?;
                WalkSpec::Simple { p: number("p")? }
            }
            "stay" => {
                check_keys(&["kind", "p", "q", "r"])?;
                WalkSpec::Stay {
                    p: number("p")?,
                    q: number("q")?,
                    r: number("r")?,
                }
            }
            "two_one" => {
                check_keys(&["kind", "p", "q1", "q2"])?;
                WalkSpec::TwoOne {
                    p: number("p")?,
                    q1: number("q1")?,
                    q2: number("q2")?,
                }
            }
            "general" => {
                check_keys(&["kind", "down", "up"])?;
                let vector = |key: &str| -> Result<Vec<f64>, WalkError> {
                    obj.get(key)
                        .and_then(|v| v.as_array())
                        .ok_or_else(|| {
                            WalkError::Descriptor(format!("missing array key \"{key}\""))
                        })?
                        .iter()
                        .map(|x| {
                            x.as_f64().ok_or_else(|| {
                                WalkError::Descriptor(format!("\"{key}\" entries must be numbers"))
                            })
                        })
                        .collect()
                };
                WalkSpec::General {
                    down: vector("down")?,
                    up: vector("up")?,
                }
            }
            other => {
                return Err(WalkError::Descriptor(format!(
                    "unknown walk kind \"{other}\""
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Distribution of the first-passage time up to a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingTimeDist {
    /// `probs[n] = P(T = n)` for `n = 0..=n_max` (`probs[0] = 0`).
    pub probs: Vec<f64>,
    /// `1 - sum(probs)`: mass beyond the horizon plus `P(T = infinity)`.
    pub defect: f64,
}

impl HittingTimeDist {
    fn from_probs(probs: Vec<f64>) -> Self {
        let sum: f64 = probs.iter().sum();
        Self {
            probs,
            defect: (1.0 - sum).max(0.0),
        }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Total-variation distance; both distributions must share the horizon.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len(), "horizon mismatch");
        let core: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum();
        0.5 * (core + (self.defect - other.defect).abs())
    }
}

fn check_prob(name: &'static str, value: f64) -> Result<(), WalkError> {
    if !(value > 0.0 && value < 1.0) {
        return Err(WalkError::ParameterDomain {
            name,
            value,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

/// `P(T = 2n+1) = Catalan(n) p^(n+1) q^n` for the simple walk, computed by
/// the term-ratio recurrence (no binomials are formed, so there is no
/// overflow at large n).
pub fn simple_hitting_pmf(p: f64, n_max: usize) -> Result<HittingTimeDist, WalkError> {
    check_prob("p", p)?;
    let q = 1.0 - p;
    let mut probs = vec![0.0; n_max + 1];
    let mut term = p; // P(T = 1)
    let mut m = 0usize;
    while 2 * m < n_max {
        probs[2 * m + 1] = term;
        m += 1;
        term *= 2.0 * (2.0 * m as f64 - 1.0) / (m as f64 + 1.0) * p * q;
    }
    Ok(HittingTimeDist::from_probs(probs))
}

/// `zeta(s) = (1 - sqrt(1 - 4pq s^2)) / (2qs)`, the PGF of the simple walk's
/// first passage; `zeta(0) = 0` by continuity.
pub fn simple_hitting_pgf(p: f64, s: f64) -> Result<f64, WalkError> {
    check_prob("p", p)?;
    if !(-1.0..=1.0).contains(&s) {
        return Err(WalkError::ParameterDomain {
            name: "s",
            value: s,
            domain: "[-1, 1]",
        });
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let disc = 1.0 - 4.0 * p * q * s * s;
    Ok((1.0 - disc.sqrt()) / (2.0 * q * s))
}

/// `E(u^T) = (1 - ru - sqrt((1-ru)^2 - 4pq u^2)) / (2qu)` for the stay walk.
pub fn stay_hitting_pgf(p: f64, q: f64, r: f64, u: f64) -> Result<f64, WalkError> {
    let sum = p + q + r;
    if p <= 0.0 || q <= 0.0 || r < 0.0 || (sum - 1.0).abs() > PROB_TOL {
        return Err(WalkError::BadProbabilities(sum));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let head = 1.0 - r * u;
    let disc = head * head - 4.0 * p * q * u * u;
    if disc < 0.0 {
        return Err(WalkError::NegativeDiscriminant(disc));
    }
    Ok((head - disc.sqrt()) / (2.0 * q * u))
}

/// Exact distribution of the stay walk's first passage: `P(T = n)` is the
/// coefficient of `u^(n+1)` in the embedded progeny series `E(u^(T+1))`.
pub fn stay_hitting_pmf(
    p: f64,
    q: f64,
    r: f64,
    n_max: usize,
) -> Result<HittingTimeDist, WalkError> {
    let eta = progeny_series_stay(p, q, r, n_max + 1)?;
    Ok(dist_from_shifted_series(&eta, n_max))
}

/// Exact distribution of the (2-1) walk's first passage via the cubic's
/// series solution.
pub fn two_one_hitting_pmf(
    p: f64,
    q1: f64,
    q2: f64,
    n_max: usize,
) -> Result<HittingTimeDist, WalkError> {
    let g = progeny_series_21(p, q1, q2, n_max + 1)?;
    Ok(dist_from_shifted_series(&g, n_max))
}

fn dist_from_shifted_series(series: &TruncatedSeries, n_max: usize) -> HittingTimeDist {
    let probs: Vec<f64> = (0..=n_max).map(|n| series.coeff(n + 1)).collect();
    HittingTimeDist::from_probs(probs)
}

/// Analytic pmf for a walk spec, where one exists.
pub fn analytic_hitting_pmf(spec: &WalkSpec, n_max: usize) -> Result<HittingTimeDist, WalkError> {
    match spec {
        WalkSpec::Simple { p } => simple_hitting_pmf(*p, n_max),
        WalkSpec::Stay { p, q, r } => stay_hitting_pmf(*p, *q, *r, n_max),
        WalkSpec::TwoOne { p, q1, q2 } => two_one_hitting_pmf(*p, *q1, *q2, n_max),
        WalkSpec::General { .. } => Err(WalkError::Descriptor(
            "no analytic first-passage distribution is built for general walks".into(),
        )),
    }
}

/// `sqrt(n) * sum_{k<=n} a_k(x) b_{n-k}`, the convolution of the
/// double-factorial sequences, to be compared with its limit
/// [`convolution_limit`].
pub fn convolution_limit_check(x: f64, n: usize) -> Result<f64, WalkError> {
    if !(-1.0..1.0).contains(&x) {
        return Err(WalkError::ParameterDomain {
            name: "x",
            value: x,
            domain: "(-1, 1)",
        });
    }
    assert!(n >= 1);
    let a = sqrt_one_minus_xu_abs_coeffs(x, n);
    let b = inv_sqrt_one_minus_u_coeffs(n);
    Ok((n as f64).sqrt() * convolve_at(&a, &b, n))
}

/// `(2 - sqrt(1-x)) / sqrt(pi)`, the limit of the convolution above.
pub fn convolution_limit(x: f64) -> f64 {
    (2.0 - (1.0 - x).sqrt()) / std::f64::consts::PI.sqrt()
}

fn convolve_at(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &ak) in a.iter().enumerate().take(n + 1) {
        if ak == 0.0 && k > 0 {
            break; // |a_k| decreases monotonically; once underflowed it stays 0
        }
        acc += ak * b[n - k];
    }
    acc
}

/// `theta_n = P(|Y| > n)` for the critical stay-walk progeny
/// (`p = q = (1-r)/2`), by the closed convolution formula
/// `theta_n = (2 b_n - sum_k a_k(r^2) b_{n-k}) / (1-r)`, `theta_0 = 1`.
pub fn theta_at(r: f64, n: usize) -> Result<f64, WalkError> {
    check_prob("r", r)?;
    if n == 0 {
        return Ok(1.0);
    }
    let a = sqrt_one_minus_xu_abs_coeffs(r * r, n);
    let b = inv_sqrt_one_minus_u_coeffs(n);
    Ok((2.0 * b[n] - convolve_at(&a, &b, n)) / (1.0 - r))
}

/// The whole sequence `theta_0..theta_n_max`. Each entry is an O(n)
/// convolution, so this is quadratic in `n_max`; for single large n use
/// [`theta_at`].
pub fn theta_sequence(r: f64, n_max: usize) -> Result<Vec<f64>, WalkError> {
    check_prob("r", r)?;
    let a = sqrt_one_minus_xu_abs_coeffs(r * r, n_max);
    let b = inv_sqrt_one_minus_u_coeffs(n_max);
    Ok((0..=n_max)
        .map(|n| {
            if n == 0 {
                1.0
            } else {
                (2.0 * b[n] - convolve_at(&a, &b, n)) / (1.0 - r)
            }
        })
        .collect())
}

/// `alpha_n = P(T >= n)` for the critical stay walk: the same convolution
/// with `x = 2r - 1` (which may be negative) in place of `r^2`.
pub fn alpha_at(r: f64, n: usize) -> Result<f64, WalkError> {
    check_prob("r", r)?;
    if n == 0 {
        return Ok(1.0);
    }
    let a = sqrt_one_minus_xu_abs_coeffs(2.0 * r - 1.0, n);
    let b = inv_sqrt_one_minus_u_coeffs(n);
    Ok((2.0 * b[n] - convolve_at(&a, &b, n)) / (1.0 - r))
}

/// The whole sequence `alpha_0..alpha_n_max`; quadratic in `n_max`.
pub fn alpha_sequence(r: f64, n_max: usize) -> Result<Vec<f64>, WalkError> {
    check_prob("r", r)?;
    let a = sqrt_one_minus_xu_abs_coeffs(2.0 * r - 1.0, n_max);
    let b = inv_sqrt_one_minus_u_coeffs(n_max);
    Ok((0..=n_max)
        .map(|n| {
            if n == 0 {
                1.0
            } else {
                (2.0 * b[n] - convolve_at(&a, &b, n)) / (1.0 - r)
            }
        })
        .collect())
}

/// `P(T < infinity)`: the total mass of the first-passage distribution,
/// i.e. the PGF value at 1. Equals 1 exactly when the drift condition holds;
/// in the defective case it is the extinction probability of the embedded
/// branching process (`p/q` for stay-type walks, the smallest cubic root at
/// `u = (1,1)` for the (2-1) walk). `None` for general walks.
pub fn prob_ever_hits(spec: &WalkSpec) -> Option<f64> {
    match spec {
        WalkSpec::Simple { p } => Some(if *p >= 0.5 { 1.0 } else { p / (1.0 - p) }),
        WalkSpec::Stay { p, q, .. } => Some(if q <= p { 1.0 } else { p / q }),
        WalkSpec::TwoOne { p, q1, q2 } => crate::progeny::closed_form_21(*p, *q1, *q2, [1.0, 1.0])
            .ok()
            .map(|rho| rho[0]),
        WalkSpec::General { .. } => None,
    }
}

/// `lim sqrt(n) P(|Y| > n) = sqrt((1+r)/(1-r)) / sqrt(pi)` for the critical
/// stay-walk progeny.
pub fn tail_constant_progeny(r: f64) -> f64 {
    ((1.0 + r) / (1.0 - r)).sqrt() / std::f64::consts::PI.sqrt()
}

/// `lim sqrt(n) P(T >= n) = sqrt(2/pi) / sqrt(1-r)` for the critical stay walk.
pub fn tail_constant_hitting(r: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() / (1.0 - r).sqrt()
}
