//! Total-progeny probability generating functions.
//!
//! For an L-type model with offspring PGF vector `phi`, the PGF `rho(s)` of
//! the total progeny solves `u = s * phi(u)` (componentwise product) and is
//! the limit of the monotone iteration `G <- s * phi(G)` started at `G = s`.
//! This module provides the pointwise solver, the two closed forms for the
//! walk-embedded 2-type families (a quadratic for the stay walk, a cubic for
//! the (2-1) walk), and truncated-series expansions of the associated
//! first-passage generating functions.

use crate::gwmodel::{GWModel, ModelError};
use crate::series::{SeriesError, TruncatedSeries};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgenyError {
    #[error("pointwise solver needs 0 < s < 1 strictly in every component (got {0})")]
    ArgumentOutsideOpenCube(f64),
    #[error("argument dimension {got} does not match model with {expected} types")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(
        "fixed-point iteration did not reach tol after {iterations} iterations \
         (residual {residual})"
    )]
    NotConverged {
        iterations: u64,
        residual: f64,
        /// Last iterate, for diagnostics.
        last: Vec<f64>,
    },
    #[error("negative discriminant {0} in the closed form")]
    NegativeDiscriminant(f64),
    #[error("cubic has no real root in [0, 1]; check parameters")]
    NoRootInUnitInterval,
    #[error("parameters must be positive probabilities summing to 1 (sum {0})")]
    BadParameters(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Result of the pointwise fixed-point solve.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgenyPoint {
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    /// `max_i |rho_i - s_i * phi_i(rho)|` after stopping.
    pub residual: f64,
    pub iterations: u64,
}

/// Solves `rho = s * phi(rho)` by the monotone iteration `G <- s * phi(G)`
/// from `G = s`, for `s` strictly inside the open unit cube.
///
/// Stops when the sup-norm step change drops below `tol`. The iterates are
/// nonincreasing; this is asserted at every step.
pub fn progeny_pgf_point(
    model: &GWModel,
    s: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<ProgenyPoint, ProgenyError> {
    if s.len() != model.types() {
        return Err(ProgenyError::DimensionMismatch {
            got: s.len(),
            expected: model.types(),
        });
    }
    for &x in s {
        if !(x > 0.0 && x < 1.0) {
            return Err(ProgenyError::ArgumentOutsideOpenCube(x));
        }
    }
    assert!(tol > 0.0, "tolerance must be positive");

    let mut g: Vec<f64> = s.to_vec();
    let mut next = vec![0.0; s.len()];
    for iteration in 1..=max_iter {
        apply_map(model, s, &g, &mut next)?;
        let mut change = 0.0f64;
        for (prev, new) in g.iter().zip(&next) {
            assert!(
                *new <= prev + 1e-12,
                "iterates must be nonincreasing ({new} > {prev})"
            );
            change = change.max(prev - new);
        }
        g.copy_from_slice(&next);
        if change < tol {
            apply_map(model, s, &g, &mut next)?;
            let residual = g
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            return Ok(ProgenyPoint {
                s: s.to_vec(),
                rho: g,
                residual,
                iterations: iteration,
            });
        }
    }

    apply_map(model, s, &g, &mut next)?;
    let residual = g
        .iter()
        .zip(&next)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Err(ProgenyError::NotConverged {
        iterations: max_iter,
        residual,
        last: g,
    })
}

fn apply_map(model: &GWModel, s: &[f64], g: &[f64], out: &mut [f64]) -> Result<(), ProgenyError> {
    for ((o, spec), (&si, _)) in out.iter_mut().zip(model.specs()).zip(s.iter().zip(g)) {
        *o = si * spec.pgf_eval_unchecked(g)?;
    }
    Ok(())
}

fn check_simplex(params: &[f64]) -> Result<(), ProgenyError> {
    let sum: f64 = params.iter().sum();
    if params.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-12 {
        return Err(ProgenyError::BadParameters(sum));
    }
    Ok(())
}

/// Closed-form total-progeny PGF of the stay-walk model:
/// `rho1 = (1 - r*s2 - sqrt((1 - r*s2)^2 - 4pq*s1)) / (2q)`, `rho2 = s2`.
///
/// Honesty requires `q <= p`; the value is computed for any parameters on the
/// simplex with `q > 0`.
pub fn closed_form_stay(p: f64, q: f64, r: f64, s: [f64; 2]) -> Result<[f64; 2], ProgenyError> {
    check_simplex(&[p, q, r])?;
    if q <= 0.0 || p <= 0.0 {
        return Err(ProgenyError::BadParameters(q.min(p)));
    }
    let head = 1.0 - r * s[1];
    let disc = head * head - 4.0 * p * q * s[0];
    if disc < 0.0 {
        return Err(ProgenyError::NegativeDiscriminant(disc));
    }
    Ok([(head - disc.sqrt()) / (2.0 * q), s[1]])
}

/// Closed-form total-progeny PGF of the (2-1)-walk model: `rho1` is the
/// smallest real root in `[0, 1]` of
/// `q2*(u2/u1)*g^3 + q1*g^2 - g + p*u1 = 0`, and `rho2 = rho1^2 * u2/u1`.
///
/// The root is isolated by scanning a 1e-3 grid for a sign change and then
/// bisected to 1e-14.
pub fn closed_form_21(p: f64, q1: f64, q2: f64, u: [f64; 2]) -> Result<[f64; 2], ProgenyError> {
    check_simplex(&[p, q1, q2])?;
    if p <= 0.0 {
        return Err(ProgenyError::BadParameters(p));
    }
    for &x in &u {
        if !(x > 0.0 && x <= 1.0) {
            return Err(ProgenyError::ArgumentOutsideOpenCube(x));
        }
    }
    let ratio = u[1] / u[0];
    let cubic = |g: f64| ((q2 * ratio * g + q1) * g - 1.0) * g + p * u[0];
    let root = smallest_root_in_unit_interval(cubic)?;
    Ok([root, root * root * ratio])
}

/// Smallest root of `f` in `[0, 1]`: sign-change isolation on a 1e-3 grid
/// followed by bisection to an interval of width 1e-14.
fn smallest_root_in_unit_interval<F: Fn(f64) -> f64>(f: F) -> Result<f64, ProgenyError> {
    const STEPS: usize = 1000;
    let mut x_prev = 0.0;
    let mut f_prev = f(0.0);
    if f_prev.abs() <= 1e-14 {
        return Ok(0.0);
    }
    for k in 1..=STEPS {
        let x = k as f64 / STEPS as f64;
        let fx = f(x);
        if fx.abs() <= 1e-14 {
            return Ok(x);
        }
        if f_prev.signum() != fx.signum() {
            let (mut lo, mut hi) = (x_prev, x);
            let mut f_lo = f_prev;
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                let f_mid = f(mid);
                if f_mid == 0.0 {
                    return Ok(mid);
                }
                if f_mid.signum() == f_lo.signum() {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        x_prev = x;
        f_prev = fx;
    }
    Err(ProgenyError::NoRootInUnitInterval)
}

/// Series expansion of `rho1(u^2, u)` for the stay-walk model: the generating
/// function `E(u^(T+1))` of the walk's first passage, shifted by one index.
///
/// Built from the closed form with `s1 -> u^2`, `s2 -> u`:
/// take `A(u) = (1 - r*u)^2 - 4pq*u^2`, then `(1 - r*u - sqrt(A)) / (2q)`.
pub fn progeny_series_stay(
    p: f64,
    q: f64,
    r: f64,
    order: usize,
) -> Result<TruncatedSeries, ProgenyError> {
    check_simplex(&[p, q, r])?;
    if q <= 0.0 || p <= 0.0 {
        return Err(ProgenyError::BadParameters(q.min(p)));
    }
    let a = TruncatedSeries::from_polynomial(&[1.0, -2.0 * r, r * r - 4.0 * p * q], order);
    let sqrt_a = a.sqrt()?;
    let head = TruncatedSeries::from_polynomial(&[1.0, -r], order);
    Ok(head.sub(&sqrt_a).scale(1.0 / (2.0 * q)))
}

/// Series solution `g` of `q2*s^{-1}*g^3 + q1*g^2 - g + p*s^2 = 0` with
/// `g(0) = g'(0) = 0`: the generating function `g(s) = s*h(s) = E(s^(T+1))`
/// of the (2-1) walk's first passage, where `h` is the PGF of `T`.
///
/// (Substituting `u = (s^2, s)` into the pointwise cubic of the embedded
/// model produces the constant term `p*u1 = p*s^2`; the coefficient of `s^2`
/// is then `P(T=1) = p`, and at `q2 = 0` the series reduces to `s` times the
/// simple-walk PGF, as it must.)
///
/// The fixed-point form `g <- p*s^2 + q1*g^2 + q2*s^{-1}*g^3` stabilizes the
/// coefficient of `s^n` at pass `n`, because both right-hand products only
/// involve coefficients of index `< n`. The passes are therefore folded into
/// one forward sweep that computes each coefficient once; a full residual
/// pass at the end asserts the fixed-point property of the result.
pub fn progeny_series_21(
    p: f64,
    q1: f64,
    q2: f64,
    order: usize,
) -> Result<TruncatedSeries, ProgenyError> {
    check_simplex(&[p, q1, q2])?;
    if p <= 0.0 {
        return Err(ProgenyError::BadParameters(p));
    }
    let n = order;
    let mut g = vec![0.0; n + 1];
    let mut g_sq = vec![0.0; n + 1]; // coefficients of g^2, filled as g grows
    if n >= 2 {
        g[2] = p;
    }
    for m in 3..=n {
        // (g^2)_m from final coefficients g_2..g_{m-2}
        let mut sq = 0.0;
        for k in 2..=(m - 2) {
            sq += g[k] * g[m - k];
        }
        g_sq[m] = sq;
        // (g^3)_{m+1} = sum_k (g^2)_k g_{m+1-k}; g^2 starts at s^4 and g at
        // s^2, so every g index involved is <= m-3
        let mut cb = 0.0;
        for k in 4..m {
            cb += g_sq[k] * g[m + 1 - k];
        }
        g[m] = q1 * sq + q2 * cb;
    }
    let g = TruncatedSeries::new(g);

    // Residual pass: one application of the fixed-point map over the full
    // series must reproduce g coefficientwise.
    let padded = TruncatedSeries::from_polynomial(g.coeffs(), n + 1);
    let squared = padded.mul(&padded);
    let cubed_over_s = squared.mul(&padded).divide_by_u()?;
    let image = TruncatedSeries::from_polynomial(&[0.0, 0.0, p], n)
        .add(&TruncatedSeries::from_polynomial(squared.coeffs(), n).scale(q1))
        .add(&TruncatedSeries::from_polynomial(cubed_over_s.coeffs(), n).scale(q2));
    for (i, (a, b)) in g.coeffs().iter().zip(image.coeffs()).enumerate() {
        assert!(
            (a - b).abs() <= 1e-12,
            "fixed-point residual {} at coefficient {i}",
            (a - b).abs()
        );
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gwmodel::OffspringSpec;

    struct Xor(u64);
    impl Xor {
        fn next_f64(&mut self) -> f64 {
            let mut x = self.0;
            x ^= x >> 12;
            x ^= x << 25;
            x ^= x >> 27;
            self.0 = x;
            (x.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn stay_point_matches_closed_form() {
        let model = GWModel::stay_walk(0.4, 0.3, 0.3).unwrap();
        let point = progeny_pgf_point(&model, &[0.9, 0.9], 1e-13, 1_000_000).unwrap();
        let exact = closed_form_stay(0.4, 0.3, 0.3, [0.9, 0.9]).unwrap();
        assert!((point.rho[0] - exact[0]).abs() < 1e-10);
        assert!((point.rho[1] - exact[1]).abs() < 1e-12);
        assert!(point.residual < 1e-12);
    }

    #[test]
    fn zero_component_rejected() {
        let model = GWModel::stay_walk(0.4, 0.3, 0.3).unwrap();
        assert!(matches!(
            progeny_pgf_point(&model, &[0.0, 0.5], 1e-10, 100),
            Err(ProgenyError::ArgumentOutsideOpenCube(_))
        ));
        assert!(progeny_pgf_point(&model, &[0.5, 1.0], 1e-10, 100).is_err());
    }

    #[test]
    fn deterministic_extinction_gives_rho_equals_s() {
        let model = GWModel::new(vec![
            OffspringSpec::deterministic(vec![0, 0]),
            OffspringSpec::deterministic(vec![0, 0]),
        ])
        .unwrap();
        let point = progeny_pgf_point(&model, &[0.3, 0.8], 1e-12, 10).unwrap();
        assert!((point.rho[0] - 0.3).abs() < 1e-15);
        assert!((point.rho[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rho_never_exceeds_s() {
        let model = GWModel::two_one_walk(0.6, 0.3, 0.1).unwrap();
        let mut rng = Xor(7);
        for _ in 0..50 {
            let s = [0.05 + 0.9 * rng.next_f64(), 0.05 + 0.9 * rng.next_f64()];
            let point = progeny_pgf_point(&model, &s, 1e-12, 1_000_000).unwrap();
            assert!(point.rho[0] <= s[0] + 1e-15 && point.rho[1] <= s[1] + 1e-15);
        }
    }

    #[test]
    fn closed_form_stay_at_ones() {
        // q <= p: sqrt((1-r)^2 - 4pq) = p - q, so rho1(1,1) = 1
        let rho = closed_form_stay(0.4, 0.3, 0.3, [1.0, 1.0]).unwrap();
        assert!((rho[0] - 1.0).abs() < 1e-12);
        assert_eq!(rho[1], 1.0);
    }

    #[test]
    fn closed_form_stay_kills_mass_at_s1_zero() {
        let rho = closed_form_stay(0.4, 0.3, 0.3, [0.0, 1.0]).unwrap();
        assert!(rho[0].abs() < 1e-15);
    }

    #[test]
    fn closed_form_stay_reduces_to_simple_walk_form() {
        let mut rng = Xor(99);
        for _ in 0..20 {
            let p = 0.5 + 0.4 * rng.next_f64(); // q = 1-p <= p
            let q = 1.0 - p;
            let s1 = rng.next_f64();
            let rho = closed_form_stay(p, q, 0.0, [s1, 0.7]).unwrap();
            let simple = (1.0 - (1.0 - 4.0 * p * q * s1).sqrt()) / (2.0 * q);
            assert!((rho[0] - simple).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_stay_negative_discriminant() {
        // inside the unit square the discriminant is always >= (1-u)(...) >= 0;
        // it goes negative only past s1 = 1, which must be reported
        let err = closed_form_stay(0.45, 0.45, 0.1, [1.2, 0.2]).unwrap_err();
        assert!(matches!(err, ProgenyError::NegativeDiscriminant(_)));
    }

    #[test]
    fn closed_form_21_at_ones_subcritical() {
        for (p, q1, q2) in [(0.7, 0.2, 0.1), (0.6, 0.2, 0.2), (0.6, 0.3, 0.1)] {
            assert!(p - q1 - 2.0 * q2 >= -1e-15);
            let rho = closed_form_21(p, q1, q2, [1.0, 1.0]).unwrap();
            assert!((rho[0] - 1.0).abs() < 1e-9, "({p},{q1},{q2}): {}", rho[0]);
            assert!((rho[1] - 1.0).abs() < 2e-9);
        }
    }

    #[test]
    fn closed_form_21_quadratic_degeneration() {
        let mut rng = Xor(0xabcdef);
        for _ in 0..20 {
            let p = 0.5 + 0.4 * rng.next_f64();
            let q1 = 1.0 - p;
            let u1 = 0.05 + 0.9 * rng.next_f64();
            let rho = closed_form_21(p, q1, 0.0, [u1, 0.5]).unwrap();
            let smallest = (1.0 - (1.0 - 4.0 * p * q1 * u1).sqrt()) / (2.0 * q1);
            assert!(
                (rho[0] - smallest).abs() < 1e-10,
                "{} vs {smallest}",
                rho[0]
            );
        }
    }

    #[test]
    fn closed_form_21_matches_fixed_point() {
        let model = GWModel::two_one_walk(0.6, 0.3, 0.1).unwrap();
        let mut rng = Xor(0x5151);
        for _ in 0..30 {
            let u = [0.05 + 0.9 * rng.next_f64(), 0.05 + 0.9 * rng.next_f64()];
            let point = progeny_pgf_point(&model, &u, 1e-13, 1_000_000).unwrap();
            let exact = closed_form_21(0.6, 0.3, 0.1, u).unwrap();
            assert!((point.rho[0] - exact[0]).abs() < 1e-8, "u={u:?}");
            assert!((point.rho[1] - exact[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn restart_with_halved_tolerance_agrees() {
        let model = GWModel::stay_walk(0.45, 0.35, 0.2).unwrap();
        let tol = 1e-9;
        let a = progeny_pgf_point(&model, &[0.97, 0.93], tol, 1_000_000).unwrap();
        let b = progeny_pgf_point(&model, &[0.97, 0.93], tol / 2.0, 1_000_000).unwrap();
        for (x, y) in a.rho.iter().zip(&b.rho) {
            assert!((x - y).abs() < 2.0 * tol);
        }
    }

    #[test]
    fn stay_series_low_coefficients() {
        let eta = progeny_series_stay(0.4, 0.3, 0.3, 64).unwrap();
        assert!(eta.coeff(0).abs() < 1e-15);
        assert!(eta.coeff(1).abs() < 1e-15);
        assert!((eta.coeff(2) - 0.4).abs() < 1e-14, "P(T=1) = p");
    }

    #[test]
    fn stay_series_is_honest_when_subcritical() {
        let eta = progeny_series_stay(0.4, 0.3, 0.3, 4096).unwrap();
        assert!((eta.mass() - 1.0).abs() < 1e-6);
        for (i, &c) in eta.coeffs().iter().enumerate() {
            assert!(c >= -1e-12, "coefficient {i} = {c}");
        }
    }

    #[test]
    fn stay_series_defective_mass_matches_extinction() {
        // q > p: total mass = P(T finite) = pi_1 = p/q
        let eta = progeny_series_stay(0.2, 0.6, 0.2, 4096).unwrap();
        assert!((eta.mass() - 0.2 / 0.6).abs() < 1e-9);
        let pi = GWModel::stay_walk(0.2, 0.6, 0.2).unwrap().extinction()[0];
        assert!(
            (eta.mass() - pi).abs() < 1e-9,
            "rho at 1 equals the extinction probability"
        );
    }

    #[test]
    fn two_one_series_low_coefficients() {
        let (p, q1, q2) = (0.6, 0.3, 0.1);
        let g = progeny_series_21(p, q1, q2, 64).unwrap();
        assert_eq!(g.coeff(0), 0.0);
        assert_eq!(g.coeff(1), 0.0, "T >= 1, so g = E(s^(T+1)) starts at s^2");
        assert!((g.coeff(2) - p).abs() < 1e-15, "P(T=1) = p");
        assert_eq!(g.coeff(3), 0.0, "T = 2 is impossible");
        assert!((g.coeff(4) - q1 * p * p).abs() < 1e-15, "down-up-up");
        assert!(
            (g.coeff(5) - q2 * p * p * p).abs() < 1e-15,
            "double-down then three ups"
        );
    }

    #[test]
    fn two_one_series_honest_under_drift_condition() {
        let g = progeny_series_21(0.6, 0.2, 0.2, 4096).unwrap(); // drift exactly 0
        assert!(g.coeffs().iter().all(|&c| c >= -1e-12));
        // critical boundary: mass approaches 1 with a 1/sqrt(n) tail
        assert!(g.mass() > 0.95 && g.mass() <= 1.0 + 1e-9);
        let g = progeny_series_21(0.7, 0.2, 0.1, 2048).unwrap(); // strict drift
        assert!((g.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_one_series_reduces_to_catalan_when_q2_zero() {
        // with q2 = 0 the walk is simple: coefficient of s^{n+1} in g equals
        // P(T = n) = Catalan((n-1)/2) p^{(n+1)/2} q^{(n-1)/2} for odd n
        let (p, q1) = (0.7, 0.3);
        let g = progeny_series_21(p, q1, 0.0, 52).unwrap();
        let mut catalan = 1.0f64; // C_0
        for m in 0..=24usize {
            // P(T = 2m+1), coefficient of s^{2m+2}
            if m > 0 {
                catalan *= 2.0 * (2.0 * m as f64 - 1.0) / (m as f64 + 1.0);
            }
            let expected = catalan * p.powi(m as i32 + 1) * q1.powi(m as i32);
            assert!(
                (g.coeff(2 * m + 2) - expected).abs() < 1e-12,
                "m={m}: {} vs {expected}",
                g.coeff(2 * m + 2)
            );
            if 2 * m + 1 < 52 {
                assert!(g.coeff(2 * m + 1).abs() < 1e-15, "even T impossible");
            }
        }
    }

    #[test]
    fn fixed_point_residual_on_random_grid() {
        let mut rng = Xor(0x600d_5eed);
        for _ in 0..25 {
            let p = 0.34 + 0.5 * rng.next_f64();
            let rest = 1.0 - p;
            let split = rng.next_f64();
            let (q, r) = (rest * split, rest * (1.0 - split));
            let model = GWModel::stay_walk(p, q, r).unwrap();
            let s = [0.05 + 0.9 * rng.next_f64(), 0.05 + 0.9 * rng.next_f64()];
            let point = progeny_pgf_point(&model, &s, 1e-12, 5_000_000).unwrap();
            assert!(point.residual < 1e-10, "residual {}", point.residual);
        }
    }
}
