//! Truncated formal power series over `f64`.
//!
//! A [`TruncatedSeries`] of order `N` is a polynomial representative of a
//! power series modulo `u^(N+1)`. All arithmetic is exact modulo `u^(N+1)`:
//! no operation reads or writes coefficients beyond index `N`.
//!
//! Coefficients may be negative; probability-validity checks belong to the
//! callers, not here.

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Constant terms smaller than this are treated as zero when inverting.
pub const DIV_CONSTANT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("division by a series with constant term {0} (|b0| <= 1e-12)")]
    DivisionByZeroConstant(f64),
    #[error("square root of a series with non-positive constant term {0}")]
    NonPositiveConstant(f64),
    #[error("cannot divide by u: constant term {0} is not zero")]
    NonZeroLowCoefficient(f64),
}

/// Coefficients `c_0..c_N` of a univariate formal power series mod `u^(N+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    /// Wraps an explicit coefficient vector `c_0..c_N`. Must be non-empty.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least the u^0 term");
        Self { coeffs }
    }

    /// The zero series of the given order.
    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
        }
    }

    /// The constant series `c + 0*u + ...` of the given order.
    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Self { coeffs }
    }

    /// A polynomial, zero-padded or truncated to the given order.
    pub fn from_polynomial(poly: &[f64], order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        for (c, p) in coeffs.iter_mut().zip(poly) {
            *c = *p;
        }
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `u^n`; zero beyond the truncation order.
    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    fn check_order(&self, other: &Self, op: &str) {
        assert_eq!(
            self.order(),
            other.order(),
            "{op}: order mismatch ({} vs {})",
            self.order(),
            other.order()
        );
    }

    /// Componentwise sum. Panics on order mismatch.
    pub fn add(&self, other: &Self) -> Self {
        self.check_order(other, "add");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Self { coeffs }
    }

    /// Componentwise difference. Panics on order mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        self.check_order(other, "sub");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Self { coeffs }
    }

    /// Scalar multiple.
    pub fn scale(&self, k: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Cauchy product truncated at the common order. Panics on order mismatch.
    pub fn mul(&self, other: &Self) -> Self {
        self.check_order(other, "mul");
        let n = self.coeffs.len();
        let mut coeffs = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (c, &b) in coeffs[i..].iter_mut().zip(&other.coeffs[..n - i]) {
                *c += a * b;
            }
        }
        Self { coeffs }
    }

    /// Quotient `c` with `c*other = self` mod `u^(N+1)`, by the forward
    /// recurrence `c_n = (a_n - sum_{k=1..n} b_k c_{n-k}) / b_0`.
    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other, "div");
        let b0 = other.coeffs[0];
        if b0.abs() <= DIV_CONSTANT_EPS {
            return Err(SeriesError::DivisionByZeroConstant(b0));
        }
        let n = self.coeffs.len();
        let mut coeffs = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.coeffs[i];
            for k in 1..=i {
                acc -= other.coeffs[k] * coeffs[i - k];
            }
            coeffs[i] = acc / b0;
        }
        Ok(Self { coeffs })
    }

    /// Positive-branch square root: `b` with `b*b = self` mod `u^(N+1)` and
    /// `b_0 = +sqrt(a_0)`, by `b_n = (a_n - sum_{k=1..n-1} b_k b_{n-k}) / (2 b_0)`.
    pub fn sqrt(&self) -> Result<Self, SeriesError> {
        let a0 = self.coeffs[0];
        if a0 <= 0.0 {
            return Err(SeriesError::NonPositiveConstant(a0));
        }
        let n = self.coeffs.len();
        let mut coeffs = vec![0.0; n];
        coeffs[0] = a0.sqrt();
        let inv = 1.0 / (2.0 * coeffs[0]);
        for i in 1..n {
            let mut acc = self.coeffs[i];
            for k in 1..i {
                acc -= coeffs[k] * coeffs[i - k];
            }
            coeffs[i] = acc * inv;
        }
        Ok(Self { coeffs })
    }

    /// Horner evaluation of the truncating polynomial at `u`.
    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    /// Divides by `u`, i.e. shifts coefficients down one index. The constant
    /// term must already be (numerically) zero; the order drops by one.
    pub fn divide_by_u(&self) -> Result<Self, SeriesError> {
        let c0 = self.coeffs[0];
        if c0.abs() > DIV_CONSTANT_EPS {
            return Err(SeriesError::NonZeroLowCoefficient(c0));
        }
        assert!(self.coeffs.len() > 1, "divide_by_u needs order >= 1");
        Ok(Self {
            coeffs: self.coeffs[1..].to_vec(),
        })
    }

    /// Sum of all stored coefficients (= eval at 1, without Horner rounding).
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: Self) -> TruncatedSeries {
        TruncatedSeries::add(self, rhs)
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: Self) -> TruncatedSeries {
        TruncatedSeries::sub(self, rhs)
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: Self) -> TruncatedSeries {
        TruncatedSeries::mul(self, rhs)
    }
}

/// A bivariate truncated series: coefficients `a_{i,j}` stored for `i+j <= N`.
///
/// Entries outside the triangle are never stored or read.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries2 {
    order: usize,
    // Row-major triangular storage: row i holds a_{i,0}..a_{i,N-i}.
    coeffs: Vec<f64>,
}

impl TruncatedSeries2 {
    pub fn zeros(order: usize) -> Self {
        let len = (order + 1) * (order + 2) / 2;
        Self {
            order,
            coeffs: vec![0.0; len],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + j <= self.order);
        // offset of row i: sum_{k<i} (N+1-k)
        i * (self.order + 1) - i * (i.saturating_sub(1)) / 2 + j
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            return 0.0;
        }
        self.coeffs[self.index(i, j)]
    }

    /// Sets `a_{i,j}`. Panics outside the triangle `i+j <= N`.
    pub fn set_coeff(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i + j <= self.order,
            "coefficient ({i},{j}) outside order {}",
            self.order
        );
        let idx = self.index(i, j);
        self.coeffs[idx] = value;
    }

    /// Sum of all stored coefficients.
    pub fn total_mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// The univariate series of `a(u^w1, u^w2)`: the coefficient of `u^n` is
    /// the sum of `a_{i,j}` over `w1*i + w2*j = n`.
    ///
    /// The output order is `N * max(w1, w2)` so that every stored entry of
    /// the triangle lands in range and total mass is preserved.
    pub fn substitute_weighted(&self, w1: usize, w2: usize) -> TruncatedSeries {
        assert!(w1 >= 1 && w2 >= 1, "weights must be positive integers");
        let out_order = self.order * w1.max(w2);
        let mut out = vec![0.0; out_order + 1];
        for i in 0..=self.order {
            for j in 0..=(self.order - i) {
                out[w1 * i + w2 * j] += self.coeff(i, j);
            }
        }
        TruncatedSeries::new(out)
    }
}

/// `b_n = (2n-1)!!/(2n)!!`, the coefficients of `1/sqrt(1-u)`, for `n = 0..=n_max`.
///
/// Computed by the multiplicative recurrence `b_n = b_{n-1} (2n-1)/(2n)`;
/// double factorials are never formed explicitly, so there is no overflow
/// even for `n` in the millions.
pub fn inv_sqrt_one_minus_u_coeffs(n_max: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(n_max + 1);
    b.push(1.0);
    for n in 1..=n_max {
        let prev = b[n - 1];
        b.push(prev * (2.0 * n as f64 - 1.0) / (2.0 * n as f64));
    }
    b
}

/// `a_n(x)`: `a_0 = 1` and `a_n = ((2n-3)!!/(2n)!!) x^n` for `n >= 1`, the
/// magnitudes of the coefficients of `sqrt(1-x u)` (so that
/// `sum_n a_n(x) = 2 - sqrt(1-x)` for `|x| < 1`).
///
/// Multiplicative recurrence `a_n = a_{n-1} x (2n-3)/(2n)`; for large `n` the
/// terms underflow gracefully to zero, which is harmless in convolutions.
pub fn sqrt_one_minus_xu_abs_coeffs(x: f64, n_max: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(n_max + 1);
    a.push(1.0);
    if n_max >= 1 {
        a.push(x / 2.0);
    }
    for n in 2..=n_max {
        let prev = a[n - 1];
        a.push(prev * x * (2.0 * n as f64 - 3.0) / (2.0 * n as f64));
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!(
                (x - y).abs() <= tol,
                "coefficient {i}: {x} vs {y} (diff {})",
                (x - y).abs()
            );
        }
    }

    // Small deterministic generator for the random-series invariants.
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
        fn series(&mut self, order: usize, lo: f64, hi: f64) -> TruncatedSeries {
            TruncatedSeries::new(
                (0..=order)
                    .map(|_| lo + (hi - lo) * self.next_f64())
                    .collect(),
            )
        }
    }

    #[test]
    fn add_componentwise() {
        let a = TruncatedSeries::new(vec![1.0, 0.0, 0.0]);
        let b = TruncatedSeries::new(vec![0.0, 1.0, 0.0]);
        assert_eq!(a.add(&b).coeffs(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn add_zero_is_identity() {
        let a = TruncatedSeries::new(vec![0.3, -0.7, 2.5]);
        assert_eq!(a.add(&TruncatedSeries::zeros(2)), a);
    }

    #[test]
    fn add_cancellation() {
        let a = TruncatedSeries::new(vec![1.0, -1.0]);
        let b = TruncatedSeries::new(vec![0.0, 1.0]);
        assert_eq!(a.add(&b).coeffs(), &[1.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "order mismatch")]
    fn add_order_mismatch_panics() {
        let a = TruncatedSeries::zeros(2);
        let b = TruncatedSeries::zeros(3);
        let _ = a.add(&b);
    }

    #[test]
    fn mul_square_of_one_plus_u() {
        let a = TruncatedSeries::new(vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.mul(&a).coeffs(), &[1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn mul_unit_is_identity() {
        let a = TruncatedSeries::new(vec![0.2, 1.5, -3.0, 0.25]);
        let unit = TruncatedSeries::constant(1.0, 3);
        assert_eq!(a.mul(&unit), a);
    }

    #[test]
    fn mul_one_minus_u_times_geometric() {
        let a = TruncatedSeries::new(vec![1.0, -1.0, 0.0, 0.0]);
        let b = TruncatedSeries::new(vec![1.0, 1.0, 1.0, 1.0]);
        // (1-u) * 1/(1-u) = 1, checked by direct convolution
        assert_eq!(a.mul(&b).coeffs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn div_geometric_series() {
        let one = TruncatedSeries::new(vec![1.0, 0.0, 0.0, 0.0]);
        let b = TruncatedSeries::new(vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(one.div(&b).unwrap().coeffs(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn div_by_unit_is_identity() {
        let a = TruncatedSeries::new(vec![0.4, -2.0, 7.0]);
        let unit = TruncatedSeries::constant(1.0, 2);
        assert_eq!(a.div(&unit).unwrap(), a);
    }

    #[test]
    fn div_inverts_mul_example() {
        let a = TruncatedSeries::new(vec![1.0, 2.0, 1.0, 0.0]);
        let b = TruncatedSeries::new(vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.div(&b).unwrap().coeffs(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn div_by_zero_constant_errors() {
        let a = TruncatedSeries::constant(1.0, 2);
        let b = TruncatedSeries::new(vec![1e-15, 1.0, 0.0]);
        assert!(matches!(
            a.div(&b),
            Err(SeriesError::DivisionByZeroConstant(_))
        ));
    }

    #[test]
    fn sqrt_of_one_minus_u() {
        let a = TruncatedSeries::new(vec![1.0, -1.0, 0.0, 0.0, 0.0]);
        let expected = [1.0, -0.5, -1.0 / 8.0, -1.0 / 16.0, -5.0 / 128.0];
        assert_close(a.sqrt().unwrap().coeffs(), &expected, 1e-15);
    }

    #[test]
    fn sqrt_of_constant() {
        let a = TruncatedSeries::new(vec![4.0, 0.0, 0.0]);
        assert_eq!(a.sqrt().unwrap().coeffs(), &[2.0, 0.0, 0.0]);
    }

    #[test]
    fn sqrt_of_perfect_square() {
        let a = TruncatedSeries::new(vec![1.0, 2.0, 1.0]);
        assert_close(a.sqrt().unwrap().coeffs(), &[1.0, 1.0, 0.0], 1e-15);
    }

    #[test]
    fn sqrt_rejects_nonpositive_constant() {
        let a = TruncatedSeries::new(vec![-1.0, 0.0]);
        assert!(matches!(a.sqrt(), Err(SeriesError::NonPositiveConstant(_))));
        let z = TruncatedSeries::new(vec![0.0, 1.0]);
        assert!(z.sqrt().is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(TruncatedSeries::new(vec![1.0, 1.0, 1.0]).eval(0.0), 1.0);
        assert_eq!(TruncatedSeries::new(vec![1.0, 2.0, 3.0]).eval(1.0), 6.0);
        // finite geometric sum: 1 + 1/2 + ... + 2^-N at u=1 equals 2 - 2^-N
        let n = 20i32;
        let geo = TruncatedSeries::new((0..=n).map(|k| 0.5f64.powi(k)).collect());
        let expected = 2.0 - 0.5f64.powi(n);
        assert!((geo.eval(1.0) - expected).abs() < 1e-14);
    }

    // The round-trip identities are exact in exact arithmetic. In f64 the
    // inverse/sqrt recurrences amplify rounding geometrically when the tail
    // dominates the constant term, so the random inputs keep the tail small
    // relative to c0; the identities are then good to 1e-10 absolute at N=64.

    #[test]
    fn sqrt_mul_round_trip_random() {
        let mut rng = Xor(0x1234_5678_9abc_def0);
        for _ in 0..20 {
            let mut c: Vec<f64> = rng.series(64, -0.4, 0.4).coeffs().to_vec();
            c[0] = 0.75 + rng.next_f64(); // a0 in [0.75, 1.75]
            let a = TruncatedSeries::new(c);
            let s = a.sqrt().unwrap();
            assert_close(s.mul(&s).coeffs(), a.coeffs(), 1e-10);
        }
    }

    #[test]
    fn div_is_right_inverse_of_mul_random() {
        let mut rng = Xor(0xfeed_f00d_dead_beef);
        for _ in 0..20 {
            let a = rng.series(64, -1.0, 1.0);
            let mut c: Vec<f64> = rng.series(64, -0.05, 0.05).coeffs().to_vec();
            let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            c[0] = sign * (0.1 + rng.next_f64()); // |b0| >= 0.1
            let b = TruncatedSeries::new(c);
            let q = a.div(&b).unwrap();
            assert_close(q.mul(&b).coeffs(), a.coeffs(), 1e-10);
        }
    }

    #[test]
    fn sqrt_matches_double_factorial_recurrence_to_200() {
        // sqrt(1-u) has coefficients -(2n-3)!!/(2n)!!, via t_n = t_{n-1}(2n-3)/(2n)
        let n = 200;
        let a = TruncatedSeries::from_polynomial(&[1.0, -1.0], n);
        let s = a.sqrt().unwrap();
        let mut t = 0.5; // (2*1-3)!!/(2*1)!! = 1/2
        for k in 1..=n {
            if k >= 2 {
                t *= (2.0 * k as f64 - 3.0) / (2.0 * k as f64);
            }
            let got = s.coeff(k);
            let expected = -t;
            assert!(
                ((got - expected) / expected).abs() < 1e-12,
                "n={k}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn divide_by_u_shifts() {
        let a = TruncatedSeries::new(vec![0.0, 2.0, 3.0]);
        assert_eq!(a.divide_by_u().unwrap().coeffs(), &[2.0, 3.0]);
        let b = TruncatedSeries::new(vec![1.0, 2.0]);
        assert!(b.divide_by_u().is_err());
    }

    #[test]
    fn bivariate_monomial_substitution() {
        // a(s1,s2) = s1*s2 with weights (2,1) maps to the u^3 term only
        let mut a = TruncatedSeries2::zeros(2);
        a.set_coeff(1, 1, 1.0);
        let u = a.substitute_weighted(2, 1);
        for n in 0..=u.order() {
            let expected = if n == 3 { 1.0 } else { 0.0 };
            assert_eq!(u.coeff(n), expected, "u^{n}");
        }
    }

    #[test]
    fn bivariate_constant_substitution() {
        let mut a = TruncatedSeries2::zeros(3);
        a.set_coeff(0, 0, 1.0);
        let u = a.substitute_weighted(2, 1);
        assert_eq!(u.coeff(0), 1.0);
        assert_eq!(u.coeffs()[1..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn bivariate_two_monomials() {
        // a = s1 + s2, weights (2,1) -> u^2 + u^1
        let mut a = TruncatedSeries2::zeros(2);
        a.set_coeff(1, 0, 1.0);
        a.set_coeff(0, 1, 1.0);
        let u = a.substitute_weighted(2, 1);
        assert_eq!(u.coeff(0), 0.0);
        assert_eq!(u.coeff(1), 1.0);
        assert_eq!(u.coeff(2), 1.0);
        assert_eq!(u.coeff(3), 0.0);
    }

    #[test]
    fn substitution_preserves_total_mass() {
        let mut rng = Xor(0x0bad_cafe_0bad_cafe);
        let mut a = TruncatedSeries2::zeros(9);
        for i in 0..=9 {
            for j in 0..=(9 - i) {
                a.set_coeff(i, j, rng.next_f64());
            }
        }
        let u = a.substitute_weighted(2, 1);
        assert!((u.mass() - a.total_mass()).abs() < 1e-12);
        assert!((u.eval(1.0) - a.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn double_factorial_sequences() {
        let b = inv_sqrt_one_minus_u_coeffs(4);
        assert_close(
            &b,
            &[1.0, 0.5, 3.0 / 8.0, 15.0 / 48.0, 105.0 / 384.0],
            1e-15,
        );
        let a = sqrt_one_minus_xu_abs_coeffs(1.0, 4);
        assert_close(&a, &[1.0, 0.5, 1.0 / 8.0, 1.0 / 16.0, 5.0 / 128.0], 1e-15);
        // sum a_n(x) = 2 - sqrt(1-x)
        let x = 0.36;
        let s: f64 = sqrt_one_minus_xu_abs_coeffs(x, 400).iter().sum();
        assert!((s - (2.0 - (1.0 - x).sqrt())).abs() < 1e-12);
    }
}
