//! Multitype Galton-Watson models: offspring laws, mean matrix, Perron root,
//! and extinction probabilities.
//!
//! An L-type model is a vector of per-type offspring laws. Each law is either
//! a finite table of (offspring-vector, probability) pairs or a member of the
//! linear-fractional ("geometric") family
//!
//! ```text
//!     phi(s) = p * s1^shift / (1 - q1*s1 - ... - qL*sL),   p + sum q_j = 1,
//! ```
//!
//! which covers both branching processes studied here: the stay-walk law uses
//! `shift = 0` and the (2-1)-walk second-type law uses `shift = 1`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("offspring probabilities must be >= 0 and sum to 1 (got sum {0})")]
    BadProbabilities(f64),
    #[error("offspring vector has {got} components, model has {expected} types")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("geometric shift exponent must be 0 or 1 (got {0})")]
    BadShift(u8),
    #[error("geometric denominator {0} <= 0 at the evaluation point")]
    GeometricDomain(f64),
    #[error("pgf argument component {0} outside [0, 1]")]
    ArgumentRange(f64),
    #[error("model must have at least one type")]
    Empty,
    #[error("model descriptor: {0}")]
    Descriptor(String),
}

/// Offspring law of one type of an L-type process.
#[derive(Clone, Debug, PartialEq)]
pub enum OffspringSpec {
    /// Finite-support table of (offspring vector, probability) rows.
    Table { entries: Vec<(Vec<u32>, f64)> },
    /// `p * s1^shift / (1 - sum_j q[j] * s_j)` with `p + sum q = 1`.
    Geometric { p: f64, q: Vec<f64>, shift: u8 },
}

const PROB_TOL: f64 = 1e-12;

impl OffspringSpec {
    /// Table law with a single deterministic offspring vector.
    pub fn deterministic(offspring: Vec<u32>) -> Self {
        OffspringSpec::Table {
            entries: vec![(offspring, 1.0)],
        }
    }

    fn validate(&self, types: usize) -> Result<(), ModelError> {
        match self {
            OffspringSpec::Table { entries } => {
                let mut sum = 0.0;
                for (v, p) in entries {
                    if v.len() != types {
                        return Err(ModelError::DimensionMismatch {
                            got: v.len(),
                            expected: types,
                        });
                    }
                    if *p < 0.0 {
                        return Err(ModelError::BadProbabilities(*p));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(ModelError::BadProbabilities(sum));
                }
                Ok(())
            }
            OffspringSpec::Geometric { p, q, shift } => {
                if q.len() != types {
                    return Err(ModelError::DimensionMismatch {
                        got: q.len(),
                        expected: types,
                    });
                }
                if *shift > 1 {
                    return Err(ModelError::BadShift(*shift));
                }
                if *p <= 0.0 || q.iter().any(|&x| x < 0.0) {
                    return Err(ModelError::BadProbabilities(*p));
                }
                let sum = p + q.iter().sum::<f64>();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(ModelError::BadProbabilities(sum));
                }
                Ok(())
            }
        }
    }

    /// Value of the offspring PGF at `s` (componentwise in `[0, 1]`).
    pub fn pgf_eval(&self, s: &[f64]) -> Result<f64, ModelError> {
        for &x in s {
            if !(0.0..=1.0).contains(&x) {
                return Err(ModelError::ArgumentRange(x));
            }
        }
        self.pgf_eval_unchecked(s)
    }

    /// Same as [`pgf_eval`](Self::pgf_eval) without the range check; used by
    /// iterative solvers whose iterates are known to stay in the domain.
    pub fn pgf_eval_unchecked(&self, s: &[f64]) -> Result<f64, ModelError> {
        match self {
            OffspringSpec::Table { entries } => {
                let mut acc = 0.0;
                for (v, p) in entries {
                    let mut term = *p;
                    for (n, &sj) in v.iter().zip(s) {
                        term *= sj.powi(*n as i32);
                    }
                    acc += term;
                }
                Ok(acc)
            }
            OffspringSpec::Geometric { p, q, shift } => {
                let denom = 1.0 - q.iter().zip(s).map(|(qj, sj)| qj * sj).sum::<f64>();
                if denom <= 0.0 {
                    return Err(ModelError::GeometricDomain(denom));
                }
                let head = if *shift == 1 { s[0] } else { 1.0 };
                Ok(p * head / denom)
            }
        }
    }

    /// Row of the mean matrix: `d phi / d s_j` at `s = 1`, analytically.
    fn mean_row(&self, types: usize) -> Vec<f64> {
        match self {
            OffspringSpec::Table { entries } => {
                let mut row = vec![0.0; types];
                for (v, p) in entries {
                    for (m, &n) in row.iter_mut().zip(v) {
                        *m += p * n as f64;
                    }
                }
                row
            }
            OffspringSpec::Geometric { p, q, shift } => {
                // At s = 1 the denominator equals p, so d/ds_j = q_j / p,
                // plus the deterministic extra child when shift = 1.
                let mut row: Vec<f64> = q.iter().map(|qj| qj / p).collect();
                if *shift == 1 {
                    row[0] += 1.0;
                }
                row
            }
        }
    }

    /// True when some second partial derivative of the PGF is nonzero.
    fn is_nonlinear(&self) -> bool {
        match self {
            OffspringSpec::Table { entries } => entries
                .iter()
                .any(|(v, p)| *p > 0.0 && v.iter().map(|&n| n as u64).sum::<u64>() >= 2),
            OffspringSpec::Geometric { q, .. } => q.iter().any(|&qj| qj > 0.0),
        }
    }
}

/// An L-type Galton-Watson model with its derived quantities.
#[derive(Clone, Debug)]
pub struct GWModel {
    specs: Vec<OffspringSpec>,
    mean: Vec<Vec<f64>>,
    sigma: f64,
    pi: Vec<f64>,
}

/// Default stopping tolerance for the extinction fixed-point iteration.
pub const EXTINCTION_TOL: f64 = 1e-12;
const EXTINCTION_MAX_ITER: usize = 20_000_000;

impl GWModel {
    pub fn new(specs: Vec<OffspringSpec>) -> Result<Self, ModelError> {
        if specs.is_empty() {
            return Err(ModelError::Empty);
        }
        let types = specs.len();
        for spec in &specs {
            spec.validate(types)?;
        }
        let mean: Vec<Vec<f64>> = specs.iter().map(|s| s.mean_row(types)).collect();
        let sigma = spectral_radius(&mean);
        let mut model = GWModel {
            specs,
            mean,
            sigma,
            pi: Vec::new(),
        };
        model.pi = model.extinction_prob(EXTINCTION_TOL);
        Ok(model)
    }

    /// Number of types L.
    pub fn types(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[OffspringSpec] {
        &self.specs
    }

    /// The mean offspring matrix `m[i][j] = d phi_i / d s_j` at `s = 1`.
    pub fn mean_matrix(&self) -> &[Vec<f64>] {
        &self.mean
    }

    /// Spectral radius of the mean matrix.
    pub fn perron_root(&self) -> f64 {
        self.sigma
    }

    /// Extinction probability vector computed at construction
    /// (tolerance [`EXTINCTION_TOL`]).
    pub fn extinction(&self) -> &[f64] {
        &self.pi
    }

    /// `phi(s)` componentwise.
    pub fn pgf_vector(&self, s: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.specs.iter().map(|spec| spec.pgf_eval(s)).collect()
    }

    fn pgf_vector_into(&self, s: &[f64], out: &mut [f64]) {
        for (o, spec) in out.iter_mut().zip(&self.specs) {
            // Iterates stay inside [0,1]^L where every valid spec is finite.
            *o = spec
                .pgf_eval_unchecked(s)
                .expect("pgf evaluation inside the unit cube");
        }
    }

    /// Smallest nonnegative solution of `u = phi(u)`: iterate `u <- phi(u)`
    /// from `u = 0`, which converges monotonically upward to the smallest
    /// fixed point. Stops when the sup-norm change drops below `tol`.
    pub fn extinction_prob(&self, tol: f64) -> Vec<f64> {
        assert!(tol > 0.0, "extinction tolerance must be positive");
        let types = self.types();
        let mut u = vec![0.0; types];
        let mut next = vec![0.0; types];
        for _ in 0..EXTINCTION_MAX_ITER {
            self.pgf_vector_into(&u, &mut next);
            let change = u
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            std::mem::swap(&mut u, &mut next);
            if change < tol {
                break;
            }
        }
        u
    }

    /// Checks the primitivity-plus-nonlinearity condition under which the
    /// Perron root is real and positive and governs extinction.
    pub fn check_condition1(&self) -> Condition1Report {
        let types = self.types();
        let nonlinear: Vec<bool> = self.specs.iter().map(|s| s.is_nonlinear()).collect();
        let any_nonlinear = nonlinear.iter().any(|&b| b);

        let sterile: Option<usize> = self
            .mean
            .iter()
            .position(|row| row.iter().all(|&m| m == 0.0));

        // Primitivity of the nonzero pattern: some boolean power of the
        // pattern must be all-true; if it ever is, it is by the Wielandt
        // bound L^2 - 2L + 2.
        let pattern: Vec<Vec<bool>> = self
            .mean
            .iter()
            .map(|row| row.iter().map(|&m| m > 0.0).collect())
            .collect();
        let bound = types * types - 2 * types + 2;
        let mut power = pattern.clone();
        let mut primitive = all_true(&power);
        for _ in 1..bound {
            if primitive {
                break;
            }
            power = bool_mat_mul(&power, &pattern);
            primitive = all_true(&power);
        }

        let reason = if primitive && any_nonlinear {
            None
        } else if let Some(i) = sterile {
            Some(format!("type {} sterile (zero mean-matrix row)", i + 1))
        } else if !primitive {
            Some(format!(
                "mean-matrix pattern has no strictly positive power up to the Wielandt bound {bound}"
            ))
        } else {
            Some("all offspring generating functions are linear".to_string())
        };

        Condition1Report {
            holds: primitive && any_nonlinear,
            primitive,
            nonlinear,
            reason,
        }
    }

    /// Parses the JSON model descriptor
    /// `{"L":2,"specs":[{"kind":"geometric","p":0.4,"q":[0.3,0.3],"shift":0}, ...]}`.
    ///
    /// Parsing is strict: unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::Descriptor(e.to_string()))?;
        let obj = as_object(&value, "model descriptor")?;
        check_keys(obj, &["L", "specs"], "model descriptor")?;
        let types = get(obj, "L", "model descriptor")?
            .as_u64()
            .ok_or_else(|| ModelError::Descriptor("\"L\" must be a positive integer".into()))?
            as usize;
        let specs_json = get(obj, "specs", "model descriptor")?
            .as_array()
            .ok_or_else(|| ModelError::Descriptor("\"specs\" must be an array".into()))?;
        if specs_json.len() != types {
            return Err(ModelError::Descriptor(format!(
                "\"L\" is {types} but {} specs were given",
                specs_json.len()
            )));
        }
        let specs = specs_json
            .iter()
            .map(parse_spec)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(specs)
    }

    /// The 2-type model embedded in a random walk with stay: type 1 begets a
    /// geometric brood of down-steps and stays, type 2 is sterile.
    pub fn stay_walk(p: f64, q: f64, r: f64) -> Result<Self, ModelError> {
        Self::new(vec![
            OffspringSpec::Geometric {
                p,
                q: vec![q, r],
                shift: 0,
            },
            OffspringSpec::deterministic(vec![0, 0]),
        ])
    }

    /// The 2-type model embedded in a (2-1) random walk.
    pub fn two_one_walk(p: f64, q1: f64, q2: f64) -> Result<Self, ModelError> {
        Self::new(vec![
            OffspringSpec::Geometric {
                p,
                q: vec![q1, q2],
                shift: 0,
            },
            OffspringSpec::Geometric {
                p,
                q: vec![q1, q2],
                shift: 1,
            },
        ])
    }

    /// The single-type model embedded in a simple random walk.
    pub fn simple_walk(p: f64) -> Result<Self, ModelError> {
        Self::new(vec![OffspringSpec::Geometric {
            p,
            q: vec![1.0 - p],
            shift: 0,
        }])
    }
}

/// Diagnostic result of the primitivity/nonlinearity check.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition1Report {
    pub holds: bool,
    pub primitive: bool,
    /// Per-type nonlinearity of the offspring PGF.
    pub nonlinear: Vec<bool>,
    pub reason: Option<String>,
}

/// Spectral radius of an entrywise nonnegative matrix by power iteration.
///
/// Iterates on `M + I` (same eigenvectors, radius shifted by one) so that the
/// iteration is aperiodic even for permutation-like patterns, then subtracts
/// the shift. Runs 500 iterations or until the relative change is below 1e-12.
pub fn spectral_radius(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut v = vec![1.0f64; n];
    let mut w = vec![0.0f64; n];
    let mut lambda = 0.0f64;
    for _ in 0..500 {
        for i in 0..n {
            w[i] = v[i] + m[i].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        }
        let norm = w.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
        if norm == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (norm - lambda).abs() <= 1e-12 * norm.max(1.0) {
            lambda = norm;
            break;
        }
        lambda = norm;
    }
    (lambda - 1.0).max(0.0)
}

fn bool_mat_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && b[k][j])).collect())
        .collect()
}

fn all_true(m: &[Vec<bool>]) -> bool {
    m.iter().all(|row| row.iter().all(|&b| b))
}

type JsonMap = serde_json::Map<String, serde_json::Value>;

fn as_object<'v>(v: &'v serde_json::Value, what: &str) -> Result<&'v JsonMap, ModelError> {
    v.as_object()
        .ok_or_else(|| ModelError::Descriptor(format!("{what} must be a JSON object")))
}

fn check_keys(obj: &JsonMap, allowed: &[&str], what: &str) -> Result<(), ModelError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ModelError::Descriptor(format!(
                "{what}: unknown key \"{key}\""
            )));
        }
    }
    Ok(())
}

fn get<'v>(obj: &'v JsonMap, key: &str, what: &str) -> Result<&'v serde_json::Value, ModelError> {
    obj.get(key)
        .ok_or_else(|| ModelError::Descriptor(format!("{what}: missing key \"{key}\"")))
}

fn parse_spec(v: &serde_json::Value) -> Result<OffspringSpec, ModelError> {
    let obj = as_object(v, "spec")?;
    let kind = get(obj, "kind", "spec")?
        .as_str()
        .ok_or_else(|| ModelError::Descriptor("spec \"kind\" must be a string".into()))?;
    match kind {
        "geometric" => {
            check_keys(obj, &["kind", "p", "q", "shift"], "geometric spec")?;
            let p = get(obj, "p", "geometric spec")?
                .as_f64()
                .ok_or_else(|| ModelError::Descriptor("\"p\" must be a number".into()))?;
            let q = get(obj, "q", "geometric spec")?
                .as_array()
                .ok_or_else(|| ModelError::Descriptor("\"q\" must be an array".into()))?
                .iter()
                .map(|x| {
                    x.as_f64().ok_or_else(|| {
                        ModelError::Descriptor("\"q\" entries must be numbers".into())
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let shift = match obj.get("shift") {
                None => 0,
                Some(s) => s
                    .as_u64()
                    .ok_or_else(|| ModelError::Descriptor("\"shift\" must be 0 or 1".into()))?
                    as u8,
            };
            Ok(OffspringSpec::Geometric { p, q, shift })
        }
        "table" => {
            check_keys(obj, &["kind", "entries"], "table spec")?;
            let entries = get(obj, "entries", "table spec")?
                .as_array()
                .ok_or_else(|| ModelError::Descriptor("\"entries\" must be an array".into()))?
                .iter()
                .map(parse_table_entry)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(OffspringSpec::Table { entries })
        }
        other => Err(ModelError::Descriptor(format!(
            "unknown spec kind \"{other}\""
        ))),
    }
}

fn parse_table_entry(v: &serde_json::Value) -> Result<(Vec<u32>, f64), ModelError> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| ModelError::Descriptor("table entry must be [[n1,...,nL], prob]".into()))?;
    let offspring = pair[0]
        .as_array()
        .ok_or_else(|| ModelError::Descriptor("offspring vector must be an array".into()))?
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|n| n as u32)
                .ok_or_else(|| ModelError::Descriptor("offspring counts must be integers".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let prob = pair[1]
        .as_f64()
        .ok_or_else(|| ModelError::Descriptor("entry probability must be a number".into()))?;
    Ok((offspring, prob))
}
