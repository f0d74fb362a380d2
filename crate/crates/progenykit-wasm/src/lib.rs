//! Browser bindings for the interactive demo page.
//!
//! Three operations back the page: the first-passage distribution of a walk
//! (with an optional Monte Carlo overlay), the critical tail curves with
//! their limit constants, and the total-progeny PGF along the diagonal of
//! the unit cube. Each returns a JSON string with `"ok": true` and the data
//! arrays, or `"ok": false` and an error message; no exceptions cross the
//! boundary.

use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use progenykit::gwmodel::GWModel;
use progenykit::mc;
use progenykit::progeny::{progeny_pgf_point, ProgenyError};
use progenykit::walks::{self, WalkSpec};

fn err_json(message: impl std::fmt::Display) -> String {
    json!({"ok": false, "error": message.to_string()}).to_string()
}

/// Analytic first-passage pmf of a walk spec (JSON descriptor), with an
/// optional empirical overlay from `mc_samples` seeded paths.
#[wasm_bindgen]
pub fn hitting_distribution(spec_json: &str, n_max: usize, mc_samples: u64, seed: u64) -> String {
    let spec = match WalkSpec::from_json(spec_json) {
        Ok(spec) => spec,
        Err(e) => return err_json(e),
    };
    if n_max == 0 || n_max > 100_000 {
        return err_json("n_max must be in 1..=100000");
    }
    let dist = match walks::analytic_hitting_pmf(&spec, n_max) {
        Ok(d) => d,
        Err(e) => return err_json(e),
    };
    let mut cdf = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    for n in 0..=n_max {
        acc += dist.prob(n);
        cdf.push(acc);
    }
    let empirical = if mc_samples > 0 {
        let e = mc::empirical_hitting(&spec, mc_samples.min(2_000_000), n_max as u64, seed);
        Some((e.probs, e.defect))
    } else {
        None
    };
    json!({
        "ok": true,
        "drift": spec.drift(),
        "drift_condition_holds": spec.drift_condition_holds(),
        "pmf": dist.probs,
        "cdf": cdf,
        "defect": dist.defect,
        "empirical_pmf": empirical.as_ref().map(|(p, _)| p.clone()),
        "empirical_defect": empirical.as_ref().map(|(_, d)| *d),
    })
    .to_string()
}

/// Log-spaced points of a critical tail curve: `sqrt(n) * value` against its
/// limit constant. `quantity` is `"theta"` (progeny tail), `"alpha"`
/// (first-passage tail), or `"convolution"` (the double-factorial
/// convolution sum, with `param = x`).
#[wasm_bindgen]
pub fn tail_curve(quantity: &str, param: f64, n_max: usize) -> String {
    if !(1..=10_000_000).contains(&n_max) {
        return err_json("n_max must be in 1..=10000000");
    }
    let limit = match quantity {
        "theta" | "alpha" => {
            if !(param > 0.0 && param < 1.0) {
                return err_json("r must lie in (0, 1)");
            }
            if quantity == "theta" {
                walks::tail_constant_progeny(param)
            } else {
                walks::tail_constant_hitting(param)
            }
        }
        "convolution" => {
            if !(-1.0..1.0).contains(&param) {
                return err_json("x must lie in (-1, 1)");
            }
            walks::convolution_limit(param)
        }
        other => return err_json(format!("unknown quantity \"{other}\"")),
    };
    let mut ns = Vec::new();
    let mut k = 0u32;
    loop {
        let n = 10f64.powf(k as f64 / 8.0).round() as usize;
        if n > n_max {
            break;
        }
        if ns.last() != Some(&n) {
            ns.push(n);
        }
        k += 1;
    }
    if ns.last() != Some(&n_max) {
        ns.push(n_max);
    }
    let mut scaled = Vec::with_capacity(ns.len());
    for &n in &ns {
        let value = match quantity {
            "theta" => walks::theta_at(param, n),
            "alpha" => walks::alpha_at(param, n),
            _ => walks::convolution_limit_check(param, n).map(|v| v / (n as f64).sqrt()),
        };
        match value {
            Ok(v) => scaled.push((n as f64).sqrt() * v),
            Err(e) => return err_json(e),
        }
    }
    json!({
        "ok": true,
        "n": ns,
        "sqrt_n_value": scaled,
        "limit": limit,
    })
    .to_string()
}

/// Total-progeny PGF of a branching model (JSON descriptor) along the
/// diagonal `s = (t, ..., t)`, with the Perron root and extinction vector.
#[wasm_bindgen]
pub fn progeny_curve(model_json: &str, points: usize) -> String {
    let model = match GWModel::from_json(model_json) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    if points == 0 || points > 2000 {
        return err_json("points must be in 1..=2000");
    }
    let mut ts = Vec::with_capacity(points);
    let mut rho = vec![Vec::with_capacity(points); model.types()];
    let mut residuals = Vec::with_capacity(points);
    for k in 1..=points {
        let t = k as f64 / (points as f64 + 1.0);
        let s = vec![t; model.types()];
        match progeny_pgf_point(&model, &s, 1e-12, 1_000_000) {
            Ok(point) => {
                ts.push(t);
                for (column, value) in rho.iter_mut().zip(&point.rho) {
                    column.push(*value);
                }
                residuals.push(point.residual);
            }
            Err(ProgenyError::NotConverged { .. }) => {
                // near-critical slow point: skip the grid node, keep the curve
                continue;
            }
            Err(e) => return err_json(e),
        }
    }
    json!({
        "ok": true,
        "t": ts,
        "rho": rho,
        "residual": residuals,
        "sigma": model.perron_root(),
        "pi": model.extinction(),
    })
    .to_string()
}
