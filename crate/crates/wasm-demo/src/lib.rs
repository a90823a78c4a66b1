//! Browser bindings for the interactive page in `www/`.
//!
//! Each exported function has a plain-Rust twin (`*_rows`, `sustainability_report`)
//! so the numbers can be tested natively.

use osseq_core::model::{
    long_run_ratios, min_monetization, short_run_ratios, sustainability_checks, utility_multiplier, vibe_share,
};
use osseq_core::{BusinessModel, ModelParams};
use wasm_bindgen::prelude::*;

/// Columns per row returned by [`ratio_curves`].
pub const RATIO_COLUMNS: usize = 7;

fn params(sigma: f64, gamma: f64, theta: f64, beta: f64) -> Result<ModelParams, String> {
    ModelParams::new(sigma, gamma, theta, beta, 1.0, 1.0, 1.0, 0.0, 1.0).map_err(|e| e.to_string())
}

/// `(zeta, v, u multiplier)` on `n` points of `zeta in [0, zeta_max]`.
pub fn adoption_rows(theta: f64, zeta_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || zeta_max.is_nan() || zeta_max <= 0.0 {
        return Err("need n >= 2 and zeta_max > 0".into());
    }
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let zeta = zeta_max * i as f64 / (n - 1) as f64;
        let v = vibe_share(zeta, theta).map_err(|e| e.to_string())?;
        let u = if v < 1.0 {
            utility_multiplier(v, theta).map_err(|e| e.to_string())?
        } else {
            f64::INFINITY
        };
        out.extend([zeta, v, u]);
    }
    Ok(out)
}

/// Rows of `(v, short-run m, short-run utility, long-run m, long-run m_s,
/// long-run q_bar, long-run utility)` relative to `v = 0`, for `n` shares in
/// `[0, v_max]`.
pub fn ratio_rows(sigma: f64, gamma: f64, theta: f64, beta: f64, v_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let p = params(sigma, gamma, theta, beta)?;
    if n < 2 || !(v_max > 0.0 && v_max < 1.0) {
        return Err("need n >= 2 and v_max in (0, 1)".into());
    }
    let mut out = Vec::with_capacity(RATIO_COLUMNS * n);
    for i in 0..n {
        let v = v_max * i as f64 / (n - 1) as f64;
        let sr = short_run_ratios(&p, v).map_err(|e| e.to_string())?;
        let lr = long_run_ratios(&p, v).map_err(|e| e.to_string())?;
        out.extend([
            v,
            sr.m_ratio,
            sr.utility_ratio,
            lr.m_ratio,
            lr.ms_ratio,
            lr.qbar_ratio,
            lr.utility_ratio,
        ]);
    }
    Ok(out)
}

/// JSON summary of the monetization floor and the business-model check at one share.
pub fn sustainability_report(
    sigma: f64,
    gamma: f64,
    theta: f64,
    beta: f64,
    v: f64,
    alpha: f64,
    rho: f64,
) -> Result<String, String> {
    let p = params(sigma, gamma, theta, beta)?;
    let bm = BusinessModel::new(alpha, rho).map_err(|e| e.to_string())?;
    let bound = min_monetization(&p, v).map_err(|e| e.to_string())?;
    let s = sustainability_checks(&p, &bm, v).map_err(|e| e.to_string())?;
    let finite = |x: f64| {
        if x.is_finite() {
            serde_json::json!(x)
        } else {
            serde_json::Value::Null
        }
    };
    Ok(serde_json::json!({
        "omega": bound.omega_bound,
        "floor": bound.pi_floor_ratio,
        "max_decline": bound.max_decline(),
        "pi_ratio": bm.pi_ratio(v).map_err(|e| e.to_string())?,
        "constraint_lhs": s.constraint_lhs,
        "constraint_rhs": s.constraint_rhs,
        "sustainable": s.sustainable,
        "rho_max": finite(s.rho_max),
        "alpha_min": finite(s.alpha_min),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn adoption_curve(theta: f64, zeta_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    adoption_rows(theta, zeta_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ratio_curves(sigma: f64, gamma: f64, theta: f64, beta: f64, v_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    ratio_rows(sigma, gamma, theta, beta, v_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sustainability(
    sigma: f64,
    gamma: f64,
    theta: f64,
    beta: f64,
    v: f64,
    alpha: f64,
    rho: f64,
) -> Result<String, JsError> {
    sustainability_report(sigma, gamma, theta, beta, v, alpha, rho).map_err(|e| JsError::new(&e))
}
