//! Numerical routes to the equilibrium that do not use the reduced-form
//! entry formula: damped fixed-point iteration on free entry, a golden-section
//! planner search, and finite-difference comparative statics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError, Result};
use crate::model::{development_cost, equilibrium_at_entry, EntryElasticities, Equilibrium, ScenarioInputs};
use crate::params::ModelParams;

/// Log-space damping applied to the free-entry map.
pub const FIXED_POINT_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Step in log units for central differences.
    pub fd_step: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rel_tol: 1e-12,
            max_iter: 10_000,
            fd_step: 1e-4,
            bracket_lo: 1e-8,
            bracket_hi: 1e8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol", self.rel_tol, "must be positive"));
        }
        if self.max_iter < 1 {
            return Err(invalid("max_iter", self.max_iter as f64, "must be at least 1"));
        }
        if !(self.fd_step > 0.0) {
            return Err(invalid("fd_step", self.fd_step, "must be positive"));
        }
        if !(self.bracket_lo > 0.0 && self.bracket_lo < self.bracket_hi) {
            return Err(invalid(
                "bracket_lo",
                self.bracket_lo,
                "need 0 < bracket_lo < bracket_hi",
            ));
        }
        Ok(())
    }
}

/// Expected net payoff of entry as a function of `m`, the left-hand side of
/// the free-entry condition.
fn entry_payoff(params: &ModelParams, m: f64, pi: f64) -> f64 {
    let (s, g) = (params.sigma(), params.gamma());
    let lambda_s = params.derived().lambda_agg.powf(s);
    s / (g - s) * pi / (m * lambda_s)
}

/// Free-entry equilibrium by damped iteration of
/// `m -> sigma/(gamma-sigma) * pi / (Lambda^sigma Phi(m))` in log space,
/// starting from `m = 1`.
pub fn free_entry_fixed_point(
    params: &ModelParams,
    pi_eff: f64,
    u_eff: f64,
    settings: &SolverSettings,
) -> Result<Equilibrium> {
    free_entry_fixed_point_from(params, pi_eff, u_eff, 1.0, settings)
}

pub fn free_entry_fixed_point_from(
    params: &ModelParams,
    pi_eff: f64,
    u_eff: f64,
    m_start: f64,
    settings: &SolverSettings,
) -> Result<Equilibrium> {
    let inputs = ScenarioInputs {
        pi: pi_eff,
        u_dev: u_eff,
        u_user: u_eff,
    };
    let eq = fixed_point_with_inputs(params, &inputs, 0.0, m_start, settings)?;
    eq.require_interior(params)
}

/// Fixed-point solve for arbitrary scenario inputs, without the interior
/// check (the result is flagged instead).
pub fn fixed_point_with_inputs(
    params: &ModelParams,
    inputs: &ScenarioInputs,
    v: f64,
    m_start: f64,
    settings: &SolverSettings,
) -> Result<Equilibrium> {
    settings.validate()?;
    if !(inputs.pi > 0.0) {
        return Err(invalid("pi", inputs.pi, "must be positive"));
    }
    if !(inputs.u_dev > 0.0) {
        return Err(invalid("u", inputs.u_dev, "must be positive"));
    }
    if !(m_start > 0.0) {
        return Err(invalid("m_start", m_start, "must be positive"));
    }

    let mut log_m = m_start.ln();
    let mut change = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let m = log_m.exp();
        let phi = development_cost(params, m, inputs.pi, inputs.u_dev);
        let target = entry_payoff(params, m, inputs.pi) * m / phi;
        let next = (1.0 - FIXED_POINT_DAMPING) * log_m + FIXED_POINT_DAMPING * target.ln();
        change = (next - log_m).abs();
        log_m = next;
        if change <= settings.rel_tol {
            return Ok(equilibrium_at_entry(params, log_m.exp(), inputs, v));
        }
    }
    Err(ModelError::NoConvergence {
        iterations: settings.max_iter,
        last: log_m.exp(),
        residual: change,
    })
}

/// Planner outcome and its comparison with the decentralized equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstBestResult {
    /// Entry maximizing `U(m) - m Phi(m)`.
    pub m_fb: f64,
    pub welfare_fb: f64,
    /// `|(1/gamma) C_U m^(1/gamma - 1) - eta C_Phi m^(eta - 1)|` at `m_fb`.
    pub foc_residual: f64,
    /// Closed-form maximizer of the same objective.
    pub m_fb_analytic: f64,
    pub m_eq: f64,
    pub welfare_eq: f64,
    /// `m_eq < m_fb`.
    pub underprovision: bool,
    /// Whether developers' reward falls short of the social value of a user, `pi < q_bar u`.
    pub reward_below_social_value: bool,
}

impl FirstBestResult {
    /// True when the reward gap holds but equilibrium entry is not below the
    /// planner's choice.
    pub fn contradicts_underprovision_claim(&self) -> bool {
        self.reward_below_social_value && !self.underprovision
    }
}

/// Coefficients of `W(m) = c_u m^(1/gamma) - c_phi m^(1 - beta/gamma)`.
fn planner_coefficients(params: &ModelParams, pi: f64, u: f64) -> (f64, f64) {
    let lambda = params.derived().lambda_agg;
    let (s, g, b, tau) = (params.sigma(), params.gamma(), params.beta(), params.tau());
    let c_u = lambda.powf(s / g) * (pi / tau).powf(1.0 / s - 1.0 / g) * u;
    let c_phi = params.kappa().powf(1.0 - b) * u.powf(-b) * lambda.powf(-b * s / g) * (tau / pi).powf(b / s - b / g);
    (c_u, c_phi)
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Planner's entry choice under the baseline (`pi = pi_bar`, `u = u_base`).
///
/// Golden section on `ln m` locates the maximum to about `sqrt(eps)`; the
/// first-order condition is then solved by bisection inside the final
/// bracket, which brings the FOC residual to rounding level.
pub fn first_best(params: &ModelParams, settings: &SolverSettings) -> Result<FirstBestResult> {
    settings.validate()?;
    let (g, b) = (params.gamma(), params.beta());
    if !(g > 1.0 + b) {
        return Err(invalid(
            "gamma",
            g,
            "planner problem needs gamma > 1 + beta for an interior maximum",
        ));
    }
    let (pi, u) = (params.pi_bar(), params.u_base());
    let (c_u, c_phi) = planner_coefficients(params, pi, u);
    let eta = 1.0 - b / g;
    let welfare = |m: f64| c_u * m.powf(1.0 / g) - c_phi * m.powf(eta);
    let foc = |m: f64| c_u / g * m.powf(1.0 / g - 1.0) - eta * c_phi * m.powf(eta - 1.0);

    let (mut lo, mut hi) = (settings.bracket_lo.ln(), settings.bracket_hi.ln());
    let mut log_m = golden_section_max(|x| welfare(x.exp()), lo, hi, 1e-10, settings.max_iter);
    let mut expansions = 0;
    while (log_m - lo).abs() < 1e-6 || (hi - log_m).abs() < 1e-6 {
        if expansions >= 20 {
            return Err(ModelError::BracketFailure {
                lo: lo.exp(),
                hi: hi.exp(),
            });
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
        expansions += 1;
        log_m = golden_section_max(|x| welfare(x.exp()), lo, hi, 1e-10, settings.max_iter);
    }

    // The FOC is positive left of the maximum and negative right of it.
    let (mut a, mut z) = (log_m - 1e-3, log_m + 1e-3);
    if !(foc(a.exp()) > 0.0 && foc(z.exp()) < 0.0) {
        return Err(ModelError::BracketFailure {
            lo: a.exp(),
            hi: z.exp(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + z);
        if mid <= a || mid >= z {
            break;
        }
        if foc(mid.exp()) > 0.0 {
            a = mid;
        } else {
            z = mid;
        }
    }
    let m_fb = (0.5 * (a + z)).exp();
    let m_fb_analytic = (c_u / (g * eta * c_phi)).powf(1.0 / (eta - 1.0 / g));

    let eq = crate::model::solve_formal(params, pi, u)?;
    let welfare_eq = welfare(eq.m);
    Ok(FirstBestResult {
        m_fb,
        welfare_fb: welfare(m_fb),
        foc_residual: foc(m_fb).abs(),
        m_fb_analytic,
        m_eq: eq.m,
        welfare_eq,
        underprovision: eq.m < m_fb,
        reward_below_social_value: pi < eq.q_bar * u,
    })
}

/// Central finite differences of `ln m` from full fixed-point solves with
/// respect to `ln pi`, `ln u`, `ln kappa` and `ln tau`.
pub fn fd_elasticities(params: &ModelParams, settings: &SolverSettings) -> Result<EntryElasticities> {
    let h = settings.fd_step;
    let (pi, u) = (params.pi_bar(), params.u_base());
    let log_m = |p: &ModelParams, pi: f64, u: f64| -> Result<f64> {
        let inputs = ScenarioInputs {
            pi,
            u_dev: u,
            u_user: u,
        };
        Ok(fixed_point_with_inputs(p, &inputs, 0.0, 1.0, settings)?.m.ln())
    };
    let up = h.exp();
    let down = (-h).exp();
    let d_pi = (log_m(params, pi * up, u)? - log_m(params, pi * down, u)?) / (2.0 * h);
    let d_u = (log_m(params, pi, u * up)? - log_m(params, pi, u * down)?) / (2.0 * h);
    let kappa = params.kappa();
    let d_kappa = (log_m(&params.with("kappa", kappa * up)?, pi, u)?
        - log_m(&params.with("kappa", kappa * down)?, pi, u)?)
        / (2.0 * h);
    let tau = params.tau();
    let d_tau =
        (log_m(&params.with("tau", tau * up)?, pi, u)? - log_m(&params.with("tau", tau * down)?, pi, u)?) / (2.0 * h);
    Ok(EntryElasticities {
        pi: d_pi,
        u: d_u,
        kappa: d_kappa,
        tau: d_tau,
    })
}
