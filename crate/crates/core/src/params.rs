//! Structural primitives of the ecosystem model and the constants derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError, Result};

/// Structural parameters. Construction validates every range restriction,
/// including `gamma > sigma` and `theta > sigma`, so a `ModelParams` value is
/// always admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    sigma: f64,
    gamma: f64,
    theta: f64,
    beta: f64,
    kappa: f64,
    tau: f64,
    pi_bar: f64,
    zeta: f64,
    u_base: f64,
}

/// Unvalidated mirror of [`ModelParams`] used for (de)serialization. Missing
/// keys fall back to the clean calibration defaults.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawParams {
    pub sigma: f64,
    pub gamma: f64,
    pub theta: f64,
    pub beta: f64,
    pub kappa: f64,
    pub tau: f64,
    pub pi_bar: f64,
    pub zeta: f64,
    pub u_base: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        ModelParams::default().into()
    }
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ModelError;

    fn try_from(r: RawParams) -> Result<Self> {
        let p = ModelParams {
            sigma: r.sigma,
            gamma: r.gamma,
            theta: r.theta,
            beta: r.beta,
            kappa: r.kappa,
            tau: r.tau,
            pi_bar: r.pi_bar,
            zeta: r.zeta,
            u_base: r.u_base,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            sigma: p.sigma,
            gamma: p.gamma,
            theta: p.theta,
            beta: p.beta,
            kappa: p.kappa,
            tau: p.tau,
            pi_bar: p.pi_bar,
            zeta: p.zeta,
            u_base: p.u_base,
        }
    }
}

/// sigma = 1.5, gamma = 3, theta = 3, beta = 1/3, kappa = tau = pi_bar = u_base = 1, zeta = 0.
///
/// At these values `Lambda^sigma = 2` and the baseline equilibrium is
/// `m = 1/2`, `q0 = 1`, `Phi = 1`, `U = 1`.
impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            sigma: 1.5,
            gamma: 3.0,
            theta: 3.0,
            beta: 1.0 / 3.0,
            kappa: 1.0,
            tau: 1.0,
            pi_bar: 1.0,
            zeta: 0.0,
            u_base: 1.0,
        }
    }
}

/// Names accepted by [`ModelParams::with`].
pub const PARAM_NAMES: [&str; 9] = [
    "sigma", "gamma", "theta", "beta", "kappa", "tau", "pi_bar", "zeta", "u_base",
];

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma: f64,
        gamma: f64,
        theta: f64,
        beta: f64,
        kappa: f64,
        tau: f64,
        pi_bar: f64,
        zeta: f64,
        u_base: f64,
    ) -> Result<Self> {
        RawParams {
            sigma,
            gamma,
            theta,
            beta,
            kappa,
            tau,
            pi_bar,
            zeta,
            u_base,
        }
        .try_into()
    }

    fn validate(&self) -> Result<()> {
        let finite = |name, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, x, "must be finite"))
            }
        };
        finite("sigma", self.sigma)?;
        finite("gamma", self.gamma)?;
        finite("theta", self.theta)?;
        finite("beta", self.beta)?;
        finite("kappa", self.kappa)?;
        finite("tau", self.tau)?;
        finite("pi_bar", self.pi_bar)?;
        finite("zeta", self.zeta)?;
        finite("u_base", self.u_base)?;

        if self.sigma <= 1.0 {
            return Err(invalid("sigma", self.sigma, "must exceed 1"));
        }
        if self.gamma <= self.sigma {
            return Err(invalid(
                "gamma",
                self.gamma,
                "must exceed sigma (quality dispersion exceeds variety substitutability)",
            ));
        }
        if self.theta <= self.sigma {
            return Err(invalid(
                "theta",
                self.theta,
                "must exceed sigma (usage modes are closer substitutes than packages)",
            ));
        }
        // theta > sigma > 1 already implies theta > 1.
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", self.beta, "must lie in (0, 1)"));
        }
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", self.kappa, "must be positive"));
        }
        if self.tau <= 0.0 {
            return Err(invalid("tau", self.tau, "must be positive"));
        }
        if self.pi_bar <= 0.0 {
            return Err(invalid("pi_bar", self.pi_bar, "must be positive"));
        }
        if self.zeta < 0.0 {
            return Err(invalid("zeta", self.zeta, "must be non-negative"));
        }
        if self.u_base <= 0.0 {
            return Err(invalid("u_base", self.u_base, "must be positive"));
        }
        Ok(())
    }

    /// Returns a copy with one named parameter replaced, re-validated.
    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let mut raw = RawParams::from(*self);
        match name {
            "sigma" => raw.sigma = value,
            "gamma" => raw.gamma = value,
            "theta" => raw.theta = value,
            "beta" => raw.beta = value,
            "kappa" => raw.kappa = value,
            "tau" => raw.tau = value,
            "pi_bar" => raw.pi_bar = value,
            "zeta" => raw.zeta = value,
            "u_base" => raw.u_base = value,
            _ => return Err(invalid("parameter name", f64::NAN, "unknown parameter")),
        }
        raw.try_into()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn pi_bar(&self) -> f64 {
        self.pi_bar
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn u_base(&self) -> f64 {
        self.u_base
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants::new(self)
    }
}

/// Exponents and aggregators that recur throughout the closed forms.
///
/// Two different exponents share the symbol omega in the literature this
/// model comes from; they are kept apart here as `omega_welfare` and
/// `omega_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Quality aggregator `(gamma / (gamma - sigma))^(1/sigma)`.
    pub lambda_agg: f64,
    /// `1 - beta/gamma`.
    pub eta: f64,
    /// Reward exponent `1 + beta/sigma - beta/gamma`.
    pub a_pi: f64,
    /// `1 / (gamma - beta)`.
    pub omega_welfare: f64,
    /// `(1/theta) / (1/beta + 1/sigma - 1/gamma)`.
    pub omega_bound: f64,
}

impl DerivedConstants {
    pub fn new(p: &ModelParams) -> Self {
        let (s, g, t, b) = (p.sigma, p.gamma, p.theta, p.beta);
        DerivedConstants {
            lambda_agg: (g / (g - s)).powf(1.0 / s),
            eta: 1.0 - b / g,
            a_pi: 1.0 + b / s - b / g,
            omega_welfare: 1.0 / (g - b),
            omega_bound: (1.0 / t) / (1.0 / b + 1.0 / s - 1.0 / g),
        }
    }
}
