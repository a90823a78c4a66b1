//! Agent-level Monte Carlo oracle.
//!
//! Every distributional statement the closed forms rely on is re-derived here
//! from draws: Fréchet taste shocks, Pareto project quality, the outer package
//! choice, the inner usage-mode nest, and a finite-developer market that
//! iterates on free entry.
//!
//! Draws are generated in fixed-size chunks. Chunk `c` of a run with
//! `RngSpec { seed, stream_id }` uses ChaCha8 stream `(stream_id << 32) | c`,
//! so results depend only on the spec and the chunk size, never on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError, Result};
use crate::model::{solve_scenario, Scenario};
use crate::params::ModelParams;

/// Draws per chunk. Part of the reproducibility contract.
pub const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    /// Independent substream index; must be below 2^32.
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.chunk_rng(0)
    }

    fn chunk_rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream_id << 32) | chunk as u64);
        rng
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.gen::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Scale `1/Gamma(1 - 1/shape)` that normalizes a Fréchet draw to unit mean.
pub fn frechet_scale(shape: f64) -> Result<f64> {
    if !(shape > 1.0) {
        return Err(invalid("shape", shape, "Fréchet mean exists only for shape > 1"));
    }
    Ok(1.0 / libm::tgamma(1.0 - 1.0 / shape))
}

/// `p`-quantile of a Fréchet law with the given shape and scale.
pub fn frechet_quantile(shape: f64, scale: f64, p: f64) -> f64 {
    scale * (-p.ln()).powf(-1.0 / shape)
}

#[inline]
fn frechet_draw<R: Rng + ?Sized>(rng: &mut R, inv_shape: f64, scale: f64) -> f64 {
    scale * (-open01(rng).ln()).powf(-inv_shape)
}

#[inline]
fn pareto_draw<R: Rng + ?Sized>(rng: &mut R, inv_shape: f64) -> f64 {
    open01(rng).powf(-inv_shape)
}

/// Unit-mean Fréchet draws by inverse CDF, `c (-ln U)^(-1/shape)`.
pub fn sample_frechet<R: Rng + ?Sized>(shape: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let scale = frechet_scale(shape)?;
    if n == 0 {
        return Err(invalid("n", 0.0, "need at least one draw"));
    }
    let inv = 1.0 / shape;
    Ok((0..n).map(|_| frechet_draw(rng, inv, scale)).collect())
}

/// Pareto draws with unit scale, `Pr(X > x) = x^(-shape)`.
pub fn sample_pareto<R: Rng + ?Sized>(shape: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(shape > 0.0) {
        return Err(invalid("shape", shape, "Pareto shape must be positive"));
    }
    let inv = 1.0 / shape;
    Ok((0..n).map(|_| pareto_draw(rng, inv)).collect())
}

/// Runs `work(rng, len)` over `ceil(n / CHUNK)` chunks, returning results in chunk order.
fn run_chunks<T, F>(spec: &RngSpec, n: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let job = |c: usize| {
        let len = CHUNK.min(n - c * CHUNK);
        let mut rng = spec.chunk_rng(c);
        work(&mut rng, len)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(job).collect()
    }
}

/// Chunked Pareto sample; identical for a given spec regardless of threading.
pub fn sample_pareto_chunked(shape: f64, n: usize, spec: &RngSpec) -> Result<Vec<f64>> {
    if !(shape > 0.0) {
        return Err(invalid("shape", shape, "Pareto shape must be positive"));
    }
    let inv = 1.0 / shape;
    Ok(run_chunks(spec, n, |rng, len| {
        (0..len).map(|_| pareto_draw(rng, inv)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect())
}

/// Outcome of simulated package choice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceSimResult {
    /// Fraction of users choosing each package.
    pub frequencies: Vec<f64>,
    /// Binomial standard error of each frequency.
    pub standard_errors: Vec<f64>,
    /// Mean of the realized maximal utility.
    pub mean_max_utility: f64,
    pub mean_max_se: f64,
    /// `(probability, empirical quantile)` of the maximal utility at 0.1, 0.5, 0.9.
    pub quantiles: Vec<(f64, f64)>,
    pub n_draws: usize,
}

/// Closed-form choice probabilities `q^sigma / sum q^sigma`.
pub fn choice_probabilities(qualities: &[f64], sigma: f64) -> Vec<f64> {
    let w: Vec<f64> = qualities.iter().map(|q| q.powf(sigma)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Each user draws an independent unit-mean Fréchet(sigma) shock per package
/// and picks the package maximizing `shock * q * u`.
pub fn simulate_package_choice(
    qualities: &[f64],
    sigma: f64,
    u: f64,
    n_users: usize,
    spec: &RngSpec,
) -> Result<ChoiceSimResult> {
    if qualities.is_empty() {
        return Err(invalid("qualities", 0.0, "need at least one package"));
    }
    if let Some(&q) = qualities.iter().find(|&&q| !(q >= 1.0) || !q.is_finite()) {
        return Err(invalid("quality", q, "qualities lie on the support q >= 1"));
    }
    if !(u > 0.0) {
        return Err(invalid("u", u, "must be positive"));
    }
    if n_users == 0 {
        return Err(invalid("n_users", 0.0, "need at least one user"));
    }
    let scale = frechet_scale(sigma)?;
    let inv = 1.0 / sigma;
    let k = qualities.len();

    let chunks = run_chunks(spec, n_users, |rng, len| {
        let mut counts = vec![0u64; k];
        let mut maxima = Vec::with_capacity(len);
        for _ in 0..len {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (j, &q) in qualities.iter().enumerate() {
                let util = frechet_draw(rng, inv, scale) * q * u;
                if util > best {
                    best = util;
                    arg = j;
                }
            }
            counts[arg] += 1;
            maxima.push(best);
        }
        (counts, maxima)
    });

    let mut counts = vec![0u64; k];
    let mut maxima = Vec::with_capacity(n_users);
    for (c, m) in chunks {
        for (acc, x) in counts.iter_mut().zip(c) {
            *acc += x;
        }
        maxima.extend(m);
    }
    let n = n_users as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let standard_errors = frequencies.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
    let (mean, se) = mean_and_se(&maxima);
    maxima.sort_unstable_by(f64::total_cmp);
    let quantiles = [0.1, 0.5, 0.9]
        .iter()
        .map(|&p| (p, sorted_quantile(&maxima, p)))
        .collect();
    Ok(ChoiceSimResult {
        frequencies,
        standard_errors,
        mean_max_utility: mean,
        mean_max_se: se,
        quantiles,
        n_draws: n_users,
    })
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Empirical quantile of sorted data by nearest rank.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Outcome of the usage-mode nest simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NestSimResult {
    /// Share choosing AI-mediated usage.
    pub v_hat: f64,
    pub v_se: f64,
    /// Mean of `max(e1, zeta e2)`.
    pub mean_hat: f64,
    pub mean_se: f64,
    pub n_draws: usize,
}

/// Draws `(e1, e2)` i.i.d. unit-mean Fréchet(theta) and records whether
/// `zeta e2 > e1` and the value of the maximum.
pub fn simulate_usage_nest(zeta: f64, theta: f64, n: usize, spec: &RngSpec) -> Result<NestSimResult> {
    if !(zeta >= 0.0) || !zeta.is_finite() {
        return Err(invalid("zeta", zeta, "must be finite and non-negative"));
    }
    if n == 0 {
        return Err(invalid("n", 0.0, "need at least one draw"));
    }
    let scale = frechet_scale(theta)?;
    let inv = 1.0 / theta;
    let chunks = run_chunks(spec, n, |rng, len| {
        let mut vibe = 0u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..len {
            let direct = frechet_draw(rng, inv, scale);
            let mediated = zeta * frechet_draw(rng, inv, scale);
            let best = if mediated > direct {
                vibe += 1;
                mediated
            } else {
                direct
            };
            sum += best;
            sum_sq += best * best;
        }
        (vibe, sum, sum_sq)
    });
    let (vibe, sum, sum_sq) = chunks
        .into_iter()
        .fold((0u64, 0.0, 0.0), |(a, b, c), (x, y, z)| (a + x, b + y, c + z));
    let nf = n as f64;
    let v_hat = vibe as f64 / nf;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    Ok(NestSimResult {
        v_hat,
        v_se: (v_hat * (1.0 - v_hat) / nf).sqrt(),
        mean_hat: mean,
        mean_se: (var / nf).sqrt(),
        n_draws: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSimSettings {
    /// Stop when `|Δ ln m|` falls below this.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Exponent of the multiplicative update `m <- m (payoff / Phi)^damping`.
    pub damping: f64,
    /// Fewer shared projects than this is treated as a degenerate market.
    pub min_shared: usize,
}

impl Default for MarketSimSettings {
    fn default() -> Self {
        MarketSimSettings {
            rel_tol: 1e-10,
            max_iter: 500,
            damping: 0.5,
            min_shared: 50,
        }
    }
}

/// Outcome of the finite-developer market simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketSimResult {
    /// Simulated entry mass.
    pub m_hat: f64,
    /// Lowest shared quality.
    pub q0_hat: f64,
    /// Fraction of developed projects that are shared.
    pub ms_share_hat: f64,
    /// Mass of shared projects.
    pub m_s_hat: f64,
    /// `|payoff / Phi - 1|` at the final iterate.
    pub residual: f64,
    pub iterations: usize,
    pub n_developers: usize,
    /// Share of simulated users who pick one of the top 10% (by mass) shared packages.
    pub top_decile_user_share_hat: f64,
    /// Continuum value of the same share, `0.1^(1 - sigma/gamma)`.
    pub top_decile_user_share_closed: f64,
}

/// Per-developer `q^sigma` values, generated lazily in chunks so that
/// developer `i` always has the same draw.
struct QualityPool {
    spec: RngSpec,
    inv_gamma: f64,
    sigma: f64,
    values: Vec<f64>,
}

impl QualityPool {
    fn ensure(&mut self, n: usize) {
        if self.values.len() >= n {
            return;
        }
        let have_chunks = self.values.len() / CHUNK;
        let need_chunks = n.div_ceil(CHUNK);
        let (inv_gamma, sigma, spec) = (self.inv_gamma, self.sigma, self.spec);
        let job = |c: usize| {
            let mut rng = spec.chunk_rng(c);
            (0..CHUNK)
                .map(|_| pareto_draw(&mut rng, inv_gamma).powf(sigma))
                .collect::<Vec<f64>>()
        };
        #[cfg(feature = "parallel")]
        let fresh: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (have_chunks..need_chunks).into_par_iter().map(job).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let fresh: Vec<Vec<f64>> = (have_chunks..need_chunks).map(job).collect();
        self.values.truncate(have_chunks * CHUNK);
        for chunk in fresh {
            self.values.extend(chunk);
        }
    }
}

/// One realized market for entry mass `m`: developers `0..floor(m S)` with
/// unit weight plus a fractional last developer so the map is continuous in `m`.
struct MarketState {
    /// Sorted descending `(q^sigma, weight)` of shared projects.
    shared: Vec<(f64, f64)>,
    /// `(1/S) sum_shared w q^sigma`.
    a: f64,
    m_s: f64,
    payoff: f64,
    phi: f64,
}

fn market_state(params: &ModelParams, pool: &mut QualityPool, m: f64, scale: f64, pi: f64, u_dev: f64) -> MarketState {
    let total = m * scale;
    let whole = total.floor() as usize;
    let frac = total - whole as f64;
    pool.ensure(whole + 1);
    let mut devs: Vec<(f64, f64)> = pool.values[..whole].iter().map(|&x| (x, 1.0)).collect();
    if frac > 0.0 {
        devs.push((pool.values[whole], frac));
    }
    devs.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    // Share iff pi * x / A >= tau, with A the payoff-weighted mass of the
    // shared set itself; the consistent set is the longest qualifying prefix.
    let tau = params.tau();
    let mut sum = 0.0;
    let mut mass = 0.0;
    let mut k = 0;
    for &(x, w) in &devs {
        let a_next = (sum + w * x) / scale;
        if pi * x < tau * a_next {
            break;
        }
        sum += w * x;
        mass += w;
        k += 1;
    }
    devs.truncate(k);
    let a = sum / scale;
    let m_s = mass / scale;
    let payoff = if k > 0 { (pi - tau * m_s) / m } else { 0.0 };
    let dev_productivity = u_dev * a.powf(1.0 / params.sigma());
    let phi = params.kappa().powf(1.0 - params.beta()) * dev_productivity.powf(-params.beta());
    MarketState {
        shared: devs,
        a,
        m_s,
        payoff,
        phi,
    }
}

/// Finite-developer market iterated to free entry.
///
/// `n_dev_scale` developers represent one unit of developer mass. Each
/// iteration realizes `m * n_dev_scale` Pareto qualities (common random
/// numbers across iterations), solves the sharing fixed point on the realized
/// set, and moves `m` multiplicatively toward `payoff = Phi(m)`. After
/// convergence `n_users` users are assigned to shared packages by their
/// choice probabilities to measure the concentration of usage.
pub fn simulate_market(
    params: &ModelParams,
    scenario: &Scenario,
    v: f64,
    n_users: usize,
    n_dev_scale: f64,
    settings: &MarketSimSettings,
    spec: &RngSpec,
) -> Result<MarketSimResult> {
    if !(n_dev_scale >= 1.0) {
        return Err(invalid("n_dev_scale", n_dev_scale, "must be at least 1"));
    }
    if n_users == 0 {
        return Err(invalid("n_users", 0.0, "need at least one user"));
    }
    let closed = solve_scenario(params, scenario, v)?.require_interior(params)?;
    let inputs = scenario.inputs(params, v)?;

    let mut pool = QualityPool {
        spec: *spec,
        inv_gamma: 1.0 / params.gamma(),
        sigma: params.sigma(),
        values: Vec::new(),
    };

    let mut log_m = closed.m.ln();
    let mut state;
    let mut iterations = 0;
    loop {
        let m = log_m.exp();
        state = market_state(params, &mut pool, m, n_dev_scale, inputs.pi, inputs.u_dev);
        if state.shared.len() < settings.min_shared {
            return Err(ModelError::Degenerate(format!(
                "only {} of {:.0} simulated projects clear the sharing cost",
                state.shared.len(),
                m * n_dev_scale
            )));
        }
        iterations += 1;
        let step = settings.damping * (state.payoff / state.phi).ln();
        log_m += step;
        if step.abs() <= settings.rel_tol {
            break;
        }
        if iterations >= settings.max_iter {
            return Err(ModelError::NoConvergence {
                iterations,
                last: log_m.exp(),
                residual: (state.payoff / state.phi - 1.0).abs(),
            });
        }
    }
    let m_hat = log_m.exp();
    let state = market_state(params, &mut pool, m_hat, n_dev_scale, inputs.pi, inputs.u_dev);
    let q0_hat = state
        .shared
        .last()
        .map(|s| s.0.powf(1.0 / params.sigma()))
        .unwrap_or(f64::NAN);

    let top_hat = sample_top_decile_share(
        &state,
        n_dev_scale,
        n_users,
        &RngSpec::new(spec.seed, spec.stream_id + 1),
    );
    Ok(MarketSimResult {
        m_hat,
        q0_hat,
        ms_share_hat: state.m_s / m_hat,
        m_s_hat: state.m_s,
        residual: (state.payoff / state.phi - 1.0).abs(),
        iterations,
        n_developers: (m_hat * n_dev_scale).ceil() as usize,
        top_decile_user_share_hat: top_hat,
        top_decile_user_share_closed: 0.1f64.powf(1.0 - params.sigma() / params.gamma()),
    })
}

/// Samples users over the shared set with probabilities proportional to
/// `w q^sigma` and returns the share landing in the top 10% of shared mass.
fn sample_top_decile_share(state: &MarketState, scale: f64, n_users: usize, spec: &RngSpec) -> f64 {
    let mut cum_weight = Vec::with_capacity(state.shared.len());
    let mut cum_mass = 0.0;
    let mut top_end = 0;
    let mut acc = 0.0;
    for (i, &(x, w)) in state.shared.iter().enumerate() {
        acc += w * x;
        cum_weight.push(acc);
        cum_mass += w / scale;
        if cum_mass <= 0.1 * state.m_s + 1e-15 {
            top_end = i + 1;
        }
    }
    debug_assert!((acc / scale - state.a).abs() <= 1e-9 * state.a.max(1.0));
    let total = acc;
    let hits: u64 = run_chunks(spec, n_users, |rng, len| {
        let mut hits = 0u64;
        for _ in 0..len {
            let target = open01(rng) * total;
            let idx = cum_weight.partition_point(|&c| c < target);
            if idx < top_end {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    hits as f64 / n_users as f64
}
