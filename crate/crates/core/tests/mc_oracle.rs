use osseq_core::mc::{
    choice_probabilities, frechet_quantile, frechet_scale, sample_frechet, sample_pareto, simulate_market,
    simulate_package_choice, simulate_usage_nest, sorted_quantile, MarketSimSettings, RngSpec,
};
use osseq_core::model::{long_run_ratios, solve_scenario, utility_multiplier, vibe_share};
use osseq_core::{ModelParams, Scenario};
use proptest::prelude::*;

const MILLION: usize = 1_000_000;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Composite Simpson rule on [a, b] with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn frechet_mean_and_cdf_at_scale() {
    let mut rng = RngSpec::new(11, 0).rng();
    let xs = sample_frechet(3.0, MILLION, &mut rng).unwrap();
    let (m, se) = mean_se(&xs);
    assert!((m - 1.0).abs() < 0.005, "mean {m}");
    assert!((m - 1.0).abs() < 6.0 * se, "mean {m} se {se}");
    let c = frechet_scale(3.0).unwrap();
    let below = xs.iter().filter(|&&x| x <= c).count() as f64 / xs.len() as f64;
    assert!((below - (-1.0f64).exp()).abs() < 0.002, "cdf {below}");
}

#[test]
fn frechet_heavy_tail_uses_median() {
    let mut rng = RngSpec::new(12, 0).rng();
    let mut xs = sample_frechet(1.5, MILLION, &mut rng).unwrap();
    xs.sort_unstable_by(f64::total_cmp);
    let c = frechet_scale(1.5).unwrap();
    let want = c * 2f64.ln().powf(-2.0 / 3.0);
    assert!((sorted_quantile(&xs, 0.5) / want - 1.0).abs() < 0.005);
    assert!((want - frechet_quantile(1.5, c, 0.5)).abs() < 1e-12);
}

#[test]
fn pareto_survival_mean_and_truncated_moment() {
    let mut rng = RngSpec::new(13, 0).rng();
    let qs = sample_pareto(3.0, MILLION, &mut rng).unwrap();
    let above = qs.iter().filter(|&&q| q > 2.0).count() as f64 / qs.len() as f64;
    assert!((above - 0.125).abs() < 0.001, "survival {above}");
    let (m, _) = mean_se(&qs);
    assert!((m - 1.5).abs() < 0.01, "mean {m}");
    // Lambda^sigma = gamma / (gamma - sigma) = 2 at sigma = 1.5
    let moment = qs.iter().map(|q| q.powf(1.5)).sum::<f64>() / qs.len() as f64;
    assert!((moment / 2.0 - 1.0).abs() < 0.02, "moment {moment}");
}

#[test]
fn pareto_rejects_non_positive_shape() {
    let mut rng = RngSpec::new(1, 0).rng();
    assert!(sample_pareto(0.0, 10, &mut rng).is_err());
}

#[test]
fn equal_qualities_split_users_evenly() {
    let r = simulate_package_choice(&[1.0; 4], 1.5, 1.0, MILLION, &RngSpec::new(21, 0)).unwrap();
    let total: f64 = r.frequencies.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    for (f, se) in r.frequencies.iter().zip(&r.standard_errors) {
        assert!((f - 0.25).abs() < 6.0 * se, "{f}");
    }
}

#[test]
fn two_package_choice_matches_closed_form_and_quadrature() {
    let sigma = 1.5;
    let closed = choice_probabilities(&[1.0, 2.0], sigma)[1];
    assert!((closed - 2f64.powf(1.5) / (1.0 + 2f64.powf(1.5))).abs() < 1e-15);
    assert!((closed - 0.738826).abs() < 5e-5);

    // Pr(2 nu_2 > nu_1) = int f(x) F(2x) dx, integrated in ln x.
    let c = frechet_scale(sigma).unwrap();
    let cdf = |x: f64| (-(x / c).powf(-sigma)).exp();
    let pdf = |x: f64| sigma / c * (x / c).powf(-sigma - 1.0) * cdf(x);
    let quad = simpson(
        |t: f64| {
            let x = t.exp();
            pdf(x) * cdf(2.0 * x) * x
        },
        -30.0,
        30.0,
        60_000,
    );
    assert!((quad - closed).abs() < 1e-9, "quadrature {quad}");

    let r = simulate_package_choice(&[1.0, 2.0], sigma, 1.0, MILLION, &RngSpec::new(22, 0)).unwrap();
    assert!((r.frequencies[1] - closed).abs() < 6.0 * r.standard_errors[1]);
}

#[test]
fn expected_max_is_power_mean() {
    let r = simulate_package_choice(&[1.0, 2.0], 3.0, 1.0, MILLION, &RngSpec::new(23, 0)).unwrap();
    let want = 9f64.powf(1.0 / 3.0);
    assert!((want - 2.080084).abs() < 1e-6);
    assert!((r.mean_max_utility / want - 1.0).abs() < 0.01);
    // the maximum is itself Fréchet with scale c (sum q^sigma)^(1/sigma)
    let scale = frechet_scale(3.0).unwrap() * want;
    for &(p, q) in &r.quantiles {
        assert!((q / frechet_quantile(3.0, scale, p) - 1.0).abs() < 0.01, "p={p}");
    }
}

#[test]
fn nest_half_adoption_at_equal_productivity() {
    let r = simulate_usage_nest(1.0, 3.5, MILLION, &RngSpec::new(31, 0)).unwrap();
    assert!((r.v_hat - 0.5).abs() < 0.003);
    assert!((r.v_hat - 0.5).abs() < 6.0 * r.v_se);
}

#[test]
fn nest_seventy_percent_adoption() {
    let zeta = (7.0f64 / 3.0).powf(1.0 / 3.0);
    let r = simulate_usage_nest(zeta, 3.0, MILLION, &RngSpec::new(32, 0)).unwrap();
    assert!((r.v_hat - 0.7).abs() < 0.003);
    let want = utility_multiplier(0.7, 3.0).unwrap();
    assert!((want - (1.0 + 7.0 / 3.0f64).powf(1.0 / 3.0)).abs() < 1e-12);
    assert!((r.mean_hat / want - 1.0).abs() < 0.01);
}

#[test]
fn nest_option_value_at_theta_two() {
    // E[max(e1, e2)] = 2^(1/2) for unit-mean Fréchet(2); variance is infinite, so 2% here.
    let r = simulate_usage_nest(1.0, 2.0, MILLION, &RngSpec::new(33, 0)).unwrap();
    assert!((r.mean_hat / 2f64.sqrt() - 1.0).abs() < 0.02, "{}", r.mean_hat);
}

#[test]
fn market_matches_closed_form_at_defaults() {
    let p = ModelParams::default();
    let r = simulate_market(
        &p,
        &Scenario::Baseline,
        0.0,
        200_000,
        1e6,
        &MarketSimSettings::default(),
        &RngSpec::new(41, 0),
    )
    .unwrap();
    let closed = solve_scenario(&p, &Scenario::Baseline, 0.0).unwrap();
    assert!((r.m_hat / closed.m - 1.0).abs() < 0.02, "m_hat {}", r.m_hat);
    assert!((r.ms_share_hat - 1.0).abs() < 0.02, "share {}", r.ms_share_hat);
    assert!(r.residual < 1e-8);
    assert!((r.top_decile_user_share_hat / r.top_decile_user_share_closed - 1.0).abs() < 0.05);
}

#[test]
fn market_long_run_entry_ratio() {
    let p = ModelParams::default().with("tau", 2.0).unwrap();
    let settings = MarketSimSettings::default();
    let base = simulate_market(
        &p,
        &Scenario::Baseline,
        0.0,
        100_000,
        1e6,
        &settings,
        &RngSpec::new(42, 0),
    )
    .unwrap();
    let lr = simulate_market(
        &p,
        &Scenario::LongRun,
        0.7,
        100_000,
        1e6,
        &settings,
        &RngSpec::new(42, 0),
    )
    .unwrap();
    let want = long_run_ratios(&p, 0.7).unwrap();
    assert!((lr.m_hat / base.m_hat - want.m_ratio).abs() < 0.02);
    assert!((lr.m_s_hat / base.m_s_hat - 0.3).abs() < 0.02);
    let closed = solve_scenario(&p, &Scenario::LongRun, 0.7).unwrap();
    assert!((lr.q0_hat / closed.q0 - 1.0).abs() < 0.02);
}

#[test]
fn simulations_are_reproducible() {
    let spec = RngSpec::new(99, 3);
    let a = simulate_package_choice(&[1.0, 1.5, 3.0], 1.5, 1.2, 150_000, &spec).unwrap();
    let b = simulate_package_choice(&[1.0, 1.5, 3.0], 1.5, 1.2, 150_000, &spec).unwrap();
    assert_eq!(a, b);
    let a = simulate_usage_nest(1.2, 3.0, 150_000, &spec).unwrap();
    let b = simulate_usage_nest(1.2, 3.0, 150_000, &spec).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn choice_frequencies_within_six_se(
        qs in proptest::collection::vec(1.0f64..5.0, 2..6),
        sigma in 1.2f64..4.0,
        seed in any::<u64>(),
    ) {
        let r = simulate_package_choice(&qs, sigma, 1.0, 40_000, &RngSpec::new(seed, 0)).unwrap();
        let probs = choice_probabilities(&qs, sigma);
        for ((f, se), p) in r.frequencies.iter().zip(&r.standard_errors).zip(&probs) {
            let band = 6.0 * (p * (1.0 - p) / 40_000.0).sqrt();
            prop_assert!((f - p).abs() <= band.max(*se * 6.0), "f={} p={}", f, p);
        }
    }

    #[test]
    fn nest_share_within_six_se(zeta in 0.3f64..2.5, theta in 1.5f64..6.0, seed in any::<u64>()) {
        let r = simulate_usage_nest(zeta, theta, 40_000, &RngSpec::new(seed, 1)).unwrap();
        let v = vibe_share(zeta, theta).unwrap();
        prop_assert!((r.v_hat - v).abs() <= 6.0 * (v * (1.0 - v) / 40_000.0).sqrt());
    }
}
