//! Tail calibration: binned log-rank regressions of the rank-size relation,
//! the mapping from the user-count tail to the quality tail, and the
//! identification of the usage-mode elasticity from adoption and gains.

use std::path::Path;

use serde::Serialize;

use crate::error::{CalibrationError, ModelError};
use crate::mc::{sample_pareto_chunked, RngSpec};

pub const MIN_VALUES: usize = 100;
/// Upper bound on the rank count of the smallest bin.
pub const MAX_MIN_BIN_COUNT: usize = 50;
pub const DEFAULT_BINS: usize = 60;

/// Ordinary least squares of `y` on `x` with an intercept and i.i.d. errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub se_intercept: f64,
    pub r_squared: f64,
    /// Residual standard error.
    pub sigma_hat: f64,
    pub n: usize,
}

/// Needs at least three points and non-constant `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<OlsFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let s2 = ssr / (nf - 2.0);
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some(OlsFit {
        slope,
        intercept,
        se_slope: (s2 / sxx).sqrt(),
        se_intercept: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        r_squared,
        sigma_hat: s2.sqrt(),
        n,
    })
}

/// One rank bin: the median value and the rank at which it sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankBin {
    pub rank_mid: f64,
    pub value_med: f64,
    pub first_rank: usize,
    pub last_rank: usize,
}

/// Result of [`binned_log_rank_fit`]. The slope is the tail exponent in the
/// orientation `ln(rank) = a + b (-ln value)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub se_intercept: f64,
    pub r_squared: f64,
    /// Number of non-empty bins used in the regression.
    pub n_bins: usize,
    pub bin_table: Vec<RankBin>,
    pub tail_cut: f64,
    pub n_values: usize,
    pub n_kept: usize,
}

/// Rank-size regression on log-spaced rank bins.
///
/// Values are ranked 1..N in descending order (ties keep input order), the
/// top `tail_cut` fraction is kept, and `[1, K]` is split into `n_bins`
/// geometrically spaced rank intervals. Intervals that contain no integer
/// rank are skipped, and an interval is merged into the next one until it
/// spans at least `min(K / (4 n_bins), 50)` ranks. Each remaining bin
/// contributes its median value and that element's rank; with an even count
/// the element nearer the top is used, so value and rank stay paired.
pub fn binned_log_rank_fit(values: &[f64], n_bins: usize, tail_cut: f64) -> Result<TailFit, CalibrationError> {
    if values.len() < MIN_VALUES {
        return Err(CalibrationError::TooFewValues {
            needed: MIN_VALUES,
            got: values.len(),
        });
    }
    if n_bins < 3 {
        return Err(CalibrationError::InvalidArgument {
            name: "n_bins",
            value: n_bins as f64,
            reason: "need at least 3 bins",
        });
    }
    if !(tail_cut > 0.0 && tail_cut <= 1.0) {
        return Err(CalibrationError::InvalidArgument {
            name: "tail_cut",
            value: tail_cut,
            reason: "must lie in (0, 1]",
        });
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(CalibrationError::NonPositive { index, value });
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let kept = ((tail_cut * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let log_k = (kept as f64).ln();
    // Single top order statistics are too noisy to carry a full OLS weight each.
    let min_count = (kept / (4 * n_bins)).clamp(1, MAX_MIN_BIN_COUNT);

    let mut bins = Vec::new();
    let mut start = 1usize;
    for j in 0..n_bins {
        let end = if j + 1 == n_bins {
            kept + 1
        } else {
            (((j + 1) as f64 / n_bins as f64 * log_k).exp().ceil() as usize).min(kept + 1)
        };
        if j + 1 < n_bins && end < start + min_count {
            continue;
        }
        if end > start {
            let count = end - start;
            let rank = start + (count - 1) / 2;
            bins.push(RankBin {
                rank_mid: rank as f64,
                value_med: sorted[rank - 1],
                first_rank: start,
                last_rank: end - 1,
            });
            start = end;
        }
    }
    if bins.len() < 3 {
        return Err(CalibrationError::InsufficientBins { non_empty: bins.len() });
    }

    let x: Vec<f64> = bins.iter().map(|b| -b.value_med.ln()).collect();
    let y: Vec<f64> = bins.iter().map(|b| b.rank_mid.ln()).collect();
    let fit = ols(&x, &y).ok_or(CalibrationError::InsufficientBins { non_empty: bins.len() })?;
    Ok(TailFit {
        slope: fit.slope,
        intercept: fit.intercept,
        se_slope: fit.se_slope,
        se_intercept: fit.se_intercept,
        r_squared: fit.r_squared,
        n_bins: bins.len(),
        bin_table: bins,
        tail_cut,
        n_values: values.len(),
        n_kept: kept,
    })
}

/// Quality tail implied by a user-count tail: user counts scale as `q^sigma`,
/// so their Pareto exponent is `gamma / sigma`.
pub fn implied_gamma(sigma: f64, tail_slope: f64) -> Result<f64, ModelError> {
    if !(sigma >= 1.0) {
        return Err(crate::error::invalid("sigma", sigma, "must be at least 1"));
    }
    if !(tail_slope > 0.0) {
        return Err(crate::error::invalid("tail_slope", tail_slope, "must be positive"));
    }
    Ok(sigma * tail_slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaIdentification {
    pub adoption_share: f64,
    pub productivity_gain: f64,
    pub theta_hat: f64,
    /// `theta_hat > 1`; otherwise the inputs lie outside the model's domain.
    pub in_domain: bool,
}

/// Solves `(1 - v)^(-1/theta) = 1 + g` for theta.
pub fn identify_theta(adoption_share: f64, productivity_gain: f64) -> Result<ThetaIdentification, ModelError> {
    if !(adoption_share > 0.0 && adoption_share < 1.0) {
        return Err(crate::error::invalid(
            "adoption_share",
            adoption_share,
            "must lie in (0, 1)",
        ));
    }
    if !(productivity_gain > 0.0) || !productivity_gain.is_finite() {
        return Err(crate::error::invalid(
            "productivity_gain",
            productivity_gain,
            "must be positive",
        ));
    }
    let theta_hat = -(-adoption_share).ln_1p() / productivity_gain.ln_1p();
    Ok(ThetaIdentification {
        adoption_share,
        productivity_gain,
        theta_hat,
        in_domain: theta_hat > 1.0,
    })
}

/// Draws `q ~ Pareto(gamma)` and returns `q^sigma`, a Pareto(gamma/sigma)
/// sample of user counts.
pub fn generate_synthetic_repo_counts(
    gamma: f64,
    sigma: f64,
    n: usize,
    spec: &RngSpec,
) -> Result<Vec<f64>, ModelError> {
    if !(sigma > 0.0) {
        return Err(crate::error::invalid("sigma", sigma, "must be positive"));
    }
    if !(gamma > sigma) {
        return Err(crate::error::invalid("gamma", gamma, "must exceed sigma"));
    }
    let mut qs = sample_pareto_chunked(gamma, n, spec)?;
    for q in &mut qs {
        *q = q.powf(sigma);
    }
    Ok(qs)
}

/// Values read from a CSV column together with what was discarded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub values: Vec<f64>,
    /// Missing, zero or negative entries.
    pub dropped: usize,
    /// Rows that could not be parsed (bad CSV or non-numeric cell).
    pub malformed: usize,
}

/// Reads one numeric column from a headed, comma-delimited UTF-8 file.
pub fn ingest_values_csv(path: &Path, column: &str) -> Result<IngestReport, CalibrationError> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| CalibrationError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| CalibrationError::Csv {
            path: shown.clone(),
            source,
        })?
        .clone();
    let idx = headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| CalibrationError::MissingColumn {
            column: column.to_string(),
            available: headers.iter().map(str::to_string).collect(),
        })?;

    let mut values = Vec::new();
    let (mut dropped, mut malformed) = (0, 0);
    for record in reader.records() {
        let Ok(record) = record else {
            malformed += 1;
            continue;
        };
        match record.get(idx).map(str::trim) {
            None | Some("") => dropped += 1,
            Some(cell) => match cell.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => values.push(x),
                Ok(_) => dropped += 1,
                Err(_) => malformed += 1,
            },
        }
    }
    if values.is_empty() {
        return Err(CalibrationError::NoUsableRows {
            column: column.to_string(),
            dropped,
            malformed,
        });
    }
    Ok(IngestReport {
        values,
        dropped,
        malformed,
    })
}

/// Writes a single-column CSV using shortest round-trip formatting.
pub fn write_values_csv(path: &Path, column: &str, values: &[f64]) -> Result<(), CalibrationError> {
    let shown = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|source| CalibrationError::Csv {
        path: shown.clone(),
        source,
    })?;
    let csv_err = |source| CalibrationError::Csv {
        path: shown.clone(),
        source,
    };
    w.write_record([column]).map_err(csv_err)?;
    for v in values {
        w.write_record([v.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CalibrationError::Io {
        path: shown.clone(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::utility_multiplier;

    fn power_law(n: usize) -> Vec<f64> {
        (1..=n).map(|i| (i as f64).powf(-0.5)).collect()
    }

    #[test]
    fn ols_on_a_line_is_exact() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|a| 3.0 - 0.5 * a).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-9);
        assert!(f.se_slope < 1e-9 && f.sigma_hat < 1e-9);
        assert!(ols(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
        assert!(ols(&[1.0, 2.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn ols_standard_errors_match_textbook_example() {
        // x = 1..5, y = (2, 4, 5, 4, 5): slope 0.6, intercept 2.2, SSR 2.4, Sxx 10
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 5.0, 4.0, 5.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 0.6).abs() < 1e-12);
        assert!((f.intercept - 2.2).abs() < 1e-12);
        assert!((f.se_slope - (0.8f64 / 10.0).sqrt()).abs() < 1e-12);
        assert!((f.se_intercept - (0.8f64 * (0.2 + 9.0 / 10.0)).sqrt()).abs() < 1e-12);
        assert!((f.r_squared - 0.6).abs() < 1e-12);
    }

    #[test]
    fn noiseless_power_law_is_recovered_exactly() {
        let fit = binned_log_rank_fit(&power_law(100_000), DEFAULT_BINS, 1.0).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9, "{}", fit.slope);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert!(fit.se_slope < 1e-9);
        assert!(fit.n_bins >= 3 && fit.n_bins <= DEFAULT_BINS);
        let covered: usize = fit.bin_table.iter().map(|b| b.last_rank - b.first_rank + 1).sum();
        assert_eq!(covered, 100_000);
    }

    #[test]
    fn scale_invariance_of_slope() {
        let mut values = power_law(5_000);
        for (i, v) in values.iter_mut().enumerate() {
            *v *= 1.0 + 0.3 * ((i * 7919 % 13) as f64 / 13.0);
        }
        let a = binned_log_rank_fit(&values, 40, 1.0).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * 37.5).collect();
        let b = binned_log_rank_fit(&scaled, 40, 1.0).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-9);
        assert!((b.intercept - (a.intercept + a.slope * 37.5f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        assert!(matches!(
            binned_log_rank_fit(&[1.0; 50], 10, 1.0),
            Err(CalibrationError::TooFewValues { .. })
        ));
        let mut v = power_law(200);
        v[17] = 0.0;
        assert!(matches!(
            binned_log_rank_fit(&v, 10, 1.0),
            Err(CalibrationError::NonPositive { index: 17, .. })
        ));
        assert!(binned_log_rank_fit(&power_law(200), 2, 1.0).is_err());
        assert!(binned_log_rank_fit(&power_law(200), 10, 0.0).is_err());
        assert!(binned_log_rank_fit(&power_law(200), 10, 1.5).is_err());
        // two kept ranks cannot fill three bins
        assert!(matches!(
            binned_log_rank_fit(&power_law(200), 10, 0.01),
            Err(CalibrationError::InsufficientBins { .. })
        ));
    }

    #[test]
    fn implied_gamma_examples() {
        assert_eq!(implied_gamma(1.5, 2.0).unwrap(), 3.0);
        assert_eq!(implied_gamma(1.0, 1.7).unwrap(), 1.7);
        assert!((implied_gamma(1.5, 2.24).unwrap() - 3.36).abs() < 1e-12);
        assert!(implied_gamma(1.5, 0.0).is_err());
    }

    #[test]
    fn identify_theta_examples() {
        let t = identify_theta(0.7, 0.49380).unwrap();
        assert!((t.theta_hat - 3.0).abs() < 1e-3);
        let t = identify_theta(0.5, 0.28).unwrap();
        assert!((t.theta_hat - 2.808).abs() < 1e-3);
        let t = identify_theta(0.01, 0.002).unwrap();
        assert!((t.theta_hat - 5.03).abs() < 5e-3);
        let u = utility_multiplier(0.01, t.theta_hat).unwrap();
        assert!((u - 1.002).abs() < 1e-12);
        let t = identify_theta(0.5, 2.0).unwrap();
        assert!(!t.in_domain);
        assert!(identify_theta(1.0, 0.1).is_err());
        assert!(identify_theta(0.5, 0.0).is_err());
    }

    #[test]
    fn identify_theta_inverts_multiplier_on_grid() {
        for i in 1..20 {
            let v = i as f64 / 20.0;
            for &theta in &[1.2, 2.0, 2.8, 3.0, 4.0, 7.5] {
                let g = utility_multiplier(v, theta).unwrap() - 1.0;
                let t = identify_theta(v, g).unwrap();
                assert!(
                    (t.theta_hat - theta).abs() < 1e-12 * theta.max(1.0) * 10.0,
                    "v={v} theta={theta}"
                );
            }
        }
    }

    #[test]
    fn synthetic_counts_reject_thin_quality_tail() {
        assert!(generate_synthetic_repo_counts(3.0, 3.0, 10, &RngSpec::new(1, 0)).is_err());
    }
}
