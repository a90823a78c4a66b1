use std::io::Write;

use osseq_core::calibration::{
    binned_log_rank_fit, generate_synthetic_repo_counts, implied_gamma, ingest_values_csv, write_values_csv,
    DEFAULT_BINS,
};
use osseq_core::mc::{sample_pareto_chunked, RngSpec};
use osseq_core::CalibrationError;

const MILLION: usize = 1_000_000;

#[test]
fn pareto_two_slope_recovered_across_seeds() {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let values = sample_pareto_chunked(2.0, MILLION, &RngSpec::new(seed, 0)).unwrap();
        let fit = binned_log_rank_fit(&values, DEFAULT_BINS, 1.0).unwrap();
        worst = worst.max((fit.slope - 2.0).abs());
        assert!((fit.slope - 2.0).abs() < 0.05, "seed {seed}: slope {}", fit.slope);
        assert!(fit.r_squared > 0.99);
    }
    eprintln!("max |slope - 2| over 20 seeds: {worst:.4}");
}

#[test]
fn extreme_tail_cut_keeps_slope_with_wider_error() {
    let values = sample_pareto_chunked(2.0, MILLION, &RngSpec::new(7, 0)).unwrap();
    let full = binned_log_rank_fit(&values, DEFAULT_BINS, 1.0).unwrap();
    let top = binned_log_rank_fit(&values, DEFAULT_BINS, 0.05).unwrap();
    assert_eq!(top.n_kept, 50_000);
    assert!((top.slope - 2.0).abs() < 0.15, "slope {}", top.slope);
    assert!(top.se_slope > full.se_slope);
}

#[test]
fn synthetic_repo_counts_have_gamma_over_sigma_tail() {
    let values = generate_synthetic_repo_counts(3.0, 1.5, MILLION, &RngSpec::new(8, 0)).unwrap();
    let above = values.iter().filter(|&&x| x > 4.0).count() as f64 / values.len() as f64;
    assert!((above - 0.0625).abs() < 0.002, "survival {above}");
    let fit = binned_log_rank_fit(&values, DEFAULT_BINS, 1.0).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.05);
    assert!((implied_gamma(1.5, fit.slope).unwrap() - 3.0).abs() < 0.075);
}

#[test]
fn csv_ingestion_drops_non_positive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stars.csv");
    std::fs::write(&path, "repo,stars\na,5\nb,3\nc,0\nd,9\n").unwrap();
    let r = ingest_values_csv(&path, "stars").unwrap();
    assert_eq!(r.values, vec![5.0, 3.0, 9.0]);
    assert_eq!(r.dropped, 1);
    assert_eq!(r.malformed, 0);
}

#[test]
fn csv_ingestion_counts_malformed_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "stars,forks").unwrap();
    writeln!(f, "12,1").unwrap();
    writeln!(f, "many,2").unwrap();
    writeln!(f, ",3").unwrap();
    writeln!(f, "-4,3").unwrap();
    writeln!(f, "7").unwrap();
    drop(f);
    let r = ingest_values_csv(&path, "stars").unwrap();
    assert_eq!(r.values, vec![12.0, 7.0]);
    assert_eq!(r.malformed, 1);
    assert_eq!(r.dropped, 2);
}

#[test]
fn csv_ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    let header_only = dir.path().join("empty.csv");
    std::fs::write(&header_only, "stars\n").unwrap();
    assert!(matches!(
        ingest_values_csv(&header_only, "stars"),
        Err(CalibrationError::NoUsableRows { .. })
    ));
    assert!(matches!(
        ingest_values_csv(&header_only, "forks"),
        Err(CalibrationError::MissingColumn { .. })
    ));
    assert!(matches!(
        ingest_values_csv(&dir.path().join("absent.csv"), "stars"),
        Err(CalibrationError::Io { .. })
    ));
}

#[test]
fn csv_round_trip_preserves_fit() {
    let values = generate_synthetic_repo_counts(3.0, 1.5, 200_000, &RngSpec::new(9, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synthetic.csv");
    write_values_csv(&path, "users", &values).unwrap();
    let back = ingest_values_csv(&path, "users").unwrap();
    assert_eq!(back.values, values);
    let a = binned_log_rank_fit(&values, DEFAULT_BINS, 1.0).unwrap();
    let b = binned_log_rank_fit(&back.values, DEFAULT_BINS, 1.0).unwrap();
    assert!((a.slope - b.slope).abs() < 1e-12);
}
