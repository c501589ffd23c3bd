use std::path::Path;
use std::process::Command;

use rippler_cli::config::{Algorithm, RunConfig};
use rippler_cli::dataset::Dataset;
use rippler_cli::diagnose::{run_diagnose, DIAGNOSTICS_DIR};
use rippler_cli::infer::{chain_dir, run_infer, InferOptions, SAMPLES_FILE};
use rippler_cli::simulate::run_simulate;
use rippler_core::TestResult;

/// Twelve people in four households followed for twelve weeks.
fn write_design(dir: &Path, with_tests: bool) {
    let mut households = String::from("id,household\n");
    let mut covariates = String::from("id,age,sex\n");
    let mut tests = String::from("id,week,result\n");
    for j in 0..12 {
        households.push_str(&format!("p{j},h{}\n", j / 3));
        covariates.push_str(&format!("p{j},{},{}\n", 5 + 7 * j, if j % 2 == 0 { "F" } else { "M" }));
        if with_tests {
            for week in [2 + j % 3, 6 + j % 3, 11] {
                tests.push_str(&format!("p{j},{week},{}\n", u8::from((j + week) % 5 == 0)));
            }
        }
    }
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("households.csv"), households).unwrap();
    std::fs::write(dir.join("covariates.csv"), covariates).unwrap();
    std::fs::write(dir.join("tests.csv"), tests).unwrap();
}

fn small_config(algorithm: Algorithm) -> RunConfig {
    RunConfig {
        algorithm,
        iterations: 40,
        latent_updates: 20,
        burn_in: 10,
        n_steps: Some(12),
        seed: 17,
        checkpoint_every: 7,
        ..RunConfig::default()
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), read(&p)))
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_deterministic_and_matches_the_study_design() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { seed: 3, ..RunConfig::default() };
    let a = run_simulate(&cfg, None, &tmp.path().join("a")).unwrap();
    run_simulate(&cfg, None, &tmp.path().join("b")).unwrap();
    assert_eq!(dir_files(&tmp.path().join("a")), dir_files(&tmp.path().join("b")));
    assert_eq!(a.record.n_individuals, 478);
    assert_eq!(a.record.n_tests, 1659);
    let loaded = Dataset::load(&tmp.path().join("a"), None).unwrap();
    assert_eq!(loaded.n_individuals(), 478);
    assert_eq!(loaded.observations().unwrap().n_tested(), 1659);
    assert_eq!(loaded.population().unwrap().n_households(), 110);
}

#[test]
fn positive_fraction_matches_test_accuracy() {
    // Expected positives given the true states: s_e per colonised tested cell
    // and 1 − s_p per uncolonised one. Summed over replicates, the observed
    // count should lie within four standard deviations.
    let tmp = tempfile::tempdir().unwrap();
    let (mut expected, mut variance, mut observed) = (0.0, 0.0, 0.0);
    for seed in 0..5 {
        let cfg = RunConfig { seed, ..RunConfig::default() };
        let out = run_simulate(&cfg, None, &tmp.path().join(seed.to_string())).unwrap();
        for (t, j, r) in out.y.tested_cells() {
            let p = if out.truth.get(t, j) == 1 { cfg.fixed.sensitivity } else { 1.0 - cfg.fixed.specificity };
            expected += p;
            variance += p * (1.0 - p);
            observed += f64::from(u8::from(r == TestResult::Positive));
        }
    }
    assert!((observed - expected).abs() < 4.0 * variance.sqrt(), "observed {observed}, expected {expected}");
}

#[test]
fn zero_test_schedule_gives_untested_observations() {
    let tmp = tempfile::tempdir().unwrap();
    let design = tmp.path().join("design");
    write_design(&design, false);
    let cfg = small_config(Algorithm::Rippler);
    let out = run_simulate(&cfg, Some(&design), &tmp.path().join("sim")).unwrap();
    assert_eq!(out.y.n_tested(), 0);
    assert_eq!(out.y.n_steps(), 12);
    let outcomes = run_infer(&cfg, &tmp.path().join("sim"), &tmp.path().join("run"), InferOptions::default()).unwrap();
    assert_eq!(outcomes[0].retained, 30);
}

#[test]
fn ingestion_is_lossless() {
    let tmp = tempfile::tempdir().unwrap();
    write_design(&tmp.path().join("in"), true);
    let d = Dataset::load(&tmp.path().join("in"), None).unwrap();
    d.write(&tmp.path().join("out")).unwrap();
    let again = Dataset::load(&tmp.path().join("out"), None).unwrap();
    assert_eq!(d, again);
    let map = std::fs::read_to_string(tmp.path().join("out/id_map.csv")).unwrap();
    assert_eq!(map.lines().nth(4), Some("3,p3"));

    let cfg = RunConfig { seed: 9, ..RunConfig::default() };
    let sim = run_simulate(&cfg, None, &tmp.path().join("sim")).unwrap();
    let loaded = Dataset::load(&tmp.path().join("sim"), None).unwrap();
    assert_eq!(loaded, sim.dataset);
    assert_eq!(loaded.observations().unwrap(), sim.y);
}

#[test]
fn every_algorithm_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_design(&data, true);
    for algorithm in [Algorithm::Rippler, Algorithm::Rj, Algorithm::Iffbs] {
        let cfg = small_config(algorithm);
        let a = tmp.path().join(format!("{}-a", algorithm.name()));
        let b = tmp.path().join(format!("{}-b", algorithm.name()));
        run_infer(&cfg, &data, &a, InferOptions::default()).unwrap();
        run_infer(&cfg, &data, &b, InferOptions::default()).unwrap();
        assert_eq!(dir_files(&chain_dir(&a, 0)), dir_files(&chain_dir(&b, 0)), "{}", algorithm.name());
    }
}

#[test]
fn one_iteration_past_burn_in_keeps_one_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_design(&data, true);
    let cfg = RunConfig { iterations: 11, burn_in: 10, thin: 4, ..small_config(Algorithm::Rippler) };
    let out = run_infer(&cfg, &data, &tmp.path().join("run"), InferOptions::default()).unwrap();
    assert_eq!(out[0].retained, 1);
    let samples = std::fs::read_to_string(chain_dir(&tmp.path().join("run"), 0).join(SAMPLES_FILE)).unwrap();
    assert_eq!(samples.lines().count(), 2);
    assert!(samples.lines().nth(1).unwrap().starts_with("11\t"));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_design(&data, true);
    for algorithm in [Algorithm::Rippler, Algorithm::Rj, Algorithm::Iffbs] {
        let cfg = RunConfig { chains: 2, ..small_config(algorithm) };
        let full = tmp.path().join(format!("{}-full", algorithm.name()));
        let split = tmp.path().join(format!("{}-split", algorithm.name()));
        run_infer(&cfg, &data, &full, InferOptions::default()).unwrap();
        // Interrupted between checkpoints: rows past the last checkpoint are
        // discarded and regenerated.
        run_infer(&cfg, &data, &split, InferOptions { resume: false, stop_after: Some(25) }).unwrap();
        let samples = chain_dir(&split, 1).join(SAMPLES_FILE);
        let mut f = std::fs::OpenOptions::new().append(true).open(&samples).unwrap();
        std::io::Write::write_all(&mut f, b"garbage past the checkpoint\n").unwrap();
        run_infer(&cfg, &data, &split, InferOptions { resume: true, stop_after: None }).unwrap();
        for c in 0..2 {
            assert_eq!(dir_files(&chain_dir(&full, c)), dir_files(&chain_dir(&split, c)), "{} chain {c}", algorithm.name());
        }
    }
}

#[test]
fn chains_use_independent_streams() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_design(&data, true);
    let cfg = RunConfig { chains: 2, ..small_config(Algorithm::Iffbs) };
    run_infer(&cfg, &data, &tmp.path().join("run"), InferOptions::default()).unwrap();
    let a = read(&chain_dir(&tmp.path().join("run"), 0).join(SAMPLES_FILE));
    let b = read(&chain_dir(&tmp.path().join("run"), 1).join(SAMPLES_FILE));
    assert_ne!(a, b);
}

#[test]
fn diagnose_is_idempotent_and_flags_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let design = tmp.path().join("design");
    write_design(&design, true);
    let cfg = RunConfig { chains: 2, ..small_config(Algorithm::Iffbs) };
    let sim = tmp.path().join("sim");
    run_simulate(&cfg, Some(&design), &sim).unwrap();
    let run = tmp.path().join("run");
    run_infer(&cfg, &sim, &run, InferOptions::default()).unwrap();
    let first = run_diagnose(&run, Some(&sim), 0.95, true).unwrap();
    let files = dir_files(&run.join(DIAGNOSTICS_DIR));
    let second = run_diagnose(&run, Some(&sim), 0.95, true).unwrap();
    assert_eq!(files, dir_files(&run.join(DIAGNOSTICS_DIR)));
    assert_eq!(first, second);
    assert!(first.truth_in_interval().is_some());
    assert!(first.band_coverage.is_some());
    let names: Vec<String> = files.iter().map(|f| f.0.clone()).collect();
    for expected in ["summary.tsv", "colonised_band.tsv", "histogram_beta_g.tsv", "trace_beta_h.svg", "msjd_by_time.tsv"] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    let summary = std::fs::read_to_string(run.join(DIAGNOSTICS_DIR).join("summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 4);
    assert!(summary.lines().any(|l| l.starts_with("pooled\tbeta_g\t")));
}

#[test]
fn diagnose_reports_missing_output() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_diagnose(tmp.path(), None, 0.95, false).is_err());
}

#[test]
fn binary_reports_parse_errors_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_design(&data, true);
    std::fs::write(data.join("tests.csv"), "id,week,result\np0,1,0\np0,2,maybe\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rippler"))
        .args(["infer", "--iterations", "5", "--burn-in", "1", "--data-dir"])
        .arg(&data)
        .arg("--out-dir")
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("tests.csv:3"), "{stderr}");
}

#[test]
fn binary_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let design = tmp.path().join("design");
    write_design(&design, true);
    let bin = env!("CARGO_BIN_EXE_rippler");
    let sim = tmp.path().join("sim");
    let run = tmp.path().join("run");
    let status = Command::new(bin)
        .args(["simulate", "--seed", "4", "--theta", "0.2,1.0,0,0", "--data-dir"])
        .arg(&design)
        .arg("--out-dir")
        .arg(&sim)
        .status()
        .unwrap();
    assert!(status.success());
    let status = Command::new(bin)
        .args(["infer", "--algorithm", "rj", "--iterations", "30", "--latent-updates", "10", "--burn-in", "5"])
        .args(["--block-size", "2", "--thin", "2", "--seed", "4", "--data-dir"])
        .arg(&sim)
        .arg("--out-dir")
        .arg(&run)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(bin).args(["diagnose", "--out-dir"]).arg(&run).arg("--truth-dir").arg(&sim).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("beta_g: median"));
    let manifest = std::fs::read_to_string(chain_dir(&run, 0).join("manifest.json")).unwrap();
    assert!(manifest.contains("ChaCha8"));
    assert!(manifest.contains("\"algorithm\": \"rj\""));
}
