//! Acceptance gate: runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! The recovery runs dominate the runtime (roughly half an hour per seed on
//! one core).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rippler_cli::diagnose::run_diagnose;
use rippler_cli::infer::{chain_dir, infer_with, ChainOutcome, InferOptions, SAMPLES_FILE};
use rippler_cli::simulate::{run_simulate, SimulateOutcome};
use rippler_cli::{Algorithm, RunConfig};
use rippler_core::baseline::iffbs::{iffbs_forward, ForwardTable};
use rippler_core::diagnostics::{exact_latent_posterior, normalise_counts, spearman, total_variation, LatticeDistribution};
use rippler_core::model::{
    observation_log_density, proposal_bounds, realise, seasonal_modifier, simulate, transmission_log_density,
};
use rippler_core::rippler::sample_noncentred;
use rippler_core::rng::{self, ChainRng};
use rippler_core::synthetic::{tiny_reference_instance, TinyInstance};
use rippler_core::{
    ColonisationMatrix, Context, FixedModel, IffbsKernel, LatentStats, LatentUpdater, ModelParams, ObservationMatrix,
    Population, RipplerConfig, RipplerKernel, RjConfig, RjKernel, TestResult,
};

const RECOVERY_SEEDS: [u64; 3] = [1, 2, 3];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn report(results: &mut BTreeMap<u32, Verdict>, id: u32, v: Verdict) {
    println!("criterion {id:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    results.insert(id, v);
}

fn random_population(n: usize, r: &mut ChainRng) -> Population {
    let mut household_of = Vec::with_capacity(n);
    let mut h = 0;
    while household_of.len() < n {
        let size = r.random_range(1..=6).min(n - household_of.len());
        household_of.extend(std::iter::repeat_n(h, size));
        h += 1;
    }
    let covariates = (0..n).map(|_| [r.random_range(-30.0..30.0), r.random_range(-0.5..0.5)]).collect();
    Population::new(household_of, covariates).unwrap()
}

fn round_trip_and_density() -> (Verdict, Verdict) {
    let start = Instant::now();
    let fixed = FixedModel::default();
    let mut r = rng::stream(2024, 0);
    let (mut exact, mut worst) = (0, 0.0f64);
    for _ in 0..100 {
        let pop = random_population(50, &mut r);
        let ctx = Context::new(&pop, &fixed);
        let theta = ModelParams::new(
            r.random_range(0.0..0.5),
            r.random_range(0.0..4.0),
            r.random_range(-0.05..0.05),
            r.random_range(-1.0..1.0),
        );
        let x = simulate(&theta, &ctx, 30, &mut r).unwrap();
        let bounds = proposal_bounds(&x, &theta, &ctx).unwrap();
        let u = sample_noncentred(&x, &bounds, &mut r);
        exact += usize::from(realise(&u, &theta, &ctx) == x);
        let log_len: f64 = bounds.lower.iter().map(|((t, j), a)| (bounds.upper.get(t, j) - a).ln()).sum();
        worst = worst.max((transmission_log_density(&x, &theta, &ctx) - log_len).abs());
    }
    let elapsed = start.elapsed();
    let trip = Verdict::new(
        exact == 100 && elapsed < Duration::from_secs(10),
        format!("round trip exact for {exact}/100 pairs in {:.2?}", elapsed),
    );
    let density = Verdict::new(worst < 1e-9, format!("max |density + sum log(1/(b-a))| = {worst:.2e}"));
    (trip, density)
}

fn tiny_start(inst: &TinyInstance, r: &mut ChainRng) -> ColonisationMatrix {
    let ctx = Context::new(&inst.population, &inst.fixed);
    loop {
        let x = simulate(&inst.theta, &ctx, inst.y.n_steps(), r).unwrap();
        if observation_log_density(&inst.y, &x, &inst.fixed) > f64::NEG_INFINITY {
            return x;
        }
    }
}

fn tiny_chain<K: LatentUpdater>(inst: &TinyInstance, mut kernel: K, seed: u64) -> (LatticeDistribution, Duration) {
    let start = Instant::now();
    let mut r = rng::stream(seed, 0);
    let mut x = tiny_start(inst, &mut r);
    kernel.prepare(&inst.theta, &x).unwrap();
    let mut stats = LatentStats::default();
    let mut counts = BTreeMap::new();
    for _ in 0..1_000_000 {
        kernel.sweep(&mut x, 1, &mut r, &mut stats).unwrap();
        *counts.entry(x.to_code()).or_insert(0u64) += 1;
    }
    (normalise_counts(&counts), start.elapsed())
}

fn exactness() -> Verdict {
    let inst = tiny_reference_instance();
    let ctx = Context::new(&inst.population, &inst.fixed);
    let exact = exact_latent_posterior(&inst.y, &inst.theta, &ctx).unwrap().probs;
    let rc = RipplerConfig { n_latent_updates: 1, n_elements: 1 };
    let runs = [
        ("rippler", tiny_chain(&inst, RipplerKernel::new(ctx, &inst.y, rc).unwrap(), 101)),
        ("rj", tiny_chain(&inst, RjKernel::new(ctx, &inst.y, RjConfig::default()).unwrap(), 102)),
        ("iffbs", tiny_chain(&inst, IffbsKernel::new(ctx, &inst.y).unwrap(), 103)),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, (dist, elapsed)) in &runs {
        let tv = total_variation(dist, &exact);
        pass &= tv < 0.02 && *elapsed < Duration::from_secs(120);
        detail.push(format!("{name} TV {tv:.4} in {elapsed:.1?}"));
    }
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            let tv = total_variation(&runs[a].1 .0, &runs[b].1 .0);
            pass &= tv < 0.03;
            detail.push(format!("{}/{} {tv:.4}", runs[a].0, runs[b].0));
        }
    }
    Verdict::new(pass, detail.join(", "))
}

fn enumerate_paths(
    j: usize,
    x: &ColonisationMatrix,
    theta: &ModelParams,
    y: &ObservationMatrix,
    ctx: &Context<'_>,
) -> Vec<(Vec<u8>, f64)> {
    let rows = x.n_rows();
    let mut out = Vec::new();
    for code in 0..(1u32 << rows) {
        let path: Vec<u8> = (0..rows).map(|t| ((code >> t) & 1) as u8).collect();
        let mut xs = x.clone();
        xs.set_column(j, &path);
        let lw = transmission_log_density(&xs, theta, ctx) + observation_log_density(y, &xs, ctx.fixed);
        out.push((path, lw));
    }
    let max = out.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = out.iter().map(|p| (p.1 - max).exp()).sum();
    out.into_iter().map(|(p, lw)| (p, (lw - max).exp() / z)).collect()
}

fn table_error(table: &ForwardTable, expected: &[(Vec<u8>, f64)]) -> f64 {
    expected.iter().map(|(path, p)| (table.path_log_prob(path).exp() - p).abs()).fold(0.0, f64::max)
}

fn iffbs_enumeration() -> Verdict {
    let mut r = rng::stream(77, 0);
    let (mut worst, mut checked) = (0.0f64, 0);
    for _ in 0..300 {
        let n = r.random_range(1..=3);
        let n_steps = r.random_range(1..=4);
        let mut h = 0;
        let households = (0..n)
            .map(|j| {
                h += usize::from(j > 0 && r.random::<bool>());
                h
            })
            .collect();
        let covariates = (0..n).map(|_| [r.random_range(-2.0..2.0), r.random_range(-0.5..0.5)]).collect();
        let pop = Population::new(households, covariates).unwrap();
        let fixed = FixedModel {
            sensitivity: r.random_range(0.5..1.0),
            specificity: r.random_range(0.6..1.0),
            gamma: r.random_range(0.1..0.9),
            p0: r.random_range(0.05..0.95),
            ..FixedModel::default()
        };
        let ctx = Context::new(&pop, &fixed);
        let theta = ModelParams::new(
            r.random_range(0.05..1.5),
            r.random_range(0.0..3.0),
            r.random_range(-0.5..0.5),
            r.random_range(-1.0..1.0),
        );
        let mut y = ObservationMatrix::untested(n_steps, n).unwrap();
        for _ in 0..r.random_range(0..6) {
            let (t, j) = (r.random_range(0..=n_steps), r.random_range(0..n));
            y.set(t, j, if r.random::<bool>() { TestResult::Positive } else { TestResult::Negative });
        }
        let x = simulate(&theta, &ctx, n_steps, &mut r).unwrap();
        let mut kernel = IffbsKernel::new(ctx, &y).unwrap();
        kernel.prepare(&theta, &x).unwrap();
        for j in 0..n {
            let expected = enumerate_paths(j, &x, &theta, &y, &ctx);
            if expected.iter().any(|p| !p.1.is_finite()) {
                continue;
            }
            worst = worst.max(table_error(&iffbs_forward(j, &x, &theta, &y, &ctx), &expected));
            worst = worst.max(table_error(&kernel.forward(&x, j), &expected));
            checked += 1;
        }
    }
    Verdict::new(worst < 1e-10, format!("{checked} conditionals, max path error {worst:.2e}"))
}

fn seasonal_point() -> Verdict {
    let fixed = FixedModel::default();
    let s = seasonal_modifier(20, &fixed);
    Verdict::new((s - 1.24).abs() <= 0.005, format!("modifier at week 20 = {s:.5}"))
}

fn recovery_config(seed: u64) -> RunConfig {
    RunConfig {
        algorithm: Algorithm::Rippler,
        iterations: 20_000,
        latent_updates: 400,
        burn_in: 5000,
        seed,
        ..RunConfig::default()
    }
}

fn simulate_dataset(root: &Path, seed: u64) -> SimulateOutcome {
    run_simulate(&recovery_config(seed), None, &root.join(format!("data-{seed}"))).unwrap()
}

fn infer(cfg: &RunConfig, data: &SimulateOutcome, out: &Path) -> ChainOutcome {
    let pop = data.dataset.population().unwrap();
    infer_with(cfg, &pop, &data.y, out, InferOptions::default()).unwrap().remove(0)
}

fn recovery(root: &Path, data: &BTreeMap<u64, SimulateOutcome>) -> (Verdict, Vec<PathBuf>) {
    let mut failures = 0;
    let mut detail = Vec::new();
    let mut runs = Vec::new();
    for (&seed, sim) in data {
        let start = Instant::now();
        let out = root.join(format!("recovery-{seed}"));
        infer(&recovery_config(seed), sim, &out);
        let report = run_diagnose(&out, Some(&root.join(format!("data-{seed}"))), 0.95, false).unwrap();
        let [g, h, a, s] = &report.pooled;
        let truth = sim.record.theta;
        let ok = g.contains(truth.beta_g)
            && h.contains(truth.beta_h)
            && (0.05..=0.2).contains(&g.median)
            && (0.75..=3.0).contains(&h.median)
            && a.contains(0.0)
            && s.contains(0.0);
        failures += usize::from(!ok);
        detail.push(format!(
            "seed {seed} {}: beta_g {:.4} ({:.4}, {:.4}), beta_h {:.3} ({:.3}, {:.3}), delta_a ({:.4}, {:.4}), delta_s ({:.3}, {:.3}) [{:.0?}]",
            if ok { "ok" } else { "miss" },
            g.median,
            g.lower,
            g.upper,
            h.median,
            h.lower,
            h.upper,
            a.lower,
            a.upper,
            s.lower,
            s.upper,
            start.elapsed()
        ));
        runs.push(out);
    }
    println!("  {}", detail.join("\n  "));
    (Verdict::new(failures <= 1, format!("{failures} of {} seeds missed", data.len())), runs)
}

fn determinism(root: &Path, sim: &SimulateOutcome, seed: u64, first: &Path) -> Verdict {
    let out = root.join(format!("recovery-{seed}-rerun"));
    infer(&recovery_config(seed), sim, &out);
    let a = std::fs::read(chain_dir(first, 0).join(SAMPLES_FILE)).unwrap();
    let b = std::fs::read(chain_dir(&out, 0).join(SAMPLES_FILE)).unwrap();
    Verdict::new(a == b, format!("seed {seed}: {} and {} bytes, identical: {}", a.len(), b.len(), a == b))
}

fn comparison_config(algorithm: Algorithm, seed: u64) -> RunConfig {
    RunConfig { algorithm, iterations: 2000, burn_in: 500, ..recovery_config(seed) }
}

fn msjd_comparison(root: &Path, sim: &SimulateOutcome, seed: u64) -> (Verdict, Verdict) {
    let reference = [(Algorithm::Iffbs, 4340.0), (Algorithm::Rippler, 1710.0), (Algorithm::Rj, 247.0)];
    let mut values = Vec::new();
    let mut rippler_profile = Vec::new();
    let mut band = Vec::new();
    for (alg, paper) in reference {
        let out = root.join(format!("msjd-{}", alg.name()));
        let chain = infer(&comparison_config(alg, seed), sim, &out);
        let m = chain.msjd.msjd();
        if alg == Algorithm::Rippler {
            rippler_profile = chain.msjd.msjd_by_time();
        }
        let within = m > paper / 3.0 && m < paper * 3.0;
        band.push(format!("{} {m:.0} (reference {paper}, within factor 3: {within})", alg.name()));
        values.push(m);
    }
    let ordering = Verdict::new(values[0] > values[1] && values[1] > values[2], band.join(", "));
    let times: Vec<f64> = (0..rippler_profile.len()).map(|t| t as f64).collect();
    let rho = spearman(&times, &rippler_profile);
    let profile = Verdict::new(rho > 0.3, format!("Spearman rho of rippler per-week MSJD against week = {rho:.3}"));
    (ordering, profile)
}

fn elements_tuning(root: &Path, sim: &SimulateOutcome, seed: u64) -> Verdict {
    let mut rates = Vec::new();
    let mut detail = Vec::new();
    for k in [1, 2, 4, 8] {
        let cfg = RunConfig { elements: k, iterations: 1000, burn_in: 500, ..recovery_config(seed) };
        let chain = infer(&cfg, sim, &root.join(format!("elements-{k}")));
        let rate = chain.latent.accepted as f64 / chain.latent.proposed as f64;
        detail.push(format!("K''={k}: acceptance {rate:.4}, MSJD {:.0}", chain.msjd.msjd()));
        rates.push(rate);
    }
    Verdict::new(rates.windows(2).all(|w| w[1] <= w[0]), detail.join(", "))
}

fn main() {
    let mut results = BTreeMap::new();
    let (trip, density) = round_trip_and_density();
    report(&mut results, 1, trip);
    report(&mut results, 2, density);
    report(&mut results, 3, exactness());
    report(&mut results, 4, iffbs_enumeration());
    report(&mut results, 8, seasonal_point());

    let root = tempfile::tempdir().unwrap();
    let data: BTreeMap<u64, SimulateOutcome> =
        RECOVERY_SEEDS.iter().map(|&s| (s, simulate_dataset(root.path(), s))).collect();
    let seed = RECOVERY_SEEDS[0];
    let sim = &data[&seed];
    println!(
        "datasets: {}",
        data.values().map(|d| format!("{} tests, {} positive", d.record.n_tests, d.record.n_positive)).collect::<Vec<_>>().join("; ")
    );

    let (ordering, profile) = msjd_comparison(root.path(), sim, seed);
    report(&mut results, 6, ordering);
    report(&mut results, 7, profile);
    report(&mut results, 9, elements_tuning(root.path(), sim, seed));

    let (recovered, runs) = recovery(root.path(), &data);
    report(&mut results, 5, recovered);
    report(&mut results, 10, determinism(root.path(), sim, seed, &runs[0]));

    println!("\nsummary");
    for (id, v) in &results {
        println!("criterion {id:>2}: {}", if v.pass { "PASS" } else { "FAIL" });
    }
    if results.values().any(|v| !v.pass) {
        std::process::exit(1);
    }
}
