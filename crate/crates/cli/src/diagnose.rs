//! `diagnose`: summaries and plot-data series from persisted chain output.
//!
//! Reads every `chain-*` directory of a run and writes to `<run>/diagnostics/`:
//!
//! * `summary.tsv`: median and central credible interval per parameter, per
//!   chain and pooled, with truth-in-interval flags when a truth is given;
//! * `acceptance.tsv`: acceptance rates and MSJD per chain;
//! * `msjd_by_time.tsv`, `acceptance_by_origin.tsv`;
//! * `histogram_<param>.tsv`: pooled posterior histograms;
//! * `colonised_band.tsv`: pooled median and credible band of the colonised
//!   count per week, with truth coverage;
//! * optionally `trace_<param>.svg` and `colonised_band.svg`.
//!
//! Output depends only on the chain files, so re-running is byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rippler_core::diagnostics::{colonised_count, credible_interval, median, ParamSummary};
use rippler_core::{ColonisationMatrix, ModelParams};

use crate::dataset::write_file;
use crate::error::{CliError, CliResult};
use crate::formats::{read_counts, read_lattice, read_samples, SampleRow};
use crate::infer::{ACCEPT_BY_ORIGIN_FILE, COUNTS_FILE, MSJD_FILE, SAMPLES_FILE};
use crate::simulate::{TruthRecord, TRUTH_LATENT_FILE};
use crate::svg;

pub const DIAGNOSTICS_DIR: &str = "diagnostics";
pub const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub name: String,
    pub samples: Vec<SampleRow>,
    pub counts: Vec<(u64, Vec<usize>)>,
    pub msjd_by_time: Vec<f64>,
    pub accept_by_origin: Vec<(u64, u64)>,
}

impl ChainDiagnostics {
    pub fn thetas(&self) -> Vec<ModelParams> {
        self.samples.iter().map(|s| s.theta).collect()
    }

    pub fn msjd(&self) -> f64 {
        self.msjd_by_time.iter().sum()
    }

    pub fn param_acceptance(&self) -> f64 {
        self.samples.iter().filter(|s| s.param_accepted).count() as f64 / self.samples.len() as f64
    }

    pub fn latent_acceptance(&self) -> f64 {
        let (a, p) = self.accept_by_origin.iter().fold((0, 0), |(a, p), &(pp, aa)| (a + aa, p + pp));
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseReport {
    pub chains: Vec<ChainDiagnostics>,
    /// Pooled over chains, in the order of [`ModelParams::NAMES`].
    pub pooled: [ParamSummary; 4],
    pub truth: Option<ModelParams>,
    /// Fraction of weeks whose true colonised count lies in the band.
    pub band_coverage: Option<f64>,
}

impl DiagnoseReport {
    pub fn truth_in_interval(&self) -> Option<[bool; 4]> {
        let truth = self.truth?.to_array();
        Some(std::array::from_fn(|k| self.pooled[k].contains(truth[k])))
    }
}

fn chain_dirs(run_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(run_dir).map_err(|e| CliError::io(run_dir, e))?;
    let mut dirs: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(run_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(c) = name.strip_prefix("chain-").and_then(|c| c.parse().ok()) {
            dirs.push((c, entry.path()));
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::corrupt(run_dir, "no chain-* directories"));
    }
    Ok(dirs.into_iter().map(|d| d.1).collect())
}

fn read_tsv_columns(path: &Path, skip_comments: bool) -> CliResult<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !(skip_comments && l.starts_with('#')))
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect())
}

fn parse_cell<T: std::str::FromStr>(path: &Path, row: &[String], k: usize) -> CliResult<T> {
    row.get(k)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::corrupt(path, format!("bad value in column {k}")))
}

pub fn load_chain(dir: &Path) -> CliResult<ChainDiagnostics> {
    let samples = read_samples(&dir.join(SAMPLES_FILE))?;
    if samples.is_empty() {
        return Err(CliError::corrupt(&dir.join(SAMPLES_FILE), "no retained samples"));
    }
    let counts = read_counts(&dir.join(COUNTS_FILE))?;
    let msjd_path = dir.join(MSJD_FILE);
    let msjd_by_time = read_tsv_columns(&msjd_path, true)?
        .iter()
        .map(|r| parse_cell(&msjd_path, r, 2))
        .collect::<CliResult<_>>()?;
    let origin_path = dir.join(ACCEPT_BY_ORIGIN_FILE);
    let accept_by_origin = read_tsv_columns(&origin_path, false)?
        .iter()
        .map(|r| Ok((parse_cell(&origin_path, r, 1)?, parse_cell(&origin_path, r, 2)?)))
        .collect::<CliResult<_>>()?;
    let name = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    Ok(ChainDiagnostics { name, samples, counts, msjd_by_time, accept_by_origin })
}

/// Equal-width histogram over [min, max] of the samples: (lower edge, upper
/// edge, count) per bin.
pub fn histogram(samples: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return vec![(lo, hi, samples.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for &s in samples {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width }, c))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Summarises the run in `run_dir`. `truth_dir` is a `simulate` output
/// directory whose generating values are compared with the posterior.
pub fn run_diagnose(run_dir: &Path, truth_dir: Option<&Path>, level: f64, svg_plots: bool) -> CliResult<DiagnoseReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config(format!("credible level must lie in (0, 1), got {level}")));
    }
    let chains = chain_dirs(run_dir)?.iter().map(|d| load_chain(d)).collect::<CliResult<Vec<_>>>()?;
    let (truth, truth_latent): (Option<ModelParams>, Option<ColonisationMatrix>) = match truth_dir {
        Some(dir) => (Some(TruthRecord::load(dir)?.theta), Some(read_lattice(&dir.join(TRUTH_LATENT_FILE))?)),
        None => (None, None),
    };
    let out = run_dir.join(DIAGNOSTICS_DIR);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    let pooled_thetas: Vec<ModelParams> = chains.iter().flat_map(|c| c.thetas()).collect();
    let column = |thetas: &[ModelParams], k: usize| -> Vec<f64> { thetas.iter().map(|t| t.to_array()[k]).collect() };
    let pooled: [ParamSummary; 4] = std::array::from_fn(|k| ParamSummary::of(&column(&pooled_thetas, k), level));

    // summary.tsv
    let mut s = String::from("chain\tparameter\tmedian\tlower\tupper\tlevel\ttruth\ttruth_in_interval\n");
    let mut groups: Vec<(String, [ParamSummary; 4])> = chains
        .iter()
        .map(|c| {
            let th = c.thetas();
            (c.name.clone(), std::array::from_fn(|k| ParamSummary::of(&column(&th, k), level)))
        })
        .collect();
    groups.push(("pooled".to_string(), pooled));
    for (name, summaries) in &groups {
        for (k, p) in summaries.iter().enumerate() {
            let tv = truth.map(|t| t.to_array()[k]);
            let flag = tv.map_or_else(|| "NA".to_string(), |v| u8::from(p.contains(v)).to_string());
            writeln!(
                s,
                "{name}\t{}\t{}\t{}\t{}\t{level}\t{}\t{flag}",
                ModelParams::NAMES[k],
                p.median,
                p.lower,
                p.upper,
                fmt_opt(tv)
            )
            .unwrap();
        }
    }
    write_file(&out.join("summary.tsv"), &s)?;

    // acceptance.tsv
    let mut s = String::from("chain\tretained\tparam_acceptance\tlatent_acceptance\tmsjd\n");
    for c in &chains {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            c.name,
            c.samples.len(),
            c.param_acceptance(),
            c.latent_acceptance(),
            c.msjd()
        )
        .unwrap();
    }
    write_file(&out.join("acceptance.tsv"), &s)?;

    // msjd_by_time.tsv and acceptance_by_origin.tsv
    let rows = chains.iter().map(|c| c.msjd_by_time.len()).max().unwrap_or(0);
    let mut m = String::from("t");
    let mut a = String::from("t");
    for c in &chains {
        write!(m, "\t{}", c.name).unwrap();
        write!(a, "\t{}_proposed\t{}_accepted\t{}_rate", c.name, c.name, c.name).unwrap();
    }
    m.push('\n');
    a.push('\n');
    for t in 0..rows {
        write!(m, "{t}").unwrap();
        write!(a, "{t}").unwrap();
        for c in &chains {
            write!(m, "\t{}", fmt_opt(c.msjd_by_time.get(t).copied())).unwrap();
            let (p, acc) = c.accept_by_origin.get(t).copied().unwrap_or((0, 0));
            let rate = if p == 0 { None } else { Some(acc as f64 / p as f64) };
            write!(a, "\t{p}\t{acc}\t{}", fmt_opt(rate)).unwrap();
        }
        m.push('\n');
        a.push('\n');
    }
    write_file(&out.join("msjd_by_time.tsv"), &m)?;
    write_file(&out.join("acceptance_by_origin.tsv"), &a)?;

    // histograms
    for (k, name) in ModelParams::NAMES.iter().enumerate() {
        let mut h = String::from("lower\tupper\tcount\n");
        for (lo, hi, c) in histogram(&column(&pooled_thetas, k), HISTOGRAM_BINS) {
            writeln!(h, "{lo}\t{hi}\t{c}").unwrap();
        }
        write_file(&out.join(format!("histogram_{name}.tsv")), &h)?;
    }

    // colonised-count band
    let weeks = chains.iter().flat_map(|c| c.counts.first()).map(|r| r.1.len()).max().unwrap_or(0);
    let truth_counts = truth_latent.as_ref().map(colonised_count);
    if let Some(tc) = &truth_counts {
        if tc.len() != weeks {
            return Err(CliError::Config(format!(
                "truth spans {} weeks but the chains span {weeks}",
                tc.len()
            )));
        }
    }
    let mut band = Vec::with_capacity(weeks);
    let mut b = String::from("t\tmedian\tlower\tupper\ttruth\tcovered\n");
    let mut covered = 0;
    for t in 0..weeks {
        let values: Vec<f64> = chains.iter().flat_map(|c| c.counts.iter().map(move |r| r.1[t] as f64)).collect();
        let (lo, hi) = credible_interval(&values, level);
        let med = median(&values);
        band.push((med, lo, hi));
        let (tv, flag) = match &truth_counts {
            Some(tc) => {
                let inside = lo <= tc[t] as f64 && tc[t] as f64 <= hi;
                covered += usize::from(inside);
                (tc[t].to_string(), u8::from(inside).to_string())
            }
            None => ("NA".to_string(), "NA".to_string()),
        };
        writeln!(b, "{t}\t{med}\t{lo}\t{hi}\t{tv}\t{flag}").unwrap();
    }
    write_file(&out.join("colonised_band.tsv"), &b)?;
    let band_coverage = truth_counts.as_ref().map(|_| covered as f64 / weeks.max(1) as f64);

    if svg_plots {
        for (k, name) in ModelParams::NAMES.iter().enumerate() {
            let series: Vec<Vec<(f64, f64)>> = chains
                .iter()
                .map(|c| c.samples.iter().map(|s| (s.iteration as f64, s.theta.to_array()[k])).collect())
                .collect();
            let truth_line = truth.map(|t| t.to_array()[k]);
            write_file(&out.join(format!("trace_{name}.svg")), &svg::line_chart(name, &series, truth_line))?;
        }
        let truth_series = truth_counts.map(|tc| tc.iter().map(|&c| c as f64).collect::<Vec<_>>());
        write_file(&out.join("colonised_band.svg"), &svg::band_chart("colonised", &band, truth_series.as_deref()))?;
    }

    Ok(DiagnoseReport { chains, pooled, truth, band_coverage })
}
