//! `infer`: run one or more chains and persist their output.
//!
//! Each chain writes to `<out>/chain-<c>/`:
//!
//! * `samples.tsv`, `counts.tsv`: see [`crate::formats`];
//! * `occupancy.rle`: for every cell, the number of retained iterations in
//!   which it was colonised;
//! * `msjd.tsv`: flips per week between consecutive post-burn-in iterations;
//! * `latent_accept_by_origin.tsv`: latent proposals and acceptances by the
//!   earliest perturbed week (post burn-in);
//! * `final_latent.rle`, `manifest.json`;
//! * `checkpoint.json`, rewritten every `checkpoint_every` iterations.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rippler_core::chain::ChainState;
use rippler_core::diagnostics::{colonised_count, MsjdAccumulator};
use rippler_core::rng::RNG_ALGORITHM;
use rippler_core::{
    Chain, ColonisationMatrix, Context, IffbsKernel, LatentStats, LatentUpdater, ObservationMatrix, Population,
    RipplerConfig, RipplerKernel, RjConfig, RjKernel,
};
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};
use crate::dataset::{write_file, Dataset};
use crate::error::{CliError, CliResult};
use crate::formats::{counts_header, counts_row, encode_lattice, encode_rle, samples_row, SAMPLES_HEADER};

pub const SAMPLES_FILE: &str = "samples.tsv";
pub const COUNTS_FILE: &str = "counts.tsv";
pub const OCCUPANCY_FILE: &str = "occupancy.rle";
pub const MSJD_FILE: &str = "msjd.tsv";
pub const ACCEPT_BY_ORIGIN_FILE: &str = "latent_accept_by_origin.tsv";
pub const FINAL_LATENT_FILE: &str = "final_latent.rle";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

pub fn chain_dir(out_dir: &Path, chain: u64) -> PathBuf {
    out_dir.join(format!("chain-{chain}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub seed: u64,
    pub chain: u64,
    pub n_individuals: usize,
    pub n_steps: usize,
    pub n_tests: usize,
    pub iterations_completed: u64,
    pub retained: u64,
    pub param_accepted: u64,
    pub latent_acceptance: f64,
    pub msjd: f64,
    pub config: RunConfig,
}

impl Manifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::corrupt(&path, e.to_string()))
    }
}

/// Everything needed to continue a chain and its accumulated output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    state: ChainState,
    occupancy: Vec<u64>,
    msjd: MsjdAccumulator,
    latent: LatentStats,
    param_accepted: u64,
    retained: u64,
    samples_len: u64,
    counts_len: u64,
}

/// Accumulated output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub dir: PathBuf,
    pub retained: u64,
    /// Parameter acceptances over retained iterations.
    pub param_accepted: u64,
    /// Latent-step statistics over post-burn-in iterations.
    pub latent: LatentStats,
    pub msjd: MsjdAccumulator,
    pub final_latent: ColonisationMatrix,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InferOptions {
    /// Continue from existing checkpoints.
    pub resume: bool,
    /// Stop (leaving a checkpoint) after this iteration, as if interrupted.
    pub stop_after: Option<u64>,
}

/// Loads the data, then runs every chain on its own thread.
pub fn run_infer(cfg: &RunConfig, data_dir: &Path, out_dir: &Path, opts: InferOptions) -> CliResult<Vec<ChainOutcome>> {
    cfg.validate()?;
    let dataset = Dataset::load(data_dir, cfg.n_steps)?;
    let population = dataset.population()?;
    let y = dataset.observations()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    dataset.write_id_map(out_dir)?;
    infer_with(cfg, &population, &y, out_dir, opts)
}

/// Runs every chain on already-ingested data.
pub fn infer_with(
    cfg: &RunConfig,
    population: &Population,
    y: &ObservationMatrix,
    out_dir: &Path,
    opts: InferOptions,
) -> CliResult<Vec<ChainOutcome>> {
    cfg.validate()?;
    let ctx = Context::new(population, &cfg.fixed);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| scope.spawn(move || run_chain_dir(cfg, ctx, y, &chain_dir(out_dir, c), c, opts)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

fn run_chain_dir(
    cfg: &RunConfig,
    ctx: Context<'_>,
    y: &ObservationMatrix,
    dir: &Path,
    chain: u64,
    opts: InferOptions,
) -> CliResult<ChainOutcome> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    match cfg.algorithm {
        Algorithm::Rippler => {
            let rc = RipplerConfig { n_latent_updates: cfg.latent_updates, n_elements: cfg.elements };
            run_chain(cfg, ctx, y, dir, chain, opts, RipplerKernel::new(ctx, y, rc)?)
        }
        Algorithm::Rj => {
            let kernel = RjKernel::new(ctx, y, RjConfig { block_size: cfg.block_size })?;
            run_chain(cfg, ctx, y, dir, chain, opts, kernel)
        }
        Algorithm::Iffbs => run_chain(cfg, ctx, y, dir, chain, opts, IffbsKernel::new(ctx, y)?),
    }
}

fn open_append(path: &Path, len: u64) -> CliResult<BufWriter<File>> {
    let f = OpenOptions::new().write(true).open(path).map_err(|e| CliError::io(path, e))?;
    f.set_len(len).map_err(|e| CliError::io(path, e))?;
    drop(f);
    let f = OpenOptions::new().append(true).open(path).map_err(|e| CliError::io(path, e))?;
    Ok(BufWriter::new(f))
}

fn create_with_header(path: &Path, header: &str) -> CliResult<BufWriter<File>> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{header}").map_err(|e| CliError::io(path, e))?;
    Ok(w)
}

fn flushed_len(w: &mut BufWriter<File>, path: &Path) -> CliResult<u64> {
    w.flush().map_err(|e| CliError::io(path, e))?;
    let meta = w.get_ref().metadata().map_err(|e| CliError::io(path, e))?;
    Ok(meta.len())
}

#[allow(clippy::too_many_arguments)]
fn run_chain<K: LatentUpdater>(
    cfg: &RunConfig,
    ctx: Context<'_>,
    y: &ObservationMatrix,
    dir: &Path,
    chain_index: u64,
    opts: InferOptions,
    kernel: K,
) -> CliResult<ChainOutcome> {
    let samples_path = dir.join(SAMPLES_FILE);
    let counts_path = dir.join(COUNTS_FILE);
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let n_steps = y.n_steps();
    let cells = (n_steps + 1) * y.n_individuals();

    let resume_from = if opts.resume && checkpoint_path.exists() {
        let text = std::fs::read_to_string(&checkpoint_path).map_err(|e| CliError::io(&checkpoint_path, e))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| CliError::corrupt(&checkpoint_path, e.to_string()))?;
        if ck.occupancy.len() != cells || !ck.state.x.same_shape(y) {
            return Err(CliError::corrupt(&checkpoint_path, "checkpoint does not match the data"));
        }
        Some(ck)
    } else {
        None
    };

    let (mut chain, mut samples, mut counts, mut occupancy, mut msjd, mut latent, mut param_accepted, mut retained) =
        match resume_from {
            Some(ck) => {
                let chain = Chain::resume(ctx, y, cfg.priors, cfg.adapt, kernel, ck.state, cfg.latent_updates)?;
                (
                    chain,
                    open_append(&samples_path, ck.samples_len)?,
                    open_append(&counts_path, ck.counts_len)?,
                    ck.occupancy,
                    ck.msjd,
                    ck.latent,
                    ck.param_accepted,
                    ck.retained,
                )
            }
            None => {
                let chain =
                    Chain::new(ctx, y, cfg.priors, cfg.adapt, kernel, cfg.theta0(), cfg.latent_updates, cfg.seed, chain_index)?;
                let mut msjd = MsjdAccumulator::new();
                if cfg.burn_in == 0 {
                    msjd.push(chain.latent());
                }
                (
                    chain,
                    create_with_header(&samples_path, SAMPLES_HEADER)?,
                    create_with_header(&counts_path, &counts_header(n_steps))?,
                    vec![0u64; cells],
                    msjd,
                    LatentStats::default(),
                    0,
                    0,
                )
            }
        };

    let last = opts.stop_after.map_or(cfg.iterations, |s| s.min(cfg.iterations));
    while chain.iteration() < last {
        let rec = chain.step()?;
        let k = rec.iteration;
        if k >= cfg.burn_in {
            msjd.push(chain.latent());
        }
        if k > cfg.burn_in {
            latent.merge(&rec.latent);
        }
        if cfg.retains(k) {
            retained += 1;
            param_accepted += u64::from(rec.param_accepted);
            samples.write_all(samples_row(&rec).as_bytes()).map_err(|e| CliError::io(&samples_path, e))?;
            let x = chain.latent();
            counts
                .write_all(counts_row(k, &colonised_count(x)).as_bytes())
                .map_err(|e| CliError::io(&counts_path, e))?;
            for (o, &v) in occupancy.iter_mut().zip(x.as_slice()) {
                *o += u64::from(v);
            }
        }
        if k % cfg.checkpoint_every == 0 || k == last {
            let ck = Checkpoint {
                state: chain.state(),
                occupancy: occupancy.clone(),
                msjd: msjd.clone(),
                latent: latent.clone(),
                param_accepted,
                retained,
                samples_len: flushed_len(&mut samples, &samples_path)?,
                counts_len: flushed_len(&mut counts, &counts_path)?,
            };
            let tmp = dir.join(format!("{CHECKPOINT_FILE}.tmp"));
            write_file(&tmp, &serde_json::to_string(&ck).expect("checkpoint serialises"))?;
            std::fs::rename(&tmp, &checkpoint_path).map_err(|e| CliError::io(&checkpoint_path, e))?;
        }
    }
    flushed_len(&mut samples, &samples_path)?;
    flushed_len(&mut counts, &counts_path)?;

    let final_latent = chain.latent().clone();
    if chain.iteration() == cfg.iterations {
        write_summaries(dir, &final_latent, &occupancy, &msjd, &latent)?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            seed: cfg.seed,
            chain: chain_index,
            n_individuals: y.n_individuals(),
            n_steps,
            n_tests: y.n_tested(),
            iterations_completed: chain.iteration(),
            retained,
            param_accepted,
            latent_acceptance: latent.acceptance_rate(),
            msjd: msjd.msjd(),
            config: cfg.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        write_file(&dir.join(MANIFEST_FILE), &(json + "\n"))?;
    }
    Ok(ChainOutcome { dir: dir.to_path_buf(), retained, param_accepted, latent, msjd, final_latent })
}

fn write_summaries(
    dir: &Path,
    final_latent: &ColonisationMatrix,
    occupancy: &[u64],
    msjd: &MsjdAccumulator,
    latent: &LatentStats,
) -> CliResult<()> {
    write_file(&dir.join(FINAL_LATENT_FILE), &encode_lattice(final_latent))?;
    write_file(
        &dir.join(OCCUPANCY_FILE),
        &encode_rle(occupancy, final_latent.n_rows(), final_latent.n_individuals()),
    )?;

    let mut s = format!("# jumps={}\nt\tflips\tmsjd\n", msjd.jumps());
    for (t, (&f, m)) in msjd.flips_by_row().iter().zip(msjd.msjd_by_time()).enumerate() {
        s.push_str(&format!("{t}\t{f}\t{m}\n"));
    }
    write_file(&dir.join(MSJD_FILE), &s)?;

    let mut s = String::from("t\tproposed\taccepted\n");
    for t in 0..final_latent.n_rows() {
        let p = latent.by_origin_proposed.get(t).copied().unwrap_or(0);
        let a = latent.by_origin_accepted.get(t).copied().unwrap_or(0);
        s.push_str(&format!("{t}\t{p}\t{a}\n"));
    }
    write_file(&dir.join(ACCEPT_BY_ORIGIN_FILE), &s)
}
