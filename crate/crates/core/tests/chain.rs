use rippler_core::chain::ChainState;
use rippler_core::model::{simulate, simulate_observations};
use rippler_core::rng;
use rippler_core::{
    AdaptConfig, Chain, Context, FixedModel, IffbsKernel, LatentUpdater, ModelParams, ObservationMatrix, Population,
    PriorSpec, RipplerConfig, RipplerKernel, RjConfig, RjKernel,
};

fn dataset() -> (Population, FixedModel, ObservationMatrix) {
    let households: Vec<usize> = (0..30).map(|j| j / 3).collect();
    let covariates = (0..30).map(|j| [(j % 7) as f64 - 3.0, if j % 2 == 0 { 0.5 } else { -0.5 }]).collect();
    let pop = Population::new(households, covariates).unwrap();
    let fixed = FixedModel::default();
    let ctx = Context::new(&pop, &fixed);
    let mut r = rng::stream(100, 0);
    let x = simulate(&ModelParams::new(0.3, 1.5, 0.0, 0.0), &ctx, 20, &mut r).unwrap();
    let schedule: Vec<(usize, usize)> = (0..30).flat_map(|j| [(1 + j % 5, j), (10 + j % 7, j)]).collect();
    let y = simulate_observations(&x, &schedule, &fixed, &mut r);
    (pop, fixed, y)
}

fn run<K: LatentUpdater>(ctx: Context<'_>, y: &ObservationMatrix, kernel: K, iterations: usize) -> (Vec<ModelParams>, ChainState) {
    let mut chain = Chain::new(ctx, y, PriorSpec::default(), AdaptConfig::default(), kernel, ModelParams::new(0.5, 0.5, 0.0, 0.0), 50, 9, 0).unwrap();
    let mut thetas = Vec::new();
    for _ in 0..iterations {
        let rec = chain.step().unwrap();
        assert!(rec.log_posterior.is_finite());
        assert!(rec.theta.in_support());
        assert!(rec.latent.accepted <= rec.latent.proposed);
        thetas.push(rec.theta);
    }
    (thetas, chain.state())
}

#[test]
fn every_kernel_runs_reproducibly() {
    let (pop, fixed, y) = dataset();
    let ctx = Context::new(&pop, &fixed);
    let rippler = || RipplerKernel::new(ctx, &y, RipplerConfig { n_latent_updates: 50, n_elements: 1 }).unwrap();
    let rj = || RjKernel::new(ctx, &y, RjConfig::default()).unwrap();
    let iffbs = || IffbsKernel::new(ctx, &y).unwrap();
    assert_eq!(run(ctx, &y, rippler(), 60), run(ctx, &y, rippler(), 60));
    assert_eq!(run(ctx, &y, rj(), 60), run(ctx, &y, rj(), 60));
    assert_eq!(run(ctx, &y, iffbs(), 60), run(ctx, &y, iffbs(), 60));
}

#[test]
fn different_kernels_give_different_chains() {
    let (pop, fixed, y) = dataset();
    let ctx = Context::new(&pop, &fixed);
    let a = run(ctx, &y, RjKernel::new(ctx, &y, RjConfig::default()).unwrap(), 20);
    let b = run(ctx, &y, IffbsKernel::new(ctx, &y).unwrap(), 20);
    assert_ne!(a.1.x, b.1.x);
}

#[test]
fn iffbs_chain_resumes_exactly() {
    let (pop, fixed, y) = dataset();
    let ctx = Context::new(&pop, &fixed);
    let make = || IffbsKernel::new(ctx, &y).unwrap();
    let theta0 = ModelParams::new(0.5, 0.5, 0.0, 0.0);
    let mut full = Chain::new(ctx, &y, PriorSpec::default(), AdaptConfig::default(), make(), theta0, 20, 4, 1).unwrap();
    let mut first = Chain::new(ctx, &y, PriorSpec::default(), AdaptConfig::default(), make(), theta0, 20, 4, 1).unwrap();
    for _ in 0..15 {
        full.step().unwrap();
        first.step().unwrap();
    }
    let state: ChainState = serde_json::from_str(&serde_json::to_string(&first.state()).unwrap()).unwrap();
    let mut resumed = Chain::resume(ctx, &y, PriorSpec::default(), AdaptConfig::default(), make(), state, 20).unwrap();
    for _ in 0..15 {
        assert_eq!(full.step().unwrap(), resumed.step().unwrap());
    }
}
