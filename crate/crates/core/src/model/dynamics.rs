use rand::Rng;

use super::lattice::Lattice;
use super::{
    ColonisationMatrix, Context, ModelParams, NoncentredMatrix, Pressure, ProposalBounds,
    RowCounts,
};
use crate::error::{ModelError, Result};

/// Forward simulation of the transmission model.
pub fn simulate<R: Rng + ?Sized>(
    theta: &ModelParams,
    ctx: &Context<'_>,
    n_steps: usize,
    rng: &mut R,
) -> Result<ColonisationMatrix> {
    let n = ctx.n_individuals();
    let mut x = ColonisationMatrix::zeros(n_steps, n)?;
    let p0 = ctx.fixed.p0;
    for j in 0..n {
        let u: f64 = rng.random();
        x.set(0, j, u8::from(u < p0));
    }
    let pressure = Pressure::new(theta, ctx, n_steps);
    let p_cu = ctx.fixed.clearance_prob();
    for t in 1..=n_steps {
        let counts = RowCounts::of_row(x.row(t - 1), ctx.population);
        for j in 0..n {
            let u: f64 = rng.random();
            let next = if x.get(t - 1, j) == 0 {
                let h = counts.household_others(ctx.population, j, 0);
                u8::from(u < pressure.colonisation_prob(t, j, counts.global, h))
            } else {
                u8::from(u >= p_cu)
            };
            x.set(t, j, next);
        }
    }
    Ok(x)
}

/// The deterministic map X = f(U, θ).
pub fn realise(u: &NoncentredMatrix, theta: &ModelParams, ctx: &Context<'_>) -> ColonisationMatrix {
    let n = u.n_individuals();
    let n_steps = u.n_steps();
    assert_eq!(n, ctx.n_individuals(), "draw lattice and population disagree on N");
    let mut x = ColonisationMatrix::zeros(n_steps, n).expect("shape already validated");
    let p0 = ctx.fixed.p0;
    for j in 0..n {
        x.set(0, j, u8::from(u.get(0, j) < p0));
    }
    let pressure = Pressure::new(theta, ctx, n_steps);
    let p_cu = ctx.fixed.clearance_prob();
    for t in 1..=n_steps {
        let counts = RowCounts::of_row(x.row(t - 1), ctx.population);
        for j in 0..n {
            let draw = u.get(t, j);
            let next = if x.get(t - 1, j) == 0 {
                let h = counts.household_others(ctx.population, j, 0);
                u8::from(draw < pressure.colonisation_prob(t, j, counts.global, h))
            } else {
                u8::from(draw >= p_cu)
            };
            x.set(t, j, next);
        }
    }
    x
}

/// The widest interval [a, b) of uniform draws reproducing each cell of `x`.
///
/// Fails with [`ModelError::InvalidState`] when `x` holds a colonisation at a
/// cell with zero pressure.
pub fn proposal_bounds(
    x: &ColonisationMatrix,
    theta: &ModelParams,
    ctx: &Context<'_>,
) -> Result<ProposalBounds> {
    let n = x.n_individuals();
    let n_steps = x.n_steps();
    let mut lower = Lattice::filled(n_steps, n, 0.0)?;
    let mut upper = Lattice::filled(n_steps, n, 1.0)?;
    let p0 = ctx.fixed.p0;
    for j in 0..n {
        if x.get(0, j) == 1 {
            upper.set(0, j, p0);
        } else {
            lower.set(0, j, p0);
        }
    }
    let pressure = Pressure::new(theta, ctx, n_steps);
    let p_cu = ctx.fixed.clearance_prob();
    for t in 1..=n_steps {
        let counts = RowCounts::of_row(x.row(t - 1), ctx.population);
        for j in 0..n {
            match (x.get(t - 1, j), x.get(t, j)) {
                (0, cur) => {
                    let h = counts.household_others(ctx.population, j, 0);
                    let p_uc = pressure.colonisation_prob(t, j, counts.global, h);
                    if cur == 1 {
                        if p_uc <= 0.0 {
                            return Err(ModelError::InvalidState { t, individual: j });
                        }
                        upper.set(t, j, p_uc);
                    } else {
                        lower.set(t, j, p_uc);
                    }
                }
                (_, 0) => upper.set(t, j, p_cu),
                _ => lower.set(t, j, p_cu),
            }
        }
    }
    Ok(ProposalBounds { lower, upper })
}

/// Checks that `x` has positive density under θ.
pub fn validate_reachable(x: &ColonisationMatrix, theta: &ModelParams, ctx: &Context<'_>) -> Result<()> {
    if x.n_individuals() != ctx.n_individuals() {
        return Err(ModelError::InvalidInput(format!(
            "lattice has {} individuals, population has {}",
            x.n_individuals(),
            ctx.n_individuals()
        )));
    }
    proposal_bounds(x, theta, ctx).map(|_| ())
}
