//! Operator-norm estimates between function spaces, resolution sweeps and
//! the forbidden-class experiment.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nyquist_mask, power_iteration, Operator, Side, DEFAULT_BUDGET_BYTES};
use crate::atoms;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, OpFn};
use crate::lp::{top_level, LpFamily, Profile};
use crate::norms::{NormContext, SpaceDescriptor};
use crate::rng;
use crate::symbol::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PowerIteration,
    RandomizedLowerBound,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::PowerIteration => "power-iteration",
            Method::RandomizedLowerBound => "randomized-lower-bound",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub trials: usize,
    pub seed: u64,
    /// Relative tolerance of power iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub budget_bytes: usize,
    /// Include the shipped atom library among lower-bound inputs.
    pub use_atoms: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            trials: 30,
            seed: 1,
            tol: 1e-3,
            max_iter: 500,
            budget_bytes: DEFAULT_BUDGET_BYTES,
            use_atoms: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpNormEstimate {
    pub source: String,
    pub target: String,
    pub source_alpha: f64,
    pub target_alpha: f64,
    pub side: Side,
    pub method: Method,
    pub value: f64,
    /// Number of inputs tried (lower bound) or iterations used (power iteration).
    pub trials: usize,
    pub converged: bool,
    pub resolution: usize,
    pub seed: u64,
    pub tolerance: f64,
}

/// `‖T_σ‖` from `source` to `target`. Both Hilbertian: power iteration on the
/// weighted operator `W_t^{1/2} T W_s^{−1/2}`. Otherwise the largest ratio
/// `‖Tf‖/‖f‖` over random band-limited inputs, a lacunary witness and the
/// atom library, labeled as a lower bound.
pub fn estimate_operator_norm(
    sigma: &Symbol,
    side: Side,
    source: &SpaceDescriptor,
    target: &SpaceDescriptor,
    opts: &EstimateOptions,
    ctx: &NormContext,
) -> Result<OpNormEstimate> {
    let grid = sigma.grid();
    if ctx.grid().d != grid.d || ctx.grid().n != grid.n {
        return Err(Error::Structural("norm context built for a different lattice".into()));
    }
    let op = Operator::new(sigma, side, opts.budget_bytes)?;
    let base = OpNormEstimate {
        source: source.tag(),
        target: target.tag(),
        source_alpha: source.alpha,
        target_alpha: target.alpha,
        side,
        method: Method::PowerIteration,
        value: 0.0,
        trials: 0,
        converged: true,
        resolution: grid.n,
        seed: opts.seed,
        tolerance: opts.tol,
    };
    if let (Some(ws), Some(wt)) = (source.hilbert_weights(ctx), target.hilbert_weights(ctx)) {
        let mask = nyquist_mask(&grid);
        let inv_s: Vec<f64> = ws.iter().zip(&mask).map(|(w, k)| k / w.sqrt()).collect();
        let sqrt_t: Vec<f64> = wt.iter().map(|w| w.sqrt()).collect();
        let r = power_iteration(
            &grid,
            |f| Ok(op.apply(&f.multiply_coeffs(&inv_s))?.multiply_coeffs(&sqrt_t)),
            |g| Ok(op.apply_adjoint(&g.multiply_coeffs(&sqrt_t))?.multiply_coeffs(&inv_s)),
            opts.tol,
            opts.max_iter,
            opts.seed,
        )?;
        return Ok(OpNormEstimate { value: r.value, trials: r.iterations, converged: r.converged, ..base });
    }

    let inputs = lower_bound_inputs(&grid, source, opts)?;
    let ratios: Vec<Result<f64>> = inputs
        .par_iter()
        .map(|f| {
            let den = source.norm(f, ctx)?;
            if den == 0.0 {
                return Ok(0.0);
            }
            Ok(target.norm(&op.apply(f)?, ctx)? / den)
        })
        .collect();
    let mut best = 0.0f64;
    for r in ratios {
        best = best.max(r?);
    }
    Ok(OpNormEstimate {
        method: Method::RandomizedLowerBound,
        value: best,
        trials: inputs.len(),
        ..base
    })
}

/// Random inputs with coefficients on `|m| ≤ 2^J` times `(1+|m|²)^{w/2}`,
/// `w ∈ U(−2, 2)`; the lacunary witness `Σ_j 2^{−2jα} e^{−2πi 2^j s_1}`; atoms.
fn lower_bound_inputs(grid: &GridSpec, source: &SpaceDescriptor, opts: &EstimateOptions) -> Result<Vec<OpFn>> {
    let radius = (1u64 << top_level(grid.n)) as f64;
    let mask = nyquist_mask(grid);
    let mut inputs: Vec<OpFn> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::seeded(opts.seed.wrapping_mul(1_000_003).wrapping_add(t as u64));
            let w = rng::uniform(&mut r, -2.0, 2.0);
            rng::random_band_limited(grid, radius, w, &mut r).multiply_coeffs(&mask)
        })
        .collect();
    inputs.push(witness(grid, source.alpha));
    if opts.use_atoms {
        inputs.extend(atoms::library(grid, source.alpha)?);
    }
    Ok(inputs)
}

/// `Σ_{j=1}^{J} 2^{−2jα} e^{−2πi 2^j s_1} · I`.
pub fn witness(grid: &GridSpec, alpha: f64) -> OpFn {
    let s = grid.slots();
    let q = grid.q;
    let mut c = vec![C64::new(0.0, 0.0); grid.len()];
    let mut m = vec![0i64; grid.d];
    for j in 1..=top_level(grid.n) {
        m[0] = -(1i64 << j);
        if let Some(idx) = grid.freq_index(&m) {
            for a in 0..q {
                c[idx * s + a * q + a] = C64::new(2f64.powf(-2.0 * j as f64 * alpha), 0.0);
            }
        }
    }
    OpFn::from_coeffs(*grid, c).expect("length fixed by grid")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub space: String,
    pub alpha: f64,
    pub estimate: f64,
    pub method: Method,
    pub seed: u64,
}

/// Norm estimates of `build(grid)` on `space` (target lowered by the claimed
/// order) for each lattice size.
pub fn bound_sweep(
    build: impl Fn(GridSpec) -> Result<Symbol>,
    template: GridSpec,
    space: &SpaceDescriptor,
    sizes: &[usize],
    side: Side,
    profile: &Arc<Profile>,
    opts: &EstimateOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let grid = GridSpec::new(template.d, n, template.q)?;
        let sigma = build(grid)?;
        let ctx = NormContext::new(LpFamily::with_profile(grid.with_q(1), profile.clone())?);
        let target = space.lowered(sigma.claim().order);
        let e = estimate_operator_norm(&sigma, side, space, &target, opts, &ctx)?;
        rows.push(SweepRow {
            size: n,
            space: space.tag(),
            alpha: space.alpha,
            estimate: e.value,
            method: e.method,
            seed: opts.seed,
        });
    }
    Ok(rows)
}

/// max/min of the estimates in a sweep.
pub fn growth(rows: &[SweepRow]) -> f64 {
    let hi = rows.iter().map(|r| r.estimate).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.estimate).fold(f64::INFINITY, f64::min);
    hi / lo
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForbiddenSeries {
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Same sweep for the exotic symbol truncated to its first band.
    pub single_band: Vec<f64>,
    pub growth: f64,
    pub single_band_growth: f64,
    pub strictly_increasing: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForbiddenReport {
    pub space: String,
    pub series: Vec<ForbiddenSeries>,
    /// α = 0 estimates strictly increase with resolution.
    pub unbounded_at_zero: bool,
    /// Every α > 0 series grows by at most `bound_factor`.
    pub bounded_positive: bool,
    pub bound_factor: f64,
    pub seed: u64,
}

/// `H_2^α` norms of the exotic `S⁰_{1,1}` symbol across resolutions (d = 2, column side).
pub fn forbidden_symbol_experiment(
    alphas: &[f64],
    sizes: &[usize],
    profile: &Arc<Profile>,
    opts: &EstimateOptions,
) -> Result<ForbiddenReport> {
    if alphas.iter().any(|a| *a < 0.0 || !a.is_finite()) {
        return Err(Error::Validation("smoothness values must be finite and ≥ 0".into()));
    }
    if sizes.len() < 2 {
        return Err(Error::Config("a sweep needs at least two sizes".into()));
    }
    let bound_factor = 2.0;
    let mut series = Vec::new();
    for &alpha in alphas {
        let space = SpaceDescriptor::h2(alpha);
        let mut estimates = Vec::new();
        let mut single = Vec::new();
        for &n in sizes {
            let grid = GridSpec::new(2, n, 1)?;
            let ctx = NormContext::new(LpFamily::with_profile(grid, profile.clone())?);
            let full = crate::exemplars::exotic(grid, profile)?;
            estimates.push(estimate_operator_norm(&full, Side::Column, &space, &space, opts, &ctx)?.value);
            let first = crate::exemplars::exotic_bands(grid, profile, 1)?;
            single.push(estimate_operator_norm(&first, Side::Column, &space, &space, opts, &ctx)?.value);
        }
        let ratio = |v: &[f64]| {
            v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        series.push(ForbiddenSeries {
            alpha,
            sizes: sizes.to_vec(),
            growth: ratio(&estimates),
            single_band_growth: ratio(&single),
            strictly_increasing: estimates.windows(2).all(|w| w[1] > w[0]),
            estimates,
            single_band: single,
        });
    }
    let unbounded_at_zero = series.iter().filter(|s| s.alpha == 0.0).all(|s| s.strictly_increasing);
    let bounded_positive = series.iter().filter(|s| s.alpha > 0.0).all(|s| s.growth <= bound_factor);
    Ok(ForbiddenReport {
        space: "H2a".into(),
        series,
        unbounded_at_zero,
        bounded_positive,
        bound_factor,
        seed: opts.seed,
    })
}
