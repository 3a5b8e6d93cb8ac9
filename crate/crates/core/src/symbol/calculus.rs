//! Truncated asymptotic expansions for composition and adjoints, with
//! remainder measurements against the exact operators.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{multi_indices, Claim, DiffKind, Symbol};
use crate::error::{Error, Result};
use crate::grid::OpFn;
use crate::lp::top_level;
use crate::pdo::{Operator, Side, DEFAULT_BUDGET_BYTES};
use crate::rng;

/// Highest truncation order accepted; beyond it the unit-step ξ-differences
/// stop tracking the continuous derivatives on the grids we use.
pub const MAX_ORDER: usize = 6;

fn factorial(g: &[usize]) -> f64 {
    g.iter().map(|&k| (1..=k).product::<usize>() as f64).product()
}

fn coefficient(gamma: &[usize]) -> C64 {
    let k: usize = gamma.iter().sum();
    C64::new(0.0, 2.0 * std::f64::consts::PI).powi(-(k as i32)) / factorial(gamma)
}

fn check_order(n0: usize) -> Result<()> {
    if n0 == 0 || n0 > MAX_ORDER {
        return Err(Error::Config(format!("truncation order must be in 1..={MAX_ORDER}, got {n0}")));
    }
    Ok(())
}

fn indices(d: usize, n0: usize) -> Vec<Vec<usize>> {
    multi_indices(d, n0 - 1)
}

/// `Σ_{|γ|<N0} (2πi)^{−|γ|}/γ! · D_ξ^γ σ1 · D_s^γ σ2`.
pub fn compose_symbols_asymptotic(s1: &Symbol, s2: &Symbol, n0: usize, budget_bytes: usize) -> Result<Symbol> {
    check_order(n0)?;
    if s1.grid() != s2.grid() {
        return Err(Error::Structural("symbols live on different grids".into()));
    }
    let (c1, c2) = (s1.claim(), s2.claim());
    if c1.delta >= 1.0 || c2.delta >= 1.0 {
        return Err(Error::Validation("the expansion needs δ < 1".into()));
    }
    let d = s1.grid().d;
    let zero = vec![0; d];
    let mut out: Option<Symbol> = None;
    for gamma in indices(d, n0) {
        let a = s1.derivative(&zero, &gamma, DiffKind::Central)?;
        let b = s2.derivative(&gamma, &zero, DiffKind::Central)?;
        let t = a.product(&b, budget_bytes)?.scale(coefficient(&gamma));
        out = Some(match out {
            None => t,
            Some(acc) => acc.add(&t, budget_bytes)?,
        });
    }
    let claim = Claim::new(c1.order + c2.order, c1.rho.min(c2.rho), c1.delta.max(c2.delta))?;
    out.expect("N0 ≥ 1").with_claim(claim)
}

/// `Σ_{|γ|<N0} (2πi)^{−|γ|}/γ! · D_ξ^γ D_s^γ σ*`.
pub fn adjoint_symbol_asymptotic(sigma: &Symbol, n0: usize, budget_bytes: usize) -> Result<Symbol> {
    check_order(n0)?;
    if sigma.claim().delta >= 1.0 {
        return Err(Error::Validation("the expansion needs δ < 1".into()));
    }
    let star = sigma.pointwise_adjoint();
    let d = sigma.grid().d;
    let mut out: Option<Symbol> = None;
    for gamma in indices(d, n0) {
        let t = star.derivative(&gamma, &gamma, DiffKind::Central)?.scale(coefficient(&gamma));
        out = Some(match out {
            None => t,
            Some(acc) => acc.add(&t, budget_bytes)?,
        });
    }
    out.expect("N0 ≥ 1").with_claim(sigma.claim())
}

#[derive(Clone, Copy, Debug)]
pub struct RemainderOptions {
    pub trials: usize,
    pub seed: u64,
    pub budget_bytes: usize,
}

impl Default for RemainderOptions {
    fn default() -> Self {
        RemainderOptions { trials: 4, seed: 1, budget_bytes: DEFAULT_BUDGET_BYTES }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemainderReport {
    pub orders: Vec<usize>,
    /// Largest relative error over the test inputs, per order.
    pub errors: Vec<f64>,
    pub monotone: bool,
    pub trials: usize,
    pub seed: u64,
}

fn test_inputs(sigma: &Symbol, opts: &RemainderOptions) -> Vec<OpFn> {
    let g = sigma.grid();
    let radius = (1u64 << top_level(g.n)) as f64;
    (0..opts.trials)
        .map(|t| rng::random_band_limited(&g, radius, 0.0, &mut rng::seeded(opts.seed.wrapping_add(t as u64))))
        .collect()
}

fn l2(f: &OpFn) -> f64 {
    f.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn is_monotone(errors: &[f64]) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0])
}

/// `max_f ‖T_{σ3} f − T_{σ1}(T_{σ2} f)‖ / ‖f‖` for each truncation order.
pub fn composition_remainder(s1: &Symbol, s2: &Symbol, orders: &[usize], opts: RemainderOptions) -> Result<RemainderReport> {
    let inputs = test_inputs(s2, &opts);
    let o1 = Operator::new(s1, Side::Column, opts.budget_bytes)?;
    let o2 = Operator::new(s2, Side::Column, opts.budget_bytes)?;
    let exact: Vec<OpFn> = inputs.iter().map(|f| o1.apply(&o2.apply(f)?)).collect::<Result<_>>()?;
    let mut errors = Vec::new();
    for &n0 in orders {
        let s3 = compose_symbols_asymptotic(s1, s2, n0, opts.budget_bytes)?;
        let o3 = Operator::new(&s3, Side::Column, opts.budget_bytes)?;
        let mut worst = 0.0f64;
        for (f, e) in inputs.iter().zip(&exact) {
            let diff = o3.apply(f)?.lincomb(C64::new(1.0, 0.0), e, C64::new(-1.0, 0.0))?;
            worst = worst.max(l2(&diff) / l2(f));
        }
        errors.push(worst);
    }
    Ok(RemainderReport { orders: orders.to_vec(), monotone: is_monotone(&errors), errors, trials: opts.trials, seed: opts.seed })
}

fn pairing(a: &OpFn, b: &OpFn) -> C64 {
    // ∫ tr(b* a) through Plancherel
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| y.conj() * x).sum()
}

/// `max |⟨T_σ f, g⟩ − ⟨f, T_σ̃ g⟩| / (‖f‖‖g‖)` for each truncation order of `σ̃`.
pub fn adjoint_remainder(sigma: &Symbol, orders: &[usize], opts: RemainderOptions) -> Result<RemainderReport> {
    let fs = test_inputs(sigma, &opts);
    let gs = test_inputs(sigma, &RemainderOptions { seed: opts.seed.wrapping_add(1 << 20), ..opts });
    let op = Operator::new(sigma, Side::Column, opts.budget_bytes)?;
    let lhs: Vec<C64> = fs.iter().zip(&gs).map(|(f, g)| Ok(pairing(&op.apply(f)?, g))).collect::<Result<_>>()?;
    let mut errors = Vec::new();
    for &n0 in orders {
        let st = adjoint_symbol_asymptotic(sigma, n0, opts.budget_bytes)?;
        let ot = Operator::new(&st, Side::Column, opts.budget_bytes)?;
        let mut worst = 0.0f64;
        for ((f, g), l) in fs.iter().zip(&gs).zip(&lhs) {
            let r = pairing(f, &ot.apply(g)?);
            worst = worst.max((l - r).norm() / (l2(f) * l2(g)));
        }
        errors.push(worst);
    }
    Ok(RemainderReport { orders: orders.to_vec(), monotone: is_monotone(&errors), errors, trials: opts.trials, seed: opts.seed })
}
