//! Numerical class certificates: sup-normalized derivative constants.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{multi_indices, Claim, DiffKind, Repr, Symbol};
use crate::error::{Error, Result};
use crate::grid::MAX_DIM;
use crate::mat;

/// Highest derivative order accepted by the checker.
pub const MAX_CLASS_ORDER: usize = 4;
/// Default pass threshold for individual constants. Second s-derivatives
/// already carry (2π)² ≈ 40, so correctly claimed exemplars sit in the low
/// thousands at |γ| = 2.
pub const DEFAULT_THRESHOLD: f64 = 1e4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassEntry {
    pub gamma: Vec<usize>,
    pub beta: Vec<usize>,
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassReport {
    pub claim: Claim,
    pub max_gamma: usize,
    pub max_beta: usize,
    pub differences: DiffKind,
    /// Offset added to every lattice frequency before sampling.
    pub xi_offset: f64,
    pub entries: Vec<ClassEntry>,
    pub max_constant: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ClassReport {
    pub fn constant(&self, gamma: &[usize], beta: &[usize]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.gamma == gamma && e.beta == beta)
            .map(|e| e.constant)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ClassOptions {
    pub max_gamma: usize,
    pub max_beta: usize,
    pub kind: DiffKind,
    pub xi_offset: f64,
    pub threshold: f64,
}

impl ClassOptions {
    pub fn new(max_gamma: usize, max_beta: usize) -> Self {
        ClassOptions {
            max_gamma,
            max_beta,
            kind: DiffKind::Central,
            xi_offset: 0.0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Class constants with central ξ-differences on the lattice.
pub fn check_symbol_class(sigma: &Symbol, max_gamma: usize, max_beta: usize) -> Result<ClassReport> {
    class_constants(sigma, ClassOptions::new(max_gamma, max_beta))
}

pub fn class_constants(sigma: &Symbol, opts: ClassOptions) -> Result<ClassReport> {
    let claim = sigma.claim();
    claim.validate()?;
    if opts.max_gamma > MAX_CLASS_ORDER || opts.max_beta > MAX_CLASS_ORDER {
        return Err(Error::Config(format!(
            "class check orders are capped at {MAX_CLASS_ORDER}"
        )));
    }
    if matches!(sigma.repr(), Repr::Table(_)) && opts.xi_offset != 0.0 {
        return Err(Error::Unsupported(
            "tabulated symbols can only be sampled on the lattice".into(),
        ));
    }
    let d = sigma.grid().d;
    let gammas = multi_indices(d, opts.max_gamma);
    let betas = multi_indices(d, opts.max_beta);
    let mut entries = Vec::new();
    for gamma in &gammas {
        for beta in &betas {
            let g: usize = gamma.iter().sum();
            let b: usize = beta.iter().sum();
            let deriv = sigma.derivative(gamma, beta, opts.kind)?;
            let reach = stencil_reach(beta, opts.kind);
            let c = weighted_sup(&deriv, claim.weight_exponent(g, b), opts.xi_offset, &reach)?;
            entries.push(ClassEntry { gamma: gamma.clone(), beta: beta.clone(), constant: c });
        }
    }
    let max_constant = entries.iter().map(|e| e.constant).fold(0.0, f64::max);
    let pass = entries.iter().all(|e| e.constant.is_finite() && e.constant <= opts.threshold);
    Ok(ClassReport {
        claim,
        max_gamma: opts.max_gamma,
        max_beta: opts.max_beta,
        differences: opts.kind,
        xi_offset: opts.xi_offset,
        entries,
        max_constant,
        threshold: opts.threshold,
        pass,
    })
}

/// Per-axis (below, above) stencil extent.
fn stencil_reach(beta: &[usize], kind: DiffKind) -> Vec<(i64, i64)> {
    beta.iter()
        .map(|&b| match kind {
            DiffKind::Forward => (0, b as i64),
            DiffKind::Central => {
                let r = (b / 2 + b % 2) as i64;
                (r, r)
            }
        })
        .collect()
}

/// `max_{s,ξ} ‖σ(s,ξ)‖_op (1+|ξ|)^{-exponent}`. Tabulated symbols are only
/// sampled where the difference stencil stays inside the frequency box.
fn weighted_sup(sigma: &Symbol, exponent: f64, offset: f64, reach: &[(i64, i64)]) -> Result<f64> {
    let g = sigma.grid();
    let d = g.d;
    let q = g.q;
    let s = g.slots();
    let pts = g.points();
    let half = (g.n / 2) as i64;
    let freqs = g.freq_table();
    let tabulated = matches!(sigma.repr(), Repr::Table(_));
    let weights: Vec<Option<f64>> = freqs
        .chunks(d)
        .map(|m| {
            if tabulated
                && m.iter().zip(reach).any(|(&v, &(lo, hi))| v - lo < -half || v + hi > half - 1)
            {
                return None;
            }
            let r = m.iter().map(|&v| (v as f64 + offset).powi(2)).sum::<f64>().sqrt();
            Some((1.0 + r).powf(-exponent))
        })
        .collect();
    let norm = |a: &[C64]| if q == 1 { a[0].norm() } else { mat::op_norm(a, q) };
    let sup = match sigma.repr() {
        Repr::Table(tab) => tab
            .par_chunks(pts * s)
            .map(|row| {
                let mut best = 0.0f64;
                for (m, w) in weights.iter().enumerate() {
                    if let Some(w) = w {
                        best = best.max(norm(&row[m * s..(m + 1) * s]) * w);
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max),
        Repr::Separable(terms) => {
            // ξ-factors sampled once on the shifted lattice
            let lattices: Vec<Vec<C64>> = terms
                .iter()
                .map(|t| {
                    let mut out = vec![C64::new(0.0, 0.0); pts * s];
                    out.par_chunks_mut(s).zip(freqs.par_chunks(d)).for_each(|(o, m)| {
                        let mut x = [0.0; MAX_DIM];
                        for k in 0..d {
                            x[k] = m[k] as f64 + offset;
                        }
                        t.xi.eval_into(&x[..d], q, o);
                    });
                    out
                })
                .collect();
            (0..pts)
                .into_par_iter()
                .map(|p| {
                    let mut a: Vec<Vec<C64>> = Vec::with_capacity(terms.len());
                    for t in terms {
                        let mut v = vec![C64::new(0.0, 0.0); s];
                        t.s.value_into(p, q, &mut v);
                        a.push(v);
                    }
                    let mut acc = vec![C64::new(0.0, 0.0); s];
                    let mut best = 0.0f64;
                    for (m, w) in weights.iter().enumerate() {
                        let Some(w) = w else { continue };
                        acc.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                        for (av, lat) in a.iter().zip(&lattices) {
                            mat::mul_acc(av, &lat[m * s..(m + 1) * s], &mut acc, q);
                        }
                        best = best.max(norm(&acc) * w);
                    }
                    best
                })
                .reduce(|| 0.0, f64::max)
        }
    };
    Ok(sup)
}
