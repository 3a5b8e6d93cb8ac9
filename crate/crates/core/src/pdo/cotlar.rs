//! Almost-orthogonality tables for the dyadic pieces `T_k = T_{σφ̂_k}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{power_iteration, Operator, Side, DEFAULT_BUDGET_BYTES};
use crate::error::{Error, Result};
use crate::lp::LpFamily;
use crate::symbol::{dyadic_pieces, Claim, Symbol};

#[derive(Clone, Copy, Debug)]
pub struct CotlarOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for CotlarOptions {
    fn default() -> Self {
        CotlarOptions { tol: 1e-3, max_iter: 200, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CotlarReport {
    pub claim: Claim,
    pub bands: usize,
    /// `[j][k] = ‖T_k* T_j‖`.
    pub star_first: Vec<Vec<f64>>,
    /// `[j][k] = ‖T_k T_j*‖`.
    pub star_second: Vec<Vec<f64>>,
    /// Largest `‖T_k T_j*‖` over `|j−k| ≥ 2`.
    pub disjoint_max: f64,
    /// Per `K = max(j,k)`: largest `‖T_k* T_j‖` with `|j−k| ≥ 2`.
    pub far_by_level: Vec<(usize, f64)>,
    /// Least-squares slope of `log₂` of `far_by_level` against `K`.
    pub decay_rate: f64,
    /// max/min of the diagonal `‖T_k* T_k‖`.
    pub diagonal_ratio: f64,
    pub seed: u64,
}

/// Column-side Cotlar-Stein table for `σ ∈ S⁰_{1,δ}`, `δ < 1`.
pub fn cotlar_stein_report(sigma: &Symbol, fam: &LpFamily, opts: CotlarOptions) -> Result<CotlarReport> {
    let claim = sigma.claim();
    if claim.rho != 1.0 || claim.delta >= 1.0 {
        return Err(Error::Validation(format!(
            "almost orthogonality needs ρ = 1 and δ < 1 (claim ρ = {}, δ = {})",
            claim.rho, claim.delta
        )));
    }
    let bands = fam.top() + 1;
    if bands < 3 {
        return Err(Error::Config(format!("grid hosts {bands} dyadic bands, need at least 3")));
    }
    let grid = sigma.grid();
    let pieces = dyadic_pieces(sigma, fam)?;
    let ops: Vec<Operator> = pieces
        .iter()
        .map(|p| Operator::new(p, Side::Column, DEFAULT_BUDGET_BYTES))
        .collect::<Result<_>>()?;

    // ‖A*B‖ = ‖B*A‖, so only j ≤ k is computed
    let pairs: Vec<(usize, usize)> = (0..bands).flat_map(|j| (j..bands).map(move |k| (j, k))).collect();
    let values: Vec<Result<(f64, f64)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(j, k))| {
            let (tj, tk) = (&ops[j], &ops[k]);
            let seed = opts.seed.wrapping_add(i as u64);
            let first = power_iteration(
                &grid,
                |f| tk.apply_adjoint(&tj.apply(f)?),
                |g| tj.apply_adjoint(&tk.apply(g)?),
                opts.tol,
                opts.max_iter,
                seed,
            )?;
            let second = power_iteration(
                &grid,
                |f| tk.apply(&tj.apply_adjoint(f)?),
                |g| tj.apply(&tk.apply_adjoint(g)?),
                opts.tol,
                opts.max_iter,
                seed,
            )?;
            Ok((first.value, second.value))
        })
        .collect();

    let mut star_first = vec![vec![0.0; bands]; bands];
    let mut star_second = vec![vec![0.0; bands]; bands];
    for (&(j, k), v) in pairs.iter().zip(values) {
        let (a, b) = v?;
        star_first[j][k] = a;
        star_first[k][j] = a;
        star_second[j][k] = b;
        star_second[k][j] = b;
    }

    let mut disjoint_max = 0.0f64;
    let mut far_by_level = Vec::new();
    for k in 0..bands {
        let mut far = 0.0f64;
        for j in 0..bands {
            if j.abs_diff(k) >= 2 {
                disjoint_max = disjoint_max.max(star_second[j][k]);
                if j < k {
                    far = far.max(star_first[j][k]);
                }
            }
        }
        if k >= 2 {
            far_by_level.push((k, far));
        }
    }
    let pts: Vec<(f64, f64)> = far_by_level
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(k, v)| (k as f64, v.log2()))
        .collect();
    let decay_rate = slope(&pts);
    let diag: Vec<f64> = (0..bands).map(|k| star_first[k][k]).collect();
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CotlarReport {
        claim,
        bands,
        star_first,
        star_second,
        disjoint_max,
        far_by_level,
        decay_rate,
        diagonal_ratio: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        seed: opts.seed,
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::lp::Profile;

    #[test]
    fn rejects_forbidden_claims_and_small_grids() {
        let g = GridSpec::new(2, 32, 1).unwrap();
        let p = Profile::standard();
        let fam = LpFamily::with_profile(g, p.clone()).unwrap();
        let ex = crate::exemplars::exotic(g, &p).unwrap();
        assert!(matches!(cotlar_stein_report(&ex, &fam, CotlarOptions::default()), Err(Error::Validation(_))));
        let g8 = GridSpec::new(2, 8, 1).unwrap();
        let fam8 = LpFamily::with_profile(g8, p).unwrap();
        let id = Symbol::identity(g8);
        assert!(matches!(cotlar_stein_report(&id, &fam8, CotlarOptions::default()), Err(Error::Config(_))));
    }

    #[test]
    fn multiplier_pieces_are_orthogonal() {
        // s-independent symbol: T_k* T_j = 0 unless the bands overlap
        let g = GridSpec::new(2, 32, 1).unwrap();
        let fam = LpFamily::with_profile(g, Profile::standard()).unwrap();
        let r = cotlar_stein_report(&Symbol::identity(g), &fam, CotlarOptions::default()).unwrap();
        for j in 0..r.bands {
            for k in 0..r.bands {
                if j.abs_diff(k) >= 2 {
                    assert!(r.star_first[j][k] < 1e-12);
                    assert!(r.star_second[j][k] < 1e-12);
                }
            }
        }
        // ‖T_k‖² = max φ̂_k² ≤ 1
        for k in 0..r.bands {
            assert!(r.star_first[k][k] <= 1.0 + 1e-9 && r.star_first[k][k] > 0.2);
        }
    }
}
