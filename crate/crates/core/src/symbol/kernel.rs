//! Distribution kernels `K(s,t) = Σ_m σ(s,m) e^{2πi t·m}` and their decay.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derivative_weights, DiffKind, Symbol};
use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, OpFn, MAX_DIM};
use crate::mat;

/// Kernel values laid out `[s][t][row][col]`.
#[derive(Clone, Debug)]
pub struct Kernel {
    grid: GridSpec,
    values: Vec<C64>,
}

pub fn kernel_from_symbol(sigma: &Symbol, budget_bytes: usize) -> Result<Kernel> {
    let g = sigma.grid();
    let table = sigma.to_table(budget_bytes)?;
    let pts = g.points();
    let s = g.slots();
    let mut values = vec![C64::new(0.0, 0.0); table.len()];
    values
        .par_chunks_mut(pts * s)
        .zip(table.par_chunks(pts * s))
        .for_each(|(out, row)| out.copy_from_slice(&grid::inverse(&g, row)));
    Ok(Kernel { grid: g, values })
}

impl Kernel {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn at(&self, s_point: usize, t_point: usize) -> &[C64] {
        let sl = self.grid.slots();
        let i = (s_point * self.grid.points() + t_point) * sl;
        &self.values[i..i + sl]
    }

    /// `Tf(s) = Σ_t K(s, s−t) f(t) Δt`, the column action.
    pub fn apply(&self, f: &OpFn) -> Result<OpFn> {
        let g = self.grid;
        if f.grid() != g {
            return Err(Error::Structural("function and kernel grids differ".into()));
        }
        let pts = g.points();
        let q = g.q;
        let sl = g.slots();
        let d = g.d;
        let n = g.n;
        let dt = g.cell();
        let fs = f.samples();
        let mut out = vec![C64::new(0.0, 0.0); g.len()];
        out.par_chunks_mut(sl).enumerate().for_each(|(p, o)| {
            let mut ip = [0usize; MAX_DIM];
            let mut it = [0usize; MAX_DIM];
            let mut id = [0usize; MAX_DIM];
            g.unravel(p, &mut ip[..d]);
            for t in 0..pts {
                g.unravel(t, &mut it[..d]);
                for k in 0..d {
                    id[k] = (ip[k] + n - it[k]) % n;
                }
                let diff = g.ravel(&id[..d]);
                mat::mul_acc(self.at(p, diff), &fs[t * sl..(t + 1) * sl], o, q);
            }
            o.iter_mut().for_each(|z| *z *= dt);
        });
        OpFn::from_samples(g, out)
    }
}

/// `D_s^γ D_t^β K(s_p, ·)` for a single s, without materializing the full kernel.
pub fn kernel_row(sigma: &Symbol, s_point: usize, gamma: &[usize], beta: &[usize]) -> Result<Vec<C64>> {
    let g = sigma.grid();
    if s_point >= g.points() {
        return Err(Error::Validation("s index outside the grid".into()));
    }
    let zero = vec![0; g.d];
    let deriv = sigma.derivative(gamma, &zero, DiffKind::Central)?;
    let sl = g.slots();
    let d = g.d;
    let freqs = g.freq_table();
    let weights = derivative_weights(&g.with_q(1), beta);
    let mut row = vec![C64::new(0.0, 0.0); g.len()];
    row.par_chunks_mut(sl).enumerate().for_each(|(m, o)| {
        let mut x = [0.0; MAX_DIM];
        for k in 0..d {
            x[k] = freqs[m * d + k] as f64;
        }
        deriv.eval_into(s_point, &x[..d], o);
        o.iter_mut().for_each(|z| *z *= weights[m]);
    });
    Ok(grid::inverse(&g, &row))
}

/// Euclidean length of the shortest representative of `t` on the torus.
pub fn torus_norm(g: &GridSpec, t_point: usize) -> f64 {
    let mut x = [0.0; MAX_DIM];
    g.coord(t_point, &mut x[..g.d]);
    x[..g.d].iter().map(|&v| v.min(1.0 - v).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayBin {
    pub lo: f64,
    pub hi: f64,
    pub t_at_max: f64,
    pub max_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub gamma: Vec<usize>,
    pub beta: Vec<usize>,
    pub s_point: Vec<f64>,
    pub slope: f64,
    pub predicted: f64,
    pub intercept: f64,
    pub residual: f64,
    pub bins: Vec<DecayBin>,
    pub flags: Vec<String>,
}

impl DecayReport {
    /// Relative deviation of the fitted slope from the predicted one.
    pub fn relative_error(&self) -> f64 {
        ((self.slope - self.predicted) / self.predicted).abs()
    }
}

pub const FLAG_NO_SINGULARITY: &str = "no singular decay: order below -d";
pub const FLAG_FAR_FIELD: &str = "decay for |t|>1 untestable on the torus";

/// Fit `log‖D_s^γ D_t^β K(s,t)‖` against `log|t|` over `2/N ≤ |t| ≤ 1/4`,
/// using half-octave bins and the maximum norm in each bin.
pub fn kernel_decay_report(sigma: &Symbol, gamma: &[usize], beta: &[usize], s_point: usize) -> Result<DecayReport> {
    let g = sigma.grid();
    let q = g.q;
    let sl = g.slots();
    let row = kernel_row(sigma, s_point, gamma, beta)?;
    let lo = 2.0 / g.n as f64;
    let hi = 0.25;
    let mut edges = vec![lo];
    while *edges.last().unwrap() * 2f64.sqrt() <= hi * (1.0 + 1e-12) {
        let e = *edges.last().unwrap() * 2f64.sqrt();
        edges.push(e);
    }
    if edges.len() < 5 {
        return Err(Error::Config(format!(
            "only {} half-octave bins between 2/N and 1/4; need at least 4",
            edges.len().saturating_sub(1)
        )));
    }
    let mut bins: Vec<DecayBin> = edges
        .windows(2)
        .map(|w| DecayBin { lo: w[0], hi: w[1], t_at_max: 0.0, max_norm: 0.0 })
        .collect();
    let last = bins.len() - 1;
    for t in 0..g.points() {
        let r = torus_norm(&g, t);
        if r < lo || r > edges[last + 1] * (1.0 + 1e-12) {
            continue;
        }
        let b = bins.iter().position(|b| r < b.hi).unwrap_or(last);
        let v = &row[t * sl..(t + 1) * sl];
        let nrm = if q == 1 { v[0].norm() } else { mat::op_norm(v, q) };
        if nrm > bins[b].max_norm {
            bins[b].max_norm = nrm;
            bins[b].t_at_max = r;
        }
    }
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.max_norm > 0.0)
        .map(|b| (b.t_at_max.ln(), b.max_norm.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Config("fewer than 4 populated bins for the decay fit".into()));
    }
    let (slope, intercept, residual) = least_squares(&pts);
    let order = sigma.claim().order;
    let d = g.d as f64;
    let tot = (gamma.iter().sum::<usize>() + beta.iter().sum::<usize>()) as f64;
    let mut flags = Vec::new();
    if order < -d {
        flags.push(FLAG_NO_SINGULARITY.to_string());
    }
    flags.push(FLAG_FAR_FIELD.to_string());
    let mut sx = vec![0.0; g.d];
    g.coord(s_point, &mut sx);
    Ok(DecayReport {
        gamma: gamma.to_vec(),
        beta: beta.to_vec(),
        s_point: sx,
        slope,
        predicted: -(tot + d + order),
        intercept,
        residual,
        bins,
        flags,
    })
}

/// Ordinary least squares line; returns (slope, intercept, rms residual).
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{Claim, SFactor, Term, XiFactor};
    use std::f64::consts::PI;

    #[test]
    fn identity_kernel_is_scaled_delta() {
        let g = GridSpec::new(2, 8, 2).unwrap();
        let k = kernel_from_symbol(&Symbol::identity(g), 1 << 30).unwrap();
        let n = g.points() as f64;
        for t in 0..g.points() {
            let v = k.at(3, t);
            let want = if t == 0 { n } else { 0.0 };
            assert!((v[0].re - want).abs() < 1e-9 && v[1].norm() < 1e-9 && (v[3].re - want).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplier_kernel_independent_of_s() {
        let g = GridSpec::new(1, 16, 1).unwrap();
        let claim = Claim::new(-2.0, 1.0, 0.0).unwrap();
        let sym = Symbol::multiplier(g, claim, |x| C64::new(1.0 / (1.0 + x[0] * x[0]), 0.0)).unwrap();
        let k = kernel_from_symbol(&sym, 1 << 30).unwrap();
        for t in 0..16 {
            assert!((k.at(0, t)[0] - k.at(9, t)[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn budget_guard() {
        let g = GridSpec::new(2, 16, 1).unwrap();
        assert!(matches!(kernel_from_symbol(&Symbol::identity(g), 1000), Err(Error::Budget(_))));
    }

    #[test]
    fn row_matches_full_kernel() {
        let g = GridSpec::new(2, 16, 1).unwrap();
        let claim = Claim::new(-1.0, 1.0, 0.0).unwrap();
        let s = SFactor::scalar_fn(&g, |x| C64::new(2.0 + (2.0 * PI * x[1]).cos(), 0.0));
        let xi = XiFactor::scalar(|x| C64::new((1.0 + x[0] * x[0] + x[1] * x[1]).powf(-0.5), 0.0));
        let sym = Symbol::separable(g, claim, vec![Term { s, xi }]).unwrap();
        let k = kernel_from_symbol(&sym, 1 << 30).unwrap();
        let row = kernel_row(&sym, 37, &[0, 0], &[0, 0]).unwrap();
        for t in 0..g.points() {
            assert!((row[t] - k.at(37, t)[0]).norm() < 1e-10);
        }
    }

    #[test]
    fn too_few_bins_is_config_error() {
        let g = GridSpec::new(1, 8, 1).unwrap();
        assert!(matches!(
            kernel_decay_report(&Symbol::identity(g), &[0], &[0], 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn least_squares_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 1.0 - 2.5 * i as f64)).collect();
        let (m, c, r) = least_squares(&pts);
        assert!((m + 2.5).abs() < 1e-12 && (c - 1.0).abs() < 1e-12 && r < 1e-12);
    }
}
