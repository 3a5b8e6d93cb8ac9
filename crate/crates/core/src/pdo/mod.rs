//! Pseudo-differential operators: column action `σ(s,m) f̂(m)` and row action
//! `f̂(m) σ(s,m)`, their adjoints, and power iteration.

pub mod cotlar;
pub mod estimate;

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, OpFn, MAX_DIM};
use crate::mat;
use crate::rng;
use crate::symbol::{Repr, SFactor, Symbol};

/// Default memory budget for dense tables and kernels.
pub const DEFAULT_BUDGET_BYTES: usize = 512 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Column,
    Row,
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Side> {
        match s {
            "c" | "col" | "column" => Ok(Side::Column),
            "r" | "row" => Ok(Side::Row),
            other => Err(Error::Validation(format!("unknown side {other} (use c or r)"))),
        }
    }
}

struct Prepared {
    s: SFactor,
    /// ξ-factor on the lattice: one value per point if scalar, else a q×q block.
    xi: Vec<C64>,
    xi_scalar: bool,
}

enum Kind {
    Separable(Vec<Prepared>),
    Table(Arc<Vec<C64>>),
}

/// A symbol prepared for repeated application (lattice tables cached).
pub struct Operator {
    grid: GridSpec,
    side: Side,
    kind: Kind,
}

/// Largest Nyquist-plane coefficient relative to the largest coefficient.
fn nyquist_ratio(f: &OpFn) -> f64 {
    let g = f.grid();
    let s = g.slots();
    let d = g.d;
    let half = -((g.n / 2) as i64);
    let freqs = g.freq_table();
    let mut top = 0.0f64;
    let mut nyq = 0.0f64;
    for (m, c) in f.coeffs().chunks(s).enumerate() {
        let v = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        top = top.max(v);
        if freqs[m * d..(m + 1) * d].iter().any(|&k| k == half) {
            nyq = nyq.max(v);
        }
    }
    if top == 0.0 {
        0.0
    } else {
        nyq / top
    }
}

/// Band-limit precondition: nothing on the Nyquist planes `m_k = −N/2`, where
/// the lattice cannot tell `m` from `m + N`.
pub fn check_band_limit(f: &OpFn) -> Result<()> {
    let r = nyquist_ratio(f);
    if r > 1e-12 {
        return Err(Error::Validation(format!(
            "input is not band-limited within the lattice (Nyquist content ratio {r:.3e})"
        )));
    }
    Ok(())
}

/// `T_σ f` with the band-limit precondition enforced.
pub fn apply_pdo(sigma: &Symbol, f: &OpFn, side: Side) -> Result<OpFn> {
    check_band_limit(f)?;
    Operator::new(sigma, side, DEFAULT_BUDGET_BYTES)?.apply(f)
}

/// `(T_σ)* g` with the band-limit precondition enforced on `g`.
pub fn apply_pdo_adjoint(sigma: &Symbol, g: &OpFn, side: Side) -> Result<OpFn> {
    check_band_limit(g)?;
    Operator::new(sigma, side, DEFAULT_BUDGET_BYTES)?.apply_adjoint(g)
}

impl Operator {
    pub fn new(sigma: &Symbol, side: Side, budget_bytes: usize) -> Result<Operator> {
        let g = sigma.grid();
        let kind = match sigma.repr() {
            Repr::Separable(terms) => Kind::Separable(
                terms
                    .iter()
                    .map(|t| Prepared { s: t.s.clone(), xi: t.xi.lattice(&g), xi_scalar: t.xi.is_scalar() })
                    // terms vanishing on the lattice (e.g. outside a dyadic band) contribute nothing
                    .filter(|p| p.xi.iter().any(|z| *z != C64::new(0.0, 0.0)))
                    .collect(),
            ),
            Repr::Table(_) => Kind::Table(sigma.to_table(budget_bytes)?),
        };
        Ok(Operator { grid: g, side, kind })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn side(&self) -> Side {
        self.side
    }

    fn check(&self, f: &OpFn) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::Structural(format!(
                "function grid {:?} does not match symbol grid {:?}",
                f.grid(),
                self.grid
            )));
        }
        Ok(())
    }

    pub fn apply(&self, f: &OpFn) -> Result<OpFn> {
        self.check(f)?;
        match (&self.kind, self.side) {
            (Kind::Separable(t), Side::Column) => self.column_sep(t, f),
            (Kind::Separable(t), Side::Row) => self.row_sep(t, f),
            (Kind::Table(t), side) => self.table_apply(t, f, side),
        }
    }

    pub fn apply_adjoint(&self, g: &OpFn) -> Result<OpFn> {
        self.check(g)?;
        match (&self.kind, self.side) {
            (Kind::Separable(t), Side::Column) => self.column_sep_adj(t, g),
            (Kind::Separable(t), Side::Row) => self.row_sep_adj(t, g),
            (Kind::Table(t), side) => self.table_adjoint(t, g, side),
        }
    }

    /// `Σ_r A_r(s) · IFFT[B_r(m) f̂(m)]`.
    fn column_sep(&self, terms: &[Prepared], f: &OpFn) -> Result<OpFn> {
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let fc = f.coeffs();
        let mut out = vec![C64::new(0.0, 0.0); g.len()];
        for t in terms {
            let mut h = vec![C64::new(0.0, 0.0); g.len()];
            h.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
                let c = &fc[m * s..(m + 1) * s];
                if t.xi_scalar {
                    let b = t.xi[m];
                    o.iter_mut().zip(c).for_each(|(x, y)| *x = b * y);
                } else {
                    mat::mul_into(&t.xi[m * s..(m + 1) * s], c, o, q);
                }
            });
            let h = grid::inverse(&g, &h);
            left_multiply_acc(&t.s, &h, &mut out, q);
        }
        OpFn::from_samples(g, out)
    }

    /// Row action: `Σ_r A_r(s) ∘ IFFT[f̂(m) B_r(m)]`, matrix s-factors expanded
    /// through the matrix units so every product keeps the row order.
    fn row_sep(&self, terms: &[Prepared], f: &OpFn) -> Result<OpFn> {
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let fc = f.coeffs();
        let mut out = vec![C64::new(0.0, 0.0); g.len()];
        for t in terms {
            match (&t.s, t.xi_scalar) {
                (SFactor::Scalar(a), _) => {
                    let h = grid::inverse(&g, &right_product(fc, t, q));
                    out.par_chunks_mut(s).zip(h.par_chunks(s)).zip(a.par_iter()).for_each(|((o, x), av)| {
                        o.iter_mut().zip(x).for_each(|(u, v)| *u += av * v);
                    });
                }
                (SFactor::Matrix(a), true) => {
                    // f̂ b A = (b f̂) A
                    let h = grid::inverse(&g, &right_product(fc, t, q));
                    out.par_chunks_mut(s)
                        .zip(h.par_chunks(s).zip(a.par_chunks(s)))
                        .for_each(|(o, (x, am))| mat::mul_acc(x, am, o, q));
                }
                (SFactor::Matrix(_), false) => {
                    for ia in 0..q {
                        for ib in 0..q {
                            let entry = t.s.entry(ia, ib, q);
                            if entry.is_zero() {
                                continue;
                            }
                            let SFactor::Scalar(av) = entry else { unreachable!() };
                            // (f̂ E_ab B)_{ij} = f̂_{i,a} B_{b,j}
                            let mut hc = vec![C64::new(0.0, 0.0); g.len()];
                            hc.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
                                let c = &fc[m * s..(m + 1) * s];
                                let b = &t.xi[m * s..(m + 1) * s];
                                for i in 0..q {
                                    for j in 0..q {
                                        o[i * q + j] = c[i * q + ia] * b[ib * q + j];
                                    }
                                }
                            });
                            let h = grid::inverse(&g, &hc);
                            out.par_chunks_mut(s).zip(h.par_chunks(s)).zip(av.par_iter()).for_each(
                                |((o, x), w)| o.iter_mut().zip(x).for_each(|(u, v)| *u += w * v),
                            );
                        }
                    }
                }
            }
        }
        OpFn::from_samples(g, out)
    }

    /// `IFFT[Σ_r B_r(m)* FFT(A_r* g)(m)]`.
    fn column_sep_adj(&self, terms: &[Prepared], gfun: &OpFn) -> Result<OpFn> {
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let gs = gfun.samples();
        let mut acc = vec![C64::new(0.0, 0.0); g.len()];
        for t in terms {
            let mut h = vec![C64::new(0.0, 0.0); g.len()];
            match &t.s {
                SFactor::Scalar(a) => h.par_chunks_mut(s).zip(gs.par_chunks(s)).zip(a.par_iter()).for_each(
                    |((o, x), av)| o.iter_mut().zip(x).for_each(|(u, v)| *u = av.conj() * v),
                ),
                SFactor::Matrix(a) => h
                    .par_chunks_mut(s)
                    .zip(gs.par_chunks(s).zip(a.par_chunks(s)))
                    .for_each(|(o, (x, am))| mat::adj_mul_acc(am, x, o, q)),
            }
            let hc = grid::forward(&g, &h);
            acc.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
                let c = &hc[m * s..(m + 1) * s];
                if t.xi_scalar {
                    let b = t.xi[m].conj();
                    o.iter_mut().zip(c).for_each(|(u, v)| *u += b * v);
                } else {
                    mat::adj_mul_acc(&t.xi[m * s..(m + 1) * s], c, o, q);
                }
            });
        }
        OpFn::from_coeffs(g, acc)
    }

    fn row_sep_adj(&self, terms: &[Prepared], gfun: &OpFn) -> Result<OpFn> {
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let gs = gfun.samples();
        let mut acc = vec![C64::new(0.0, 0.0); g.len()];
        let scaled = |a: &[C64]| -> Vec<C64> {
            let mut h = vec![C64::new(0.0, 0.0); g.len()];
            h.par_chunks_mut(s).zip(gs.par_chunks(s)).zip(a.par_iter()).for_each(|((o, x), av)| {
                o.iter_mut().zip(x).for_each(|(u, v)| *u = av.conj() * v)
            });
            grid::forward(&g, &h)
        };
        for t in terms {
            match (&t.s, t.xi_scalar) {
                (SFactor::Scalar(a), _) => {
                    // ĥ(m) B(m)*
                    let hc = scaled(a);
                    acc.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
                        let c = &hc[m * s..(m + 1) * s];
                        if t.xi_scalar {
                            let b = t.xi[m].conj();
                            o.iter_mut().zip(c).for_each(|(u, v)| *u += b * v);
                        } else {
                            let bs = mat::adjoint(&t.xi[m * s..(m + 1) * s], q);
                            mat::mul_acc(c, &bs, o, q);
                        }
                    });
                }
                (SFactor::Matrix(a), true) => {
                    // adjoint of f ↦ IFFT[b f̂]·A is g ↦ IFFT[b̄ FFT(g A*)]
                    let mut h = vec![C64::new(0.0, 0.0); g.len()];
                    h.par_chunks_mut(s).zip(gs.par_chunks(s).zip(a.par_chunks(s))).for_each(|(o, (x, am))| {
                        mat::mul_into(x, &mat::adjoint(am, q), o, q);
                    });
                    let hc = grid::forward(&g, &h);
                    acc.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
                        let b = t.xi[m].conj();
                        o.iter_mut().zip(&hc[m * s..(m + 1) * s]).for_each(|(u, v)| *u += b * v);
                    });
                }
                (SFactor::Matrix(_), false) => {
                    for ia in 0..q {
                        for ib in 0..q {
                            let entry = t.s.entry(ia, ib, q);
                            if entry.is_zero() {
                                continue;
                            }
                            let SFactor::Scalar(av) = entry else { unreachable!() };
                            let hc = scaled(&av);
                            // ĥ (E_ab B)* = ĥ B* E_ba: column a receives column b of ĥB*
                            acc.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
                                let c = &hc[m * s..(m + 1) * s];
                                let bs = mat::adjoint(&t.xi[m * s..(m + 1) * s], q);
                                let hb = mat::mul(c, &bs, q);
                                for i in 0..q {
                                    o[i * q + ia] += hb[i * q + ib];
                                }
                            });
                        }
                    }
                }
            }
        }
        OpFn::from_coeffs(g, acc)
    }

    /// Direct lattice sum `Σ_m σ(s,m) f̂(m) e^{2πi s·m}` (or row order).
    fn table_apply(&self, tab: &[C64], f: &OpFn, side: Side) -> Result<OpFn> {
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let pts = g.points();
        let fc = f.coeffs();
        let phase = PhaseTable::new(&g);
        let active: Vec<usize> = (0..pts).filter(|&m| fc[m * s..(m + 1) * s].iter().any(|z| z.norm() > 0.0)).collect();
        let mut out = vec![C64::new(0.0, 0.0); g.len()];
        out.par_chunks_mut(s).enumerate().for_each(|(p, o)| {
            let mut prod = vec![C64::new(0.0, 0.0); s];
            let mut ip = [0usize; MAX_DIM];
            g.unravel(p, &mut ip[..g.d]);
            for &m in &active {
                let sig = &tab[(p * pts + m) * s..(p * pts + m + 1) * s];
                let c = &fc[m * s..(m + 1) * s];
                match side {
                    Side::Column => mat::mul_into(sig, c, &mut prod, q),
                    Side::Row => mat::mul_into(c, sig, &mut prod, q),
                }
                let e = phase.at(&ip[..g.d], m);
                o.iter_mut().zip(&prod).for_each(|(u, v)| *u += v * e);
            }
        });
        OpFn::from_samples(g, out)
    }

    fn table_adjoint(&self, tab: &[C64], gfun: &OpFn, side: Side) -> Result<OpFn> {
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let pts = g.points();
        let d = g.d;
        let gs = gfun.samples();
        let phase = PhaseTable::new(&g);
        let w = g.cell();
        let mut acc = vec![C64::new(0.0, 0.0); g.len()];
        acc.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
            let mut ip = [0usize; MAX_DIM];
            let mut prod = vec![C64::new(0.0, 0.0); s];
            for p in 0..pts {
                let sig = &tab[(p * pts + m) * s..(p * pts + m + 1) * s];
                let x = &gs[p * s..(p + 1) * s];
                prod.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                match side {
                    Side::Column => mat::adj_mul_acc(sig, x, &mut prod, q),
                    Side::Row => mat::mul_acc(x, &mat::adjoint(sig, q), &mut prod, q),
                }
                g.unravel(p, &mut ip[..d]);
                let e = phase.at(&ip[..d], m).conj() * w;
                o.iter_mut().zip(&prod).for_each(|(u, v)| *u += v * e);
            }
        });
        OpFn::from_coeffs(g, acc)
    }
}

/// `B(m)·f̂(m)`-style product used by the row path: `f̂(m) B(m)` (scalar `B` commutes).
fn right_product(fc: &[C64], t: &Prepared, q: usize) -> Vec<C64> {
    let s = q * q;
    let mut h = vec![C64::new(0.0, 0.0); fc.len()];
    h.par_chunks_mut(s).enumerate().for_each(|(m, o)| {
        let c = &fc[m * s..(m + 1) * s];
        if t.xi_scalar {
            let b = t.xi[m];
            o.iter_mut().zip(c).for_each(|(x, y)| *x = b * y);
        } else {
            mat::mul_into(c, &t.xi[m * s..(m + 1) * s], o, q);
        }
    });
    h
}

fn left_multiply_acc(a: &SFactor, h: &[C64], out: &mut [C64], q: usize) {
    let s = q * q;
    match a {
        SFactor::Scalar(v) => out.par_chunks_mut(s).zip(h.par_chunks(s)).zip(v.par_iter()).for_each(
            |((o, x), av)| o.iter_mut().zip(x).for_each(|(u, w)| *u += av * w),
        ),
        SFactor::Matrix(v) => out
            .par_chunks_mut(s)
            .zip(h.par_chunks(s).zip(v.par_chunks(s)))
            .for_each(|(o, (x, am))| mat::mul_acc(am, x, o, q)),
    }
}

/// `e^{2πi s_p·m}` from per-axis roots of unity.
struct PhaseTable {
    roots: Vec<C64>,
    freqs: Vec<i64>,
    n: usize,
    d: usize,
}

impl PhaseTable {
    fn new(g: &GridSpec) -> PhaseTable {
        let n = g.n;
        let roots = (0..n).map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
        PhaseTable { roots, freqs: g.freq_table(), n, d: g.d }
    }

    fn at(&self, ip: &[usize], m: usize) -> C64 {
        let mut e = C64::new(1.0, 0.0);
        for k in 0..self.d {
            let f = self.freqs[m * self.d + k].rem_euclid(self.n as i64) as usize;
            e *= self.roots[(ip[k] * f) % self.n];
        }
        e
    }
}

/// Power iteration on `T*T`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerResult {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Largest singular value of `apply` (with adjoint `adjoint`) on functions of
/// `grid` without Nyquist content, starting from a random band-limited vector. Stops when the estimate
/// changes by less than `tol/10` relative between iterations.
pub fn power_iteration(
    grid: &GridSpec,
    apply: impl Fn(&OpFn) -> Result<OpFn>,
    adjoint: impl Fn(&OpFn) -> Result<OpFn>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<PowerResult> {
    let mut r = rng::seeded(seed);
    let radius = (grid.n / 2 - 1) as f64;
    let mut x = rng::random_band_limited(grid, radius * 2.0, 0.0, &mut r);
    // drop Nyquist content so every iterate satisfies the band-limit precondition
    let mask = nyquist_mask(grid);
    x = x.multiply_coeffs(&mask);
    let mut nx = l2(&x);
    if nx == 0.0 {
        return Err(Error::Data("degenerate start vector".into()));
    }
    x = x.scale(C64::new(1.0 / nx, 0.0));
    let mut prev = 0.0;
    for it in 1..=max_iter {
        let y = apply(&x)?;
        let val = l2(&y);
        if val == 0.0 {
            return Ok(PowerResult { value: 0.0, iterations: it, converged: true, seed });
        }
        if it > 2 && (val - prev).abs() <= 0.1 * tol * val {
            return Ok(PowerResult { value: val, iterations: it, converged: true, seed });
        }
        prev = val;
        let z = adjoint(&y)?.multiply_coeffs(&mask);
        nx = l2(&z);
        if nx == 0.0 {
            return Ok(PowerResult { value: val, iterations: it, converged: true, seed });
        }
        x = z.scale(C64::new(1.0 / nx, 0.0));
    }
    Ok(PowerResult { value: prev, iterations: max_iter, converged: false, seed })
}

/// 1 away from the Nyquist planes, 0 on them.
pub fn nyquist_mask(grid: &GridSpec) -> Vec<f64> {
    let d = grid.d;
    let half = -((grid.n / 2) as i64);
    grid.freq_table()
        .chunks(d)
        .map(|m| if m.iter().any(|&k| k == half) { 0.0 } else { 1.0 })
        .collect()
}

fn l2(f: &OpFn) -> f64 {
    let g = f.grid();
    if f.has_samples() {
        (f.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell()).sqrt()
    } else {
        f.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_band_limited, seeded};
    use crate::symbol::{Claim, Term, XiFactor};
    use std::f64::consts::PI;

    fn max_diff(a: &OpFn, b: &OpFn) -> f64 {
        a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn inner(a: &OpFn, b: &OpFn) -> C64 {
        // ∫ Tr(b* a)
        let s = a.grid().slots();
        let q = a.grid().q;
        let mut acc = C64::new(0.0, 0.0);
        for (x, y) in a.samples().chunks(s).zip(b.samples().chunks(s)) {
            let mut m = vec![C64::new(0.0, 0.0); s];
            mat::adj_mul_acc(y, x, &mut m, q);
            acc += mat::trace(&m, q);
        }
        acc * a.grid().cell()
    }

    fn matrix_symbol(g: GridSpec) -> Symbol {
        let claim = Claim::new(0.0, 1.0, 0.0).unwrap();
        let s1 = SFactor::matrix_fn(&g, |x, o| {
            o[0] = C64::new(1.0 + 0.5 * (2.0 * PI * x[0]).cos(), 0.0);
            o[1] = C64::new(0.0, 0.3 * (2.0 * PI * x[1]).sin());
            o[2] = C64::new(0.2, 0.1);
            o[3] = C64::new(0.7, 0.0);
        });
        let b1 = XiFactor::matrix(|x, o| {
            let r2 = 1.0 + x[0] * x[0] + x[1] * x[1];
            o[0] = C64::new(r2.powf(-0.5), 0.0);
            o[1] = C64::new(x[0] / r2, 0.2);
            o[2] = C64::new(0.0, x[1] / r2);
            o[3] = C64::new(1.0, 0.0);
        });
        let s2 = SFactor::scalar_fn(&g, |x| C64::new(0.5, (2.0 * PI * (x[0] + x[1])).sin()));
        let b2 = XiFactor::matrix(|x, o| {
            o[0] = C64::new(0.0, 1.0);
            o[1] = C64::new(x[1] / (1.0 + x[1].abs()), 0.0);
            o[2] = C64::new(0.3, 0.0);
            o[3] = C64::new(-1.0, 0.0);
        });
        let s3 = SFactor::matrix_fn(&g, |x, o| {
            o[0] = C64::new(0.0, 1.0);
            o[1] = C64::new(1.0, x[0]);
            o[2] = C64::new(0.0, 0.0);
            o[3] = C64::new(0.4, 0.0);
        });
        let b3 = XiFactor::scalar(|x| C64::new((1.0 + x[0] * x[0]).powf(-0.25), 0.0));
        Symbol::separable(
            g,
            claim,
            vec![Term { s: s1, xi: b1 }, Term { s: s2, xi: b2 }, Term { s: s3, xi: b3 }],
        )
        .unwrap()
    }

    #[test]
    fn identity_pointwise_multiplier() {
        let g = GridSpec::new(2, 16, 2).unwrap();
        let mut r = seeded(7);
        let f = random_band_limited(&g, 7.0, 0.0, &mut r);
        for side in [Side::Column, Side::Row] {
            let out = apply_pdo(&Symbol::identity(g), &f, side).unwrap();
            assert!(max_diff(&out, &f) < 1e-12);
        }
        let b = |x: &[f64], o: &mut [C64]| {
            o[0] = C64::new(1.0, x[0]);
            o[1] = C64::new(2.0, 0.0);
            o[2] = C64::new(0.0, x[1]);
            o[3] = C64::new(-1.0, 0.5);
        };
        let sym = Symbol::pointwise(g, b).unwrap();
        let out = apply_pdo(&sym, &f, Side::Column).unwrap();
        let bf = OpFn::from_fn(g, b);
        let want: Vec<C64> = bf
            .samples()
            .chunks(4)
            .zip(f.samples().chunks(4))
            .flat_map(|(x, y)| mat::mul(x, y, 2))
            .collect();
        let want = OpFn::from_samples(g, want).unwrap();
        assert!(max_diff(&out, &want) < 1e-12);
    }

    #[test]
    fn multiplier_matches_coefficient_path() {
        let g = GridSpec::new(2, 16, 2).unwrap();
        let claim = Claim::new(-1.0, 1.0, 0.0).unwrap();
        let sym = Symbol::multiplier(g, claim, |x| C64::new((1.0 + x[0] * x[0] + x[1] * x[1]).powf(-0.5), 0.0)).unwrap();
        let mut r = seeded(8);
        let f = random_band_limited(&g, 7.0, 0.0, &mut r);
        let w: Vec<f64> = g.freq_radius().iter().map(|x| (1.0 + x * x).powf(-0.5)).collect();
        let want = f.multiply_coeffs(&w);
        for side in [Side::Column, Side::Row] {
            assert!(max_diff(&apply_pdo(&sym, &f, side).unwrap(), &want) < 1e-12);
        }
    }

    #[test]
    fn separable_and_table_paths_agree() {
        let g = GridSpec::new(2, 8, 2).unwrap();
        let sym = matrix_symbol(g);
        let tab = Symbol::from_table(g, sym.claim(), sym.to_table(1 << 30).unwrap().to_vec()).unwrap();
        let mut r = seeded(9);
        let f = random_band_limited(&g, 3.0, 0.0, &mut r);
        for side in [Side::Column, Side::Row] {
            let a = apply_pdo(&sym, &f, side).unwrap();
            let b = apply_pdo(&tab, &f, side).unwrap();
            assert!(max_diff(&a, &b) < 1e-12, "{side:?}");
            let a = apply_pdo_adjoint(&sym, &f, side).unwrap();
            let b = apply_pdo_adjoint(&tab, &f, side).unwrap();
            assert!(max_diff(&a, &b) < 1e-12, "{side:?} adjoint");
        }
    }

    #[test]
    fn adjoints_satisfy_pairing() {
        let g = GridSpec::new(2, 8, 2).unwrap();
        let sym = matrix_symbol(g);
        let mut r = seeded(10);
        let f = random_band_limited(&g, 3.0, 0.0, &mut r);
        let h = random_band_limited(&g, 3.0, 0.0, &mut r);
        for side in [Side::Column, Side::Row] {
            let op = Operator::new(&sym, side, 1 << 30).unwrap();
            let lhs = inner(&op.apply(&f).unwrap(), &h);
            let rhs = inner(&f, &op.apply_adjoint(&h).unwrap());
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0), "{side:?}");
        }
    }

    #[test]
    fn scalar_symbol_sides_coincide() {
        let g = GridSpec::new(2, 16, 1).unwrap();
        let claim = Claim::new(0.0, 1.0, 0.0).unwrap();
        let s = SFactor::scalar_fn(&g, |x| C64::new(1.0 + (2.0 * PI * x[0]).sin(), 0.5));
        let xi = XiFactor::scalar(|x| C64::new(1.0 / (1.0 + x[0].abs() + x[1].abs()), 0.0));
        let sym = Symbol::separable(g, claim, vec![Term { s, xi }]).unwrap();
        let mut r = seeded(11);
        let f = random_band_limited(&g, 6.0, 0.0, &mut r);
        let a = apply_pdo(&sym, &f, Side::Column).unwrap();
        let b = apply_pdo(&sym, &f, Side::Row).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn band_limit_violation_rejected() {
        let g = GridSpec::new(1, 16, 1).unwrap();
        let f = OpFn::from_fn(g, |x, o| o[0] = C64::from_polar(1.0, 2.0 * PI * 8.0 * x[0]));
        assert!(matches!(apply_pdo(&Symbol::identity(g), &f, Side::Column), Err(Error::Validation(_))));
    }

    #[test]
    fn power_iteration_matches_assembled_svd() {
        let g = GridSpec::new(1, 16, 2).unwrap();
        let claim = Claim::new(0.0, 1.0, 0.0).unwrap();
        let s = SFactor::matrix_fn(&g, |x, o| {
            o[0] = C64::new(1.0 + 0.5 * (2.0 * PI * x[0]).cos(), 0.0);
            o[1] = C64::new(0.3, 0.0);
            o[2] = C64::new(0.0, 0.2);
            o[3] = C64::new(0.8, 0.0);
        });
        let xi = XiFactor::scalar(|x| C64::new(1.0 / (1.0 + 0.1 * x[0] * x[0]), 0.0));
        let sym = Symbol::separable(g, claim, vec![Term { s, xi }]).unwrap();
        let op = Operator::new(&sym, Side::Column, 1 << 30).unwrap();
        // assemble on the coefficient basis away from the Nyquist plane
        let mask = nyquist_mask(&g);
        let basis: Vec<usize> = (0..g.len()).filter(|i| mask[i / 4] == 1.0).collect();
        let dim = basis.len();
        let mut m = nalgebra::DMatrix::<C64>::zeros(g.len(), dim);
        for (col, &i) in basis.iter().enumerate() {
            let mut c = vec![C64::new(0.0, 0.0); g.len()];
            c[i] = C64::new(1.0, 0.0);
            let out = op.apply(&OpFn::from_coeffs(g, c).unwrap()).unwrap();
            for (row, v) in out.coeffs().iter().enumerate() {
                m[(row, col)] = *v;
            }
        }
        let top = m.singular_values().iter().cloned().fold(0.0, f64::max);
        let est = power_iteration(&g, |f| op.apply(f), |f| op.apply_adjoint(f), 1e-3, 2000, 1).unwrap();
        assert!((est.value - top).abs() / top < 1e-2, "{} vs {top}", est.value);
    }
}
