//! Matrix-valued symbols `σ(s, ξ)` on the grid × frequency lattice.
//!
//! A symbol is stored either as a finite sum of products `Σ_r A_r(s) B_r(ξ)`
//! (sampled s-factors, ξ-factors evaluated at any real frequency) or as a
//! dense table over `(s, m)`. The separable form keeps operator application at
//! FFT cost and lets ξ-differences be taken at off-lattice points; the table
//! form is the general fallback.

pub mod calculus;
pub mod class;
pub mod kernel;
pub mod toroidal;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, MAX_DIM};
use crate::lp::LpFamily;
use crate::mat;

/// Claimed Hörmander class `S^{order}_{rho,delta}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub order: f64,
    pub rho: f64,
    pub delta: f64,
}

impl Claim {
    pub fn new(order: f64, rho: f64, delta: f64) -> Result<Claim> {
        let c = Claim { order, rho, delta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) || !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Validation(format!(
                "class parameters rho={} delta={} must lie in [0,1]",
                self.rho, self.delta
            )));
        }
        if !self.order.is_finite() {
            return Err(Error::Validation("symbol order must be finite".into()));
        }
        Ok(())
    }

    /// Exponent `n + δ|γ| − ρ|β|` of the weight `(1+|ξ|)`.
    pub fn weight_exponent(&self, gamma: usize, beta: usize) -> f64 {
        self.order + self.delta * gamma as f64 - self.rho * beta as f64
    }
}

pub type ScalarXi = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;
pub type MatrixXi = Arc<dyn Fn(&[f64], &mut [C64]) + Send + Sync>;

/// Frequency factor `B(ξ)`, either scalar (times identity) or a full matrix.
#[derive(Clone)]
pub enum XiFactor {
    Scalar(ScalarXi),
    Matrix(MatrixXi),
}

/// Finite-difference convention in ξ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffKind {
    /// Unit-step central differences (Euclidean-sampled symbols).
    Central,
    /// Forward differences `Δ_m` (toroidal symbols).
    Forward,
}

fn convolve(a: &[(i64, f64)], b: &[(i64, f64)]) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    for &(oa, wa) in a {
        for &(ob, wb) in b {
            let o = oa + ob;
            match out.iter_mut().find(|(k, _)| *k == o) {
                Some(slot) => slot.1 += wa * wb,
                None => out.push((o, wa * wb)),
            }
        }
    }
    out.retain(|(_, w)| *w != 0.0);
    out.sort_by_key(|(o, _)| *o);
    out
}

/// One-dimensional stencil of the given order.
pub fn stencil_1d(order: usize, kind: DiffKind) -> Vec<(i64, f64)> {
    let mut s = vec![(0i64, 1.0)];
    match kind {
        DiffKind::Forward => {
            for _ in 0..order {
                s = convolve(&s, &[(0, -1.0), (1, 1.0)]);
            }
        }
        DiffKind::Central => {
            for _ in 0..order / 2 {
                s = convolve(&s, &[(-1, 1.0), (0, -2.0), (1, 1.0)]);
            }
            if order % 2 == 1 {
                s = convolve(&s, &[(-1, -0.5), (1, 0.5)]);
            }
        }
    }
    s
}

/// Tensor-product stencil for a multi-index: list of (offset, weight).
pub fn stencil(beta: &[usize], kind: DiffKind) -> Vec<([i64; MAX_DIM], f64)> {
    let mut out = vec![([0i64; MAX_DIM], 1.0)];
    for (axis, &b) in beta.iter().enumerate() {
        let one = stencil_1d(b, kind);
        let mut next = Vec::with_capacity(out.len() * one.len());
        for (off, w) in &out {
            for &(o, v) in &one {
                let mut k = *off;
                k[axis] += o;
                next.push((k, w * v));
            }
        }
        out = next;
    }
    out
}

impl XiFactor {
    pub fn scalar(f: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> XiFactor {
        XiFactor::Scalar(Arc::new(f))
    }

    pub fn matrix(f: impl Fn(&[f64], &mut [C64]) + Send + Sync + 'static) -> XiFactor {
        XiFactor::Matrix(Arc::new(f))
    }

    pub fn one() -> XiFactor {
        XiFactor::scalar(|_| C64::new(1.0, 0.0))
    }

    /// Constant matrix.
    pub fn constant(c: Vec<C64>) -> XiFactor {
        XiFactor::matrix(move |_, out| out.copy_from_slice(&c))
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, XiFactor::Scalar(_))
    }

    pub fn eval_into(&self, xi: &[f64], q: usize, out: &mut [C64]) {
        match self {
            XiFactor::Scalar(f) => {
                let v = f(xi);
                out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for i in 0..q {
                    out[i * q + i] = v;
                }
            }
            XiFactor::Matrix(f) => f(xi, out),
        }
    }

    /// Difference operator `D^β` applied in ξ.
    pub fn difference(&self, beta: &[usize], kind: DiffKind) -> XiFactor {
        if beta.iter().all(|&b| b == 0) {
            return self.clone();
        }
        let st = stencil(beta, kind);
        let d = beta.len();
        match self {
            XiFactor::Scalar(f) => {
                let f = f.clone();
                XiFactor::scalar(move |xi| {
                    let mut x = [0.0; MAX_DIM];
                    let mut acc = C64::new(0.0, 0.0);
                    for (off, w) in &st {
                        for k in 0..d {
                            x[k] = xi[k] + off[k] as f64;
                        }
                        acc += f(&x[..d]) * *w;
                    }
                    acc
                })
            }
            XiFactor::Matrix(f) => {
                let f = f.clone();
                XiFactor::matrix(move |xi, out| {
                    let mut x = [0.0; MAX_DIM];
                    let mut tmp = vec![C64::new(0.0, 0.0); out.len()];
                    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    for (off, w) in &st {
                        for k in 0..d {
                            x[k] = xi[k] + off[k] as f64;
                        }
                        f(&x[..d], &mut tmp);
                        for (o, t) in out.iter_mut().zip(&tmp) {
                            *o += t * *w;
                        }
                    }
                })
            }
        }
    }

    /// Multiply by a real scalar function of ξ.
    pub fn times(&self, g: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>) -> XiFactor {
        match self {
            XiFactor::Scalar(f) => {
                let f = f.clone();
                XiFactor::scalar(move |xi| {
                    let w = g(xi);
                    if w == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        f(xi) * w
                    }
                })
            }
            XiFactor::Matrix(f) => {
                let f = f.clone();
                XiFactor::matrix(move |xi, out| {
                    let w = g(xi);
                    if w == 0.0 {
                        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    } else {
                        f(xi, out);
                        out.iter_mut().for_each(|z| *z *= w);
                    }
                })
            }
        }
    }

    pub fn scale(&self, c: C64) -> XiFactor {
        match self {
            XiFactor::Scalar(f) => {
                let f = f.clone();
                XiFactor::scalar(move |xi| f(xi) * c)
            }
            XiFactor::Matrix(f) => {
                let f = f.clone();
                XiFactor::matrix(move |xi, out| {
                    f(xi, out);
                    out.iter_mut().for_each(|z| *z *= c);
                })
            }
        }
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self, q: usize) -> XiFactor {
        match self {
            XiFactor::Scalar(f) => {
                let f = f.clone();
                XiFactor::scalar(move |xi| f(xi).conj())
            }
            XiFactor::Matrix(f) => {
                let f = f.clone();
                XiFactor::matrix(move |xi, out| {
                    let mut tmp = vec![C64::new(0.0, 0.0); q * q];
                    f(xi, &mut tmp);
                    out.copy_from_slice(&mat::adjoint(&tmp, q));
                })
            }
        }
    }

    /// Pointwise product `self(ξ)·other(ξ)`.
    pub fn product(&self, other: &XiFactor, q: usize) -> XiFactor {
        match (self, other) {
            (XiFactor::Scalar(a), XiFactor::Scalar(b)) => {
                let (a, b) = (a.clone(), b.clone());
                XiFactor::scalar(move |xi| {
                    let u = a(xi);
                    if u == C64::new(0.0, 0.0) {
                        u
                    } else {
                        u * b(xi)
                    }
                })
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                XiFactor::matrix(move |xi, out| {
                    let mut x = vec![C64::new(0.0, 0.0); q * q];
                    let mut y = vec![C64::new(0.0, 0.0); q * q];
                    a.eval_into(xi, q, &mut x);
                    b.eval_into(xi, q, &mut y);
                    mat::mul_into(&x, &y, out, q);
                })
            }
        }
    }

    /// Values on the frequency lattice, one `q×q` block per lattice point
    /// (a single entry per point for scalar factors).
    pub fn lattice(&self, grid: &GridSpec) -> Vec<C64> {
        let q = grid.q;
        let d = grid.d;
        let freqs = grid.freq_table();
        match self {
            XiFactor::Scalar(f) => freqs
                .par_chunks(d)
                .map(|m| {
                    let mut x = [0.0; MAX_DIM];
                    for k in 0..d {
                        x[k] = m[k] as f64;
                    }
                    f(&x[..d])
                })
                .collect(),
            XiFactor::Matrix(f) => {
                let mut out = vec![C64::new(0.0, 0.0); grid.points() * q * q];
                out.par_chunks_mut(q * q).zip(freqs.par_chunks(d)).for_each(|(o, m)| {
                    let mut x = [0.0; MAX_DIM];
                    for k in 0..d {
                        x[k] = m[k] as f64;
                    }
                    f(&x[..d], o);
                });
                out
            }
        }
    }
}

/// Spatial factor `A(s)` sampled on the grid.
#[derive(Clone, Debug)]
pub enum SFactor {
    Scalar(Arc<Vec<C64>>),
    Matrix(Arc<Vec<C64>>),
}

impl SFactor {
    pub fn one(grid: &GridSpec) -> SFactor {
        SFactor::Scalar(Arc::new(vec![C64::new(1.0, 0.0); grid.points()]))
    }

    pub fn scalar_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> C64 + Sync) -> SFactor {
        let d = grid.d;
        let v = (0..grid.points())
            .into_par_iter()
            .map(|p| {
                let mut x = [0.0; MAX_DIM];
                grid.coord(p, &mut x[..d]);
                f(&x[..d])
            })
            .collect();
        SFactor::Scalar(Arc::new(v))
    }

    pub fn matrix_fn(grid: &GridSpec, f: impl Fn(&[f64], &mut [C64]) + Sync) -> SFactor {
        let s = grid.slots();
        let d = grid.d;
        let mut v = vec![C64::new(0.0, 0.0); grid.points() * s];
        v.par_chunks_mut(s).enumerate().for_each(|(p, o)| {
            let mut x = [0.0; MAX_DIM];
            grid.coord(p, &mut x[..d]);
            f(&x[..d], o);
        });
        SFactor::Matrix(Arc::new(v))
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, SFactor::Scalar(_))
    }

    pub fn value_into(&self, p: usize, q: usize, out: &mut [C64]) {
        match self {
            SFactor::Scalar(v) => {
                out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for i in 0..q {
                    out[i * q + i] = v[p];
                }
            }
            SFactor::Matrix(v) => out.copy_from_slice(&v[p * q * q..(p + 1) * q * q]),
        }
    }

    /// Spectral derivative `D_s^γ` (multiplying coefficients by `(2πi m)^γ`).
    pub fn derivative(&self, grid: &GridSpec, gamma: &[usize]) -> SFactor {
        if gamma.iter().all(|&g| g == 0) {
            return self.clone();
        }
        let (g, data) = match self {
            SFactor::Scalar(v) => (grid.with_q(1), v.as_slice()),
            SFactor::Matrix(v) => (*grid, v.as_slice()),
        };
        let weights = derivative_weights(&g, gamma);
        let s = g.slots();
        let mut c = grid::forward(&g, data);
        c.par_chunks_mut(s).zip(weights.par_iter()).for_each(|(o, w)| {
            for z in o.iter_mut() {
                *z *= w;
            }
        });
        let back = grid::inverse(&g, &c);
        match self {
            SFactor::Scalar(_) => SFactor::Scalar(Arc::new(back)),
            SFactor::Matrix(_) => SFactor::Matrix(Arc::new(back)),
        }
    }

    pub fn adjoint(&self, q: usize) -> SFactor {
        match self {
            SFactor::Scalar(v) => SFactor::Scalar(Arc::new(v.iter().map(|z| z.conj()).collect())),
            SFactor::Matrix(v) => {
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                out.par_chunks_mut(q * q)
                    .zip(v.par_chunks(q * q))
                    .for_each(|(o, a)| o.copy_from_slice(&mat::adjoint(a, q)));
                SFactor::Matrix(Arc::new(out))
            }
        }
    }

    /// Pointwise product `self(s)·other(s)`.
    pub fn product(&self, other: &SFactor, q: usize) -> SFactor {
        match (self, other) {
            (SFactor::Scalar(a), SFactor::Scalar(b)) => {
                SFactor::Scalar(Arc::new(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect()))
            }
            (SFactor::Scalar(a), SFactor::Matrix(b)) | (SFactor::Matrix(b), SFactor::Scalar(a)) => {
                let mut out = b.as_ref().clone();
                out.par_chunks_mut(q * q).zip(a.par_iter()).for_each(|(o, x)| {
                    o.iter_mut().for_each(|z| *z *= x);
                });
                SFactor::Matrix(Arc::new(out))
            }
            (SFactor::Matrix(a), SFactor::Matrix(b)) => {
                let mut out = vec![C64::new(0.0, 0.0); a.len()];
                out.par_chunks_mut(q * q)
                    .zip(a.par_chunks(q * q).zip(b.par_chunks(q * q)))
                    .for_each(|(o, (x, y))| mat::mul_into(x, y, o, q));
                SFactor::Matrix(Arc::new(out))
            }
        }
    }

    /// Scalar factor holding entry `(a, b)` of a matrix factor.
    pub fn entry(&self, a: usize, b: usize, q: usize) -> SFactor {
        match self {
            SFactor::Scalar(v) => {
                if a == b {
                    self.clone()
                } else {
                    SFactor::Scalar(Arc::new(vec![C64::new(0.0, 0.0); v.len()]))
                }
            }
            SFactor::Matrix(v) => SFactor::Scalar(Arc::new(
                v.chunks(q * q).map(|m| m[a * q + b]).collect(),
            )),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SFactor::Scalar(v) | SFactor::Matrix(v) => v.iter().all(|z| *z == C64::new(0.0, 0.0)),
        }
    }
}

/// `Π_k (2πi m_k)^{γ_k}` on the lattice.
pub fn derivative_weights(grid: &GridSpec, gamma: &[usize]) -> Vec<C64> {
    let d = grid.d;
    grid.freq_table()
        .chunks(d)
        .map(|m| {
            let mut w = C64::new(1.0, 0.0);
            for k in 0..d {
                w *= C64::new(0.0, 2.0 * PI * m[k] as f64).powu(gamma[k] as u32);
            }
            w
        })
        .collect()
}

/// One separable product `A(s)·B(ξ)`.
#[derive(Clone)]
pub struct Term {
    pub s: SFactor,
    pub xi: XiFactor,
}

/// Rewrite `B(ξ)·C(s)` as a sum of terms in `A(s)·B(ξ)` order.
fn reorder(b: &XiFactor, c: &SFactor, q: usize) -> Vec<Term> {
    if b.is_scalar() || c.is_scalar() {
        return vec![Term { s: c.clone(), xi: b.clone() }];
    }
    let mut out = Vec::with_capacity(q * q);
    for a in 0..q {
        for bb in 0..q {
            let entry = c.entry(a, bb, q);
            if entry.is_zero() {
                continue;
            }
            let mut unit = vec![C64::new(0.0, 0.0); q * q];
            unit[a * q + bb] = C64::new(1.0, 0.0);
            out.push(Term { s: entry, xi: b.product(&XiFactor::constant(unit), q) });
        }
    }
    out
}

#[derive(Clone)]
pub enum Repr {
    Separable(Vec<Term>),
    /// Dense values laid out `[s][m][row][col]`.
    Table(Arc<Vec<C64>>),
}

#[derive(Clone)]
pub struct Symbol {
    grid: GridSpec,
    claim: Claim,
    repr: Repr,
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.repr {
            Repr::Separable(t) => format!("separable({} terms)", t.len()),
            Repr::Table(_) => "table".to_string(),
        };
        f.debug_struct("Symbol").field("grid", &self.grid).field("claim", &self.claim).field("repr", &kind).finish()
    }
}

impl Symbol {
    pub fn separable(grid: GridSpec, claim: Claim, terms: Vec<Term>) -> Result<Symbol> {
        claim.validate()?;
        for t in &terms {
            let (SFactor::Scalar(v) | SFactor::Matrix(v)) = &t.s;
            let want = if t.s.is_scalar() { grid.points() } else { grid.len() };
            if v.len() != want {
                return Err(Error::Structural("s-factor does not match grid".into()));
            }
        }
        Ok(Symbol { grid, claim, repr: Repr::Separable(terms) })
    }

    pub fn from_table(grid: GridSpec, claim: Claim, values: Vec<C64>) -> Result<Symbol> {
        claim.validate()?;
        let want = grid.points() * grid.points() * grid.slots();
        if values.len() != want {
            return Err(Error::Structural(format!(
                "symbol table has {} entries, expected {want}",
                values.len()
            )));
        }
        Ok(Symbol { grid, claim, repr: Repr::Table(Arc::new(values)) })
    }

    /// `σ(s, ξ) = m(ξ)·I`.
    pub fn multiplier(grid: GridSpec, claim: Claim, m: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Result<Symbol> {
        Symbol::separable(grid, claim, vec![Term { s: SFactor::one(&grid), xi: XiFactor::scalar(m) }])
    }

    /// `σ(s, ξ) = b(s)` with matrix values.
    pub fn pointwise(grid: GridSpec, b: impl Fn(&[f64], &mut [C64]) + Sync) -> Result<Symbol> {
        let s = SFactor::matrix_fn(&grid, b);
        Symbol::separable(grid, Claim { order: 0.0, rho: 1.0, delta: 0.0 }, vec![Term { s, xi: XiFactor::one() }])
    }

    pub fn identity(grid: GridSpec) -> Symbol {
        Symbol::multiplier(grid, Claim { order: 0.0, rho: 1.0, delta: 0.0 }, |_| C64::new(1.0, 0.0))
            .expect("valid claim")
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn claim(&self) -> Claim {
        self.claim
    }

    pub fn with_claim(&self, claim: Claim) -> Result<Symbol> {
        claim.validate()?;
        Ok(Symbol { claim, ..self.clone() })
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn terms(&self) -> Option<&[Term]> {
        match &self.repr {
            Repr::Separable(t) => Some(t),
            Repr::Table(_) => None,
        }
    }

    pub fn table_bytes(&self) -> usize {
        self.grid.points() * self.grid.points() * self.grid.slots() * std::mem::size_of::<C64>()
    }

    /// Dense table `[s][m][slot]`, refused above `budget_bytes`.
    pub fn to_table(&self, budget_bytes: usize) -> Result<Arc<Vec<C64>>> {
        if let Repr::Table(t) = &self.repr {
            return Ok(t.clone());
        }
        let bytes = self.table_bytes();
        if bytes > budget_bytes {
            return Err(Error::Budget(format!(
                "dense symbol table needs {bytes} bytes, budget is {budget_bytes}"
            )));
        }
        let g = self.grid;
        let q = g.q;
        let s = g.slots();
        let pts = g.points();
        let terms = self.terms().expect("separable");
        let lattice: Vec<Vec<C64>> = terms.iter().map(|t| t.xi.lattice(&g)).collect();
        let mut out = vec![C64::new(0.0, 0.0); pts * pts * s];
        out.par_chunks_mut(pts * s).enumerate().for_each(|(p, row)| {
            let mut a = vec![C64::new(0.0, 0.0); s];
            let mut b = vec![C64::new(0.0, 0.0); s];
            for (t, lat) in terms.iter().zip(&lattice) {
                t.s.value_into(p, q, &mut a);
                for m in 0..pts {
                    if t.xi.is_scalar() {
                        let v = lat[m];
                        if v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for (o, x) in row[m * s..(m + 1) * s].iter_mut().zip(&a) {
                            *o += x * v;
                        }
                    } else {
                        b.copy_from_slice(&lat[m * s..(m + 1) * s]);
                        mat::mul_acc(&a, &b, &mut row[m * s..(m + 1) * s], q);
                    }
                }
            }
        });
        Ok(Arc::new(out))
    }

    /// `σ(s_p, ξ)` at an arbitrary real ξ (tables: nearest lattice point, zero outside the box).
    pub fn eval_into(&self, p: usize, xi: &[f64], out: &mut [C64]) {
        let q = self.grid.q;
        let s = self.grid.slots();
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        match &self.repr {
            Repr::Separable(terms) => {
                let mut a = vec![C64::new(0.0, 0.0); s];
                let mut b = vec![C64::new(0.0, 0.0); s];
                for t in terms {
                    t.s.value_into(p, q, &mut a);
                    t.xi.eval_into(xi, q, &mut b);
                    mat::mul_acc(&a, &b, out, q);
                }
            }
            Repr::Table(tab) => {
                let m: Vec<i64> = xi.iter().map(|x| x.round() as i64).collect();
                if let Some(idx) = self.grid.freq_index(&m) {
                    let pts = self.grid.points();
                    let base = (p * pts + idx) * s;
                    out.copy_from_slice(&tab[base..base + s]);
                }
            }
        }
    }

    /// `D_s^γ D_ξ^β σ` with ξ-differences of the given kind.
    pub fn derivative(&self, gamma: &[usize], beta: &[usize], kind: DiffKind) -> Result<Symbol> {
        let g = self.grid;
        match &self.repr {
            Repr::Separable(terms) => {
                let out = terms
                    .iter()
                    .map(|t| Term { s: t.s.derivative(&g, gamma), xi: t.xi.difference(beta, kind) })
                    .collect();
                Ok(Symbol { grid: g, claim: self.claim, repr: Repr::Separable(out) })
            }
            Repr::Table(tab) => {
                let t = table_derivative(&g, tab, gamma, beta, kind);
                Ok(Symbol { grid: g, claim: self.claim, repr: Repr::Table(Arc::new(t)) })
            }
        }
    }

    /// Pointwise adjoint `σ(s, ξ)*`.
    pub fn pointwise_adjoint(&self) -> Symbol {
        let g = self.grid;
        let q = g.q;
        match &self.repr {
            Repr::Separable(terms) => {
                let mut out = Vec::new();
                for t in terms {
                    // (A B)* = B* A*
                    out.extend(reorder(&t.xi.adjoint(q), &t.s.adjoint(q), q));
                }
                Symbol { grid: g, claim: self.claim, repr: Repr::Separable(out) }
            }
            Repr::Table(tab) => {
                let s = g.slots();
                let mut out = vec![C64::new(0.0, 0.0); tab.len()];
                out.par_chunks_mut(s)
                    .zip(tab.par_chunks(s))
                    .for_each(|(o, a)| o.copy_from_slice(&mat::adjoint(a, q)));
                Symbol { grid: g, claim: self.claim, repr: Repr::Table(Arc::new(out)) }
            }
        }
    }

    /// Pointwise product `σ1(s,ξ)·σ2(s,ξ)` (left factor `self`).
    pub fn product(&self, other: &Symbol, budget_bytes: usize) -> Result<Symbol> {
        if self.grid != other.grid {
            return Err(Error::Structural("symbols live on different grids".into()));
        }
        let g = self.grid;
        let q = g.q;
        let claim = Claim {
            order: self.claim.order + other.claim.order,
            rho: self.claim.rho.min(other.claim.rho),
            delta: self.claim.delta.max(other.claim.delta),
        };
        if let (Repr::Separable(a), Repr::Separable(b)) = (&self.repr, &other.repr) {
            let mut out = Vec::new();
            for t1 in a {
                for t2 in b {
                    for mid in reorder(&t1.xi, &t2.s, q) {
                        out.push(Term { s: t1.s.product(&mid.s, q), xi: mid.xi.product(&t2.xi, q) });
                    }
                }
            }
            return Ok(Symbol { grid: g, claim, repr: Repr::Separable(out) });
        }
        let x = self.to_table(budget_bytes)?;
        let y = other.to_table(budget_bytes)?;
        let s = g.slots();
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        out.par_chunks_mut(s)
            .zip(x.par_chunks(s).zip(y.par_chunks(s)))
            .for_each(|(o, (a, b))| mat::mul_into(a, b, o, q));
        Ok(Symbol { grid: g, claim, repr: Repr::Table(Arc::new(out)) })
    }

    pub fn scale(&self, c: C64) -> Symbol {
        let repr = match &self.repr {
            Repr::Separable(terms) => Repr::Separable(
                terms.iter().map(|t| Term { s: t.s.clone(), xi: t.xi.scale(c) }).collect(),
            ),
            Repr::Table(tab) => Repr::Table(Arc::new(tab.iter().map(|z| z * c).collect())),
        };
        Symbol { repr, ..self.clone() }
    }

    /// Sum of two symbols on the same grid.
    pub fn add(&self, other: &Symbol, budget_bytes: usize) -> Result<Symbol> {
        if self.grid != other.grid {
            return Err(Error::Structural("symbols live on different grids".into()));
        }
        let claim = Claim {
            order: self.claim.order.max(other.claim.order),
            rho: self.claim.rho.min(other.claim.rho),
            delta: self.claim.delta.max(other.claim.delta),
        };
        if let (Repr::Separable(a), Repr::Separable(b)) = (&self.repr, &other.repr) {
            let mut t = a.clone();
            t.extend(b.iter().cloned());
            return Ok(Symbol { grid: self.grid, claim, repr: Repr::Separable(t) });
        }
        let x = self.to_table(budget_bytes)?;
        let y = other.to_table(budget_bytes)?;
        let out = x.iter().zip(y.iter()).map(|(a, b)| a + b).collect();
        Ok(Symbol { grid: self.grid, claim, repr: Repr::Table(Arc::new(out)) })
    }

    /// Multiply by a real radial-or-not scalar function of ξ.
    pub fn times_xi(&self, w: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>) -> Symbol {
        let repr = match &self.repr {
            Repr::Separable(terms) => Repr::Separable(
                terms.iter().map(|t| Term { s: t.s.clone(), xi: t.xi.times(w.clone()) }).collect(),
            ),
            Repr::Table(tab) => {
                let g = self.grid;
                let s = g.slots();
                let pts = g.points();
                let d = g.d;
                let freqs = g.freq_table();
                let weights: Vec<f64> = freqs
                    .chunks(d)
                    .map(|m| {
                        let x: Vec<f64> = m.iter().map(|&v| v as f64).collect();
                        w(&x)
                    })
                    .collect();
                let mut out = tab.as_ref().clone();
                out.par_chunks_mut(pts * s).for_each(|row| {
                    for (m, wt) in weights.iter().enumerate() {
                        row[m * s..(m + 1) * s].iter_mut().for_each(|z| *z *= wt);
                    }
                });
                Repr::Table(Arc::new(out))
            }
        };
        Symbol { repr, ..self.clone() }
    }
}

/// Derivatives of a dense table: spectral in s, lattice differences in ξ with
/// zero extension outside the frequency box.
fn table_derivative(g: &GridSpec, tab: &[C64], gamma: &[usize], beta: &[usize], kind: DiffKind) -> Vec<C64> {
    let pts = g.points();
    let s = g.slots();
    let d = g.d;
    let mut out = tab.to_vec();
    if beta.iter().any(|&b| b > 0) {
        let st = stencil(beta, kind);
        let freqs = g.freq_table();
        let src = out.clone();
        out.par_chunks_mut(pts * s).enumerate().for_each(|(p, row)| {
            let mut mm = [0i64; MAX_DIM];
            for m in 0..pts {
                let slot = &mut row[m * s..(m + 1) * s];
                slot.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for (off, w) in &st {
                    for k in 0..d {
                        mm[k] = freqs[m * d + k] + off[k];
                    }
                    if let Some(idx) = g.freq_index(&mm[..d]) {
                        let base = (p * pts + idx) * s;
                        for (o, v) in slot.iter_mut().zip(&src[base..base + s]) {
                            *o += v * *w;
                        }
                    }
                }
            }
        });
    }
    if gamma.iter().any(|&c| c > 0) {
        // transform along s for every (m, slot) column
        let weights = derivative_weights(&g.with_q(1), gamma);
        let cols = pts * s;
        let columns: Vec<Vec<C64>> = (0..cols)
            .into_par_iter()
            .map(|c| {
                let col: Vec<C64> = (0..pts).map(|p| out[p * cols + c]).collect();
                let g1 = g.with_q(1);
                let mut f = grid::forward(&g1, &col);
                for (z, w) in f.iter_mut().zip(&weights) {
                    *z *= w;
                }
                grid::inverse(&g1, &f)
            })
            .collect();
        for (c, col) in columns.iter().enumerate() {
            for (p, v) in col.iter().enumerate() {
                out[p * cols + c] = *v;
            }
        }
    }
    out
}

/// Dyadic pieces `σ_k = σ·φ̂_k`, `k = 0..=J`.
pub fn dyadic_pieces(sigma: &Symbol, fam: &LpFamily) -> Result<Vec<Symbol>> {
    if fam.grid().d != sigma.grid().d || fam.grid().n != sigma.grid().n {
        return Err(Error::Structural("LP family built on a different lattice".into()));
    }
    let profile = fam.profile().clone();
    Ok((0..=fam.top())
        .map(|k| {
            let p = profile.clone();
            let w: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(move |xi: &[f64]| {
                let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                if k == 0 {
                    p.psi(r)
                } else {
                    p.phi(r / (1u64 << k) as f64)
                }
            });
            sigma.times_xi(w)
        })
        .collect())
}

/// All multi-indices of length `d` with total order ≤ `max`.
pub fn multi_indices(d: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for v in &out {
            let used: usize = v.iter().sum();
            for k in 0..=(max - used) {
                let mut w = v.clone();
                w.push(k);
                next.push(w);
            }
        }
        out = next;
    }
    out.sort_by_key(|v| (v.iter().sum::<usize>(), v.clone()));
    out
}
