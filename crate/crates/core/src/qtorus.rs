//! Quantum torus `𝕋^d_θ`: truncated Fourier polynomials with the twisted
//! product, the clock/shift representation for rational θ, transference onto
//! matrix-valued functions on the ordinary torus, and quantum TL norms.
//!
//! Ordering convention: `U^m = U_1^{m_1}···U_d^{m_d}`, with
//! `U_k U_j = e^{2πiθ_{kj}} U_j U_k`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OpFn, MAX_DIM};
use crate::mat;
use crate::norms::{triebel_lizorkin_norm, Exponent, NormContext};
use crate::pdo::{Operator, Side, DEFAULT_BUDGET_BYTES};
use crate::rng::{self, Rng};
use crate::symbol::toroidal::{check_toroidal_class, ToroidalSymbol};
use crate::symbol::{Claim, Symbol};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Tolerance for the generator checks run on every constructed representation.
pub const REP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaMatrix {
    pub d: usize,
    /// Row-major `θ_{kj}`.
    pub entries: Vec<f64>,
    /// `(numerators, denominator)` when every entry is `num/den`.
    pub rational: Option<(Vec<i64>, u64)>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ThetaMatrix {
    pub fn zero(d: usize) -> ThetaMatrix {
        ThetaMatrix { d, entries: vec![0.0; d * d], rational: Some((vec![0; d * d], 1)) }
    }

    /// `d = 2` with `θ_{21} = num/den`.
    pub fn rational2(num: i64, den: u64) -> Result<ThetaMatrix> {
        if den == 0 {
            return Err(Error::Config("θ denominator must be positive".into()));
        }
        let g = gcd(num.unsigned_abs(), den).max(1);
        let (num, den) = (num / g as i64, den / g);
        let v = num as f64 / den as f64;
        Ok(ThetaMatrix { d: 2, entries: vec![0.0, -v, v, 0.0], rational: Some((vec![0, -num, num, 0], den)) })
    }

    /// Real skew-symmetric matrix without a rationality tag.
    pub fn real(d: usize, entries: Vec<f64>) -> Result<ThetaMatrix> {
        if entries.len() != d * d || d == 0 || d > MAX_DIM {
            return Err(Error::Config(format!("θ must be a {d}×{d} matrix")));
        }
        for k in 0..d {
            for j in 0..d {
                if entries[k * d + j] != -entries[j * d + k] {
                    return Err(Error::Validation("θ must be exactly skew-symmetric".into()));
                }
            }
        }
        Ok(ThetaMatrix { d, entries, rational: None })
    }

    /// Parse `p/q` (d = 2) or a decimal (d = 2, untagged unless it is 0).
    pub fn parse(s: &str) -> Result<ThetaMatrix> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: i64 = a.trim().parse().map_err(|_| Error::Config(format!("bad θ numerator in {s}")))?;
            let den: u64 = b.trim().parse().map_err(|_| Error::Config(format!("bad θ denominator in {s}")))?;
            return ThetaMatrix::rational2(num, den);
        }
        let v: f64 = s.parse().map_err(|_| Error::Config(format!("bad θ value {s}")))?;
        if v == 0.0 {
            return Ok(ThetaMatrix::zero(2));
        }
        ThetaMatrix::real(2, vec![0.0, -v, v, 0.0])
    }

    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.entries[k * self.d + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|v| *v == 0.0)
    }

    /// Normal-ordering phase: `U^{a} U^{b} = c(a,b) U^{a+b}`.
    pub fn cocycle(&self, a: &[i64], b: &[i64]) -> C64 {
        let mut phase = 0.0;
        for k in 0..self.d {
            for j in 0..k {
                phase += b[j] as f64 * a[k] as f64 * self.at(k, j);
            }
        }
        C64::from_polar(1.0, 2.0 * PI * phase)
    }
}

/// Element of `𝕋^d_θ` with coefficients on the centered box `[−n/2, n/2)^d`.
#[derive(Clone, Debug)]
pub struct QtElement {
    theta: Arc<ThetaMatrix>,
    n: usize,
    coeffs: Vec<C64>,
}

impl QtElement {
    pub fn new(theta: Arc<ThetaMatrix>, n: usize, coeffs: Vec<C64>) -> Result<QtElement> {
        let g = GridSpec::new(theta.d, n, 1)?;
        if coeffs.len() != g.points() {
            return Err(Error::Structural(format!("expected {} coefficients, got {}", g.points(), coeffs.len())));
        }
        Ok(QtElement { theta, n, coeffs })
    }

    pub fn zeros(theta: Arc<ThetaMatrix>, n: usize) -> Result<QtElement> {
        let p = GridSpec::new(theta.d, n, 1)?.points();
        QtElement::new(theta, n, vec![ZERO; p])
    }

    /// `c·U^m`.
    pub fn monomial(theta: Arc<ThetaMatrix>, n: usize, m: &[i64], c: C64) -> Result<QtElement> {
        let mut x = QtElement::zeros(theta, n)?;
        let i = x.index(m).ok_or_else(|| Error::Config(format!("frequency {m:?} outside the box")))?;
        x.coeffs[i] = c;
        Ok(x)
    }

    /// Random polynomial with complex normal coefficients on `|m|_∞ ≤ radius`.
    pub fn random(theta: Arc<ThetaMatrix>, n: usize, radius: i64, rng: &mut Rng) -> Result<QtElement> {
        let mut x = QtElement::zeros(theta, n)?;
        let g = x.grid();
        let mut m = [0i64; MAX_DIM];
        for i in 0..g.points() {
            g.freq(i, &mut m[..g.d]);
            if m[..g.d].iter().all(|v| v.abs() <= radius) {
                x.coeffs[i] = rng::complex_normal(rng);
            }
        }
        Ok(x)
    }

    pub fn theta(&self) -> &Arc<ThetaMatrix> {
        &self.theta
    }

    pub fn d(&self) -> usize {
        self.theta.d
    }

    pub fn box_size(&self) -> usize {
        self.n
    }

    /// Index grid of the coefficient box (`q = 1`).
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.theta.d, self.n, 1).expect("validated at construction")
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn index(&self, m: &[i64]) -> Option<usize> {
        self.grid().freq_index(m)
    }

    pub fn coeff(&self, m: &[i64]) -> C64 {
        self.index(m).map(|i| self.coeffs[i]).unwrap_or(ZERO)
    }

    /// `τ(x) = x̂(0)`.
    pub fn trace(&self) -> C64 {
        self.coeff(&vec![0; self.d()])
    }

    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Same element on another box; returns the ℓ₂ mass dropped.
    pub fn resized(&self, n: usize) -> Result<(QtElement, f64)> {
        let mut out = QtElement::zeros(self.theta.clone(), n)?;
        let g = self.grid();
        let mut m = [0i64; MAX_DIM];
        let mut lost = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            g.freq(i, &mut m[..g.d]);
            match out.index(&m[..g.d]) {
                Some(j) => out.coeffs[j] = *c,
                None => lost += c.norm_sqr(),
            }
        }
        Ok((out, lost.sqrt()))
    }

    pub fn lincomb(&self, a: C64, other: &QtElement, b: C64) -> Result<QtElement> {
        self.same_algebra(other)?;
        if self.n != other.n {
            return Err(Error::Structural("elements live on different boxes".into()));
        }
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        QtElement::new(self.theta.clone(), self.n, c)
    }

    fn same_algebra(&self, other: &QtElement) -> Result<()> {
        if self.theta != other.theta {
            return Err(Error::Validation("elements belong to different θ".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Product {
    pub truncation_loss: f64,
}

/// Twisted convolution `(xy)^(m) = Σ_{m'+m''=m} x̂(m')ŷ(m'') c(m',m'')`,
/// truncated to `x`'s box.
pub fn qt_multiply(x: &QtElement, y: &QtElement) -> Result<(QtElement, Product)> {
    qt_multiply_into(x, y, x.n)
}

/// Twisted product on an output box of side `n_out`.
pub fn qt_multiply_into(x: &QtElement, y: &QtElement, n_out: usize) -> Result<(QtElement, Product)> {
    x.same_algebra(y)?;
    let d = x.d();
    // every sum of two box frequencies fits in a box of side n_x + n_y
    let full_n = (x.n + y.n).max(n_out);
    let full = GridSpec::new(d, full_n, 1)?;
    let (gx, gy) = (x.grid(), y.grid());
    let nz_y: Vec<(Vec<i64>, C64)> = (0..gy.points())
        .filter(|&i| y.coeffs[i] != ZERO)
        .map(|i| {
            let mut m = vec![0; d];
            gy.freq(i, &mut m);
            (m, y.coeffs[i])
        })
        .collect();
    let theta = &x.theta;
    let partial: Vec<Vec<C64>> = (0..gx.points())
        .into_par_iter()
        .filter(|&i| x.coeffs[i] != ZERO)
        .fold(
            || vec![ZERO; full.points()],
            |mut acc, i| {
                let mut a = vec![0; d];
                gx.freq(i, &mut a);
                let xa = x.coeffs[i];
                let mut s = [0i64; MAX_DIM];
                for (b, yb) in &nz_y {
                    for k in 0..d {
                        s[k] = a[k] + b[k];
                    }
                    let j = full.freq_index(&s[..d]).expect("sum fits the enlarged box");
                    acc[j] += xa * yb * theta.cocycle(&a, b);
                }
                acc
            },
        )
        .collect();
    let mut sum = vec![ZERO; full.points()];
    for p in partial {
        sum.iter_mut().zip(p).for_each(|(u, v)| *u += v);
    }
    let big = QtElement::new(theta.clone(), full_n, sum)?;
    let (out, lost) = big.resized(n_out)?;
    Ok((out, Product { truncation_loss: lost }))
}

/// Clock/shift realization of rational `𝕋^2_θ` (or the trivial one at θ = 0).
#[derive(Clone, Debug)]
pub struct QtRepresentation {
    pub q: usize,
    /// Generator matrices `U_1, …, U_d`.
    pub generators: Vec<Vec<C64>>,
}

impl QtRepresentation {
    pub fn new(theta: &ThetaMatrix) -> Result<QtRepresentation> {
        let Some((nums, den)) = &theta.rational else {
            return Err(Error::Unsupported("the representation path needs a rational θ".into()));
        };
        let d = theta.d;
        let rep = if theta.is_zero() {
            QtRepresentation { q: 1, generators: vec![vec![ONE]; d] }
        } else if d == 2 {
            let q = *den as usize;
            let num = nums[2];
            let omega = |k: usize| C64::from_polar(1.0, 2.0 * PI * (num * k as i64) as f64 / q as f64);
            let mut shift = vec![ZERO; q * q];
            let mut clock = vec![ZERO; q * q];
            for k in 0..q {
                shift[((k + 1) % q) * q + k] = ONE;
                clock[k * q + k] = omega(k);
            }
            // C S = ω S C gives U_2 U_1 = e^{2πiθ_21} U_1 U_2
            QtRepresentation { q, generators: vec![shift, clock] }
        } else {
            return Err(Error::Unsupported("non-zero rational θ is represented for d = 2 only".into()));
        };
        rep.verify(theta)?;
        Ok(rep)
    }

    fn verify(&self, theta: &ThetaMatrix) -> Result<()> {
        let q = self.q;
        let d = theta.d;
        for g in &self.generators {
            if !mat::is_unitary(g, q, REP_TOL) {
                return Err(Error::Structural("representation generator is not unitary".into()));
            }
        }
        let residual = self.commutation_residual(theta);
        if residual > REP_TOL {
            return Err(Error::Structural(format!("commutation relation off by {residual:e}")));
        }
        // the coefficient cocycle must agree with the matrices it stands for
        let range: Vec<i64> = (-2..=2).collect();
        let mut a = vec![0i64; d];
        let mut b = vec![0i64; d];
        let combos = range.len().pow(d as u32);
        for ia in 0..combos {
            for ib in 0..combos {
                let (mut x, mut y) = (ia, ib);
                for k in 0..d {
                    a[k] = range[x % range.len()];
                    b[k] = range[y % range.len()];
                    x /= range.len();
                    y /= range.len();
                }
                let lhs = mat::mul(&self.monomial(&a), &self.monomial(&b), q);
                let s: Vec<i64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
                let c = theta.cocycle(&a, &b);
                let rhs = self.monomial(&s);
                let err = lhs.iter().zip(&rhs).map(|(u, v)| (u - c * v).norm()).fold(0.0, f64::max);
                if err > REP_TOL {
                    return Err(Error::Structural(format!("cocycle disagrees with the representation at {a:?}, {b:?}")));
                }
            }
        }
        Ok(())
    }

    /// `max_{k,j} ‖U_k U_j − e^{2πiθ_{kj}} U_j U_k‖_max`.
    pub fn commutation_residual(&self, theta: &ThetaMatrix) -> f64 {
        let q = self.q;
        let mut worst = 0.0f64;
        for k in 0..theta.d {
            for j in 0..theta.d {
                let lhs = mat::mul(&self.generators[k], &self.generators[j], q);
                let rhs = mat::mul(&self.generators[j], &self.generators[k], q);
                let ph = C64::from_polar(1.0, 2.0 * PI * theta.at(k, j));
                worst = lhs.iter().zip(&rhs).map(|(a, b)| (a - ph * b).norm()).fold(worst, f64::max);
            }
        }
        worst
    }

    fn power(&self, k: usize, e: i64) -> Vec<C64> {
        let q = self.q;
        // every generator satisfies U^q = 1
        let e = e.rem_euclid(q as i64) as usize;
        let mut out = mat::identity(q);
        for _ in 0..e {
            out = mat::mul(&out, &self.generators[k], q);
        }
        out
    }

    /// `rep(U^m)`.
    pub fn monomial(&self, m: &[i64]) -> Vec<C64> {
        let q = self.q;
        let mut out = mat::identity(q);
        for (k, &e) in m.iter().enumerate() {
            out = mat::mul(&out, &self.power(k, e), q);
        }
        out
    }

    /// `rep(U^m)` for every frequency of a box, laid out `[m][row][col]`.
    pub fn monomial_table(&self, g: &GridSpec) -> Vec<C64> {
        let d = g.d;
        (0..g.points())
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut m = [0i64; MAX_DIM];
                g.freq(i, &mut m[..d]);
                self.monomial(&m[..d])
            })
            .collect()
    }

    /// `rep(x)`.
    pub fn element(&self, x: &QtElement) -> Vec<C64> {
        self.element_at(x, &vec![0.0; x.d()])
    }

    /// `rep(π_z(x)) = Σ x̂(m) z^m rep(U^m)`, `z = e^{2πi s}`.
    pub fn element_at(&self, x: &QtElement, s: &[f64]) -> Vec<C64> {
        let q = self.q;
        let g = x.grid();
        let mut out = vec![ZERO; q * q];
        let mut m = [0i64; MAX_DIM];
        for (i, c) in x.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            g.freq(i, &mut m[..g.d]);
            let ph = C64::from_polar(1.0, 2.0 * PI * (0..g.d).map(|k| m[k] as f64 * s[k]).sum::<f64>());
            let u = self.monomial(&m[..g.d]);
            for (o, v) in out.iter_mut().zip(&u) {
                *o += c * ph * v;
            }
        }
        out
    }
}

/// Sampling lattice used by the representation-side norms: twice the box.
pub fn evaluation_grid(x: &QtElement, q: usize) -> Result<GridSpec> {
    GridSpec::new(x.d(), 2 * x.n, q)
}

/// `τ(x) = x̂(0)`.
pub fn qt_trace(x: &QtElement) -> C64 {
    x.trace()
}

/// `‖x‖_{L_p(𝕋^d_θ)}`: coefficient ℓ₂ for `p = 2`, the representation path otherwise.
pub fn qt_lp_norm(x: &QtElement, p: Exponent) -> Result<f64> {
    match p {
        Exponent::Two => Ok(x.l2()),
        _ => qt_lp_norm_via_representation(x, p),
    }
}

/// `(∫ tr_q |rep(π_z x)|^p dz)^{1/p}` on the evaluation lattice, with `tr_q = Tr/q`;
/// the matrices are summed monomial by monomial, independently of the FFT path.
pub fn qt_lp_norm_via_representation(x: &QtElement, p: Exponent) -> Result<f64> {
    let rep = QtRepresentation::new(&x.theta)?;
    let q = rep.q;
    let g = evaluation_grid(x, q)?;
    let d = g.d;
    let values: Vec<f64> = (0..g.points())
        .into_par_iter()
        .map(|i| {
            let mut s = [0.0; MAX_DIM];
            g.coord(i, &mut s[..d]);
            let a = rep.element_at(x, &s[..d]);
            let sv = mat::singular_values(&a, q);
            match p {
                Exponent::One => sv.iter().sum::<f64>() / q as f64,
                Exponent::Two => sv.iter().map(|v| v * v).sum::<f64>() / q as f64,
                Exponent::Infinity => sv[0],
            }
        })
        .collect();
    Ok(match p {
        Exponent::One => values.iter().sum::<f64>() * g.cell(),
        Exponent::Two => (values.iter().sum::<f64>() * g.cell()).sqrt(),
        Exponent::Infinity => values.iter().cloned().fold(0.0, f64::max),
    })
}

/// `x̃(z) = Σ x̂(m) z^m rep(U^m)` as a matrix-valued function on the evaluation lattice.
pub fn transference_embed(x: &QtElement) -> Result<OpFn> {
    let rep = QtRepresentation::new(&x.theta)?;
    embed_with(x, &rep)
}

fn embed_with(x: &QtElement, rep: &QtRepresentation) -> Result<OpFn> {
    let g = evaluation_grid(x, rep.q)?;
    let s = g.slots();
    let bx = x.grid();
    let mut c = vec![ZERO; g.len()];
    let mut m = [0i64; MAX_DIM];
    for (i, v) in x.coeffs.iter().enumerate() {
        if *v == ZERO {
            continue;
        }
        bx.freq(i, &mut m[..bx.d]);
        let j = g.freq_index(&m[..bx.d]).expect("box sits inside the evaluation lattice");
        for (o, u) in c[j * s..(j + 1) * s].iter_mut().zip(rep.monomial(&m[..bx.d])) {
            *o = v * u;
        }
    }
    OpFn::from_coeffs(g, c)
}

/// `‖x̃‖_{L_p(N)}` converted to the normalized trace `tr_q` (divide by `q^{1/p}`).
pub fn transferred_lp_norm(xt: &OpFn, p: Exponent) -> Result<f64> {
    let q = xt.grid().q as f64;
    let v = crate::norms::lp_norm(xt, p)?;
    Ok(match p {
        Exponent::Infinity => v,
        _ => v / q.powf(1.0 / p.value()),
    })
}

/// Element of `L_∞(𝕋^d) ⊗ 𝕋^d_θ`: coefficients `f̂(k, m)` of `w^k U^m`, both on one box.
#[derive(Clone, Debug)]
pub struct SemiElement {
    theta: Arc<ThetaMatrix>,
    n: usize,
    /// `[k][m]`.
    coeffs: Vec<C64>,
}

impl SemiElement {
    pub fn new(theta: Arc<ThetaMatrix>, n: usize, coeffs: Vec<C64>) -> Result<SemiElement> {
        let p = GridSpec::new(theta.d, n, 1)?.points();
        if coeffs.len() != p * p {
            return Err(Error::Structural(format!("expected {} coefficients", p * p)));
        }
        Ok(SemiElement { theta, n, coeffs })
    }

    /// `π_z(x)`: `f̂(k, m) = x̂(m) δ_{km}`.
    pub fn embed(x: &QtElement) -> SemiElement {
        let p = x.coeffs.len();
        let mut c = vec![ZERO; p * p];
        for (i, v) in x.coeffs.iter().enumerate() {
            c[i * p + i] = *v;
        }
        SemiElement { theta: x.theta.clone(), n: x.n, coeffs: c }
    }

    pub fn random(theta: Arc<ThetaMatrix>, n: usize, rng: &mut Rng) -> Result<SemiElement> {
        let p = GridSpec::new(theta.d, n, 1)?.points();
        SemiElement::new(theta, n, (0..p * p).map(|_| rng::complex_normal(rng)).collect())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &SemiElement) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `E(f) = π_z(∫ π_{w̄}[f(w)] dw)`, the coefficient form: keep `k = m`.
pub fn conditional_expectation(f: &SemiElement) -> SemiElement {
    let p = GridSpec::new(f.theta.d, f.n, 1).expect("validated").points();
    let mut c = vec![ZERO; p * p];
    for i in 0..p {
        c[i * p + i] = f.coeffs[i * p + i];
    }
    SemiElement { theta: f.theta.clone(), n: f.n, coeffs: c }
}

/// The same projection by quadrature of `∫ π_{w̄}[f(w)] dw` over a lattice fine
/// enough to integrate `w^{k−m}` exactly, then re-embedded.
pub fn conditional_expectation_quadrature(f: &SemiElement) -> Result<SemiElement> {
    let g = GridSpec::new(f.theta.d, f.n, 1)?;
    let lattice = GridSpec::new(f.theta.d, 2 * f.n, 1)?;
    let d = g.d;
    let p = g.points();
    let freqs: Vec<[i64; MAX_DIM]> = (0..p)
        .map(|i| {
            let mut m = [0i64; MAX_DIM];
            g.freq(i, &mut m[..d]);
            m
        })
        .collect();
    let avg: Vec<C64> = (0..lattice.points())
        .into_par_iter()
        .map(|w| {
            let mut s = [0.0; MAX_DIM];
            lattice.coord(w, &mut s[..d]);
            let ch = |m: &[i64; MAX_DIM]| C64::from_polar(1.0, 2.0 * PI * (0..d).map(|k| m[k] as f64 * s[k]).sum::<f64>());
            // π_{w̄}[f(w)] has U^m coefficient Σ_k f̂(k,m) w^k w̄^m
            (0..p)
                .map(|m| {
                    let wm = ch(&freqs[m]).conj();
                    (0..p).map(|k| f.coeffs[k * p + m] * ch(&freqs[k])).sum::<C64>() * wm
                })
                .collect::<Vec<C64>>()
        })
        .reduce(|| vec![ZERO; p], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let scale = lattice.cell();
    let x = QtElement::new(f.theta.clone(), f.n, avg.iter().map(|z| z * scale).collect())?;
    Ok(SemiElement::embed(&x))
}

/// Toroidal symbol on `𝕋^d_θ`: scalar multiplier or element-valued.
#[derive(Clone)]
pub enum QtSymbol {
    Scalar(Arc<dyn Fn(&[i64]) -> C64 + Send + Sync>),
    Element(Arc<dyn Fn(&[i64]) -> QtElement + Send + Sync>),
}

/// `T_σ^c x = Σ σ(m) x̂(m) U^m` on an output box of side `n_out`; returns the truncation loss.
pub fn qt_pdo_apply(sigma: &QtSymbol, x: &QtElement, n_out: usize) -> Result<(QtElement, f64)> {
    let g = x.grid();
    let d = g.d;
    let mut out = QtElement::zeros(x.theta.clone(), n_out)?;
    let mut lost = 0.0;
    let mut m = [0i64; MAX_DIM];
    for (i, c) in x.coeffs.iter().enumerate() {
        if *c == ZERO {
            continue;
        }
        g.freq(i, &mut m[..d]);
        match sigma {
            QtSymbol::Scalar(f) => match out.index(&m[..d]) {
                Some(j) => out.coeffs[j] += f(&m[..d]) * c,
                None => lost += (f(&m[..d]) * c).norm_sqr(),
            },
            QtSymbol::Element(f) => {
                let s = f(&m[..d]);
                let mono = QtElement::monomial(x.theta.clone(), 2 * m[..d].iter().map(|v| v.unsigned_abs() as usize + 1).max().unwrap_or(1), &m[..d], *c)?;
                let (prod, info) = qt_multiply_into(&s, &mono, n_out)?;
                lost += info.truncation_loss.powi(2);
                out = out.lincomb(ONE, &prod, ONE)?;
            }
        }
    }
    Ok((out, lost.sqrt()))
}

/// `max_z ‖π_z(T_σ x) − T_{σ̃}(x̃)(z)‖` relative to `‖x̃‖`, with
/// `σ̃(z, m) = rep(π_z(σ(m)))` applied through the operator-valued PDO path.
pub fn transference_intertwining_residual(sigma: &QtSymbol, x: &QtElement) -> Result<f64> {
    let rep = QtRepresentation::new(&x.theta)?;
    let g = evaluation_grid(x, rep.q)?;
    let (tx, lost) = qt_pdo_apply(sigma, x, g.n)?;
    if lost > 0.0 {
        return Err(Error::Validation("symbol output leaves the evaluation lattice".into()));
    }
    let lhs = embed_with(&tx, &rep)?;
    let s = g.slots();
    let pts = g.points();
    let d = g.d;
    let bx = x.grid();
    let mut table = vec![ZERO; pts * pts * s];
    table.par_chunks_mut(pts * s).enumerate().for_each(|(p, row)| {
        let mut z = [0.0; MAX_DIM];
        g.coord(p, &mut z[..d]);
        let mut m = [0i64; MAX_DIM];
        for mi in 0..pts {
            g.freq(mi, &mut m[..d]);
            if bx.freq_index(&m[..d]).is_none() {
                continue;
            }
            let v = match sigma {
                QtSymbol::Scalar(f) => mat::scalar(f(&m[..d]), rep.q),
                QtSymbol::Element(f) => rep.element_at(&f(&m[..d]), &z[..d]),
            };
            row[mi * s..(mi + 1) * s].copy_from_slice(&v);
        }
    });
    let sym = Symbol::from_table(g, Claim::new(0.0, 1.0, 0.0)?, table)?;
    let xt = embed_with(x, &rep)?;
    let rhs = Operator::new(&sym, Side::Column, DEFAULT_BUDGET_BYTES.max(pts * pts * s * 16))?.apply(&xt)?;
    let diff = lhs.lincomb(ONE, &rhs, -ONE)?;
    let sup = |f: &OpFn| f.samples().chunks(s).map(|a| mat::op_norm(a, rep.q)).fold(0.0, f64::max);
    Ok(sup(&diff) / sup(&xt).max(f64::MIN_POSITIVE))
}

/// Norm context on the evaluation lattice of an element of box side `n`.
pub fn qt_norm_context(d: usize, n: usize) -> Result<NormContext> {
    NormContext::for_grid(&GridSpec::new(d, 2 * n, 1)?)
}

/// `|x̂(0)| + ‖(Σ_j 2^{2jα}|φ̃_j * x|²)^{1/2}‖_p`, `p ∈ {1, 2}`, with the square
/// function assembled in the representation for `p = 1`.
pub fn qt_tl_norm(x: &QtElement, alpha: f64, p: Exponent, ctx: &NormContext) -> Result<f64> {
    let eg = ctx.grid();
    if eg.d != x.d() || eg.n != 2 * x.n {
        return Err(Error::Structural("norm context must live on the evaluation lattice".into()));
    }
    let bands = ctx.bands();
    let bx = x.grid();
    let d = bx.d;
    let zero = x.trace().norm();
    // band projections φ̃_j * x as coefficient lists
    let pieces: Vec<QtElement> = (0..=bands.top())
        .map(|j| {
            let lv = bands.level(j);
            let mut m = [0i64; MAX_DIM];
            let c = (0..bx.points())
                .map(|i| {
                    bx.freq(i, &mut m[..d]);
                    x.coeffs[i] * lv[eg.freq_index(&m[..d]).expect("inside lattice")]
                })
                .collect();
            QtElement::new(x.theta.clone(), x.n, c)
        })
        .collect::<Result<_>>()?;
    match p {
        Exponent::Two => {
            let s: f64 = pieces.iter().enumerate().map(|(j, y)| 2f64.powf(2.0 * j as f64 * alpha) * y.l2().powi(2)).sum();
            Ok(zero + s.sqrt())
        }
        Exponent::One => {
            let rep = QtRepresentation::new(&x.theta)?;
            let q = rep.q;
            let vals: Vec<Result<f64>> = (0..eg.points())
                .into_par_iter()
                .map(|i| {
                    let mut z = [0.0; MAX_DIM];
                    eg.coord(i, &mut z[..d]);
                    let mut sq = vec![ZERO; q * q];
                    for (j, y) in pieces.iter().enumerate() {
                        let a = rep.element_at(y, &z[..d]);
                        let w = 2f64.powf(2.0 * j as f64 * alpha);
                        let mut g = vec![ZERO; q * q];
                        mat::adj_mul_acc(&a, &a, &mut g, q);
                        sq.iter_mut().zip(&g).for_each(|(o, v)| *o += v * w);
                    }
                    Ok(mat::psd_trace_pow(&sq, q, 0.5)? / q as f64)
                })
                .collect();
            let mut sum = 0.0;
            for v in vals {
                sum += v?;
            }
            Ok(zero + sum * eg.cell())
        }
        Exponent::Infinity => Err(Error::Unsupported("quantum TL norms are implemented for p ∈ {1, 2}".into())),
    }
}

/// Torus-side `‖x̃‖_{F_p^{α,c}}` converted to `tr_q`.
pub fn transferred_tl_norm(x: &QtElement, alpha: f64, p: Exponent, ctx: &NormContext) -> Result<f64> {
    let xt = transference_embed(x)?;
    let q = xt.grid().q as f64;
    Ok(triebel_lizorkin_norm(&xt, alpha, p, ctx)? / q.powf(1.0 / p.value()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QtSweepRow {
    pub box_size: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QtSweepReport {
    pub alpha: f64,
    pub p: Exponent,
    pub rows: Vec<QtSweepRow>,
    pub growth: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Lower bounds `max_x ‖T_σ x‖_{F_p^α} / ‖x‖_{F_p^α}` over random polynomials, per box.
#[allow(clippy::too_many_arguments)]
pub fn qt_boundedness_sweep(
    sigma: impl Fn(&[i64]) -> C64 + Send + Sync + Clone + 'static,
    claim: Claim,
    theta: Arc<ThetaMatrix>,
    alpha: f64,
    p: Exponent,
    boxes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<QtSweepReport> {
    if boxes.is_empty() {
        return Err(Error::Config("no boxes to sweep".into()));
    }
    let mut rows = Vec::new();
    for &n in boxes {
        let g = GridSpec::new(theta.d, n, 1)?;
        let f = sigma.clone();
        let check = Symbol::multiplier(g, claim, move |x| {
            let m: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
            f(&m)
        })?;
        if !check_toroidal_class(&ToroidalSymbol::new(check), 1, 1)?.pass {
            return Err(Error::Validation(format!("symbol fails its toroidal class claim on box {n}")));
        }
        let ctx = qt_norm_context(theta.d, n)?;
        let sym = QtSymbol::Scalar(Arc::new(sigma.clone()));
        let mut best = 0.0f64;
        for t in 0..trials {
            let mut r = rng::seeded(seed.wrapping_mul(1_000_003).wrapping_add(t as u64));
            let x = QtElement::random(theta.clone(), n, n as i64 / 2 - 1, &mut r)?;
            let (tx, _) = qt_pdo_apply(&sym, &x, n)?;
            let den = qt_tl_norm(&x, alpha, p, &ctx)?;
            if den > 0.0 {
                best = best.max(qt_tl_norm(&tx, alpha, p, &ctx)? / den);
            }
        }
        rows.push(QtSweepRow { box_size: n, ratio: best });
    }
    let hi = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let growth = hi / lo;
    Ok(QtSweepReport { alpha, p, rows, growth, pass: growth <= 2.0, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn third() -> Arc<ThetaMatrix> {
        Arc::new(ThetaMatrix::rational2(1, 3).unwrap())
    }

    #[test]
    fn theta_parsing_and_reduction() {
        let t = ThetaMatrix::parse("2/6").unwrap();
        assert_eq!(t.rational, Some((vec![0, -1, 1, 0], 3)));
        assert!(ThetaMatrix::parse("0.3").unwrap().rational.is_none());
        assert!(ThetaMatrix::real(2, vec![0.0, 0.1, 0.2, 0.0]).is_err());
        assert!(ThetaMatrix::parse("1/0").is_err());
    }

    #[test]
    fn generators_commute_up_to_phase() {
        let t = third();
        let rep = QtRepresentation::new(&t).unwrap();
        assert_eq!(rep.q, 3);
        assert!(rep.commutation_residual(&t) < 1e-12);
        let u1 = QtElement::monomial(t.clone(), 8, &[1, 0], ONE).unwrap();
        let u2 = QtElement::monomial(t.clone(), 8, &[0, 1], ONE).unwrap();
        let (a, _) = qt_multiply(&u2, &u1).unwrap();
        let (b, _) = qt_multiply(&u1, &u2).unwrap();
        let ph = C64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!((a.coeff(&[1, 1]) - ph * b.coeff(&[1, 1])).norm() < 1e-15);
    }

    #[test]
    fn irrational_theta_refuses_representation() {
        let t = Arc::new(ThetaMatrix::parse("0.3").unwrap());
        let x = QtElement::monomial(t, 8, &[1, 0], ONE).unwrap();
        assert!(matches!(qt_lp_norm(&x, Exponent::One), Err(Error::Unsupported(_))));
        assert_eq!(qt_lp_norm(&x, Exponent::Two).unwrap(), 1.0);
    }

    #[test]
    fn scalar_product_scales() {
        let t = third();
        let mut r = rng::seeded(3);
        let x = QtElement::random(t.clone(), 8, 2, &mut r).unwrap();
        let c = QtElement::monomial(t, 8, &[0, 0], C64::new(2.0, -1.0)).unwrap();
        let (y, info) = qt_multiply(&c, &x).unwrap();
        assert_eq!(info.truncation_loss, 0.0);
        for (a, b) in y.coeffs().iter().zip(x.coeffs()) {
            assert!((a - C64::new(2.0, -1.0) * b).norm() < 1e-14);
        }
    }

    #[test]
    fn associativity() {
        let t = third();
        let mut r = rng::seeded(5);
        let xs: Vec<QtElement> = (0..3).map(|_| QtElement::random(t.clone(), 16, 2, &mut r).unwrap()).collect();
        let (ab, _) = qt_multiply(&xs[0], &xs[1]).unwrap();
        let (ab_c, _) = qt_multiply(&ab, &xs[2]).unwrap();
        let (bc, _) = qt_multiply(&xs[1], &xs[2]).unwrap();
        let (a_bc, _) = qt_multiply(&xs[0], &bc).unwrap();
        let err = ab_c.lincomb(ONE, &a_bc, -ONE).unwrap().l2() / ab_c.l2();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn monomials_have_unit_norms_and_zero_trace() {
        let t = third();
        let x = QtElement::monomial(t.clone(), 8, &[2, -1], ONE).unwrap();
        assert_eq!(qt_trace(&x), ZERO);
        for p in [Exponent::One, Exponent::Two, Exponent::Infinity] {
            assert!((qt_lp_norm_via_representation(&x, p).unwrap() - 1.0).abs() < 1e-12);
        }
        let one = QtElement::monomial(t, 8, &[0, 0], ONE).unwrap();
        assert_eq!(qt_trace(&one), ONE);
    }

    #[test]
    fn expectation_fixes_embedded_and_kills_off_diagonal() {
        let t = third();
        let mut r = rng::seeded(9);
        let x = QtElement::random(t.clone(), 8, 1, &mut r).unwrap();
        let e = SemiElement::embed(&x);
        assert!(conditional_expectation(&e).distance(&e) == 0.0);
        let p = x.coeffs().len();
        let mut c = vec![ZERO; p * p];
        c[3 * p + 5] = ONE;
        let off = SemiElement::new(t, 8, c).unwrap();
        assert_eq!(conditional_expectation(&off).l2(), 0.0);
        assert!(conditional_expectation_quadrature(&off).unwrap().l2() < 1e-14);
    }

    #[test]
    fn single_band_tl_norm() {
        let t = third();
        let ctx = qt_norm_context(2, 16).unwrap();
        let x = QtElement::monomial(t, 16, &[4, 0], ONE).unwrap();
        let bands = ctx.bands();
        let eg = ctx.grid();
        let idx = eg.freq_index(&[4, 0]).unwrap();
        let want: f64 = (0..=bands.top()).map(|j| 2f64.powf(j as f64) * bands.level(j)[idx].powi(2)).sum::<f64>().sqrt();
        let got = qt_tl_norm(&x, 0.5, Exponent::Two, &ctx).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn identity_sweep_is_flat() {
        let r = qt_boundedness_sweep(|_| ONE, Claim::new(0.0, 1.0, 0.0).unwrap(), third(), 0.5, Exponent::Two, &[8, 16], 3, 1)
            .unwrap();
        assert!(r.rows.iter().all(|row| (row.ratio - 1.0).abs() < 1e-12));
        assert!(r.pass);
    }
}
