//! Discretized torus `[0,1)^d`, matrix-valued functions in sample and
//! Fourier-coefficient views, and the basic integral identities.
//!
//! Conventions used everywhere in the crate:
//! * point `s = i/n` per axis, flat indices row-major with axis 0 slowest;
//! * frequencies in centered order `m_k = i_k − n/2 ∈ [−n/2, n/2)`;
//! * the forward transform carries `1/n^d`, so a character has coefficient 1;
//! * integrals are Riemann sums with weight `1/n^d`;
//! * matrix values are stored `[point][row][col]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat;

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub q: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, q: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::Config(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two ≥ 8, got {n}"
            )));
        }
        if q == 0 {
            return Err(Error::Config("matrix size q must be positive".into()));
        }
        Ok(GridSpec { d, n, q })
    }

    pub fn with_q(&self, q: usize) -> GridSpec {
        GridSpec { q, ..*self }
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn slots(&self) -> usize {
        self.q * self.q
    }

    pub fn len(&self) -> usize {
        self.points() * self.slots()
    }

    /// Riemann-sum weight `Δs = 1/n^d`.
    pub fn cell(&self) -> f64 {
        1.0 / self.points() as f64
    }

    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for k in (0..self.d).rev() {
            out[k] = idx % self.n;
            idx /= self.n;
        }
    }

    pub fn ravel(&self, ix: &[usize]) -> usize {
        ix.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn coord(&self, idx: usize, out: &mut [f64]) {
        let mut ix = [0usize; MAX_DIM];
        self.unravel(idx, &mut ix[..self.d]);
        for k in 0..self.d {
            out[k] = ix[k] as f64 / self.n as f64;
        }
    }

    pub fn freq(&self, idx: usize, out: &mut [i64]) {
        let mut ix = [0usize; MAX_DIM];
        self.unravel(idx, &mut ix[..self.d]);
        let h = (self.n / 2) as i64;
        for k in 0..self.d {
            out[k] = ix[k] as i64 - h;
        }
    }

    /// Flat index of frequency `m`, if it lies in the centered box.
    pub fn freq_index(&self, m: &[i64]) -> Option<usize> {
        let h = (self.n / 2) as i64;
        let mut acc = 0usize;
        for &mk in m.iter().take(self.d) {
            if mk < -h || mk >= h {
                return None;
            }
            acc = acc * self.n + (mk + h) as usize;
        }
        Some(acc)
    }

    /// Index of the frequency `−m` reduced modulo `n` into the box.
    pub fn neg_freq(&self, idx: usize) -> usize {
        let mut ix = [0usize; MAX_DIM];
        self.unravel(idx, &mut ix[..self.d]);
        for v in ix.iter_mut().take(self.d) {
            *v = (self.n - *v) % self.n;
        }
        self.ravel(&ix[..self.d])
    }

    pub fn zero_freq(&self) -> usize {
        let ix = [self.n / 2; MAX_DIM];
        self.ravel(&ix[..self.d])
    }

    /// All lattice frequencies, `d` entries per point.
    pub fn freq_table(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.points() * self.d];
        for (idx, chunk) in out.chunks_mut(self.d).enumerate() {
            self.freq(idx, chunk);
        }
        out
    }

    /// All sample coordinates, `d` entries per point.
    pub fn coord_table(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.points() * self.d];
        for (idx, chunk) in out.chunks_mut(self.d).enumerate() {
            self.coord(idx, chunk);
        }
        out
    }

    /// Euclidean length `|m|` of every lattice frequency.
    pub fn freq_radius(&self) -> Vec<f64> {
        self.freq_table()
            .chunks(self.d)
            .map(|m| m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt())
            .collect()
    }
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, dir == FftDirection::Forward))
        .or_insert_with(|| FftPlanner::new().plan_fft(n, dir))
        .clone()
}

/// Transform one scalar field (length `n^d`) in place along every axis.
///
/// Forward output is in centered order and scaled by `1/n^d`; the inverse
/// expects centered input and applies no scaling.
fn transform_field(data: &mut [C64], n: usize, d: usize, forward: bool) {
    let dir = if forward { FftDirection::Forward } else { FftDirection::Inverse };
    let fft = plan(n, dir);
    let scratch_len = fft.get_inplace_scratch_len();
    let total = data.len();
    let half = n / 2;
    let run_lane = |lane: &mut [C64], scratch: &mut Vec<C64>| {
        if !forward {
            lane.rotate_left(half);
        }
        fft.process_with_scratch(lane, scratch);
        if forward {
            lane.rotate_left(half);
        }
    };
    let mut buf = vec![C64::new(0.0, 0.0); if d > 1 { total } else { 0 }];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(n).for_each_init(
                || vec![C64::new(0.0, 0.0); scratch_len],
                |scratch, lane| run_lane(lane, scratch),
            );
            continue;
        }
        let src: &[C64] = data;
        buf.par_chunks_mut(n).enumerate().for_each_init(
            || vec![C64::new(0.0, 0.0); scratch_len],
            |scratch, (l, lane)| {
                let base = (l / stride) * n * stride + l % stride;
                for (t, v) in lane.iter_mut().enumerate() {
                    *v = src[base + t * stride];
                }
                run_lane(lane, scratch);
            },
        );
        let lanes: &[C64] = &buf;
        data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let block = n * stride;
            let rem = idx % block;
            let l = (idx / block) * stride + rem % stride;
            *v = lanes[l * n + rem / stride];
        });
    }
    if forward {
        let scale = 1.0 / total as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }
}

/// Apply the transform to every matrix slot of a `[point][slot]` array.
fn transform_slots(grid: &GridSpec, input: &[C64], forward: bool) -> Vec<C64> {
    let slots = grid.slots();
    if slots == 1 {
        let mut out = input.to_vec();
        transform_field(&mut out, grid.n, grid.d, forward);
        return out;
    }
    let pts = grid.points();
    let fields: Vec<Vec<C64>> = (0..slots)
        .into_par_iter()
        .map(|slot| {
            let mut f: Vec<C64> = (0..pts).map(|p| input[p * slots + slot]).collect();
            transform_field(&mut f, grid.n, grid.d, forward);
            f
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); input.len()];
    for (slot, f) in fields.iter().enumerate() {
        for (p, v) in f.iter().enumerate() {
            out[p * slots + slot] = *v;
        }
    }
    out
}

/// Forward transform of raw sample data laid out `[point][slot]`.
pub fn forward(grid: &GridSpec, samples: &[C64]) -> Vec<C64> {
    transform_slots(grid, samples, true)
}

/// Inverse transform of raw centered coefficient data laid out `[freq][slot]`.
pub fn inverse(grid: &GridSpec, coeffs: &[C64]) -> Vec<C64> {
    transform_slots(grid, coeffs, false)
}

/// A `q×q`-matrix-valued function on the grid, viewed as samples and as
/// centered Fourier coefficients. Whichever view is missing is computed on
/// first access and cached.
#[derive(Clone, Debug)]
pub struct OpFn {
    grid: GridSpec,
    samples: OnceLock<Vec<C64>>,
    coeffs: OnceLock<Vec<C64>>,
}

impl OpFn {
    pub fn from_samples(grid: GridSpec, samples: Vec<C64>) -> Result<Self> {
        check_len(&grid, samples.len())?;
        let s = OnceLock::new();
        let _ = s.set(samples);
        Ok(OpFn { grid, samples: s, coeffs: OnceLock::new() })
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<C64>) -> Result<Self> {
        check_len(&grid, coeffs.len())?;
        let c = OnceLock::new();
        let _ = c.set(coeffs);
        Ok(OpFn { grid, samples: OnceLock::new(), coeffs: c })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        let s = OnceLock::new();
        let c = OnceLock::new();
        let _ = s.set(z.clone());
        let _ = c.set(z);
        OpFn { grid, samples: s, coeffs: c }
    }

    /// Scalar samples `g(s)` lifted to `g(s)·I`.
    pub fn from_scalar_samples(grid: GridSpec, values: &[C64]) -> Result<Self> {
        check_len(&grid.with_q(1), values.len())?;
        let q = grid.q;
        let mut out = vec![C64::new(0.0, 0.0); grid.len()];
        for (p, v) in values.iter().enumerate() {
            for i in 0..q {
                out[p * q * q + i * q + i] = *v;
            }
        }
        OpFn::from_samples(grid, out)
    }

    /// Scalar coefficients `ĝ(m)` lifted to `ĝ(m)·c` for a fixed matrix `c`.
    pub fn from_scalar_coeffs(grid: GridSpec, values: &[C64], c: &[C64]) -> Result<Self> {
        check_len(&grid.with_q(1), values.len())?;
        let s = grid.slots();
        let mut out = vec![C64::new(0.0, 0.0); grid.len()];
        for (p, v) in values.iter().enumerate() {
            for k in 0..s {
                out[p * s + k] = *v * c[k];
            }
        }
        OpFn::from_coeffs(grid, out)
    }

    /// Samples from a closure evaluated at each point coordinate.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64], &mut [C64]) + Sync) -> Self {
        let s = grid.slots();
        let mut out = vec![C64::new(0.0, 0.0); grid.len()];
        out.par_chunks_mut(s).enumerate().for_each(|(p, chunk)| {
            let mut x = [0.0; MAX_DIM];
            grid.coord(p, &mut x[..grid.d]);
            f(&x[..grid.d], chunk);
        });
        OpFn::from_samples(grid, out).expect("length fixed by grid")
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn samples(&self) -> &[C64] {
        self.samples.get_or_init(|| {
            let c = self.coeffs.get().expect("one view is always present");
            inverse(&self.grid, c)
        })
    }

    pub fn coeffs(&self) -> &[C64] {
        self.coeffs.get_or_init(|| {
            let s = self.samples.get().expect("one view is always present");
            forward(&self.grid, s)
        })
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples();
        self.samples.into_inner().expect("materialized above")
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs();
        self.coeffs.into_inner().expect("materialized above")
    }

    pub fn at(&self, point: usize) -> &[C64] {
        let s = self.grid.slots();
        &self.samples()[point * s..(point + 1) * s]
    }

    pub fn coeff(&self, freq: usize) -> &[C64] {
        let s = self.grid.slots();
        &self.coeffs()[freq * s..(freq + 1) * s]
    }

    pub fn has_samples(&self) -> bool {
        self.samples.get().is_some()
    }

    pub fn has_coeffs(&self) -> bool {
        self.coeffs.get().is_some()
    }

    /// Pointwise conjugate transpose `f*`. On coefficients this is `m ↦ f̂(−m)*`.
    pub fn adjoint(&self) -> OpFn {
        let q = self.grid.q;
        let s = self.grid.slots();
        if let Some(samples) = self.samples.get() {
            let mut out = vec![C64::new(0.0, 0.0); samples.len()];
            out.par_chunks_mut(s)
                .zip(samples.par_chunks(s))
                .for_each(|(o, a)| o.copy_from_slice(&mat::adjoint(a, q)));
            return OpFn::from_samples(self.grid, out).expect("same shape");
        }
        let c = self.coeffs();
        let mut out = vec![C64::new(0.0, 0.0); c.len()];
        for (idx, o) in out.chunks_mut(s).enumerate() {
            let src = self.grid.neg_freq(idx);
            o.copy_from_slice(&mat::adjoint(&c[src * s..(src + 1) * s], q));
        }
        OpFn::from_coeffs(self.grid, out).expect("same shape")
    }

    /// `a·self + b·other`, computed in whichever view both already share.
    pub fn lincomb(&self, a: C64, other: &OpFn, b: C64) -> Result<OpFn> {
        if self.grid != other.grid {
            return Err(Error::Structural("grid mismatch in linear combination".into()));
        }
        let use_coeffs = self.has_coeffs() && other.has_coeffs() && !(self.has_samples() && other.has_samples());
        let (x, y) = if use_coeffs {
            (self.coeffs(), other.coeffs())
        } else {
            (self.samples(), other.samples())
        };
        let out: Vec<C64> = x.par_iter().zip(y.par_iter()).map(|(u, v)| a * u + b * v).collect();
        if use_coeffs {
            OpFn::from_coeffs(self.grid, out)
        } else {
            OpFn::from_samples(self.grid, out)
        }
    }

    pub fn scale(&self, a: C64) -> OpFn {
        if let Some(s) = self.samples.get() {
            let v = s.iter().map(|z| a * z).collect();
            OpFn::from_samples(self.grid, v).expect("same shape")
        } else {
            let v = self.coeffs().iter().map(|z| a * z).collect();
            OpFn::from_coeffs(self.grid, v).expect("same shape")
        }
    }

    /// Multiply every coefficient `f̂(m)` by the scalar `w(m)`.
    pub fn multiply_coeffs(&self, weights: &[f64]) -> OpFn {
        let s = self.grid.slots();
        let c = self.coeffs();
        let mut out = c.to_vec();
        out.par_chunks_mut(s).zip(weights.par_iter()).for_each(|(o, &w)| {
            for z in o.iter_mut() {
                *z *= w;
            }
        });
        OpFn::from_coeffs(self.grid, out).expect("same shape")
    }

    /// Largest coefficient norm outside the ball `|m| ≤ radius`.
    pub fn band_excess(&self, radius: f64) -> f64 {
        let s = self.grid.slots();
        let r = self.grid.freq_radius();
        self.coeffs()
            .chunks(s)
            .zip(r.iter())
            .filter(|(_, &rad)| rad > radius + 1e-9)
            .map(|(c, _)| c.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// `∫ f(s) ds` as a matrix.
    pub fn integral(&self) -> Vec<C64> {
        let s = self.grid.slots();
        let w = self.grid.cell();
        let mut acc = vec![C64::new(0.0, 0.0); s];
        for chunk in self.samples().chunks(s) {
            for (a, v) in acc.iter_mut().zip(chunk) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a *= w);
        acc
    }

    /// `∫ f(s)* f(s) ds`, the column Gram matrix.
    pub fn gram(&self) -> Vec<C64> {
        let q = self.grid.q;
        let s = self.grid.slots();
        let partial: Vec<Vec<C64>> = self
            .samples()
            .par_chunks(s * 256)
            .map(|block| {
                let mut acc = vec![C64::new(0.0, 0.0); s];
                for a in block.chunks(s) {
                    mat::adj_mul_acc(a, a, &mut acc, q);
                }
                acc
            })
            .collect();
        let mut acc = vec![C64::new(0.0, 0.0); s];
        for p in partial {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        let w = self.grid.cell();
        acc.iter_mut().for_each(|a| *a *= w);
        acc
    }

    /// `Σ_m f̂(m)* f̂(m)`, the coefficient-side Gram matrix.
    pub fn coeff_gram(&self) -> Vec<C64> {
        let q = self.grid.q;
        let s = self.grid.slots();
        let mut acc = vec![C64::new(0.0, 0.0); s];
        for a in self.coeffs().chunks(s) {
            mat::adj_mul_acc(a, a, &mut acc, q);
        }
        acc
    }
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::Structural(format!(
            "array of length {len} does not match grid {}^{}×{}² = {}",
            grid.n,
            grid.d,
            grid.q,
            grid.len()
        )));
    }
    Ok(())
}

/// Operator-norm residual between `∫|f|²` and `Σ_m |f̂(m)|²`.
pub fn plancherel_check(f: &OpFn) -> f64 {
    let lhs = f.gram();
    let rhs = f.coeff_gram();
    let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    mat::op_norm(&diff, f.grid().q)
}

/// The Cauchy-Schwarz gap `(∫|φ|²)(∫|f|²) − |∫ φ f|²` and its least eigenvalue.
#[derive(Clone, Debug)]
pub struct CsGap {
    pub gap: Vec<C64>,
    pub min_eig: f64,
}

impl CsGap {
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eig >= -tol
    }
}

pub fn cauchy_schwarz_check(phi: &[C64], f: &OpFn) -> Result<CsGap> {
    let grid = f.grid();
    if phi.len() != grid.points() {
        return Err(Error::Structural("scalar weight does not match grid".into()));
    }
    let q = grid.q;
    let s = grid.slots();
    let w = grid.cell();
    let phi_sq: f64 = phi.iter().map(|z| z.norm_sqr()).sum::<f64>() * w;
    let mut pair = vec![C64::new(0.0, 0.0); s];
    for (p, a) in f.samples().chunks(s).enumerate() {
        for (acc, v) in pair.iter_mut().zip(a) {
            *acc += phi[p] * v * w;
        }
    }
    let fg = f.gram();
    let pg = mat::gram(&pair, q);
    let gap: Vec<C64> = fg.iter().zip(&pg).map(|(a, b)| a * phi_sq - b).collect();
    let min_eig = mat::herm_eigvals(&gap, q)[0];
    Ok(CsGap { gap, min_eig })
}
