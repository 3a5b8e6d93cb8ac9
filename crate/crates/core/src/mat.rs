//! Small dense complex matrices stored row-major in flat slices of length q².
//!
//! The pointwise algebra M_q is tiny (q ≤ 4 in practice) and is visited once per
//! grid point, so the hot helpers work on borrowed slices and special-case q ≤ 2.
//! Larger decompositions defer to nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative eigenvalue floor for positive semidefinite inputs.
pub const PSD_FLOOR: f64 = 1e-12;

pub fn identity(q: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); q * q];
    for i in 0..q {
        m[i * q + i] = C64::new(1.0, 0.0);
    }
    m
}

pub fn scalar(c: C64, q: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); q * q];
    for i in 0..q {
        m[i * q + i] = c;
    }
    m
}

/// `out = a·b`.
pub fn mul_into(a: &[C64], b: &[C64], out: &mut [C64], q: usize) {
    if q == 1 {
        out[0] = a[0] * b[0];
        return;
    }
    for i in 0..q {
        for j in 0..q {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..q {
                acc += a[i * q + k] * b[k * q + j];
            }
            out[i * q + j] = acc;
        }
    }
}

/// `out += a·b`.
pub fn mul_acc(a: &[C64], b: &[C64], out: &mut [C64], q: usize) {
    if q == 1 {
        out[0] += a[0] * b[0];
        return;
    }
    for i in 0..q {
        for j in 0..q {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..q {
                acc += a[i * q + k] * b[k * q + j];
            }
            out[i * q + j] += acc;
        }
    }
}

pub fn mul(a: &[C64], b: &[C64], q: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); q * q];
    mul_into(a, b, &mut out, q);
    out
}

/// `out += a*·b` (conjugate transpose on the left factor).
pub fn adj_mul_acc(a: &[C64], b: &[C64], out: &mut [C64], q: usize) {
    if q == 1 {
        out[0] += a[0].conj() * b[0];
        return;
    }
    for i in 0..q {
        for j in 0..q {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..q {
                acc += a[k * q + i].conj() * b[k * q + j];
            }
            out[i * q + j] += acc;
        }
    }
}

pub fn adjoint(a: &[C64], q: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); q * q];
    for i in 0..q {
        for j in 0..q {
            out[j * q + i] = a[i * q + j].conj();
        }
    }
    out
}

/// `a*·a`.
pub fn gram(a: &[C64], q: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); q * q];
    adj_mul_acc(a, a, &mut out, q);
    out
}

pub fn trace(a: &[C64], q: usize) -> C64 {
    (0..q).map(|i| a[i * q + i]).sum()
}

pub fn frob_sq(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_dmatrix(a: &[C64], q: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(q, q, a)
}

pub fn from_dmatrix(m: &DMatrix<C64>) -> Vec<C64> {
    let q = m.nrows();
    let mut out = Vec::with_capacity(q * q);
    for i in 0..q {
        for j in 0..q {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn herm_eigvals(a: &[C64], q: usize) -> Vec<f64> {
    match q {
        1 => vec![a[0].re],
        2 => {
            let p = a[0].re;
            let r = a[3].re;
            let off = (a[1] + a[2].conj()) * 0.5;
            let mean = 0.5 * (p + r);
            let rad = (0.5 * (p - r)).hypot(off.norm());
            vec![mean - rad, mean + rad]
        }
        _ => {
            let m = to_dmatrix(a, q);
            let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(|x, y| x.total_cmp(y));
            v
        }
    }
}

/// Eigen-decomposition of the Hermitian part of `a`: (eigenvalues, eigenvectors as columns).
pub fn herm_eig(a: &[C64], q: usize) -> (Vec<f64>, DMatrix<C64>) {
    let m = to_dmatrix(a, q);
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = h.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// Clip tiny negative eigenvalues of a PSD matrix to zero; reject genuinely negative ones.
pub fn floor_spectrum(vals: &mut [f64]) -> Result<()> {
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for v in vals.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_FLOOR * scale {
                return Err(Error::Data(format!(
                    "matrix expected positive semidefinite has eigenvalue {v:e}"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// `Tr(a^{p})` for positive semidefinite `a`.
pub fn psd_trace_pow(a: &[C64], q: usize, p: f64) -> Result<f64> {
    let mut vals = herm_eigvals(a, q);
    floor_spectrum(&mut vals)?;
    Ok(vals.iter().map(|v| v.powf(p)).sum())
}

/// Largest eigenvalue of positive semidefinite `a`, floored at zero.
pub fn psd_max(a: &[C64], q: usize) -> Result<f64> {
    let mut vals = herm_eigvals(a, q);
    floor_spectrum(&mut vals)?;
    Ok(vals.iter().fold(0.0, |m: f64, v| m.max(*v)))
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(a: &[C64], q: usize) -> Result<Vec<C64>> {
    if q == 1 {
        let mut v = [a[0].re];
        floor_spectrum(&mut v)?;
        return Ok(vec![C64::new(v[0].sqrt(), 0.0)]);
    }
    let (mut vals, vecs) = herm_eig(a, q);
    floor_spectrum(&mut vals)?;
    let mut out = vec![C64::new(0.0, 0.0); q * q];
    for (k, lam) in vals.iter().enumerate() {
        let r = lam.sqrt();
        for i in 0..q {
            for j in 0..q {
                out[i * q + j] += vecs[(i, k)] * vecs[(j, k)].conj() * r;
            }
        }
    }
    Ok(out)
}

/// Singular values, descending.
pub fn singular_values(a: &[C64], q: usize) -> Vec<f64> {
    match q {
        1 => vec![a[0].norm()],
        2 => {
            let g = gram(a, 2);
            let v = herm_eigvals(&g, 2);
            vec![v[1].max(0.0).sqrt(), v[0].max(0.0).sqrt()]
        }
        _ => {
            let mut s: Vec<f64> = to_dmatrix(a, q).singular_values().iter().copied().collect();
            s.sort_by(|x, y| y.total_cmp(x));
            s
        }
    }
}

/// Spectral (operator) norm.
pub fn op_norm(a: &[C64], q: usize) -> f64 {
    if q == 1 {
        return a[0].norm();
    }
    singular_values(a, q)[0]
}

/// Trace norm `Tr|a|`.
pub fn trace_norm(a: &[C64], q: usize) -> f64 {
    singular_values(a, q).iter().sum()
}

/// Whether `a` is unitary to within `tol` in every entry of `a*a − I`.
pub fn is_unitary(a: &[C64], q: usize, tol: f64) -> bool {
    let g = gram(a, q);
    let id = identity(q);
    g.iter().zip(&id).all(|(x, y)| (x - y).norm() <= tol)
}
