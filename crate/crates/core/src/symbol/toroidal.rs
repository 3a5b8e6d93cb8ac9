//! Toroidal symbols (integer frequencies, forward differences) and their
//! smooth extension to real frequencies.

use num_complex::Complex64 as C64;

use super::class::{class_constants, ClassOptions, ClassReport};
use super::{Claim, DiffKind, Repr, Symbol, Term, XiFactor};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MAX_DIM};
use crate::lp::unit_bump;

/// Symbol read only at integer frequencies of the centered box.
#[derive(Clone, Debug)]
pub struct ToroidalSymbol {
    inner: Symbol,
}

impl ToroidalSymbol {
    pub fn new(inner: Symbol) -> ToroidalSymbol {
        ToroidalSymbol { inner }
    }

    pub fn from_table(grid: GridSpec, claim: Claim, values: Vec<C64>) -> Result<ToroidalSymbol> {
        Ok(ToroidalSymbol { inner: Symbol::from_table(grid, claim, values)? })
    }

    pub fn symbol(&self) -> &Symbol {
        &self.inner
    }

    pub fn grid(&self) -> GridSpec {
        self.inner.grid()
    }

    pub fn claim(&self) -> Claim {
        self.inner.claim()
    }

    /// `σ(s_p, m)` for an integer frequency.
    pub fn value_into(&self, p: usize, m: &[i64], out: &mut [C64]) {
        let x: Vec<f64> = m.iter().map(|&v| v as f64).collect();
        self.inner.eval_into(p, &x, out);
    }
}

/// Class constants with forward differences in the frequency variable.
pub fn check_toroidal_class(sigma: &ToroidalSymbol, max_gamma: usize, max_beta: usize) -> Result<ClassReport> {
    let mut opts = ClassOptions::new(max_gamma, max_beta);
    opts.kind = DiffKind::Forward;
    class_constants(&sigma.inner, opts)
}

/// Interpolating bump `ζ̂(ξ) = Π_k θ(ξ_k)`, supported in `(−1,1)^d`, equal to
/// one at the origin and zero at every other integer point.
pub fn zeta_hat(xi: &[f64]) -> f64 {
    xi.iter().map(|&x| unit_bump(x)).product()
}

/// `σ̃(s, ξ) = Σ_m ζ̂(ξ − m) σ(s, m)`. At integer ξ only the `m = ξ` term has a
/// nonzero weight (exactly one), so restriction returns σ unchanged.
pub fn extend_toroidal_symbol(sigma: &ToroidalSymbol) -> Result<Symbol> {
    let sym = &sigma.inner;
    let Repr::Separable(terms) = sym.repr() else {
        return Err(Error::Unsupported(
            "extension needs a generator-backed toroidal symbol".into(),
        ));
    };
    let q = sym.grid().q;
    let out = terms
        .iter()
        .map(|t| Term { s: t.s.clone(), xi: extend_factor(&t.xi, q) })
        .collect();
    Symbol::separable(sym.grid(), sym.claim(), out)
}

/// Visit the integer points `m` with `ζ̂(ξ − m) ≠ 0` and their weights.
fn for_neighbors(xi: &[f64], mut f: impl FnMut(&[f64], f64)) {
    let d = xi.len();
    let base: Vec<f64> = xi.iter().map(|x| x.floor()).collect();
    let mut m = [0.0; MAX_DIM];
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        for k in 0..d {
            m[k] = base[k] + ((corner >> k) & 1) as f64;
            w *= unit_bump(xi[k] - m[k]);
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 {
            f(&m[..d], w);
        }
    }
}

fn extend_factor(b: &XiFactor, q: usize) -> XiFactor {
    match b {
        XiFactor::Scalar(f) => {
            let f = f.clone();
            XiFactor::scalar(move |xi| {
                let mut acc = C64::new(0.0, 0.0);
                let mut first = true;
                for_neighbors(xi, |m, w| {
                    let v = f(m);
                    if first && w == 1.0 {
                        acc = v;
                    } else {
                        acc += v * w;
                    }
                    first = false;
                });
                acc
            })
        }
        XiFactor::Matrix(f) => {
            let f = f.clone();
            XiFactor::matrix(move |xi, out| {
                let mut tmp = vec![C64::new(0.0, 0.0); q * q];
                out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                let mut first = true;
                for_neighbors(xi, |m, w| {
                    f(m, &mut tmp);
                    if first && w == 1.0 {
                        out.copy_from_slice(&tmp);
                    } else {
                        for (o, t) in out.iter_mut().zip(&tmp) {
                            *o += t * w;
                        }
                    }
                    first = false;
                });
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::class::{class_constants, ClassOptions};
    use crate::symbol::SFactor;
    use std::f64::consts::PI;

    fn exemplar(g: GridSpec) -> ToroidalSymbol {
        let claim = Claim::new(-1.0, 1.0, 0.0).unwrap();
        let s = SFactor::matrix_fn(&g, |x, o| {
            o[0] = C64::new(1.5 + (2.0 * PI * x[0]).sin(), 0.0);
            o[1] = C64::new(0.0, 0.2);
            o[2] = C64::new(0.1, 0.0);
            o[3] = C64::new(1.0 + 0.5 * (2.0 * PI * x[1]).cos(), 0.0);
        });
        let xi = XiFactor::scalar(|m| C64::new((1.0 + m.iter().map(|v| v * v).sum::<f64>()).powf(-0.5), 0.0));
        ToroidalSymbol::new(Symbol::separable(g, claim, vec![Term { s, xi }]).unwrap())
    }

    #[test]
    fn zeta_interpolates_delta() {
        assert_eq!(zeta_hat(&[0.0, 0.0]), 1.0);
        assert_eq!(zeta_hat(&[1.0, 0.0]), 0.0);
        assert_eq!(zeta_hat(&[-1.0, 2.0]), 0.0);
        assert!(zeta_hat(&[0.5, 0.25]) > 0.0);
    }

    #[test]
    fn restriction_is_bit_exact() {
        let g = GridSpec::new(2, 16, 2).unwrap();
        let t = exemplar(g);
        let ext = extend_toroidal_symbol(&t).unwrap();
        let mut a = vec![C64::new(0.0, 0.0); 4];
        let mut b = vec![C64::new(0.0, 0.0); 4];
        for p in [0usize, 17, 255] {
            for m1 in -8i64..8 {
                for m2 in -8i64..8 {
                    t.value_into(p, &[m1, m2], &mut a);
                    ext.eval_into(p, &[m1 as f64, m2 as f64], &mut b);
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn delta_symbol_extends_to_zeta() {
        let g = GridSpec::new(1, 16, 1).unwrap();
        let claim = Claim::new(0.0, 1.0, 0.0).unwrap();
        let sym = Symbol::multiplier(g, claim, |m| {
            C64::new(if m.iter().all(|&v| v == 0.0) { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let ext = extend_toroidal_symbol(&ToroidalSymbol::new(sym)).unwrap();
        let mut v = [C64::new(0.0, 0.0)];
        for x in [-0.7, -0.2, 0.0, 0.4, 0.9, 1.3] {
            ext.eval_into(0, &[x], &mut v);
            assert!((v[0].re - zeta_hat(&[x])).abs() < 1e-15);
        }
    }

    #[test]
    fn extension_inflates_constants_boundedly() {
        let g = GridSpec::new(2, 16, 2).unwrap();
        let t = exemplar(g);
        let base = check_toroidal_class(&t, 1, 2).unwrap();
        let ext = extend_toroidal_symbol(&t).unwrap();
        let mut opts = ClassOptions::new(1, 2);
        opts.xi_offset = 0.5;
        let off = class_constants(&ext, opts).unwrap();
        let on = check_toroidal_class(&ToroidalSymbol::new(ext), 1, 2).unwrap();
        for e in &base.entries {
            let c = e.constant.max(1e-3);
            assert!(off.constant(&e.gamma, &e.beta).unwrap() <= 10.0 * c, "{e:?}");
            assert!((on.constant(&e.gamma, &e.beta).unwrap() - e.constant).abs() <= 1e-12 * c.max(1.0));
        }
    }
}
