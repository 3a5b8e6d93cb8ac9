//! Shipped example symbols used by the checks, sweeps and CLI.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lp::{top_level, Profile};
use crate::symbol::{Claim, SFactor, Symbol, Term, XiFactor};

pub const NAMES: &[&str] = &[
    "regular-half",
    "exotic",
    "exotic-first-band",
    "s0-product",
    "s0-difference",
    "s0-mixed",
    "bessel-mixed",
];

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn band(profile: &Arc<Profile>, j: usize) -> XiFactor {
    let p = profile.clone();
    XiFactor::scalar(move |x| {
        let r = radius(x);
        C64::new(if j == 0 { p.psi(r) } else { p.phi(r / (1u64 << j) as f64) }, 0.0)
    })
}

/// Zero-order homogeneous profile `h(ξ/|ξ|)` cut off by `ψ(2^{−J}|ξ|)`, zero at the origin.
fn homogeneous(profile: &Arc<Profile>, grid: &GridSpec, h: fn(f64, f64) -> f64) -> XiFactor {
    let p = profile.clone();
    let scale = (1u64 << top_level(grid.n)) as f64;
    XiFactor::scalar(move |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            return C64::new(0.0, 0.0);
        }
        C64::new(h(x[0], x[1]) / r2 * p.psi(radius(x) / scale), 0.0)
    })
}

fn need_2d(grid: &GridSpec, name: &str) -> Result<()> {
    if grid.d != 2 {
        return Err(Error::Config(format!("exemplar {name} is defined for d = 2")));
    }
    Ok(())
}

/// `σ = Σ_{j=0}^{J} a_j(s) φ̂_j(ξ)` with
/// `a_j(s) = (1 + 0.3i sin 2πf_j s_2) / (1 + 0.5 cos 2πf_j s_1)`, `f_j = max(1, round 2^{j/2})`;
/// s-frequencies grow like `(1+|ξ|)^{1/2}`, so the class is `S⁰_{1,½}`.
pub fn regular_half(grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
    need_2d(&grid, "regular-half")?;
    let terms = (0..=top_level(grid.n))
        .map(|j| {
            let f = (2f64.powf(j as f64 / 2.0)).round().max(1.0);
            let s = SFactor::scalar_fn(&grid, |x| {
                C64::new(1.0, 0.3 * (2.0 * PI * f * x[1]).sin()) / (1.0 + 0.5 * (2.0 * PI * f * x[0]).cos())
            });
            Term { s, xi: band(profile, j) }
        })
        .collect();
    Symbol::separable(grid, Claim::new(0.0, 1.0, 0.5)?, terms)
}

/// `σ = Σ_{j=1}^{J} e^{2πi 2^j s_1} φ̂_j(ξ)`, in `S⁰_{1,1}`.
pub fn exotic(grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
    exotic_bands(grid, profile, top_level(grid.n))
}

/// The exotic symbol truncated to bands `1..=last`.
pub fn exotic_bands(grid: GridSpec, profile: &Arc<Profile>, last: usize) -> Result<Symbol> {
    let terms = (1..=last.min(top_level(grid.n)))
        .map(|j| {
            let k = (1u64 << j) as f64;
            let s = SFactor::scalar_fn(&grid, |x| C64::from_polar(1.0, 2.0 * PI * k * x[0]));
            Term { s, xi: band(profile, j) }
        })
        .collect();
    Symbol::separable(grid, Claim::new(0.0, 1.0, 1.0)?, terms)
}

/// `(2 + cos 2πs_2) · ξ_1ξ_2/|ξ|² · ψ(2^{−J}|ξ|)`, in `S⁰_{1,0}`.
pub fn s0_product(grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
    need_2d(&grid, "s0-product")?;
    let s = SFactor::scalar_fn(&grid, |x| C64::new(2.0 + (2.0 * PI * x[1]).cos(), 0.0));
    let xi = homogeneous(profile, &grid, |a, b| a * b);
    Symbol::separable(grid, Claim::new(0.0, 1.0, 0.0)?, vec![Term { s, xi }])
}

/// `(2 + cos 2πs_2) · (ξ_1² − ξ_2²)/|ξ|² · ψ(2^{−J}|ξ|)`, in `S⁰_{1,0}`.
pub fn s0_difference(grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
    need_2d(&grid, "s0-difference")?;
    let s = SFactor::scalar_fn(&grid, |x| C64::new(2.0 + (2.0 * PI * x[1]).cos(), 0.0));
    let xi = homogeneous(profile, &grid, |a, b| a * a - b * b);
    Symbol::separable(grid, Claim::new(0.0, 1.0, 0.0)?, vec![Term { s, xi }])
}

/// `(2 + cos 2πs_2) · (ξ_1ξ_2 + ξ_1²)/|ξ|² · ψ(2^{−J}|ξ|)`, in `S⁰_{1,0}`.
pub fn s0_mixed(grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
    need_2d(&grid, "s0-mixed")?;
    let s = SFactor::scalar_fn(&grid, |x| C64::new(2.0 + (2.0 * PI * x[1]).cos(), 0.0));
    let xi = homogeneous(profile, &grid, |a, b| a * b + a * a);
    Symbol::separable(grid, Claim::new(0.0, 1.0, 0.0)?, vec![Term { s, xi }])
}

/// `(1.5 + sin 2πs_1 cos 2πs_2)(1+|ξ|²)^{−1/4}`, in `S^{−1/2}_{1,0}`.
pub fn bessel_mixed(grid: GridSpec) -> Result<Symbol> {
    need_2d(&grid, "bessel-mixed")?;
    let s = SFactor::scalar_fn(&grid, |x| C64::new(1.5 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos(), 0.0));
    let xi = XiFactor::scalar(|x| C64::new((1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(-0.25), 0.0));
    Symbol::separable(grid, Claim::new(-0.5, 1.0, 0.0)?, vec![Term { s, xi }])
}

/// `(1+|ξ|²)^{α/2}` as a multiplier symbol of order α.
pub fn bessel(grid: GridSpec, alpha: f64) -> Result<Symbol> {
    Symbol::multiplier(grid, Claim::new(alpha, 1.0, 0.0)?, move |x| {
        C64::new((1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(alpha / 2.0), 0.0)
    })
}

pub fn by_name(name: &str, grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
    match name {
        "regular-half" => regular_half(grid, profile),
        "exotic" => exotic(grid, profile),
        "exotic-first-band" => exotic_bands(grid, profile, 1),
        "s0-product" => s0_product(grid, profile),
        "s0-difference" => s0_difference(grid, profile),
        "s0-mixed" => s0_mixed(grid, profile),
        "bessel-mixed" => bessel_mixed(grid),
        other => Err(Error::Config(format!(
            "unknown exemplar {other}; known: {}",
            NAMES.join(", ")
        ))),
    }
}

/// Pairs `(name, σ1, σ2)` for the composition checks.
pub fn composition_pairs(grid: GridSpec, profile: &Arc<Profile>) -> Result<Vec<(String, Symbol, Symbol)>> {
    need_2d(&grid, "composition pairs")?;
    let one = SFactor::one(&grid);
    let bessel_xi = |e: f64| XiFactor::scalar(move |x| C64::new((1.0 + x[0] * x[0] + x[1] * x[1]).powf(e), 0.0));
    let c = |o: f64| Claim::new(o, 1.0, 0.0);

    let a_xi = Symbol::separable(grid, c(-1.0)?, vec![Term { s: one.clone(), xi: bessel_xi(-0.5) }])?;
    let b_s = Symbol::separable(
        grid,
        c(0.0)?,
        vec![Term {
            s: SFactor::scalar_fn(&grid, |x| {
                C64::new(2.0 + (2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * x[1]).sin(), 0.0)
            }),
            xi: XiFactor::one(),
        }],
    )?;

    let s0 = s0_mixed(grid, profile)?;
    let sm1 = Symbol::separable(
        grid,
        c(-1.0)?,
        vec![Term {
            s: SFactor::scalar_fn(&grid, |x| C64::new(1.5 + (2.0 * PI * x[0]).sin(), 0.0)),
            xi: bessel_xi(-0.5),
        }],
    )?;

    let bs1 = Symbol::separable(
        grid,
        c(-1.0)?,
        vec![Term {
            s: SFactor::scalar_fn(&grid, |x| C64::new(1.5 + (2.0 * PI * x[1]).cos(), 0.0)),
            xi: bessel_xi(-0.5),
        }],
    )?;
    let bs2 = bessel_mixed(grid)?;

    let smooth = Symbol::separable(
        grid,
        c(0.0)?,
        vec![Term {
            s: one,
            xi: XiFactor::scalar(|x| C64::new((2.0 + x[0]) / (4.0 + x[0] * x[0] + x[1] * x[1]).sqrt(), 0.0)),
        }],
    )?;
    let wave = Symbol::separable(
        grid,
        c(0.0)?,
        vec![Term {
            s: SFactor::scalar_fn(&grid, |x| C64::new(2.0 + (2.0 * PI * (x[0] + x[1])).cos(), 0.0)),
            xi: XiFactor::one(),
        }],
    )?;

    Ok(vec![
        ("multiplier-then-pointwise".into(), a_xi, b_s),
        ("s0-then-bessel".into(), s0, sm1),
        ("bessel-then-bessel".into(), bs1, bs2),
        ("smooth-then-pointwise".into(), smooth, wave),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::class::check_symbol_class;

    #[test]
    fn exemplars_build_and_pass_their_claims() {
        let g = GridSpec::new(2, 32, 1).unwrap();
        let p = Profile::standard();
        for name in NAMES {
            let s = by_name(name, g, &p).unwrap();
            let r = check_symbol_class(&s, 1, 1).unwrap();
            assert!(r.pass, "{name}: {}", r.max_constant);
        }
        assert!(by_name("nope", g, &p).is_err());
    }

    #[test]
    fn exotic_has_one_term_per_band() {
        let g = GridSpec::new(2, 64, 1).unwrap();
        let s = exotic(g, &Profile::standard()).unwrap();
        assert_eq!(s.terms().unwrap().len(), top_level(64));
    }
}
