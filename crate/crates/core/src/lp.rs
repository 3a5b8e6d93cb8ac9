//! Littlewood-Paley resolution of unity on the frequency lattice and the smooth
//! spatial partition of unity on the torus.
//!
//! The radial profile `ψ` equals 1 on `[0,1]`, 0 on `[2,∞)`, and in between is
//! one minus the normalized running integral of the bump `exp(−1/(1−x²))`.
//! `φ(r) = ψ(r) − ψ(2r)` is then supported in `[½, 2]`, and the dyadic pieces
//! `φ̂_0 = ψ(|ξ|)`, `φ̂_j = φ(2^{−j}|ξ|)` telescope to `ψ(2^{−J}|ξ|)`.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OpFn, MAX_DIM};

pub const TABLE_POINTS: usize = 4096;
pub const STANDARD_PROFILE_ID: &str = "bump-cumint-4096";
pub const PROFILE_ENV: &str = "NCPDO_PROFILE";

/// Eight-point Gauss-Legendre rule on [−1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Tabulated transition `C(x)` on `[−1, 1]`, rising from 0 to 1, with slopes
/// for cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Profile {
    id: String,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Profile {
    /// The shipped profile built from the bump integral.
    pub fn standard() -> Arc<Profile> {
        static STD: OnceLock<Arc<Profile>> = OnceLock::new();
        STD.get_or_init(|| Arc::new(Profile::build_standard())).clone()
    }

    /// The profile in effect: the table named by `NCPDO_PROFILE` if set, else the standard one.
    pub fn active() -> Result<Arc<Profile>> {
        static ACTIVE: OnceLock<std::result::Result<Arc<Profile>, String>> = OnceLock::new();
        ACTIVE
            .get_or_init(|| match std::env::var_os(PROFILE_ENV) {
                Some(path) => Profile::from_file(Path::new(&path)).map(Arc::new).map_err(|e| e.to_string()),
                None => Ok(Profile::standard()),
            })
            .clone()
            .map_err(Error::Config)
    }

    fn build_standard() -> Profile {
        let h = 2.0 / (TABLE_POINTS - 1) as f64;
        let mut values = vec![0.0; TABLE_POINTS];
        let mut acc = 0.0;
        for i in 1..TABLE_POINTS {
            let a = -1.0 + (i - 1) as f64 * h;
            let mid = a + 0.5 * h;
            let piece: f64 = GL_NODES
                .iter()
                .zip(GL_WEIGHTS.iter())
                .map(|(t, w)| w * bump(mid + 0.5 * h * t))
                .sum::<f64>()
                * 0.5
                * h;
            acc += piece;
            values[i] = acc;
        }
        let total = acc;
        let slopes = (0..TABLE_POINTS)
            .map(|i| bump(-1.0 + i as f64 * h) / total)
            .collect();
        for v in values.iter_mut() {
            *v /= total;
        }
        values[TABLE_POINTS - 1] = 1.0;
        Profile { id: STANDARD_PROFILE_ID.to_string(), values, slopes }
    }

    /// Read a table of `C` at the `TABLE_POINTS` nodes, one value per line,
    /// optionally followed by the slope `C'` on the same line.
    pub fn from_file(path: &Path) -> Result<Profile> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        let mut slopes = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let mut parts = line.split_whitespace();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("profile table entry {s:?}: {e}")))
            };
            values.push(parse(parts.next().unwrap_or_default())?);
            if let Some(s) = parts.next() {
                slopes.push(parse(s)?);
            }
        }
        if values.len() != TABLE_POINTS {
            return Err(Error::Config(format!(
                "profile table has {} rows, expected {TABLE_POINTS}",
                values.len()
            )));
        }
        if values[0] != 0.0 || values[TABLE_POINTS - 1] != 1.0 {
            return Err(Error::Config("profile table must rise from exactly 0 to exactly 1".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("profile table must be nondecreasing".into()));
        }
        let h = 2.0 / (TABLE_POINTS - 1) as f64;
        if slopes.len() != TABLE_POINTS {
            slopes = (0..TABLE_POINTS)
                .map(|i| {
                    let lo = i.saturating_sub(1);
                    let hi = (i + 1).min(TABLE_POINTS - 1);
                    (values[hi] - values[lo]) / ((hi - lo) as f64 * h)
                })
                .collect();
        }
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Ok(Profile { id: format!("file-{hex}"), values, slopes })
    }

    pub fn write_table(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(TABLE_POINTS * 48);
        for (v, s) in self.values.iter().zip(&self.slopes) {
            out.push_str(&format!("{v:.17e} {s:.17e}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Interpolated transition `C(x)` for `x ∈ [−1, 1]`, clamped to [0, 1].
    fn transition(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let h = 2.0 / (TABLE_POINTS - 1) as f64;
        let u = (x + 1.0) / h;
        let i = (u.floor() as usize).min(TABLE_POINTS - 2);
        let t = u - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        v.clamp(0.0, 1.0)
    }

    /// `ψ(r)`: 1 on `r ≤ 1`, 0 on `r ≥ 2`.
    pub fn psi(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            1.0 - self.transition(2.0 * r - 3.0)
        }
    }

    /// `φ(r) = ψ(r) − ψ(2r)`, supported in `[½, 2]`.
    pub fn phi(&self, r: f64) -> f64 {
        self.psi(r) - self.psi(2.0 * r)
    }
}

/// Highest level `J` with `2^{J+1} ≤ n/2`.
pub fn top_level(n: usize) -> usize {
    let mut j = 0;
    while 1usize << (j + 2) <= n / 2 {
        j += 1;
    }
    j
}

/// The dyadic family `φ̂_0, …, φ̂_J` sampled on the frequency lattice.
#[derive(Debug, Clone)]
pub struct LpFamily {
    grid: GridSpec,
    j_top: usize,
    hat: Vec<Vec<f64>>,
    profile: Arc<Profile>,
}

pub fn build_lp_family(grid: GridSpec) -> Result<LpFamily> {
    LpFamily::with_profile(grid, Profile::active()?)
}

impl LpFamily {
    pub fn with_profile(grid: GridSpec, profile: Arc<Profile>) -> Result<LpFamily> {
        let grid = GridSpec::new(grid.d, grid.n, 1)?;
        let j_top = top_level(grid.n);
        if j_top < 1 {
            return Err(Error::Config("grid too small to host two dyadic bands".into()));
        }
        let r = grid.freq_radius();
        let hat = (0..=j_top)
            .map(|j| r.iter().map(|&x| hat_value(&profile, j, x)).collect())
            .collect();
        Ok(LpFamily { grid, j_top, hat, profile })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn top(&self) -> usize {
        self.j_top
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.hat[j]
    }

    pub fn profile(&self) -> &Arc<Profile> {
        &self.profile
    }

    pub fn profile_id(&self) -> &str {
        self.profile.id()
    }

    /// `φ̂_j` at radius `r`, valid for any level (not only those tabulated).
    pub fn hat_at(&self, j: usize, r: f64) -> f64 {
        hat_value(&self.profile, j, r)
    }

    /// Largest `|Σ_j φ̂_j(ξ) − 1|` over lattice points with `|ξ| ≤ 2^J`.
    pub fn partition_residual(&self) -> f64 {
        let r = self.grid.freq_radius();
        let lim = (1u64 << self.j_top) as f64;
        (0..r.len())
            .filter(|&i| r[i] <= lim)
            .map(|i| (self.hat.iter().map(|h| h[i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Number of lattice points where some level is nonzero outside its annulus.
    pub fn support_violations(&self) -> usize {
        let r = self.grid.freq_radius();
        let mut bad = 0;
        for (j, h) in self.hat.iter().enumerate() {
            let (lo, hi) = annulus(j);
            bad += h
                .iter()
                .zip(&r)
                .filter(|(v, &x)| **v != 0.0 && (x < lo || x > hi))
                .count();
        }
        bad
    }

    /// Spatial low-pass `ψ(|m|)` on the lattice.
    pub fn lowpass(&self) -> Vec<f64> {
        self.grid.freq_radius().iter().map(|&x| self.profile.psi(x)).collect()
    }
}

fn hat_value(profile: &Profile, j: usize, r: f64) -> f64 {
    if j == 0 {
        profile.psi(r)
    } else {
        profile.phi(r / (1u64 << j) as f64)
    }
}

/// Closed radial support of `φ̂_j`.
pub fn annulus(j: usize) -> (f64, f64) {
    if j == 0 {
        (0.0, 2.0)
    } else {
        let s = (1u64 << j) as f64;
        (0.5 * s, 2.0 * s)
    }
}

/// Torus multipliers `m ↦ φ(2^{−j}m)` for `j = 0..=top`, covering the whole lattice.
#[derive(Debug, Clone)]
pub struct TorusBands {
    grid: GridSpec,
    levels: Vec<Vec<f64>>,
}

/// Periodized Littlewood-Paley multipliers. Convolution with the periodized
/// kernel on the torus acts on coefficients as multiplication by `φ(2^{−j}m)`.
/// The level `j = 0` vanishes at `m = 0`; the zero mode is handled separately
/// by the torus norms.
pub fn periodize_lp(fam: &LpFamily) -> TorusBands {
    let grid = fam.grid;
    let r = grid.freq_radius();
    let rmax = r.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut top = 0usize;
    while ((1u64 << (top + 1)) as f64) < rmax {
        top += 1;
    }
    let levels = (0..=top)
        .map(|j| {
            let s = (1u64 << j) as f64;
            r.iter().map(|&x| fam.profile.phi(x / s)).collect()
        })
        .collect();
    TorusBands { grid, levels }
}

impl TorusBands {
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `φ̃_j * f` computed as a coefficient multiplier.
    pub fn apply(&self, j: usize, f: &OpFn) -> OpFn {
        f.multiply_coeffs(&self.levels[j])
    }
}

/// Direct periodic convolution `(k * f)(s) = Σ_t k(s−t) f(t) Δt`, the oracle
/// for multiplier paths on small grids.
pub fn direct_convolution(kernel: &[C64], f: &OpFn) -> OpFn {
    let grid = f.grid();
    let pts = grid.points();
    let s = grid.slots();
    let d = grid.d;
    let w = grid.cell();
    let samples = f.samples();
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    let mut a = [0usize; MAX_DIM];
    let mut b = [0usize; MAX_DIM];
    let mut c = [0usize; MAX_DIM];
    for p in 0..pts {
        grid.unravel(p, &mut a[..d]);
        for t in 0..pts {
            grid.unravel(t, &mut b[..d]);
            for k in 0..d {
                c[k] = (a[k] + grid.n - b[k]) % grid.n;
            }
            let kv = kernel[grid.ravel(&c[..d])];
            for slot in 0..s {
                out[p * s + slot] += kv * samples[t * s + slot] * w;
            }
        }
    }
    OpFn::from_samples(grid, out).expect("shape fixed by grid")
}

/// Spatial kernel of a coefficient multiplier: `k(t) = Σ_m w(m) e^{2πi t·m}`.
pub fn multiplier_kernel(grid: &GridSpec, weights: &[f64]) -> Vec<C64> {
    let g1 = grid.with_q(1);
    let c: Vec<C64> = weights.iter().map(|&w| C64::new(w, 0.0)).collect();
    crate::grid::inverse(&g1, &c)
}

/// Smooth partition of unity `{𝒳_{μ,m}}` of the torus at scale `2^{−μ}`.
///
/// Each bump is a tensor product of periodized one-dimensional bumps
/// `θ(2^μ x − m)`, `θ(y) = S(1−|y|)` with the smooth step `S`, so it vanishes
/// exactly outside the doubled cube `2Q_{μ,m}`.
#[derive(Debug, Clone)]
pub struct UnitResolution {
    grid: GridSpec,
    mu: usize,
    axis: Vec<Vec<f64>>,
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, with `S(t) + S(1−t) = 1`.
pub fn smooth_step(t: f64) -> f64 {
    let e = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = e(t);
        a / (a + e(1.0 - t))
    }
}

/// One-dimensional bump `S(1−|y|)`: 1 at 0, supported in `(−1, 1)`, and its
/// integer translates sum to 1.
pub fn unit_bump(y: f64) -> f64 {
    smooth_step(1.0 - y.abs())
}

pub fn build_unit_resolution(grid: GridSpec, mu: usize) -> Result<UnitResolution> {
    let cells = 1usize << mu;
    if cells > grid.n / 4 {
        return Err(Error::Config(format!(
            "scale 2^-{mu} is too fine for {} points per axis",
            grid.n
        )));
    }
    let scale = cells as f64;
    let axis = (0..cells)
        .map(|m| {
            (0..grid.n)
                .map(|i| {
                    let x = i as f64 / grid.n as f64;
                    (-1..=1)
                        .map(|k: i64| unit_bump(scale * (x - k as f64) - m as f64))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(UnitResolution { grid: grid.with_q(1), mu, axis })
}

impl UnitResolution {
    pub fn cells_per_axis(&self) -> usize {
        1 << self.mu
    }

    /// Samples of the bump with cube index `m` (each entry in `0..2^μ`).
    pub fn bump(&self, m: &[usize]) -> Vec<f64> {
        let g = self.grid;
        let mut ix = [0usize; MAX_DIM];
        (0..g.points())
            .map(|p| {
                g.unravel(p, &mut ix[..g.d]);
                (0..g.d).map(|k| self.axis[m[k]][ix[k]]).product()
            })
            .collect()
    }

    /// Largest `|Σ_m 𝒳_{μ,m}(s) − 1|` over the grid.
    pub fn partition_residual(&self) -> f64 {
        let g = self.grid;
        let mut ix = [0usize; MAX_DIM];
        let mut worst = 0.0f64;
        for p in 0..g.points() {
            g.unravel(p, &mut ix[..g.d]);
            let total: f64 = (0..g.d)
                .map(|k| self.axis.iter().map(|a| a[ix[k]]).sum::<f64>())
                .product();
            worst = worst.max((total - 1.0).abs());
        }
        worst
    }

    /// Whether the bump `m` vanishes at every sample outside `2Q_{μ,m}`.
    pub fn support_exact(&self, m: &[usize]) -> bool {
        let g = self.grid;
        let half = 1.0 / self.cells_per_axis() as f64;
        let b = self.bump(m);
        let mut x = [0.0; MAX_DIM];
        (0..g.points()).all(|p| {
            g.coord(p, &mut x[..g.d]);
            let inside = (0..g.d).all(|k| {
                let c = m[k] as f64 * half;
                torus_dist(x[k], c) < half
            });
            inside || b[p] == 0.0
        })
    }
}

/// Distance between two points of the circle `[0,1)`.
pub fn torus_dist(a: f64, b: f64) -> f64 {
    let t = (a - b).rem_euclid(1.0);
    t.min(1.0 - t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(d: usize, n: usize) -> LpFamily {
        LpFamily::with_profile(GridSpec::new(d, n, 1).unwrap(), Profile::standard()).unwrap()
    }

    #[test]
    fn top_level_rule() {
        assert_eq!(top_level(8), 1);
        assert_eq!(top_level(16), 2);
        assert_eq!(top_level(64), 4);
        assert_eq!(top_level(512), 7);
    }

    #[test]
    fn profile_endpoints_and_positivity() {
        let p = Profile::standard();
        assert_eq!(p.psi(0.0), 1.0);
        assert_eq!(p.psi(1.0), 1.0);
        assert_eq!(p.psi(2.0), 0.0);
        assert_eq!(p.phi(0.5), 0.0);
        assert_eq!(p.phi(2.0), 0.0);
        for k in 1..1000 {
            let r = 0.51 + 1.47 * k as f64 / 1000.0;
            assert!(p.phi(r) > 0.0, "phi({r}) not positive");
        }
        let mut last = 1.0;
        for k in 0..=1000 {
            let v = p.psi(1.0 + k as f64 / 1000.0);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn interpolation_matches_quadrature() {
        let p = Profile::standard();
        // independent check: composite Simpson integral of the bump
        let simpson = |a: f64, b: f64, k: usize| {
            let h = (b - a) / k as f64;
            let mut s = bump(a) + bump(b);
            for i in 1..k {
                s += bump(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let total = simpson(-1.0, 1.0, 20000);
        for &x in &[-0.7, -0.2, 0.0, 0.33, 0.91] {
            let want = simpson(-1.0, x, 20000) / total;
            assert!((p.transition(x) - want).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn zero_frequency_only_in_level_zero() {
        let f = fam(2, 32);
        let z = f.grid().zero_freq();
        assert_eq!(f.level(0)[z], 1.0);
        for j in 1..=f.top() {
            assert_eq!(f.level(j)[z], 0.0);
        }
    }

    #[test]
    fn partition_and_supports() {
        for &(d, n) in &[(1, 64), (2, 32), (2, 64), (3, 16)] {
            let f = fam(d, n);
            assert!(f.partition_residual() <= 1e-10);
            assert_eq!(f.support_violations(), 0);
        }
    }

    #[test]
    fn at_most_two_levels_on_dyadic_spheres() {
        let f = fam(1, 128);
        let g = f.grid();
        for j in 0..=f.top() {
            let idx = g.freq_index(&[1i64 << j]).unwrap();
            let live = (0..=f.top()).filter(|&k| f.level(k)[idx] != 0.0).count();
            assert!(live <= 2);
        }
    }

    #[test]
    fn derivative_bounds_scale_with_level() {
        // k-th central difference of φ̂_j scaled by 2^{jk} stays uniform in j
        let f = fam(1, 512);
        let g = f.grid();
        for order in 1..=4usize {
            let consts: Vec<f64> = (2..=f.top())
                .map(|j| {
                    let vals = f.level(j);
                    let mut worst = 0.0f64;
                    for i in 2..g.n - 2 {
                        let w = match order {
                            1 => (vals[i + 1] - vals[i - 1]) / 2.0,
                            2 => vals[i + 1] - 2.0 * vals[i] + vals[i - 1],
                            3 => (vals[i + 2] - 2.0 * vals[i + 1] + 2.0 * vals[i - 1] - vals[i - 2]) / 2.0,
                            _ => vals[i + 2] - 4.0 * vals[i + 1] + 6.0 * vals[i] - 4.0 * vals[i - 1] + vals[i - 2],
                        };
                        worst = worst.max(w.abs());
                    }
                    worst * (1u64 << (j * order)) as f64
                })
                .collect();
            let hi = consts.iter().cloned().fold(0.0, f64::max);
            let last = *consts.last().unwrap();
            assert!(hi <= 3.0 * last, "order {order}: {consts:?}");
        }
    }

    #[test]
    fn periodized_multiplier_matches_direct_convolution() {
        let f = fam(2, 8);
        let bands = periodize_lp(&f);
        let g = GridSpec::new(2, 8, 2).unwrap();
        let mut rng = crate::rng::seeded(11);
        let x = OpFn::from_samples(g, crate::rng::random_samples(&g, &mut rng)).unwrap();
        for j in 0..=bands.top() {
            let kern = multiplier_kernel(&g, bands.level(j));
            let a = direct_convolution(&kern, &x);
            let b = bands.apply(j, &x);
            let err = a.samples().iter().zip(b.samples()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "j={j} err={err}");
        }
        assert_eq!(bands.level(0)[g.zero_freq()], 0.0);
    }

    #[test]
    fn unit_resolution_partitions_and_localizes() {
        let g = GridSpec::new(2, 32, 1).unwrap();
        for mu in 0..=3 {
            let u = build_unit_resolution(g, mu).unwrap();
            assert!(u.partition_residual() <= 1e-10, "mu={mu}");
            let cells = u.cells_per_axis();
            for m0 in 0..cells {
                for m1 in 0..cells {
                    assert!(u.support_exact(&[m0, m1]));
                }
            }
        }
        let u = build_unit_resolution(g, 2).unwrap();
        let center = g.ravel(&[8, 16]);
        let own = u.bump(&[1, 2])[center];
        for m0 in 0..4 {
            for m1 in 0..4 {
                assert!(u.bump(&[m0, m1])[center] <= own);
            }
        }
        assert!(build_unit_resolution(g, 4).is_err());
    }
}
