//! Atoms and subatoms on the torus: generation, validation, synthesis, and the
//! weighted image estimates for pseudo-differential operators.
//!
//! Cubes `Q_{μ,l}` are centered at `2^{−μ}l` (mod 1) with side `2^{−μ}`. Sizes are
//! measured with the unnormalized trace: `τ(∫|a|²)^{1/2} = Tr (∫ a*a)^{1/2}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OpFn, MAX_DIM};
use crate::lp::smooth_step;
use crate::mat;
use crate::norms::{l1_l2c_norm, triebel_lizorkin_norm, Exponent, NormContext};
use crate::pdo::{nyquist_mask, Operator, Side, DEFAULT_BUDGET_BYTES};
use crate::symbol::{derivative_weights, multi_indices, Repr, SFactor, Symbol, Term};

/// Shipped ceiling for `‖Σλ_j a_j‖_{F_1^{α,c}} / Σ|λ_j|`.
pub const SYNTH_CEILING: f64 = 10.0;
/// Largest admitted fraction of `∫‖a‖²` outside the doubled cube.
pub const LEAKAGE_TOL: f64 = 1e-9;
/// Moments must be below this multiple of `(∫‖a‖²)^{1/2}`.
pub const MOMENT_TOL: f64 = 1e-9;
/// Gaussian envelope width as a fraction of the cube side (never below two samples).
pub const ENVELOPE_WIDTH: f64 = 0.065;
/// A cube side must span at least this many samples per axis.
pub const MIN_CUBE_SAMPLES: usize = 16;
/// Generated atoms meet their tightest size condition at this fraction.
pub const MARGIN: f64 = 0.8;
/// Half-width of the neighborhood `c + ½Q_{0,0}` a far-support symbol must avoid.
pub const FAR_ZONE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomKind {
    /// `h_1^c`-atom: support in `Q`, `τ(∫|a|²)^{1/2} ≤ |Q|^{−1/2}`, mean zero if `|Q| < 1`.
    H1c,
    /// `(α,1)`-atom: support in `2Q_{0,k}`, `τ(∫|D^γ b|²)^{1/2} ≤ 1` for `|γ| ≤ K`.
    Alpha1,
    /// `(α,Q)`-subatom: support in `2Q`, derivative sizes `|Q|^{α/d−|γ|/d}`, moments to order `L`.
    Subatom,
    /// `(α,Q_{k,m})`-atom: a combination of nested subatoms.
    Composite,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    pub mu: usize,
    pub l: Vec<i64>,
}

impl Cube {
    pub fn new(mu: usize, l: Vec<i64>) -> Cube {
        Cube { mu, l }
    }

    pub fn side(&self) -> f64 {
        (-(self.mu as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.l.len() as i32)
    }

    pub fn center(&self) -> Vec<f64> {
        self.l.iter().map(|&k| (k as f64 * self.side()).rem_euclid(1.0)).collect()
    }

    /// Signed offsets `s − c` wrapped to `[−½, ½)`.
    fn offset(&self, s: &[f64], out: &mut [f64]) {
        let c = self.center();
        for k in 0..s.len() {
            out[k] = (s[k] - c[k] + 0.5).rem_euclid(1.0) - 0.5;
        }
    }

    /// Whether `s` lies in the concentric cube `factor·Q`.
    pub fn contains(&self, s: &[f64], factor: f64) -> bool {
        let mut x = [0.0; MAX_DIM];
        self.offset(s, &mut x[..s.len()]);
        x[..s.len()].iter().all(|v| v.abs() <= factor * self.side() / 2.0)
    }

    /// `Q ⊂ 2·outer` and at least as fine.
    pub fn nested_in(&self, outer: &Cube) -> bool {
        if self.mu < outer.mu {
            return false;
        }
        let mut x = [0.0; MAX_DIM];
        let c = self.center();
        outer.offset(&c, &mut x[..c.len()]);
        x[..c.len()].iter().all(|v| v.abs() + self.side() / 2.0 <= outer.side() + 1e-15)
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.l.len() != grid.d {
            return Err(Error::Config(format!("cube index has {} entries, grid has d = {}", self.l.len(), grid.d)));
        }
        if self.mu >= 31 || (grid.n >> self.mu) < MIN_CUBE_SAMPLES {
            return Err(Error::Config(format!(
                "cube of level {} is not resolvable on {} points (side must span {MIN_CUBE_SAMPLES} samples)",
                self.mu, grid.n
            )));
        }
        Ok(())
    }
}

/// Default smoothness and moment orders: two above the minima
/// `K ≥ ([α]+1)_+`, `L ≥ max([−α], −1)`.
pub fn default_orders(alpha: f64) -> (usize, i64) {
    let (k, l) = minimal_orders(alpha);
    (k + 2, l + 2)
}

pub fn minimal_orders(alpha: f64) -> (usize, i64) {
    let k = (alpha.floor() as i64 + 1).max(0) as usize;
    let l = ((-alpha).floor() as i64).max(-1);
    (k, l)
}

#[derive(Clone, Debug)]
pub struct AtomSpec {
    pub kind: AtomKind,
    pub cube: Cube,
    /// Smoothness order `K`.
    pub smoothness: usize,
    /// Moment order `L` (−1: none).
    pub moments: i64,
    pub payload: OpFn,
    /// `(d_{μ,l}, subatom)` for composite atoms.
    pub parts: Vec<(C64, AtomSpec)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Template {
    /// Chosen from the kind and moment order.
    #[default]
    Auto,
    Constant,
    /// Gaussian envelope.
    Bump,
    /// `∂_axis^order` of the Gaussian envelope.
    Hermite { axis: usize, order: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixShape {
    #[default]
    Identity,
    /// `E_11`.
    Corner,
    /// `E_1q`, the non-normal rank-one unit.
    Upper,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomRecipe {
    pub kind: AtomKind,
    pub mu: usize,
    pub l: Vec<i64>,
    #[serde(default)]
    pub template: Template,
    #[serde(default)]
    pub matrix: MatrixShape,
    /// Extra factor applied after normalization (1 keeps the atom valid).
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub smoothness: Option<usize>,
    #[serde(default)]
    pub moments: Option<i64>,
    #[serde(default)]
    pub parts: Vec<PartRecipe>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartRecipe {
    pub coefficient: f64,
    pub atom: AtomRecipe,
}

impl AtomRecipe {
    pub fn new(kind: AtomKind, mu: usize, l: Vec<i64>) -> AtomRecipe {
        AtomRecipe {
            kind,
            mu,
            l,
            template: Template::Auto,
            matrix: MatrixShape::Identity,
            scale: 1.0,
            smoothness: None,
            moments: None,
            parts: Vec::new(),
        }
    }
}

fn hermite(order: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if order == 0 {
        return a;
    }
    for k in 1..order {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

fn matrix_of(shape: MatrixShape, q: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); q * q];
    match shape {
        MatrixShape::Identity => (0..q).for_each(|i| m[i * q + i] = C64::new(1.0, 0.0)),
        MatrixShape::Corner => m[0] = C64::new(1.0, 0.0),
        MatrixShape::Upper => m[q - 1] = C64::new(1.0, 0.0),
    }
    m
}

fn resolve_orders(kind: AtomKind, mu: usize, alpha: f64, recipe: &AtomRecipe) -> Result<(usize, i64)> {
    let (dk, dl) = default_orders(alpha);
    let (k, l) = match kind {
        AtomKind::H1c => (0, if mu > 0 { 0 } else { -1 }),
        AtomKind::Alpha1 => (recipe.smoothness.unwrap_or(dk), -1),
        AtomKind::Subatom | AtomKind::Composite => (recipe.smoothness.unwrap_or(dk), recipe.moments.unwrap_or(dl)),
    };
    let (mk, ml) = minimal_orders(alpha);
    let needs_moments = matches!(kind, AtomKind::Subatom | AtomKind::Composite);
    if kind != AtomKind::H1c && (k < mk || (needs_moments && l < ml)) {
        return Err(Error::Validation(format!(
            "orders K = {k}, L = {l} below the minima K ≥ {mk}, L ≥ {ml} for α = {alpha}"
        )));
    }
    Ok((k, l))
}

/// Build an atom from a recipe, normalized so its tightest size condition is
/// met at [`MARGIN`] (times `recipe.scale`).
pub fn generate(grid: GridSpec, alpha: f64, recipe: &AtomRecipe) -> Result<AtomSpec> {
    let cube = Cube::new(recipe.mu, recipe.l.clone());
    cube.check(&grid)?;
    let (k, l) = resolve_orders(recipe.kind, recipe.mu, alpha, recipe)?;
    if recipe.kind == AtomKind::Composite {
        return generate_composite(grid, alpha, recipe, cube, k, l);
    }
    let d = grid.d;
    let template = match recipe.template {
        Template::Auto => match recipe.kind {
            AtomKind::Subatom if l >= 0 => Template::Hermite { axis: 0, order: (l + 1) as usize },
            AtomKind::H1c if recipe.mu > 0 => Template::Hermite { axis: 0, order: 1 },
            AtomKind::H1c => Template::Constant,
            _ => Template::Bump,
        },
        t => t,
    };
    if let Template::Hermite { axis, .. } = template {
        if axis >= d {
            return Err(Error::Config(format!("template axis {axis} out of range for d = {d}")));
        }
    }
    let scalar = grid.with_q(1);
    let w = (ENVELOPE_WIDTH * cube.side()).max(2.0 / grid.n as f64);
    let support = if recipe.kind == AtomKind::H1c { 1.0 } else { 2.0 };
    let envelope = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * w * w)).exp();
    let mut t = vec![0.0f64; scalar.points()];
    let mut window = vec![0.0f64; scalar.points()];
    let mut offsets = vec![0.0f64; scalar.points() * d];
    for p in 0..scalar.points() {
        let mut s = [0.0; MAX_DIM];
        scalar.coord(p, &mut s[..d]);
        let x = &mut offsets[p * d..(p + 1) * d];
        cube.offset(&s[..d], x);
        if !cube.contains(&s[..d], support) {
            continue;
        }
        let g = envelope(x);
        window[p] = g;
        t[p] = match template {
            Template::Constant => 1.0,
            Template::Bump | Template::Auto => g,
            Template::Hermite { axis, order } => hermite(order, x[axis] / w) * g,
        };
    }
    // band-limit, then restore exact moments against envelope·monomials
    let c: Vec<C64> = t.iter().map(|v| C64::new(*v, 0.0)).collect();
    let bl = OpFn::from_samples(scalar, c)?.multiply_coeffs(&nyquist_mask(&scalar));
    let mut t: Vec<f64> = bl.samples().iter().map(|z| z.re).collect();
    let moment_order = if recipe.kind == AtomKind::H1c { l } else if recipe.kind == AtomKind::Subatom { l } else { -1 };
    if moment_order >= 0 && template != Template::Constant {
        remove_moments(&mut t, &window, &offsets, d, moment_order as usize)?;
    }
    let m = matrix_of(recipe.matrix, grid.q);
    let vals: Vec<C64> = t.iter().map(|v| C64::new(*v, 0.0)).collect();
    let raw = OpFn::from_samples(grid, vals.iter().flat_map(|v| m.iter().map(move |e| v * e)).collect())?;
    let mut spec = AtomSpec { kind: recipe.kind, cube, smoothness: k, moments: l, payload: raw, parts: Vec::new() };
    let worst = size_entries(&spec, alpha)?.iter().map(|e| e.value / e.bound).fold(0.0, f64::max);
    if worst == 0.0 {
        return Err(Error::Data("generated atom vanishes".into()));
    }
    spec.payload = spec.payload.scale(C64::new(MARGIN * recipe.scale / worst, 0.0));
    Ok(spec)
}

fn generate_composite(grid: GridSpec, alpha: f64, recipe: &AtomRecipe, cube: Cube, k: usize, l: i64) -> Result<AtomSpec> {
    if recipe.parts.is_empty() {
        return Err(Error::Validation("composite atom needs at least one subatom".into()));
    }
    let mut parts = Vec::new();
    let mut sum = OpFn::zeros(grid);
    for p in &recipe.parts {
        if p.atom.kind != AtomKind::Subatom {
            return Err(Error::Validation("composite atoms are built from subatoms".into()));
        }
        let mut r = p.atom.clone();
        r.smoothness = r.smoothness.or(Some(k));
        r.moments = r.moments.or(Some(l));
        let a = generate(grid, alpha, &r)?;
        sum = sum.lincomb(C64::new(1.0, 0.0), &a.payload, C64::new(p.coefficient, 0.0))?;
        parts.push((C64::new(p.coefficient, 0.0), a));
    }
    let mut spec = AtomSpec { kind: AtomKind::Composite, cube, smoothness: k, moments: l, payload: sum, parts };
    let c = composite_check(&spec, alpha)?;
    let worst = (c.coefficient_l2 / c.coefficient_bound).max(c.bessel_norm / c.bessel_bound);
    if worst == 0.0 {
        return Err(Error::Data("composite atom vanishes".into()));
    }
    let f = MARGIN * recipe.scale / worst;
    spec.payload = spec.payload.scale(C64::new(f, 0.0));
    for p in spec.parts.iter_mut() {
        p.0 *= f;
    }
    Ok(spec)
}

/// Subtract `Σ_β c_β·window·x^β` so that `∫ x^β t = 0` for `|β| ≤ order`.
fn remove_moments(t: &mut [f64], window: &[f64], offsets: &[f64], d: usize, order: usize) -> Result<()> {
    let betas = multi_indices(d, order);
    let mono = |p: usize, b: &[usize]| -> f64 { (0..d).map(|k| offsets[p * d + k].powi(b[k] as i32)).product() };
    let nb = betas.len();
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    let mut rhs = DVector::<f64>::zeros(nb);
    for p in 0..t.len() {
        if window[p] == 0.0 && t[p] == 0.0 {
            continue;
        }
        let m: Vec<f64> = betas.iter().map(|b| mono(p, b)).collect();
        for i in 0..nb {
            rhs[i] += m[i] * t[p];
            for j in 0..nb {
                gram[(i, j)] += m[i] * m[j] * window[p];
            }
        }
    }
    let c = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Data("moment system is singular".into()))?;
    for p in 0..t.len() {
        if window[p] != 0.0 {
            let corr: f64 = (0..nb).map(|i| c[i] * mono(p, &betas[i])).sum();
            t[p] -= corr * window[p];
        }
    }
    Ok(())
}

/// `D^γ f` by spectral differentiation.
pub fn spectral_derivative(f: &OpFn, gamma: &[usize]) -> OpFn {
    if gamma.iter().all(|&g| g == 0) {
        return f.clone();
    }
    let g = f.grid();
    let s = g.slots();
    let w = derivative_weights(&g, gamma);
    let mut c = f.coeffs().to_vec();
    c.par_chunks_mut(s).zip(w.par_iter()).for_each(|(o, x)| o.iter_mut().for_each(|z| *z *= x));
    OpFn::from_coeffs(g, c).expect("length fixed by grid")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeEntry {
    pub gamma: Vec<usize>,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEntry {
    pub beta: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositeCheck {
    pub coefficient_l2: f64,
    pub coefficient_bound: f64,
    pub bessel_norm: f64,
    pub bessel_bound: f64,
    pub nested: bool,
    pub parts_valid: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomReport {
    pub kind: AtomKind,
    pub cube: Cube,
    pub alpha: f64,
    pub smoothness: usize,
    pub moment_order: i64,
    pub leakage: f64,
    pub support_ok: bool,
    pub sizes: Vec<SizeEntry>,
    pub size_ok: bool,
    pub moments: Vec<MomentEntry>,
    pub moment_tol: f64,
    pub moments_ok: bool,
    pub composite: Option<CompositeCheck>,
    pub pass: bool,
}

fn size_entries(spec: &AtomSpec, alpha: f64) -> Result<Vec<SizeEntry>> {
    let d = spec.payload.grid().d;
    let vol = spec.cube.volume();
    let gammas: Vec<Vec<usize>> = match spec.kind {
        AtomKind::H1c => vec![vec![0; d]],
        AtomKind::Alpha1 | AtomKind::Subatom => multi_indices(d, spec.smoothness),
        AtomKind::Composite => return Ok(Vec::new()),
    };
    gammas
        .into_iter()
        .map(|gamma| {
            let order: usize = gamma.iter().sum();
            let bound = match spec.kind {
                AtomKind::H1c => vol.powf(-0.5),
                AtomKind::Alpha1 => 1.0,
                _ => vol.powf(alpha / d as f64 - order as f64 / d as f64),
            };
            let value = l1_l2c_norm(&spectral_derivative(&spec.payload, &gamma))?;
            Ok(SizeEntry { gamma, value, bound })
        })
        .collect()
}

fn composite_check(spec: &AtomSpec, alpha: f64) -> Result<CompositeCheck> {
    let vol = spec.cube.volume();
    let coefficient_l2 = spec.parts.iter().map(|(c, _)| c.norm_sqr()).sum::<f64>().sqrt();
    let bessel_norm = l1_l2c_norm(&crate::norms::bessel_potential(&spec.payload, alpha))?;
    let nested = spec.parts.iter().all(|(_, a)| a.cube.nested_in(&spec.cube));
    Ok(CompositeCheck {
        coefficient_l2,
        coefficient_bound: vol.powf(-0.5),
        bessel_norm,
        bessel_bound: vol.powf(-0.5),
        nested,
        parts_valid: true,
    })
}

fn mass_outside(spec: &AtomSpec, factor: f64) -> f64 {
    let f = &spec.payload;
    let g = f.grid();
    let s = g.slots();
    let d = g.d;
    let (mut total, mut out) = (0.0, 0.0);
    for (p, a) in f.samples().chunks(s).enumerate() {
        let m: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        total += m;
        let mut x = [0.0; MAX_DIM];
        g.coord(p, &mut x[..d]);
        if !spec.cube.contains(&x[..d], factor) {
            out += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

fn moment_entries(spec: &AtomSpec, order: i64) -> Vec<MomentEntry> {
    if order < 0 {
        return Vec::new();
    }
    let f = &spec.payload;
    let g = f.grid();
    let s = g.slots();
    let d = g.d;
    let cell = g.cell();
    let offs: Vec<[f64; MAX_DIM]> = (0..g.points())
        .map(|p| {
            let mut x = [0.0; MAX_DIM];
            let mut o = [0.0; MAX_DIM];
            g.coord(p, &mut x[..d]);
            spec.cube.offset(&x[..d], &mut o[..d]);
            o
        })
        .collect();
    multi_indices(d, order as usize)
        .into_iter()
        .map(|beta| {
            let mut acc = vec![C64::new(0.0, 0.0); s];
            for (p, a) in f.samples().chunks(s).enumerate() {
                let w: f64 = (0..d).map(|k| offs[p][k].powi(beta[k] as i32)).product::<f64>() * cell;
                for (u, v) in acc.iter_mut().zip(a) {
                    *u += v * w;
                }
            }
            MomentEntry { beta, value: mat::frob_sq(&acc).sqrt() }
        })
        .collect()
}

/// Check support, size and moment conditions of `spec` at smoothness `α`.
pub fn validate_atom(spec: &AtomSpec, alpha: f64) -> Result<AtomReport> {
    let grid = spec.payload.grid();
    spec.cube.check(&grid)?;
    if spec.kind != AtomKind::H1c {
        let (mk, ml) = minimal_orders(alpha);
        let needs_moments = matches!(spec.kind, AtomKind::Subatom | AtomKind::Composite);
        if spec.smoothness < mk || (needs_moments && spec.moments < ml) {
            return Err(Error::Validation(format!(
                "orders K = {}, L = {} below the minima K ≥ {mk}, L ≥ {ml} for α = {alpha}",
                spec.smoothness, spec.moments
            )));
        }
    }
    let support_factor = if spec.kind == AtomKind::H1c { 1.0 } else { 2.0 };
    let leakage = if spec.kind == AtomKind::Composite { 0.0 } else { mass_outside(spec, support_factor) };
    let support_ok = leakage <= LEAKAGE_TOL;
    let sizes = size_entries(spec, alpha)?;
    let size_ok = sizes.iter().all(|e| e.value <= e.bound);
    let moment_order = match spec.kind {
        AtomKind::Subatom => spec.moments,
        AtomKind::H1c if spec.cube.volume() < 1.0 => 0,
        _ => -1,
    };
    let moments = moment_entries(spec, moment_order);
    let mass = (mat::frob_sq(spec.payload.samples()) * grid.cell()).sqrt();
    let moments_ok = moments.iter().all(|m| m.value <= MOMENT_TOL * mass);
    let composite = if spec.kind == AtomKind::Composite {
        let mut c = composite_check(spec, alpha)?;
        for (_, a) in &spec.parts {
            c.parts_valid &= a.kind == AtomKind::Subatom && validate_atom(a, alpha)?.pass;
        }
        Some(c)
    } else {
        None
    };
    let composite_ok = composite.as_ref().is_none_or(|c| {
        c.nested && c.parts_valid && c.coefficient_l2 <= c.coefficient_bound && c.bessel_norm <= c.bessel_bound
    });
    Ok(AtomReport {
        kind: spec.kind,
        cube: spec.cube.clone(),
        alpha,
        smoothness: spec.smoothness,
        moment_order,
        leakage,
        support_ok,
        sizes,
        size_ok,
        moments,
        moment_tol: MOMENT_TOL,
        moments_ok,
        composite,
        pass: support_ok && size_ok && moments_ok && composite_ok,
    })
}

/// `|Q|^{−α/d+1/2} a(2^{−μ}(· + l))` on a grid with `n/2^μ` points per axis:
/// the `(α,Q_{μ,l})`-subatom seen as an `(α,Q_{0,0})`-subatom.
pub fn rescale_to_unit_cube(spec: &AtomSpec, alpha: f64) -> Result<AtomSpec> {
    if spec.kind != AtomKind::Subatom {
        return Err(Error::Validation("only subatoms rescale to the unit cube".into()));
    }
    let g = spec.payload.grid();
    let mu = spec.cube.mu;
    let n1 = g.n >> mu;
    let small = GridSpec::new(g.d, n1, g.q)?;
    let s = g.slots();
    let d = g.d;
    let src = spec.payload.samples();
    let factor = spec.cube.volume().powf(-alpha / d as f64 + 0.5);
    let mut out = vec![C64::new(0.0, 0.0); small.len()];
    let mut ip = [0usize; MAX_DIM];
    let mut big = [0usize; MAX_DIM];
    for p in 0..small.points() {
        small.unravel(p, &mut ip[..d]);
        for k in 0..d {
            let signed = if ip[k] >= n1 / 2 { ip[k] as i64 - n1 as i64 } else { ip[k] as i64 };
            big[k] = (signed + spec.cube.l[k] * n1 as i64).rem_euclid(g.n as i64) as usize;
        }
        let q = g.ravel(&big[..d]);
        for k in 0..s {
            out[p * s + k] = src[q * s + k] * factor;
        }
    }
    Ok(AtomSpec {
        kind: AtomKind::Subatom,
        cube: Cube::new(0, vec![0; d]),
        smoothness: spec.smoothness,
        moments: spec.moments,
        payload: OpFn::from_samples(small, out)?,
        parts: Vec::new(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub atoms: usize,
    pub norm: f64,
    pub coefficient_sum: f64,
    pub ratio: f64,
    pub ceiling: f64,
    pub pass: bool,
}

/// `f = Σ λ_j a_j` with `‖f‖_{F_1^{α,c}} / Σ|λ_j|` compared against [`SYNTH_CEILING`].
pub fn synthesize(atoms: &[(C64, AtomSpec)], alpha: f64, ctx: &NormContext) -> Result<(OpFn, SynthesisReport)> {
    let Some(first) = atoms.first() else {
        return Err(Error::Validation("nothing to synthesize".into()));
    };
    let grid = first.1.payload.grid();
    let mut f = OpFn::zeros(grid);
    for (i, (lambda, a)) in atoms.iter().enumerate() {
        if a.payload.grid() != grid {
            return Err(Error::Structural(format!("atom {i} lives on a different grid")));
        }
        if !validate_atom(a, alpha)?.pass {
            return Err(Error::Validation(format!("atom {i} fails validation")));
        }
        f = f.lincomb(C64::new(1.0, 0.0), &a.payload, *lambda)?;
    }
    let norm = triebel_lizorkin_norm(&f, alpha, Exponent::One, ctx)?;
    let coefficient_sum: f64 = atoms.iter().map(|(l, _)| l.norm()).sum();
    let ratio = if coefficient_sum == 0.0 { 0.0 } else { norm / coefficient_sum };
    Ok((
        f,
        SynthesisReport {
            atoms: atoms.len(),
            norm,
            coefficient_sum,
            ratio,
            ceiling: SYNTH_CEILING,
            pass: ratio <= SYNTH_CEILING,
        },
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImageEntry {
    pub gamma: Vec<usize>,
    /// `τ(∫(1+2^μ|s−c|)^{d+M}|D^γ T a|²)^{1/2}`.
    pub weighted: f64,
    /// Same without the weight.
    pub unweighted: f64,
    /// `|Q|^{α/d−|γ|/d}` (subatoms) or 1 (`(α,1)`-atoms).
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImageReport {
    pub kind: AtomKind,
    pub cube: Cube,
    pub weight_exponent: f64,
    pub entries: Vec<ImageEntry>,
}

/// Weighted size of `D^γ T_σ^c a` around the atom's cube.
pub fn atom_image_report(sigma: &Symbol, spec: &AtomSpec, alpha: f64, m_exp: f64, gammas: &[Vec<usize>]) -> Result<ImageReport> {
    let g = spec.payload.grid();
    let d = g.d;
    match spec.kind {
        AtomKind::Subatom => {
            if m_exp >= 2.0 * spec.moments as f64 + 2.0 {
                return Err(Error::Validation(format!(
                    "weight exponent M = {m_exp} must stay below 2L+2 = {}",
                    2 * spec.moments + 2
                )));
            }
        }
        AtomKind::Alpha1 => {}
        _ => return Err(Error::Validation("image estimates are stated for subatoms and (α,1)-atoms".into())),
    }
    for gamma in gammas {
        if gamma.len() != d {
            return Err(Error::Config("derivative index has the wrong length".into()));
        }
        if gamma.iter().sum::<usize>() as f64 >= spec.smoothness as f64 - d as f64 / 2.0 {
            return Err(Error::Validation(format!(
                "derivative order {} not below K − d/2 = {}",
                gamma.iter().sum::<usize>(),
                spec.smoothness as f64 - d as f64 / 2.0
            )));
        }
    }
    let ta = Operator::new(sigma, Side::Column, DEFAULT_BUDGET_BYTES)?.apply(&spec.payload)?;
    let scale = (spec.cube.mu as f64).exp2();
    let weights: Vec<f64> = (0..g.points())
        .map(|p| {
            let mut x = [0.0; MAX_DIM];
            let mut o = [0.0; MAX_DIM];
            g.coord(p, &mut x[..d]);
            spec.cube.offset(&x[..d], &mut o[..d]);
            let r = o[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            (1.0 + scale * r).powf(d as f64 + m_exp)
        })
        .collect();
    let vol = spec.cube.volume();
    let entries = gammas
        .iter()
        .map(|gamma| {
            let h = spectral_derivative(&ta, gamma);
            let order: usize = gamma.iter().sum();
            let bound = if spec.kind == AtomKind::Alpha1 { 1.0 } else { vol.powf((alpha - order as f64) / d as f64) };
            let weighted = weighted_column_norm(&h, &weights)?;
            let unweighted = l1_l2c_norm(&h)?;
            Ok(ImageEntry { gamma: gamma.clone(), weighted, unweighted, bound, ratio: weighted / bound })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageReport { kind: spec.kind, cube: spec.cube.clone(), weight_exponent: m_exp, entries })
}

/// `Tr (∫ w(s) h(s)* h(s) ds)^{1/2}`.
fn weighted_column_norm(h: &OpFn, w: &[f64]) -> Result<f64> {
    let g = h.grid();
    let q = g.q;
    let s = g.slots();
    let mut acc = vec![C64::new(0.0, 0.0); s];
    for (a, wt) in h.samples().chunks(s).zip(w) {
        let scaled: Vec<C64> = a.iter().map(|z| z * wt).collect();
        mat::adj_mul_acc(&scaled, a, &mut acc, q);
    }
    acc.iter_mut().for_each(|z| *z *= g.cell());
    mat::psd_trace_pow(&acc, q, 0.5)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImageSweep {
    pub mus: Vec<usize>,
    pub ratios: Vec<f64>,
    pub spread: f64,
    pub limit: f64,
    pub pass: bool,
}

/// `γ = 0` image ratios of default subatoms centered at the origin for each `μ`.
pub fn image_sweep(sigma: &Symbol, alpha: f64, m_exp: f64, mus: &[usize]) -> Result<ImageSweep> {
    let g = sigma.grid();
    let mut ratios = Vec::new();
    for &mu in mus {
        let a = generate(g, alpha, &AtomRecipe::new(AtomKind::Subatom, mu, vec![0; g.d]))?;
        let r = atom_image_report(sigma, &a, alpha, m_exp, &[vec![0; g.d]])?;
        ratios.push(r.entries[0].ratio);
    }
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    Ok(ImageSweep { mus: mus.to_vec(), ratios, spread, limit: 4.0, pass: spread <= 4.0 })
}

/// `σ` multiplied by `S((|s−c|_∞ − inner)/(outer − inner))`, which vanishes
/// exactly on `|s−c|_∞ ≤ inner`.
pub fn mask_near(sigma: &Symbol, center: &[f64], inner: f64, outer: f64) -> Result<Symbol> {
    let g = sigma.grid();
    let Repr::Separable(terms) = sigma.repr() else {
        return Err(Error::Unsupported("masking is implemented for separable symbols".into()));
    };
    let c = center.to_vec();
    let mask = SFactor::scalar_fn(&g, |s| {
        let dist = s.iter().zip(&c).map(|(a, b)| crate::lp::torus_dist(*a, *b)).fold(0.0, f64::max);
        C64::new(smooth_step((dist - inner) / (outer - inner)), 0.0)
    });
    let terms = terms.iter().map(|t| Term { s: mask.product(&t.s, g.q), xi: t.xi.clone() }).collect();
    Symbol::separable(g, sigma.claim(), terms)
}

fn vanishes_near(sigma: &Symbol, center: &[f64], half: f64) -> Result<bool> {
    let g = sigma.grid();
    let d = g.d;
    let near: Vec<usize> = (0..g.points())
        .filter(|&p| {
            let mut x = [0.0; MAX_DIM];
            g.coord(p, &mut x[..d]);
            x[..d].iter().zip(center).all(|(a, b)| crate::lp::torus_dist(*a, *b) <= half)
        })
        .collect();
    let zero = C64::new(0.0, 0.0);
    Ok(match sigma.repr() {
        Repr::Separable(terms) => terms.iter().all(|t| t.xi.lattice(&g).iter().all(|z| *z == zero) || match &t.s {
            SFactor::Scalar(v) => near.iter().all(|&p| v[p] == zero),
            SFactor::Matrix(v) => {
                let s = g.slots();
                near.iter().all(|&p| v[p * s..(p + 1) * s].iter().all(|z| *z == zero))
            }
        }),
        Repr::Table(tab) => {
            let row = g.points() * g.slots();
            near.iter().all(|&p| tab[p * row..(p + 1) * row].iter().all(|z| *z == zero))
        }
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FarSupportImage {
    pub norm: f64,
    pub zone_half_width: f64,
}

/// `‖T_σ^c a‖_{F_1^{α,c}}` for a symbol vanishing on `c + ½Q_{0,0}`, `c` the atom's center.
pub fn far_support_image_norm(sigma: &Symbol, spec: &AtomSpec, alpha: f64, ctx: &NormContext) -> Result<FarSupportImage> {
    if !vanishes_near(sigma, &spec.cube.center(), FAR_ZONE)? {
        return Err(Error::Validation(format!(
            "symbol s-support meets the neighborhood |s − c|∞ ≤ {FAR_ZONE} of the atom"
        )));
    }
    let ta = Operator::new(sigma, Side::Column, DEFAULT_BUDGET_BYTES)?.apply(&spec.payload)?;
    Ok(FarSupportImage { norm: triebel_lizorkin_norm(&ta, alpha, Exponent::One, ctx)?, zone_half_width: FAR_ZONE })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FarSweep {
    pub mus: Vec<usize>,
    pub norms: Vec<f64>,
    /// `−slope` of `log₂ norm` against `μ`.
    pub exponent: f64,
    pub required: f64,
    pub pass: bool,
}

/// Far-support norms for default subatoms centered at `center` (which must be a
/// dyadic point of every level in `mus`), with the fitted decay exponent.
pub fn far_support_sweep(sigma: &Symbol, center: &[f64], alpha: f64, mus: &[usize], ctx: &NormContext) -> Result<FarSweep> {
    if mus.len() < 2 {
        return Err(Error::Config("the far-support fit needs at least two scales".into()));
    }
    let g = sigma.grid();
    let mut norms = Vec::new();
    for &mu in mus {
        let scale = (mu as f64).exp2();
        let l: Vec<i64> = center.iter().map(|c| (c * scale).round() as i64).collect();
        if l.iter().zip(center).any(|(k, c)| (*k as f64 / scale - c).abs() > 1e-12) {
            return Err(Error::Config(format!("center is not a dyadic point of level {mu}")));
        }
        let a = generate(g, alpha, &AtomRecipe::new(AtomKind::Subatom, mu, l))?;
        norms.push(far_support_image_norm(sigma, &a, alpha, ctx)?.norm);
    }
    let pts: Vec<(f64, f64)> = mus.iter().zip(&norms).map(|(m, v)| (*m as f64, v.log2())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let required = g.d as f64 / 2.0;
    Ok(FarSweep { mus: mus.to_vec(), norms, exponent: -slope, required, pass: -slope >= required })
}

/// Finest level whose cubes are resolvable on `grid`.
pub fn finest_level(grid: &GridSpec) -> usize {
    (grid.n / MIN_CUBE_SAMPLES).max(1).trailing_zeros() as usize
}

/// Recipes of the shipped atom library on a `d`-dimensional grid of `n` points.
pub fn shipped_recipes(d: usize, n: usize, q: usize) -> Vec<AtomRecipe> {
    let top = (n / MIN_CUBE_SAMPLES).max(1).trailing_zeros() as usize;
    let mut out = vec![
        AtomRecipe::new(AtomKind::H1c, 0, vec![0; d]),
        AtomRecipe { template: Template::Bump, ..AtomRecipe::new(AtomKind::Alpha1, 0, vec![0; d]) },
    ];
    for mu in 0..=top {
        out.push(AtomRecipe::new(AtomKind::Subatom, mu, vec![0; d]));
        if mu >= 1 {
            out.push(AtomRecipe::new(AtomKind::H1c, mu, vec![1i64 << (mu - 1); d]));
            let mut r = AtomRecipe::new(AtomKind::Subatom, mu, vec![1i64 << (mu - 1); d]);
            r.template = Template::Hermite { axis: d - 1, order: 3 };
            out.push(r);
        }
    }
    if q > 1 {
        let extra: Vec<AtomRecipe> = out
            .iter()
            .filter(|r| r.kind == AtomKind::Subatom)
            .flat_map(|r| {
                [MatrixShape::Corner, MatrixShape::Upper].map(|m| AtomRecipe { matrix: m, ..r.clone() })
            })
            .collect();
        out.extend(extra);
    }
    if top >= 2 {
        let parts = vec![
            PartRecipe { coefficient: 1.0, atom: AtomRecipe::new(AtomKind::Subatom, 2, vec![2; d]) },
            PartRecipe { coefficient: -0.5, atom: AtomRecipe::new(AtomKind::Subatom, 2, vec![3; d]) },
            PartRecipe { coefficient: 0.25, atom: AtomRecipe::new(AtomKind::Subatom, 1, vec![1; d]) },
        ];
        out.push(AtomRecipe { parts, ..AtomRecipe::new(AtomKind::Composite, 1, vec![1; d]) });
    }
    out
}

/// Payloads of the shipped library, used as extra lower-bound inputs.
pub fn library(grid: &GridSpec, alpha: f64) -> Result<Vec<OpFn>> {
    shipped_recipes(grid.d, grid.n, grid.q)
        .iter()
        .map(|r| generate(*grid, alpha, r).map(|a| a.payload))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, q: usize) -> GridSpec {
        GridSpec::new(2, n, q).unwrap()
    }

    #[test]
    fn hermite_polynomials() {
        assert_eq!(hermite(0, 0.3), 1.0);
        assert_eq!(hermite(2, 2.0), 3.0);
        assert!((hermite(3, 1.5) - (1.5f64.powi(3) - 4.5)).abs() < 1e-14);
    }

    #[test]
    fn default_orders_exceed_minima() {
        assert_eq!(minimal_orders(0.5), (1, -1));
        assert_eq!(default_orders(0.5), (3, 1));
        assert_eq!(minimal_orders(-1.5), (0, 1));
        assert_eq!(default_orders(0.0), (3, 2));
    }

    #[test]
    fn shipped_library_validates() {
        for q in [1, 2] {
            let g = grid(64, q);
            for r in shipped_recipes(2, 64, q) {
                let a = generate(g, 0.5, &r).unwrap();
                let rep = validate_atom(&a, 0.5).unwrap();
                assert!(rep.pass, "{r:?}: {rep:?}");
            }
        }
    }

    #[test]
    fn constant_h1c_atom_on_unit_cube() {
        let g = grid(16, 2);
        let a = generate(g, 0.0, &AtomRecipe::new(AtomKind::H1c, 0, vec![0, 0])).unwrap();
        let rep = validate_atom(&a, 0.0).unwrap();
        assert!(rep.pass && rep.moments.is_empty());
        assert!((rep.sizes[0].value - MARGIN).abs() < 1e-12);
    }

    #[test]
    fn first_derivative_has_zero_mean() {
        let g = grid(64, 1);
        let mut r = AtomRecipe::new(AtomKind::Subatom, 1, vec![0, 0]);
        r.template = Template::Hermite { axis: 0, order: 1 };
        r.moments = Some(0);
        r.smoothness = Some(2);
        let a = generate(g, 0.5, &r).unwrap();
        let rep = validate_atom(&a, 0.5).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.moments[0].value < 1e-14);
    }

    #[test]
    fn doubled_atom_fails_size() {
        let g = grid(64, 1);
        let mut r = AtomRecipe::new(AtomKind::Subatom, 1, vec![1, 0]);
        r.scale = 2.0;
        let rep = validate_atom(&generate(g, 0.5, &r).unwrap(), 0.5).unwrap();
        assert!(!rep.size_ok && !rep.pass);
    }

    #[test]
    fn unresolvable_cube_is_a_config_error() {
        let g = grid(32, 1);
        let r = AtomRecipe::new(AtomKind::Subatom, 2, vec![0, 0]);
        assert!(matches!(generate(g, 0.5, &r), Err(Error::Config(_))));
    }

    #[test]
    fn rescaling_preserves_size_ratios() {
        let g = grid(128, 1);
        let a = generate(g, 0.5, &AtomRecipe::new(AtomKind::Subatom, 2, vec![1, 3])).unwrap();
        let unit = rescale_to_unit_cube(&a, 0.5).unwrap();
        let r0 = validate_atom(&a, 0.5).unwrap();
        let r1 = validate_atom(&unit, 0.5).unwrap();
        assert!(r1.pass);
        for (x, y) in r0.sizes.iter().zip(&r1.sizes) {
            assert!((x.value / x.bound - y.value / y.bound).abs() < 1e-9, "{x:?} {y:?}");
        }
    }

    #[test]
    fn synthesis_bounds() {
        let g = grid(64, 1);
        let ctx = NormContext::for_grid(&g).unwrap();
        let a = generate(g, 0.5, &AtomRecipe::new(AtomKind::Subatom, 1, vec![0, 0])).unwrap();
        let (_, single) = synthesize(&[(C64::new(1.0, 0.0), a.clone())], 0.5, &ctx).unwrap();
        assert!(single.pass);
        let (f, zero) = synthesize(&[(C64::new(0.0, 0.0), a)], 0.5, &ctx).unwrap();
        assert_eq!(zero.norm, 0.0);
        assert!(f.samples().iter().all(|z| z.norm() == 0.0));
        assert!(matches!(synthesize(&[], 0.5, &ctx), Err(Error::Validation(_))));
    }

    #[test]
    fn identity_image_matches_validation() {
        let g = grid(64, 2);
        let a = generate(g, 0.5, &AtomRecipe::new(AtomKind::Subatom, 1, vec![1, 1])).unwrap();
        let rep = validate_atom(&a, 0.5).unwrap();
        let img = atom_image_report(&Symbol::identity(g), &a, 0.5, 2.0, &[vec![0, 0]]).unwrap();
        assert_eq!(img.entries[0].unweighted, rep.sizes[0].value);
        assert!(img.entries[0].weighted >= img.entries[0].unweighted);
    }

    #[test]
    fn image_preconditions() {
        let g = grid(64, 1);
        let a = generate(g, 0.5, &AtomRecipe::new(AtomKind::Subatom, 1, vec![0, 0])).unwrap();
        let id = Symbol::identity(g);
        // K = 3, d = 2: |γ| must stay below 2
        assert!(atom_image_report(&id, &a, 0.5, 2.0, &[vec![1, 1]]).is_err());
        assert!(atom_image_report(&id, &a, 0.5, 2.0, &[vec![1, 0]]).is_ok());
        // L = 1: M < 4
        assert!(atom_image_report(&id, &a, 0.5, 4.0, &[vec![0, 0]]).is_err());
    }

    #[test]
    fn far_support_requires_disjoint_symbol() {
        let g = grid(64, 1);
        let ctx = NormContext::for_grid(&g).unwrap();
        let a = generate(g, 0.5, &AtomRecipe::new(AtomKind::Subatom, 1, vec![1, 1])).unwrap();
        let id = Symbol::identity(g);
        assert!(matches!(far_support_image_norm(&id, &a, 0.5, &ctx), Err(Error::Validation(_))));
        let masked = mask_near(&id, &[0.5, 0.5], 0.25, 0.35).unwrap();
        assert!(far_support_image_norm(&masked, &a, 0.5, &ctx).is_ok());
        let zero = Symbol::identity(g).scale(C64::new(0.0, 0.0));
        assert_eq!(far_support_image_norm(&zero, &a, 0.5, &ctx).unwrap().norm, 0.0);
    }
}
