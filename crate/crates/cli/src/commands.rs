use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use ncpdo::atoms::{self, AtomReport};
use ncpdo::config::{AtomManifest, SymbolConfig, SymbolSpec};
use ncpdo::io::{self, Record, View};
use ncpdo::lp::{LpFamily, Profile};
use ncpdo::mat;
use ncpdo::norms::{Exponent, NormContext, SpaceDescriptor};
use ncpdo::pdo::cotlar::{cotlar_stein_report, CotlarOptions};
use ncpdo::pdo::estimate::{bound_sweep, forbidden_symbol_experiment, growth, EstimateOptions};
use ncpdo::pdo::{Operator, Side};
use ncpdo::qtorus::{self, QtElement, QtRepresentation, SemiElement, ThetaMatrix};
use ncpdo::rng;
use ncpdo::symbol::calculus::{adjoint_remainder, composition_remainder, RemainderOptions};
use ncpdo::symbol::class::{class_constants, ClassOptions, DEFAULT_THRESHOLD};
use ncpdo::symbol::kernel::kernel_decay_report;
use ncpdo::symbol::{Claim, Symbol};
use ncpdo::{Error, GridSpec, OpFn, Result, C64};

use crate::report::{Check, Report};
use crate::{emit, stdout_path, Cli, Command};

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn write_report(out: &std::path::Path, report: &Report) -> Result<bool> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    emit(out, &text)?;
    Ok(report.pass)
}

fn parse_side(s: &str) -> Result<Side> {
    s.parse()
}

/// Load and build a symbol config, refusing dense tables above the budget.
fn load_symbol(path: &PathBuf, profile: &Arc<Profile>, budget_bytes: usize) -> Result<(SymbolConfig, Symbol)> {
    let cfg = SymbolConfig::load(path)?;
    if let (SymbolSpec::CustomTable { .. }, Ok(grid)) = (&cfg.symbol, cfg.grid.spec()) {
        let bytes = grid.points() * grid.points() * grid.slots() * std::mem::size_of::<C64>();
        if bytes > budget_bytes {
            return Err(Error::Budget(format!("symbol table needs {bytes} bytes, budget is {budget_bytes}")));
        }
    }
    let sym = cfg.build(profile)?;
    Ok((cfg, sym))
}

fn context(grid: GridSpec, profile: &Arc<Profile>) -> Result<NormContext> {
    Ok(NormContext::new(LpFamily::with_profile(grid.with_q(1), profile.clone())?))
}

pub fn run(cli: &Cli) -> Result<bool> {
    let profile = Profile::active()?;
    let g = &cli.global;
    let args = to_value(cli);
    let pid = profile.id().to_string();
    let report = |command: &'static str, resolved: Value, checks: Vec<Check>, result: Value| {
        Report::new(command, json!({ "args": args, "resolved": resolved }), &pid, g.seed, checks, result)
    };

    match &cli.command {
        Command::LpBuild(a) => {
            let grid = GridSpec::new(a.d, a.n, 1)?;
            let fam = LpFamily::with_profile(grid, profile.clone())?;
            if let Some(path) = &a.dump {
                let recs: Vec<Record> = (0..=fam.top())
                    .map(|j| Record {
                        grid,
                        view: View::Coeffs,
                        values: fam.level(j).iter().map(|&v| C64::new(v, 0.0)).collect(),
                    })
                    .collect();
                io::save_records(path, &recs)?;
            }
            let checks = vec![
                Check::le("partition_residual", fam.partition_residual(), 1e-10, "max |Σ_j φ̂_j − 1| on the lattice"),
                Check::le("support_violations", fam.support_violations() as f64, 0.0, "count outside the dyadic annuli"),
            ];
            let result = json!({ "top_level": fam.top(), "levels": fam.top() + 1 });
            let r = report("lp-build", json!({ "d": a.d, "n": a.n }), checks, result);
            write_report(&a.out, &r)
        }
        Command::SymbolCheck(a) => {
            let (cfg, sym) = load_symbol(&a.config, &profile, g.budget_bytes())?;
            let rep = class_constants(&sym, ClassOptions { threshold: a.threshold, ..ClassOptions::new(a.max_gamma, a.max_beta) })?;
            let checks = vec![Check::le("max_constant", rep.max_constant, rep.threshold, "sup-normalized class constants")];
            let r = report("symbol-check", to_value(&cfg), checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::PdoApply(a) => {
            let (cfg, sym) = load_symbol(&a.symbol, &profile, g.budget_bytes())?;
            let side = parse_side(&a.side)?;
            let rec = io::load_records(&a.input)?;
            let [rec] = <[Record; 1]>::try_from(rec).map_err(|v| Error::Data(format!("expected one function record, found {}", v.len())))?;
            let view = rec.view;
            let f = rec.into_fn()?;
            if f.grid() != sym.grid() {
                return Err(Error::Structural("input grid differs from the symbol grid".into()));
            }
            let op = Operator::new(&sym, side, g.budget_bytes())?;
            let out = if a.adjoint { op.apply_adjoint(&f)? } else { op.apply(&f)? };
            io::save_fn(&a.out, &out, view)?;
            let l2 = |h: &OpFn| h.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let result = json!({ "input_l2": l2(&f), "output_l2": l2(&out), "output": a.out });
            let r = report("pdo-apply", to_value(&cfg), vec![], result);
            write_report(&a.report, &r)
        }
        Command::Norm(a) => {
            let f = io::load_fn(&a.input)?;
            let space = SpaceDescriptor::parse(&a.space, a.alpha, a.p.as_deref(), a.q.as_deref())?;
            let ctx = context(f.grid(), &profile)?;
            let value = space.norm(&f, &ctx)?;
            let out = json!({
                "space": space.tag(),
                "params": { "alpha": space.alpha, "p": space.p.to_string(), "q": space.q.to_string() },
                "value": value,
                "profile_id": profile.id(),
            });
            let mut text = serde_json::to_string(&out).expect("serializes");
            text.push('\n');
            emit(&a.out, &text)?;
            Ok(true)
        }
        Command::ComposeCheck(a) => {
            let (c1, s1) = load_symbol(&a.left, &profile, g.budget_bytes())?;
            let (c2, s2) = load_symbol(&a.right, &profile, g.budget_bytes())?;
            let opts = RemainderOptions { trials: a.trials, seed: g.seed, budget_bytes: g.budget_bytes() };
            let rep = composition_remainder(&s1, &s2, &a.orders, opts)?;
            let checks = vec![Check::holds("monotone", rep.monotone, "relative L2 error on band-limited inputs")];
            let r = report("compose-check", json!({ "left": c1, "right": c2 }), checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::AdjointCheck(a) => {
            let (cfg, sym) = load_symbol(&a.symbol, &profile, g.budget_bytes())?;
            let opts = RemainderOptions { trials: a.trials, seed: g.seed, budget_bytes: g.budget_bytes() };
            let rep = adjoint_remainder(&sym, &a.orders, opts)?;
            let drop = rep.errors.first().copied().unwrap_or(f64::NAN) / rep.errors.last().copied().unwrap_or(f64::NAN);
            let checks = vec![
                Check::holds("monotone", rep.monotone, "pairing defect on band-limited inputs"),
                Check::ge("drop_first_to_last", drop, a.min_drop, "ratio of pairing defects"),
            ];
            let r = report("adjoint-check", to_value(&cfg), checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::KernelDecay(a) => {
            let (cfg, sym) = load_symbol(&a.symbol, &profile, g.budget_bytes())?;
            let d = sym.grid().d;
            let gamma = a.gamma.clone().unwrap_or_else(|| vec![0; d]);
            let beta = a.beta.clone().unwrap_or_else(|| vec![0; d]);
            let rep = kernel_decay_report(&sym, &gamma, &beta, a.point)?;
            let checks = vec![Check::le("slope_relative_error", rep.relative_error(), a.tolerance, "log-log fit over half-octave bins")];
            let r = report("kernel-decay", to_value(&cfg), checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::Cotlar(a) => {
            let (cfg, sym) = load_symbol(&a.symbol, &profile, g.budget_bytes())?;
            let fam = LpFamily::with_profile(sym.grid().with_q(1), profile.clone())?;
            let opts = CotlarOptions { tol: a.tol, max_iter: a.max_iter, seed: g.seed };
            let rep = cotlar_stein_report(&sym, &fam, opts)?;
            let checks = vec![
                Check::le("disjoint_max", rep.disjoint_max, 1e-10, "power iteration on T_k T_j*"),
                Check::lt("decay_rate", rep.decay_rate, 0.0, "least-squares slope of log2 far T_k* T_j"),
            ];
            let r = report("cotlar", to_value(&cfg), checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::AtomsValidate(a) => {
            let manifest = match &a.manifest {
                Some(p) => AtomManifest::load(p)?,
                None => AtomManifest::shipped(a.d, a.n, a.q),
            };
            let grid = manifest.grid.spec()?;
            let mut checks = Vec::new();
            let mut entries = Vec::new();
            for (i, recipe) in manifest.atoms.iter().enumerate() {
                let outcome: Result<AtomReport> = atoms::generate(grid, a.alpha, recipe).and_then(|s| atoms::validate_atom(&s, a.alpha));
                match outcome {
                    Ok(rep) => {
                        checks.push(Check::holds(&format!("atom[{i}]"), rep.pass, "size, support and moment conditions"));
                        entries.push(json!({ "recipe": recipe, "report": rep }));
                    }
                    Err(Error::Validation(msg)) => {
                        checks.push(Check::holds(&format!("atom[{i}]"), false, "recipe rejected"));
                        entries.push(json!({ "recipe": recipe, "error": msg }));
                    }
                    Err(e) => return Err(e),
                }
            }
            let r = report("atoms-validate", to_value(&manifest), checks, json!({ "alpha": a.alpha, "atoms": entries }));
            write_report(&a.out, &r)
        }
        Command::AtomImage(a) => {
            let (cfg, sym) = load_symbol(&a.symbol, &profile, g.budget_bytes())?;
            let finest = atoms::finest_level(&sym.grid()).min(3);
            let mus = a.mus.clone().unwrap_or_else(|| (0..=finest).collect());
            let far_mus = a.far_mus.clone().unwrap_or_else(|| if finest >= 2 { (1..=finest).collect() } else { Vec::new() });
            let sweep = atoms::image_sweep(&sym, a.alpha, a.m_exp, &mus)?;
            let mut checks = vec![Check::le("image_ratio_spread", sweep.spread, sweep.limit, "max/min of weighted image ratios")];
            let far = if far_mus.is_empty() {
                Value::Null
            } else {
                let center = vec![0.5; sym.grid().d];
                let masked = atoms::mask_near(&sym, &center, atoms::FAR_ZONE, atoms::FAR_ZONE + 0.1)?;
                let ctx = context(sym.grid(), &profile)?;
                let fs = atoms::far_support_sweep(&masked, &center, a.alpha, &far_mus, &ctx)?;
                checks.push(Check::ge("far_support_exponent", fs.exponent, fs.required, "log-log slope of the far image norm"));
                to_value(&fs)
            };
            let r = report("atom-image", to_value(&cfg), checks, json!({ "mus": mus, "far_mus": far_mus, "image": sweep, "far_support": far }));
            write_report(&a.out, &r)
        }
        Command::BoundSweep(a) => {
            let cfg = SymbolConfig::load(&a.symbol)?;
            let template = cfg.grid.spec()?;
            let space = SpaceDescriptor::parse(&a.space, a.alpha, a.p.as_deref(), a.q.as_deref())?;
            let opts = EstimateOptions { trials: a.trials, seed: g.seed, budget_bytes: g.budget_bytes(), ..Default::default() };
            let p2 = profile.clone();
            let rows = bound_sweep(|grid| cfg.build_on(grid, &p2), template, &space, &a.sizes, parse_side(&a.side)?, &profile, &opts)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row).map_err(|e| Error::Data(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            emit(&a.out, &String::from_utf8(bytes).expect("csv is utf-8"))?;
            let gr = growth(&rows);
            let checks = vec![Check::le("growth", gr, a.max_growth, "max/min estimate across sizes")];
            let r = report("bound-sweep", to_value(&cfg), checks, json!({ "rows": rows }));
            match &a.report {
                Some(p) => write_report(p, &r),
                None => Ok(r.pass),
            }
        }
        Command::Forbidden(a) => {
            let opts = EstimateOptions { trials: a.trials, seed: g.seed, budget_bytes: g.budget_bytes(), ..Default::default() };
            let rep = forbidden_symbol_experiment(&a.alphas, &a.sizes, &profile, &opts)?;
            let mut checks = vec![Check::holds("bounded_positive", rep.bounded_positive, "growth ≤ bound_factor for α > 0")];
            if a.alphas.contains(&0.0) {
                checks.push(Check::holds("unbounded_at_zero", rep.unbounded_at_zero, "strictly increasing estimates at α = 0"));
            }
            let r = report("forbidden", Value::Null, checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::QtDemo(a) => qt_demo(a, g.seed, &report),
        Command::QtSweep(a) => {
            let theta = Arc::new(ThetaMatrix::parse(&a.theta)?);
            let p = Exponent::parse(&a.p)?;
            let claim = Claim::new(0.0, 1.0, 0.0)?;
            let rep = match a.symbol.as_str() {
                "smooth" => qtorus::qt_boundedness_sweep(smooth_multiplier, claim, theta.clone(), a.alpha, p, &a.boxes, a.trials, g.seed)?,
                "riesz" => qtorus::qt_boundedness_sweep(riesz_multiplier, claim, theta.clone(), a.alpha, p, &a.boxes, a.trials, g.seed)?,
                other => return Err(Error::Config(format!("unknown quantum-torus symbol {other} (smooth, riesz)"))),
            };
            let checks = vec![Check::le("growth", rep.growth, a.max_growth, "max/min of lower-bound ratios across boxes")];
            let r = report("qt-sweep", to_value(&*theta), checks, to_value(&rep));
            write_report(&a.out, &r)
        }
        Command::MakeInput(a) => {
            let grid = GridSpec::new(a.d, a.n, a.q)?;
            let mut r = rng::seeded(g.seed);
            let f = rng::random_band_limited(&grid, a.radius, a.weight, &mut r);
            io::save_fn(&a.out, &f, if a.coeffs { View::Coeffs } else { View::Samples })?;
            Ok(true)
        }
    }
}

fn smooth_multiplier(m: &[i64]) -> C64 {
    let r2: f64 = m.iter().map(|&v| (v * v) as f64).sum();
    C64::new((2.0 + m[0] as f64) / (4.0 + r2).sqrt(), 0.0)
}

fn riesz_multiplier(m: &[i64]) -> C64 {
    let r2: f64 = m.iter().map(|&v| (v * v) as f64).sum();
    if r2 == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        C64::new(0.0, -(m[0] as f64) / r2.sqrt())
    }
}

fn qt_demo(a: &QtDemo, seed: u64, report: &dyn Fn(&'static str, Value, Vec<Check>, Value) -> Report) -> Result<bool> {
    let theta = Arc::new(ThetaMatrix::parse(&a.theta)?);
    let p = Exponent::parse(&a.p)?;
    let n = a.r#box;
    let small = (n as i64 / 4 - 1).max(1);
    let mut checks = Vec::new();
    let mut r = rng::seeded(seed);
    let x = QtElement::random(theta.clone(), n, n as i64 / 2 - 1, &mut r)?;
    if let Some(path) = &a.dump {
        io::save_qt(path, &x)?;
    }

    let rep = if theta.rational.is_some() { Some(QtRepresentation::new(&theta)?) } else { None };
    if let Some(rep) = &rep {
        checks.push(Check::le("commutation", rep.commutation_residual(&theta), 1e-12, "generator relation in the representation"));
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let u = QtElement::random(theta.clone(), n, small, &mut r)?;
            let v = QtElement::random(theta.clone(), n, small, &mut r)?;
            let (uv, _) = qtorus::qt_multiply(&u, &v)?;
            let s: Vec<f64> = (0..theta.d).map(|_| rng::uniform(&mut r, 0.0, 1.0)).collect();
            let lhs = rep.element_at(&uv, &s);
            let rhs = mat::mul(&rep.element_at(&u, &s), &rep.element_at(&v, &s), rep.q);
            let scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
            worst = worst.max(lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale);
        }
        checks.push(Check::le("multiplication", worst, 1e-10, "twisted product vs representation product"));
        let xt = qtorus::transference_embed(&x)?;
        let mut iso = 0.0f64;
        for e in [Exponent::One, Exponent::Two, Exponent::Infinity] {
            let u = qtorus::qt_lp_norm(&x, e)?;
            iso = iso.max((u - qtorus::transferred_lp_norm(&xt, e)?).abs() / u);
        }
        checks.push(Check::le("isometry", iso, 1e-9, "L_p(T_θ) vs transferred L_p, p ∈ {1,2,inf}"));
    }

    let f = SemiElement::random(theta.clone(), n, &mut r)?;
    let e = qtorus::conditional_expectation(&f);
    let ee = qtorus::conditional_expectation(&e);
    let quad = qtorus::conditional_expectation_quadrature(&f)?;
    let scale = e.l2().max(1e-300);
    checks.push(Check::le("expectation_idempotent", ee.distance(&e) / scale, 1e-10, "E∘E vs E"));
    checks.push(Check::le("expectation_quadrature", quad.distance(&e) / scale, 1e-10, "diagonal extraction vs averaging"));
    checks.push(Check::le("expectation_contractive", e.l2() - f.l2(), 1e-10, "‖E f‖₂ − ‖f‖₂"));

    let ctx = qtorus::qt_norm_context(theta.d, n)?;
    let q_norm = qtorus::qt_tl_norm(&x, a.alpha, p, &ctx)?;
    let t_norm = qtorus::transferred_tl_norm(&x, a.alpha, p, &ctx)?;
    checks.push(Check::le("tl_transference", (q_norm - t_norm).abs() / q_norm, 1e-9, "quantum TL vs transferred TL"));

    let result = json!({
        "box": n,
        "representation_dim": rep.as_ref().map(|r| r.q),
        "trace": [x.trace().re, x.trace().im],
        "tl_norm": q_norm,
        "transferred_tl_norm": t_norm,
        "alpha": a.alpha,
        "p": p.to_string(),
    });
    let r = report("qt-demo", to_value(&*theta), checks, result);
    write_report(&a.out, &r)
}

#[derive(Args, Debug, Serialize)]
pub struct LpBuild {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Write the multiplier tables, one coefficient record per level.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SymbolCheck {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub max_gamma: usize,
    #[arg(long, default_value_t = 2)]
    pub max_beta: usize,
    /// Largest acceptable constant.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PdoApply {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// `c` (column) or `r` (row).
    #[arg(long, default_value = "c")]
    pub side: String,
    /// Apply the Hilbert-space adjoint instead.
    #[arg(long)]
    pub adjoint: bool,
    /// Output dump; keeps the input's view.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_os_t = stdout_path())]
    pub report: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct NormCmd {
    #[arg(long)]
    pub input: PathBuf,
    /// L1N, L2N, LinfN, L1ML2c, h1c, F1a, F2a, Finfa, H2a, Bpqa or e.g. B21a.
    #[arg(long)]
    pub space: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ComposeCheck {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AdjointCheck {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    /// Required ratio between the first and last remainder.
    #[arg(long, default_value_t = 1.0)]
    pub min_drop: f64,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct KernelDecay {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<usize>>,
    /// Grid index of the base point s.
    #[arg(long, default_value_t = 0)]
    pub point: usize,
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct Cotlar {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AtomsValidate {
    /// Manifest to validate; the shipped library on the --d/--n/--q grid if absent.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AtomImage {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Exponent of the (1 + 2^μ|s − c|) weight.
    #[arg(long, default_value_t = 2.0)]
    pub m_exp: f64,
    /// Defaults to 0,1,2,3, cut at the finest level the grid resolves.
    #[arg(long, value_delimiter = ',')]
    pub mus: Option<Vec<usize>>,
    /// Scales for the far-support sweep (defaults to 1,2,3, cut like --mus); empty skips it.
    #[arg(long, value_delimiter = ',')]
    pub far_mus: Option<Vec<usize>>,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundSweep {
    #[arg(long)]
    pub symbol: PathBuf,
    #[arg(long, default_value = "F1a")]
    pub space: String,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "c")]
    pub side: String,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 2.0)]
    pub max_growth: f64,
    /// CSV with columns size, space, alpha, estimate, method, seed.
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
    /// Optional JSON summary with the growth check.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct Forbidden {
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct QtDemo {
    /// `p/q` or a decimal.
    #[arg(long, default_value = "1/3")]
    pub theta: String,
    #[arg(long = "box", default_value_t = 8)]
    pub r#box: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value = "2")]
    pub p: String,
    /// Write the random test element in the quantum-torus dump format.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct QtSweep {
    #[arg(long, default_value = "1/3")]
    pub theta: String,
    /// `smooth` or `riesz`.
    #[arg(long, default_value = "smooth")]
    pub symbol: String,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value = "2")]
    pub p: String,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub boxes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 2.0)]
    pub max_growth: f64,
    #[arg(long, default_value_os_t = stdout_path())]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct MakeInput {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    /// Frequency radius of the random coefficients.
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    /// Coefficients are scaled by (1+|m|²)^{weight/2}.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub weight: f64,
    /// Store the coefficient view instead of samples.
    #[arg(long)]
    pub coeffs: bool,
    #[arg(long)]
    pub out: PathBuf,
}
