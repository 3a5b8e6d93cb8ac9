//! TOML configs: symbol declarations and atom manifests.
//!
//! ```toml
//! [grid]
//! d = 2
//! n = 32
//! q = 1
//!
//! [symbol]
//! kind = "bessel"
//! alpha = -0.5
//!
//! [claim]          # optional for every kind except custom-table
//! order = -0.5
//! rho = 1.0
//! delta = 0.0
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::atoms::AtomRecipe;
use crate::error::{Error, Result};
use crate::exemplars;
use crate::grid::GridSpec;
use crate::lp::{top_level, Profile};
use crate::symbol::{Claim, SFactor, Symbol, Term, XiFactor};

fn one_usize() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    #[serde(default = "one_usize")]
    pub q: usize,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.n, self.q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SymbolSpec {
    /// One of the shipped exemplars, by name.
    Exemplar { name: String },
    /// `(1+|ξ|²)^{power/2} · A` with a real constant matrix `A` (identity by default).
    Multiplier {
        power: f64,
        #[serde(default)]
        matrix: Option<Vec<f64>>,
    },
    /// `(1+|ξ|²)^{α/2}`.
    Bessel { alpha: f64 },
    /// `C + A cos(2π k·s)`, independent of ξ.
    Pointwise {
        constant: Vec<f64>,
        #[serde(default)]
        amplitude: Option<Vec<f64>>,
        #[serde(default)]
        frequency: Option<Vec<i64>>,
    },
    /// A single Littlewood-Paley band `φ̂_j(ξ)` (the low-pass `ψ` at level 0).
    Band { level: usize },
    /// `Σ_{j=1}^{last} e^{2πi 2^j s_1} φ̂_j(ξ)`.
    Exotic {
        #[serde(default)]
        last: Option<usize>,
    },
    /// Dense table from a dump with one coefficient record per s-point.
    CustomTable { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub grid: GridConfig,
    pub symbol: SymbolSpec,
    #[serde(default)]
    pub claim: Option<Claim>,
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn real_matrix(v: &[f64], q: usize, what: &str) -> Result<Vec<C64>> {
    if v.len() != q * q {
        return Err(Error::Config(format!("{what} needs {} entries for q = {q}, got {}", q * q, v.len())));
    }
    Ok(v.iter().map(|&x| C64::new(x, 0.0)).collect())
}

impl SymbolConfig {
    pub fn parse(text: &str) -> Result<SymbolConfig> {
        parse_toml(text, "symbol config")
    }

    /// Load a config; relative table paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<SymbolConfig> {
        let mut cfg = Self::parse(&read(path)?)?;
        if let SymbolSpec::CustomTable { path: p } = &mut cfg.symbol {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// The claim used when the config does not state one.
    fn default_claim(&self, grid: &GridSpec) -> Result<Claim> {
        match &self.symbol {
            SymbolSpec::Multiplier { power, .. } => Claim::new(*power, 1.0, 0.0),
            SymbolSpec::Bessel { alpha } => Claim::new(*alpha, 1.0, 0.0),
            SymbolSpec::Pointwise { .. } | SymbolSpec::Band { .. } => Claim::new(0.0, 1.0, 0.0),
            SymbolSpec::Exotic { .. } => Claim::new(0.0, 1.0, 1.0),
            SymbolSpec::Exemplar { name } => Ok(exemplars::by_name(name, *grid, &Profile::standard())?.claim()),
            SymbolSpec::CustomTable { .. } => Err(Error::Config("custom-table symbols need a [claim] section".into())),
        }
    }

    pub fn build(&self, profile: &Arc<Profile>) -> Result<Symbol> {
        self.build_on(self.grid.spec()?, profile)
    }

    /// Build on a different grid (used by size sweeps).
    pub fn build_on(&self, grid: GridSpec, profile: &Arc<Profile>) -> Result<Symbol> {
        let claim = match self.claim {
            Some(c) => {
                c.validate()?;
                c
            }
            None => self.default_claim(&grid)?,
        };
        let q = grid.q;
        let sym = match &self.symbol {
            SymbolSpec::Exemplar { name } => exemplars::by_name(name, grid, profile)?,
            SymbolSpec::Multiplier { power, matrix } => {
                let e = power / 2.0;
                let xi = XiFactor::scalar(move |x| C64::new((1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(e), 0.0));
                let xi = match matrix {
                    Some(m) => xi.product(&XiFactor::constant(real_matrix(m, q, "multiplier matrix")?), q),
                    None => xi,
                };
                Symbol::separable(grid, claim, vec![Term { s: SFactor::one(&grid), xi }])?
            }
            SymbolSpec::Bessel { alpha } => exemplars::bessel(grid, *alpha)?,
            SymbolSpec::Pointwise { constant, amplitude, frequency } => {
                let c = real_matrix(constant, q, "pointwise constant")?;
                let a = match amplitude {
                    Some(a) => real_matrix(a, q, "pointwise amplitude")?,
                    None => vec![C64::new(0.0, 0.0); q * q],
                };
                let k = frequency.clone().unwrap_or_else(|| vec![1; grid.d]);
                if k.len() != grid.d {
                    return Err(Error::Config(format!("pointwise frequency needs {} entries", grid.d)));
                }
                Symbol::pointwise(grid, |s, out| {
                    let w = (2.0 * PI * k.iter().zip(s).map(|(&k, &x)| k as f64 * x).sum::<f64>()).cos();
                    for i in 0..out.len() {
                        out[i] = c[i] + a[i] * w;
                    }
                })?
            }
            SymbolSpec::Band { level } => {
                let top = top_level(grid.n);
                if *level > top {
                    return Err(Error::Config(format!("band level {level} above the top level {top}")));
                }
                let (p, j) = (profile.clone(), *level);
                let xi = XiFactor::scalar(move |x| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    C64::new(if j == 0 { p.psi(r) } else { p.phi(r / (1u64 << j) as f64) }, 0.0)
                });
                Symbol::separable(grid, claim, vec![Term { s: SFactor::one(&grid), xi }])?
            }
            SymbolSpec::Exotic { last } => exemplars::exotic_bands(grid, profile, last.unwrap_or(top_level(grid.n)))?,
            SymbolSpec::CustomTable { path } => {
                let (g, values) = crate::io::load_symbol_table(path)?;
                if g != grid {
                    return Err(Error::Config(format!(
                        "table grid (d={}, n={}, q={}) differs from the config grid",
                        g.d, g.n, g.q
                    )));
                }
                Symbol::from_table(grid, claim, values)?
            }
        };
        sym.with_claim(claim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomManifest {
    pub grid: GridConfig,
    #[serde(default, rename = "atom")]
    pub atoms: Vec<AtomRecipe>,
}

impl AtomManifest {
    pub fn parse(text: &str) -> Result<AtomManifest> {
        let m: AtomManifest = parse_toml(text, "atom manifest")?;
        if m.atoms.is_empty() {
            return Err(Error::Config("atom manifest lists no atoms".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<AtomManifest> {
        Self::parse(&read(path)?)
    }

    /// The shipped library as a manifest.
    pub fn shipped(d: usize, n: usize, q: usize) -> AtomManifest {
        AtomManifest { grid: GridConfig { d, n, q }, atoms: crate::atoms::shipped_recipes(d, n, q) }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdo::{apply_pdo, Side};

    #[test]
    fn parses_every_kind() {
        let cases = [
            "kind = \"exemplar\"\nname = \"s0-mixed\"",
            "kind = \"multiplier\"\npower = -1.0\nmatrix = [1.0, 0.5, 0.0, 2.0]",
            "kind = \"bessel\"\nalpha = 0.5",
            "kind = \"pointwise\"\nconstant = [2.0, 0.0, 0.0, 1.0]\namplitude = [1.0, 0.0, 0.0, 0.0]",
            "kind = \"band\"\nlevel = 2",
            "kind = \"exotic\"\nlast = 1",
        ];
        for c in cases {
            let text = format!("[grid]\nd = 2\nn = 16\nq = 2\n[symbol]\n{c}\n");
            let cfg = SymbolConfig::parse(&text).unwrap();
            let sym = cfg.build(&Profile::standard()).unwrap();
            assert_eq!(sym.grid().q, 2);
        }
    }

    #[test]
    fn schema_violations_are_config_errors() {
        for text in [
            "[grid]\nd = 2\nn = 16\n[symbol]\nkind = \"nope\"\n",
            "[grid]\nd = 2\nn = 16\n[symbol]\nkind = \"bessel\"\nalpha = 1.0\nextra = 3\n",
            "[grid]\nd = 2\nn = 16\nwidth = 3\n[symbol]\nkind = \"bessel\"\nalpha = 1.0\n",
            "[symbol]\nkind = \"bessel\"\nalpha = 1.0\n",
        ] {
            assert!(matches!(SymbolConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
        let bad_size = SymbolConfig::parse("[grid]\nd = 2\nn = 16\n[symbol]\nkind = \"multiplier\"\npower = 0.0\nmatrix = [1.0]\n").unwrap();
        assert!(bad_size.build(&Profile::standard()).is_ok());
        let q2 = SymbolConfig::parse("[grid]\nd = 2\nn = 16\nq = 2\n[symbol]\nkind = \"multiplier\"\npower = 0.0\nmatrix = [1.0]\n").unwrap();
        assert!(matches!(q2.build(&Profile::standard()), Err(Error::Config(_))));
        let table = SymbolConfig::parse("[grid]\nd = 1\nn = 8\n[symbol]\nkind = \"custom-table\"\npath = \"t.bin\"\n").unwrap();
        assert!(matches!(table.build(&Profile::standard()), Err(Error::Config(_))));
    }

    #[test]
    fn custom_table_matches_its_source() {
        let dir = std::env::temp_dir().join(format!("ncpdo-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = GridSpec::new(2, 8, 1).unwrap();
        let src = exemplars::bessel(g, -1.0).unwrap();
        let table = src.to_table(1 << 24).unwrap();
        let recs: Vec<crate::io::Record> = table
            .chunks(g.len())
            .map(|c| crate::io::Record { grid: g, view: crate::io::View::Coeffs, values: c.to_vec() })
            .collect();
        crate::io::save_records(&dir.join("t.bin"), &recs).unwrap();
        std::fs::write(
            dir.join("sym.toml"),
            "[grid]\nd = 2\nn = 8\n[symbol]\nkind = \"custom-table\"\npath = \"t.bin\"\n[claim]\norder = -1.0\nrho = 1.0\ndelta = 0.0\n",
        )
        .unwrap();
        let sym = SymbolConfig::load(&dir.join("sym.toml")).unwrap().build(&Profile::standard()).unwrap();
        let f = crate::rng::random_band_limited(&g, 2.0, 0.0, &mut crate::rng::seeded(4));
        let a = apply_pdo(&src, &f, Side::Column).unwrap();
        let b = apply_pdo(&sym, &f, Side::Column).unwrap();
        let gap = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(gap < 1e-14);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn shipped_manifest_roundtrips() {
        let m = AtomManifest::shipped(2, 64, 2);
        let back = AtomManifest::parse(&m.to_toml().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
