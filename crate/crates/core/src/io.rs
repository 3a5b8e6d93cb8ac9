//! Binary dumps for grid functions, multiplier tables and quantum-torus
//! elements. All integers and floats are little-endian; complex values are
//! `(re, im)` pairs of f64. The layout is described in docs/formats.md.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OpFn};
use crate::qtorus::{QtElement, ThetaMatrix};

pub const FUNCTION_MAGIC: &[u8; 4] = b"NCPF";
pub const QT_MAGIC: &[u8; 4] = b"NCPQ";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Samples,
    Coeffs,
}

impl View {
    fn code(self) -> u32 {
        match self {
            View::Samples => 0,
            View::Coeffs => 1,
        }
    }

    fn from_code(c: u32) -> Result<View> {
        match c {
            0 => Ok(View::Samples),
            1 => Ok(View::Coeffs),
            other => Err(Error::Data(format!("unknown view code {other}"))),
        }
    }
}

/// One record: a grid header and `n^d·q²` complex values.
#[derive(Clone, Debug)]
pub struct Record {
    pub grid: GridSpec,
    pub view: View,
    pub values: Vec<C64>,
}

impl Record {
    pub fn from_fn(f: &OpFn, view: View) -> Record {
        let values = match view {
            View::Samples => f.samples().to_vec(),
            View::Coeffs => f.coeffs().to_vec(),
        };
        Record { grid: f.grid(), view, values }
    }

    pub fn into_fn(self) -> Result<OpFn> {
        match self.view {
            View::Samples => OpFn::from_samples(self.grid, self.values),
            View::Coeffs => OpFn::from_coeffs(self.grid, self.values),
        }
    }
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Data("dump is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn put_values(w: &mut impl Write, values: &[C64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 16);
    for z in values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn get_values(r: &mut impl Read, len: usize) -> Result<Vec<C64>> {
    let mut buf = vec![0u8; len * 16];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect())
}

fn check_magic(r: &mut impl Read, want: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(truncated)?;
    if &m != want {
        return Err(Error::Data(format!("bad magic {m:?}, expected {want:?}")));
    }
    let v = get_u32(r)?;
    if v != VERSION {
        return Err(Error::Data(format!("unsupported dump version {v}")));
    }
    Ok(())
}

pub fn write_records(w: &mut impl Write, records: &[Record]) -> Result<()> {
    w.write_all(FUNCTION_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, records.len() as u32)?;
    for rec in records {
        if rec.values.len() != rec.grid.len() {
            return Err(Error::Structural("record length does not match its grid".into()));
        }
        put_u32(w, rec.grid.d as u32)?;
        put_u32(w, rec.grid.n as u32)?;
        put_u32(w, rec.grid.q as u32)?;
        put_u32(w, rec.view.code())?;
        put_values(w, &rec.values)?;
    }
    Ok(())
}

pub fn read_records(r: &mut impl Read) -> Result<Vec<Record>> {
    check_magic(r, FUNCTION_MAGIC)?;
    let count = get_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let d = get_u32(r)? as usize;
        let n = get_u32(r)? as usize;
        let q = get_u32(r)? as usize;
        let view = View::from_code(get_u32(r)?)?;
        let grid = GridSpec::new(d, n, q).map_err(|e| Error::Data(format!("bad record header: {e}")))?;
        let values = get_values(r, grid.len())?;
        out.push(Record { grid, view, values });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Data("trailing bytes after the last record".into()));
    }
    Ok(out)
}

pub fn save_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn load_records(path: &Path) -> Result<Vec<Record>> {
    read_records(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_fn(path: &Path, f: &OpFn, view: View) -> Result<()> {
    save_records(path, &[Record::from_fn(f, view)])
}

/// Load a single-record dump as a function.
pub fn load_fn(path: &Path) -> Result<OpFn> {
    let mut recs = load_records(path)?;
    if recs.len() != 1 {
        return Err(Error::Data(format!("expected one function record, found {}", recs.len())));
    }
    recs.pop().unwrap().into_fn()
}

/// Symbol tables are stored as one coefficient-view record per s-point.
pub fn load_symbol_table(path: &Path) -> Result<(GridSpec, Vec<C64>)> {
    let recs = load_records(path)?;
    let first = recs.first().ok_or_else(|| Error::Data("empty symbol table".into()))?.grid;
    if recs.len() != first.points() || recs.iter().any(|r| r.grid != first || r.view != View::Coeffs) {
        return Err(Error::Data(format!(
            "symbol table needs {} coefficient records on one grid",
            first.points()
        )));
    }
    Ok((first, recs.into_iter().flat_map(|r| r.values).collect()))
}

pub fn write_qt(w: &mut impl Write, x: &QtElement) -> Result<()> {
    let th = x.theta();
    w.write_all(QT_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, x.d() as u32)?;
    put_u32(w, x.box_size() as u32)?;
    match &th.rational {
        Some((nums, den)) => {
            put_u32(w, 1)?;
            for v in nums {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&den.to_le_bytes())?;
        }
        None => {
            put_u32(w, 0)?;
            for v in &th.entries {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    put_values(w, x.coeffs())
}

pub fn read_qt(r: &mut impl Read) -> Result<QtElement> {
    check_magic(r, QT_MAGIC)?;
    let d = get_u32(r)? as usize;
    let n = get_u32(r)? as usize;
    if d == 0 || d > crate::grid::MAX_DIM {
        return Err(Error::Data(format!("bad dimension {d}")));
    }
    let theta = match get_u32(r)? {
        1 => {
            let nums: Vec<i64> = (0..d * d).map(|_| get_u64(r).map(|v| v as i64)).collect::<Result<_>>()?;
            let den = get_u64(r)?;
            if den == 0 {
                return Err(Error::Data("zero θ denominator".into()));
            }
            let entries = nums.iter().map(|&v| v as f64 / den as f64).collect();
            let mut t = ThetaMatrix::real(d, entries).map_err(|e| Error::Data(e.to_string()))?;
            t.rational = Some((nums, den));
            t
        }
        0 => {
            let entries = (0..d * d).map(|_| get_f64(r)).collect::<Result<_>>()?;
            ThetaMatrix::real(d, entries).map_err(|e| Error::Data(e.to_string()))?
        }
        other => return Err(Error::Data(format!("unknown θ tag {other}"))),
    };
    let len = n.checked_pow(d as u32).ok_or_else(|| Error::Data("box too large".into()))?;
    let coeffs = get_values(r, len)?;
    QtElement::new(Arc::new(theta), n, coeffs).map_err(|e| Error::Data(e.to_string()))
}

pub fn save_qt(path: &Path, x: &QtElement) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_qt(&mut w, x)?;
    w.flush()?;
    Ok(())
}

pub fn load_qt(path: &Path) -> Result<QtElement> {
    read_qt(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}
