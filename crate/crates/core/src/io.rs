//! File formats: path CSV and `SBEP` binary, measure CSV, the `SBED` drift
//! container, JSON reports and run manifests.
//!
//! Binary layouts are little-endian.
//!
//! `SBEP`: magic, `u32` version (1), `u32` dim, `u64` sample count, then all
//! times, then all values (row-major, `dim` per sample).
//!
//! `SBED`: magic, `u32` version (1), `u32` dim, `u32` time count, `u32`
//! extension (0 zero, 1 error), `u32` declared flag, then the declared
//! `α, p, q, r` if the flag is set, then the grid (`dim` lower corners,
//! spacing, `dim` `u64` cell counts), the times, and the values laid out as
//! `values[(time · cells + cell) · dim + component]`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SbeError};
use crate::norms::GridSpec;
use crate::occupation::OccupationMeasure;
use crate::path::SampledPath;
use crate::young::{DeclaredRegularity, DriftField, Extension};

const PATH_MAGIC: &[u8; 4] = b"SBEP";
const DRIFT_MAGIC: &[u8; 4] = b"SBED";
const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> SbeError {
    SbeError::Format(msg.into())
}

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| format_err(format!("line {lineno}: cannot parse `{}`", f.trim())))
        })
        .collect()
}

pub fn write_path_csv(path: &SampledPath, mut w: impl Write) -> Result<()> {
    let d = path.dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|k| format!("x{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, &t) in path.times().iter().enumerate() {
        let row: Vec<String> = std::iter::once(num(t)).chain(path.value(i).iter().map(|&v| num(v))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads `t,x1,…,xd` with a header line.
pub fn read_path_csv(r: impl BufRead) -> Result<SampledPath> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| format_err("empty path file"))?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(format_err("path header must be `t,x1,...,xd`"));
    }
    let d = cols.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(&line, i + 1)?;
        if row.len() != d + 1 {
            return Err(format_err(format!("line {}: expected {} fields, got {}", i + 1, d + 1, row.len())));
        }
        times.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    SampledPath::new(times, values, d)
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| format_err("truncated header"))?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| format_err("truncated header"))?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n.checked_mul(8).ok_or_else(|| format_err("length overflow"))?];
    r.read_exact(&mut buf).map_err(|_| format_err(format!("truncated payload: expected {n} doubles")))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn check_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| format_err("file too short"))?;
    if &m != magic {
        return Err(format_err(format!("bad magic: expected {:?}", std::str::from_utf8(magic).unwrap())));
    }
    let v = get_u32(r)?;
    if v != VERSION {
        return Err(format_err(format!("unsupported version {v}")));
    }
    Ok(())
}

pub fn write_path_bin(path: &SampledPath, mut w: impl Write) -> Result<()> {
    w.write_all(PATH_MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_u32(&mut w, path.dim() as u32)?;
    put_u64(&mut w, path.len() as u64)?;
    put_f64s(&mut w, path.times())?;
    put_f64s(&mut w, path.values())
}

pub fn read_path_bin(mut r: impl Read) -> Result<SampledPath> {
    check_magic(&mut r, PATH_MAGIC)?;
    let d = get_u32(&mut r)? as usize;
    let n = get_u64(&mut r)? as usize;
    let times = get_f64s(&mut r, n)?;
    let values = get_f64s(&mut r, n * d)?;
    SampledPath::new(times, values, d)
}

/// Path from a file, `SBEP` if the magic matches and CSV otherwise.
pub fn load_path(file: &Path) -> Result<SampledPath> {
    let mut f = File::open(file).map_err(|e| SbeError::Io(format!("{}: {e}", file.display())))?;
    let mut magic = [0u8; 4];
    let is_bin = f.read_exact(&mut magic).is_ok() && &magic == PATH_MAGIC;
    let f = File::open(file)?;
    if is_bin {
        read_path_bin(BufReader::new(f))
    } else {
        read_path_csv(BufReader::new(f))
    }
}

/// `w,x1,…,xd`, preceded by a `# span a b` comment.
pub fn write_measure_csv(mu: &OccupationMeasure, mut w: impl Write) -> Result<()> {
    let (a, b) = mu.span();
    writeln!(w, "# span {} {}", num(a), num(b))?;
    let header: Vec<String> = std::iter::once("w".to_string())
        .chain((1..=mu.dim()).map(|k| format!("x{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, &wt) in mu.weights().iter().enumerate() {
        let row: Vec<String> = std::iter::once(num(wt)).chain(mu.atom(i).iter().map(|&v| num(v))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_measure_csv(r: impl BufRead) -> Result<OccupationMeasure> {
    let mut span = None;
    let mut dim = None;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.first() == Some(&"span") && parts.len() == 3 {
                let a = parts[1].parse::<f64>().map_err(|_| format_err("bad span comment"))?;
                let b = parts[2].parse::<f64>().map_err(|_| format_err("bad span comment"))?;
                span = Some((a, b));
            }
            continue;
        }
        if dim.is_none() {
            let cols: Vec<&str> = t.split(',').map(str::trim).collect();
            if cols.first() != Some(&"w") || cols.len() < 2 {
                return Err(format_err("measure header must be `w,x1,...,xd`"));
            }
            dim = Some(cols.len() - 1);
            continue;
        }
        let d = dim.unwrap();
        let row = parse_row(t, i + 1)?;
        if row.len() != d + 1 {
            return Err(format_err(format!("line {}: expected {} fields, got {}", i + 1, d + 1, row.len())));
        }
        weights.push(row[0]);
        atoms.extend_from_slice(&row[1..]);
    }
    let d = dim.ok_or_else(|| format_err("missing measure header"))?;
    let span = span.unwrap_or((0.0, weights.iter().sum()));
    OccupationMeasure::from_atoms(atoms, weights, d, span)
}

pub fn load_measure(file: &Path) -> Result<OccupationMeasure> {
    let f = File::open(file).map_err(|e| SbeError::Io(format!("{}: {e}", file.display())))?;
    read_measure_csv(BufReader::new(f))
}

pub fn write_drift(field: &DriftField, mut w: impl Write) -> Result<()> {
    let grid = field.grid();
    let d = grid.dim();
    w.write_all(DRIFT_MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_u32(&mut w, d as u32)?;
    put_u32(&mut w, field.times().len() as u32)?;
    put_u32(
        &mut w,
        match field.extension() {
            Extension::Zero => 0,
            Extension::Error => 1,
        },
    )?;
    match field.declared() {
        Some(r) => {
            put_u32(&mut w, 1)?;
            put_f64s(&mut w, &[r.alpha, r.p, r.q, r.r])?;
        }
        None => put_u32(&mut w, 0)?,
    }
    put_f64s(&mut w, &grid.lo)?;
    put_f64s(&mut w, &[grid.spacing])?;
    for &n in &grid.shape {
        put_u64(&mut w, n as u64)?;
    }
    put_f64s(&mut w, field.times())?;
    put_f64s(&mut w, field.values())
}

pub fn read_drift(mut r: impl Read) -> Result<DriftField> {
    check_magic(&mut r, DRIFT_MAGIC)?;
    let d = get_u32(&mut r)? as usize;
    if d == 0 || d > 8 {
        return Err(format_err(format!("drift dimension {d} not in 1..=8")));
    }
    let nt = get_u32(&mut r)? as usize;
    let extension = match get_u32(&mut r)? {
        0 => Extension::Zero,
        1 => Extension::Error,
        e => return Err(format_err(format!("unknown extension code {e}"))),
    };
    let declared = match get_u32(&mut r)? {
        0 => None,
        1 => {
            let v = get_f64s(&mut r, 4)?;
            Some(DeclaredRegularity {
                alpha: v[0],
                p: v[1],
                q: v[2],
                r: v[3],
            })
        }
        f => return Err(format_err(format!("bad declared flag {f}"))),
    };
    let lo = get_f64s(&mut r, d)?;
    let spacing = get_f64s(&mut r, 1)?[0];
    let shape = (0..d).map(|_| get_u64(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let grid = GridSpec::new(lo, spacing, shape)?;
    let times = get_f64s(&mut r, nt)?;
    let values = get_f64s(&mut r, nt * grid.len() * d)?;
    DriftField::new(times, grid, values, extension, declared)
}

pub fn load_drift(file: &Path) -> Result<DriftField> {
    let f = File::open(file).map_err(|e| SbeError::Io(format!("{}: {e}", file.display())))?;
    read_drift(BufReader::new(f))
}

/// Create `file` and hand a buffered writer to `f`.
pub fn write_file(file: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(file).map_err(|e| SbeError::Io(format!("{}: {e}", file.display())))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(file: &Path, value: &T) -> Result<()> {
    write_file(file, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| format_err(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn sha256_file(file: &Path) -> Result<String> {
    let mut f = File::open(file).map_err(|e| SbeError::Io(format!("{}: {e}", file.display())))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(file: &Path) -> Result<Self> {
        Ok(Self {
            path: file.display().to_string(),
            sha256: sha256_file(file)?,
        })
    }
}

/// Written next to every set of artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupation::occupation;

    fn sample_path() -> SampledPath {
        SampledPath::from_fn(vec![0.0, 0.1, 0.35, 1.0], 2, |t| vec![t.sin() / 3.0, -t * std::f64::consts::PI]).unwrap()
    }

    #[test]
    fn path_csv_round_trips_exactly() {
        let p = sample_path();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let q = read_path_csv(&buf[..]).unwrap();
        assert_eq!(p, q);
        assert!(String::from_utf8(buf).unwrap().starts_with("t,x1,x2\n"));
    }

    #[test]
    fn path_bin_round_trips_and_checks_magic() {
        let p = sample_path();
        let mut buf = Vec::new();
        write_path_bin(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SBEP");
        assert_eq!(read_path_bin(&buf[..]).unwrap(), p);
        buf[0] = b'X';
        assert!(matches!(read_path_bin(&buf[..]), Err(SbeError::Format(_))));
        assert!(read_path_bin(&buf[..10]).is_err());
    }

    #[test]
    fn measure_csv_round_trips() {
        let mu = occupation(&sample_path(), 0.05, 0.9).unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&mu, &mut buf).unwrap();
        let nu = read_measure_csv(&buf[..]).unwrap();
        assert_eq!(mu.atoms(), nu.atoms());
        assert_eq!(mu.weights(), nu.weights());
        assert_eq!(mu.span(), nu.span());
    }

    #[test]
    fn drift_container_round_trips() {
        let grid = GridSpec::new(vec![-1.0, -2.0], 0.25, vec![8, 16]).unwrap();
        let field = DriftField::from_fn(vec![0.0, 0.5], grid, Extension::Zero, |t, x| vec![x[0] * t, x[1].cos()]).unwrap();
        let mut buf = Vec::new();
        write_drift(&field, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SBED");
        let back = read_drift(&buf[..]).unwrap();
        assert_eq!(back.values(), field.values());
        assert_eq!(back.times(), field.times());
        assert_eq!(back.grid(), field.grid());
        assert!(read_drift(&buf[..buf.len() - 8]).is_err());
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_path_csv("t,x1\n0,1\n1\n".as_bytes()).is_err());
        assert!(read_path_csv("a,b\n".as_bytes()).is_err());
        assert!(read_path_csv("t,x1\n0,abc\n".as_bytes()).is_err());
    }
}
