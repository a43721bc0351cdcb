//! On-disk formats.
//!
//! PODM (a dense matrix):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PODM"
//! 4       4     version, u32 LE (= 1)
//! 8       8     rows, u64 LE
//! 16      8     cols, u64 LE
//! 24      8·m·n values, f64 LE, column-major
//! ```
//!
//! PODF (a truncated factor): a PODM-encoded `U`, then the singular values
//! (u64 LE count followed by f64 LE values), then one byte `0`/`1` telling
//! whether a PODM-encoded `V` follows.
//!
//! CSV input has one matrix row per line and comma-separated decimals.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{PodError, Result};
use crate::matcore::{DenseMatrix, TruncatedFactor};

pub const MAGIC: &[u8; 4] = b"PODM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;

/// Values converted per read call.
const CHUNK_VALUES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PodmHeader {
    pub rows: usize,
    pub cols: usize,
}

impl PodmHeader {
    /// Bytes of value data following the header.
    pub fn data_len(&self) -> u64 {
        self.rows as u64 * self.cols as u64 * 8
    }
}

/// Reader that tracks its absolute byte offset for error messages.
pub(crate) struct Tracked<R> {
    pub(crate) inner: R,
    pub(crate) offset: u64,
}

impl<R: Read> Tracked<R> {
    pub(crate) fn new(inner: R, offset: u64) -> Self {
        Tracked { inner, offset }
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let start = self.offset;
        let mut done = 0;
        while done < buf.len() {
            match self.inner.read(&mut buf[done..]) {
                Ok(0) => {
                    return Err(PodError::format(
                        start + done as u64,
                        format!("unexpected end of file while reading {what}"),
                    ))
                }
                Ok(n) => done += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b, what)?;
        Ok(b[0])
    }

    /// Reads `out.len()` little-endian f64 values.
    pub(crate) fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        let mut buf = vec![0u8; CHUNK_VALUES.min(out.len()) * 8];
        for chunk in out.chunks_mut(CHUNK_VALUES) {
            let bytes = &mut buf[..chunk.len() * 8];
            self.fill(bytes, "matrix values")?;
            for (x, b) in chunk.iter_mut().zip(bytes.chunks_exact(8)) {
                *x = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
            }
        }
        Ok(())
    }

    pub(crate) fn header(&mut self) -> Result<PodmHeader> {
        let at = self.offset;
        let mut magic = [0u8; 4];
        self.fill(&mut magic, "magic bytes")?;
        if &magic != MAGIC {
            return Err(PodError::format(at, format!("bad magic {magic:?}, expected \"PODM\"")));
        }
        let version = self.u32("version")?;
        if version != VERSION {
            return Err(PodError::format(at + 4, format!("unsupported version {version}")));
        }
        let rows = self.u64("row count")?;
        let cols = self.u64("column count")?;
        if rows == 0 || cols == 0 {
            return Err(PodError::format(at + 8, format!("empty matrix {rows}x{cols}")));
        }
        let too_big = || PodError::format(at + 8, format!("matrix {rows}x{cols} is too large"));
        let rows = usize::try_from(rows).map_err(|_| too_big())?;
        let cols = usize::try_from(cols).map_err(|_| too_big())?;
        rows.checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(too_big)?;
        Ok(PodmHeader { rows, cols })
    }

    fn matrix(&mut self) -> Result<DenseMatrix> {
        let h = self.header()?;
        let data_at = self.offset;
        let mut data = vec![0.0; h.rows * h.cols];
        self.f64s(&mut data)?;
        DenseMatrix::from_column_major(h.rows, h.cols, data).map_err(|e| match e {
            PodError::NonFinite { row, col } => PodError::format(
                data_at + 8 * (col as u64 * h.rows as u64 + row as u64),
                format!("non-finite value at row {row}, column {col}"),
            ),
            other => other,
        })
    }
}

pub fn write_podm<W: Write>(w: &mut W, a: &DenseMatrix) -> Result<()> {
    write_podm_raw(w, a.as_mat())
}

fn write_podm_raw<W: Write>(w: &mut W, a: &DMatrix<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(CHUNK_VALUES * 8);
    for chunk in a.as_slice().chunks(CHUNK_VALUES) {
        buf.clear();
        for x in chunk {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_podm<R: Read>(r: R) -> Result<DenseMatrix> {
    Tracked::new(r, 0).matrix()
}

pub fn read_podm_header<R: Read>(r: R) -> Result<PodmHeader> {
    Tracked::new(r, 0).header()
}

pub fn write_podm_file(path: &Path, a: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_podm(&mut w, a)?;
    w.flush()?;
    Ok(())
}

pub fn read_podm_file(path: &Path) -> Result<DenseMatrix> {
    read_podm(BufReader::new(File::open(path)?))
}

/// Writes `U`, `σ` and, when present, `V`. Factors with no modes are rejected.
pub fn write_podf<W: Write>(w: &mut W, f: &TruncatedFactor) -> Result<()> {
    if f.is_empty() {
        return Err(PodError::param("cannot store a factor with no modes"));
    }
    write_podm_raw(w, f.u())?;
    w.write_all(&(f.rank() as u64).to_le_bytes())?;
    for s in f.sigma().iter() {
        w.write_all(&s.to_le_bytes())?;
    }
    match f.v() {
        Some(v) => {
            w.write_all(&[1])?;
            write_podm_raw(w, v)?;
        }
        None => w.write_all(&[0])?,
    }
    Ok(())
}

pub fn read_podf<R: Read>(r: R) -> Result<TruncatedFactor> {
    let mut t = Tracked::new(r, 0);
    let u = t.matrix()?;
    let count_at = t.offset;
    let count = t.u64("singular value count")?;
    if count != u.cols() as u64 {
        return Err(PodError::format(
            count_at,
            format!("{count} singular values for {} left vectors", u.cols()),
        ));
    }
    let mut sigma = vec![0.0; u.cols()];
    t.f64s(&mut sigma)?;
    let flag_at = t.offset;
    let v = match t.u8("V flag")? {
        0 => None,
        1 => Some(t.matrix()?.into_inner()),
        other => return Err(PodError::format(flag_at, format!("V flag must be 0 or 1, found {other}"))),
    };
    TruncatedFactor::new(u.into_inner(), DVector::from_vec(sigma), v)
        .map_err(|e| PodError::format(count_at, e.to_string()))
}

pub fn write_podf_file(path: &Path, f: &TruncatedFactor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_podf(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn read_podf_file(path: &Path) -> Result<TruncatedFactor> {
    read_podf(BufReader::new(File::open(path)?))
}

/// Parses CSV text with one matrix row per line. Blank lines are skipped.
pub fn read_csv<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            PodError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(PodError::Parse {
                    line,
                    message: format!("expected {c} fields, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| PodError::Parse {
                line,
                message: format!("field {} is not a number: {field:?}", j + 1),
            })?;
            if !x.is_finite() {
                return Err(PodError::Parse {
                    line,
                    message: format!("field {} is not finite", j + 1),
                });
            }
            values.push(x);
        }
        rows += 1;
    }
    let cols = cols.ok_or(PodError::Parse {
        line: 1,
        message: "no data rows".into(),
    })?;
    DenseMatrix::from_row_major(rows, cols, values)
}

pub fn read_csv_file(path: &Path) -> Result<DenseMatrix> {
    read_csv(BufReader::new(File::open(path)?))
}
