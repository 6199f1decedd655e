//! Binary matrix file format.
//!
//! Layout: magic `CMPLXMAT`, then `u64` rows and `u64` cols (little-endian),
//! followed by row-major float64 `(re, im)` pairs, little-endian.

use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, CMatrix};

const MAGIC: &[u8; 8] = b"CMPLXMAT";

pub fn write_matrix<W: Write>(w: &mut W, m: &CMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let c = m[(i, j)];
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<CMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MatrixFormat("bad magic, expected CMPLXMAT".into()));
    }
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let rows = u64::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let cols = u64::from_le_bytes(buf) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::MatrixFormat(format!(
            "degenerate shape {rows}x{cols}"
        )));
    }
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::MatrixFormat("shape overflow".into()))?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let im = f64::from_le_bytes(buf);
        entries.push(Complex64::new(re, im));
    }
    let m = CMatrix::from_row_iterator(rows, cols, entries);
    check_finite(&m, "matrix file")?;
    Ok(m)
}

pub fn save_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)?;
    f.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<CMatrix> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_matrix(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sample_haar_unitary, RngSeed};

    #[test]
    fn round_trip() {
        let m = sample_haar_unitary(5, RngSeed(3)).unwrap().into_matrix();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        // 8 magic + 16 shape + 5*5*16 payload
        assert_eq!(buf.len(), 8 + 16 + 25 * 16);
        let back = read_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut buf = b"NOTAMTRX".to_vec();
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&1.0f64.to_le_bytes());
        buf.extend_from_slice(&0.0f64.to_le_bytes());
        assert!(matches!(
            read_matrix(&mut buf.as_slice()),
            Err(Error::MatrixFormat(_))
        ));
    }

    #[test]
    fn rejects_truncated_payload() {
        let m = CMatrix::identity(3, 3);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_matrix(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"CMPLXMAT");
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&f64::NAN.to_le_bytes());
        buf.extend_from_slice(&0.0f64.to_le_bytes());
        assert!(matches!(
            read_matrix(&mut buf.as_slice()),
            Err(Error::NonFinite(_))
        ));
    }
}
