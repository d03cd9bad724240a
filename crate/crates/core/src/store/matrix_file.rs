//! The `CMTX` binary matrix format.
//!
//! ```text
//! offset  size  field
//!      0     4  magic, ASCII "CMTX"
//!      4     4  version, u32 LE (= 1)
//!      8     1  dtype code, u8 (1 = float32)
//!      9     3  reserved, zero
//!     12     8  rows, u64 LE
//!     20     8  cols, u64 LE
//!     28     *  rows*cols float32 LE, row-major
//! ```

use std::path::Path;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::matrix::MatrixF32;

pub const MAGIC: [u8; 4] = *b"CMTX";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 28;

/// Header fields of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub rows: u64,
    pub cols: u64,
}

impl MatrixHeader {
    pub fn payload_len(&self) -> Option<u64> {
        self.rows.checked_mul(self.cols)?.checked_mul(4)
    }
}

/// Serializes a matrix into the on-disk byte layout.
pub fn encode_matrix(m: &MatrixF32) -> Result<Vec<u8>> {
    let cols = m.cols();
    if let Some(i) = m.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / cols,
            col: i % cols,
            offset: (HEADER_LEN + 4 * i) as u64,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Writes `m` to `path` atomically and returns the number of bytes written.
/// Non-finite entries are rejected before anything touches the disk.
pub fn write_matrix(m: &MatrixF32, path: &Path) -> Result<u64> {
    let bytes = encode_matrix(m)?;
    write_atomic(path, &bytes)?;
    Ok(bytes.len() as u64)
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<MatrixHeader> {
    if bytes.len() < HEADER_LEN {
        // A short file with the wrong magic is reported as bad magic.
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: magic,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    if bytes[8] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype {
            path: path.into(),
            code: bytes[8],
        });
    }
    if let Some(i) = bytes[9..12].iter().position(|&b| b != 0) {
        return Err(Error::ReservedBytes {
            path: path.into(),
            offset: 9 + i,
        });
    }
    Ok(MatrixHeader {
        rows: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
        cols: u64::from_le_bytes(bytes[20..28].try_into().unwrap()),
    })
}

/// Parses an in-memory matrix file. `path` is only used in error messages.
pub fn decode_matrix(path: &Path, bytes: &[u8]) -> Result<MatrixF32> {
    let header = parse_header(path, bytes)?;
    let expected = header.payload_len().ok_or_else(|| {
        Error::InvalidInput(format!(
            "{}: {}x{} matrix is too large",
            path.display(),
            header.rows,
            header.cols
        ))
    })?;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path.into(),
            offset: HEADER_LEN as u64 + expected,
            extra: found - expected,
        });
    }
    let (rows, cols) = (header.rows as usize, header.cols as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i / cols,
                col: i % cols,
                offset: (HEADER_LEN + 4 * i) as u64,
            });
        }
        data.push(v);
    }
    MatrixF32::from_vec(rows, cols, data)
}

/// Loads and fully validates a matrix file.
pub fn load_matrix(path: &Path) -> Result<MatrixF32> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(path, &bytes)
}

/// Reads only the header, checking that the file length agrees with it.
pub fn read_header(path: &Path) -> Result<MatrixHeader> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut head = Vec::with_capacity(HEADER_LEN);
    f.by_ref()
        .take(HEADER_LEN as u64)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &head)?;
    let expected = header.payload_len().unwrap_or(u64::MAX);
    let found = len - HEADER_LEN as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path.into(),
            offset: HEADER_LEN as u64 + expected,
            extra: found - expected,
        });
    }
    Ok(header)
}
