//! Bit-exact NPY tensor files.
//!
//! Reads v1.0/v2.0 files with dtype `<f4` or `<f8` in C order; writes
//! canonical v1.0 with the header padded to a 64-byte boundary. f32 payloads
//! are widened to f64 in memory and narrowed back on write, so a
//! read-then-write round trip reproduces the original bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::conv::{unfold_kernel, KernelTensor, SignalTensor};
use crate::error::{Error as CrateError, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("bad magic at byte {offset}: not an NPY file")]
    BadMagic { offset: usize },
    #[error("unsupported NPY version {major}.{minor} at byte {offset}")]
    UnsupportedVersion { major: u8, minor: u8, offset: usize },
    #[error("file truncated at byte {offset}: {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("header syntax error at byte {offset}: {detail}")]
    HeaderSyntax { offset: usize, detail: String },
    #[error("unsupported dtype '{descr}' at byte {offset} (expected '<f4' or '<f8')")]
    UnsupportedDtype { descr: String, offset: usize },
    #[error("fortran_order=True at byte {offset} is not supported")]
    FortranOrder { offset: usize },
    #[error("unsupported shape {shape:?} at byte {offset}: {detail}")]
    BadShape {
        shape: Vec<usize>,
        offset: usize,
        detail: &'static str,
    },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, got {got}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        got: usize,
    },
    #[error("{extra} trailing bytes after payload at byte {offset}")]
    TrailingData { offset: usize, extra: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn descr(&self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn item_size(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// An in-memory tensor file: dtype, shape (rank 1..=4), and the payload in C
/// order, widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorFile {
    pub fn new(dtype: Dtype, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(CrateError::InvalidParameter(format!(
                "tensor rank {} unsupported (expected 1 to 4)",
                shape.len()
            )));
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(CrateError::InvalidParameter(format!(
                "empty tensors are unsupported (shape {shape:?})"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(CrateError::InvalidParameter(format!(
                "payload length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(CrateError::NonFinite(idx));
        }
        Ok(Self { dtype, shape, data })
    }

    pub fn from_matrix(m: &Matrix, dtype: Dtype) -> Self {
        Self {
            dtype,
            shape: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }

    pub fn from_kernel(t: &KernelTensor, dtype: Dtype) -> Self {
        Self {
            dtype,
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }

    pub fn from_signal(s: &SignalTensor, dtype: Dtype) -> Self {
        Self {
            dtype,
            shape: s.shape().to_vec(),
            data: s.data().to_vec(),
        }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        match self.shape[..] {
            [r, c] => Matrix::from_vec(r, c, self.data.clone()),
            _ => Err(CrateError::InvalidParameter(format!(
                "expected a 2-D tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn to_kernel(&self) -> Result<KernelTensor> {
        match self.shape[..] {
            [o, c, kh, kw] => KernelTensor::from_vec(o, c, kh, kw, self.data.clone()),
            _ => Err(CrateError::InvalidParameter(format!(
                "expected a 4-D kernel tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn to_signal(&self) -> Result<SignalTensor> {
        match self.shape[..] {
            [c, h, w] => SignalTensor::from_vec(c, h, w, self.data.clone()),
            _ => Err(CrateError::InvalidParameter(format!(
                "expected a 3-D signal tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// The weight-matrix view: 2-D tensors directly, 4-D kernels unfolded.
    pub fn as_weight_matrix(&self) -> Result<Matrix> {
        match self.rank() {
            2 => self.to_matrix(),
            4 => Ok(unfold_kernel(&self.to_kernel()?)),
            r => Err(CrateError::InvalidParameter(format!(
                "expected a 2-D matrix or 4-D kernel, got rank {r}"
            ))),
        }
    }
}

fn parse_header_dict(header: &str, base_offset: usize) -> std::result::Result<(String, bool, Vec<usize>), NpyError> {
    let syntax = |detail: &str| NpyError::HeaderSyntax {
        offset: base_offset,
        detail: detail.to_string(),
    };

    let inner = header
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.trim_end().strip_suffix('}'))
        .ok_or_else(|| syntax("header is not a dict"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;

    let mut rest = inner.trim();
    while !rest.is_empty() {
        // key
        let Some(open) = rest.find('\'') else { break };
        let after = &rest[open + 1..];
        let close = after.find('\'').ok_or_else(|| syntax("unterminated key"))?;
        let key = &after[..close];
        let after_key = after[close + 1..].trim_start();
        let after_colon = after_key
            .strip_prefix(':')
            .ok_or_else(|| syntax("missing ':' after key"))?
            .trim_start();

        // value
        let (value, tail): (&str, &str) = if let Some(v) = after_colon.strip_prefix('\'') {
            let end = v.find('\'').ok_or_else(|| syntax("unterminated string value"))?;
            (&v[..end], &v[end + 1..])
        } else if after_colon.starts_with('(') {
            let end = after_colon
                .find(')')
                .ok_or_else(|| syntax("unterminated tuple value"))?;
            (&after_colon[..=end], &after_colon[end + 1..])
        } else {
            let end = after_colon
                .find(',')
                .unwrap_or(after_colon.len());
            (after_colon[..end].trim_end(), &after_colon[end..])
        };

        match key {
            "descr" => descr = Some(value.to_string()),
            "fortran_order" => {
                fortran = Some(match value {
                    "True" => true,
                    "False" => false,
                    other => return Err(syntax(&format!("bad fortran_order '{other}'"))),
                })
            }
            "shape" => {
                let body = value
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| syntax("shape is not a tuple"))?;
                let dims: std::result::Result<Vec<usize>, _> = body
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>())
                    .collect();
                shape = Some(dims.map_err(|_| syntax("non-integer shape entry"))?);
            }
            other => return Err(syntax(&format!("unknown header key '{other}'"))),
        }
        rest = tail.trim_start().strip_prefix(',').unwrap_or(tail).trim_start();
    }

    Ok((
        descr.ok_or_else(|| syntax("missing 'descr'"))?,
        fortran.ok_or_else(|| syntax("missing 'fortran_order'"))?,
        shape.ok_or_else(|| syntax("missing 'shape'"))?,
    ))
}

/// Parse an NPY byte buffer.
pub fn parse_npy(bytes: &[u8]) -> std::result::Result<TensorFile, NpyError> {
    if bytes.len() < 6 || &bytes[..6] != MAGIC {
        return Err(NpyError::BadMagic { offset: 0 });
    }
    if bytes.len() < 8 {
        return Err(NpyError::Truncated {
            offset: bytes.len(),
            what: "version bytes",
        });
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, header_start) = match (major, minor) {
        (1, 0) => {
            if bytes.len() < 10 {
                return Err(NpyError::Truncated {
                    offset: bytes.len(),
                    what: "v1.0 header length",
                });
            }
            (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10)
        }
        (2, 0) => {
            if bytes.len() < 12 {
                return Err(NpyError::Truncated {
                    offset: bytes.len(),
                    what: "v2.0 header length",
                });
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        _ => {
            return Err(NpyError::UnsupportedVersion {
                major,
                minor,
                offset: 6,
            })
        }
    };

    let payload_start = header_start + header_len;
    if bytes.len() < payload_start {
        return Err(NpyError::Truncated {
            offset: bytes.len(),
            what: "header dict",
        });
    }
    let header = std::str::from_utf8(&bytes[header_start..payload_start]).map_err(|_| {
        NpyError::HeaderSyntax {
            offset: header_start,
            detail: "header is not ASCII".to_string(),
        }
    })?;
    let (descr, fortran, shape) = parse_header_dict(header, header_start)?;

    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        _ => {
            return Err(NpyError::UnsupportedDtype {
                descr,
                offset: header_start,
            })
        }
    };
    if fortran {
        return Err(NpyError::FortranOrder {
            offset: header_start,
        });
    }
    if shape.is_empty() || shape.len() > 4 {
        return Err(NpyError::BadShape {
            shape,
            offset: header_start,
            detail: "rank must be 1 to 4",
        });
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(NpyError::BadShape {
            shape,
            offset: header_start,
            detail: "empty tensors unsupported",
        });
    }

    let count: usize = shape.iter().product();
    let expected = count * dtype.item_size();
    let payload = &bytes[payload_start..];
    if payload.len() < expected {
        return Err(NpyError::TruncatedPayload {
            offset: bytes.len(),
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(NpyError::TrailingData {
            offset: payload_start + expected,
            extra: payload.len() - expected,
        });
    }

    let data: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect(),
    };

    Ok(TensorFile { dtype, shape, data })
}

/// Serialize to canonical NPY v1.0 bytes.
pub fn to_npy_bytes(t: &TensorFile) -> Vec<u8> {
    let shape = match t.shape.len() {
        1 => format!("({},)", t.shape[0]),
        _ => format!(
            "({})",
            t.shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        t.dtype.descr(),
        shape
    );
    // Pad with spaces so magic + version + length + header is 64-aligned,
    // with the header terminated by a newline.
    let prefix = MAGIC.len() + 2 + 2;
    let unpadded = prefix + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;

    let mut out = Vec::with_capacity(prefix + header_len + t.data.len() * t.dtype.item_size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat(b' ').take(padding));
    out.push(b'\n');
    match t.dtype {
        Dtype::F32 => {
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Read an NPY file from disk.
pub fn read_npy(path: &Path) -> Result<TensorFile> {
    let bytes = fs::read(path).map_err(|e| CrateError::io(path, e))?;
    Ok(parse_npy(&bytes)?)
}

/// Write an NPY v1.0 file to disk.
pub fn write_npy(path: &Path, t: &TensorFile) -> Result<()> {
    let bytes = to_npy_bytes(t);
    let mut file = fs::File::create(path).map_err(|e| CrateError::io(path, e))?;
    file.write_all(&bytes).map_err(|e| CrateError::io(path, e))?;
    Ok(())
}

/// Write a 0/1 mask as an f32 NPY file (framework-friendly multiplicative
/// mask). Rejects non-binary entries.
pub fn write_mask(path: &Path, mask: &Matrix) -> Result<()> {
    if let Some(idx) = mask.data().iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(CrateError::InvalidParameter(format!(
            "mask entry at flat index {idx} is {}, expected 0 or 1",
            mask.data()[idx]
        )));
    }
    write_npy(path, &TensorFile::from_matrix(mask, Dtype::F32))
}
