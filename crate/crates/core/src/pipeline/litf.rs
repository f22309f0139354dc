//! LITF tensor files.
//!
//! Layout: magic `4C 49 54 46` ("LITF"), version byte `01`, dtype byte `01`
//! (little-endian `f32`), an ndim byte, `ndim` little-endian `u32` dims, then
//! the row-major payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::numerics::Matrix;

pub const MAGIC: [u8; 4] = *b"LITF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;

/// A decoded tensor: shape plus row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn encode(dims: &[usize], data: &[f32]) -> Result<Vec<u8>> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::Shape(format!(
            "{} dims exceed the LITF limit of 255",
            dims.len()
        )));
    }
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(Error::Shape(format!(
            "dims {dims:?} hold {count} values, got {}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(7 + 4 * dims.len() + 4 * data.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F32, dims.len() as u8]);
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Shape(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses LITF bytes; `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let bad = |msg: String| Error::format(path, msg);
    if bytes.len() < 7 {
        return Err(bad(format!(
            "file is {} bytes, shorter than the LITF header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(bad(format!(
            "bad magic bytes {:02X?}, expected {:02X?}",
            &bytes[..4],
            MAGIC
        )));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported LITF version {}", bytes[4])));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype code {}", bytes[5])));
    }
    let ndim = bytes[6] as usize;
    let header = 7 + 4 * ndim;
    if bytes.len() < header {
        return Err(bad(format!("truncated header: {ndim} dims declared")));
    }
    let dims: Vec<usize> = bytes[7..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| bad("dims overflow".into()))?;
    let payload = &bytes[header..];
    if payload.len() != 4 * count {
        return Err(bad(format!(
            "payload has {} bytes, dims {dims:?} need {}",
            payload.len(),
            4 * count
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor { dims, data })
}

pub fn write_tensor(path: &Path, dims: &[usize], data: &[f32]) -> Result<()> {
    let bytes = encode(dims, data)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write_image(path: &Path, img: &ImageTensor) -> Result<()> {
    write_tensor(path, &img.shape(), img.as_slice())
}

pub fn read_image(path: &Path) -> Result<ImageTensor> {
    let t = read_tensor(path)?;
    if t.dims.len() != 3 {
        return Err(Error::format(
            path,
            format!("image tensors need 3 dims, got {:?}", t.dims),
        ));
    }
    ImageTensor::from_vec(t.dims[0], t.dims[1], t.dims[2], t.data)
}

/// Stores a matrix as a 2-D tensor (values rounded to `f32`).
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let data: Vec<f32> = m.as_slice().iter().map(|&v| v as f32).collect();
    write_tensor(path, &[m.rows(), m.cols()], &data)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let t = read_tensor(path)?;
    if t.dims.len() != 2 {
        return Err(Error::format(
            path,
            format!("matrix tensors need 2 dims, got {:?}", t.dims),
        ));
    }
    Matrix::from_vec(
        t.dims[0],
        t.dims[1],
        t.data.iter().map(|&v| v as f64).collect(),
    )
}
