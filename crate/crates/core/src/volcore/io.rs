//! Single-file little-endian NIfTI-1 (uncompressed) and raw + JSON sidecar
//! readers and writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Grid, LabelMap3D, Result, Volume3D, VolumeError};
use crate::util::write_atomic;

pub const NIFTI_HEADER_SIZE: usize = 348;
const NIFTI_VOX_OFFSET: usize = 352;
const NIFTI_MAGIC: &[u8; 4] = b"n+1\0";

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_XYZT_UNITS: usize = 123;
const OFF_QFORM_CODE: usize = 252;
const OFF_SFORM_CODE: usize = 254;
const OFF_SROW_X: usize = 280;
const OFF_MAGIC: usize = 344;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "u8")]
    U8,
    #[serde(rename = "i16")]
    I16,
    #[serde(rename = "f32")]
    F32,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I16 => 2,
            Dtype::F32 => 4,
        }
    }

    fn nifti_code(self) -> i16 {
        match self {
            Dtype::U8 => 2,
            Dtype::I16 => 4,
            Dtype::F32 => 16,
        }
    }

    fn from_nifti_code(code: i16) -> Option<Self> {
        match code {
            2 => Some(Dtype::U8),
            4 => Some(Dtype::I16),
            16 => Some(Dtype::F32),
            _ => None,
        }
    }

    fn decode(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            Dtype::U8 => bytes.iter().map(|&b| b as f64).collect(),
            Dtype::I16 => bytes
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
                .collect(),
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
        }
    }

    fn encode(self, values: impl Iterator<Item = f64>, out: &mut Vec<u8>) {
        match self {
            Dtype::U8 => out.extend(values.map(|v| v as u8)),
            Dtype::I16 => values.for_each(|v| out.extend_from_slice(&(v as i16).to_le_bytes())),
            Dtype::F32 => values.for_each(|v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        }
    }
}

/// On-disk container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    /// Single-file `.nii`.
    Nifti,
    /// Little-endian payload `<name>.raw` plus `<name>.json` sidecar.
    Raw,
}

impl VolumeFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path.to_string_lossy().to_ascii_lowercase();
        if name.ends_with(".nii") {
            Ok(VolumeFormat::Nifti)
        } else if name.ends_with(".raw") {
            Ok(VolumeFormat::Raw)
        } else {
            Err(VolumeError::UnsupportedFormat(path.display().to_string()))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    dims: [usize; 3],
    spacing: [f64; 3],
    dtype: Dtype,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn io_err(path: &Path, source: std::io::Error) -> VolumeError {
    VolumeError::Io {
        path: path.display().to_string(),
        source,
    }
}

struct Decoded {
    grid: Grid,
    values: Vec<f64>,
}

fn read_le_i16(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn read_le_i32(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

fn read_le_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

fn malformed(offset: usize, reason: impl Into<String>) -> VolumeError {
    VolumeError::MalformedHeader {
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn decode_nifti(bytes: &[u8]) -> Result<Decoded> {
    if bytes.len() < NIFTI_HEADER_SIZE {
        return Err(VolumeError::TruncatedPayload {
            offset: 0,
            expected: NIFTI_HEADER_SIZE as u64,
            actual: bytes.len() as u64,
        });
    }
    let sizeof_hdr = read_le_i32(bytes, 0);
    if sizeof_hdr != NIFTI_HEADER_SIZE as i32 {
        let reason = if sizeof_hdr.swap_bytes() == NIFTI_HEADER_SIZE as i32 {
            "big-endian files are not supported".to_string()
        } else {
            format!("sizeof_hdr is {sizeof_hdr}, expected 348")
        };
        return Err(malformed(0, reason));
    }
    if &bytes[OFF_MAGIC..OFF_MAGIC + 4] != NIFTI_MAGIC {
        return Err(malformed(
            OFF_MAGIC,
            "magic is not \"n+1\\0\" (only single-file NIfTI-1 is supported)",
        ));
    }
    let ndim = read_le_i16(bytes, OFF_DIM);
    let mut dims = [1usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        let off = OFF_DIM + 2 * (a + 1);
        let v = read_le_i16(bytes, off);
        if v <= 0 {
            return Err(malformed(off, format!("dim[{}] = {v} is not positive", a + 1)));
        }
        *d = v as usize;
    }
    let extra_dims_are_unit = (4..=7).all(|a| {
        a > ndim as usize || read_le_i16(bytes, OFF_DIM + 2 * a) == 1
    });
    if !(1..=7).contains(&ndim) || (ndim > 3 && !extra_dims_are_unit) {
        return Err(malformed(OFF_DIM, format!("dim[0] = {ndim}: only 3D volumes are supported")));
    }
    let mut spacing = [1.0f64; 3];
    for (a, s) in spacing.iter_mut().enumerate() {
        let off = OFF_PIXDIM + 4 * (a + 1);
        let v = read_le_f32(bytes, off);
        if !(v > 0.0 && v.is_finite()) {
            return Err(malformed(off, format!("pixdim[{}] = {v} is not positive", a + 1)));
        }
        *s = v as f64;
    }
    let code = read_le_i16(bytes, OFF_DATATYPE);
    let dtype = Dtype::from_nifti_code(code).ok_or_else(|| VolumeError::UnsupportedDtype {
        offset: OFF_DATATYPE as u64,
        dtype: format!("NIfTI datatype code {code}"),
    })?;
    let vox_offset = read_le_f32(bytes, OFF_VOX_OFFSET);
    if !(vox_offset >= NIFTI_HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(malformed(OFF_VOX_OFFSET, format!("vox_offset = {vox_offset} is invalid")));
    }
    let start = vox_offset as usize;
    let grid = Grid::new(dims, spacing)?;
    let expected = grid.len() * dtype.size();
    let available = bytes.len().saturating_sub(start);
    if available < expected {
        return Err(VolumeError::TruncatedPayload {
            offset: start as u64,
            expected: expected as u64,
            actual: available as u64,
        });
    }
    let values = dtype.decode(&bytes[start..start + expected]);
    Ok(Decoded { grid, values })
}

fn encode_nifti(grid: &Grid, dtype: Dtype, values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = vec![0u8; NIFTI_VOX_OFFSET];
    let put_i16 = |out: &mut Vec<u8>, off: usize, v: i16| {
        out[off..off + 2].copy_from_slice(&v.to_le_bytes())
    };
    let put_f32 = |out: &mut Vec<u8>, off: usize, v: f32| {
        out[off..off + 4].copy_from_slice(&v.to_le_bytes())
    };
    out[0..4].copy_from_slice(&(NIFTI_HEADER_SIZE as i32).to_le_bytes());
    put_i16(&mut out, OFF_DIM, 3);
    for a in 0..3 {
        put_i16(&mut out, OFF_DIM + 2 * (a + 1), grid.dims[a] as i16);
    }
    for a in 4..8 {
        put_i16(&mut out, OFF_DIM + 2 * a, 1);
    }
    put_i16(&mut out, OFF_DATATYPE, dtype.nifti_code());
    put_i16(&mut out, OFF_BITPIX, (dtype.size() * 8) as i16);
    put_f32(&mut out, OFF_PIXDIM, 1.0);
    for a in 0..3 {
        put_f32(&mut out, OFF_PIXDIM + 4 * (a + 1), grid.spacing[a] as f32);
    }
    put_f32(&mut out, OFF_VOX_OFFSET, NIFTI_VOX_OFFSET as f32);
    put_f32(&mut out, OFF_SCL_SLOPE, 1.0);
    // mm, seconds
    out[OFF_XYZT_UNITS] = 2 | 8;
    put_i16(&mut out, OFF_QFORM_CODE, 0);
    put_i16(&mut out, OFF_SFORM_CODE, 1);
    for a in 0..3 {
        put_f32(&mut out, OFF_SROW_X + 16 * a + 4 * a, grid.spacing[a] as f32);
    }
    out[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(NIFTI_MAGIC);
    dtype.encode(values, &mut out);
    out
}

fn decode_raw(path: &Path) -> Result<Decoded> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| io_err(&side, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| {
        malformed(0, format!("sidecar {}: {e}", side.display()))
    })?;
    let grid = Grid::new(sidecar.dims, sidecar.spacing)?;
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let expected = grid.len() * sidecar.dtype.size();
    if bytes.len() < expected {
        return Err(VolumeError::TruncatedPayload {
            offset: 0,
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    if bytes.len() > expected {
        return Err(malformed(
            expected,
            format!("{} trailing bytes after payload", bytes.len() - expected),
        ));
    }
    Ok(Decoded {
        grid,
        values: sidecar.dtype.decode(&bytes),
    })
}

fn read(path: &Path) -> Result<Decoded> {
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Nifti => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            decode_nifti(&bytes)
        }
        VolumeFormat::Raw => decode_raw(path),
    }
}

fn write(path: &Path, grid: &Grid, dtype: Dtype, values: impl Iterator<Item = f64>) -> Result<()> {
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Nifti => {
            let bytes = encode_nifti(grid, dtype, values);
            write_atomic(path, &bytes).map_err(|e| io_err(path, e))
        }
        VolumeFormat::Raw => {
            let mut bytes = Vec::with_capacity(grid.len() * dtype.size());
            dtype.encode(values, &mut bytes);
            let sidecar = Sidecar {
                dims: grid.dims,
                spacing: grid.spacing,
                dtype,
            };
            let side = sidecar_path(path);
            let text = serde_json::to_string(&sidecar).expect("sidecar serializes");
            write_atomic(&side, text.as_bytes()).map_err(|e| io_err(&side, e))?;
            write_atomic(path, &bytes).map_err(|e| io_err(path, e))
        }
    }
}

/// Loads an intensity volume; the format is chosen from the extension
/// (`.nii` or `.raw`). Integer dtypes are converted without scaling.
pub fn load_volume(path: &Path) -> Result<Volume3D> {
    let d = read(path)?;
    Volume3D::from_grid(d.grid, d.values)
}

/// Saves an intensity volume as float32. Values that are exactly
/// representable in float32 round-trip bit-exactly.
pub fn save_volume(v: &Volume3D, path: &Path) -> Result<()> {
    write(path, &v.grid(), Dtype::F32, v.data().iter().copied())
}

pub fn load_labels(path: &Path) -> Result<LabelMap3D> {
    let d = read(path)?;
    LabelMap3D::from_volume(&Volume3D::from_grid(d.grid, d.values)?)
}

/// Saves a label map as uint8 when every label fits, otherwise int16.
pub fn save_labels(m: &LabelMap3D, path: &Path) -> Result<()> {
    let max = m.max_label();
    let dtype = if max <= u8::MAX as u32 {
        Dtype::U8
    } else if max <= i16::MAX as u32 {
        Dtype::I16
    } else {
        return Err(VolumeError::UnsupportedDtype {
            offset: 0,
            dtype: format!("label {max} exceeds int16"),
        });
    };
    write(path, &m.grid(), dtype, m.labels().iter().map(|&l| l as f64))
}
