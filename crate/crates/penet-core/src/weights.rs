//! Deterministic initialization and the binary weight container.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "PENW"
//! version u32      1
//! count   u32      number of tensor entries
//! entry   repeated count times:
//!   name_len u16
//!   name     UTF-8 bytes
//!   ndim     u8
//!   dims     ndim x u32
//!   values   product(dims) x f32, row-major
//! ```
//!
//! Entries are written in the canonical parameter order, so
//! save -> load -> save is byte-identical. The loader accepts entries in
//! any order but rejects duplicates, missing or unexpected tensors, and
//! shape mismatches against the 4-level schema.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::model::PENetParams;
use crate::rng::SplitMix64;
use crate::tensor::Scalar;

pub const WEIGHT_MAGIC: [u8; 4] = *b"PENW";
pub const WEIGHT_VERSION: u32 = 1;

/// Weight-container failures.
#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:?}, expected \"PENW\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported weight file version {0}")]
    BadVersion(u32),
    #[error("file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("tensor name at byte {offset} is not valid UTF-8")]
    BadName { offset: usize },
    #[error("duplicate tensor {0}")]
    DuplicateTensor(String),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    UnexpectedTensor(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{got} trailing bytes after the last tensor entry")]
    TrailingData { got: usize },
}

/// How [`init_params`] fills the weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// All weights and biases zero.
    Zero,
    /// Weights uniform in `[-b, b]` with `b = sqrt(1 / fan_in)` where
    /// `fan_in = in_channels * k^2`; biases zero. Draws come from a
    /// SplitMix64 stream in canonical tensor order, so the same seed
    /// reproduces the same parameters on any platform.
    Random,
}

/// Builds a full parameter set. Deterministic: seed and scheme fully
/// determine every value.
pub fn init_params<T: Scalar>(seed: u64, scheme: InitScheme) -> PENetParams<T> {
    let mut params = PENetParams::zeros().expect("static shapes are valid");
    if scheme == InitScheme::Zero {
        return params;
    }
    let mut rng = SplitMix64::new(seed);
    params.visit_convs_mut(|_, conv| {
        let fan_in = (conv.in_channels() * conv.kernel() * conv.kernel()) as f64;
        let bound = (1.0 / fan_in).sqrt();
        for w in conv.weights_mut() {
            *w = T::from_f64(rng.next_in(-bound, bound));
        }
    });
    params
}

/// Serializes the parameters into the container layout.
pub fn encode(params: &PENetParams<f32>) -> Vec<u8> {
    let mut entries: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    params.visit_convs(|name, conv| {
        entries.push((
            format!("{name}.weight"),
            conv.weight_shape(),
            conv.weights().to_vec(),
        ));
        entries.push((
            format!("{name}.bias"),
            vec![conv.out_channels()],
            conv.bias().to_vec(),
        ));
    });

    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHT_MAGIC);
    out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, shape, values) in entries {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        if self.pos + n > self.bytes.len() {
            return Err(WeightsError::Truncated { offset: self.pos });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16_le(&mut self) -> Result<u16, WeightsError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32_le(&mut self) -> Result<u32, WeightsError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a container and validates it against the 4-level schema.
pub fn decode(bytes: &[u8]) -> Result<PENetParams<f32>, WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != WEIGHT_MAGIC {
        return Err(WeightsError::BadMagic {
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = r.u32_le()?;
    if version != WEIGHT_VERSION {
        return Err(WeightsError::BadVersion(version));
    }
    let count = r.u32_le()? as usize;

    let mut seen: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::new();
    for _ in 0..count {
        let name_len = r.u16_le()? as usize;
        let name_off = r.pos;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| WeightsError::BadName { offset: name_off })?
            .to_string();
        let ndim = r.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32_le()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            let b = r.take(4)?;
            values.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        }
        if seen.insert(name.clone(), (shape, values)).is_some() {
            return Err(WeightsError::DuplicateTensor(name));
        }
    }
    if r.pos != bytes.len() {
        return Err(WeightsError::TrailingData {
            got: bytes.len() - r.pos,
        });
    }

    let mut params = PENetParams::<f32>::zeros().expect("static shapes are valid");
    let mut error = None;
    params.visit_convs_mut(|name, conv| {
        if error.is_some() {
            return;
        }
        for (suffix, expected_shape) in [
            ("weight", conv.weight_shape()),
            ("bias", vec![conv.out_channels()]),
        ] {
            let key = format!("{name}.{suffix}");
            match seen.remove(&key) {
                None => {
                    error = Some(WeightsError::MissingTensor(key));
                    return;
                }
                Some((shape, values)) => {
                    if shape != expected_shape {
                        error = Some(WeightsError::ShapeMismatch {
                            name: key,
                            expected: expected_shape,
                            got: shape,
                        });
                        return;
                    }
                    let dst = if suffix == "weight" {
                        conv.weights_mut()
                    } else {
                        conv.bias_mut()
                    };
                    dst.copy_from_slice(&values);
                }
            }
        }
    });
    if let Some(e) = error {
        return Err(e);
    }
    if let Some(name) = seen.keys().min().cloned() {
        return Err(WeightsError::UnexpectedTensor(name));
    }
    Ok(params)
}

/// Writes the canonical container for `params`.
pub fn save(params: &PENetParams<f32>, path: impl AsRef<Path>) -> Result<(), WeightsError> {
    fs::write(path, encode(params))?;
    Ok(())
}

/// Reads and validates a container.
pub fn load(path: impl AsRef<Path>) -> Result<PENetParams<f32>, WeightsError> {
    decode(&fs::read(path)?)
}
