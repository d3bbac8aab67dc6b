//! 8-bit RGB rasters, binary PPM (P6) codec, and tensor conversion.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::tensor::{Scalar, Tensor};

/// Largest accepted image side, a sanity cap on header dimensions.
pub const MAX_IMAGE_SIDE: usize = 1 << 16;

/// PPM codec and conversion failures.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a binary PPM: expected magic \"P6\" at byte {offset}")]
    BadMagic { offset: usize },
    #[error("malformed header at byte {offset}: {what}")]
    Header { offset: usize, what: String },
    #[error("unsupported maxval {maxval} at byte {offset}: only 255")]
    Maxval { maxval: u64, offset: usize },
    #[error("payload truncated at byte {offset}: expected {expected} bytes, found {got}")]
    Truncated {
        offset: usize,
        expected: usize,
        got: usize,
    },
    #[error("tensor has {0} channels, expected 3")]
    NotRgb(usize),
    #[error("pixel buffer length {len} does not match {width}x{height}x3")]
    BufferLength {
        len: usize,
        width: usize,
        height: usize,
    },
}

/// Interleaved RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != 3 * width * height {
            return Err(ImageError::BufferLength {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Encodes with the normalized header `P6\n{w} {h}\n255\n`.
    pub fn encode_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode_ppm(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut p = PpmParser { bytes, pos: 0 };
        p.expect_magic()?;
        let width = p.next_number("width")?;
        let height = p.next_number("height")?;
        let maxval_off = p.pos;
        let maxval = p.next_number("maxval")? as u64;
        if maxval != 255 {
            return Err(ImageError::Maxval {
                maxval,
                offset: maxval_off,
            });
        }
        p.single_whitespace()?;

        let (width, height) = (width as usize, height as usize);
        if width == 0 || height == 0 || width > MAX_IMAGE_SIDE || height > MAX_IMAGE_SIDE {
            return Err(ImageError::Header {
                offset: p.pos,
                what: format!("unsupported dimensions {width}x{height}"),
            });
        }
        let expected = 3 * width * height;
        let got = bytes.len() - p.pos;
        if got < expected {
            return Err(ImageError::Truncated {
                offset: p.pos,
                expected,
                got,
            });
        }
        let pixels = bytes[p.pos..p.pos + expected].to_vec();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        fs::write(path, self.encode_ppm())?;
        Ok(())
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        Self::decode_ppm(&fs::read(path)?)
    }
}

struct PpmParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PpmParser<'_> {
    fn expect_magic(&mut self) -> Result<(), ImageError> {
        if self.bytes.len() < 2 || &self.bytes[..2] != b"P6" {
            return Err(ImageError::BadMagic { offset: 0 });
        }
        self.pos = 2;
        Ok(())
    }

    /// Skips whitespace and `#` comments before a header token.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_digit() {
                value = value * 10 + (b - b'0') as u64;
                if value > u32::MAX as u64 {
                    return Err(ImageError::Header {
                        offset: start,
                        what: format!("{what} out of range"),
                    });
                }
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(ImageError::Header {
                offset: start,
                what: format!("expected {what}"),
            });
        }
        Ok(value as u32)
    }

    /// Exactly one whitespace byte separates the maxval from the payload.
    fn single_whitespace(&mut self) -> Result<(), ImageError> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ImageError::Header {
                offset: self.pos,
                what: "expected single whitespace before payload".into(),
            }),
        }
    }
}

/// Normalizes bytes to `[0, 1]` in channel-major layout.
pub fn to_tensor<T: Scalar>(img: &ImageBuffer) -> Tensor<T> {
    let (w, h) = (img.width(), img.height());
    Tensor::from_fn(3, h, w, |c, y, x| {
        T::from_f64(img.pixels()[3 * (y * w + x) + c] as f64 / 255.0)
    })
}

/// Clamps to `[0, 1]`, scales by 255 and rounds half away from zero.
pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<ImageBuffer, ImageError> {
    if t.channels() != 3 {
        return Err(ImageError::NotRgb(t.channels()));
    }
    let (h, w) = (t.height(), t.width());
    let mut pixels = vec![0u8; 3 * w * h];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let v = t.get(c, y, x).as_f64().clamp(0.0, 1.0);
                pixels[3 * (y * w + x) + c] = (v * 255.0).round() as u8;
            }
        }
    }
    ImageBuffer::new(w, h, pixels)
}
