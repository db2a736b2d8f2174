//! Image and mask grids with their binary containers.
//!
//! `XIG1` (image):
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `XIG1`                             |
//! | 4      | 4    | width, u32 LE                            |
//! | 8      | 4    | height, u32 LE                           |
//! | 12     | 4    | dtype tag, u32 LE (1 = f32 LE)           |
//! | 16     | 4·w·h| pixels, row-major                        |
//!
//! `XMK1` (mask): magic, width, height as above, then rows of `ceil(w/8)`
//! bytes each, MSB-first, padding bits zero.
//!
//! Detector geometry is not part of either container; it travels in a JSON
//! sidecar (see [`crate::geometry`]).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::DetectorGeometry;

const IMAGE_MAGIC: &[u8; 4] = b"XIG1";
const MASK_MAGIC: &[u8; 4] = b"XMK1";
const IMAGE_HEADER_LEN: usize = 16;
const MASK_HEADER_LEN: usize = 12;
const DTYPE_F32_LE: u32 = 1;

/// Row-major grid of detector intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    geometry: Option<DetectorGeometry>,
}

impl Image {
    /// Validates dimensions and pixel values (finite, non-negative).
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::TruncatedPayload {
                expected: width * height,
                found: pixels.len(),
            });
        }
        for (i, &v) in pixels.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinitePixel(i));
            }
            if v < 0.0 {
                return Err(Error::NegativePixel(i));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
            geometry: None,
        })
    }

    pub fn with_geometry(mut self, geometry: DetectorGeometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn geometry(&self) -> Option<&DetectorGeometry> {
        self.geometry.as_ref()
    }

    /// Geometry or an `InvalidGeometry` error when none is attached.
    pub fn require_geometry(&self) -> Result<&DetectorGeometry> {
        self.geometry
            .as_ref()
            .ok_or_else(|| Error::InvalidGeometry("image has no geometry attached".into()))
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Applies `f` to every pixel, re-validating the result.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        let pixels = self.pixels.iter().map(|&v| f(v)).collect();
        let mut out = Image::new(self.width, self.height, pixels)?;
        out.geometry = self.geometry;
        Ok(out)
    }
}

/// Packed binary mask, 1 = masked (artifact), 0 = keep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMap {
    width: usize,
    height: usize,
    stride: usize,
    bits: Vec<u8>,
}

impl MaskMap {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        let stride = width.div_ceil(8);
        Ok(Self {
            width,
            height,
            stride,
            bits: vec![0; stride * height],
        })
    }

    /// Builds a mask from row-major booleans.
    pub fn from_bools(width: usize, height: usize, values: &[bool]) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::TruncatedPayload {
                expected: width * height,
                found: values.len(),
            });
        }
        let mut mask = Self::new(width, height)?;
        for (i, &v) in values.iter().enumerate() {
            if v {
                mask.set_index(i, true);
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.stride + x / 8] & (0x80 >> (x % 8)) != 0
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let byte = &mut self.bits[y * self.stride + x / 8];
        let bit = 0x80 >> (x % 8);
        if value {
            *byte |= bit;
        } else {
            *byte &= !bit;
        }
    }

    /// Row-major pixel index access (`index = y * width + x`).
    pub fn get_index(&self, index: usize) -> bool {
        self.get(index % self.width, index / self.width)
    }

    pub fn set_index(&mut self, index: usize, value: bool) {
        self.set(index % self.width, index / self.width, value)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Row-major labels, 1 for masked.
    pub fn to_labels(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get_index(i) as u8).collect()
    }

    /// Pixel-wise complement (padding bits stay zero).
    pub fn inverted(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.bits {
            *b = !*b;
        }
        out.clear_padding();
        out
    }

    pub fn packed_rows(&self) -> &[u8] {
        &self.bits
    }

    pub fn check_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other,
            });
        }
        Ok(())
    }

    fn clear_padding(&mut self) {
        let tail = self.width % 8;
        if tail == 0 {
            return;
        }
        let keep = !(0xffu8 >> tail);
        for y in 0..self.height {
            self.bits[y * self.stride + self.stride - 1] &= keep;
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width > u32::MAX as usize || height > u32::MAX as usize {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn read_header(bytes: &[u8], magic: &'static [u8; 4], header_len: usize) -> Result<(usize, usize)> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic {
            expected: std::str::from_utf8(magic).unwrap(),
        });
    }
    if bytes.len() < header_len {
        return Err(Error::TruncatedPayload {
            expected: header_len,
            found: bytes.len(),
        });
    }
    let width = read_u32(bytes, 4) as usize;
    let height = read_u32(bytes, 8) as usize;
    check_dims(width, height)?;
    Ok((width, height))
}

pub fn encode_image(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(IMAGE_HEADER_LEN + img.pixels.len() * 4);
    out.extend_from_slice(IMAGE_MAGIC);
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    out.extend_from_slice(&DTYPE_F32_LE.to_le_bytes());
    for v in &img.pixels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes an `XIG1` stream. The returned image carries no geometry.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let (width, height) = read_header(bytes, IMAGE_MAGIC, IMAGE_HEADER_LEN)?;
    let dtype = read_u32(bytes, 12);
    if dtype != DTYPE_F32_LE {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let expected = IMAGE_HEADER_LEN + width * height * 4;
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let pixels = bytes[IMAGE_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image::new(width, height, pixels)
}

pub fn encode_mask(mask: &MaskMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(MASK_HEADER_LEN + mask.bits.len());
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&(mask.width as u32).to_le_bytes());
    out.extend_from_slice(&(mask.height as u32).to_le_bytes());
    out.extend_from_slice(&mask.bits);
    out
}

/// Decodes an `XMK1` stream. Nonzero padding bits are cleared.
pub fn decode_mask(bytes: &[u8]) -> Result<MaskMap> {
    let (width, height) = read_header(bytes, MASK_MAGIC, MASK_HEADER_LEN)?;
    let stride = width.div_ceil(8);
    let expected = MASK_HEADER_LEN + stride * height;
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let mut mask = MaskMap {
        width,
        height,
        stride,
        bits: bytes[MASK_HEADER_LEN..].to_vec(),
    };
    mask.clear_padding();
    Ok(mask)
}

/// Sidecar path convention: `frame.xig` -> `frame.geom.json`.
pub fn sidecar_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("geom.json")
}

/// Reads an image file, attaching the geometry sidecar when one exists.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = decode_image(&bytes)?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let geom = crate::geometry::geometry_from_sidecar(&text)?;
        return Ok(img.with_geometry(geom));
    }
    Ok(img)
}

/// Writes the image and, if attached, its geometry sidecar.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_image(img)).map_err(|e| Error::io(path, e))?;
    if let Some(geom) = img.geometry() {
        let sidecar = sidecar_path(path);
        fs::write(&sidecar, crate::geometry::geometry_to_sidecar(geom))
            .map_err(|e| Error::io(&sidecar, e))?;
    }
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<MaskMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}

pub fn write_mask(path: &Path, mask: &MaskMap) -> Result<()> {
    fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}
