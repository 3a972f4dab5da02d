//! Binary Netpbm I/O: PGM (`P5`) for grids and masks, PPM (`P6`) for the
//! 3-channel predictor inputs. Only `maxval 255` is accepted.
//!
//! Files are written as `P5\n<w> <h>\n255\n<payload>`. The reader accepts any
//! whitespace between header tokens and `#` comments, then exactly one
//! whitespace byte before the payload.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::grid::{Cell, GridError, OccupancyGrid, RegionMask};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("bad magic number: expected {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("unsupported maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing data: {0} bytes after the payload")]
    TrailingData(usize),
    #[error("dimension mismatch: file is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    DimensionMismatch { expected_w: usize, expected_h: usize, found_w: usize, found_h: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Interleaved RGB 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    pub fn channel(&self, index: usize) -> GrayRaster {
        assert!(index < 3);
        GrayRaster {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(index).step_by(3).copied().collect(),
        }
    }

    pub fn set_channel(&mut self, index: usize, mask: &RegionMask) {
        assert!(index < 3);
        for (px, &bit) in self.data.chunks_exact_mut(3).zip(mask.bits()) {
            px[index] = if bit { 255 } else { 0 };
        }
    }
}

impl GrayRaster {
    /// Non-zero pixels become set bits.
    pub fn to_mask(&self) -> RegionMask {
        RegionMask::from_bits(self.width, self.height, self.data.iter().map(|&v| v != 0).collect())
            .expect("raster payload length checked at construction")
    }
}

impl From<&RegionMask> for GrayRaster {
    fn from(mask: &RegionMask) -> Self {
        GrayRaster {
            width: mask.width(),
            height: mask.height(),
            data: mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

impl From<&OccupancyGrid> for GrayRaster {
    fn from(grid: &OccupancyGrid) -> Self {
        GrayRaster::from(&grid.as_mask())
    }
}

fn encode(magic: &str, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(payload);
    out
}

pub fn encode_pgm(raster: &GrayRaster) -> Vec<u8> {
    encode("P5", raster.width, raster.height, &raster.data)
}

pub fn encode_ppm(raster: &RgbRaster) -> Vec<u8> {
    encode("P6", raster.width, raster.height, &raster.data)
}

struct Header {
    width: usize,
    height: usize,
    payload_start: usize,
}

fn parse_header(bytes: &[u8], magic: &'static str) -> Result<Header, RasterError> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(RasterError::BadMagic { expected: magic, found });
    }
    let mut pos = 2;
    let mut tokens = [0u32; 3];
    for (i, slot) in tokens.iter_mut().enumerate() {
        // Each token must be preceded by whitespace (comments allowed).
        let before = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        if pos == before {
            return Err(RasterError::Header(format!("missing whitespace before token {i}")));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(RasterError::Header(format!("expected a number for token {i}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text
            .parse()
            .map_err(|_| RasterError::Header(format!("number out of range: {text}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(RasterError::Header("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = tokens;
    if maxval != 255 {
        return Err(RasterError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(RasterError::Header(format!("zero dimension {width}x{height}")));
    }
    Ok(Header { width: width as usize, height: height as usize, payload_start: pos })
}

fn payload(bytes: &[u8], header: &Header, channels: usize) -> Result<Vec<u8>, RasterError> {
    let expected = header.width * header.height * channels;
    let found = bytes.len() - header.payload_start;
    if found < expected {
        return Err(RasterError::Truncated { expected, found });
    }
    if found > expected {
        return Err(RasterError::TrailingData(found - expected));
    }
    Ok(bytes[header.payload_start..].to_vec())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayRaster, RasterError> {
    let header = parse_header(bytes, "P5")?;
    let data = payload(bytes, &header, 1)?;
    Ok(GrayRaster { width: header.width, height: header.height, data })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbRaster, RasterError> {
    let header = parse_header(bytes, "P6")?;
    let data = payload(bytes, &header, 3)?;
    Ok(RgbRaster { width: header.width, height: header.height, data })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayRaster, RasterError> {
    decode_pgm(&fs::read(path)?)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbRaster, RasterError> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_pgm(raster: &GrayRaster, path: impl AsRef<Path>) -> Result<(), RasterError> {
    fs::write(path, encode_pgm(raster))?;
    Ok(())
}

pub fn write_ppm(raster: &RgbRaster, path: impl AsRef<Path>) -> Result<(), RasterError> {
    fs::write(path, encode_ppm(raster))?;
    Ok(())
}

pub fn write_mask(mask: &RegionMask, path: impl AsRef<Path>) -> Result<(), RasterError> {
    write_pgm(&GrayRaster::from(mask), path)
}

pub fn write_grid(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<(), RasterError> {
    write_pgm(&GrayRaster::from(grid), path)
}

/// Reads a mask; 255 (any non-zero value) is in-region.
pub fn read_mask(path: impl AsRef<Path>) -> Result<RegionMask, RasterError> {
    Ok(read_pgm(path)?.to_mask())
}

/// Reads a mask and checks its dimensions.
pub fn read_mask_sized(path: impl AsRef<Path>, width: usize, height: usize) -> Result<RegionMask, RasterError> {
    let mask = read_mask(path)?;
    if mask.width() != width || mask.height() != height {
        return Err(RasterError::DimensionMismatch {
            expected_w: width,
            expected_h: height,
            found_w: mask.width(),
            found_h: mask.height(),
        });
    }
    Ok(mask)
}

/// Reads an occupancy grid; 255 (any non-zero value) is occupied. The file
/// carries no resolution or ego anchor, so both are supplied by the caller.
pub fn read_grid(path: impl AsRef<Path>, resolution: f64, ego: Cell) -> Result<OccupancyGrid, RasterError> {
    grid_from_raster(&read_pgm(path)?, resolution, ego)
}

pub fn grid_from_raster(raster: &GrayRaster, resolution: f64, ego: Cell) -> Result<OccupancyGrid, RasterError> {
    let cells = raster.data.iter().map(|&v| v != 0).collect();
    Ok(OccupancyGrid::new(raster.width, raster.height, resolution, cells, ego)?)
}
