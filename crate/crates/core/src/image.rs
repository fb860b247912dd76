//! Image container and file interchange (PGM and the `DSPK` raw-float format).

use crate::error::{Error, Result};
use crate::grid::RealGrid;

/// 2-D intensity image, row-major with top-left origin. Every pixel is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: RealGrid,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(
                "image dimensions",
                format!("{width}x{height} has a zero side"),
            ));
        }
        Self::from_grid(RealGrid::from_vec(width, height, pixels)?)
    }

    pub fn from_grid(grid: RealGrid) -> Result<Self> {
        if grid.width() == 0 || grid.height() == 0 {
            return Err(Error::invalid("image dimensions", "zero side"));
        }
        if let Some(i) = grid.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "pixel",
                format!("value at index {i} is not finite"),
            ));
        }
        Ok(Image { grid })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        Self::from_grid(RealGrid::from_fn(width, height, f))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        *self.grid.get(x, y)
    }

    pub fn pixels(&self) -> &[f64] {
        self.grid.data()
    }

    pub fn grid(&self) -> &RealGrid {
        &self.grid
    }

    pub fn into_grid(self) -> RealGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.pixels().len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels().is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.pixels().iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.pixels().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Population standard deviation of the pixel values.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .pixels()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.len() as f64;
        var.sqrt()
    }

    /// Applies `f` pixel-wise; fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl FnMut(&f64) -> f64) -> Result<Image> {
        Image::from_grid(self.grid.map(f))
    }

    pub(crate) fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_nonnegative(&self) -> Result<()> {
        if let Some(i) = self.pixels().iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(
                "pixel",
                format!("negative value {} at index {i}", self.pixels()[i]),
            ));
        }
        Ok(())
    }
}

/// Encoded PGM plus the number of samples that had to be clamped into range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmOutput {
    pub bytes: Vec<u8>,
    pub clamped: usize,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, field: &'static str) -> Result<&'a str> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(field, "unexpected end of data"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::parse(field, "not ASCII"))
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        let tok = self.token(field)?;
        tok.parse::<usize>()
            .map_err(|_| Error::parse(field, format!("'{tok}' is not a non-negative integer")))
    }
}

/// Parses an ASCII (`P2`) or binary (`P5`) PGM with maxval 255 or 65535.
pub fn read_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::parse("magic", "file too short"));
    }
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::parse(
                "magic",
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 {
        return Err(Error::parse("width", "must be positive"));
    }
    if height == 0 {
        return Err(Error::parse("height", "must be positive"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::parse(
            "maxval",
            format!("{maxval} unsupported (expected 255 or 65535)"),
        ));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::parse("width", "dimensions overflow"))?;

    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::parse("payload", "missing raster separator"));
        }
        let raster = &bytes[cur.pos + 1..];
        let sample_bytes = if maxval > 255 { 2 } else { 1 };
        let needed = count * sample_bytes;
        if raster.len() < needed {
            return Err(Error::parse(
                "payload",
                format!("truncated: {} of {needed} bytes", raster.len()),
            ));
        }
        if sample_bytes == 1 {
            pixels.extend(raster[..needed].iter().map(|&b| b as f64));
        } else {
            pixels.extend(
                raster[..needed]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64),
            );
        }
    } else {
        for _ in 0..count {
            let v = cur
                .number("payload")
                .map_err(|e| match e {
                    Error::Parse { reason, .. } if reason.contains("end of data") => {
                        Error::parse("payload", format!("truncated after {} samples", pixels.len()))
                    }
                    other => other,
                })?;
            if v > maxval {
                return Err(Error::parse(
                    "payload",
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            pixels.push(v as f64);
        }
    }
    Image::new(width, height, pixels)
}

/// Encodes `img` as PGM. Samples are clamped to `[0, maxval]` and rounded half-to-even.
pub fn write_pgm(img: &Image, maxval: u32, binary: bool) -> Result<PgmOutput> {
    if maxval != 255 && maxval != 65535 {
        return Err(Error::invalid(
            "maxval",
            format!("{maxval} unsupported (expected 255 or 65535)"),
        ));
    }
    let top = maxval as f64;
    let mut clamped = 0;
    let samples: Vec<u32> = img
        .pixels()
        .iter()
        .map(|&v| {
            if !(0.0..=top).contains(&v) {
                clamped += 1;
            }
            v.clamp(0.0, top).round_ties_even() as u32
        })
        .collect();

    let magic = if binary { "P5" } else { "P2" };
    let mut bytes = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    if binary {
        if maxval > 255 {
            for s in &samples {
                bytes.extend_from_slice(&(*s as u16).to_be_bytes());
            }
        } else {
            bytes.extend(samples.iter().map(|&s| s as u8));
        }
    } else {
        for row in samples.chunks(img.width()) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            bytes.extend_from_slice(line.join(" ").as_bytes());
            bytes.push(b'\n');
        }
    }
    Ok(PgmOutput { bytes, clamped })
}

const DSPK_MAGIC: &[u8; 4] = b"DSPK";
const DSPK_VERSION: u32 = 1;
const DSPK_HEADER_LEN: usize = 16;

/// Serializes to the `DSPK` raw-float format (little-endian, pixels narrowed to `f32`).
pub fn write_rawf32(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(DSPK_HEADER_LEN + 4 * img.len());
    out.extend_from_slice(DSPK_MAGIC);
    out.extend_from_slice(&DSPK_VERSION.to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    for &v in img.pixels() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_rawf32(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < DSPK_HEADER_LEN {
        return Err(Error::parse("header", "shorter than 16 bytes"));
    }
    if &bytes[0..4] != DSPK_MAGIC {
        return Err(Error::parse("magic", "expected \"DSPK\""));
    }
    let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let version = word(4);
    if version != DSPK_VERSION {
        return Err(Error::parse("version", format!("unsupported version {version}")));
    }
    let width = word(8) as usize;
    let height = word(12) as usize;
    if width == 0 {
        return Err(Error::parse("width", "must be positive"));
    }
    if height == 0 {
        return Err(Error::parse("height", "must be positive"));
    }
    let payload = &bytes[DSPK_HEADER_LEN..];
    let expected = width * height * 4;
    if payload.len() != expected {
        return Err(Error::parse(
            "payload",
            format!("{} bytes, header implies {expected}", payload.len()),
        ));
    }
    let pixels = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::new(width, height, pixels).map_err(|_| Error::parse("payload", "non-finite sample"))
}
