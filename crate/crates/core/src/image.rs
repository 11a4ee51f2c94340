//! Grayscale images: PGM input/output, gray-level histograms over the
//! 256-cell unit grid, quantization onto a selected partition, and PSNR.
//!
//! Quantization replaces every pixel in an interval of gray levels by that
//! interval's representative, the count-weighted centroid of the source
//! histogram (rounded; empty intervals fall back to the interval
//! midpoint). Representatives are computed once and carried by the
//! [`Quantizer`], which makes reconstruction deterministic and idempotent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::histogram::{BinnedSample, CellGrid, HistogramError, SubPartition};

/// Number of gray levels.
const LEVELS: usize = 256;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("bad magic, expected P5 or P2")]
    BadMagic,
    #[error("malformed PGM: {message}")]
    Malformed { message: String },
    #[error("unsupported maxval {maxval}, only 255 is handled")]
    UnsupportedMaxval { maxval: usize },
    #[error("truncated pixel data: expected {expected} values, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("pixel value {value} exceeds 255")]
    ValueOutOfRange { value: usize },
    #[error("image dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("histogram is not over the 256-level gray grid")]
    NotGrayGrid,
    #[error("partition does not span the 256-level gray grid")]
    PartitionMismatch,
    #[error("invalid image: {message}")]
    InvalidImage { message: String },
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

/// An 8-bit grayscale image, pixels in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        let expected = width.checked_mul(height);
        if width == 0 || height == 0 || expected != Some(pixels.len()) {
            return Err(ImageError::InvalidImage {
                message: format!(
                    "{width}x{height} does not match {} pixels",
                    pixels.len()
                ),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
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

    /// Number of distinct gray levels present.
    pub fn distinct_levels(&self) -> usize {
        let mut seen = [false; LEVELS];
        for &p in &self.pixels {
            seen[p as usize] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

/// Reads a PGM image, binary (`P5`) or ASCII (`P2`), maxval 255.
/// `#` comments are allowed between header tokens.
pub fn read_pgm(data: &[u8]) -> Result<GrayImage, ImageError> {
    let mut pos = 0usize;
    let magic = next_token(data, &mut pos).ok_or(ImageError::BadMagic)?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(ImageError::BadMagic),
    };
    let width = next_usize(data, &mut pos, "width")?;
    let height = next_usize(data, &mut pos, "height")?;
    let maxval = next_usize(data, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval { maxval });
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::Malformed {
            message: "image dimensions overflow".into(),
        })?;
    let pixels = if binary {
        // A single whitespace byte separates the maxval from the raster.
        if pos >= data.len() || !data[pos].is_ascii_whitespace() {
            return Err(ImageError::Malformed {
                message: "missing whitespace before binary raster".into(),
            });
        }
        pos += 1;
        let raster = &data[pos.min(data.len())..];
        if raster.len() < count {
            return Err(ImageError::Truncated {
                expected: count,
                got: raster.len(),
            });
        }
        raster[..count].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        while pixels.len() < count {
            let got = pixels.len();
            let value = next_usize(data, &mut pos, "pixel").map_err(|_| {
                ImageError::Truncated {
                    expected: count,
                    got,
                }
            })?;
            if value > 255 {
                return Err(ImageError::ValueOutOfRange { value });
            }
            pixels.push(value as u8);
        }
        pixels
    };
    GrayImage::new(width, height, pixels)
}

/// Writes the binary (`P5`) encoding; `read_pgm` of the result is lossless.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Writes the ASCII (`P2`) encoding, one row of pixels per line.
pub fn write_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

fn next_token(data: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= data.len() {
        return None;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(data[start..*pos].to_vec())
}

fn next_usize(data: &[u8], pos: &mut usize, what: &str) -> Result<usize, ImageError> {
    let token = next_token(data, pos).ok_or_else(|| ImageError::Malformed {
        message: format!("missing {what}"),
    })?;
    std::str::from_utf8(&token)
        .ok()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| ImageError::Malformed {
            message: format!("invalid {what}"),
        })
}

/// The 256-cell unit grid over gray levels: boundaries `0, 1, ..., 256`.
pub fn gray_grid() -> CellGrid {
    CellGrid::new((0..=LEVELS).map(|i| i as f64).collect()).expect("static grid is valid")
}

/// Gray-level frequencies of an image as a [`BinnedSample`] over
/// [`gray_grid`]; `n` is the pixel count.
pub fn gray_histogram(img: &GrayImage) -> BinnedSample {
    let mut counts = vec![0u64; LEVELS];
    for &p in &img.pixels {
        counts[p as usize] += 1;
    }
    BinnedSample::from_counts(gray_grid(), counts).expect("counts match the gray grid")
}

/// A fixed gray-level quantization map: one representative level per
/// partition interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quantizer {
    level_map: Vec<u8>,
    levels: Vec<u8>,
}

impl Quantizer {
    /// Builds the map from a gray histogram and a partition of its grid.
    /// Each interval's representative is the count-weighted mean gray
    /// level, rounded; an empty interval falls back to its midpoint.
    pub fn from_histogram(
        hist: &BinnedSample,
        part: &SubPartition,
    ) -> Result<Self, ImageError> {
        if *hist.grid() != gray_grid() {
            return Err(ImageError::NotGrayGrid);
        }
        if part.cuts().last() != Some(&LEVELS) {
            return Err(ImageError::PartitionMismatch);
        }
        let counts = hist.counts();
        let mut level_map = vec![0u8; LEVELS];
        let mut levels = Vec::with_capacity(part.interval_count());
        for (lo, hi) in part.intervals() {
            let total: u64 = counts[lo..hi].iter().sum();
            let representative = if total == 0 {
                ((lo + hi) as f64 / 2.0).round().min((hi - 1) as f64) as u8
            } else {
                let weighted: f64 = (lo..hi).map(|g| g as f64 * counts[g] as f64).sum();
                let mean = weighted / total as f64;
                (mean.round() as usize).clamp(lo, hi - 1) as u8
            };
            levels.push(representative);
            for slot in &mut level_map[lo..hi] {
                *slot = representative;
            }
        }
        Ok(Self { level_map, levels })
    }

    /// The representative levels, one per interval.
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        GrayImage {
            width: img.width,
            height: img.height,
            pixels: img.pixels.iter().map(|&p| self.level_map[p as usize]).collect(),
        }
    }
}

/// Quantizes an image onto a partition of the gray grid, with
/// representatives computed from the image's own histogram.
pub fn quantize(img: &GrayImage, part: &SubPartition) -> Result<GrayImage, ImageError> {
    Ok(Quantizer::from_histogram(&gray_histogram(img), part)?.apply(img))
}

/// Peak signal-to-noise ratio in decibels, `10 log10(255^2 / MSE)`;
/// `+inf` for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    if a.width != b.width || a.height != b.height {
        return Err(ImageError::DimensionMismatch {
            a_width: a.width,
            a_height: a.height,
            b_width: b.width,
            b_height: b.height,
        });
    }
    let sse: f64 = a
        .pixels
        .iter()
        .zip(b.pixels.iter())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sse / a.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// JSON export of a quantization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationReport {
    pub m: usize,
    pub levels: Vec<u8>,
    pub psnr_db: f64,
}

impl QuantizationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
