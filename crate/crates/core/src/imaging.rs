//! Page preprocessing ahead of OCR.
//!
//! The chain is fixed: widen small scans with bicubic interpolation, convert
//! to luma, smooth with a small Gaussian, binarize with an inverted Otsu
//! threshold and finally invert back so text ends up dark on a light page.
//! Every stage is a pure function over [`PageImage`].

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("could not decode image: {0}")]
    Decode(String),
    #[error("could not encode image: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// Decoded raster page. Pixels are row-major and channel-interleaved, R,G,B
/// order for colour images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    pixels: Vec<u8>,
    width: u32,
    height: u32,
    channels: u8,
}

impl PageImage {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::InvalidImage(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(ImagingError::InvalidImage(format!(
                "buffer holds {} bytes, {width}x{height}x{channels} needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self { pixels, width, height, channels })
    }

    /// Single-channel image filled with `value`.
    pub fn filled_gray(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, 1, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32, channel: u8) -> u8 {
        let c = self.channels as usize;
        self.pixels[(y as usize * self.width as usize + x as usize) * c + channel as usize]
    }

    /// Decode PNG or JPEG bytes. Alpha is dropped, 16-bit depths are reduced.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| ImagingError::Decode(e.to_string()))?;
        Ok(Self::from_dynamic(img))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes)
    }

    fn from_dynamic(img: DynamicImage) -> Self {
        let (width, height) = (img.width(), img.height());
        let is_gray = matches!(
            img,
            DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA16(_)
        );
        if is_gray {
            let buf = img.into_luma8();
            Self { pixels: buf.into_raw(), width, height, channels: 1 }
        } else {
            let buf = img.into_rgb8();
            Self { pixels: buf.into_raw(), width, height, channels: 3 }
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Cursor::new(Vec::new());
        let dynamic = match self.channels {
            1 => image::GrayImage::from_raw(self.width, self.height, self.pixels.clone())
                .map(DynamicImage::ImageLuma8),
            _ => image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
                .map(DynamicImage::ImageRgb8),
        }
        .ok_or_else(|| ImagingError::Encode("buffer/dimension mismatch".into()))?;
        dynamic.write_to(&mut out, ImageFormat::Png).map_err(|e| ImagingError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    #[default]
    Otsu,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreprocessConfig {
    pub min_width: u32,
    pub blur_kernel: u32,
    pub threshold_mode: ThresholdMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { min_width: 1024, blur_kernel: 3, threshold_mode: ThresholdMode::Otsu }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_width == 0 {
            return Err(ImagingError::InvalidConfig("min_width must be positive".into()));
        }
        check_kernel(self.blur_kernel)
    }
}

fn check_kernel(kernel: u32) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(ImagingError::InvalidConfig(format!("blur kernel must be odd and >= 1, got {kernel}")));
    }
    Ok(())
}

/// Upscale so the width reaches `cfg.min_width`, keeping aspect ratio.
/// Only the width is inspected; images at or above the minimum pass through.
pub fn scale_if_small(img: &PageImage, cfg: &PreprocessConfig) -> PageImage {
    if img.width >= cfg.min_width {
        return img.clone();
    }
    let ratio = f64::from(cfg.min_width) / f64::from(img.width);
    let new_w = (f64::from(img.width) * ratio).round().max(1.0) as u32;
    let new_h = (f64::from(img.height) * ratio).round().max(1.0) as u32;
    resize_bicubic(img, new_w, new_h, ratio)
}

const BICUBIC_A: f64 = -0.75;

fn cubic_weights(t: f64) -> [f64; 4] {
    let a = BICUBIC_A;
    let near = |x: f64| ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    let far = |x: f64| ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    let w0 = far(t + 1.0);
    let w1 = near(t);
    let w2 = near(1.0 - t);
    [w0, w1, w2, 1.0 - w0 - w1 - w2]
}

/// Per destination coordinate: first source tap (clamped later) and weights.
fn axis_taps(dst_len: u32, ratio: f64) -> Vec<(i64, [f64; 4])> {
    let inv = 1.0 / ratio;
    (0..dst_len)
        .map(|d| {
            let src = (f64::from(d) + 0.5) * inv - 0.5;
            let base = src.floor();
            (base as i64 - 1, cubic_weights(src - base))
        })
        .collect()
}

fn resize_bicubic(img: &PageImage, new_w: u32, new_h: u32, ratio: f64) -> PageImage {
    let c = img.channels as usize;
    let (sw, sh) = (img.width as i64, img.height as i64);
    let xs = axis_taps(new_w, ratio);
    let ys = axis_taps(new_h, ratio);

    // Horizontal pass into f64 rows, then vertical pass. Borders replicate.
    let mut horiz = vec![0f64; sh as usize * new_w as usize * c];
    for y in 0..sh as usize {
        let row = &img.pixels[y * sw as usize * c..(y + 1) * sw as usize * c];
        for (dx, (start, w)) in xs.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let sx = (start + k as i64).clamp(0, sw - 1) as usize;
                    acc += wk * f64::from(row[sx * c + ch]);
                }
                horiz[(y * new_w as usize + dx) * c + ch] = acc;
            }
        }
    }

    let mut out = vec![0u8; new_w as usize * new_h as usize * c];
    for (dy, (start, w)) in ys.iter().enumerate() {
        for dx in 0..new_w as usize {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let sy = (start + k as i64).clamp(0, sh - 1) as usize;
                    acc += wk * horiz[(sy * new_w as usize + dx) * c + ch];
                }
                out[(dy * new_w as usize + dx) * c + ch] = saturate(acc);
            }
        }
    }
    PageImage { pixels: out, width: new_w, height: new_h, channels: img.channels }
}

fn saturate(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// BT.601 luma. One-channel input is returned as is.
pub fn to_grayscale(img: &PageImage) -> Result<PageImage> {
    match img.channels {
        1 => Ok(img.clone()),
        3 => {
            let pixels = img
                .pixels
                .chunks_exact(3)
                .map(|p| {
                    saturate(0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
                })
                .collect();
            Ok(PageImage { pixels, width: img.width, height: img.height, channels: 1 })
        }
        n => Err(ImagingError::InvalidImage(format!("unsupported channel count {n}"))),
    }
}

/// Sigma used when none is given, as a function of kernel size.
pub fn auto_sigma(kernel: u32) -> f64 {
    0.3 * ((f64::from(kernel) - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian weights of length `kernel`.
pub fn gaussian_kernel(kernel: u32, sigma: f64) -> Vec<f64> {
    let half = (kernel / 2) as i64;
    let raw: Vec<f64> = (-half..=half).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

// Mirror without repeating the edge pixel: -1 -> 1, len -> len-2.
fn reflect_101(i: i64, len: i64) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    let mut i = i.rem_euclid(period);
    if i >= len {
        i = period - i;
    }
    i as usize
}

/// Separable Gaussian smoothing of a grayscale image.
pub fn gaussian_blur(img: &PageImage, kernel: u32) -> Result<PageImage> {
    check_kernel(kernel)?;
    if img.channels != 1 {
        return Err(ImagingError::InvalidImage("gaussian_blur expects a grayscale image".into()));
    }
    if kernel == 1 {
        return Ok(img.clone());
    }
    let weights = gaussian_kernel(kernel, auto_sigma(kernel));
    let half = (kernel / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);

    let mut horiz = vec![0f64; img.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in weights.iter().enumerate() {
                let sx = reflect_101(x + k as i64 - half, w);
                acc += wk * f64::from(img.pixels[(y * w) as usize + sx]);
            }
            horiz[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0u8; img.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wk) in weights.iter().enumerate() {
                let sy = reflect_101(y + k as i64 - half, h);
                acc += wk * horiz[sy * w as usize + x as usize];
            }
            out[(y * w + x) as usize] = saturate(acc);
        }
    }
    Ok(PageImage { pixels: out, ..img.clone() })
}

pub fn histogram(img: &PageImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &p in &img.pixels {
        hist[p as usize] += 1;
    }
    hist
}

/// Otsu threshold: the first level maximizing between-class variance, using
/// running class weights and means. A histogram with a single occupied bin
/// yields that bin's level.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0;
    }
    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if occupied.len() == 1 {
        return occupied[0] as u8;
    }
    let total_f = total as f64;
    let mu: f64 = hist.iter().enumerate().map(|(i, &n)| i as f64 * n as f64).sum::<f64>() / total_f;

    let (mut q1, mut mu1) = (0.0f64, 0.0f64);
    let (mut best_t, mut best_var) = (0u8, -1.0f64);
    for t in 0..256usize {
        let p = hist[t] as f64 / total_f;
        let q1_next = q1 + p;
        if q1_next > 0.0 {
            mu1 = (q1 * mu1 + t as f64 * p) / q1_next;
        }
        q1 = q1_next;
        let q2 = 1.0 - q1;
        if q1 < f64::EPSILON || q2 < f64::EPSILON {
            continue;
        }
        let mu2 = (mu - q1 * mu1) / q2;
        let var = q1 * q2 * (mu1 - mu2) * (mu1 - mu2);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Inverse binary threshold at the Otsu level: `<= T` becomes 255, `> T` 0.
pub fn otsu_binarize_inverted(img: &PageImage) -> Result<PageImage> {
    if img.channels != 1 {
        return Err(ImagingError::InvalidImage("otsu expects a grayscale image".into()));
    }
    let t = otsu_threshold(&histogram(img));
    let pixels = img.pixels.iter().map(|&p| if p > t { 0 } else { 255 }).collect();
    Ok(PageImage { pixels, ..img.clone() })
}

pub fn invert(img: &PageImage) -> PageImage {
    PageImage { pixels: img.pixels.iter().map(|&b| 255 - b).collect(), ..img.clone() }
}

/// Full preprocessing chain; the result is single-channel with values in {0, 255}.
pub fn preprocess(img: &PageImage, cfg: &PreprocessConfig) -> Result<PageImage> {
    cfg.validate()?;
    let scaled = scale_if_small(img, cfg);
    let gray = to_grayscale(&scaled)?;
    let blurred = gaussian_blur(&gray, cfg.blur_kernel)?;
    let thresh = otsu_binarize_inverted(&blurred)?;
    Ok(invert(&thresh))
}
