//! Texture reconstruction from spike streams.
//!
//! Two estimators recover a grayscale image at any tick:
//!
//! - **TFW** counts spikes in the causal window `(t - w, t]` and scales the
//!   firing rate to the dynamic range: `P = N_w / w * C`.
//! - **TFI** uses the interspike interval covering `t`: `P = C / dt`.
//!
//! Values stay real-valued; quantization happens only on export.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::{SpikeCube, SpikeFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<f64>,
    dynamic_range: f64,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, dynamic_range: f64) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0.0; width as usize * height as usize],
            dynamic_range,
        }
    }

    /// Values are clamped into `[0, dynamic_range]`.
    pub fn from_pixels(
        width: u32,
        height: u32,
        dynamic_range: f64,
        pixels: Vec<f64>,
    ) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} image",
                pixels.len()
            )));
        }
        let pixels = pixels
            .into_iter()
            .map(|v| v.clamp(0.0, dynamic_range))
            .collect();
        Ok(GrayImage {
            width,
            height,
            pixels,
            dynamic_range,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dynamic_range(&self) -> f64 {
        self.dynamic_range
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// 8-bit levels, `round(v / C * 255)`.
    pub fn to_levels(&self) -> Vec<u8> {
        let scale = 255.0 / self.dynamic_range;
        self.pixels
            .iter()
            .map(|v| (v * scale).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width, self.height, self.to_levels())
            .expect("buffer length matches dimensions")
    }

    /// Writes an 8-bit image; the format follows the extension (`.pgm` or `.png`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => image::ImageFormat::Pnm,
            Some("png") => image::ImageFormat::Png,
            other => {
                return Err(Error::Argument(format!(
                    "unsupported image extension {other:?}"
                )))
            }
        };
        let mut bytes = std::io::Cursor::new(Vec::new());
        if format == image::ImageFormat::Pnm {
            use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
            use image::ImageEncoder;
            PnmEncoder::new(&mut bytes)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(
                    &self.to_levels(),
                    self.width,
                    self.height,
                    image::ExtendedColorType::L8,
                )
                .map_err(|e| Error::Format(e.to_string()))?;
        } else {
            self.to_luma8()
                .write_to(&mut bytes, format)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        crate::io::write_atomic(path, &bytes.into_inner())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfwParams {
    pub window: u32,
    pub dynamic_range: f64,
}

impl Default for TfwParams {
    fn default() -> Self {
        TfwParams {
            window: 40,
            dynamic_range: 255.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfiParams {
    pub dynamic_range: f64,
    /// Value for pixels without a usable interval.
    pub fallback: f64,
}

impl Default for TfiParams {
    fn default() -> Self {
        TfiParams {
            dynamic_range: 255.0,
            fallback: 0.0,
        }
    }
}

impl TfiParams {
    /// How far to search around `t` for spikes: `4 * C` ticks.
    pub fn horizon(&self) -> u64 {
        (4.0 * self.dynamic_range).ceil().max(1.0) as u64
    }
}

fn check_range(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "dynamic range must be positive, got {c}"
        )))
    }
}

pub fn tfw(cube: &SpikeCube, t: u64, params: &TfwParams) -> Result<GrayImage> {
    check_range(params.dynamic_range)?;
    if params.window == 0 {
        return Err(Error::Argument("window must be at least 1 tick".into()));
    }
    let mut counts = vec![0u32; cube.pixel_count()];
    let end = (t + 1).min(cube.len() as u64);
    let start = (t + 1).saturating_sub(params.window as u64);
    for frame in &cube.frames()[start.min(end) as usize..end as usize] {
        for idx in frame.ones() {
            counts[idx] += 1;
        }
    }
    let scale = params.dynamic_range / params.window as f64;
    GrayImage::from_pixels(
        cube.width(),
        cube.height(),
        params.dynamic_range,
        counts.into_iter().map(|n| n as f64 * scale).collect(),
    )
}

/// Interval of the vit covering `t` for every pixel, or `None` when the
/// pixel has no usable pair of spikes within the search horizon.
///
/// The enclosing pair (last spike at or before `t`, first spike after it) is
/// preferred; otherwise the two most recent spikes at or before `t` are used.
pub fn covering_intervals(cube: &SpikeCube, t: u64, horizon: u64) -> Vec<Option<u64>> {
    let n = cube.pixel_count();
    let len = cube.len() as u64;
    let mut prev1: Vec<Option<u64>> = vec![None; n];
    let mut prev2: Vec<Option<u64>> = vec![None; n];
    let mut next: Vec<Option<u64>> = vec![None; n];

    if len > 0 {
        let last = t.min(len - 1);
        let first = last.saturating_sub(horizon);
        let mut unresolved = n;
        for tick in (first..=last).rev() {
            for idx in cube.frames()[tick as usize].ones() {
                if prev1[idx].is_none() {
                    prev1[idx] = Some(tick);
                } else if prev2[idx].is_none() {
                    prev2[idx] = Some(tick);
                    unresolved -= 1;
                }
            }
            if unresolved == 0 {
                break;
            }
        }
        if t + 1 < len {
            let mut pending = prev1.iter().filter(|p| p.is_some()).count();
            let stop = (t + horizon).min(len - 1);
            for tick in t + 1..=stop {
                if pending == 0 {
                    break;
                }
                for idx in cube.frames()[tick as usize].ones() {
                    if next[idx].is_none() && prev1[idx].is_some() {
                        next[idx] = Some(tick);
                        pending -= 1;
                    }
                }
            }
        }
    }

    (0..n)
        .map(|i| match (prev1[i], next[i], prev2[i]) {
            (Some(p), Some(q), _) => Some(q - p),
            (Some(p), None, Some(pp)) => Some(p - pp),
            _ => None,
        })
        .collect()
}

pub fn tfi(cube: &SpikeCube, t: u64, params: &TfiParams) -> Result<GrayImage> {
    check_range(params.dynamic_range)?;
    let c = params.dynamic_range;
    let values = covering_intervals(cube, t, params.horizon())
        .into_iter()
        .map(|dt| dt.map_or(params.fallback, |dt| c / dt as f64))
        .collect();
    GrayImage::from_pixels(cube.width(), cube.height(), c, values)
}

/// Causal, streaming TFI: each pixel shows `C / dt` for its most recent
/// completed interval. Suited to playback where frames arrive one at a time.
#[derive(Debug, Clone)]
pub struct TfiStream {
    width: u32,
    height: u32,
    params: TfiParams,
    last_spike: Vec<Option<u64>>,
    interval: Vec<Option<u64>>,
    tick: u64,
}

impl TfiStream {
    pub fn new(width: u32, height: u32, params: TfiParams) -> Self {
        let n = width as usize * height as usize;
        TfiStream {
            width,
            height,
            params,
            last_spike: vec![None; n],
            interval: vec![None; n],
            tick: 0,
        }
    }

    pub fn push(&mut self, frame: &SpikeFrame) {
        let t = self.tick;
        for idx in frame.ones() {
            if let Some(prev) = self.last_spike[idx] {
                self.interval[idx] = Some(t - prev);
            }
            self.last_spike[idx] = Some(t);
        }
        self.tick += 1;
    }

    pub fn image(&self) -> GrayImage {
        let c = self.params.dynamic_range;
        let horizon = self.params.horizon();
        let now = self.tick.saturating_sub(1);
        let values = self
            .interval
            .iter()
            .zip(&self.last_spike)
            .map(|(dt, last)| match (dt, last) {
                (Some(dt), Some(last)) if now - last <= horizon => c / *dt as f64,
                _ => self.params.fallback,
            })
            .collect();
        GrayImage::from_pixels(self.width, self.height, c, values)
            .expect("stream dimensions are fixed")
    }
}

/// Population standard deviation of the pixel values.
pub fn std_metric(img: &GrayImage) -> f64 {
    let n = img.pixels.len() as f64;
    let mean = img.pixels.iter().sum::<f64>() / n;
    (img.pixels.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Two-dimensional entropy in bits over (gray level, 3x3 local-mean level).
///
/// Both coordinates are quantized to 256 levels. Border pixels average over
/// the neighbors that exist.
pub fn entropy2d(img: &GrayImage) -> f64 {
    let levels = img.to_levels();
    let (w, h) = (img.width as i64, img.height as i64);
    let mut hist = vec![0u32; 256 * 256];
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0u32;
            let mut count = 0u32;
            for ny in (y - 1).max(0)..=(y + 1).min(h - 1) {
                for nx in (x - 1).max(0)..=(x + 1).min(w - 1) {
                    sum += levels[(ny * w + nx) as usize] as u32;
                    count += 1;
                }
            }
            let mean = (sum as f64 / count as f64).round() as usize;
            let g = levels[(y * w + x) as usize] as usize;
            hist[g * 256 + mean] += 1;
        }
    }
    let total = (w * h) as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Largest absolute difference between horizontally adjacent pixels.
pub fn max_gradient_x(img: &GrayImage) -> f64 {
    let w = img.width as usize;
    img.pixels
        .chunks(w)
        .flat_map(|row| row.windows(2).map(|p| (p[1] - p[0]).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimConfig, UniformScene};
    use std::collections::HashMap;

    fn one_pixel(bits: &str) -> SpikeCube {
        SpikeCube::from_bit_rows(1, 1, &[bits]).unwrap()
    }

    #[test]
    fn tfw_substitution() {
        // 10 spikes in a 40-tick window
        let bits: String = (0..40).map(|i| if i % 4 == 0 { '1' } else { '0' }).collect();
        let img = tfw(&one_pixel(&bits), 39, &TfwParams::default()).unwrap();
        assert_eq!(img.get(0, 0), 63.75);
    }

    #[test]
    fn tfw_extremes() {
        let p = TfwParams {
            window: 5,
            dynamic_range: 255.0,
        };
        assert_eq!(tfw(&one_pixel("00000"), 4, &p).unwrap().get(0, 0), 0.0);
        assert_eq!(tfw(&one_pixel("11111"), 4, &p).unwrap().get(0, 0), 255.0);
        // ticks before the stream start count as empty
        assert_eq!(tfw(&one_pixel("11111"), 1, &p).unwrap().get(0, 0), 102.0);
    }

    #[test]
    fn tfi_extremes() {
        let p = TfiParams::default();
        assert_eq!(tfi(&one_pixel("1111"), 1, &p).unwrap().get(0, 0), 255.0);
        let mut bits = vec!['0'; 600];
        bits[10] = '1';
        bits[265] = '1';
        let s: String = bits.into_iter().collect();
        assert_eq!(tfi(&one_pixel(&s), 100, &p).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn tfi_fallback_and_lookback() {
        let p = TfiParams::default();
        // before the first spike nothing covers t
        assert_eq!(tfi(&one_pixel("0001001"), 1, &p).unwrap().get(0, 0), 0.0);
        // after the last spike the previous interval is reused
        assert_eq!(
            tfi(&one_pixel("1001000000"), 8, &p).unwrap().get(0, 0),
            85.0
        );
        // a single spike has no interval
        assert_eq!(tfi(&one_pixel("0100000"), 4, &p).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn tfi_recovers_constant_radiance() {
        let scene = UniformScene::new(3, 3, 300, 51.0);
        let cube = simulate(&scene, &SimConfig::default()).unwrap();
        let img = tfi(&cube, 150, &TfiParams::default()).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 51.0));
    }

    #[test]
    fn streaming_tfi_matches_lookback() {
        let cube = one_pixel("1001000100001");
        let mut stream = TfiStream::new(1, 1, TfiParams::default());
        for f in cube.frames() {
            stream.push(f);
        }
        assert_eq!(stream.image().get(0, 0), 255.0 / 5.0);
    }

    #[test]
    fn std_closed_forms() {
        let flat = GrayImage::from_pixels(4, 4, 255.0, vec![17.0; 16]).unwrap();
        assert_eq!(std_metric(&flat), 0.0);
        let half: Vec<f64> = (0..16).map(|i| if i < 8 { 0.0 } else { 255.0 }).collect();
        let img = GrayImage::from_pixels(4, 4, 255.0, half).unwrap();
        assert_eq!(std_metric(&img), 127.5);
    }

    #[test]
    fn entropy_of_constant_image_is_zero() {
        let flat = GrayImage::from_pixels(8, 8, 255.0, vec![99.0; 64]).unwrap();
        assert_eq!(entropy2d(&flat), 0.0);
    }

    /// Independent histogram: a map over (level, neighborhood mean) pairs.
    fn occupied_pairs(levels: &[u8], w: i64, h: i64) -> HashMap<(u8, u8), usize> {
        let mut map = HashMap::new();
        for y in 0..h {
            for x in 0..w {
                let neigh: Vec<f64> = (-1..=1)
                    .flat_map(|dy| (-1..=1).map(move |dx| (x + dx, y + dy)))
                    .filter(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < w && ny < h)
                    .map(|(nx, ny)| levels[(ny * w + nx) as usize] as f64)
                    .collect();
                let mean = (neigh.iter().sum::<f64>() / neigh.len() as f64).round() as u8;
                *map.entry((levels[(y * w + x) as usize], mean)).or_insert(0) += 1;
            }
        }
        map
    }

    #[test]
    fn entropy_of_noise_approaches_log_of_occupied_cells() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(0..256) as f64).collect();
        let img = GrayImage::from_pixels(64, 64, 255.0, values).unwrap();
        let pairs = occupied_pairs(&img.to_levels(), 64, 64);
        let total = 4096.0;
        let oracle: f64 = pairs
            .values()
            .map(|&c| {
                let p = c as f64 / total;
                -p * p.log2()
            })
            .sum();
        let bound = (pairs.len() as f64).log2();
        let e = entropy2d(&img);
        assert!((e - oracle).abs() < 1e-9);
        assert!(e <= bound + 1e-12 && e > bound - 0.05, "{e} vs {bound}");
    }

    #[test]
    fn outputs_stay_in_range() {
        let img = GrayImage::from_pixels(2, 1, 10.0, vec![-3.0, 40.0]).unwrap();
        assert_eq!(img.pixels(), &[0.0, 10.0]);
    }

    #[test]
    fn exports_pgm_and_png() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_pixels(3, 2, 255.0, vec![0.0, 50.0, 100.0, 150.0, 200.0, 255.0])
            .unwrap();
        let pgm = dir.path().join("a.pgm");
        img.save(&pgm).unwrap();
        let bytes = std::fs::read(&pgm).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert!(bytes.ends_with(&[0, 50, 100, 150, 200, 255]));
        let png = dir.path().join("a.png");
        img.save(&png).unwrap();
        let back = image::open(&png).unwrap().to_luma8();
        assert_eq!(back.into_raw(), img.to_levels());
        assert!(img.save(&dir.path().join("a.bmp")).is_err());
    }
}
