//! Grid-graph instances from RGB images, with a minimal PPM reader and writer.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::family::LogisticModel;
use crate::graph::EmpiricalGraph;
use crate::training::TrainingSet;

const VARIANCE_GUARD: f64 = 1e-12;

/// Row-major RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must have at least one pixel"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "pixel count",
                expected: width * height,
                got: pixels.len(),
            });
        }
        if pixels.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("channel values must lie in [0, 1]"));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        self.pixels[row * self.width + col]
    }
}

fn ppm_tokens(data: &[u8]) -> (Vec<(String, usize)>, usize) {
    // Header tokens with the byte offset just past each; '#' starts a comment.
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 && pos < data.len() {
        let c = data[pos];
        if c == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
        } else if c.is_ascii_whitespace() {
            pos += 1;
        } else {
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() && data[pos] != b'#' {
                pos += 1;
            }
            tokens.push((String::from_utf8_lossy(&data[start..pos]).into_owned(), pos));
        }
    }
    (tokens, pos)
}

/// Parses a plain (`P3`) or binary (`P6`) PPM image.
pub fn parse_ppm(data: &[u8], src: &str) -> Result<RgbImage> {
    let bad = |msg: String| Error::parse(src, 1, msg);
    let (header, _) = ppm_tokens(data);
    if header.len() < 4 {
        return Err(bad("truncated PPM header".into()));
    }
    let magic = header[0].0.as_str();
    let num = |k: usize, name: &str| -> Result<usize> {
        header[k]
            .0
            .parse()
            .map_err(|_| bad(format!("PPM {name} `{}` is not an integer", header[k].0)))
    };
    let width = num(1, "width")?;
    let height = num(2, "height")?;
    let maxval = num(3, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("PPM maxval {maxval} outside 1..=65535")));
    }
    let count = width * height * 3;
    let raw: Vec<usize> = match magic {
        "P3" => {
            let body = String::from_utf8_lossy(&data[header[3].1..]);
            let values: Vec<usize> = body
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(str::split_whitespace)
                .map(|t| t.parse().map_err(|_| bad(format!("PPM sample `{t}` is not an integer"))))
                .collect::<Result<_>>()?;
            values
        }
        "P6" => {
            // exactly one whitespace byte separates maxval from the raster
            let start = header[3].1 + 1;
            let bytes_per = if maxval < 256 { 1 } else { 2 };
            let body = data.get(start..).unwrap_or(&[]);
            if body.len() < count * bytes_per {
                return Err(bad(format!(
                    "PPM raster has {} bytes, expected {}",
                    body.len(),
                    count * bytes_per
                )));
            }
            if bytes_per == 1 {
                body[..count].iter().map(|&b| b as usize).collect()
            } else {
                body[..2 * count]
                    .chunks_exact(2)
                    .map(|c| ((c[0] as usize) << 8) | c[1] as usize)
                    .collect()
            }
        }
        other => return Err(bad(format!("unsupported image format `{other}` (expected P3 or P6)"))),
    };
    if raw.len() < count {
        return Err(bad(format!("PPM has {} samples, expected {count}", raw.len())));
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(bad(format!("PPM sample {v} exceeds maxval {maxval}")));
    }
    let scale = maxval as f64;
    let pixels = raw[..count]
        .chunks_exact(3)
        .map(|c| [c[0] as f64 / scale, c[1] as f64 / scale, c[2] as f64 / scale])
        .collect();
    RgbImage::new(width, height, pixels)
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let data = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_ppm(&data, &path.display().to_string())
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM bytes with 8-bit channels and an optional header comment line.
pub fn encode_ppm(img: &RgbImage, comment: Option<&str>) -> Vec<u8> {
    let mut out = b"P6\n".to_vec();
    if let Some(c) = comment {
        out.extend(format!("# {c}\n").bytes());
    }
    out.extend(format!("{} {}\n255\n", img.width, img.height).bytes());
    for p in &img.pixels {
        out.extend(p.iter().map(|&v| quantize(v)));
    }
    out
}

/// Writes a binary PPM with 8-bit channels.
pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_ppm(img, None)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Black/white image of a mask, white where `mask` is true.
pub fn mask_image(width: usize, height: usize, mask: &[bool]) -> Result<RgbImage> {
    let pixels = mask.iter().map(|&m| if m { [1.0; 3] } else { [0.0; 3] }).collect();
    RgbImage::new(width, height, pixels)
}

/// Writes a black/white mask as a binary PPM.
pub fn write_mask_ppm(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    write_ppm(path, &mask_image(width, height, mask)?)
}

#[derive(Debug, Clone)]
pub struct ImageInstance {
    pub graph: EmpiricalGraph,
    pub model: LogisticModel,
    pub training: TrainingSet,
    /// Raw red value divided by the largest raw red value.
    pub redness: Vec<f64>,
    /// Channels with (near) zero variance, whose features were set to zero.
    pub constant_channels: [bool; 3],
}

fn grid_edges(width: usize, height: usize) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::with_capacity(2 * width * height);
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if c + 1 < width {
                edges.push((i, i + 1, 1.0));
            }
            if r + 1 < height {
                edges.push((i, i + width, 1.0));
            }
        }
    }
    edges
}

/// Grid graph over the pixels with standardized RGB features; pixels with
/// redness below 1/2 are labelled background (-1), above 9/10 foreground (+1).
pub fn image_to_instance(img: &RgbImage) -> Result<ImageInstance> {
    let n = img.pixels.len();
    let graph = EmpiricalGraph::new(n, &grid_edges(img.width, img.height))?;
    let max_red = img.pixels.iter().map(|p| p[0]).fold(0.0, f64::max);
    if max_red <= 0.0 {
        return Err(Error::Domain("degenerate image: no red component anywhere".into()));
    }
    let redness: Vec<f64> = img.pixels.iter().map(|p| p[0] / max_red).collect();

    let mut features = vec![0.0; n * 3];
    let mut constant_channels = [false; 3];
    for ch in 0..3 {
        let mean = img.pixels.iter().map(|p| p[ch]).sum::<f64>() / n as f64;
        let var = img.pixels.iter().map(|p| (p[ch] - mean).powi(2)).sum::<f64>() / n as f64;
        if var < VARIANCE_GUARD {
            constant_channels[ch] = true;
            continue;
        }
        let sd = var.sqrt();
        for (i, p) in img.pixels.iter().enumerate() {
            features[i * 3 + ch] = (p[ch] - mean) / sd;
        }
    }

    let labels: Vec<f64> = redness
        .iter()
        .map(|&r| {
            if r < 0.5 {
                -1.0
            } else if r > 0.9 {
                1.0
            } else {
                f64::NAN
            }
        })
        .collect();
    if !labels.contains(&-1.0) {
        return Err(Error::Domain("no background pixels (redness < 1/2)".into()));
    }
    if !labels.contains(&1.0) {
        return Err(Error::Domain("no foreground pixels (redness > 9/10)".into()));
    }
    let training = TrainingSet::new(n, (0..n).filter(|&i| !labels[i].is_nan()))?;
    let model = LogisticModel::new(3, features, labels)?;
    Ok(ImageInstance {
        graph,
        model,
        training,
        redness,
        constant_channels,
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub image: RgbImage,
    /// True for pixels inside the red square.
    pub mask: Vec<bool>,
}

/// Red square covering the central half of a blue `size x size` field, with
/// i.i.d. Gaussian noise of standard deviation `noise` added to every
/// channel and clipped to `[0, 1]`.
pub fn red_square_image(size: usize, noise: f64, seed: u64) -> Result<SyntheticImage> {
    if size < 2 {
        return Err(Error::invalid("image size must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (size / 4, size - size / 4);
    let mut pixels = Vec::with_capacity(size * size);
    let mut mask = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let inside = (lo..hi).contains(&r) && (lo..hi).contains(&c);
            let base = if inside { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
            let mut px = [0.0; 3];
            for ch in 0..3 {
                px[ch] = (base[ch] + noise * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0);
            }
            pixels.push(px);
            mask.push(inside);
        }
    }
    Ok(SyntheticImage {
        image: RgbImage::new(size, size, pixels)?,
        mask,
    })
}
