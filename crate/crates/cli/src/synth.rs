//! Procedural handwritten-style digits, 28x28 grayscale, labels 0..=9.

use std::f64::consts::PI;

use rand::Rng as _;
use semqam_core::ingest::ImageDataset;
use semqam_core::rng::{derive_seed, rng_from_seed, Rng};

pub const SIDE: usize = 28;

type Stroke = Vec<(f64, f64)>;

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64, n: usize) -> Stroke {
    (0..=n)
        .map(|k| {
            let t = from + (to - from) * k as f64 / n as f64;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Glyph skeletons in a unit box, x to the right and y downward.
fn glyph(digit: u32) -> Vec<Stroke> {
    match digit {
        0 => vec![ellipse(0.5, 0.5, 0.3, 0.48, 0.0, 2.0 * PI, 20)],
        1 => vec![vec![(0.33, 0.2), (0.52, 0.0), (0.52, 1.0)]],
        2 => vec![{
            let mut s = ellipse(0.5, 0.28, 0.3, 0.28, PI, 2.15 * PI, 10);
            s.extend([(0.2, 1.0), (0.82, 1.0)]);
            s
        }],
        3 => vec![
            ellipse(0.5, 0.26, 0.28, 0.24, 1.1 * PI, 2.5 * PI, 10),
            ellipse(0.5, 0.74, 0.31, 0.26, 1.5 * PI, 2.9 * PI, 10),
        ],
        4 => vec![vec![(0.66, 1.0), (0.66, 0.0), (0.14, 0.68), (0.88, 0.68)]],
        5 => vec![{
            let mut s = vec![(0.8, 0.0), (0.28, 0.0), (0.24, 0.44)];
            s.extend(ellipse(0.5, 0.7, 0.3, 0.3, 1.2 * PI, 2.8 * PI, 12));
            s
        }],
        6 => vec![{
            let mut s = vec![(0.72, 0.02), (0.4, 0.3)];
            s.extend(ellipse(0.5, 0.7, 0.28, 0.3, 1.1 * PI, 3.1 * PI, 16));
            s
        }],
        7 => vec![
            vec![(0.18, 0.0), (0.82, 0.0), (0.42, 1.0)],
            vec![(0.38, 0.5), (0.72, 0.5)],
        ],
        8 => vec![
            ellipse(0.5, 0.25, 0.22, 0.25, 0.0, 2.0 * PI, 14),
            ellipse(0.5, 0.73, 0.28, 0.27, 0.0, 2.0 * PI, 16),
        ],
        _ => vec![{
            let mut s = ellipse(0.5, 0.3, 0.27, 0.3, 0.1 * PI, 2.1 * PI, 16);
            s.extend([(0.76, 0.35), (0.68, 1.0)]);
            s
        }],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// Renders one randomly deformed instance of `digit`.
pub fn render_digit(digit: u32, rng: &mut Rng) -> Vec<f64> {
    let angle: f64 = rng.random_range(-0.25..0.25);
    let shear = rng.random_range(-0.25..0.25);
    let height = rng.random_range(16.0..21.0);
    let width = height * rng.random_range(0.55..0.85);
    let cx = 14.0 + rng.random_range(-2.0..2.0);
    let cy = 14.0 + rng.random_range(-1.5..1.5);
    let thickness = rng.random_range(0.9..2.1);
    let (sin, cos) = angle.sin_cos();
    let jitter = 0.04;

    let strokes: Vec<Vec<(f64, f64)>> = glyph(digit)
        .into_iter()
        .map(|stroke| {
            stroke
                .into_iter()
                .map(|(x, y)| {
                    let x = x + rng.random_range(-jitter..jitter);
                    let y = y + rng.random_range(-jitter..jitter);
                    let u = (x - 0.5) * width + shear * (y - 0.5) * height;
                    let v = (y - 0.5) * height;
                    (cx + cos * u - sin * v, cy + sin * u + cos * v)
                })
                .collect()
        })
        .collect();

    let mut image = vec![0.0; SIDE * SIDE];
    for (idx, px) in image.iter_mut().enumerate() {
        let p = ((idx % SIDE) as f64 + 0.5, (idx / SIDE) as f64 + 0.5);
        let d = strokes
            .iter()
            .flat_map(|s| s.windows(2).map(move |w| segment_distance(p, w[0], w[1])))
            .fold(f64::INFINITY, f64::min);
        *px = (thickness - d + 0.5).clamp(0.0, 1.0);
    }
    // 8-bit quantization, as stored in IDX files
    for px in &mut image {
        *px = (*px * 255.0).round() / 255.0;
    }
    image
}

/// `count` digits with labels cycling 0..=9; image `k` uses a seed derived
/// from `(seed, k)` so any prefix is stable.
pub fn synthetic_digits(count: usize, seed: u64) -> ImageDataset {
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let digit = (k % 10) as u32;
        let mut rng = rng_from_seed(derive_seed(seed, &[k as u64]));
        images.push(render_digit(digit, &mut rng));
        labels.push(digit);
    }
    ImageDataset::new(images, labels, SIDE, SIDE, 10).expect("generator output is well formed")
}
