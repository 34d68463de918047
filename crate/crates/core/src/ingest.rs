//! Dataset parsing (IDX pairs and CSV rows) and the concept-slot grid.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

/// Grayscale images with class labels. Pixels are stored row-major per image
/// and scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
}

impl ImageDataset {
    pub fn new(
        images: Vec<Vec<f64>>,
        labels: Vec<u32>,
        height: usize,
        width: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            bail!(
                Consistency,
                "{} images but {} labels",
                images.len(),
                labels.len()
            );
        }
        if height == 0 || width == 0 {
            bail!(Format, "image dimensions must be positive");
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            bail!(Consistency, "label {bad} outside {num_classes} classes");
        }
        for img in &images {
            if img.len() != height * width {
                bail!(
                    Format,
                    "image has {} pixels, expected {}",
                    img.len(),
                    height * width
                );
            }
            if img.iter().any(|v| !(0.0..=1.0).contains(v)) {
                bail!(Format, "intensity outside [0, 1]");
            }
        }
        Ok(Self {
            images,
            labels,
            height,
            width,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Splits off the first `n` samples; the remainder stays in `self`.
    pub fn take_front(&mut self, n: usize) -> ImageDataset {
        let n = n.min(self.len());
        let images = self.images.drain(..n).collect();
        let labels = self.labels.drain(..n).collect();
        ImageDataset {
            images,
            labels,
            height: self.height,
            width: self.width,
            num_classes: self.num_classes,
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => bail!(Format, "truncated header at byte {offset}"),
    }
}

/// Parses an IDX image file and its companion label file.
///
/// The class count is taken as one more than the largest label.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<ImageDataset> {
    let magic = read_u32(image_bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        bail!(
            Format,
            "bad image magic {magic}, expected {IDX_IMAGE_MAGIC}"
        );
    }
    let count = read_u32(image_bytes, 4)? as usize;
    let height = read_u32(image_bytes, 8)? as usize;
    let width = read_u32(image_bytes, 12)? as usize;
    let expected = count
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .ok_or_else(|| crate::Error::Format("image dimensions overflow".into()))?;
    let payload = &image_bytes[16..];
    if payload.len() != expected {
        bail!(
            Format,
            "image payload has {} bytes, header requires {expected}",
            payload.len()
        );
    }

    let magic = read_u32(label_bytes, 0)?;
    if magic != IDX_LABEL_MAGIC {
        bail!(
            Format,
            "bad label magic {magic}, expected {IDX_LABEL_MAGIC}"
        );
    }
    let label_count = read_u32(label_bytes, 4)? as usize;
    let labels_raw = &label_bytes[8..];
    if labels_raw.len() != label_count {
        bail!(
            Format,
            "label payload has {} bytes, header requires {label_count}",
            labels_raw.len()
        );
    }
    if label_count != count {
        bail!(Consistency, "{count} images but {label_count} labels");
    }

    let pixels = height * width;
    let images = if pixels == 0 {
        vec![Vec::new(); count]
    } else {
        payload
            .chunks_exact(pixels)
            .map(|chunk| chunk.iter().map(|&b| f64::from(b) / 255.0).collect())
            .collect()
    };
    let labels: Vec<u32> = labels_raw.iter().map(|&b| u32::from(b)).collect();
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    ImageDataset::new(images, labels, height, width, num_classes)
}

fn to_byte(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
}

/// Encodes a dataset as an (images, labels) IDX byte pair.
pub fn encode_idx(dataset: &ImageDataset) -> (Vec<u8>, Vec<u8>) {
    let n = dataset.len() as u32;
    let mut images = Vec::with_capacity(16 + dataset.len() * dataset.pixels());
    images.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&(dataset.height as u32).to_be_bytes());
    images.extend_from_slice(&(dataset.width as u32).to_be_bytes());
    for img in &dataset.images {
        images.extend(img.iter().map(|&v| to_byte(v)));
    }

    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend(dataset.labels.iter().map(|&l| l as u8));
    (images, labels)
}

/// Parses `label,p1,...,p_{H*W}` rows with pixels in `[0, 255]`.
/// Blank lines are skipped. The class count is one more than the largest label.
pub fn parse_csv(text: &str, height: usize, width: usize) -> Result<ImageDataset> {
    let pixels = height * width;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != pixels + 1 {
            bail!(
                Format,
                "row {}: {} cells, expected {}",
                line_no + 1,
                cells.len(),
                pixels + 1
            );
        }
        let label: u32 = cells[0]
            .trim()
            .parse()
            .map_err(|_| crate::Error::Format(alloc::format!("row {}: bad label", line_no + 1)))?;
        let mut img = Vec::with_capacity(pixels);
        for cell in &cells[1..] {
            let v: f64 = cell.trim().parse().map_err(|_| {
                crate::Error::Format(alloc::format!(
                    "row {}: non-numeric cell {cell:?}",
                    line_no + 1
                ))
            })?;
            if !(0.0..=255.0).contains(&v) {
                bail!(Format, "row {}: pixel {v} outside [0, 255]", line_no + 1);
            }
            img.push(v / 255.0);
        }
        images.push(img);
        labels.push(label);
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    ImageDataset::new(images, labels, height, width, num_classes)
}

/// Writes the CSV layout read by [`parse_csv`], pixels as integers in `[0, 255]`.
pub fn write_csv(dataset: &ImageDataset) -> String {
    let mut out = String::new();
    for (img, label) in dataset.images.iter().zip(&dataset.labels) {
        let _ = write!(out, "{label}");
        for &v in img {
            let _ = write!(out, ",{}", to_byte(v));
        }
        out.push('\n');
    }
    out
}

/// Padding and tiling used to cut an image into concept slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub height: usize,
    pub width: usize,
    pub target_side: usize,
    pub patch_side: usize,
}

impl PatchGeometry {
    pub fn new(height: usize, width: usize, target_side: usize, patch_side: usize) -> Result<Self> {
        if patch_side == 0 || !target_side.is_multiple_of(patch_side) {
            bail!(
                Config,
                "patch side {patch_side} does not divide target side {target_side}"
            );
        }
        if target_side < height.max(width) {
            bail!(
                Config,
                "target side {target_side} smaller than image {height}x{width}"
            );
        }
        Ok(Self {
            height,
            width,
            target_side,
            patch_side,
        })
    }

    pub fn slots_per_side(&self) -> usize {
        self.target_side / self.patch_side
    }

    /// Number of concept slots N.
    pub fn num_slots(&self) -> usize {
        self.slots_per_side() * self.slots_per_side()
    }

    /// Patch dimension d_p.
    pub fn patch_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    fn pad_top(&self) -> usize {
        (self.target_side - self.height) / 2
    }

    fn pad_left(&self) -> usize {
        (self.target_side - self.width) / 2
    }

    /// Slot index and within-patch offset of an image pixel.
    pub fn locate(&self, row: usize, col: usize) -> (usize, usize) {
        let r = row + self.pad_top();
        let c = col + self.pad_left();
        let slot = (r / self.patch_side) * self.slots_per_side() + c / self.patch_side;
        let offset = (r % self.patch_side) * self.patch_side + c % self.patch_side;
        (slot, offset)
    }
}

/// Image cut into row-major concept slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patches: Vec<Vec<f64>>,
    pub slot_rows: usize,
    pub slot_cols: usize,
}

/// Zero-pads `image` (centered) to the target square and tiles it into
/// non-overlapping patches in row-major slot order.
pub fn patchify(image: &[f64], geometry: &PatchGeometry) -> Result<PatchGrid> {
    if image.len() != geometry.height * geometry.width {
        bail!(
            Data,
            "image has {} pixels, geometry expects {}",
            image.len(),
            geometry.height * geometry.width
        );
    }
    let mut patches = vec![vec![0.0; geometry.patch_dim()]; geometry.num_slots()];
    for row in 0..geometry.height {
        for col in 0..geometry.width {
            let (slot, offset) = geometry.locate(row, col);
            patches[slot][offset] = image[row * geometry.width + col];
        }
    }
    Ok(PatchGrid {
        patches,
        slot_rows: geometry.slots_per_side(),
        slot_cols: geometry.slots_per_side(),
    })
}

/// Inverse of [`patchify`]: reassembles tiles and crops the padding.
pub fn unpatchify(patches: &[Vec<f64>], geometry: &PatchGeometry) -> Result<Vec<f64>> {
    if patches.len() != geometry.num_slots() {
        bail!(
            Consistency,
            "{} patches for {} slots",
            patches.len(),
            geometry.num_slots()
        );
    }
    if patches.iter().any(|p| p.len() != geometry.patch_dim()) {
        bail!(
            Consistency,
            "patch dimension differs from {}",
            geometry.patch_dim()
        );
    }
    let mut image = vec![0.0; geometry.height * geometry.width];
    for row in 0..geometry.height {
        for col in 0..geometry.width {
            let (slot, offset) = geometry.locate(row, col);
            image[row * geometry.width + col] = patches[slot][offset];
        }
    }
    Ok(image)
}
