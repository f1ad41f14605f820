use image::RgbImage;

use crate::error::{Error, Result};

pub const PATCH_SIZE: usize = 64;
const PATCH_LEN: usize = PATCH_SIZE * PATCH_SIZE * 3;

/// A 64×64 RGB crop stored row-major, channels interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct Patch(Box<[u8]>);

impl Patch {
    /// Cuts the patch whose top-left corner is at pixel `(y, x)`.
    pub fn cut(image: &RgbImage, y: usize, x: usize) -> Result<Patch> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        if y + PATCH_SIZE > h || x + PATCH_SIZE > w {
            return Err(Error::Size(format!(
                "patch at ({y}, {x}) exceeds {w}x{h} image"
            )));
        }
        let raw = image.as_raw();
        let mut buf = Vec::with_capacity(PATCH_LEN);
        for row in y..y + PATCH_SIZE {
            let start = (row * w + x) * 3;
            buf.extend_from_slice(&raw[start..start + PATCH_SIZE * 3]);
        }
        Ok(Patch(buf.into_boxed_slice()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Appends the patch to `out` scaled to `[0, 1]`.
    pub fn extend_normalized(&self, out: &mut Vec<f32>) {
        out.extend(self.0.iter().map(|&v| v as f32 / 255.0));
    }
}

impl std::fmt::Debug for Patch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Patch({}x{}x3)", PATCH_SIZE, PATCH_SIZE)
    }
}

/// Non-overlapping raster tiling of one image.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub patches: Vec<Patch>,
    /// `(row, col)` grid index of each patch, row-major.
    pub coords: Vec<(usize, usize)>,
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// All patches scaled to `[0, 1]`, NHWC.
    pub fn to_normalized(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.len() * PATCH_LEN);
        for p in &self.patches {
            p.extend_normalized(&mut out);
        }
        out
    }

    /// Reassembles the covered top-left region.
    pub fn reassemble(&self) -> RgbImage {
        let (w, h) = (self.cols * PATCH_SIZE, self.rows * PATCH_SIZE);
        let mut img = RgbImage::new(w as u32, h as u32);
        let raw: &mut [u8] = &mut img;
        for (patch, &(r, c)) in self.patches.iter().zip(&self.coords) {
            for py in 0..PATCH_SIZE {
                let dst = ((r * PATCH_SIZE + py) * w + c * PATCH_SIZE) * 3;
                let src = py * PATCH_SIZE * 3;
                raw[dst..dst + PATCH_SIZE * 3].copy_from_slice(&patch.0[src..src + PATCH_SIZE * 3]);
            }
        }
        img
    }
}

/// Tiles an image into non-overlapping 64×64 patches in raster order.
/// Border pixels beyond the last full tile are discarded.
pub fn crop_patches(image: &RgbImage) -> Result<PatchGrid> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(Error::Size(format!(
            "image {w}x{h} is smaller than one {PATCH_SIZE}x{PATCH_SIZE} patch"
        )));
    }
    let (rows, cols) = (h / PATCH_SIZE, w / PATCH_SIZE);
    let mut patches = Vec::with_capacity(rows * cols);
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            patches.push(Patch::cut(image, r * PATCH_SIZE, c * PATCH_SIZE)?);
            coords.push((r, c));
        }
    }
    Ok(PatchGrid {
        patches,
        coords,
        rows,
        cols,
    })
}
