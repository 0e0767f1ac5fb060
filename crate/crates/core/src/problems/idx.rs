//! IDX binary arrays (the MNIST distribution format) and conversion of
//! two-digit subsets into polar datasets.

use std::path::Path;

use super::binnn::LabeledDataset;
use super::ProblemError;
use crate::bitstate::BitVector;

/// Unsigned-byte IDX array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an IDX buffer: two zero bytes, type code `0x08` (unsigned byte),
/// the dimension count, big-endian `u32` sizes, then the raw values.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray, ProblemError> {
    let bad = |msg: &str| ProblemError::Parse {
        line: 0,
        msg: format!("idx: {msg}"),
    };
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(bad("bad magic"));
    }
    if bytes[2] != 0x08 {
        return Err(bad(&format!("unsupported type code {:#04x}", bytes[2])));
    }
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if ndims == 0 || bytes.len() < header {
        return Err(bad("truncated header"));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("size overflow"))?;
    if bytes.len() - header != count {
        return Err(bad(&format!("expected {count} values, found {}", bytes.len() - header)));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn load_idx(path: &Path) -> Result<IdxArray, ProblemError> {
    let bytes = std::fs::read(path).map_err(|e| ProblemError::Io(format!("{}: {e}", path.display())))?;
    parse_idx(&bytes)
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn bilinear_resize(img: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    assert_eq!(img.len(), h * w);
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let px = |r: usize, c: usize| img[r * w + c];
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for c in 0..out_w {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let top = px(y0, x0) * (1.0 - tx) + px(y0, x1) * tx;
            let bottom = px(y1, x0) * (1.0 - tx) + px(y1, x1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePrep {
    pub side: usize,
    /// Intensities `>= threshold` become `+1`.
    pub threshold: f64,
}

impl Default for ImagePrep {
    fn default() -> Self {
        Self {
            side: 14,
            threshold: 127.5,
        }
    }
}

/// Keeps images whose label is `negative` or `positive`, resizes them and
/// polarises every pixel; `positive` becomes label 1.
pub fn binary_digit_dataset(
    images: &IdxArray,
    labels: &IdxArray,
    negative: u8,
    positive: u8,
    prep: ImagePrep,
) -> Result<LabeledDataset, ProblemError> {
    if images.dims.len() != 3 || labels.dims.len() != 1 || images.dims[0] != labels.dims[0] {
        return Err(ProblemError::Invalid(format!(
            "image dims {:?} do not match label dims {:?}",
            images.dims, labels.dims
        )));
    }
    let (h, w) = (images.dims[1], images.dims[2]);
    if h == 0 || w == 0 || prep.side == 0 {
        return Err(ProblemError::Invalid("empty images".into()));
    }
    let mut inputs = Vec::new();
    let mut ys = Vec::new();
    for (n, &label) in labels.data.iter().enumerate() {
        let y = match label {
            l if l == negative => 0,
            l if l == positive => 1,
            _ => continue,
        };
        let img: Vec<f64> = images.data[n * h * w..(n + 1) * h * w].iter().map(|&v| v as f64).collect();
        let small = bilinear_resize(&img, h, w, prep.side, prep.side);
        let bits: Vec<bool> = small.iter().map(|&v| v >= prep.threshold).collect();
        inputs.push(BitVector::from_bits(&bits));
        ys.push(y);
    }
    LabeledDataset::new(inputs, ys)
}
