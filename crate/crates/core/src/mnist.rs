//! IDX tensor files (the MNIST distribution format), digit filtering and
//! density-ratio ranking of images.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use flate2::read::GzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::diffusion_basis::DiffusionBasis;
use crate::error::{Result, SstError};
use crate::kernel_space::KernelConfig;
use crate::null_models::bootstrap_sample;
use crate::rng::{self, Purpose};
use crate::smooth_test::{density_ratio_eval, estimate_coefficients, DensityRatio};

/// Element type code for unsigned bytes, the only type MNIST uses.
pub const DTYPE_U8: u8 = 0x08;

/// Bandwidth used for the MNIST ranking on raw 0–255 pixels.
pub const DEFAULT_RANK_BANDWIDTH: f64 = 6_392_915.0;
pub const DEFAULT_RANK_CUTOFF: usize = 10;

/// A parsed IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dtype: u8,
    pub dims: Vec<u32>,
    pub payload: Vec<u8>,
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(SstError::Parse { offset, message: message.into() })
}

/// Parses `[0, 0, dtype, ndims]`, `ndims` big-endian `u32` sizes, then the
/// row-major payload. Trailing bytes are rejected.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return parse_err(0, "input shorter than the 4-byte IDX header");
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return parse_err(0, format!("bad magic {:02x} {:02x}, expected 00 00", bytes[0], bytes[1]));
    }
    let dtype = bytes[2];
    if dtype != DTYPE_U8 {
        return parse_err(2, format!("unsupported element type 0x{dtype:02x}, expected 0x08"));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return parse_err(3, "tensor has zero dimensions");
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return parse_err(bytes.len(), format!("truncated header: {ndims} dimension sizes need {header} bytes"));
    }
    let dims: Vec<u32> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or(SstError::Parse { offset: 4, message: "dimension product overflows".into() })?;
    let available = bytes.len() - header;
    if available < expected {
        return parse_err(bytes.len(), format!("truncated payload: expected {expected} bytes, found {available}"));
    }
    if available > expected {
        return parse_err(header + expected, format!("{} trailing bytes after payload", available - expected));
    }
    Ok(IdxTensor { dtype, dims, payload: bytes[header..].to_vec() })
}

impl IdxTensor {
    /// Encodes the tensor back into IDX bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.payload.len());
        out.extend_from_slice(&[0, 0, self.dtype, self.dims.len() as u8]);
        for d in &self.dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    /// Number of items along the first dimension.
    pub fn count(&self) -> usize {
        self.dims[0] as usize
    }

    /// Elements per item (product of the trailing dimensions).
    pub fn item_len(&self) -> usize {
        self.dims[1..].iter().map(|&d| d as usize).product()
    }
}

/// Reads an IDX file, transparently gunzipping it when it starts with the
/// gzip magic bytes.
pub fn read_idx_file(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| {
        SstError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        out
    } else {
        raw
    };
    parse_idx(&bytes)
}

/// Flattened images with their digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImages {
    pub images: Dataset,
    pub labels: Vec<u8>,
    /// Whether pixels were kept on the 0–255 scale.
    pub raw_pixels: bool,
    /// Image side lengths (rows, columns) when known.
    pub shape: (usize, usize),
}

/// Combines an image tensor and a label tensor. Pixels are scaled to [0, 1]
/// unless `raw_pixels` is set.
pub fn labeled_from_tensors(images: &IdxTensor, labels: &IdxTensor, raw_pixels: bool) -> Result<LabeledImages> {
    if images.dims.len() < 2 {
        return Err(SstError::Usage(format!("image tensor has shape {:?}, expected [N, rows, cols]", images.dims)));
    }
    if labels.dims.len() != 1 {
        return Err(SstError::Usage(format!("label tensor has shape {:?}, expected [N]", labels.dims)));
    }
    if images.count() != labels.count() {
        return Err(SstError::Usage(format!(
            "{} images but {} labels",
            images.count(),
            labels.count()
        )));
    }
    if let Some(bad) = labels.payload.iter().find(|&&l| l > 9) {
        return Err(SstError::Usage(format!("label {bad} is not a digit")));
    }
    let scale = if raw_pixels { 1.0 } else { 1.0 / 255.0 };
    let values = images.payload.iter().map(|&p| p as f64 * scale).collect();
    let shape = match images.dims.len() {
        3 => (images.dims[1] as usize, images.dims[2] as usize),
        _ => (1, images.item_len()),
    };
    Ok(LabeledImages {
        images: Dataset::from_flat(images.item_len().max(1), values)?,
        labels: labels.payload.clone(),
        raw_pixels,
        shape,
    })
}

/// Loads an image file and its label file.
pub fn load_labeled(images: impl AsRef<Path>, labels: impl AsRef<Path>, raw_pixels: bool) -> Result<LabeledImages> {
    labeled_from_tensors(&read_idx_file(images)?, &read_idx_file(labels)?, raw_pixels)
}

impl LabeledImages {
    /// Positions of the images labelled `digit`, in file order.
    pub fn indices_of(&self, digit: u8) -> Result<Vec<usize>> {
        if digit > 9 {
            return Err(SstError::Usage(format!("digit must be in 0..=9, got {digit}")));
        }
        Ok(self.labels.iter().enumerate().filter(|(_, &l)| l == digit).map(|(i, _)| i).collect())
    }
}

/// Images labelled `digit`, order preserved. May be empty.
pub fn filter_digit(data: &LabeledImages, digit: u8) -> Result<Dataset> {
    let idx = data.indices_of(digit)?;
    if idx.is_empty() {
        return Ok(Dataset::empty(data.images.dim()));
    }
    Ok(data.images.select(&idx))
}

/// Parameters of [`rank_by_density_ratio`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    pub cutoff: usize,
    pub bandwidth: f64,
    /// Size of the bootstrap null sample the basis is built from.
    pub m: usize,
    pub seed: u64,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { cutoff: DEFAULT_RANK_CUTOFF, bandwidth: DEFAULT_RANK_BANDWIDTH, m: 1000, seed: 0 }
    }
}

/// Fits the basis on a bootstrap sample of `train`, estimates the density
/// ratio on `test` and returns `(test index, ĥ)` sorted ascending by `ĥ`.
/// Values above 1 mark points more typical of `test` than of `train`.
pub fn rank_by_density_ratio(train: &Dataset, test: &Dataset, cfg: &RankConfig) -> Result<Vec<(usize, f64)>> {
    let ratio = fit_density_ratio(train, test, cfg)?;
    let mut ranked: Vec<(usize, f64)> = (0..test.len())
        .into_par_iter()
        .map(|i| density_ratio_eval(&ratio, test.row(i)).map(|h| (i, h)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// The density ratio behind [`rank_by_density_ratio`].
pub fn fit_density_ratio(train: &Dataset, test: &Dataset, cfg: &RankConfig) -> Result<DensityRatio> {
    if train.is_empty() || test.is_empty() {
        return Err(SstError::Usage("ranking needs nonempty train and test sets".into()));
    }
    if train.dim() != test.dim() {
        return Err(SstError::Config(format!(
            "train dimension {} differs from test dimension {}",
            train.dim(),
            test.dim()
        )));
    }
    let mut s = rng::stream(cfg.seed, Purpose::Bootstrap, 0, 0);
    let null = Arc::new(bootstrap_sample(train, cfg.m, &mut s)?);
    let basis = DiffusionBasis::fit(null, KernelConfig::new(cfg.bandwidth)?, cfg.cutoff)?;
    let coef = estimate_coefficients(&basis, test, cfg.cutoff)?;
    DensityRatio::new(basis, coef.theta)
}

/// Writes `index,label,h` rows in ranked order. `indices` maps positions in
/// the ranked dataset back to positions in the original file.
pub fn write_ranking_csv(
    mut out: impl Write,
    ranked: &[(usize, f64)],
    indices: &[usize],
    labels: &[u8],
) -> Result<()> {
    writeln!(out, "index,label,h")?;
    for &(i, h) in ranked {
        let original = indices[i];
        writeln!(out, "{original},{},{h}", labels[original])?;
    }
    Ok(())
}

/// Three-row binary PGM: the `per_row` lowest-ranked images, those closest
/// to `ĥ = 1`, and the highest-ranked.
pub fn contact_sheet(
    images: &Dataset,
    ranked: &[(usize, f64)],
    shape: (usize, usize),
    per_row: usize,
    raw_pixels: bool,
) -> Result<Vec<u8>> {
    let (rows, cols) = shape;
    if rows * cols != images.dim() {
        return Err(SstError::Config(format!("image shape {rows}×{cols} does not match dimension {}", images.dim())));
    }
    let k = per_row.min(ranked.len());
    let low: Vec<usize> = ranked.iter().take(k).map(|r| r.0).collect();
    let high: Vec<usize> = ranked.iter().rev().take(k).map(|r| r.0).collect();
    let mut by_gap: Vec<(usize, f64)> = ranked.to_vec();
    by_gap.sort_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()).then(a.0.cmp(&b.0)));
    let mid: Vec<usize> = by_gap.iter().take(k).map(|r| r.0).collect();

    let gap = 2;
    let width = k * cols + (k + 1) * gap;
    let height = 3 * rows + 4 * gap;
    let mut pixels = vec![128u8; width * height];
    let scale = if raw_pixels { 1.0 } else { 255.0 };
    for (band, picks) in [low, mid, high].iter().enumerate() {
        for (slot, &img) in picks.iter().enumerate() {
            let x0 = gap + slot * (cols + gap);
            let y0 = gap + band * (rows + gap);
            for (p, v) in images.row(img).iter().enumerate() {
                let (r, c) = (p / cols, p % cols);
                pixels[(y0 + r) * width + x0 + c] = (v * scale).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_assembled_vectors() {
        let t = parse_idx(&[0, 0, 8, 1, 0, 0, 0, 2, 5, 7]).unwrap();
        assert_eq!(t.dims, vec![2]);
        assert_eq!(t.payload, vec![5, 7]);

        let t = parse_idx(&[0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0xff]).unwrap();
        assert_eq!(t.dims, vec![1, 1, 1]);
        assert_eq!(t.payload, vec![255]);
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let offset = |b: &[u8]| match parse_idx(b) {
            Err(SstError::Parse { offset, .. }) => offset,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(offset(&[]), 0);
        assert_eq!(offset(&[1, 0, 8, 1]), 0);
        assert_eq!(offset(&[0, 0, 9, 1, 0, 0, 0, 0]), 2);
        assert_eq!(offset(&[0, 0, 8, 0]), 3);
        assert_eq!(offset(&[0, 0, 8, 2, 0, 0, 0, 1]), 8);
        assert_eq!(offset(&[0, 0, 8, 1, 0, 0, 0, 3, 1, 2]), 10);
        assert_eq!(offset(&[0, 0, 8, 1, 0, 0, 0, 1, 1, 2]), 9);
    }

    #[test]
    fn labeled_images_scale_and_flatten() {
        let images = IdxTensor { dtype: 8, dims: vec![1, 28, 28], payload: vec![255; 784] };
        let labels = IdxTensor { dtype: 8, dims: vec![1], payload: vec![9] };
        let li = labeled_from_tensors(&images, &labels, false).unwrap();
        assert_eq!(li.images.dim(), 784);
        assert_eq!(li.images.row(0)[0], 1.0);
        assert_eq!(li.labels, vec![9]);
        let raw = labeled_from_tensors(&images, &labels, true).unwrap();
        assert_eq!(raw.images.row(0)[0], 255.0);

        let two = IdxTensor { dtype: 8, dims: vec![2], payload: vec![1, 2] };
        assert!(matches!(labeled_from_tensors(&images, &two, false), Err(SstError::Usage(_))));
    }

    #[test]
    fn filter_digit_examples() {
        let images = IdxTensor { dtype: 8, dims: vec![3, 1, 2], payload: vec![1, 1, 2, 2, 3, 3] };
        let labels = IdxTensor { dtype: 8, dims: vec![3], payload: vec![7, 1, 7] };
        let li = labeled_from_tensors(&images, &labels, true).unwrap();
        let sevens = filter_digit(&li, 7).unwrap();
        assert_eq!(sevens.as_flat(), &[1.0, 1.0, 3.0, 3.0]);
        assert!(filter_digit(&li, 4).unwrap().is_empty());
        assert_eq!(filter_digit(&li, 1).unwrap().len(), 1);
        assert!(filter_digit(&li, 10).is_err());
    }

    #[test]
    fn contact_sheet_has_pgm_header() {
        let imgs = Dataset::from_flat(4, (0..12).map(|v| v as f64 * 20.0).collect()).unwrap();
        let ranked = vec![(2, 0.5), (0, 1.0), (1, 2.0)];
        let pgm = contact_sheet(&imgs, &ranked, (2, 2), 2, true).unwrap();
        let header = b"P5\n10 14\n255\n";
        assert!(pgm.starts_with(header));
        assert_eq!(pgm.len(), header.len() + 10 * 14);
    }

    fn tensor() -> impl Strategy<Value = IdxTensor> {
        prop::collection::vec(0u32..5, 1..4).prop_flat_map(|dims| {
            let len: usize = dims.iter().map(|&d| d as usize).product();
            prop::collection::vec(any::<u8>(), len)
                .prop_map(move |payload| IdxTensor { dtype: 8, dims: dims.clone(), payload })
        })
    }

    proptest! {
        #[test]
        fn round_trip(t in tensor()) {
            prop_assert_eq!(parse_idx(&t.to_bytes()).unwrap(), t);
        }

        #[test]
        fn parsing_is_total(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = parse_idx(&bytes);
        }
    }
}
