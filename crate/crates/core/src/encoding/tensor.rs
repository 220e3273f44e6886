use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AnchorGrid;
use crate::error::{Error, Result};

pub const LAYOUT: &str = "class|orientation|offsets";
pub const DTYPE: &str = "f32le";

/// Raw detector outputs: per anchor, `classes` class logits (background
/// first), `bins` orientation logits and 4 box offsets, stored anchor-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTensor {
    anchors: usize,
    classes: usize,
    bins: usize,
    data: Vec<f64>,
}

impl PredictionTensor {
    pub fn zeros(anchors: usize, classes: usize, bins: usize) -> Self {
        PredictionTensor {
            anchors,
            classes,
            bins,
            data: vec![0.0; anchors * (classes + bins + 4)],
        }
    }

    pub fn from_data(anchors: usize, classes: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        if classes < 2 || bins == 0 {
            return Err(Error::Tensor(format!(
                "need ≥2 classes and ≥1 bin, got {classes} and {bins}"
            )));
        }
        let expected = anchors * (classes + bins + 4);
        if data.len() != expected {
            return Err(Error::Tensor(format!("expected {expected} values, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Tensor(format!("non-finite value at index {i}")));
        }
        Ok(PredictionTensor {
            anchors,
            classes,
            bins,
            data,
        })
    }

    pub fn anchors(&self) -> usize {
        self.anchors
    }

    /// Including background.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn record_len(&self) -> usize {
        self.classes + self.bins + 4
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn record(&self, anchor: usize) -> &[f64] {
        let n = self.record_len();
        &self.data[anchor * n..(anchor + 1) * n]
    }

    pub fn class_logits(&self, anchor: usize) -> &[f64] {
        &self.record(anchor)[..self.classes]
    }

    pub fn orientation_logits(&self, anchor: usize) -> &[f64] {
        &self.record(anchor)[self.classes..self.classes + self.bins]
    }

    pub fn offsets(&self, anchor: usize) -> [f64; 4] {
        let r = &self.record(anchor)[self.classes + self.bins..];
        [r[0], r[1], r[2], r[3]]
    }

    /// Flat index of the first class logit of `anchor`.
    pub fn class_index(&self, anchor: usize) -> usize {
        anchor * self.record_len()
    }

    pub fn orientation_index(&self, anchor: usize) -> usize {
        anchor * self.record_len() + self.classes
    }

    pub fn offsets_index(&self, anchor: usize) -> usize {
        anchor * self.record_len() + self.classes + self.bins
    }

    pub fn record_mut(&mut self, anchor: usize) -> &mut [f64] {
        let n = self.record_len();
        &mut self.data[anchor * n..(anchor + 1) * n]
    }

    /// Checks the tensor against the grid and head sizes it will be decoded with.
    pub fn check_shape(&self, grid: &AnchorGrid, classes: usize, bins: usize) -> Result<()> {
        if self.anchors != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "tensor has {} anchors, grid has {}",
                self.anchors,
                grid.len()
            )));
        }
        if self.classes != classes || self.bins != bins {
            return Err(Error::ShapeMismatch(format!(
                "tensor has {} classes and {} bins, expected {classes} and {bins}",
                self.classes, self.bins
            )));
        }
        Ok(())
    }

    fn header(&self) -> TensorHeader {
        TensorHeader {
            anchors: self.anchors,
            classes: self.classes,
            bins: self.bins,
            layout: LAYOUT.to_string(),
            dtype: DTYPE.to_string(),
        }
    }

    fn blob(&self) -> Vec<u8> {
        self.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorHeader {
    anchors: usize,
    classes: usize,
    bins: usize,
    layout: String,
    dtype: String,
}

/// Sibling blob path used by the two-file form: `pred.json` -> `pred.bin`.
pub fn blob_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

/// Writes the single-file form: the JSON header, one `\n`, then the blob.
pub fn write_predictions(path: &Path, tensor: &PredictionTensor) -> Result<()> {
    let mut bytes = serde_json::to_vec(&tensor.header()).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    bytes.extend(tensor.blob());
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the two-file form: the JSON header at `path` and the blob next to
/// it (see [`blob_path`]).
pub fn write_predictions_split(path: &Path, tensor: &PredictionTensor) -> Result<()> {
    let mut header = serde_json::to_vec(&tensor.header()).map_err(|e| Error::json(path, e))?;
    header.push(b'\n');
    fs::write(path, header).map_err(|e| Error::io(path, e))?;
    let bin = blob_path(path);
    fs::write(&bin, tensor.blob()).map_err(|e| Error::io(&bin, e))
}

/// Reads either form. In the single-file form the blob starts right after
/// the newline that ends the header; a header followed by nothing else means
/// the blob lives in the sibling `.bin` file.
pub fn load_predictions(path: &Path) -> Result<PredictionTensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut stream = serde_json::Deserializer::from_slice(&bytes).into_iter::<TensorHeader>();
    let header = match stream.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::json(path, e)),
        None => return Err(Error::Tensor("missing header".into())),
    };
    let end = stream.byte_offset();
    if header.layout != LAYOUT {
        return Err(Error::Tensor(format!("unsupported layout '{}'", header.layout)));
    }
    if header.dtype != DTYPE {
        return Err(Error::Tensor(format!("unsupported dtype '{}'", header.dtype)));
    }
    let count = header.anchors * (header.classes + header.bins + 4);
    let inline: &[u8] = match &bytes[end..] {
        [] => &[],
        [b'\n', rest @ ..] => rest,
        _ => return Err(Error::Tensor("header must be followed by a newline".into())),
    };
    let owned;
    let blob = if inline.is_empty() && count > 0 {
        let bin = blob_path(path);
        owned = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        &owned[..]
    } else {
        inline
    };
    if blob.len() != count * 4 {
        return Err(Error::Tensor(format!(
            "blob holds {} bytes, header requires {}",
            blob.len(),
            count * 4
        )));
    }
    let data = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    PredictionTensor::from_data(header.anchors, header.classes, header.bins, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PredictionTensor {
        let data = (0..3 * (4 + 5 + 4)).map(|i| i as f64 * 0.25 - 3.0).collect();
        PredictionTensor::from_data(3, 4, 5, data).unwrap()
    }

    #[test]
    fn header_field_order() {
        let h = serde_json::to_string(&sample().header()).unwrap();
        assert_eq!(
            h,
            r#"{"anchors":3,"classes":4,"bins":5,"layout":"class|orientation|offsets","dtype":"f32le"}"#
        );
    }

    #[test]
    fn round_trip_both_forms() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample();
        let one = dir.path().join("one.tensor");
        write_predictions(&one, &t).unwrap();
        assert_eq!(load_predictions(&one).unwrap(), t);
        let two = dir.path().join("two.json");
        write_predictions_split(&two, &t).unwrap();
        assert!(blob_path(&two).exists());
        assert_eq!(load_predictions(&two).unwrap(), t);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tensor");
        write_predictions(&p, &sample()).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_predictions(&p), Err(Error::Tensor(_))));
    }

    #[test]
    fn accessors_follow_layout() {
        let t = sample();
        let r = t.record(1);
        assert_eq!(t.class_logits(1), &r[..4]);
        assert_eq!(t.orientation_logits(1), &r[4..9]);
        assert_eq!(t.offsets(1), [r[9], r[10], r[11], r[12]]);
        assert_eq!(t.data()[t.offsets_index(1)], r[9]);
    }

    #[test]
    fn non_finite_rejected() {
        let mut data = vec![0.0; 13];
        data[5] = f64::NAN;
        assert!(PredictionTensor::from_data(1, 4, 5, data).is_err());
    }
}
