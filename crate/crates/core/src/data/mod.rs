//! Core dataset types, portable storage, and the synthetic generator.

mod io;
mod synth;

pub use io::{load_dataset, save_dataset};
pub use synth::{
    generate_synthetic, LabelPlan, NuisanceOp, OpVerdict, PatternKind, SensitivitySpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Small RGB raster with real-valued pixels in `[0,1]`, row-major `(H,W,C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

pub const CHANNELS: usize = 3;

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Image> {
        if height < 8 || width < 8 {
            return Err(Error::invalid(format!("image {height}x{width} below 8x8 minimum")));
        }
        if pixels.len() != height * width * CHANNELS {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width, CHANNELS],
                got: vec![pixels.len()],
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pixel values outside [0,1]"));
        }
        Ok(Image { height, width, pixels })
    }

    /// Uniform gray canvas.
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Image> {
        Image::new(height, width, vec![value; height * width * CHANNELS])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.pixels[(y * self.width + x) * CHANNELS + c] = v;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn clamp_in_place(&mut self) {
        for p in &mut self.pixels {
            *p = p.clamp(0.0, 1.0);
        }
    }

    /// Network input layout `(C,H,W)`.
    pub fn to_tensor(&self) -> Tensor {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0.0; CHANNELS * h * w];
        for y in 0..h {
            for x in 0..w {
                for c in 0..CHANNELS {
                    data[c * h * w + y * w + x] = self.get(y, x, c);
                }
            }
        }
        Tensor::from_vec(&[CHANNELS, h, w], data).expect("image tensor shape")
    }

    /// Maximum absolute per-pixel difference.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.pixels
            .iter()
            .zip(other.pixels.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Multi-hot label vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector {
    bits: Vec<u8>,
}

impl LabelVector {
    pub fn new(bits: Vec<u8>) -> Result<LabelVector> {
        if bits.iter().any(|b| *b > 1) {
            return Err(Error::invalid("label bits must be 0 or 1"));
        }
        Ok(LabelVector { bits })
    }

    pub fn zeros(len: usize) -> LabelVector {
        LabelVector { bits: vec![0; len] }
    }

    /// Single-label indicator vector.
    pub fn one_hot(len: usize, idx: usize) -> LabelVector {
        let mut bits = vec![0; len];
        bits[idx] = 1;
        LabelVector { bits }
    }

    pub fn ones(len: usize) -> LabelVector {
        LabelVector { bits: vec![1; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx] == 1
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|b| *b as f64).collect()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(&[self.bits.len()], self.as_f64()).expect("label tensor")
    }

    /// Compact `0101`-style string, label 0 first.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<LabelVector> {
        let bits: Result<Vec<u8>> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("bad label bit `{other}`"))),
            })
            .collect();
        Ok(LabelVector { bits: bits? })
    }
}

/// One unit of data: image plus labels.
#[derive(Clone, Debug)]
pub struct Instance {
    pub id: String,
    pub image: Image,
    pub labels: LabelVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Valid,
    Test,
}

/// Ordered instance collection with shared label vocabulary.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub label_names: Vec<String>,
    pub split_tag: SplitTag,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>, label_names: Vec<String>, split_tag: SplitTag) -> Result<Dataset> {
        let ds = Dataset { instances, label_names, split_tag };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.label_names.len();
        let mut seen = std::collections::HashSet::new();
        let dims = self.instances.first().map(|i| (i.image.height(), i.image.width()));
        for inst in &self.instances {
            if inst.labels.len() != l {
                return Err(Error::Instance {
                    id: inst.id.clone(),
                    reason: format!("label count {} does not match dataset {}", inst.labels.len(), l),
                });
            }
            if Some((inst.image.height(), inst.image.width())) != dims {
                return Err(Error::Instance {
                    id: inst.id.clone(),
                    reason: "image dimensions differ across dataset".into(),
                });
            }
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::Instance { id: inst.id.clone(), reason: "duplicate id".into() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }
}

/// Per-label positive proportions.
pub fn positive_rates(ds: &Dataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::invalid("positive_rates on empty dataset"));
    }
    let l = ds.num_labels();
    let mut counts = vec![0usize; l];
    for inst in &ds.instances {
        for (c, b) in counts.iter_mut().zip(inst.labels.bits()) {
            *c += *b as usize;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / ds.len() as f64).collect())
}
