//! Synthetic multi-label generator with planted operator sensitivities.
//!
//! Each label is signaled by a visual pattern in its own canvas cell and owns
//! one *nuisance operator* drawn from the augmentation vocabulary. A minority
//! of training instances carrying the label have the whole canvas transformed
//! by that operator; every validation instance carrying it does. This plants
//! both halves of the ground truth at once:
//!
//! - *Reward*: a critic trained on the mixture is confident on canonical
//!   canvases and thin on transformed ones. Applying the label's operator to a
//!   transformed instance either snaps it back near the canonical manifold
//!   (large loss drop) or pushes it further out (loss already near its
//!   ceiling), so the expected loss gain is positive; on instances without the
//!   label the same operator only buys the transform cost plus a false hint
//!   that the label is present, so it scores negative. Polarity- and
//!   value-destroying operators are strongly negative throughout.
//! - *Generalization*: the validation split is exactly the operator-shifted
//!   domain, so training with the matching operator covers it while a
//!   classifier trained without it sees that region only thinly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_operator_with_param, OperatorId};
use crate::data::{Dataset, Image, Instance, LabelVector, SplitTag, CHANNELS};
use crate::error::{Error, Result};
use crate::seeds;

/// Planted effect of one operator on one label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpVerdict {
    Beneficial,
    Harmful,
    Neutral,
}

/// The label's nuisance operator and its parameter bands (operator-natural
/// units: degrees for Rotate, shear factor, fraction of image size for
/// translate). Signs are drawn at random.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuisanceOp {
    pub op: OperatorId,
    /// Fraction of training instances with this label that get the transform.
    pub train_frac: f64,
    /// Training magnitude band `|param| ~ U(lo, hi)`.
    pub train_band: (f64, f64),
    /// Validation magnitude band; applied to every instance with the label.
    pub valid_band: (f64, f64),
}

/// Visual pattern vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Bright/dark sinusoidal bands varying along y.
    HorizontalStripes,
    /// Filled bright disc.
    Disc,
    /// Dark square ramp.
    DarkRamp,
    /// Dark fine vertical bars.
    DarkBarsVertical,
    /// Saturated red blob.
    ChromaBlob,
    /// Dark annular arc.
    Arc,
}

/// Per-label generation and sensitivity plan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelPlan {
    pub name: String,
    pub pattern: PatternKind,
    /// Cell index in the 2x3 canvas grid.
    pub cell: usize,
    /// i.i.d. positive rate.
    pub rate: f64,
    /// Base contrast of the pattern.
    pub amplitude: f64,
    pub nuisance: NuisanceOp,
    pub beneficial: Vec<OperatorId>,
    pub harmful: Vec<OperatorId>,
}

/// Ground truth for the planted dataset. Serializable as JSON; round-trips.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub labels: Vec<LabelPlan>,
    /// Global i.i.d. pixel speckle amplitude.
    pub speckle: f64,
    /// Background gray level.
    pub background: f64,
    /// Pattern-center jitter in pixels at 32px scale.
    pub position_jitter: f64,
    /// Number of faint pattern-fragment distractors in the border frame.
    /// Label-independent clutter that geometric fills wipe away.
    pub border_clutter: usize,
    /// Peak amplitude of the border clutter fragments.
    pub clutter_amp: f64,
}

impl SensitivitySpec {
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name.clone()).collect()
    }

    pub fn verdict(&self, label: usize, op: OperatorId) -> OpVerdict {
        let plan = &self.labels[label];
        if plan.beneficial.contains(&op) {
            OpVerdict::Beneficial
        } else if plan.harmful.contains(&op) {
            OpVerdict::Harmful
        } else {
            OpVerdict::Neutral
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() < 2 {
            return Err(Error::invalid("sensitivity spec needs at least 2 labels"));
        }
        for (i, plan) in self.labels.iter().enumerate() {
            if plan.beneficial.is_empty() || plan.harmful.is_empty() {
                return Err(Error::invalid(format!(
                    "label {i} (`{}`) needs at least one beneficial and one harmful operator",
                    plan.name
                )));
            }
            if !(0.0..1.0).contains(&plan.rate) || plan.rate <= 0.0 {
                return Err(Error::invalid(format!("label {i} rate {} outside (0,1)", plan.rate)));
            }
            if plan.cell >= 6 {
                return Err(Error::invalid(format!("label {i} cell {} outside 2x3 grid", plan.cell)));
            }
            let n = &plan.nuisance;
            if !(n.train_frac > 0.0 && n.train_frac < 1.0)
                || n.train_band.0 >= n.train_band.1
                || n.valid_band.0 >= n.valid_band.1
            {
                return Err(Error::invalid(format!("label {i} nuisance bands are inconsistent")));
            }
        }
        if !self.labels.iter().any(|p| p.rate > 0.05) {
            return Err(Error::invalid("at least one label must have positive rate > 5%"));
        }
        Ok(())
    }

    /// The default planted spec: six labels, four distinct beneficial
    /// operators, opposing sensitivities (Rotate bridges the stripe and arc
    /// labels' domain gap but is harmful for the bars label; Invert, Solarize
    /// and Equalize destroy specific patterns).
    pub fn default_planted() -> SensitivitySpec {
        use OperatorId::*;
        let labels = vec![
            LabelPlan {
                name: "stripes_h".into(),
                pattern: PatternKind::HorizontalStripes,
                cell: 4,
                rate: 0.3,
                amplitude: 0.34,
                nuisance: NuisanceOp {
                    op: Rotate,
                    train_frac: 0.4,
                    train_band: (6.0, 26.0),
                    valid_band: (12.0, 22.0),
                },
                beneficial: vec![Rotate],
                harmful: vec![Equalize],
            },
            LabelPlan {
                name: "disc".into(),
                pattern: PatternKind::Disc,
                cell: 0,
                rate: 0.3,
                amplitude: 0.30,
                nuisance: NuisanceOp {
                    op: ShearX,
                    train_frac: 0.3,
                    train_band: (0.08, 0.30),
                    valid_band: (0.15, 0.28),
                },
                beneficial: vec![ShearX],
                harmful: vec![Invert],
            },
            LabelPlan {
                name: "dark_ramp".into(),
                pattern: PatternKind::DarkRamp,
                cell: 2,
                rate: 0.3,
                amplitude: 0.28,
                nuisance: NuisanceOp {
                    op: ShearX,
                    train_frac: 0.3,
                    train_band: (0.08, 0.30),
                    valid_band: (0.15, 0.28),
                },
                beneficial: vec![ShearX],
                harmful: vec![Invert],
            },
            LabelPlan {
                name: "dark_bars".into(),
                pattern: PatternKind::DarkBarsVertical,
                cell: 3,
                rate: 0.3,
                amplitude: 0.34,
                nuisance: NuisanceOp {
                    op: TranslateY,
                    train_frac: 0.3,
                    train_band: (0.06, 0.32),
                    valid_band: (0.15, 0.30),
                },
                beneficial: vec![TranslateY],
                harmful: vec![Rotate],
            },
            LabelPlan {
                name: "chroma".into(),
                pattern: PatternKind::ChromaBlob,
                cell: 5,
                rate: 0.3,
                amplitude: 0.26,
                nuisance: NuisanceOp {
                    op: ShearY,
                    train_frac: 0.3,
                    train_band: (0.08, 0.30),
                    valid_band: (0.15, 0.28),
                },
                beneficial: vec![ShearY],
                harmful: vec![Solarize],
            },
            LabelPlan {
                name: "arc".into(),
                pattern: PatternKind::Arc,
                cell: 1,
                rate: 0.3,
                amplitude: 0.30,
                nuisance: NuisanceOp {
                    op: Rotate,
                    train_frac: 0.3,
                    train_band: (8.0, 30.0),
                    valid_band: (16.0, 28.0),
                },
                beneficial: vec![Rotate],
                harmful: vec![Invert],
            },
        ];
        SensitivitySpec {
            labels,
            speckle: 0.10,
            background: 0.5,
            position_jitter: 2.0,
            border_clutter: 12,
            clutter_amp: 0.14,
        }
    }

    /// Two-label demo spec (stripes / disc) for small tests.
    pub fn two_label_demo() -> SensitivitySpec {
        use OperatorId::*;
        let labels = vec![
            LabelPlan {
                name: "stripes".into(),
                pattern: PatternKind::HorizontalStripes,
                cell: 4,
                rate: 0.4,
                amplitude: 0.30,
                nuisance: NuisanceOp {
                    op: Rotate,
                    train_frac: 0.3,
                    train_band: (8.0, 30.0),
                    valid_band: (15.0, 26.0),
                },
                beneficial: vec![Rotate],
                harmful: vec![Equalize],
            },
            LabelPlan {
                name: "blob".into(),
                pattern: PatternKind::Disc,
                cell: 0,
                rate: 0.4,
                amplitude: 0.30,
                nuisance: NuisanceOp {
                    op: ShearX,
                    train_frac: 0.3,
                    train_band: (0.08, 0.30),
                    valid_band: (0.15, 0.28),
                },
                beneficial: vec![ShearX],
                harmful: vec![Invert],
            },
        ];
        SensitivitySpec {
            labels,
            speckle: 0.10,
            background: 0.5,
            position_jitter: 2.0,
            border_clutter: 12,
            clutter_amp: 0.14,
        }
    }
}

/// Generates (train, valid) datasets. Deterministic given `(spec, seed)`.
pub fn generate_synthetic(
    spec: &SensitivitySpec,
    n_train: usize,
    n_valid: usize,
    image_size: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    if n_train < 10 || n_valid < 10 {
        return Err(Error::invalid("n_train and n_valid must be at least 10"));
    }
    if image_size < 24 {
        return Err(Error::invalid(format!(
            "image size {image_size} too small for the 2x3 pattern grid (minimum 24)"
        )));
    }
    let train = generate_split(spec, n_train, image_size, seed, SplitTag::Train)?;
    let valid = generate_split(spec, n_valid, image_size, seed, SplitTag::Valid)?;
    Ok((train, valid))
}

fn generate_split(
    spec: &SensitivitySpec,
    n: usize,
    size: usize,
    seed: u64,
    split: SplitTag,
) -> Result<Dataset> {
    let split_code = match split {
        SplitTag::Train => 1u64,
        SplitTag::Valid => 2,
        SplitTag::Test => 3,
    };
    let prefix = match split {
        SplitTag::Train => "train",
        SplitTag::Valid => "valid",
        SplitTag::Test => "test",
    };
    let mut instances = Vec::with_capacity(n);
    for idx in 0..n {
        let mut rng = seeds::stream(seed, &[0x5e17, split_code, idx as u64]);
        let (image, labels) = render_instance(spec, size, split, &mut rng)?;
        instances.push(Instance { id: format!("{prefix}_{idx:05}"), image, labels });
    }
    Dataset::new(instances, spec.label_names(), split)
}

fn render_instance(
    spec: &SensitivitySpec,
    size: usize,
    split: SplitTag,
    rng: &mut ChaCha8Rng,
) -> Result<(Image, LabelVector)> {
    let scale = size as f64 / 32.0;
    let bits: Vec<u8> = spec.labels.iter().map(|p| (rng.gen::<f64>() < p.rate) as u8).collect();

    let mut img = ImageCanvas { px: vec![spec.background; size * size * CHANNELS], size };

    // Achromatic global speckle.
    for i in 0..size * size {
        let delta = rng.gen_range(-spec.speckle..spec.speckle);
        for c in 0..CHANNELS {
            img.px[i * CHANNELS + c] += delta;
        }
    }

    // Border clutter: faint pattern fragments in the outer frame, present on
    // every instance. Resampling fills wipe them; that is the planted gain.
    let frame = (5.0 * scale).round() as usize;
    for _ in 0..spec.border_clutter {
        let amp = rng.gen_range(0.4..1.0) * spec.clutter_amp * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let (fy, fx) = frame_position(size, frame, rng);
        let shape: u8 = rng.gen_range(0..3);
        let r = rng.gen_range(1.2..2.2) * scale;
        match shape {
            0 => img.disc_slant_x(fx, fy, r, 0.0, [amp, amp, amp]),
            1 => img.stripes(fx, fy, r, 2.6 * scale, 0.0, rng.gen_range(0.0..std::f64::consts::TAU), amp),
            _ => img.disc_slant_x(fx, fy, r, 0.0, [amp, -0.3 * amp, -0.3 * amp]),
        }
    }

    // Patterns. Per-label draw counts stay fixed whether or not the label is
    // active, so co-occurring labels do not shift each other's parameters.
    for (label, plan) in spec.labels.iter().enumerate() {
        let jx: f64 = rng.gen_range(-1.0..1.0);
        let jy: f64 = rng.gen_range(-1.0..1.0);
        let contrast: f64 = rng.gen_range(0.85..1.15);
        let texture: f64 = rng.gen_range(-1.0..1.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        if bits[label] == 0 {
            continue;
        }
        let (row, col) = (plan.cell / 3, plan.cell % 3);
        let jitter = spec.position_jitter * scale;
        let cx = (col as f64 + 0.5) * size as f64 / 3.0 + jx * jitter;
        let cy = (row as f64 + 0.5) * size as f64 / 2.0 + jy * jitter;
        let amp = plan.amplitude * contrast;
        match plan.pattern {
            PatternKind::HorizontalStripes => {
                // Small in-domain orientation texture, distinct from the nuisance.
                let theta = (6.0 * texture).to_radians();
                img.stripes(cx, cy, 4.6 * scale, 5.0 * scale, theta, phase, amp)
            }
            PatternKind::Disc => {
                img.disc_slant_x(cx, cy, 3.8 * scale, 0.05 * texture, [amp, amp, amp])
            }
            PatternKind::DarkRamp => img.dark_ramp(cx, cy, 4.3 * scale, 0.05 * texture, amp),
            PatternKind::DarkBarsVertical => {
                img.dark_bars(cx, cy + 1.5 * texture * scale, 4.6 * scale, 2.5 * scale, phase, amp)
            }
            PatternKind::ChromaBlob => {
                img.disc_slant_y(cx, cy, 3.8 * scale, 0.05 * texture, [amp, -0.38 * amp, -0.38 * amp])
            }
            PatternKind::Arc => {
                img.arc(cx, cy, 2.8 * scale, 4.8 * scale, 90.0 + 8.0 * texture, 130.0, -amp)
            }
        }
    }

    for p in &mut img.px {
        *p = p.clamp(0.0, 1.0);
    }
    let mut image = Image::new(size, size, img.px)?;

    // Canvas-level nuisance operators; the domain gap lives here. Training
    // applies each active label's operator to a minority of instances,
    // validation always. Draw counts are fixed per label.
    for (label, plan) in spec.labels.iter().enumerate() {
        let u_apply: f64 = rng.gen();
        let u_mag: f64 = rng.gen();
        let negative: bool = rng.gen();
        if bits[label] == 0 {
            continue;
        }
        let n = &plan.nuisance;
        let band = match split {
            SplitTag::Train => {
                if u_apply >= n.train_frac {
                    continue;
                }
                n.train_band
            }
            _ => n.valid_band,
        };
        let mut param = band.0 + u_mag * (band.1 - band.0);
        if negative && n.op.magnitude_spec().signed {
            param = -param;
        }
        image = apply_operator_with_param(n.op, &image, param, None, rng)?;
    }

    Ok((image, LabelVector::new(bits)?))
}

/// Uniform position within the border frame of the given width.
fn frame_position(size: usize, frame: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Pick a side band, then a point in it; corners belong to two bands but
    // a mild density bump there is harmless.
    let side: u8 = rng.gen_range(0..4);
    let along: f64 = rng.gen_range(0.0..size as f64);
    let depth: f64 = rng.gen_range(0.0..frame as f64);
    match side {
        0 => (depth, along),                      // top
        1 => (size as f64 - 1.0 - depth, along),  // bottom
        2 => (along, depth),                      // left
        _ => (along, size as f64 - 1.0 - depth),  // right
    }
}

struct ImageCanvas {
    px: Vec<f64>,
    size: usize,
}

impl ImageCanvas {
    fn add(&mut self, y: usize, x: usize, deltas: [f64; 3]) {
        let base = (y * self.size + x) * CHANNELS;
        for (c, d) in deltas.iter().enumerate() {
            self.px[base + c] += d;
        }
    }

    fn for_each_pixel(&mut self, f: impl Fn(f64, f64) -> Option<[f64; 3]>) {
        for y in 0..self.size {
            for x in 0..self.size {
                if let Some(d) = f(x as f64, y as f64) {
                    self.add(y, x, d);
                }
            }
        }
    }

    /// Sinusoidal stripe patch inside a soft disc mask; `theta` tilts the
    /// stripe normal away from the y axis.
    fn stripes(&mut self, cx: f64, cy: f64, radius: f64, period: f64, theta: f64, phase: f64, amp: f64) {
        let (sin, cos) = theta.sin_cos();
        self.for_each_pixel(|x, y| {
            let dx = x - cx;
            let dy = y - cy;
            let mask = (radius + 0.5 - (dx * dx + dy * dy).sqrt()).clamp(0.0, 1.0);
            if mask <= 0.0 {
                return None;
            }
            let u = dy * cos - dx * sin;
            let v = amp * (std::f64::consts::TAU * u / period + phase).sin() * mask;
            Some([v, v, v])
        });
    }

    /// Dark half-wave bars varying along x.
    fn dark_bars(&mut self, cx: f64, cy: f64, radius: f64, period: f64, phase: f64, amp: f64) {
        self.for_each_pixel(|x, y| {
            let dx = x - cx;
            let dy = y - cy;
            let mask = (radius + 0.5 - (dx * dx + dy * dy).sqrt()).clamp(0.0, 1.0);
            if mask <= 0.0 {
                return None;
            }
            let s = (std::f64::consts::TAU * dx / period + phase).sin().max(0.0);
            let v = -amp * s * mask;
            Some([v, v, v])
        });
    }

    fn disc_slant_x(&mut self, cx: f64, cy: f64, radius: f64, slant: f64, amps: [f64; 3]) {
        self.for_each_pixel(|x, y| {
            let dy = y - cy;
            let dx = (x - cx) - slant * dy;
            let mask = (radius + 0.5 - (dx * dx + dy * dy).sqrt()).clamp(0.0, 1.0);
            if mask <= 0.0 {
                None
            } else {
                Some([amps[0] * mask, amps[1] * mask, amps[2] * mask])
            }
        });
    }

    fn disc_slant_y(&mut self, cx: f64, cy: f64, radius: f64, slant: f64, amps: [f64; 3]) {
        self.for_each_pixel(|x, y| {
            let dx = x - cx;
            let dy = (y - cy) - slant * dx;
            let mask = (radius + 0.5 - (dx * dx + dy * dy).sqrt()).clamp(0.0, 1.0);
            if mask <= 0.0 {
                None
            } else {
                Some([amps[0] * mask, amps[1] * mask, amps[2] * mask])
            }
        });
    }

    /// Dark square patch whose depth ramps along the (slightly sheared) x axis.
    fn dark_ramp(&mut self, cx: f64, cy: f64, half: f64, slant: f64, amp: f64) {
        self.for_each_pixel(|x, y| {
            let dy = y - cy;
            let dx = (x - cx) - slant * dy;
            let mask =
                ((half + 0.5 - dx.abs()).clamp(0.0, 1.0)) * ((half + 0.5 - dy.abs()).clamp(0.0, 1.0));
            if mask <= 0.0 {
                return None;
            }
            let t = ((dx + half) / (2.0 * half)).clamp(0.0, 1.0);
            let v = -amp * (0.35 + 0.65 * t) * mask;
            Some([v, v, v])
        });
    }

    /// Dark annular arc centered at angle `phi_deg`.
    #[allow(clippy::too_many_arguments)]
    fn arc(&mut self, cx: f64, cy: f64, r0: f64, r1: f64, phi_deg: f64, span_deg: f64, amp: f64) {
        self.for_each_pixel(|x, y| {
            let dx = x - cx;
            let dy = y - cy;
            let rho = (dx * dx + dy * dy).sqrt();
            let radial = ((rho - r0 + 0.5).clamp(0.0, 1.0)) * ((r1 + 0.5 - rho).clamp(0.0, 1.0));
            if radial <= 0.0 {
                return None;
            }
            let alpha = dy.atan2(dx).to_degrees();
            let mut dphi = (alpha - phi_deg) % 360.0;
            if dphi > 180.0 {
                dphi -= 360.0;
            }
            if dphi < -180.0 {
                dphi += 360.0;
            }
            let d_px = rho.max(1.0) * dphi.abs().to_radians();
            let arm_px = rho.max(1.0) * (span_deg / 2.0).to_radians();
            let angular = (arm_px + 0.5 - d_px).clamp(0.0, 1.0);
            if angular <= 0.0 {
                return None;
            }
            let v = amp * radial * angular;
            Some([v, v, v])
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::positive_rates;

    #[test]
    fn two_label_generator_contract() {
        let spec = SensitivitySpec::two_label_demo();
        let (train, valid) = generate_synthetic(&spec, 100, 20, 32, 7).unwrap();
        assert_eq!(train.len(), 100);
        assert_eq!(valid.len(), 20);
        assert!(train
            .instances
            .iter()
            .all(|i| i.image.pixels().iter().all(|p| (0.0..=1.0).contains(p))));
        let rates = positive_rates(&train).unwrap();
        assert!(rates.iter().all(|r| *r > 0.0), "both labels present: {rates:?}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SensitivitySpec::two_label_demo();
        let (a_train, a_valid) = generate_synthetic(&spec, 40, 12, 32, 7).unwrap();
        let (b_train, b_valid) = generate_synthetic(&spec, 40, 12, 32, 7).unwrap();
        for (a, b) in a_train.instances.iter().zip(&b_train.instances) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.labels, b.labels);
            assert_eq!(a.image, b.image);
        }
        for (a, b) in a_valid.instances.iter().zip(&b_valid.instances) {
            assert_eq!(a.image, b.image);
        }
        let (c_train, _) = generate_synthetic(&spec, 40, 12, 32, 8).unwrap();
        assert!(a_train.instances.iter().zip(&c_train.instances).any(|(a, c)| a.image != c.image));
    }

    #[test]
    fn measured_rates_near_targets() {
        let spec = SensitivitySpec::default_planted();
        let (train, _) = generate_synthetic(&spec, 2000, 10, 32, 3).unwrap();
        let rates = positive_rates(&train).unwrap();
        for (l, r) in rates.iter().enumerate() {
            assert!((r - 0.3).abs() <= 0.05, "label {l} rate {r}");
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = SensitivitySpec::default_planted();
        let json = serde_json::to_string(&spec).unwrap();
        let back: SensitivitySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SensitivitySpec::two_label_demo();
        spec.labels[0].beneficial.clear();
        assert!(generate_synthetic(&spec, 20, 20, 32, 1).is_err());

        let spec = SensitivitySpec::two_label_demo();
        assert!(generate_synthetic(&spec, 5, 20, 32, 1).is_err());
        assert!(generate_synthetic(&spec, 20, 20, 16, 1).is_err());

        let mut bad = SensitivitySpec::two_label_demo();
        bad.labels[0].nuisance.train_frac = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn verdict_table_reflects_plans() {
        let spec = SensitivitySpec::default_planted();
        assert_eq!(spec.verdict(0, OperatorId::Rotate), OpVerdict::Beneficial);
        assert_eq!(spec.verdict(3, OperatorId::Rotate), OpVerdict::Harmful);
        assert_eq!(spec.verdict(3, OperatorId::TranslateY), OpVerdict::Beneficial);
        assert_eq!(spec.verdict(0, OperatorId::Cutout), OpVerdict::Neutral);
    }
}
