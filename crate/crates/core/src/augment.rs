//! The 16-operator augmentation search space.
//!
//! Calling probability is discretized to 11 levels (`p = p_level/10`) and
//! magnitude to 10 uniform levels per operator range. Geometric operators use
//! inverse-map bilinear sampling with 0.5-gray fill; Equalize, Posterize and
//! Solarize work on 8-bit quantized values and renormalize. Magnitude level 0
//! is always identity-equivalent and short-circuits to an exact pixel copy.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Image, CHANNELS};
use crate::error::{Error, Result};

/// The operator vocabulary, with stable integer codes 0..15.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorId {
    ShearX = 0,
    ShearY = 1,
    TranslateX = 2,
    TranslateY = 3,
    Rotate = 4,
    AutoContrast = 5,
    Invert = 6,
    Equalize = 7,
    Solarize = 8,
    Posterize = 9,
    Contrast = 10,
    Color = 11,
    Brightness = 12,
    Sharpness = 13,
    Cutout = 14,
    SamplePairing = 15,
}

pub const NUM_OPERATORS: usize = 16;
pub const NUM_P_LEVELS: usize = 11;
pub const NUM_M_LEVELS: usize = 10;

pub const ALL_OPERATORS: [OperatorId; NUM_OPERATORS] = [
    OperatorId::ShearX,
    OperatorId::ShearY,
    OperatorId::TranslateX,
    OperatorId::TranslateY,
    OperatorId::Rotate,
    OperatorId::AutoContrast,
    OperatorId::Invert,
    OperatorId::Equalize,
    OperatorId::Solarize,
    OperatorId::Posterize,
    OperatorId::Contrast,
    OperatorId::Color,
    OperatorId::Brightness,
    OperatorId::Sharpness,
    OperatorId::Cutout,
    OperatorId::SamplePairing,
];

impl OperatorId {
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<OperatorId> {
        ALL_OPERATORS
            .get(code)
            .copied()
            .ok_or_else(|| Error::invalid(format!("operator code {code} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorId::ShearX => "ShearX",
            OperatorId::ShearY => "ShearY",
            OperatorId::TranslateX => "TranslateX",
            OperatorId::TranslateY => "TranslateY",
            OperatorId::Rotate => "Rotate",
            OperatorId::AutoContrast => "AutoContrast",
            OperatorId::Invert => "Invert",
            OperatorId::Equalize => "Equalize",
            OperatorId::Solarize => "Solarize",
            OperatorId::Posterize => "Posterize",
            OperatorId::Contrast => "Contrast",
            OperatorId::Color => "Color",
            OperatorId::Brightness => "Brightness",
            OperatorId::Sharpness => "Sharpness",
            OperatorId::Cutout => "Cutout",
            OperatorId::SamplePairing => "SamplePairing",
        }
    }

    pub fn from_name(name: &str) -> Result<OperatorId> {
        ALL_OPERATORS
            .iter()
            .copied()
            .find(|op| op.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::invalid(format!("unknown operator `{name}`")))
    }

    pub fn magnitude_spec(self) -> MagnitudeSpec {
        use OperatorId::*;
        match self {
            ShearX | ShearY => MagnitudeSpec { kind: ParamKind::ShearFactor, max_extent: 0.3, signed: true },
            TranslateX | TranslateY => {
                MagnitudeSpec { kind: ParamKind::SizeFraction, max_extent: 0.45, signed: true }
            }
            Rotate => MagnitudeSpec { kind: ParamKind::AngleDegrees, max_extent: 30.0, signed: true },
            AutoContrast | Invert | Equalize => {
                MagnitudeSpec { kind: ParamKind::None, max_extent: 0.0, signed: false }
            }
            Solarize => MagnitudeSpec { kind: ParamKind::Threshold, max_extent: 1.0, signed: false },
            Posterize => MagnitudeSpec { kind: ParamKind::BitDepth, max_extent: 4.0, signed: false },
            Contrast | Color | Brightness | Sharpness => {
                MagnitudeSpec { kind: ParamKind::EnhancementFactor, max_extent: 0.9, signed: true }
            }
            Cutout => MagnitudeSpec { kind: ParamKind::SizeFraction, max_extent: 0.2, signed: false },
            SamplePairing => MagnitudeSpec { kind: ParamKind::MixWeight, max_extent: 0.4, signed: false },
        }
    }
}

/// What an operator's magnitude parameter means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    AngleDegrees,
    ShearFactor,
    SizeFraction,
    Threshold,
    BitDepth,
    EnhancementFactor,
    MixWeight,
    None,
}

/// Magnitude range description for one operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeSpec {
    pub kind: ParamKind,
    pub max_extent: f64,
    pub signed: bool,
}

/// One concrete augmentation action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyTriple {
    pub op: OperatorId,
    pub p_level: u8,
    pub m_level: u8,
}

impl PolicyTriple {
    pub fn new(op: OperatorId, p_level: u8, m_level: u8) -> Result<PolicyTriple> {
        if p_level as usize >= NUM_P_LEVELS {
            return Err(Error::invalid(format!("p_level {p_level} outside [0,10]")));
        }
        if m_level as usize >= NUM_M_LEVELS {
            return Err(Error::invalid(format!("m_level {m_level} outside [0,9]")));
        }
        Ok(PolicyTriple { op, p_level, m_level })
    }

    pub fn calling_probability(&self) -> f64 {
        self.p_level as f64 / 10.0
    }
}

impl fmt::Display for PolicyTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.op.name(), self.p_level, self.m_level)
    }
}

impl FromStr for PolicyTriple {
    type Err = Error;

    fn from_str(s: &str) -> Result<PolicyTriple> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("policy triple `{s}` is not op:p:m")));
        }
        let op = OperatorId::from_name(parts[0])?;
        let p: u8 = parts[1].parse().map_err(|_| Error::invalid(format!("bad p_level in `{s}`")))?;
        let m: u8 = parts[2].parse().map_err(|_| Error::invalid(format!("bad m_level in `{s}`")))?;
        PolicyTriple::new(op, p, m)
    }
}

/// Magnitude level to concrete parameter.
///
/// Level 0 always maps to the identity-equivalent parameter. For signed
/// operators a sign for the deviation is drawn from `rng` (also at level 0, so
/// stream consumption does not depend on the level).
pub fn level_to_param(op: OperatorId, m_level: u8, rng: &mut ChaCha8Rng) -> Result<f64> {
    if m_level as usize >= NUM_M_LEVELS {
        return Err(Error::invalid(format!("m_level {m_level} outside [0,9]")));
    }
    let spec = op.magnitude_spec();
    let frac = m_level as f64 / 9.0;
    let sign = if spec.signed {
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    } else {
        1.0
    };
    Ok(match spec.kind {
        ParamKind::AngleDegrees | ParamKind::ShearFactor | ParamKind::SizeFraction
        | ParamKind::MixWeight => sign * frac * spec.max_extent,
        ParamKind::Threshold => 1.0 - frac * spec.max_extent,
        ParamKind::BitDepth => 8.0 - (frac * spec.max_extent).round(),
        ParamKind::EnhancementFactor => 1.0 + sign * frac * spec.max_extent,
        ParamKind::None => 0.0,
    })
}

/// Applies one operator at the given magnitude level.
///
/// `partner` is required exactly for `SamplePairing`. All outputs are clamped
/// to `[0,1]` and keep the input dimensions.
pub fn apply_operator(
    op: OperatorId,
    image: &Image,
    m_level: u8,
    partner: Option<&Image>,
    rng: &mut ChaCha8Rng,
) -> Result<Image> {
    let param = level_to_param(op, m_level, rng)?;
    apply_operator_with_param(op, image, param, partner, rng)
}

/// Applies one operator at an explicit (signed) parameter value in the
/// operator's natural units: degrees for Rotate, shear factor, size fraction
/// for translate/cutout, threshold, bits kept, enhancement factor, mix weight.
pub fn apply_operator_with_param(
    op: OperatorId,
    image: &Image,
    param: f64,
    partner: Option<&Image>,
    rng: &mut ChaCha8Rng,
) -> Result<Image> {
    if op == OperatorId::SamplePairing && partner.is_none() {
        return Err(Error::invalid("SamplePairing needs a partner image"));
    }
    let mut out = match op {
        OperatorId::ShearX => {
            if param == 0.0 {
                image.clone()
            } else {
                warp(image, |x, y, cx, cy| (x - param * (y - cy), y, cx, cy))
            }
        }
        OperatorId::ShearY => {
            if param == 0.0 {
                image.clone()
            } else {
                warp(image, |x, y, cx, cy| (x, y - param * (x - cx), cx, cy))
            }
        }
        OperatorId::TranslateX => {
            let shift = param * image.width() as f64;
            if shift == 0.0 {
                image.clone()
            } else {
                warp(image, move |x, y, cx, cy| (x - shift, y, cx, cy))
            }
        }
        OperatorId::TranslateY => {
            let shift = param * image.height() as f64;
            if shift == 0.0 {
                image.clone()
            } else {
                warp(image, move |x, y, cx, cy| (x, y - shift, cx, cy))
            }
        }
        OperatorId::Rotate => {
            if param == 0.0 {
                image.clone()
            } else {
                let rad = param.to_radians();
                let (cos, sin) = (rad.cos(), rad.sin());
                warp(image, move |x, y, cx, cy| {
                    let dx = x - cx;
                    let dy = y - cy;
                    (cx + cos * dx + sin * dy, cy - sin * dx + cos * dy, cx, cy)
                })
            }
        }
        OperatorId::AutoContrast => autocontrast(image),
        OperatorId::Invert => {
            let mut img = image.clone();
            for p in img.pixels_mut() {
                *p = 1.0 - *p;
            }
            img
        }
        OperatorId::Equalize => equalize(image),
        OperatorId::Solarize => {
            if param >= 1.0 {
                image.clone()
            } else {
                let thr = (param * 255.0).round() as i32;
                quantized_map(image, |b| if (b as i32) > thr { 255 - b } else { b })
            }
        }
        OperatorId::Posterize => {
            let bits = param as i32;
            if bits >= 8 {
                image.clone()
            } else {
                let mask = (0xffu16 << (8 - bits)) as u8;
                quantized_map(image, |b| b & mask)
            }
        }
        OperatorId::Contrast => {
            if param == 1.0 {
                image.clone()
            } else {
                let mean = mean_luma(image);
                blend_toward(image, param, |_img, _i| mean)
            }
        }
        OperatorId::Color => {
            if param == 1.0 {
                image.clone()
            } else {
                blend_toward(image, param, |img, i| {
                    let base = (i / CHANNELS) * CHANNELS;
                    luma(img.pixels()[base], img.pixels()[base + 1], img.pixels()[base + 2])
                })
            }
        }
        OperatorId::Brightness => {
            if param == 1.0 {
                image.clone()
            } else {
                blend_toward(image, param, |_img, _i| 0.0)
            }
        }
        OperatorId::Sharpness => {
            if param == 1.0 {
                image.clone()
            } else {
                let smooth = smoothed(image);
                let mut img = image.clone();
                for (i, p) in img.pixels_mut().iter_mut().enumerate() {
                    *p = smooth[i] + param * (*p - smooth[i]);
                }
                img
            }
        }
        OperatorId::Cutout => {
            let side = (param * image.width() as f64).round() as i64;
            if side < 1 {
                image.clone()
            } else {
                let h = image.height() as i64;
                let w = image.width() as i64;
                let cy = rng.gen_range(0..h);
                let cx = rng.gen_range(0..w);
                let y0 = (cy - side / 2).max(0);
                let x0 = (cx - side / 2).max(0);
                let y1 = (y0 + side).min(h);
                let x1 = (x0 + side).min(w);
                let mut img = image.clone();
                for y in y0..y1 {
                    for x in x0..x1 {
                        for c in 0..CHANNELS {
                            img.set(y as usize, x as usize, c, 0.5);
                        }
                    }
                }
                img
            }
        }
        OperatorId::SamplePairing => {
            let partner = partner.unwrap();
            if partner.height() != image.height() || partner.width() != image.width() {
                return Err(Error::invalid("SamplePairing partner has different dimensions"));
            }
            if param == 0.0 {
                image.clone()
            } else {
                let mut img = image.clone();
                for (p, q) in img.pixels_mut().iter_mut().zip(partner.pixels()) {
                    *p = (1.0 - param) * *p + param * q;
                }
                img
            }
        }
    };
    out.clamp_in_place();
    Ok(out)
}

/// Applies a policy triple per the calling-probability semantics: with
/// probability `p_level/10` the operator output, otherwise the input unchanged.
pub fn apply_policy(
    triple: &PolicyTriple,
    image: &Image,
    labels_pool: &Dataset,
    rng: &mut ChaCha8Rng,
) -> Result<Image> {
    let u: f64 = rng.gen();
    if u >= triple.calling_probability() {
        return Ok(image.clone());
    }
    let partner_holder;
    let partner = if triple.op == OperatorId::SamplePairing {
        if labels_pool.is_empty() {
            return Err(Error::invalid("SamplePairing needs a non-empty partner pool"));
        }
        let idx = rng.gen_range(0..labels_pool.len());
        partner_holder = labels_pool.instances[idx].image.clone();
        Some(&partner_holder)
    } else {
        None
    };
    apply_operator(triple.op, image, triple.m_level, partner, rng)
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

fn mean_luma(img: &Image) -> f64 {
    let px = img.pixels();
    let n = px.len() / CHANNELS;
    let mut acc = 0.0;
    for i in 0..n {
        acc += luma(px[i * CHANNELS], px[i * CHANNELS + 1], px[i * CHANNELS + 2]);
    }
    acc / n as f64
}

/// out = degenerate + f * (pixel - degenerate), the classic enhancement blend.
fn blend_toward(img: &Image, factor: f64, degenerate: impl Fn(&Image, usize) -> f64) -> Image {
    let mut out = img.clone();
    for i in 0..img.pixels().len() {
        let d = degenerate(img, i);
        out.pixels_mut()[i] = d + factor * (img.pixels()[i] - d);
    }
    out
}

/// Inverse-map warp with bilinear sampling and 0.5 fill.
fn warp(img: &Image, src_of: impl Fn(f64, f64, f64, f64) -> (f64, f64, f64, f64)) -> Image {
    let h = img.height();
    let w = img.width();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let (sx, sy, _, _) = src_of(x as f64, y as f64, cx, cy);
            for c in 0..CHANNELS {
                out.set(y, x, c, sample_bilinear(img, sy, sx, c));
            }
        }
    }
    out
}

fn sample_bilinear(img: &Image, sy: f64, sx: f64, c: usize) -> f64 {
    let h = img.height() as i64;
    let w = img.width() as i64;
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let fetch = |yy: i64, xx: i64| -> f64 {
        if yy < 0 || yy >= h || xx < 0 || xx >= w {
            0.5
        } else {
            img.get(yy as usize, xx as usize, c)
        }
    };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let v00 = fetch(y0, x0);
    let v01 = fetch(y0, x0 + 1);
    let v10 = fetch(y0 + 1, x0);
    let v11 = fetch(y0 + 1, x0 + 1);
    let top = v00 + fx * (v01 - v00);
    let bottom = v10 + fx * (v11 - v10);
    top + fy * (bottom - top)
}

/// Per-channel min-max stretch to the full range; constant channels unchanged.
fn autocontrast(img: &Image) -> Image {
    let mut out = img.clone();
    for c in 0..CHANNELS {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in (c..img.pixels().len()).step_by(CHANNELS) {
            lo = lo.min(img.pixels()[i]);
            hi = hi.max(img.pixels()[i]);
        }
        if hi <= lo {
            continue;
        }
        let scale = 1.0 / (hi - lo);
        for i in (c..img.pixels().len()).step_by(CHANNELS) {
            out.pixels_mut()[i] = (img.pixels()[i] - lo) * scale;
        }
    }
    out
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Quantizes to 8 bits, applies a byte map per channel value, renormalizes.
fn quantized_map(img: &Image, f: impl Fn(u8) -> u8) -> Image {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = f(quantize(*p)) as f64 / 255.0;
    }
    out
}

/// Histogram equalization on 8-bit values via mid-rank remapping, iterated to a
/// fixed point so that applying the operator twice equals applying it once.
/// Channels with a single distinct value are left unchanged.
fn equalize(img: &Image) -> Image {
    let n_px = img.pixels().len() / CHANNELS;
    let mut out = img.clone();
    for c in 0..CHANNELS {
        let mut bytes: Vec<u8> =
            (0..n_px).map(|i| quantize(img.pixels()[i * CHANNELS + c])).collect();
        let initial = bytes.clone();
        for _ in 0..4 {
            let mut hist = [0u32; 256];
            for &b in &bytes {
                hist[b as usize] += 1;
            }
            if hist.iter().filter(|&&h| h > 0).count() <= 1 {
                break;
            }
            let mut lut = [0u8; 256];
            let mut cum = 0u32;
            for v in 0..256 {
                let h = hist[v];
                if h > 0 {
                    let midrank = cum as f64 + 0.5 * h as f64;
                    lut[v] = (255.0 * midrank / n_px as f64).round().clamp(0.0, 255.0) as u8;
                }
                cum += h;
            }
            let mut changed = false;
            for b in &mut bytes {
                let nb = lut[*b as usize];
                if nb != *b {
                    changed = true;
                    *b = nb;
                }
            }
            if !changed {
                break;
            }
        }
        // A channel the LUT leaves untouched keeps its original float values,
        // so constant channels pass through bit-identically.
        if bytes != initial {
            for (i, &b) in bytes.iter().enumerate() {
                out.pixels_mut()[i * CHANNELS + c] = b as f64 / 255.0;
            }
        }
    }
    out
}

/// 3x3 smoothing (PIL's SMOOTH kernel) on interior pixels; borders copied.
fn smoothed(img: &Image) -> Vec<f64> {
    let h = img.height();
    let w = img.width();
    let mut out = img.pixels().to_vec();
    const K: [f64; 9] = [1.0, 1.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0, 1.0];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        acc += K[dy * 3 + dx] * img.get(y + dy - 1, x + dx - 1, c);
                    }
                }
                out[(y * w + x) * CHANNELS + c] = acc / 13.0;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn rng(n: u64) -> ChaCha8Rng {
        seeds::stream(n, &[])
    }

    fn test_image() -> Image {
        // Deterministic, value-rich 12x12 image.
        let mut px = Vec::with_capacity(12 * 12 * 3);
        for y in 0..12 {
            for x in 0..12 {
                for c in 0..3 {
                    let v = ((y * 31 + x * 17 + c * 53) % 97) as f64 / 96.0;
                    px.push(v);
                }
            }
        }
        Image::new(12, 12, px).unwrap()
    }

    #[test]
    fn rotate_level_9_is_thirty_degrees() {
        let mut r = rng(0);
        let angles: Vec<f64> = (0..8).map(|_| level_to_param(OperatorId::Rotate, 9, &mut r).unwrap()).collect();
        assert!(angles.iter().all(|a| a.abs() == 30.0));
        assert!(angles.iter().any(|a| *a > 0.0) && angles.iter().any(|a| *a < 0.0));
    }

    #[test]
    fn level_zero_parameters_are_identity_values() {
        let mut r = rng(1);
        assert_eq!(level_to_param(OperatorId::Rotate, 0, &mut r).unwrap(), 0.0);
        assert_eq!(level_to_param(OperatorId::Posterize, 0, &mut r).unwrap(), 8.0);
        assert_eq!(level_to_param(OperatorId::Solarize, 0, &mut r).unwrap(), 1.0);
        assert_eq!(level_to_param(OperatorId::Brightness, 0, &mut r).unwrap(), 1.0);
        assert_eq!(level_to_param(OperatorId::SamplePairing, 0, &mut r).unwrap(), 0.0);
        assert!(level_to_param(OperatorId::Rotate, 10, &mut r).is_err());
    }

    #[test]
    fn magnitude_level_zero_is_pixel_identical_for_all_parameterized_ops() {
        let img = test_image();
        let partner = Image::filled(12, 12, 0.25).unwrap();
        for op in ALL_OPERATORS {
            if op.magnitude_spec().kind == ParamKind::None {
                continue;
            }
            let mut r = rng(2);
            let out = apply_operator(op, &img, 0, Some(&partner), &mut r).unwrap();
            assert_eq!(out, img, "{} at level 0 not identity", op.name());
        }
    }

    #[test]
    fn parameterless_ops_ignore_magnitude_level() {
        let img = test_image();
        for op in [OperatorId::AutoContrast, OperatorId::Invert, OperatorId::Equalize] {
            let a = apply_operator(op, &img, 0, None, &mut rng(3)).unwrap();
            let b = apply_operator(op, &img, 7, None, &mut rng(3)).unwrap();
            assert_eq!(a, b, "{} depends on magnitude", op.name());
        }
    }

    #[test]
    fn invert_example_and_involution() {
        let img = Image::filled(8, 8, 0.25).unwrap();
        let inv = apply_operator(OperatorId::Invert, &img, 5, None, &mut rng(4)).unwrap();
        assert_eq!(inv.pixels()[0], 0.75);
        let back = apply_operator(OperatorId::Invert, &inv, 5, None, &mut rng(4)).unwrap();
        // Float inversion is exact to rounding; 1e-15 is the roundoff budget.
        assert!(back.max_abs_diff(&img) <= 1e-15);

        let rich = test_image();
        let twice = apply_operator(
            OperatorId::Invert,
            &apply_operator(OperatorId::Invert, &rich, 5, None, &mut rng(4)).unwrap(),
            5,
            None,
            &mut rng(4),
        )
        .unwrap();
        assert!(twice.max_abs_diff(&rich) <= 1e-15);
    }

    #[test]
    fn equalize_constant_image_unchanged() {
        let img = Image::filled(8, 8, 0.37).unwrap();
        let out = apply_operator(OperatorId::Equalize, &img, 0, None, &mut rng(5)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn equalize_and_autocontrast_idempotent() {
        let img = test_image();
        for op in [OperatorId::Equalize, OperatorId::AutoContrast] {
            let once = apply_operator(op, &img, 0, None, &mut rng(6)).unwrap();
            let twice = apply_operator(op, &once, 0, None, &mut rng(6)).unwrap();
            assert_eq!(once, twice, "{} not idempotent", op.name());
        }
    }

    #[test]
    fn outputs_stay_in_range_and_keep_dimensions() {
        let img = test_image();
        let partner = test_image();
        for op in ALL_OPERATORS {
            for m in [1u8, 5, 9] {
                let mut r = rng(7 + m as u64);
                let out = apply_operator(op, &img, m, Some(&partner), &mut r).unwrap();
                assert_eq!(out.height(), img.height());
                assert_eq!(out.width(), img.width());
                assert!(
                    out.pixels().iter().all(|p| (0.0..=1.0).contains(p)),
                    "{} level {m} leaves range",
                    op.name()
                );
            }
        }
    }

    #[test]
    fn equal_rng_state_gives_bit_identical_output() {
        let img = test_image();
        let partner = test_image();
        for op in ALL_OPERATORS {
            let a = apply_operator(op, &img, 6, Some(&partner), &mut rng(11)).unwrap();
            let b = apply_operator(op, &img, 6, Some(&partner), &mut rng(11)).unwrap();
            assert_eq!(a, b, "{} not deterministic", op.name());
        }
    }

    #[test]
    fn sample_pairing_requires_partner_and_blends() {
        let img = Image::filled(8, 8, 1.0).unwrap();
        let partner = Image::filled(8, 8, 0.0).unwrap();
        assert!(apply_operator(OperatorId::SamplePairing, &img, 9, None, &mut rng(12)).is_err());
        let out = apply_operator(OperatorId::SamplePairing, &img, 9, Some(&partner), &mut rng(12)).unwrap();
        assert!((out.pixels()[0] - 0.6).abs() < 1e-12); // (1-0.4)*1 + 0.4*0
    }

    #[test]
    fn policy_p_zero_never_applies_and_p_ten_always_applies() {
        let img = test_image();
        let pool = Dataset::new(vec![], vec!["a".into()], crate::data::SplitTag::Train).unwrap();
        for op in [OperatorId::Invert, OperatorId::Rotate, OperatorId::Solarize] {
            for seed in 0..20 {
                let t0 = PolicyTriple::new(op, 0, 9).unwrap();
                let out = apply_policy(&t0, &img, &pool, &mut rng(100 + seed)).unwrap();
                assert_eq!(out, img);
            }
        }
        for seed in 0..20 {
            let t10 = PolicyTriple::new(OperatorId::Invert, 10, 9).unwrap();
            let out = apply_policy(&t10, &img, &pool, &mut rng(200 + seed)).unwrap();
            assert!(out.max_abs_diff(&img) > 0.1);
        }
    }

    #[test]
    fn policy_p_five_applies_about_half_the_time() {
        let img = Image::filled(8, 8, 0.25).unwrap();
        let pool = Dataset::new(vec![], vec!["a".into()], crate::data::SplitTag::Train).unwrap();
        let triple = PolicyTriple::new(OperatorId::Invert, 5, 9).unwrap();
        let n = 10_000;
        let mut applied = 0usize;
        for seed in 0..n {
            let out = apply_policy(&triple, &img, &pool, &mut rng(300 + seed)).unwrap();
            if out.max_abs_diff(&img) > 0.1 {
                applied += 1;
            }
        }
        let freq = applied as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "application frequency {freq}");
    }

    #[test]
    fn policy_string_round_trip() {
        let t = PolicyTriple::new(OperatorId::TranslateY, 7, 3).unwrap();
        assert_eq!(t.to_string(), "TranslateY:7:3");
        assert_eq!("TranslateY:7:3".parse::<PolicyTriple>().unwrap(), t);
        assert!("Nope:1:1".parse::<PolicyTriple>().is_err());
        assert!("Rotate:11:0".parse::<PolicyTriple>().is_err());
    }
}
