use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Architecture description of a single layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { input: usize, output: usize },
    Conv3x3 { in_ch: usize, out_ch: usize },
    AvgPool2x2,
    Relu,
    Dropout { rate: f64 },
    Sigmoid,
    SoftmaxRows,
}

/// A layer instance holding its parameter tensors.
#[derive(Clone, Debug)]
pub enum Layer {
    Dense { w: Tensor, b: Tensor },
    Conv3x3 { w: Tensor, b: Tensor },
    AvgPool2x2,
    Relu,
    Dropout { rate: f64 },
    Sigmoid,
    SoftmaxRows,
}

/// Per-layer state recorded during a training forward pass.
#[derive(Clone, Debug)]
pub enum LayerAux {
    /// Input tensor as seen by the layer (pre-flatten for dense).
    Input(Tensor),
    /// Layer output (sigmoid / softmax, whose gradients use the output).
    Output(Tensor),
    /// Dropout keep-mask already scaled by 1/(1-rate).
    Mask(Vec<f64>),
    None,
}

fn uniform_init(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl Layer {
    pub fn from_spec(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Layer> {
        match *spec {
            LayerSpec::Dense { input, output } => {
                if input == 0 || output == 0 {
                    return Err(Error::invalid("dense layer with zero width"));
                }
                let bound = (6.0 / (input + output) as f64).sqrt();
                let w = Tensor::from_vec(&[output, input], uniform_init(rng, output * input, bound))?;
                let b = Tensor::zeros(&[output]);
                Ok(Layer::Dense { w, b })
            }
            LayerSpec::Conv3x3 { in_ch, out_ch } => {
                if in_ch == 0 || out_ch == 0 {
                    return Err(Error::invalid("conv layer with zero channels"));
                }
                let fan_in = in_ch * 9;
                let fan_out = out_ch * 9;
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w =
                    Tensor::from_vec(&[out_ch, in_ch, 3, 3], uniform_init(rng, out_ch * in_ch * 9, bound))?;
                let b = Tensor::zeros(&[out_ch]);
                Ok(Layer::Conv3x3 { w, b })
            }
            LayerSpec::AvgPool2x2 => Ok(Layer::AvgPool2x2),
            LayerSpec::Relu => Ok(Layer::Relu),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::invalid(format!("dropout rate {rate} outside [0,1)")));
                }
                Ok(Layer::Dropout { rate })
            }
            LayerSpec::Sigmoid => Ok(Layer::Sigmoid),
            LayerSpec::SoftmaxRows => Ok(Layer::SoftmaxRows),
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense { w, .. } => LayerSpec::Dense { input: w.shape()[1], output: w.shape()[0] },
            Layer::Conv3x3 { w, .. } => LayerSpec::Conv3x3 { in_ch: w.shape()[1], out_ch: w.shape()[0] },
            Layer::AvgPool2x2 => LayerSpec::AvgPool2x2,
            Layer::Relu => LayerSpec::Relu,
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            Layer::Sigmoid => LayerSpec::Sigmoid,
            Layer::SoftmaxRows => LayerSpec::SoftmaxRows,
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense { w, b } | Layer::Conv3x3 { w, b } => vec![w, b],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense { w, b } | Layer::Conv3x3 { w, b } => vec![w, b],
            _ => vec![],
        }
    }

    /// Forward pass. `rng` is consumed only by dropout in training mode.
    pub fn forward(
        &self,
        input: &Tensor,
        train: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, LayerAux)> {
        match self {
            Layer::Dense { w, b } => {
                // Any input shape is accepted and read as a flat row-major vector.
                let (out_w, in_w) = (w.shape()[0], w.shape()[1]);
                if input.len() != in_w {
                    return Err(Error::ShapeMismatch { expected: vec![in_w], got: input.shape().to_vec() });
                }
                let x = input.data();
                let wd = w.data();
                let mut out = vec![0.0; out_w];
                for (o, out_v) in out.iter_mut().enumerate() {
                    let row = &wd[o * in_w..(o + 1) * in_w];
                    let mut acc = b.data()[o];
                    for (wv, xv) in row.iter().zip(x.iter()) {
                        acc += wv * xv;
                    }
                    *out_v = acc;
                }
                Ok((Tensor::from_vec(&[out_w], out)?, LayerAux::Input(input.clone())))
            }
            Layer::Conv3x3 { w, b } => {
                let (out_ch, in_ch) = (w.shape()[0], w.shape()[1]);
                let shape = input.shape();
                if shape.len() != 3 || shape[0] != in_ch {
                    return Err(Error::ShapeMismatch {
                        expected: vec![in_ch, 0, 0],
                        got: shape.to_vec(),
                    });
                }
                let (h, wi) = (shape[1], shape[2]);
                let out = conv3x3_forward(input.data(), in_ch, h, wi, w.data(), b.data(), out_ch);
                Ok((Tensor::from_vec(&[out_ch, h, wi], out)?, LayerAux::Input(input.clone())))
            }
            Layer::AvgPool2x2 => {
                let shape = input.shape();
                if shape.len() != 3 || shape[1] % 2 != 0 || shape[2] % 2 != 0 {
                    return Err(Error::invalid(format!(
                        "avgpool2x2 needs (C,H,W) with even H and W, got {shape:?}"
                    )));
                }
                let (c, h, wi) = (shape[0], shape[1], shape[2]);
                let (oh, ow) = (h / 2, wi / 2);
                let x = input.data();
                let mut out = vec![0.0; c * oh * ow];
                for ch in 0..c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            let base = ch * h * wi + 2 * y * wi + 2 * xx;
                            out[ch * oh * ow + y * ow + xx] =
                                0.25 * (x[base] + x[base + 1] + x[base + wi] + x[base + wi + 1]);
                        }
                    }
                }
                Ok((Tensor::from_vec(&[c, oh, ow], out)?, LayerAux::None))
            }
            Layer::Relu => {
                let mut out = input.clone();
                for v in out.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok((out, LayerAux::Input(input.clone())))
            }
            Layer::Dropout { rate } => {
                if !train {
                    return Ok((input.clone(), LayerAux::None));
                }
                let rng = rng.ok_or_else(|| Error::invalid("training forward through dropout needs an rng"))?;
                let keep = 1.0 - rate;
                let mask: Vec<f64> = (0..input.len())
                    .map(|_| if rng.gen::<f64>() < *rate { 0.0 } else { 1.0 / keep })
                    .collect();
                let mut out = input.clone();
                for (v, m) in out.data_mut().iter_mut().zip(mask.iter()) {
                    *v *= m;
                }
                Ok((out, LayerAux::Mask(mask)))
            }
            Layer::Sigmoid => {
                let mut out = input.clone();
                for v in out.data_mut() {
                    *v = sigmoid(*v);
                }
                Ok((out.clone(), LayerAux::Output(out)))
            }
            Layer::SoftmaxRows => {
                let (rows, cols) = rows_cols(input)?;
                let mut out = input.clone();
                for r in 0..rows {
                    let row = &mut out.data_mut()[r * cols..(r + 1) * cols];
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
                Ok((out.clone(), LayerAux::Output(out)))
            }
        }
    }

    /// Backward pass: returns (parameter gradients, input gradient).
    pub fn backward(&self, aux: &LayerAux, grad_out: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        match (self, aux) {
            (Layer::Dense { w, .. }, LayerAux::Input(input)) => {
                let (out_w, in_w) = (w.shape()[0], w.shape()[1]);
                let g = grad_out.data();
                let x = input.data();
                let wd = w.data();
                let mut dw = vec![0.0; out_w * in_w];
                let mut dx = vec![0.0; in_w];
                for o in 0..out_w {
                    let go = g[o];
                    let row = &wd[o * in_w..(o + 1) * in_w];
                    let drow = &mut dw[o * in_w..(o + 1) * in_w];
                    for i in 0..in_w {
                        drow[i] = go * x[i];
                        dx[i] += go * row[i];
                    }
                }
                let db = Tensor::from_vec(&[out_w], g.to_vec())?;
                Ok((
                    vec![Tensor::from_vec(&[out_w, in_w], dw)?, db],
                    Tensor::from_vec(input.shape(), dx)?,
                ))
            }
            (Layer::Conv3x3 { w, .. }, LayerAux::Input(input)) => {
                let (out_ch, in_ch) = (w.shape()[0], w.shape()[1]);
                let (h, wi) = (input.shape()[1], input.shape()[2]);
                let (dw, db, dx) =
                    conv3x3_backward(input.data(), in_ch, h, wi, w.data(), out_ch, grad_out.data());
                Ok((
                    vec![Tensor::from_vec(&[out_ch, in_ch, 3, 3], dw)?, Tensor::from_vec(&[out_ch], db)?],
                    Tensor::from_vec(input.shape(), dx)?,
                ))
            }
            (Layer::AvgPool2x2, _) => {
                let shape = grad_out.shape();
                let (c, oh, ow) = (shape[0], shape[1], shape[2]);
                let (h, wi) = (oh * 2, ow * 2);
                let g = grad_out.data();
                let mut dx = vec![0.0; c * h * wi];
                for ch in 0..c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            let gv = 0.25 * g[ch * oh * ow + y * ow + xx];
                            let base = ch * h * wi + 2 * y * wi + 2 * xx;
                            dx[base] = gv;
                            dx[base + 1] = gv;
                            dx[base + wi] = gv;
                            dx[base + wi + 1] = gv;
                        }
                    }
                }
                Ok((vec![], Tensor::from_vec(&[c, h, wi], dx)?))
            }
            (Layer::Relu, LayerAux::Input(input)) => {
                let mut dx = grad_out.clone();
                for (g, x) in dx.data_mut().iter_mut().zip(input.data()) {
                    if *x <= 0.0 {
                        *g = 0.0;
                    }
                }
                Ok((vec![], dx))
            }
            (Layer::Dropout { .. }, LayerAux::Mask(mask)) => {
                let mut dx = grad_out.clone();
                for (g, m) in dx.data_mut().iter_mut().zip(mask.iter()) {
                    *g *= m;
                }
                Ok((vec![], dx))
            }
            (Layer::Dropout { .. }, LayerAux::None) => Ok((vec![], grad_out.clone())),
            (Layer::Sigmoid, LayerAux::Output(out)) => {
                let mut dx = grad_out.clone();
                for (g, s) in dx.data_mut().iter_mut().zip(out.data()) {
                    *g *= s * (1.0 - s);
                }
                Ok((vec![], dx))
            }
            (Layer::SoftmaxRows, LayerAux::Output(out)) => {
                let (rows, cols) = rows_cols(out)?;
                let mut dx = grad_out.clone();
                for r in 0..rows {
                    let o = &out.data()[r * cols..(r + 1) * cols];
                    let g = &mut dx.data_mut()[r * cols..(r + 1) * cols];
                    let dot: f64 = g.iter().zip(o.iter()).map(|(gv, ov)| gv * ov).sum();
                    for (gv, ov) in g.iter_mut().zip(o.iter()) {
                        *gv = ov * (*gv - dot);
                    }
                }
                Ok((vec![], dx))
            }
            _ => Err(Error::invalid("backward called with mismatched activation cache")),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn rows_cols(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [n] => Ok((1, *n)),
        [r, c] => Ok((*r, *c)),
        other => Err(Error::invalid(format!("softmax_rows needs 1-D or 2-D input, got {other:?}"))),
    }
}

fn conv3x3_forward(
    x: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    out_ch: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * h * w];
    for o in 0..out_ch {
        let out_plane = &mut out[o * h * w..(o + 1) * h * w];
        out_plane.fill(bias[o]);
        for i in 0..in_ch {
            let x_plane = &x[i * h * w..(i + 1) * h * w];
            let k = &weights[(o * in_ch + i) * 9..(o * in_ch + i + 1) * 9];
            for dy in 0..3usize {
                for dx in 0..3usize {
                    let kv = k[dy * 3 + dx];
                    if kv == 0.0 {
                        continue;
                    }
                    // Output rows where the shifted input row is in bounds.
                    let y0 = 1usize.saturating_sub(dy);
                    let y1 = (h + 1 - dy).min(h);
                    let x0 = 1usize.saturating_sub(dx);
                    let x1 = (w + 1 - dx).min(w);
                    for y in y0..y1 {
                        let sy = y + dy - 1;
                        let src = &x_plane[sy * w + x0 + dx - 1..sy * w + x1 + dx - 1];
                        let dst = &mut out_plane[y * w + x0..y * w + x1];
                        for (d, s) in dst.iter_mut().zip(src.iter()) {
                            *d += kv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::type_complexity)]
fn conv3x3_backward(
    x: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    out_ch: usize,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dw = vec![0.0; out_ch * in_ch * 9];
    let mut db = vec![0.0; out_ch];
    let mut dx = vec![0.0; in_ch * h * w];
    for o in 0..out_ch {
        let g_plane = &grad_out[o * h * w..(o + 1) * h * w];
        db[o] = g_plane.iter().sum();
        for i in 0..in_ch {
            let x_plane = &x[i * h * w..(i + 1) * h * w];
            let k = &weights[(o * in_ch + i) * 9..(o * in_ch + i + 1) * 9];
            let dk = &mut dw[(o * in_ch + i) * 9..(o * in_ch + i + 1) * 9];
            let dx_plane = &mut dx[i * h * w..(i + 1) * h * w];
            for dy in 0..3usize {
                for dxo in 0..3usize {
                    let y0 = 1usize.saturating_sub(dy);
                    let y1 = (h + 1 - dy).min(h);
                    let x0 = 1usize.saturating_sub(dxo);
                    let x1 = (w + 1 - dxo).min(w);
                    let mut acc = 0.0;
                    let kv = k[dy * 3 + dxo];
                    for y in y0..y1 {
                        let sy = y + dy - 1;
                        let src = &x_plane[sy * w + x0 + dxo - 1..sy * w + x1 + dxo - 1];
                        let g = &g_plane[y * w + x0..y * w + x1];
                        for (gv, sv) in g.iter().zip(src.iter()) {
                            acc += gv * sv;
                        }
                        let dst = &mut dx_plane[sy * w + x0 + dxo - 1..sy * w + x1 + dxo - 1];
                        for (d, gv) in dst.iter_mut().zip(g.iter()) {
                            *d += kv * gv;
                        }
                    }
                    dk[dy * 3 + dxo] += acc;
                }
            }
        }
    }
    (dw, db, dx)
}
