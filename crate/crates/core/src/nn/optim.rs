use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    SgdMomentum,
    Adam,
}

/// Optimizer hyperparameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptHyper {
    pub kind: OptKind,
    pub lr: f64,
    /// Momentum for SGD; beta1 for Adam.
    pub momentum: f64,
    /// beta2 for Adam (ignored by SGD).
    pub beta2: f64,
    pub weight_decay: f64,
}

impl OptHyper {
    pub fn sgd_momentum(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        OptHyper { kind: OptKind::SgdMomentum, lr, momentum, beta2: 0.0, weight_decay }
    }

    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        OptHyper { kind: OptKind::Adam, lr, momentum: 0.9, beta2: 0.999, weight_decay }
    }
}

/// Optimizer with per-parameter auxiliary state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub hyper: OptHyper,
    velocity: Vec<Tensor>,
    second: Vec<Tensor>,
    steps: u64,
}

const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(hyper: OptHyper, net: &Network) -> Optimizer {
        let zeros: Vec<Tensor> = net.params().iter().map(|p| p.scalar_like(0.0)).collect();
        let second = if hyper.kind == OptKind::Adam { zeros.clone() } else { Vec::new() };
        Optimizer { hyper, velocity: zeros, second, steps: 0 }
    }

    /// Applies one update. `grads` must match `net.params()` order and shapes.
    pub fn step(&mut self, net: &mut Network, grads: &[Tensor]) -> Result<()> {
        let mut params = net.params_mut();
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "optimizer got {} gradient tensors for {} parameter tensors",
                grads.len(),
                params.len()
            )));
        }
        for g in grads {
            if !g.all_finite() {
                return Err(Error::NonFinite("gradient".into()));
            }
        }
        self.steps += 1;
        let h = self.hyper;
        match h.kind {
            OptKind::SgdMomentum => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(self.velocity.iter_mut()) {
                    debug_assert_eq!(p.shape(), g.shape());
                    let pd = p.data_mut();
                    let vd = v.data_mut();
                    for ((pv, gv), vv) in pd.iter_mut().zip(g.data()).zip(vd.iter_mut()) {
                        *vv = h.momentum * *vv - h.lr * (gv + h.weight_decay * *pv);
                        *pv += *vv;
                    }
                }
            }
            OptKind::Adam => {
                let t = self.steps as f64;
                let bc1 = 1.0 - h.momentum.powf(t);
                let bc2 = 1.0 - h.beta2.powf(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.velocity.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    debug_assert_eq!(p.shape(), g.shape());
                    let pd = p.data_mut();
                    for (((pv, gv), mv), vv) in
                        pd.iter_mut().zip(g.data()).zip(m.data_mut().iter_mut()).zip(v.data_mut().iter_mut())
                    {
                        let grad = gv + h.weight_decay * *pv;
                        *mv = h.momentum * *mv + (1.0 - h.momentum) * grad;
                        *vv = h.beta2 * *vv + (1.0 - h.beta2) * grad * grad;
                        let m_hat = *mv / bc1;
                        let v_hat = *vv / bc2;
                        *pv -= h.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::LayerSpec;

    fn one_param_net(theta: f64) -> Network {
        let mut net = Network::init(&[LayerSpec::Dense { input: 1, output: 1 }], 0).unwrap();
        net.params_mut()[0].data_mut()[0] = theta;
        net.params_mut()[1].data_mut()[0] = 0.0;
        net
    }

    fn grads_of(net: &Network, w_grad: f64) -> Vec<Tensor> {
        let mut g = net.grad_zeros();
        g[0].data_mut()[0] = w_grad;
        g
    }

    #[test]
    fn plain_sgd_step() {
        let mut net = one_param_net(1.0);
        let mut opt = Optimizer::new(OptHyper::sgd_momentum(0.1, 0.0, 0.0), &net);
        let g = grads_of(&net, 1.0);
        opt.step(&mut net, &g).unwrap();
        assert!((net.params()[0].data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_momentum_steps_match_hand_unroll() {
        // v1 = -lr*g; th1 = th0 + v1; v2 = mu*v1 - lr*g; th2 = th1 + v2
        let (lr, mu, g) = (0.1, 0.9, 2.0);
        let mut net = one_param_net(0.5);
        let mut opt = Optimizer::new(OptHyper::sgd_momentum(lr, mu, 0.0), &net);
        let gr = grads_of(&net, g);
        opt.step(&mut net, &gr).unwrap();
        opt.step(&mut net, &gr).unwrap();
        let v1 = -lr * g;
        let th1 = 0.5 + v1;
        let v2 = mu * v1 - lr * g;
        let th2 = th1 + v2;
        assert!((net.params()[0].data()[0] - th2).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_parameters() {
        let (lr, wd) = (0.5, 1e-4);
        let mut net = one_param_net(1.0);
        let mut opt = Optimizer::new(OptHyper::sgd_momentum(lr, 0.0, wd), &net);
        let g = grads_of(&net, 0.0);
        opt.step(&mut net, &g).unwrap();
        assert!((net.params()[0].data()[0] - (1.0 - lr * wd)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_unit_scale() {
        // With bias correction, the first Adam step is lr * g / (|g| + eps).
        let mut net = one_param_net(0.0);
        let mut opt = Optimizer::new(OptHyper::adam(1e-3, 0.0), &net);
        let g = grads_of(&net, 0.25);
        opt.step(&mut net, &g).unwrap();
        assert!((net.params()[0].data()[0] + 1e-3).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradients_rejected() {
        let mut net = one_param_net(0.0);
        let mut opt = Optimizer::new(OptHyper::adam(1e-3, 0.0), &net);
        let g = grads_of(&net, f64::NAN);
        assert!(opt.step(&mut net, &g).is_err());
    }
}
