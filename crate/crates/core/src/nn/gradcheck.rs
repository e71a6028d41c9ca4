use crate::error::Result;
use crate::nn::loss::LossHead;
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;
use crate::seeds;

/// Outcome of a finite-difference gradient comparison.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (parameter tensor index, element index) of the worst disagreement.
    pub worst: Option<(usize, usize)>,
    pub params_checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
}

/// Loss of the network on `input` under `head`, with dropout masks pinned by `seed`.
fn loss_at(net: &Network, input: &Tensor, head: &dyn LossHead, seed: u64) -> Result<f64> {
    let mut rng = seeds::stream(seed, &[0xd20]);
    let (out, _) = net.forward_train(input, &mut rng)?;
    Ok(head.loss_grad(&out)?.0)
}

/// Compares supplied analytic gradients against central finite differences.
///
/// Exposed separately from [`grad_check`] so tests can feed deliberately
/// corrupted gradients and watch the check fail.
pub fn compare_grads(
    net: &mut Network,
    input: &Tensor,
    head: &dyn LossHead,
    seed: u64,
    analytic: &[Tensor],
    tolerance: f64,
) -> Result<GradCheckReport> {
    const H: f64 = 1e-5;
    let mut max_rel_err: f64 = 0.0;
    let mut worst = None;
    let mut params_checked = 0;
    let n_tensors = analytic.len();
    for t_idx in 0..n_tensors {
        let n_elems = analytic[t_idx].len();
        for e_idx in 0..n_elems {
            let orig = net.params()[t_idx].data()[e_idx];
            net.params_mut()[t_idx].data_mut()[e_idx] = orig + H;
            let plus = loss_at(net, input, head, seed)?;
            net.params_mut()[t_idx].data_mut()[e_idx] = orig - H;
            let minus = loss_at(net, input, head, seed)?;
            net.params_mut()[t_idx].data_mut()[e_idx] = orig;
            let numeric = (plus - minus) / (2.0 * H);
            let err = rel_err(analytic[t_idx].data()[e_idx], numeric);
            if err > max_rel_err {
                max_rel_err = err;
                worst = Some((t_idx, e_idx));
            }
            params_checked += 1;
        }
    }
    Ok(GradCheckReport { max_rel_err, worst, params_checked, tolerance })
}

/// Full finite-difference check of the network's own backward pass.
pub fn grad_check(
    net: &mut Network,
    input: &Tensor,
    head: &dyn LossHead,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let analytic = {
        let mut rng = seeds::stream(seed, &[0xd20]);
        let (out, cache) = net.forward_train(input, &mut rng)?;
        let (_, grad_out) = head.loss_grad(&out)?;
        let (grads, _) = net.backward(&cache, &grad_out)?;
        grads
    };
    compare_grads(net, input, head, seed, &analytic, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::LayerSpec;
    use crate::nn::loss::{BceWithLogits, WeightedSum};

    #[test]
    fn dense_relu_dense_bce_passes() {
        let specs = [
            LayerSpec::Dense { input: 3, output: 4 },
            LayerSpec::Relu,
            LayerSpec::Dense { input: 4, output: 2 },
        ];
        let mut net = Network::init(&specs, 11).unwrap();
        let x = Tensor::from_vec(&[3], vec![0.4, -0.7, 1.1]).unwrap();
        let head = BceWithLogits { targets: vec![1.0, 0.0] };
        let report = grad_check(&mut net, &x, &head, 5, 1e-4).unwrap();
        assert!(report.pass(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn conv_pool_dense_bce_passes() {
        let specs = [
            LayerSpec::Conv3x3 { in_ch: 2, out_ch: 3 },
            LayerSpec::Relu,
            LayerSpec::AvgPool2x2,
            LayerSpec::Dense { input: 3 * 2 * 2, output: 2 },
        ];
        let mut net = Network::init(&specs, 13).unwrap();
        let data: Vec<f64> = (0..2 * 4 * 4).map(|i| ((i * 37 % 19) as f64 - 9.0) / 10.0).collect();
        let x = Tensor::from_vec(&[2, 4, 4], data).unwrap();
        let head = BceWithLogits { targets: vec![0.0, 1.0] };
        let report = grad_check(&mut net, &x, &head, 5, 1e-4).unwrap();
        assert!(report.pass(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn dropout_and_softmax_rows_pass_with_pinned_masks() {
        let specs = [
            LayerSpec::Dense { input: 3, output: 10 },
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::SoftmaxRows,
        ];
        let mut net = Network::init(&specs, 17).unwrap();
        let x = Tensor::from_vec(&[3], vec![0.2, 0.9, -0.5]).unwrap();
        let head = WeightedSum { weights: (0..10).map(|i| (i as f64) - 4.5).collect() };
        let report = grad_check(&mut net, &x, &head, 23, 1e-4).unwrap();
        assert!(report.pass(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let specs = [LayerSpec::Dense { input: 3, output: 2 }];
        let mut net = Network::init(&specs, 19).unwrap();
        let x = Tensor::from_vec(&[3], vec![0.5, 0.25, -0.75]).unwrap();
        let head = BceWithLogits { targets: vec![1.0, 0.0] };
        let mut analytic = {
            let mut rng = seeds::stream(5, &[0xd20]);
            let (out, cache) = net.forward_train(&x, &mut rng).unwrap();
            let (_, g) = head.loss_grad(&out).unwrap();
            net.backward(&cache, &g).unwrap().0
        };
        analytic[0].data_mut()[1] *= 2.0;
        let report = compare_grads(&mut net, &x, &head, 5, &analytic, 1e-4).unwrap();
        assert!(!report.pass());
        assert_eq!(report.worst, Some((0, 1)));
    }
}
