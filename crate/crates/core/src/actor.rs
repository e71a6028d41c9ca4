//! The policy network: multi-hot label in, triple categorical policy out.
//!
//! The network body is a stack of fully connected layers with ReLU and
//! Dropout; its 352-wide linear output is split into an operator block plus
//! per-operator probability-level and magnitude-level rows, each softmaxed.
//! Training follows the score-function estimator: sampled actions are scored
//! by frozen critics and the loss `-mean(log pi * (reward - baseline))`
//! pushes probability toward actions with above-baseline gain.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{OperatorId, PolicyTriple, NUM_M_LEVELS, NUM_OPERATORS, NUM_P_LEVELS};
use crate::critic::{instance_loss, augmented_gain, CriticSet};
use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::folds::{union_eval_set, FoldPlan};
use crate::nn::{LayerSpec, Network, OptHyper, Optimizer, Tensor};
use crate::seeds;

pub const ACTOR_OUTPUT_WIDTH: usize =
    NUM_OPERATORS + NUM_OPERATORS * NUM_P_LEVELS + NUM_OPERATORS * NUM_M_LEVELS;

/// The actor's output: categorical over operators plus per-operator
/// categoricals over probability and magnitude levels.
#[derive(Clone, Debug)]
pub struct PolicyDistribution {
    pub pi_op: Vec<f64>,
    /// Row j: probability-level distribution used when operator j is drawn.
    pub pi_p: Vec<Vec<f64>>,
    /// Row j: magnitude-level distribution used when operator j is drawn.
    pub pi_m: Vec<Vec<f64>>,
}

impl PolicyDistribution {
    pub fn validate(&self) -> Result<()> {
        let check = |row: &[f64], what: &str| -> Result<()> {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p <= 0.0) {
                return Err(Error::invalid(format!("{what} not a strictly positive categorical")));
            }
            Ok(())
        };
        check(&self.pi_op, "operator distribution")?;
        for (j, row) in self.pi_p.iter().enumerate() {
            check(row, &format!("p-level row {j}"))?;
        }
        for (j, row) in self.pi_m.iter().enumerate() {
            check(row, &format!("m-level row {j}"))?;
        }
        Ok(())
    }
}

/// E-mode fixes p and magnitude; H-mode learns all three heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActorMode {
    E,
    H,
}

/// Whether the actor sees real label vectors or a constant all-ones input
/// (the label-agnostic baseline).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelInput {
    Labels,
    Ones,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    None,
    MovingAverage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActorConfig {
    pub depth: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub mode: ActorMode,
    /// Fixed magnitude level used by E-mode point masses.
    pub fixed_m_level: u8,
    /// Monte Carlo samples per instance per visit.
    pub samples_per_instance: usize,
    pub baseline: BaselineKind,
    pub baseline_decay: f64,
    pub hyper: OptHyper,
    pub epochs: usize,
    pub batch_size: usize,
    pub label_input: LabelInput,
    pub seed: u64,
}

impl ActorConfig {
    pub fn desk_default(mode: ActorMode, seed: u64) -> ActorConfig {
        ActorConfig {
            depth: 3,
            hidden: 128,
            dropout: 0.5,
            mode,
            fixed_m_level: 9,
            samples_per_instance: 4,
            baseline: BaselineKind::MovingAverage,
            baseline_decay: 0.9,
            hyper: OptHyper::adam(1e-3, 0.0),
            epochs: 10,
            batch_size: 32,
            label_input: LabelInput::Labels,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::invalid("actor depth must be at least 2"));
        }
        if self.samples_per_instance < 1 {
            return Err(Error::invalid("samples_per_instance must be at least 1"));
        }
        if self.fixed_m_level as usize >= NUM_M_LEVELS {
            return Err(Error::invalid("fixed_m_level outside [0,9]"));
        }
        Ok(())
    }
}

/// Dense stack: `depth` fully connected layers, ReLU + Dropout between them.
pub fn actor_arch(num_labels: usize, cfg: &ActorConfig) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut in_w = num_labels;
    for _ in 0..cfg.depth - 1 {
        specs.push(LayerSpec::Dense { input: in_w, output: cfg.hidden });
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::Dropout { rate: cfg.dropout });
        in_w = cfg.hidden;
    }
    specs.push(LayerSpec::Dense { input: in_w, output: ACTOR_OUTPUT_WIDTH });
    specs
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn point_mass(len: usize, at: usize) -> Vec<f64> {
    let mut row = vec![0.0; len];
    row[at] = 1.0;
    row
}

/// Splits raw 352-wide logits into the triple distribution.
pub fn distribution_from_logits(
    logits: &[f64],
    mode: ActorMode,
    fixed_m_level: u8,
) -> Result<PolicyDistribution> {
    if logits.len() != ACTOR_OUTPUT_WIDTH {
        return Err(Error::ShapeMismatch {
            expected: vec![ACTOR_OUTPUT_WIDTH],
            got: vec![logits.len()],
        });
    }
    let pi_op = softmax(&logits[..NUM_OPERATORS]);
    let p_base = NUM_OPERATORS;
    let m_base = NUM_OPERATORS + NUM_OPERATORS * NUM_P_LEVELS;
    let (pi_p, pi_m) = match mode {
        ActorMode::H => (
            (0..NUM_OPERATORS)
                .map(|j| softmax(&logits[p_base + j * NUM_P_LEVELS..p_base + (j + 1) * NUM_P_LEVELS]))
                .collect(),
            (0..NUM_OPERATORS)
                .map(|j| softmax(&logits[m_base + j * NUM_M_LEVELS..m_base + (j + 1) * NUM_M_LEVELS]))
                .collect(),
        ),
        ActorMode::E => (
            vec![point_mass(NUM_P_LEVELS, 5); NUM_OPERATORS],
            vec![point_mass(NUM_M_LEVELS, fixed_m_level as usize); NUM_OPERATORS],
        ),
    };
    Ok(PolicyDistribution { pi_op, pi_p, pi_m })
}

/// Eval-mode policy for a label vector.
pub fn actor_forward(
    net: &Network,
    y: &LabelVector,
    mode: ActorMode,
    fixed_m_level: u8,
) -> Result<PolicyDistribution> {
    let out = net.forward_eval(&y.to_tensor())?;
    distribution_from_logits(out.data(), mode, fixed_m_level)
}

fn sample_categorical(row: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1
}

/// Samples (operator, p-level, m-level) and returns the joint log-probability.
pub fn sample_action(dist: &PolicyDistribution, rng: &mut ChaCha8Rng) -> (PolicyTriple, f64) {
    let j = sample_categorical(&dist.pi_op, rng);
    let k = sample_categorical(&dist.pi_p[j], rng);
    let l = sample_categorical(&dist.pi_m[j], rng);
    let log_prob = dist.pi_op[j].ln() + dist.pi_p[j][k].ln() + dist.pi_m[j][l].ln();
    (
        PolicyTriple { op: OperatorId::from_code(j).expect("operator code"), p_level: k as u8, m_level: l as u8 },
        log_prob,
    )
}

/// Score-function loss over a batch: `-(1/N) sum log_prob * (reward - baseline)`.
///
/// Returns the loss and its gradient with respect to each log-probability.
pub fn reinforce_loss(batch: &[(f64, f64, f64)]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("reinforce loss over an empty batch"));
    }
    if batch.iter().any(|(lp, r, b)| !lp.is_finite() || !r.is_finite() || !b.is_finite()) {
        return Err(Error::NonFinite("reinforce batch".into()));
    }
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(batch.len());
    for (log_prob, reward, baseline) in batch {
        let adv = reward - baseline;
        loss -= log_prob * adv / n;
        grads.push(-adv / n);
    }
    Ok((loss, grads))
}

/// Gradient of the batch loss with respect to the 352 output logits of one
/// instance, given its sampled actions and their `(advantage / N)` weights.
fn logits_grad(
    dist: &PolicyDistribution,
    samples: &[(PolicyTriple, f64)],
    mode: ActorMode,
) -> Vec<f64> {
    let mut grad = vec![0.0; ACTOR_OUTPUT_WIDTH];
    let p_base = NUM_OPERATORS;
    let m_base = NUM_OPERATORS + NUM_OPERATORS * NUM_P_LEVELS;
    for (triple, coeff) in samples {
        let j = triple.op.code();
        for o in 0..NUM_OPERATORS {
            let indicator = if o == j { 1.0 } else { 0.0 };
            grad[o] += coeff * (dist.pi_op[o] - indicator);
        }
        if matches!(mode, ActorMode::H) {
            let k = triple.p_level as usize;
            for kk in 0..NUM_P_LEVELS {
                let indicator = if kk == k { 1.0 } else { 0.0 };
                grad[p_base + j * NUM_P_LEVELS + kk] += coeff * (dist.pi_p[j][kk] - indicator);
            }
            let l = triple.m_level as usize;
            for ll in 0..NUM_M_LEVELS {
                let indicator = if ll == l { 1.0 } else { 0.0 };
                grad[m_base + j * NUM_M_LEVELS + ll] += coeff * (dist.pi_m[j][ll] - indicator);
            }
        }
    }
    grad
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ActorLog {
    pub mean_reward_per_epoch: Vec<f64>,
    pub loss_per_epoch: Vec<f64>,
}

/// Reward source for the training loop. Takes (slot in the training list,
/// sampled triple, derived rng) and returns the gain.
pub trait RewardSource: Sync {
    fn reward(&self, slot: usize, triple: &PolicyTriple, rng: &mut ChaCha8Rng) -> Result<f64>;
}

impl<F> RewardSource for F
where
    F: Fn(usize, &PolicyTriple, &mut ChaCha8Rng) -> Result<f64> + Sync,
{
    fn reward(&self, slot: usize, triple: &PolicyTriple, rng: &mut ChaCha8Rng) -> Result<f64> {
        self(slot, triple, rng)
    }
}

/// Core policy-gradient loop over a list of label vectors with an arbitrary
/// reward source. The critic-backed entry point is [`train_actor`];
/// this one also serves synthetic-reward convergence harnesses.
pub fn train_actor_with_rewards(
    labels: &[LabelVector],
    cfg: &ActorConfig,
    rewards: &dyn RewardSource,
) -> Result<(Network, ActorLog)> {
    cfg.validate()?;
    if labels.is_empty() {
        return Err(Error::invalid("actor training set is empty"));
    }
    let num_labels = labels[0].len();
    let specs = actor_arch(num_labels, cfg);
    let mut net = Network::init(&specs, seeds::derive(cfg.seed, &[0xac7]))?;
    let mut opt = Optimizer::new(cfg.hyper, &net);
    let mut log = ActorLog::default();
    let mut baseline = 0.0f64;
    let mut baseline_ready = false;

    let inputs: Vec<Tensor> = labels
        .iter()
        .map(|y| match cfg.label_input {
            LabelInput::Labels => y.to_tensor(),
            LabelInput::Ones => LabelVector::ones(num_labels).to_tensor(),
        })
        .collect();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = seeds::stream(cfg.seed, &[0xa0, epoch as u64]);
            order.shuffle(&mut rng);
        }
        let mut epoch_reward_sum = 0.0;
        let mut epoch_samples = 0usize;
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let b = if baseline_ready && cfg.baseline == BaselineKind::MovingAverage { baseline } else { 0.0 };
            let n_total = (batch.len() * cfg.samples_per_instance) as f64;
            let per_instance: Vec<Result<(Vec<Tensor>, f64, f64)>> = batch
                .par_iter()
                .map(|&slot| {
                    let mut fwd_rng = seeds::stream(cfg.seed, &[0xa1, epoch as u64, slot as u64]);
                    let (out, cache) = net.forward_train(&inputs[slot], &mut fwd_rng)?;
                    let dist = distribution_from_logits(out.data(), cfg.mode, cfg.fixed_m_level)?;
                    let mut samples = Vec::with_capacity(cfg.samples_per_instance);
                    let mut reward_sum = 0.0;
                    let mut loss_contrib = 0.0;
                    for s in 0..cfg.samples_per_instance {
                        let mut rng =
                            seeds::stream(cfg.seed, &[0xa2, epoch as u64, slot as u64, s as u64]);
                        let (triple, log_prob) = sample_action(&dist, &mut rng);
                        let r = rewards.reward(slot, &triple, &mut rng)?;
                        if !r.is_finite() {
                            return Err(Error::NonFinite("actor reward".into()));
                        }
                        reward_sum += r;
                        loss_contrib -= log_prob * (r - b) / n_total;
                        samples.push((triple, (r - b) / n_total));
                    }
                    let grad_logits = logits_grad(&dist, &samples, cfg.mode);
                    let grad_t = Tensor::from_vec(&[ACTOR_OUTPUT_WIDTH], grad_logits)?;
                    let (grads, _) = net.backward(&cache, &grad_t)?;
                    Ok((grads, reward_sum, loss_contrib))
                })
                .collect();

            let mut acc = net.grad_zeros();
            let mut batch_reward = 0.0;
            for item in per_instance {
                let (grads, reward_sum, loss_contrib) = item?;
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g);
                }
                batch_reward += reward_sum;
                epoch_loss += loss_contrib;
            }
            opt.step(&mut net, &acc)?;

            let batch_mean = batch_reward / n_total;
            epoch_reward_sum += batch_reward;
            epoch_samples += batch.len() * cfg.samples_per_instance;
            if cfg.baseline == BaselineKind::MovingAverage {
                if baseline_ready {
                    baseline = cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * batch_mean;
                } else {
                    baseline = batch_mean;
                    baseline_ready = true;
                }
            }
        }
        log.mean_reward_per_epoch.push(epoch_reward_sum / epoch_samples as f64);
        log.loss_per_epoch.push(epoch_loss);
    }
    Ok((net, log))
}

/// Trains the actor over the evaluation union with critic-backed rewards.
/// Original-instance losses are precomputed once; critics stay frozen.
pub fn train_actor(
    ds: &Dataset,
    plan: &FoldPlan,
    critics: &CriticSet,
    cfg: &ActorConfig,
) -> Result<(Network, ActorLog)> {
    let union = union_eval_set(plan);
    if union.is_empty() {
        return Err(Error::invalid("evaluation union is empty"));
    }
    let labels: Vec<LabelVector> =
        union.indices.iter().map(|&i| ds.instances[i].labels.clone()).collect();

    let orig_losses: Vec<Vec<f64>> = union
        .indices
        .par_iter()
        .zip(&union.critic_lists)
        .map(|(&idx, critic_ids)| {
            let inst = &ds.instances[idx];
            critic_ids
                .iter()
                .map(|&k| instance_loss(&critics.critics[k], &inst.image, &inst.labels))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let source = |slot: usize, triple: &PolicyTriple, rng: &mut ChaCha8Rng| -> Result<f64> {
        let idx = union.indices[slot];
        let inst = &ds.instances[idx];
        augmented_gain(
            critics,
            &union.critic_lists[slot],
            &orig_losses[slot],
            ds,
            &inst.image,
            &inst.labels,
            triple.op,
            triple.m_level,
            rng,
        )
    };
    train_actor_with_rewards(&labels, cfg, &source)
}

/// One row per queried label vector: operator probabilities plus the argmax
/// p- and m-levels per operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyTableRow {
    pub label_bits: String,
    pub op_probs: Vec<f64>,
    pub argmax_p: Vec<u8>,
    pub argmax_m: Vec<u8>,
}

pub fn export_policy_table(
    net: &Network,
    queries: &[LabelVector],
    mode: ActorMode,
    fixed_m_level: u8,
) -> Result<Vec<PolicyTableRow>> {
    let mut rows = Vec::with_capacity(queries.len());
    for y in queries {
        let dist = actor_forward(net, y, mode, fixed_m_level)?;
        let argmax = |row: &[f64]| -> u8 {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
                .map(|(i, _)| i as u8)
                .unwrap_or(0)
        };
        rows.push(PolicyTableRow {
            label_bits: y.to_bitstring(),
            op_probs: dist.pi_op.clone(),
            argmax_p: dist.pi_p.iter().map(|r| argmax(r)).collect(),
            argmax_m: dist.pi_m.iter().map(|r| argmax(r)).collect(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_net(num_labels: usize, cfg: &ActorConfig) -> Network {
        let mut net = Network::init(&actor_arch(num_labels, cfg), 5).unwrap();
        // Zero the final dense layer: softmax of zeros is uniform.
        let n_params = net.params().len();
        for p in net.params_mut().drain(..).skip(n_params - 2) {
            p.data_mut().fill(0.0);
        }
        net
    }

    fn cfg_h(seed: u64) -> ActorConfig {
        ActorConfig::desk_default(ActorMode::H, seed)
    }

    #[test]
    fn zero_final_layer_gives_uniform_categoricals() {
        let cfg = cfg_h(1);
        let net = uniform_net(6, &cfg);
        let dist = actor_forward(&net, &LabelVector::one_hot(6, 2), ActorMode::H, 9).unwrap();
        dist.validate().unwrap();
        for p in &dist.pi_op {
            assert!((p - 1.0 / 16.0).abs() < 1e-12);
        }
        for row in &dist.pi_p {
            for p in row {
                assert!((p - 1.0 / 11.0).abs() < 1e-12);
            }
        }
        for row in &dist.pi_m {
            for p in row {
                assert!((p - 1.0 / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mode_e_rows_are_point_masses() {
        let cfg = ActorConfig { mode: ActorMode::E, ..cfg_h(2) };
        let net = Network::init(&actor_arch(4, &cfg), 8).unwrap();
        let dist = actor_forward(&net, &LabelVector::one_hot(4, 1), ActorMode::E, 9).unwrap();
        for row in &dist.pi_p {
            assert_eq!(row[5], 1.0);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
        for row in &dist.pi_m {
            assert_eq!(row[9], 1.0);
        }
    }

    #[test]
    fn distinct_labels_give_distinct_distributions() {
        let cfg = cfg_h(3);
        let net = Network::init(&actor_arch(6, &cfg), 33).unwrap();
        let a = actor_forward(&net, &LabelVector::one_hot(6, 0), ActorMode::H, 9).unwrap();
        let b = actor_forward(&net, &LabelVector::one_hot(6, 5), ActorMode::H, 9).unwrap();
        let diff: f64 = a.pi_op.iter().zip(&b.pi_op).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn point_mass_sampling_is_certain() {
        let mut dist = PolicyDistribution {
            pi_op: point_mass(NUM_OPERATORS, 4),
            pi_p: vec![point_mass(NUM_P_LEVELS, 7); NUM_OPERATORS],
            pi_m: vec![point_mass(NUM_M_LEVELS, 2); NUM_OPERATORS],
        };
        // validate() demands strictly positive rows, so only test sampling.
        for seed in 0..10 {
            let mut rng = seeds::stream(seed, &[]);
            let (triple, log_prob) = sample_action(&dist, &mut rng);
            assert_eq!(triple.op.code(), 4);
            assert_eq!(triple.p_level, 7);
            assert_eq!(triple.m_level, 2);
            assert_eq!(log_prob, 0.0);
        }
        dist.pi_op = point_mass(NUM_OPERATORS, 0);
        let mut rng = seeds::stream(0, &[]);
        assert_eq!(sample_action(&dist, &mut rng).0.op.code(), 0);
    }

    #[test]
    fn uniform_log_prob_matches_arithmetic() {
        let dist = PolicyDistribution {
            pi_op: vec![1.0 / 16.0; NUM_OPERATORS],
            pi_p: vec![vec![1.0 / 11.0; NUM_P_LEVELS]; NUM_OPERATORS],
            pi_m: vec![vec![1.0 / 10.0; NUM_M_LEVELS]; NUM_OPERATORS],
        };
        let mut rng = seeds::stream(9, &[]);
        let (_, log_prob) = sample_action(&dist, &mut rng);
        let expect = (1.0f64 / 16.0).ln() + (1.0f64 / 11.0).ln() + (1.0f64 / 10.0).ln();
        assert!((log_prob - expect).abs() < 1e-12);
        assert!((expect + 7.47).abs() < 0.01);
    }

    #[test]
    fn sampling_frequencies_match_distribution() {
        // A lopsided but fixed distribution; multinomial 3-sigma bounds.
        let mut op = vec![0.01; NUM_OPERATORS];
        op[3] = 0.5;
        op[8] = 0.35;
        let rest: f64 = op.iter().sum::<f64>() - 0.85;
        for (i, p) in op.iter_mut().enumerate() {
            if i != 3 && i != 8 {
                *p = (1.0 - 0.85) / 14.0;
            }
            let _ = rest;
        }
        let dist = PolicyDistribution {
            pi_op: op.clone(),
            pi_p: vec![vec![1.0 / 11.0; NUM_P_LEVELS]; NUM_OPERATORS],
            pi_m: vec![vec![1.0 / 10.0; NUM_M_LEVELS]; NUM_OPERATORS],
        };
        let n = 100_000;
        let mut counts = vec![0usize; NUM_OPERATORS];
        for s in 0..n {
            let mut rng = seeds::stream(1000 + s as u64, &[]);
            let (t, _) = sample_action(&dist, &mut rng);
            counts[t.op.code()] += 1;
        }
        for (j, &c) in counts.iter().enumerate() {
            let p = op[j];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = c as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-4,
                "op {j}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn reinforce_loss_values_and_gradient() {
        // All-zero rewards: zero loss, zero gradient.
        let (loss, grads) = reinforce_loss(&[(0.3f64.ln(), 0.0, 0.0), (0.5f64.ln(), 0.0, 0.0)]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| *g == 0.0));

        // Single sample, log 0.5, reward +1: loss = ln 2.
        let (loss, grads) = reinforce_loss(&[(0.5f64.ln(), 1.0, 0.0)]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grads[0] + 1.0).abs() < 1e-12);

        assert!(reinforce_loss(&[]).is_err());
        assert!(reinforce_loss(&[(0.0, f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn positive_reward_increases_sampled_action_probability() {
        // One-parameter softmax over two logits [theta, 0]; sample action 0 with
        // reward +1. Gradient of -log pi_0 wrt theta is -(1 - pi_0) < 0, so a
        // descent step raises theta and pi_0.
        let theta = 0.2f64;
        let pi0 = softmax(&[theta, 0.0])[0];
        let dloss_dtheta = -(1.0 - pi0); // closed form for the sampled action
        let lr = 0.1;
        let theta2 = theta - lr * dloss_dtheta;
        let pi0_after = softmax(&[theta2, 0.0])[0];
        assert!(pi0_after > pi0);

        // And through logits_grad: gradient for the sampled op logit is negative.
        let dist = PolicyDistribution {
            pi_op: softmax(&vec![0.0; NUM_OPERATORS]),
            pi_p: vec![vec![1.0 / 11.0; NUM_P_LEVELS]; NUM_OPERATORS],
            pi_m: vec![vec![1.0 / 10.0; NUM_M_LEVELS]; NUM_OPERATORS],
        };
        let triple = PolicyTriple { op: OperatorId::Rotate, p_level: 5, m_level: 5 };
        let g = logits_grad(&dist, &[(triple, 1.0)], ActorMode::H);
        assert!(g[OperatorId::Rotate.code()] < 0.0);
        for (o, gv) in g.iter().enumerate().take(NUM_OPERATORS) {
            if o != OperatorId::Rotate.code() {
                assert!(*gv > 0.0);
            }
        }
    }

    #[test]
    fn bandit_convergence_two_groups() {
        // Synthetic reward table: op 4 pays for group A, op 9 for group B.
        let labels: Vec<LabelVector> =
            (0..16).map(|i| LabelVector::one_hot(4, if i % 2 == 0 { 0 } else { 3 })).collect();
        let reward = |slot: usize, triple: &PolicyTriple, _rng: &mut ChaCha8Rng| -> Result<f64> {
            let good = if slot % 2 == 0 { 4 } else { 9 };
            Ok(if triple.op.code() == good { 1.0 } else { 0.0 })
        };
        let cfg = ActorConfig {
            epochs: 400,
            batch_size: 16,
            samples_per_instance: 4,
            hidden: 64,
            dropout: 0.1,
            hyper: OptHyper::adam(1e-2, 0.0),
            ..cfg_h(77)
        };
        let (net, log) = train_actor_with_rewards(&labels, &cfg, &reward).unwrap();
        let dist_a = actor_forward(&net, &LabelVector::one_hot(4, 0), ActorMode::H, 9).unwrap();
        let dist_b = actor_forward(&net, &LabelVector::one_hot(4, 3), ActorMode::H, 9).unwrap();
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(argmax(&dist_a.pi_op), 4, "group A did not converge: {:?}", dist_a.pi_op);
        assert_eq!(argmax(&dist_b.pi_op), 9, "group B did not converge");
        assert!(log.mean_reward_per_epoch.last().unwrap() > &0.5);
        dist_a.validate().unwrap();
        dist_b.validate().unwrap();
    }

    #[test]
    fn policy_table_shapes_and_uniform_probs() {
        let cfg = cfg_h(4);
        let net = uniform_net(6, &cfg);
        let queries: Vec<LabelVector> = (0..6).map(|l| LabelVector::one_hot(6, l)).collect();
        let rows = export_policy_table(&net, &queries, ActorMode::H, 9).unwrap();
        assert_eq!(rows.len(), 6);
        for row in &rows {
            assert_eq!(row.op_probs.len(), 16);
            for p in &row.op_probs {
                assert!((p - 0.0625).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn training_keeps_distributions_valid() {
        let labels: Vec<LabelVector> = (0..8).map(|i| LabelVector::one_hot(3, i % 3)).collect();
        let reward = |_s: usize, t: &PolicyTriple, _r: &mut ChaCha8Rng| -> Result<f64> {
            Ok(if t.op == OperatorId::Equalize { 0.5 } else { -0.1 })
        };
        let cfg = ActorConfig { epochs: 10, batch_size: 8, hidden: 32, ..cfg_h(5) };
        let (net, _) = train_actor_with_rewards(&labels, &cfg, &reward).unwrap();
        for l in 0..3 {
            let dist = actor_forward(&net, &LabelVector::one_hot(3, l), ActorMode::H, 9).unwrap();
            dist.validate().unwrap();
        }
    }
}
