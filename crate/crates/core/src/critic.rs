//! Per-fold multi-label classifiers and the augmentation reward.
//!
//! One classifier is trained per fold on its `M` segment. Frozen critics then
//! score candidate augmentations: the reward of applying an operator to an
//! instance is the critic's loss on the original minus its loss on the
//! augmented image, averaged over the instance's corresponding critics.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_operator, OperatorId, PolicyTriple};
use crate::data::{Dataset, Image, Instance, LabelVector};
use crate::error::{Error, Result};
use crate::folds::{union_eval_set, FoldPlan};
use crate::nn::{
    bce_with_logits, load_checkpoint, save_checkpoint, LayerSpec, Network, OptHyper, Optimizer, Tensor,
};
use crate::seeds;

/// Classifier architecture presets for 3-channel square inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchPreset {
    /// conv(3->8), pool, conv(8->16), pool, dense 64. The reference choice.
    DeskConv,
    /// Half-width variant for fast sweeps.
    LightConv,
    /// Wider variant, used to test policy transfer across architectures.
    WideConv,
    /// Single-hidden-layer MLP on raw pixels.
    Mlp,
}

impl ArchPreset {
    pub fn build(self, image_size: usize, num_labels: usize) -> Vec<LayerSpec> {
        let s = image_size;
        let pooled = (s / 2) / 2;
        let conv = |a: usize, b: usize, hidden: usize| -> Vec<LayerSpec> {
            vec![
                LayerSpec::Conv3x3 { in_ch: 3, out_ch: a },
                LayerSpec::Relu,
                LayerSpec::AvgPool2x2,
                LayerSpec::Conv3x3 { in_ch: a, out_ch: b },
                LayerSpec::Relu,
                LayerSpec::AvgPool2x2,
                LayerSpec::Dense { input: b * pooled * pooled, output: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { input: hidden, output: num_labels },
                LayerSpec::Sigmoid,
            ]
        };
        match self {
            ArchPreset::DeskConv => conv(8, 16, 64),
            ArchPreset::LightConv => conv(6, 12, 48),
            ArchPreset::WideConv => conv(12, 24, 96),
            ArchPreset::Mlp => vec![
                LayerSpec::Dense { input: 3 * s * s, output: 128 },
                LayerSpec::Relu,
                LayerSpec::Dense { input: 128, output: num_labels },
                LayerSpec::Sigmoid,
            ],
        }
    }
}

/// Classifier training settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub hyper: OptHyper,
}

impl TrainSettings {
    /// Desk-scale default: 30 epochs, batch 32, SGD lr 0.05, momentum 0.9, wd 1e-4.
    pub fn desk_default() -> TrainSettings {
        TrainSettings { epochs: 30, batch_size: 32, hyper: OptHyper::sgd_momentum(0.05, 0.9, 1e-4) }
    }

    /// The full-scale preset kept for reference: lr 0.001, batch 80.
    pub fn full_scale_preset() -> TrainSettings {
        TrainSettings { epochs: 30, batch_size: 80, hyper: OptHyper::sgd_momentum(0.001, 0.9, 1e-4) }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
}

/// Trains a multi-label classifier on the given instance indices.
///
/// `augment` maps (epoch, dataset index, instance) to the image actually fed
/// to the network, so policy-based augmentation plugs in here. Per-example
/// work runs in parallel; gradients are reduced in index order, keeping the
/// result independent of scheduling.
pub fn train_classifier<F>(
    ds: &Dataset,
    indices: &[usize],
    specs: &[LayerSpec],
    settings: &TrainSettings,
    seed: u64,
    augment: F,
) -> Result<(Network, TrainLog)>
where
    F: Fn(usize, usize, &Instance) -> Result<Image> + Sync,
{
    if indices.is_empty() {
        return Err(Error::invalid("cannot train a classifier on zero instances"));
    }
    let mut net = Network::init(specs, seeds::derive(seed, &[0xc0de]))?;
    let mut opt = Optimizer::new(settings.hyper, &net);
    let mut log = TrainLog::default();

    for epoch in 0..settings.epochs {
        let mut order = indices.to_vec();
        shuffle(&mut order, seed, &[0x0e, epoch as u64]);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(settings.batch_size) {
            let per_example: Vec<Result<(f64, Vec<Tensor>)>> = batch
                .par_iter()
                .map(|&idx| {
                    let inst = &ds.instances[idx];
                    let img = augment(epoch, idx, inst)?;
                    let x = img.to_tensor();
                    let mut rng = seeds::stream(seed, &[0xd7, epoch as u64, idx as u64]);
                    let (logits, cache) = net.forward_train_logits(&x, &mut rng)?;
                    let (loss, grad) = bce_with_logits(&logits, &inst.labels.as_f64())?;
                    let (grads, _) = net.backward(&cache, &grad)?;
                    Ok((loss, grads))
                })
                .collect();

            let mut acc = net.grad_zeros();
            let mut batch_loss = 0.0;
            for item in per_example {
                let (loss, grads) = item?;
                batch_loss += loss;
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g);
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for a in &mut acc {
                a.scale(inv);
            }
            epoch_loss += batch_loss;
            opt.step(&mut net, &acc)?;
        }
        let mean = epoch_loss / order.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { context: format!("classifier epoch {epoch}") });
        }
        log.epoch_loss.push(mean);
    }
    Ok((net, log))
}

fn shuffle(order: &mut [usize], seed: u64, path: &[u64]) {
    use rand::seq::SliceRandom;
    let mut rng = seeds::stream(seed, path);
    order.shuffle(&mut rng);
}

/// The trained critics of a fold plan, frozen after training.
#[derive(Debug)]
pub struct CriticSet {
    pub critics: Vec<Network>,
    pub logs: Vec<TrainLog>,
}

impl CriticSet {
    pub fn k(&self) -> usize {
        self.critics.len()
    }

    /// The critics of the first `k` folds, for accumulating-fold sweeps.
    pub fn prefix(&self, k: usize) -> CriticSet {
        assert!(k >= 1 && k <= self.k(), "prefix K out of range");
        CriticSet { critics: self.critics[..k].to_vec(), logs: self.logs[..k].to_vec() }
    }
}

/// Trains one critic per fold on its `M` segment, no augmentation.
pub fn train_critics(
    ds: &Dataset,
    plan: &FoldPlan,
    specs: &[LayerSpec],
    settings: &TrainSettings,
    seed: u64,
) -> Result<CriticSet> {
    if plan.folds.iter().any(|f| f.m.iter().chain(f.a.iter()).any(|&i| i >= ds.len())) {
        return Err(Error::invalid("fold plan does not match dataset"));
    }
    let results: Vec<Result<(Network, TrainLog)>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            train_classifier(
                ds,
                &fold.m,
                specs,
                settings,
                seeds::derive(seed, &[0xcc, k as u64]),
                |_, _, inst| Ok(inst.image.clone()),
            )
            .map_err(|e| e.in_stage(&format!("critic fold {k}")))
        })
        .collect();
    let mut critics = Vec::with_capacity(plan.k);
    let mut logs = Vec::with_capacity(plan.k);
    for r in results {
        let (net, log) = r?;
        critics.push(net);
        logs.push(log);
    }
    Ok(CriticSet { critics, logs })
}

/// Mean BCE of one (possibly augmented) image against its labels.
pub fn instance_loss(critic: &Network, image: &Image, labels: &LabelVector) -> Result<f64> {
    let logits = critic.forward_eval_logits(&image.to_tensor())?;
    let (loss, _) = bce_with_logits(&logits, &labels.as_f64())?;
    Ok(loss)
}

/// Loss gain from augmenting with `op` at `m_level`, averaged over the given
/// critics. `orig_losses` are the precomputed per-critic losses of the
/// unaugmented instance, parallel to `critic_ids`.
#[allow(clippy::too_many_arguments)]
pub fn augmented_gain(
    critics: &CriticSet,
    critic_ids: &[usize],
    orig_losses: &[f64],
    ds: &Dataset,
    image: &Image,
    labels: &LabelVector,
    op: OperatorId,
    m_level: u8,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let partner_holder;
    let partner = if op == OperatorId::SamplePairing {
        if ds.is_empty() {
            return Err(Error::invalid("SamplePairing reward needs a non-empty partner pool"));
        }
        let idx = rng.gen_range(0..ds.len());
        partner_holder = ds.instances[idx].image.clone();
        Some(&partner_holder)
    } else {
        None
    };
    let aug = apply_operator(op, image, m_level, partner, rng)?;
    let mut delta = 0.0;
    for (&k, &orig) in critic_ids.iter().zip(orig_losses) {
        delta += orig - instance_loss(&critics.critics[k], &aug, labels)?;
    }
    Ok(delta / critic_ids.len() as f64)
}

/// Reward of a policy triple on one evaluation-set instance.
///
/// The operator is applied unconditionally by default; with `respects_p` the
/// calling probability is sampled and a skipped application scores zero.
pub fn reward(
    ds: &Dataset,
    instance_idx: usize,
    triple: &PolicyTriple,
    critics: &CriticSet,
    plan: &FoldPlan,
    respects_p: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let union = union_eval_set(plan);
    let pos = union
        .indices
        .binary_search(&instance_idx)
        .map_err(|_| Error::invalid(format!("instance {instance_idx} is not in the evaluation union")))?;
    let critic_ids = &union.critic_lists[pos];
    if respects_p {
        let u: f64 = rng.gen();
        if u >= triple.calling_probability() {
            return Ok(0.0);
        }
    }
    let inst = &ds.instances[instance_idx];
    let orig: Vec<f64> = critic_ids
        .iter()
        .map(|&k| instance_loss(&critics.critics[k], &inst.image, &inst.labels))
        .collect::<Result<Vec<_>>>()?;
    augmented_gain(critics, critic_ids, &orig, ds, &inst.image, &inst.labels, triple.op, triple.m_level, rng)
}

#[derive(Serialize, Deserialize)]
struct CriticIndex {
    version: u32,
    k: usize,
    files: Vec<String>,
    final_losses: Vec<f64>,
}

/// One checkpoint file per fold plus an index JSON.
pub fn save_critics(set: &CriticSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for (k, net) in set.critics.iter().enumerate() {
        let name = format!("critic_{k}.ckpt.json");
        save_checkpoint(net, &dir.join(&name))?;
        files.push(name);
    }
    let index = CriticIndex {
        version: 1,
        k: set.k(),
        files,
        final_losses: set.logs.iter().map(|l| l.epoch_loss.last().copied().unwrap_or(f64::NAN)).collect(),
    };
    std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)
        .map_err(|e| Error::io(dir.join("index.json"), e))
}

pub fn load_critics(dir: &Path) -> Result<CriticSet> {
    let index_path = dir.join("index.json");
    let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let index: CriticIndex = serde_json::from_str(&text)?;
    let mut critics = Vec::with_capacity(index.k);
    for name in &index.files {
        critics.push(load_checkpoint(&dir.join(name))?);
    }
    let logs = index.final_losses.iter().map(|&l| TrainLog { epoch_loss: vec![l] }).collect();
    Ok(CriticSet { critics, logs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitTag;
    use crate::folds::make_fold_plan;

    /// Tiny linearly separable set: label on = bright upper half.
    fn separable_ds(n: usize, seed: u64) -> Dataset {
        let mut instances = Vec::new();
        for i in 0..n {
            let mut rng = seeds::stream(seed, &[i as u64]);
            let on = rng.gen::<bool>();
            let mut img = Image::filled(8, 8, 0.3).unwrap();
            if on {
                for y in 0..4 {
                    for x in 0..8 {
                        for c in 0..3 {
                            img.set(y, x, c, 0.8 + 0.1 * rng.gen::<f64>());
                        }
                    }
                }
            }
            instances.push(Instance {
                id: format!("s{i}"),
                image: img,
                labels: LabelVector::new(vec![on as u8]).unwrap(),
            });
        }
        Dataset::new(instances, vec!["bright".into()], SplitTag::Train).unwrap()
    }

    fn mlp_settings() -> TrainSettings {
        TrainSettings { epochs: 60, batch_size: 16, hyper: OptHyper::sgd_momentum(0.1, 0.9, 1e-4) }
    }

    #[test]
    fn critics_learn_and_are_deterministic() {
        let ds = separable_ds(60, 1);
        let plan = make_fold_plan(&ds, 2, 0.8, 3).unwrap();
        let specs = ArchPreset::Mlp.build(8, 1);
        let set = train_critics(&ds, &plan, &specs, &mlp_settings(), 5).unwrap();
        assert_eq!(set.k(), 2);
        for log in &set.logs {
            let first = log.epoch_loss[0];
            let last = *log.epoch_loss.last().unwrap();
            assert!(last < first, "training did not reduce loss: {first} -> {last}");
        }
        let set2 = train_critics(&ds, &plan, &specs, &mlp_settings(), 5).unwrap();
        for (a, b) in set.critics.iter().zip(&set2.critics) {
            assert_eq!(a.param_vector(), b.param_vector());
        }
    }

    #[test]
    fn separable_toy_reaches_low_loss() {
        let ds = separable_ds(80, 2);
        let indices: Vec<usize> = (0..ds.len()).collect();
        let specs = ArchPreset::Mlp.build(8, 1);
        let settings =
            TrainSettings { epochs: 200, batch_size: 16, hyper: OptHyper::sgd_momentum(0.1, 0.9, 1e-4) };
        let (net, log) = train_classifier(&ds, &indices, &specs, &settings, 7, |_, _, inst| {
            Ok(inst.image.clone())
        })
        .unwrap();
        assert!(
            log.epoch_loss.iter().any(|l| *l < 0.1),
            "never reached BCE < 0.1 within 200 epochs: final {}",
            log.epoch_loss.last().unwrap()
        );
        let mut correct = 0;
        for inst in &ds.instances {
            let p = net.forward_eval(&inst.image.to_tensor()).unwrap();
            let pred = p.data()[0] > 0.5;
            if pred == inst.labels.get(0) {
                correct += 1;
            }
        }
        assert!(correct as f64 / ds.len() as f64 > 0.95);
    }

    #[test]
    fn instance_loss_trivial_values() {
        // A fixed network with huge positive logit for label on.
        let ds = separable_ds(20, 3);
        let specs = ArchPreset::Mlp.build(8, 1);
        let mut net = Network::init(&specs, 1).unwrap();
        // Zero all weights: logit 0 => probability 0.5 => loss = ln 2.
        for p in net.params_mut() {
            p.data_mut().fill(0.0);
        }
        let inst = &ds.instances[0];
        let loss = instance_loss(&net, &inst.image, &inst.labels).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn identity_triple_reward_is_exactly_zero() {
        let ds = separable_ds(40, 4);
        let plan = make_fold_plan(&ds, 2, 0.75, 9).unwrap();
        let specs = ArchPreset::Mlp.build(8, 1);
        let settings = TrainSettings { epochs: 5, batch_size: 16, hyper: OptHyper::sgd_momentum(0.05, 0.9, 0.0) };
        let set = train_critics(&ds, &plan, &specs, &settings, 11).unwrap();
        let union = union_eval_set(&plan);
        for op in [OperatorId::Rotate, OperatorId::Solarize, OperatorId::Cutout] {
            let triple = PolicyTriple::new(op, 10, 0).unwrap();
            for &idx in union.indices.iter().take(5) {
                let mut rng = seeds::stream(20, &[idx as u64]);
                let r = reward(&ds, idx, &triple, &set, &plan, false, &mut rng).unwrap();
                assert_eq!(r, 0.0, "identity reward for {}", op.name());
            }
        }
    }

    #[test]
    fn reward_requires_union_membership_and_averages_critics() {
        let ds = separable_ds(40, 5);
        let plan = make_fold_plan(&ds, 3, 0.75, 13).unwrap();
        let specs = ArchPreset::Mlp.build(8, 1);
        let settings = TrainSettings { epochs: 5, batch_size: 16, hyper: OptHyper::sgd_momentum(0.05, 0.9, 0.0) };
        let set = train_critics(&ds, &plan, &specs, &settings, 15).unwrap();
        let union = union_eval_set(&plan);

        // An instance in no A set: must error.
        let outside = (0..ds.len()).find(|i| union.indices.binary_search(i).is_err());
        if let Some(idx) = outside {
            let triple = PolicyTriple::new(OperatorId::Invert, 10, 5).unwrap();
            let mut rng = seeds::stream(1, &[]);
            assert!(reward(&ds, idx, &triple, &set, &plan, false, &mut rng).is_err());
        }

        // Mean over per-critic differences, checked by hand for one instance.
        let pos = union.critic_lists.iter().position(|l| l.len() >= 2).expect("overlapping instance");
        let idx = union.indices[pos];
        let critic_ids = &union.critic_lists[pos];
        let triple = PolicyTriple::new(OperatorId::Invert, 10, 5).unwrap();
        let mut rng = seeds::stream(2, &[]);
        let got = reward(&ds, idx, &triple, &set, &plan, false, &mut rng).unwrap();

        let inst = &ds.instances[idx];
        let mut rng2 = seeds::stream(2, &[]);
        let aug = apply_operator(OperatorId::Invert, &inst.image, 5, None, &mut rng2).unwrap();
        let mut expect = 0.0;
        for &k in critic_ids {
            expect += instance_loss(&set.critics[k], &inst.image, &inst.labels).unwrap()
                - instance_loss(&set.critics[k], &aug, &inst.labels).unwrap();
        }
        expect /= critic_ids.len() as f64;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn reward_leaves_critics_frozen() {
        let ds = separable_ds(40, 6);
        let plan = make_fold_plan(&ds, 2, 0.75, 17).unwrap();
        let specs = ArchPreset::Mlp.build(8, 1);
        let settings = TrainSettings { epochs: 3, batch_size: 16, hyper: OptHyper::sgd_momentum(0.05, 0.9, 0.0) };
        let set = train_critics(&ds, &plan, &specs, &settings, 19).unwrap();
        let before: Vec<Vec<f64>> = set.critics.iter().map(Network::param_vector).collect();
        let union = union_eval_set(&plan);
        let triple = PolicyTriple::new(OperatorId::Rotate, 10, 7).unwrap();
        for &idx in union.indices.iter().take(10) {
            let mut rng = seeds::stream(3, &[idx as u64]);
            let _ = reward(&ds, idx, &triple, &set, &plan, false, &mut rng).unwrap();
        }
        let after: Vec<Vec<f64>> = set.critics.iter().map(Network::param_vector).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn save_load_critics_round_trip() {
        let ds = separable_ds(30, 7);
        let plan = make_fold_plan(&ds, 2, 0.8, 21).unwrap();
        let specs = ArchPreset::Mlp.build(8, 1);
        let settings = TrainSettings { epochs: 2, batch_size: 16, hyper: OptHyper::sgd_momentum(0.05, 0.9, 0.0) };
        let set = train_critics(&ds, &plan, &specs, &settings, 23).unwrap();
        let dir = std::env::temp_dir().join("lbaug_critics");
        let _ = std::fs::remove_dir_all(&dir);
        let loaded = {
            save_critics(&set, &dir).unwrap();
            load_critics(&dir).unwrap()
        };
        assert_eq!(loaded.k(), set.k());
        for (a, b) in set.critics.iter().zip(&loaded.critics) {
            assert_eq!(a.param_vector(), b.param_vector());
        }
    }
}
