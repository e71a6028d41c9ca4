use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actor::{
    actor_forward, export_policy_table, sample_action, train_actor, ActorConfig, ActorMode, LabelInput,
    PolicyTableRow,
};
use crate::augment::{apply_policy, OperatorId, PolicyTriple, NUM_M_LEVELS, NUM_OPERATORS, NUM_P_LEVELS};
use crate::critic::{save_critics, train_classifier, train_critics, ArchPreset, TrainLog, TrainSettings};
use crate::data::{generate_synthetic, load_dataset, Dataset, Image, Instance, LabelVector};
use crate::error::{Error, Result};
use crate::folds::make_fold_plan;
use crate::metrics::{compute_all, MetricReport, PredictionSet};
use crate::nn::{save_checkpoint, Network};
use crate::pipeline::config::{PolicySource, RunConfig};
use crate::pipeline::report::{RunReport, StageArtifacts};
use crate::seeds;
use rand::Rng;

/// Train/valid pair after the data stage.
pub struct PreparedData {
    pub train: Dataset,
    pub valid: Dataset,
}

pub fn resolve_data(cfg: &RunConfig) -> Result<PreparedData> {
    if let Some(dir) = &cfg.dataset_dir {
        let train = load_dataset(&dir.join("train"))?;
        let valid = load_dataset(&dir.join("valid"))?;
        if train.num_labels() != valid.num_labels() {
            return Err(Error::invalid("train and valid disagree on label count"));
        }
        return Ok(PreparedData { train, valid });
    }
    let gen = cfg.generator.as_ref().ok_or_else(|| Error::invalid("no data source configured"))?;
    let (train, valid) =
        generate_synthetic(&gen.spec, gen.n_train, gen.n_valid, gen.image_size, cfg.seed)?;
    Ok(PreparedData { train, valid })
}

/// How the final classifier's per-instance, per-epoch augmentation is sampled.
pub enum PolicyEngine<'a> {
    None,
    Random,
    Fixed(PolicyTriple),
    Actor { net: &'a Network, mode: ActorMode, fixed_m_level: u8, label_input: LabelInput },
}

impl PolicyEngine<'_> {
    /// Fresh triple draw and application for one instance in one epoch.
    pub fn augment(
        &self,
        pool: &Dataset,
        run_seed: u64,
        epoch: usize,
        idx: usize,
        inst: &Instance,
    ) -> Result<Image> {
        let mut rng = seeds::stream(run_seed, &[0xf1a, epoch as u64, idx as u64]);
        match self {
            PolicyEngine::None => Ok(inst.image.clone()),
            PolicyEngine::Random => {
                let triple = PolicyTriple {
                    op: OperatorId::from_code(rng.gen_range(0..NUM_OPERATORS))?,
                    p_level: rng.gen_range(0..NUM_P_LEVELS) as u8,
                    m_level: rng.gen_range(0..NUM_M_LEVELS) as u8,
                };
                apply_policy(&triple, &inst.image, pool, &mut rng)
            }
            PolicyEngine::Fixed(triple) => apply_policy(triple, &inst.image, pool, &mut rng),
            PolicyEngine::Actor { net, mode, fixed_m_level, label_input } => {
                let query = match label_input {
                    LabelInput::Labels => inst.labels.clone(),
                    LabelInput::Ones => LabelVector::ones(inst.labels.len()),
                };
                let dist = actor_forward(net, &query, *mode, *fixed_m_level)?;
                let (triple, _) = sample_action(&dist, &mut rng);
                apply_policy(&triple, &inst.image, pool, &mut rng)
            }
        }
    }
}

/// Trains the final classifier over the full training set with the engine's
/// label-based augmentation sampled fresh per instance per epoch.
pub fn train_final_classifier(
    train: &Dataset,
    arch: ArchPreset,
    settings: &TrainSettings,
    seed: u64,
    engine: &PolicyEngine<'_>,
) -> Result<(Network, TrainLog)> {
    let image_size = train.instances[0].image.width();
    let specs = arch.build(image_size, train.num_labels());
    let indices: Vec<usize> = (0..train.len()).collect();
    train_classifier(train, &indices, &specs, settings, seed, |epoch, idx, inst| {
        engine.augment(train, seed, epoch, idx, inst)
    })
}

/// Eval-mode predictions of a classifier over a dataset.
pub fn evaluate_classifier(net: &Network, ds: &Dataset) -> Result<PredictionSet> {
    let l = ds.num_labels();
    let rows: Vec<Result<Vec<f64>>> = ds
        .instances
        .par_iter()
        .map(|inst| {
            let out = net.forward_eval(&inst.image.to_tensor())?;
            Ok(out.data().to_vec())
        })
        .collect();
    let mut scores = Vec::with_capacity(ds.len() * l);
    let mut targets = Vec::with_capacity(ds.len() * l);
    for (inst, row) in ds.instances.iter().zip(rows) {
        scores.extend(row?);
        targets.extend_from_slice(inst.labels.bits());
    }
    PredictionSet::new(scores, targets, ds.len(), l)
}

/// Actor settings derived from the run config for a given policy source.
pub fn actor_config_for(cfg: &RunConfig, source: &PolicySource) -> ActorConfig {
    let mut actor = cfg.actor.clone();
    actor.mode = source.actor_mode().unwrap_or(ActorMode::H);
    actor.label_input = if *source == PolicySource::LabelAgnostic {
        LabelInput::Ones
    } else {
        LabelInput::Labels
    };
    actor.seed = seeds::derive(cfg.seed, &[0xac7e]);
    actor
}

/// Single-label queries plus the all-ones signature, for policy table export.
pub fn default_policy_queries(num_labels: usize) -> Vec<LabelVector> {
    let mut queries: Vec<LabelVector> =
        (0..num_labels).map(|l| LabelVector::one_hot(num_labels, l)).collect();
    queries.push(LabelVector::ones(num_labels));
    queries
}

pub fn write_policy_csv(rows: &[PolicyTableRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["label_bits".to_string()];
    for op in crate::augment::ALL_OPERATORS {
        header.push(format!("prob_{}", op.name()));
        header.push(format!("p_{}", op.name()));
        header.push(format!("m_{}", op.name()));
    }
    writer.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.label_bits.clone()];
        for j in 0..NUM_OPERATORS {
            record.push(format!("{:.6}", row.op_probs[j]));
            record.push(row.argmax_p[j].to_string());
            record.push(row.argmax_m[j].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Executes the full workflow for the configured policy source and writes
/// artifacts under `cfg.out_dir` as stages complete.
pub fn run_full(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    if let Some(out) = &cfg.out_dir {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    }

    let data = resolve_data(cfg).map_err(|e| e.in_stage("data"))?;
    let mut stages = StageArtifacts {
        n_train: data.train.len(),
        n_valid: data.valid.len(),
        ..Default::default()
    };

    let mut actor_net: Option<Network> = None;
    if cfg.policy_source.needs_actor() {
        let plan = make_fold_plan(&data.train, cfg.k, cfg.ratio, seeds::derive(cfg.seed, &[0xf0]))
            .map_err(|e| e.in_stage("folds"))?;
        stages.union_size = Some(crate::folds::union_eval_set(&plan).len());

        let critic_specs = cfg.critic_arch.build(data.train.instances[0].image.width(), data.train.num_labels());
        let critics = train_critics(
            &data.train,
            &plan,
            &critic_specs,
            &cfg.critic_train,
            seeds::derive(cfg.seed, &[0xc1]),
        )
        .map_err(|e| e.in_stage("critics"))?;
        stages.critic_final_losses =
            critics.logs.iter().map(|l| l.epoch_loss.last().copied().unwrap_or(f64::NAN)).collect();
        if let Some(out) = &cfg.out_dir {
            save_critics(&critics, &out.join("critics")).map_err(|e| e.in_stage("critics"))?;
        }

        let actor_cfg = actor_config_for(cfg, &cfg.policy_source);
        let (net, log) =
            train_actor(&data.train, &plan, &critics, &actor_cfg).map_err(|e| e.in_stage("actor"))?;
        stages.actor_mean_reward_per_epoch = log.mean_reward_per_epoch.clone();
        if let Some(out) = &cfg.out_dir {
            save_checkpoint(&net, &out.join("actor.ckpt.json")).map_err(|e| e.in_stage("actor"))?;
            let sidecar = serde_json::to_string_pretty(&actor_cfg)?;
            std::fs::write(out.join("actor_config.json"), sidecar)
                .map_err(|e| Error::io(out.join("actor_config.json"), e).in_stage("actor"))?;
            let queries = default_policy_queries(data.train.num_labels());
            let rows = export_policy_table(&net, &queries, actor_cfg.mode, actor_cfg.fixed_m_level)?;
            write_policy_csv(&rows, &out.join("policy_table.csv")).map_err(|e| e.in_stage("actor"))?;
        }
        actor_net = Some(net);
    }

    let actor_cfg = actor_config_for(cfg, &cfg.policy_source);
    let engine = match (&cfg.policy_source, &actor_net) {
        (PolicySource::None, _) => PolicyEngine::None,
        (PolicySource::Random, _) => PolicyEngine::Random,
        (PolicySource::Fixed(t), _) => PolicyEngine::Fixed(*t),
        (_, Some(net)) => PolicyEngine::Actor {
            net,
            mode: actor_cfg.mode,
            fixed_m_level: actor_cfg.fixed_m_level,
            label_input: actor_cfg.label_input,
        },
        _ => unreachable!("actor sources trained above"),
    };

    let (final_net, final_log) = train_final_classifier(
        &data.train,
        cfg.final_arch,
        &cfg.final_train,
        seeds::derive(cfg.seed, &[0xfe]),
        &engine,
    )
    .map_err(|e| e.in_stage("final"))?;
    stages.final_train_loss = final_log.epoch_loss.clone();
    if let Some(out) = &cfg.out_dir {
        save_checkpoint(&final_net, &out.join("final.ckpt.json")).map_err(|e| e.in_stage("final"))?;
    }

    let preds = evaluate_classifier(&final_net, &data.valid).map_err(|e| e.in_stage("eval"))?;
    let metrics = compute_all(&preds, &data.valid.label_names).map_err(|e| e.in_stage("eval"))?;

    let report = RunReport { config: cfg.clone(), stages, metrics };
    if let Some(out) = &cfg.out_dir {
        report.save(&out.join("report.json")).map_err(|e| e.in_stage("report"))?;
    }
    Ok(report)
}

/// Identical protocol with the policy source swapped.
pub fn run_baseline(cfg: &RunConfig, kind: &PolicySource) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    cfg.policy_source = kind.clone();
    run_full(&cfg)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferReport {
    pub arch: ArchPreset,
    pub with_policy: MetricReport,
    pub baseline: MetricReport,
    /// mA gain of the frozen policy over the no-augmentation baseline.
    pub delta_ma: f64,
}

/// Trains a classifier of a different architecture with a frozen actor's
/// policies and compares against that architecture's no-augmentation baseline.
pub fn transfer_policy(
    actor: &Network,
    actor_mode: ActorMode,
    fixed_m_level: u8,
    alt_arch: ArchPreset,
    cfg: &RunConfig,
) -> Result<TransferReport> {
    let data = resolve_data(cfg).map_err(|e| e.in_stage("data"))?;
    let expected_width = crate::actor::ACTOR_OUTPUT_WIDTH;
    let probe = actor_forward(actor, &LabelVector::zeros(data.train.num_labels()), actor_mode, fixed_m_level);
    if probe.is_err() {
        return Err(Error::invalid(format!(
            "actor checkpoint incompatible with label count {} (expects {expected_width}-wide output)",
            data.train.num_labels()
        )));
    }

    let engine = PolicyEngine::Actor {
        net: actor,
        mode: actor_mode,
        fixed_m_level,
        label_input: LabelInput::Labels,
    };
    let seed = seeds::derive(cfg.seed, &[0x7a]);
    let (with_net, _) =
        train_final_classifier(&data.train, alt_arch, &cfg.final_train, seed, &engine)
            .map_err(|e| e.in_stage("transfer-final"))?;
    let (base_net, _) =
        train_final_classifier(&data.train, alt_arch, &cfg.final_train, seed, &PolicyEngine::None)
            .map_err(|e| e.in_stage("transfer-baseline"))?;

    let with_policy = compute_all(&evaluate_classifier(&with_net, &data.valid)?, &data.valid.label_names)?;
    let baseline = compute_all(&evaluate_classifier(&base_net, &data.valid)?, &data.valid.label_names)?;
    let delta_ma = with_policy.ma - baseline.ma;
    Ok(TransferReport { arch: alt_arch, with_policy, baseline, delta_ma })
}
