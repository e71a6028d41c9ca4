use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actor::train_actor;
use crate::critic::train_critics;
use crate::error::{Error, Result};
use crate::folds::{make_fold_plan, union_eval_set};
use crate::metrics::compute_all;
use crate::pipeline::config::{PolicySource, RunConfig};
use crate::pipeline::run::{
    actor_config_for, evaluate_classifier, resolve_data, train_final_classifier, PolicyEngine,
};
use crate::seeds;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Sweep coordinate: fold count K or actor depth.
    pub x: usize,
    /// Size of the unioned evaluation set (fold sweeps only).
    pub union_size: Option<usize>,
    /// Final-epoch mean sampled reward of the actor, averaged over seeds.
    pub mean_reward: f64,
    /// Final-classifier mA, averaged over seeds (when trained).
    pub ma: Option<f64>,
    /// Actor parameter count (depth sweeps only).
    pub param_count: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveReport {
    pub kind: String,
    pub seeds: Vec<u64>,
    pub points: Vec<CurvePoint>,
}

/// Actor stage per fold count with accumulating folds: critics for the
/// largest K are trained once per seed and each smaller K reuses the prefix,
/// so evaluation-union coverage is monotone along the sweep.
pub fn sweep_folds(cfg: &RunConfig, k_list: &[usize]) -> Result<CurveReport> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("K list must be non-empty and strictly ascending"));
    }
    let seeds_list = cfg.study_seed_list();
    let max_k = *k_list.last().unwrap();
    let mut acc: Vec<(usize, f64, f64, usize)> = k_list.iter().map(|&k| (k, 0.0, 0.0, 0)).collect();
    let mut any_ma = false;

    for &seed in &seeds_list {
        let mut seed_cfg = cfg.clone();
        seed_cfg.seed = seed;
        let data = resolve_data(&seed_cfg).map_err(|e| e.in_stage("sweep-data"))?;
        let plan_full = make_fold_plan(&data.train, max_k, cfg.ratio, seeds::derive(seed, &[0xf0]))
            .map_err(|e| e.in_stage("sweep-folds"))?;
        let critic_specs =
            cfg.critic_arch.build(data.train.instances[0].image.width(), data.train.num_labels());
        let critics_full = train_critics(
            &data.train,
            &plan_full,
            &critic_specs,
            &cfg.critic_train,
            seeds::derive(seed, &[0xc1]),
        )
        .map_err(|e| e.in_stage("sweep-critics"))?;

        for (slot, &k) in k_list.iter().enumerate() {
            let plan = plan_full.prefix(k);
            let critics = critics_full.prefix(k);
            let actor_cfg = actor_config_for(&seed_cfg, &PolicySource::LbaugH);
            let (net, log) = train_actor(&data.train, &plan, &critics, &actor_cfg)
                .map_err(|e| e.in_stage(&format!("sweep-actor-K{k}")))?;
            let reward = *log.mean_reward_per_epoch.last().unwrap_or(&f64::NAN);
            acc[slot].1 += reward;
            acc[slot].3 = union_eval_set(&plan).len();

            if cfg.sweep_train_final {
                let engine = PolicyEngine::Actor {
                    net: &net,
                    mode: actor_cfg.mode,
                    fixed_m_level: actor_cfg.fixed_m_level,
                    label_input: actor_cfg.label_input,
                };
                let (fnet, _) = train_final_classifier(
                    &data.train,
                    cfg.final_arch,
                    &cfg.final_train,
                    seeds::derive(seed, &[0xfe, k as u64]),
                    &engine,
                )
                .map_err(|e| e.in_stage(&format!("sweep-final-K{k}")))?;
                let metrics =
                    compute_all(&evaluate_classifier(&fnet, &data.valid)?, &data.valid.label_names)?;
                acc[slot].2 += metrics.ma;
                any_ma = true;
            }
        }
    }

    let n = seeds_list.len() as f64;
    let points = acc
        .into_iter()
        .map(|(k, reward, ma, union)| CurvePoint {
            x: k,
            union_size: Some(union),
            mean_reward: reward / n,
            ma: if any_ma { Some(ma / n) } else { None },
            param_count: None,
        })
        .collect();
    Ok(CurveReport { kind: "folds".into(), seeds: seeds_list, points })
}

/// Final-classifier quality as a function of actor depth, critics shared per seed.
pub fn sweep_actor_depth(cfg: &RunConfig, depths: &[usize]) -> Result<CurveReport> {
    if depths.is_empty() || depths.iter().any(|d| !(2..=5).contains(d)) {
        return Err(Error::invalid("depth list must be non-empty within [2,5]"));
    }
    let seeds_list = cfg.study_seed_list();
    let mut acc: Vec<(usize, f64, f64, usize)> = depths.iter().map(|&d| (d, 0.0, 0.0, 0)).collect();

    for &seed in &seeds_list {
        let mut seed_cfg = cfg.clone();
        seed_cfg.seed = seed;
        let data = resolve_data(&seed_cfg).map_err(|e| e.in_stage("sweep-data"))?;
        let plan = make_fold_plan(&data.train, cfg.k, cfg.ratio, seeds::derive(seed, &[0xf0]))
            .map_err(|e| e.in_stage("sweep-folds"))?;
        let critic_specs =
            cfg.critic_arch.build(data.train.instances[0].image.width(), data.train.num_labels());
        let critics = train_critics(
            &data.train,
            &plan,
            &critic_specs,
            &cfg.critic_train,
            seeds::derive(seed, &[0xc1]),
        )
        .map_err(|e| e.in_stage("sweep-critics"))?;

        for (slot, &depth) in depths.iter().enumerate() {
            let mut actor_cfg = actor_config_for(&seed_cfg, &PolicySource::LbaugH);
            actor_cfg.depth = depth;
            let (net, log) = train_actor(&data.train, &plan, &critics, &actor_cfg)
                .map_err(|e| e.in_stage(&format!("sweep-actor-depth{depth}")))?;
            acc[slot].1 += *log.mean_reward_per_epoch.last().unwrap_or(&f64::NAN);
            acc[slot].3 = net.param_count();

            let engine = PolicyEngine::Actor {
                net: &net,
                mode: actor_cfg.mode,
                fixed_m_level: actor_cfg.fixed_m_level,
                label_input: actor_cfg.label_input,
            };
            let (fnet, _) = train_final_classifier(
                &data.train,
                cfg.final_arch,
                &cfg.final_train,
                seeds::derive(seed, &[0xfe, depth as u64]),
                &engine,
            )
            .map_err(|e| e.in_stage(&format!("sweep-final-depth{depth}")))?;
            let metrics =
                compute_all(&evaluate_classifier(&fnet, &data.valid)?, &data.valid.label_names)?;
            acc[slot].2 += metrics.ma;
        }
    }

    let n = seeds_list.len() as f64;
    let points = acc
        .into_iter()
        .map(|(d, reward, ma, params)| CurvePoint {
            x: d,
            union_size: None,
            mean_reward: reward / n,
            ma: Some(ma / n),
            param_count: Some(params),
        })
        .collect();
    Ok(CurveReport { kind: "depth".into(), seeds: seeds_list, points })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |vs: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vs.len()).collect();
        order.sort_by(|&a, &b| vs[a].partial_cmp(&vs[b]).expect("finite"));
        let mut ranks = vec![0.0; vs.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && vs[order[j + 1]] == vs[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &idx in &order[i..=j] {
                ranks[idx] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

pub fn write_curves_csv(report: &CurveReport, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["kind", "x", "union_size", "mean_reward", "mA", "param_count"])?;
    for p in &report.points {
        writer.write_record([
            report.kind.as_str(),
            &p.x.to_string(),
            &p.union_size.map(|u| u.to_string()).unwrap_or_default(),
            &format!("{:.8}", p.mean_reward),
            &p.ma.map(|m| format!("{m:.6}")).unwrap_or_default(),
            &p.param_count.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
