//! Ignored-by-default measurement probes for tuning the planted dataset.
//! Run with: cargo test -p lbaug-core --test diagnostics -- --ignored --nocapture

use std::time::Instant;

use lbaug_core::actor::{actor_forward, train_actor, ActorMode};
use lbaug_core::augment::{PolicyTriple, ALL_OPERATORS};
use lbaug_core::critic::{train_critics, ArchPreset, TrainSettings};
use lbaug_core::data::{generate_synthetic, LabelVector, OpVerdict, SensitivitySpec};
use lbaug_core::folds::{make_fold_plan, union_eval_set};
use lbaug_core::metrics::mean_accuracy;
use lbaug_core::nn::OptHyper;
use lbaug_core::pipeline::{
    actor_config_for, brute_force_oracle, evaluate_classifier, expected_reward,
    train_final_classifier, PolicyEngine, PolicySource, RunConfig,
};
use lbaug_core::{critic, seeds};

fn light_settings(epochs: usize) -> TrainSettings {
    TrainSettings { epochs, batch_size: 32, hyper: OptHyper::sgd_momentum(0.05, 0.9, 1e-4) }
}

#[test]
#[ignore]
fn probe_reward_soundness() {
    let spec = SensitivitySpec::default_planted();
    let t0 = Instant::now();
    let (train, _valid) = generate_synthetic(&spec, 800, 100, 32, 11).unwrap();
    println!("generate: {:?}", t0.elapsed());

    for epochs in [4usize, 8, 16] {
        let plan = make_fold_plan(&train, 2, 0.8, 13).unwrap();
        let specs = ArchPreset::LightConv.build(32, 6);
        let t0 = Instant::now();
        let critics = train_critics(&train, &plan, &specs, &light_settings(epochs), 17).unwrap();
        println!(
            "\n=== critic epochs {epochs}: {:?}; final losses {:?}",
            t0.elapsed(),
            critics.logs.iter().map(|l| *l.epoch_loss.last().unwrap()).collect::<Vec<_>>()
        );

        let union = union_eval_set(&plan);
        for lab in 0..6 {
            let query = LabelVector::one_hot(6, lab);
            let slots: Vec<usize> = (0..union.indices.len())
                .filter(|&p| train.instances[union.indices[p]].labels == query)
                .take(24)
                .collect();
            let mut rows: Vec<(String, f64)> = Vec::new();
            for op in ALL_OPERATORS {
                let mark = match spec.verdict(lab, op) {
                    OpVerdict::Beneficial => "B",
                    OpVerdict::Harmful => "H",
                    OpVerdict::Neutral => " ",
                };
                let mut total = 0.0;
                let mut count = 0;
                for (si, &pos) in slots.iter().enumerate() {
                    let idx = union.indices[pos];
                    for mc in 0..4u64 {
                        let mut rng =
                            seeds::stream(23, &[lab as u64, op.code() as u64, si as u64, mc]);
                        let triple = PolicyTriple::new(op, 10, 5).unwrap();
                        total += critic::reward(&train, idx, &triple, &critics, &plan, false, &mut rng)
                            .unwrap();
                        count += 1;
                    }
                }
                rows.push((format!("{}{}", mark, op.name()), total / count as f64));
            }
            rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let line: Vec<String> =
                rows.iter().take(8).map(|(n, v)| format!("{n}:{v:+.4}")).collect();
            println!("label {lab} ({}): {}", slots.len(), line.join(" "));
        }
    }
}

#[test]
#[ignore]
fn probe_oracle_and_actor() {
    let spec = SensitivitySpec::default_planted();
    let (train, _valid) = generate_synthetic(&spec, 1200, 100, 32, 21).unwrap();
    let plan = make_fold_plan(&train, 2, 0.8, 23).unwrap();
    let specs = ArchPreset::LightConv.build(32, 6);
    let critics = train_critics(&train, &plan, &specs, &light_settings(12), 27).unwrap();

    let queries: Vec<LabelVector> = (0..6).map(|l| LabelVector::one_hot(6, l)).collect();
    let t0 = Instant::now();
    let oracle = brute_force_oracle(&train, &plan, &critics, &queries, 2, 20, false, 29).unwrap();
    println!("oracle: {:?}", t0.elapsed());
    for (lab, q) in oracle.queries.iter().enumerate() {
        let ranked = q.ranked_ops();
        println!(
            "label {lab}: best {} r={:+.4}; top5: {}",
            q.best,
            q.best_reward,
            ranked
                .iter()
                .take(5)
                .map(|(op, g)| format!("{}:{:+.4}", op.name(), g))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }

    let mut cfg = RunConfig::desk_default(31);
    cfg.actor.epochs = 20;
    let actor_cfg = actor_config_for(&cfg, &PolicySource::LbaugH);
    let t0 = Instant::now();
    let (net, log) = train_actor(&train, &plan, &critics, &actor_cfg).unwrap();
    println!(
        "actor ({} epochs): {:?}; rewards {:?}",
        actor_cfg.epochs,
        t0.elapsed(),
        log.mean_reward_per_epoch.iter().map(|r| format!("{r:+.3}")).collect::<Vec<_>>()
    );
    for (lab, q) in oracle.queries.iter().enumerate() {
        let dist = actor_forward(&net, &queries[lab], ActorMode::H, 9).unwrap();
        let er = expected_reward(&dist, q, false);
        let top_op = dist
            .pi_op
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        println!(
            "label {lab}: E[R]={:+.4} vs best {:+.4} (ratio {:.2}); actor top op {} p={:.2}",
            er,
            q.best_reward,
            er / q.best_reward,
            ALL_OPERATORS[top_op.0].name(),
            top_op.1
        );
    }
}

#[test]
#[ignore]
fn probe_end_to_end_headroom() {
    let spec = SensitivitySpec::default_planted();
    let (train, valid) = generate_synthetic(&spec, 700, 400, 32, 41).unwrap();
    let settings = light_settings(12);

    let t0 = Instant::now();
    let (base_net, _) =
        train_final_classifier(&train, ArchPreset::LightConv, &settings, 43, &PolicyEngine::None)
            .unwrap();
    println!("final baseline train: {:?}", t0.elapsed());
    let base_preds = evaluate_classifier(&base_net, &valid).unwrap();
    let (base_ma, base_per) = mean_accuracy(&base_preds).unwrap();
    let train_preds = evaluate_classifier(&base_net, &train).unwrap();
    let (train_ma, _) = mean_accuracy(&train_preds).unwrap();
    println!("baseline: train mA {train_ma:.4}, valid mA {base_ma:.4}");
    println!(
        "baseline per-label valid mA: {:?}",
        base_per.iter().map(|m| format!("{:.3}", m.unwrap())).collect::<Vec<_>>()
    );

    // Per-label (b)-deltas for every op at p=1, m=5 against the baseline.
    println!("\nper-(op,label) valid mA delta (x100), planted B/H marked:");
    for op in ALL_OPERATORS {
        let triple = PolicyTriple::new(op, 10, 5).unwrap();
        let (net, _) = train_final_classifier(
            &train,
            ArchPreset::LightConv,
            &settings,
            43,
            &PolicyEngine::Fixed(triple),
        )
        .unwrap();
        let preds = evaluate_classifier(&net, &valid).unwrap();
        let (_, per) = mean_accuracy(&preds).unwrap();
        let mut cells = Vec::new();
        for lab in 0..6 {
            let delta = per[lab].unwrap() - base_per[lab].unwrap();
            let mark = match spec.verdict(lab, op) {
                OpVerdict::Beneficial => "B",
                OpVerdict::Harmful => "H",
                OpVerdict::Neutral => "",
            };
            cells.push(format!("{lab}{mark}:{:+.1}", delta * 100.0));
        }
        println!("  {:>13}: {}", op.name(), cells.join("  "));
    }
}
