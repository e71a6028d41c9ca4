use std::path::Path;

use crate::augment::{PolicyTriple, ALL_OPERATORS};
use crate::critic::TrainSettings;
use crate::error::{Error, Result};
use crate::metrics::{mean_accuracy, LabelStudyTable, StudyRow, StudyVerdict};
use crate::pipeline::config::RunConfig;
use crate::pipeline::run::{evaluate_classifier, resolve_data, train_final_classifier, PolicyEngine};
use crate::seeds;

/// Per-label gain/drop study: for each operator, trains a final classifier
/// with that operator always applied (p=1) at the configured mid magnitude,
/// and compares per-label balanced accuracy against a no-augmentation
/// baseline. Deltas are averaged over `cfg.study_seeds`.
pub fn label_study_run(cfg: &RunConfig, delta_threshold: f64) -> Result<LabelStudyTable> {
    let seeds_list = cfg.study_seed_list();
    if seeds_list.is_empty() {
        return Err(Error::invalid("label study needs at least one seed"));
    }
    let settings: TrainSettings = cfg.final_train;
    let mut sum_delta: Vec<Vec<f64>> = vec![vec![]; ALL_OPERATORS.len()];
    let mut label_names: Vec<String> = Vec::new();

    for (si, &seed) in seeds_list.iter().enumerate() {
        let mut seed_cfg = cfg.clone();
        seed_cfg.seed = seed;
        let data = resolve_data(&seed_cfg).map_err(|e| e.in_stage("study-data"))?;
        label_names = data.valid.label_names.clone();

        let base_seed = seeds::derive(seed, &[0x57, si as u64]);
        let (base_net, _) = train_final_classifier(
            &data.train,
            cfg.final_arch,
            &settings,
            base_seed,
            &PolicyEngine::None,
        )
        .map_err(|e| e.in_stage("study-baseline"))?;
        let base_preds = evaluate_classifier(&base_net, &data.valid)?;
        let (_, base_ma) = mean_accuracy(&base_preds)?;

        for (oi, op) in ALL_OPERATORS.iter().enumerate() {
            let triple = PolicyTriple::new(*op, 10, cfg.study_m_level)?;
            let (net, _) = train_final_classifier(
                &data.train,
                cfg.final_arch,
                &settings,
                base_seed,
                &PolicyEngine::Fixed(triple),
            )
            .map_err(|e| e.in_stage(&format!("study-{}", op.name())))?;
            let preds = evaluate_classifier(&net, &data.valid)?;
            let (_, op_ma) = mean_accuracy(&preds)?;
            let deltas: Vec<f64> = base_ma
                .iter()
                .zip(&op_ma)
                .map(|(b, o)| match (b, o) {
                    (Some(b), Some(o)) => o - b,
                    _ => f64::NAN,
                })
                .collect();
            if sum_delta[oi].is_empty() {
                sum_delta[oi] = deltas;
            } else {
                for (acc, d) in sum_delta[oi].iter_mut().zip(deltas) {
                    *acc += d;
                }
            }
        }
    }

    let n_seeds = seeds_list.len() as f64;
    let mut rows = Vec::new();
    for (oi, op) in ALL_OPERATORS.iter().enumerate() {
        for (lab, name) in label_names.iter().enumerate() {
            let delta = sum_delta[oi][lab] / n_seeds;
            if delta.is_nan() {
                continue;
            }
            let verdict = if delta > delta_threshold {
                StudyVerdict::Positive
            } else if delta < -delta_threshold {
                StudyVerdict::Negative
            } else {
                StudyVerdict::Neutral
            };
            rows.push(StudyRow { operator: *op, label: name.clone(), delta, verdict });
        }
    }
    Ok(LabelStudyTable { delta_threshold, rows })
}

/// `operator,label,delta,verdict` rows.
pub fn write_study_csv(table: &LabelStudyTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["operator", "label", "delta", "verdict"])?;
    for row in &table.rows {
        writer.write_record([
            row.operator.name(),
            &row.label,
            &format!("{:.6}", row.delta),
            &row.verdict.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
