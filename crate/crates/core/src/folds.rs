//! K independent stratified splits of the training set and their union.
//!
//! Each fold is a full split into a critic-training segment `M` and a
//! policy-evaluation segment `A` with `|A| = ceil((1-ratio)*N)`. Splits are
//! produced by iterative multi-label stratification: labels are processed from
//! rarest to most frequent and their instances greedily assigned to whichever
//! segment has the largest remaining per-label demand. Fold `k` depends only on
//! `(seed, k)`, so a plan with more folds extends a smaller plan prefix-wise
//! and the unioned evaluation set never shrinks as folds are added.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seeds;

/// One stratified split into critic-training (`m`) and evaluation (`a`) indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub m: Vec<usize>,
    pub a: Vec<usize>,
}

/// K segmentations plus the parameters that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub ratio: f64,
    pub seed: u64,
    pub folds: Vec<Fold>,
    n: usize,
}

/// The unioned evaluation set with per-instance critic correspondence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnionEvalSet {
    /// Sorted dataset indices belonging to at least one `A_k`.
    pub indices: Vec<usize>,
    /// For each member of `indices`: the folds whose `A` set contains it.
    pub critic_lists: Vec<Vec<usize>>,
}

impl UnionEvalSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The first `k` folds as a plan of their own. Folds depend only on
    /// `(seed, fold_idx)`, so this equals `make_fold_plan` with the smaller K.
    pub fn prefix(&self, k: usize) -> FoldPlan {
        assert!(k >= 1 && k <= self.k, "prefix K out of range");
        FoldPlan { k, ratio: self.ratio, seed: self.seed, folds: self.folds[..k].to_vec(), n: self.n }
    }
}

/// Builds K independent stratified shuffles.
pub fn make_fold_plan(ds: &Dataset, k: usize, ratio: f64, seed: u64) -> Result<FoldPlan> {
    let n = ds.len();
    if k < 1 {
        return Err(Error::invalid("fold count must be at least 1"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0,1)")));
    }
    if n < 10 {
        return Err(Error::invalid(format!("dataset of {n} instances too small to split")));
    }
    let l = ds.num_labels();
    let mut counts = vec![0usize; l];
    for inst in &ds.instances {
        for (c, b) in counts.iter_mut().zip(inst.labels.bits()) {
            *c += *b as usize;
        }
    }
    if let Some(label) = counts.iter().position(|&c| c == 1) {
        return Err(Error::invalid(format!(
            "label {label} (`{}`) has fewer than 2 positives; cannot stratify",
            ds.label_names[label]
        )));
    }

    let a_size = ((1.0 - ratio) * n as f64).ceil() as usize;
    let folds: Vec<Fold> =
        (0..k).map(|fold_idx| stratified_split(ds, &counts, a_size, seed, fold_idx as u64)).collect();
    Ok(FoldPlan { k, ratio, seed, folds, n })
}

fn stratified_split(ds: &Dataset, counts: &[usize], a_size: usize, seed: u64, fold: u64) -> Fold {
    let n = ds.len();
    let l = ds.num_labels();
    let m_size = n - a_size;
    let mut rng = seeds::stream(seed, &[0xf01d, fold]);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // Position of each instance in the shuffled visiting order.
    let mut rank = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        rank[idx] = pos;
    }

    let frac_a = a_size as f64 / n as f64;
    let mut desired_a: Vec<f64> = counts.iter().map(|&c| c as f64 * frac_a).collect();
    let mut desired_m: Vec<f64> = counts.iter().zip(&desired_a).map(|(&c, da)| c as f64 - da).collect();
    let mut cap_a = a_size;
    let mut cap_m = m_size;
    let mut assigned: Vec<Option<bool>> = vec![None; n]; // Some(true) => A

    // Unassigned positives remaining per label.
    let mut remaining: Vec<usize> = counts.to_vec();

    loop {
        // Rarest label that still has unassigned positives.
        let next = (0..l)
            .filter(|&lab| remaining[lab] > 0)
            .min_by_key(|&lab| (remaining[lab], lab));
        let Some(lab) = next else { break };
        let mut members: Vec<usize> = (0..n)
            .filter(|&i| assigned[i].is_none() && ds.instances[i].labels.get(lab))
            .collect();
        members.sort_by_key(|&i| rank[i]);
        for i in members {
            let to_a = pick_group(&mut rng, desired_a[lab], desired_m[lab], cap_a, cap_m);
            assigned[i] = Some(to_a);
            if to_a {
                cap_a -= 1;
            } else {
                cap_m -= 1;
            }
            for (lab2, bit) in ds.instances[i].labels.bits().iter().enumerate() {
                if *bit == 1 {
                    remaining[lab2] -= 1;
                    if to_a {
                        desired_a[lab2] -= 1.0;
                    } else {
                        desired_m[lab2] -= 1.0;
                    }
                }
            }
        }
    }

    // Label-free leftovers: fill by remaining capacity.
    for &i in &order {
        if assigned[i].is_some() {
            continue;
        }
        let to_a = pick_group(&mut rng, cap_a as f64, cap_m as f64, cap_a, cap_m);
        assigned[i] = Some(to_a);
        if to_a {
            cap_a -= 1;
        } else {
            cap_m -= 1;
        }
    }

    let mut fold_out = Fold { m: Vec::with_capacity(m_size), a: Vec::with_capacity(a_size) };
    for (i, grp) in assigned.iter().enumerate() {
        if grp.expect("all instances assigned") {
            fold_out.a.push(i);
        } else {
            fold_out.m.push(i);
        }
    }
    fold_out
}

fn pick_group(rng: &mut rand_chacha::ChaCha8Rng, want_a: f64, want_m: f64, cap_a: usize, cap_m: usize) -> bool {
    if cap_a == 0 {
        return false;
    }
    if cap_m == 0 {
        return true;
    }
    if (want_a - want_m).abs() > 1e-9 {
        want_a > want_m
    } else if cap_a != cap_m {
        cap_a > cap_m
    } else {
        rng.gen::<bool>()
    }
}

/// Union of all `A_k` with the fold list each instance can be scored by.
pub fn union_eval_set(plan: &FoldPlan) -> UnionEvalSet {
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); plan.n];
    for (k, fold) in plan.folds.iter().enumerate() {
        for &i in &fold.a {
            lists[i].push(k);
        }
    }
    let mut indices = Vec::new();
    let mut critic_lists = Vec::new();
    for (i, list) in lists.into_iter().enumerate() {
        if !list.is_empty() {
            indices.push(i);
            critic_lists.push(list);
        }
    }
    UnionEvalSet { indices, critic_lists }
}

#[derive(Serialize, Deserialize)]
struct FoldFile {
    #[serde(rename = "M")]
    m: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FoldPlanFile {
    #[serde(rename = "K")]
    k: usize,
    ratio: f64,
    seed: u64,
    folds: Vec<FoldFile>,
}

/// Persists the plan as JSON keyed by instance ids.
pub fn save_fold_plan(plan: &FoldPlan, ds: &Dataset, path: &Path) -> Result<()> {
    let id_of = |i: &usize| ds.instances[*i].id.clone();
    let file = FoldPlanFile {
        k: plan.k,
        ratio: plan.ratio,
        seed: plan.seed,
        folds: plan
            .folds
            .iter()
            .map(|f| FoldFile { m: f.m.iter().map(id_of).collect(), a: f.a.iter().map(id_of).collect() })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_fold_plan(path: &Path, ds: &Dataset) -> Result<FoldPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FoldPlanFile = serde_json::from_str(&text)?;
    let index_of: std::collections::HashMap<&str, usize> =
        ds.instances.iter().enumerate().map(|(i, inst)| (inst.id.as_str(), i)).collect();
    let resolve = |ids: &[String]| -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                index_of.get(id.as_str()).copied().ok_or_else(|| Error::Instance {
                    id: id.clone(),
                    reason: "fold plan references an id not in the dataset".into(),
                })
            })
            .collect()
    };
    let mut folds = Vec::with_capacity(file.folds.len());
    for f in &file.folds {
        folds.push(Fold { m: resolve(&f.m)?, a: resolve(&f.a)? });
    }
    Ok(FoldPlan { k: file.k, ratio: file.ratio, seed: file.seed, folds, n: ds.len() })
}
