use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actor::PolicyDistribution;
use crate::augment::{OperatorId, PolicyTriple, NUM_M_LEVELS, NUM_OPERATORS, NUM_P_LEVELS};
use crate::critic::{augmented_gain, instance_loss, CriticSet};
use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::folds::{union_eval_set, FoldPlan};
use crate::seeds;

/// Exhaustive reward scan for one label signature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleQueryResult {
    pub query_bits: String,
    pub matching_instances: usize,
    pub best: PolicyTriple,
    pub best_reward: f64,
    /// Row-major 16x10 mean gains over (operator, m_level); the m=0 column is
    /// exactly zero by identity.
    pub op_m_gains: Vec<f64>,
}

impl OracleQueryResult {
    pub fn gain(&self, op: usize, m: usize) -> f64 {
        self.op_m_gains[op * NUM_M_LEVELS + m]
    }

    /// Reward of a full triple. Without the stochastic-p reading the reward is
    /// independent of the p level; with it the gain scales by `p`.
    pub fn reward_of(&self, op: usize, p_level: usize, m: usize, respects_p: bool) -> f64 {
        let core = self.gain(op, m);
        if respects_p {
            core * (p_level as f64 / 10.0)
        } else {
            core
        }
    }

    /// Operators ranked by their best non-identity gain (max over m >= 1).
    pub fn ranked_ops(&self) -> Vec<(OperatorId, f64)> {
        let mut scored: Vec<(OperatorId, f64)> = (0..NUM_OPERATORS)
            .map(|op| {
                let best = (1..NUM_M_LEVELS).map(|m| self.gain(op, m)).fold(f64::NEG_INFINITY, f64::max);
                (OperatorId::from_code(op).expect("code"), best)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite gains"));
        scored
    }
}

/// Per-signature optimal policies from brute force.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OraclePolicy {
    pub respects_p: bool,
    pub queries: Vec<OracleQueryResult>,
}

/// Scans every (operator, p_level, m_level) triple for each query signature.
///
/// Gains are averaged over up to `max_instances` matching evaluation-union
/// instances and `n_mc` seeded draws (random signs, cutout positions, pairing
/// partners). The identity column is exactly zero and not sampled.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_oracle(
    ds: &Dataset,
    plan: &FoldPlan,
    critics: &CriticSet,
    queries: &[LabelVector],
    n_mc: usize,
    max_instances: usize,
    respects_p: bool,
    seed: u64,
) -> Result<OraclePolicy> {
    if n_mc == 0 || max_instances == 0 {
        return Err(Error::invalid("oracle needs n_mc >= 1 and max_instances >= 1"));
    }
    let union = union_eval_set(plan);
    let mut results = Vec::with_capacity(queries.len());
    for (qi, query) in queries.iter().enumerate() {
        let slots: Vec<usize> = (0..union.indices.len())
            .filter(|&pos| ds.instances[union.indices[pos]].labels == *query)
            .take(max_instances)
            .collect();
        if slots.is_empty() {
            return Err(Error::invalid(format!(
                "oracle query {} matches no instance in the evaluation union",
                query.to_bitstring()
            )));
        }

        let orig: Vec<Vec<f64>> = slots
            .par_iter()
            .map(|&pos| {
                let inst = &ds.instances[union.indices[pos]];
                union.critic_lists[pos]
                    .iter()
                    .map(|&k| instance_loss(&critics.critics[k], &inst.image, &inst.labels))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let tasks: Vec<(usize, usize)> =
            (0..NUM_OPERATORS).flat_map(|op| (1..NUM_M_LEVELS).map(move |m| (op, m))).collect();
        let gains: Vec<Result<f64>> = tasks
            .par_iter()
            .map(|&(op, m)| {
                let operator = OperatorId::from_code(op)?;
                let mut total = 0.0;
                for (si, &pos) in slots.iter().enumerate() {
                    let inst = &ds.instances[union.indices[pos]];
                    for mc in 0..n_mc {
                        let mut rng = seeds::stream(
                            seed,
                            &[0xb0, qi as u64, op as u64, m as u64, si as u64, mc as u64],
                        );
                        total += augmented_gain(
                            critics,
                            &union.critic_lists[pos],
                            &orig[si],
                            ds,
                            &inst.image,
                            &inst.labels,
                            operator,
                            m as u8,
                            &mut rng,
                        )?;
                    }
                }
                Ok(total / (slots.len() * n_mc) as f64)
            })
            .collect();

        let mut op_m_gains = vec![0.0; NUM_OPERATORS * NUM_M_LEVELS];
        for (&(op, m), g) in tasks.iter().zip(gains) {
            op_m_gains[op * NUM_M_LEVELS + m] = g?;
        }

        // Argmax over the full 16x11x10 tensor, ties to the lowest code.
        let mut best = PolicyTriple { op: OperatorId::ShearX, p_level: 0, m_level: 0 };
        let mut best_reward = f64::NEG_INFINITY;
        for op in 0..NUM_OPERATORS {
            for p in 0..NUM_P_LEVELS {
                for m in 0..NUM_M_LEVELS {
                    let r = {
                        let core = op_m_gains[op * NUM_M_LEVELS + m];
                        if respects_p {
                            core * (p as f64 / 10.0)
                        } else {
                            core
                        }
                    };
                    if r > best_reward {
                        best_reward = r;
                        best = PolicyTriple {
                            op: OperatorId::from_code(op)?,
                            p_level: p as u8,
                            m_level: m as u8,
                        };
                    }
                }
            }
        }

        results.push(OracleQueryResult {
            query_bits: query.to_bitstring(),
            matching_instances: slots.len(),
            best,
            best_reward,
            op_m_gains,
        });
    }
    Ok(OraclePolicy { respects_p, queries: results })
}

/// Expected oracle reward of a policy distribution:
/// `sum_jkl pi_op[j] pi_p[j][k] pi_m[j][l] R[j,k,l]`.
pub fn expected_reward(dist: &PolicyDistribution, query: &OracleQueryResult, respects_p: bool) -> f64 {
    let mut total = 0.0;
    for j in 0..NUM_OPERATORS {
        for k in 0..NUM_P_LEVELS {
            let pp = dist.pi_op[j] * dist.pi_p[j][k];
            if pp == 0.0 {
                continue;
            }
            for l in 0..NUM_M_LEVELS {
                total += pp * dist.pi_m[j][l] * query.reward_of(j, k, l, respects_p);
            }
        }
    }
    total
}
