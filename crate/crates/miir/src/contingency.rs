//! The K-contingency list: greedy selection by kill-set size with fractional
//! minterm-hit tie-breaking, exhaustive enumeration against a budget, and
//! evaluation of candidate initial sets under either failure semantics.

use crate::bb::{solve_mip_bb, SolStatus, SolveOptions};
use crate::cascade::{fmhv_with_kill_set, kill_set, propagate_idr_cascade};
use crate::error::QueryError;
use crate::id::EntityId;
use crate::mip::{build_fixed_initial_mip, MipOptions};
use crate::network::PowerNetwork;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::time::Duration;

pub const DEFAULT_ENUM_BUDGET: u64 = 1_000_000;

/// Failure semantics used when scoring an initial set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Dependency-relation closure only.
    IdrOnly,
    /// Worst-case cascade propagation via the fixed-initial MIP.
    Wccp,
}

/// One greedy round: the winner, its kill-set size, and its tie-break score.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEntry {
    pub entity: EntityId,
    pub kill_set_size: usize,
    pub fmhv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyReport {
    pub chosen: Vec<EntityId>,
    pub idr_dead_count: usize,
    pub wccp_dead_count: Option<usize>,
    pub per_round_log: Vec<RoundEntry>,
}

/// Options for worst-case evaluation.
#[derive(Debug, Clone)]
pub struct WccpConfig {
    pub time_limit: Duration,
    pub mip: MipOptions,
}

impl Default for WccpConfig {
    fn default() -> Self {
        WccpConfig { time_limit: Duration::from_secs(120), mip: MipOptions::default() }
    }
}

/// Score an initial set: closure size under [`EvalMode::IdrOnly`], fixed-initial
/// MIP optimum under [`EvalMode::Wccp`]. An infeasible worst-case model means
/// the set strands live demand beyond any line's capacity; that is reported as
/// total collapse (`|E|`).
pub fn evaluate_initial_set(
    network: &PowerNetwork,
    initial: &BTreeSet<EntityId>,
    mode: EvalMode,
    wccp: &WccpConfig,
) -> Result<usize, QueryError> {
    for id in initial {
        if network.entity(id).is_none() {
            return Err(QueryError::UnknownEntity(id.clone()));
        }
    }
    match mode {
        EvalMode::IdrOnly => Ok(propagate_idr_cascade(network, initial)?.dead_count()),
        EvalMode::Wccp => {
            let model = build_fixed_initial_mip(network, initial, &wccp.mip);
            let opts = SolveOptions { time_limit: wccp.time_limit, ..SolveOptions::default() };
            let sol = solve_mip_bb(&model, network, &opts)
                .map_err(|e| QueryError::SolverUnavailable(e.to_string()))?;
            match sol.status {
                SolStatus::Optimal => Ok(sol.objective_value.round() as usize),
                SolStatus::Infeasible => Ok(network.len()),
                other => Err(QueryError::SolverUnavailable(format!(
                    "solver stopped with status {other:?}"
                ))),
            }
        }
    }
}

/// Remove a set of dead entities from a working network copy. Relations whose
/// target died are dropped, minterms containing a dead entity are dropped, and
/// a bus whose relation loses every minterm is itself dead (together with the
/// lines it feeds), repeated to the fixpoint.
pub fn remove_kill_set(network: &PowerNetwork, dead: &BTreeSet<EntityId>) -> PowerNetwork {
    let mut dead = dead.clone();
    let out_lines = network.out_lines();
    loop {
        let mut grew = false;
        for idr in &network.idrs {
            if dead.contains(&idr.target) {
                continue;
            }
            let all_minterms_dead = idr
                .minterms
                .iter()
                .all(|m| m.iter().any(|member| dead.contains(member)));
            if all_minterms_dead {
                dead.insert(idr.target.clone());
                if let Some(lines) = out_lines.get(&idr.target) {
                    for line in lines {
                        dead.insert(line.clone());
                    }
                }
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }

    let mut reduced = network.clone();
    reduced.entities.retain(|id, _| !dead.contains(id));
    reduced.line_endpoints.retain(|id, _| !dead.contains(id));
    reduced.idrs.retain(|idr| !dead.contains(&idr.target));
    for idr in &mut reduced.idrs {
        idr.minterms.retain(|m| m.iter().all(|member| !dead.contains(member)));
    }
    reduced.idrs.retain(|idr| !idr.minterms.is_empty());
    reduced
}

/// Greedy contingency selection: each round scores every live entity by
/// kill-set size (ties by highest FMHV, then lowest id), commits the winner,
/// and removes its kill set from the working network.
pub fn heuristic_k_list(
    network: &PowerNetwork,
    k: usize,
    parallel: bool,
) -> Result<ContingencyReport, QueryError> {
    if k > network.len() {
        return Err(QueryError::KOutOfRange { k, max: network.len() });
    }
    let mut working = network.clone();
    let mut chosen = Vec::new();
    let mut per_round_log = Vec::new();

    for _ in 0..k {
        if working.entities.is_empty() {
            break;
        }
        let ids: Vec<EntityId> = working.entities.keys().cloned().collect();
        let score = |id: &EntityId| {
            let ks = kill_set(&working, id).expect("live entity");
            let hit_value = fmhv_with_kill_set(&working, &ks);
            (id.clone(), ks, hit_value)
        };
        let mut scored: Vec<(EntityId, BTreeSet<EntityId>, f64)> = if parallel {
            ids.par_iter().map(score).collect()
        } else {
            ids.iter().map(score).collect()
        };
        scored.sort_by(|a, b| {
            b.1.len()
                .cmp(&a.1.len())
                .then(b.2.partial_cmp(&a.2).expect("finite fmhv"))
                .then(a.0.cmp(&b.0))
        });
        let (winner, ks, hit_value) = scored.swap_remove(0);
        per_round_log.push(RoundEntry {
            entity: winner.clone(),
            kill_set_size: ks.len(),
            fmhv: hit_value,
        });
        chosen.push(winner);
        working = remove_kill_set(&working, &ks);
    }

    let initial: BTreeSet<EntityId> = chosen.iter().cloned().collect();
    let idr_dead_count = propagate_idr_cascade(network, &initial)?.dead_count();
    Ok(ContingencyReport { chosen, idr_dead_count, wccp_dead_count: None, per_round_log })
}

fn combination_count(n: usize, k: usize) -> u64 {
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
        if acc > u64::MAX / 2 {
            return u64::MAX;
        }
    }
    acc
}

/// Advance to the next k-combination of `0..n` in lexicographic order.
fn next_combination(indices: &mut [usize], n: usize) -> bool {
    let k = indices.len();
    if k == 0 {
        return false;
    }
    for i in (0..k).rev() {
        if indices[i] != i + n - k {
            indices[i] += 1;
            for j in i + 1..k {
                indices[j] = indices[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustive search over all K-subsets under a combination budget. Ties are
/// broken lexicographically on the sorted id vector.
pub fn exhaustive_k_list(
    network: &PowerNetwork,
    k: usize,
    mode: EvalMode,
    budget: u64,
    wccp: &WccpConfig,
) -> Result<ContingencyReport, QueryError> {
    let n = network.len();
    if k > n {
        return Err(QueryError::KOutOfRange { k, max: n });
    }
    let count = combination_count(n, k);
    if count > budget {
        return Err(QueryError::BudgetExceeded { n, k, budget });
    }
    let mut ids: Vec<EntityId> = network.entities.keys().cloned().collect();
    ids.sort();

    let mut best: Option<(usize, Vec<EntityId>)> = None;
    let mut indices: Vec<usize> = (0..k).collect();
    loop {
        let set_ids: Vec<EntityId> = indices.iter().map(|&i| ids[i].clone()).collect();
        let set: BTreeSet<EntityId> = set_ids.iter().cloned().collect();
        let score = evaluate_initial_set(network, &set, mode, wccp)?;
        let better = match &best {
            None => true,
            Some((best_score, best_ids)) => {
                score > *best_score || (score == *best_score && set_ids < *best_ids)
            }
        };
        if better {
            best = Some((score, set_ids));
        }
        if !next_combination(&mut indices, n) {
            break;
        }
    }

    let (score, chosen) = best.unwrap_or((0, Vec::new()));
    let initial: BTreeSet<EntityId> = chosen.iter().cloned().collect();
    let idr_dead_count = propagate_idr_cascade(network, &initial)?.dead_count();
    Ok(ContingencyReport {
        chosen,
        idr_dead_count,
        wccp_dead_count: (mode == EvalMode::Wccp).then_some(score),
        per_round_log: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fig1_heuristic_k1_picks_g1() {
        let network = fixtures::fig1_network();
        let report = heuristic_k_list(&network, 1, false).unwrap();
        assert_eq!(report.chosen, vec![EntityId::from("G1")]);
        assert_eq!(report.idr_dead_count, 5);
        assert_eq!(report.per_round_log[0].kill_set_size, 5);
        assert_eq!(report.per_round_log[0].fmhv, 2.0);
    }

    #[test]
    fn k_zero_is_empty() {
        let network = fixtures::fig1_network();
        let report = heuristic_k_list(&network, 0, false).unwrap();
        assert!(report.chosen.is_empty());
        assert_eq!(report.idr_dead_count, 0);
        let exhaustive = exhaustive_k_list(
            &network,
            0,
            EvalMode::IdrOnly,
            DEFAULT_ENUM_BUDGET,
            &WccpConfig::default(),
        )
        .unwrap();
        assert_eq!(exhaustive.idr_dead_count, 0);
    }

    #[test]
    fn southwest_heuristic_k1_picks_pv() {
        let network = fixtures::southwest_network();
        let report = heuristic_k_list(&network, 1, false).unwrap();
        assert_eq!(report.chosen, vec![EntityId::from("PV")]);
        assert_eq!(report.idr_dead_count, 14);
    }

    #[test]
    fn fig1_exhaustive_k1_matches_heuristic() {
        let network = fixtures::fig1_network();
        let report = exhaustive_k_list(
            &network,
            1,
            EvalMode::IdrOnly,
            DEFAULT_ENUM_BUDGET,
            &WccpConfig::default(),
        )
        .unwrap();
        assert_eq!(report.idr_dead_count, 5);
        assert_eq!(report.chosen, vec![EntityId::from("G1")]);
    }

    #[test]
    fn k_equals_n_kills_everything() {
        let network = fixtures::fig1_network();
        let all: BTreeSet<EntityId> = network.entities.keys().cloned().collect();
        let wccp = WccpConfig::default();
        let n = evaluate_initial_set(&network, &all, EvalMode::IdrOnly, &wccp).unwrap();
        assert_eq!(n, network.len());
    }

    #[test]
    fn southwest_t11_idr_only_is_ten() {
        let network = fixtures::southwest_network();
        let initial: BTreeSet<EntityId> = [EntityId::from("T11")].into_iter().collect();
        let wccp = WccpConfig::default();
        let n = evaluate_initial_set(&network, &initial, EvalMode::IdrOnly, &wccp).unwrap();
        assert_eq!(n, 10);
    }

    #[test]
    fn budget_guard_trips() {
        let network = fixtures::fig1_network();
        let err = exhaustive_k_list(&network, 9, EvalMode::IdrOnly, 10, &WccpConfig::default())
            .unwrap_err();
        assert!(matches!(err, QueryError::BudgetExceeded { .. }));
    }

    #[test]
    fn dead_count_nondecreasing_in_k() {
        let network = fixtures::fig1_network();
        let mut last = 0;
        for k in 0..=3 {
            let report = heuristic_k_list(&network, k, false).unwrap();
            assert!(report.idr_dead_count >= last);
            last = report.idr_dead_count;
        }
    }
}
