//! Dependency-driven cascade propagation: a bus fails one step after every
//! minterm of its relation contains a failed entity; a line fails in the same
//! step as the bus it carries power out of. Flow-bound failures are the MIP's
//! concern, not this module's.

use crate::error::QueryError;
use crate::id::EntityId;
use crate::network::PowerNetwork;
use indexmap::{IndexMap, IndexSet};
use std::collections::BTreeSet;

/// Outcome of one propagation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeResult {
    /// Timestep each failed entity first went down; initial entities map to 0.
    pub failed_at: IndexMap<EntityId, usize>,
    pub final_failed: BTreeSet<EntityId>,
    /// Last timestep that produced a new failure (0 for no propagation).
    pub steps: usize,
}

impl CascadeResult {
    pub fn dead_count(&self) -> usize {
        self.final_failed.len()
    }
}

/// Run the cascade to its closure. Terminates after at most `|E| - 1` steps.
pub fn propagate_idr_cascade(
    network: &PowerNetwork,
    initial: &BTreeSet<EntityId>,
) -> Result<CascadeResult, QueryError> {
    for id in initial {
        if network.entity(id).is_none() {
            return Err(QueryError::UnknownEntity(id.clone()));
        }
    }
    let out_lines = network.out_lines();
    let mut failed_at: IndexMap<EntityId, usize> = IndexMap::new();
    let mut failed: IndexSet<EntityId> = IndexSet::new();

    let mark = |id: &EntityId, t: usize, failed: &mut IndexSet<EntityId>,
                failed_at: &mut IndexMap<EntityId, usize>| {
        if failed.insert(id.clone()) {
            failed_at.insert(id.clone(), t);
            true
        } else {
            false
        }
    };

    for id in initial {
        mark(id, 0, &mut failed, &mut failed_at);
    }
    // Lines follow their source bus within the same step.
    for id in initial {
        if let Some(lines) = out_lines.get(id) {
            for line in lines {
                mark(line, 0, &mut failed, &mut failed_at);
            }
        }
    }

    let mut steps = 0usize;
    let horizon = network.len().saturating_sub(1);
    for t in 1..=horizon {
        let mut new_buses: Vec<EntityId> = Vec::new();
        for idr in &network.idrs {
            if failed.contains(&idr.target) {
                continue;
            }
            let all_hit = idr
                .minterms
                .iter()
                .all(|m| m.iter().any(|member| failed.contains(member)));
            if all_hit {
                new_buses.push(idr.target.clone());
            }
        }
        if new_buses.is_empty() {
            break;
        }
        steps = t;
        for bus in &new_buses {
            mark(bus, t, &mut failed, &mut failed_at);
        }
        for bus in &new_buses {
            if let Some(lines) = out_lines.get(bus) {
                for line in lines {
                    mark(line, t, &mut failed, &mut failed_at);
                }
            }
        }
    }

    Ok(CascadeResult {
        final_failed: failed.iter().cloned().collect(),
        failed_at,
        steps,
    })
}

/// All entities brought down by initially failing `e`, including `e`.
pub fn kill_set(network: &PowerNetwork, e: &EntityId) -> Result<BTreeSet<EntityId>, QueryError> {
    let mut initial = BTreeSet::new();
    initial.insert(e.clone());
    Ok(propagate_idr_cascade(network, &initial)?.final_failed)
}

/// Fractional minterm hit value: over relations of surviving buses, the sum
/// of `|minterm ∩ kill set| / |minterm|`.
pub fn fmhv(network: &PowerNetwork, e: &EntityId) -> Result<f64, QueryError> {
    let ks = kill_set(network, e)?;
    Ok(fmhv_with_kill_set(network, &ks))
}

pub fn fmhv_with_kill_set(network: &PowerNetwork, ks: &BTreeSet<EntityId>) -> f64 {
    let mut total = 0.0;
    for idr in &network.idrs {
        if ks.contains(&idr.target) {
            continue;
        }
        for m in &idr.minterms {
            let hits = m.iter().filter(|member| ks.contains(*member)).count();
            if hits > 0 {
                total += hits as f64 / m.len() as f64;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(list: &[&str]) -> BTreeSet<EntityId> {
        list.iter().map(|s| EntityId::from(*s)).collect()
    }

    #[test]
    fn empty_initial_set_is_a_fixpoint() {
        let network = fixtures::fig1_network();
        let r = propagate_idr_cascade(&network, &BTreeSet::new()).unwrap();
        assert_eq!(r.dead_count(), 0);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn unknown_initial_entity_is_rejected() {
        let network = fixtures::fig1_network();
        let err = propagate_idr_cascade(&network, &ids(&["bogus"])).unwrap_err();
        assert!(matches!(err, QueryError::UnknownEntity(_)));
    }

    #[test]
    fn fig1_g1_closure() {
        let network = fixtures::fig1_network();
        let r = propagate_idr_cascade(&network, &ids(&["G1"])).unwrap();
        assert_eq!(r.final_failed, ids(&["G1", "T1", "L1", "T2", "T3"]));
        assert_eq!(r.failed_at[&EntityId::from("T1")], 0);
        assert_eq!(r.failed_at[&EntityId::from("L1")], 1);
        assert_eq!(r.failed_at[&EntityId::from("T2")], 1);
    }

    #[test]
    fn fig1_kill_sets() {
        let network = fixtures::fig1_network();
        assert_eq!(
            kill_set(&network, &EntityId::from("T5")).unwrap(),
            ids(&["T5", "N1", "T4", "T6"])
        );
        assert_eq!(kill_set(&network, &EntityId::from("L4")).unwrap(), ids(&["L4"]));
    }

    #[test]
    fn fig1_fmhv_values() {
        let network = fixtures::fig1_network();
        assert_eq!(fmhv(&network, &EntityId::from("G1")).unwrap(), 2.0);
        assert_eq!(fmhv(&network, &EntityId::from("G2")).unwrap(), 2.0);
        assert_eq!(fmhv(&network, &EntityId::from("L4")).unwrap(), 0.0);
    }

    #[test]
    fn southwest_t11_timeline() {
        let network = fixtures::southwest_network();
        let r = propagate_idr_cascade(&network, &ids(&["T11"])).unwrap();
        let at = |name: &str| r.failed_at[&EntityId::from(name)];
        assert_eq!(at("NG"), 1);
        assert_eq!(at("WALC"), 2);
        assert_eq!(at("IV"), 2);
        assert_eq!(at("CFE"), 3);
        assert_eq!(at("MI"), 3);
        assert_eq!(at("T13"), 1);
        assert_eq!(at("T16"), 1);
        assert_eq!(at("T12"), 2);
        assert_eq!(at("T14"), 2);
        assert_eq!(r.dead_count(), 10);
        assert_eq!(r.steps, 3);
    }

    #[test]
    fn southwest_pv_kill_set() {
        let network = fixtures::southwest_network();
        let ks = kill_set(&network, &EntityId::from("PV")).unwrap();
        assert_eq!(
            ks,
            ids(&[
                "PV", "T3", "T10", "HA", "T11", "NG", "T13", "T16", "IV", "WALC", "T12",
                "T14", "MI", "CFE"
            ])
        );
        assert_eq!(ks.len(), 14);
    }

    #[test]
    fn rerunning_the_closure_is_idempotent() {
        let network = fixtures::southwest_network();
        let first = propagate_idr_cascade(&network, &ids(&["T11"])).unwrap();
        let again = propagate_idr_cascade(&network, &first.final_failed).unwrap();
        assert_eq!(again.final_failed, first.final_failed);
        assert_eq!(again.steps, 0);
    }
}
