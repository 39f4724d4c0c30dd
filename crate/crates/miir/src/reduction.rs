//! Hardness reduction: densest p-subhypergraph instances mapped onto
//! contingency-list instances, plus a brute-force coverage oracle for
//! equivalence testing.
//!
//! The construction gives every vertex a generator, every hyperedge a load
//! whose demand is the edge size, and every (vertex, edge) incidence a line
//! of one unit of flow rated one above the load demand. Generator capacities
//! exceed the total demand they could ever be asked to serve, so no line or
//! generator in a reduced instance can be driven over its bound; failures
//! travel only through the dependency relations.

use crate::error::ReduceError;
use crate::id::EntityId;
use crate::network::{Entity, EntityKind, Idr, PowerNetwork};
use indexmap::{IndexMap, IndexSet};
use std::collections::BTreeSet;

pub const DEFAULT_ENUM_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    pub vertices: IndexSet<String>,
    pub edges: Vec<BTreeSet<String>>,
}

impl Hypergraph {
    pub fn new(
        vertices: impl IntoIterator<Item = String>,
        edges: Vec<BTreeSet<String>>,
    ) -> Result<Self, ReduceError> {
        let vertices: IndexSet<String> = vertices.into_iter().collect();
        for (i, e) in edges.iter().enumerate() {
            if e.is_empty() {
                return Err(ReduceError::EmptyEdge(i));
            }
        }
        let mut all = vertices;
        for e in &edges {
            for v in e {
                all.insert(v.clone());
            }
        }
        Ok(Hypergraph { vertices: all, edges })
    }

    /// One edge per line: whitespace-separated vertex ids. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ReduceError> {
        let mut edges = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let edge: BTreeSet<String> = line.split_whitespace().map(str::to_owned).collect();
            edges.push(edge);
        }
        Hypergraph::new(Vec::new(), edges)
    }
}

/// How the generator capacity is derived from incident load demands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenBoundRule {
    /// Sum of (demand + 1) over incident edges.
    #[default]
    PerEdgeHeadroom,
    /// Sum of demands, plus one.
    TotalPlusOne,
}

#[derive(Debug, Clone)]
pub struct ReducedInstance {
    pub network: PowerNetwork,
    /// The contingency budget (= p).
    pub k: usize,
    /// Failure target as a function of covered edges: S(M) = p + M.
    pub p: usize,
    pub gen_of_vertex: IndexMap<String, EntityId>,
    pub load_of_edge: Vec<EntityId>,
}

impl ReducedInstance {
    pub fn failure_target(&self, covered: usize) -> usize {
        self.p + covered
    }
}

/// Build the contingency instance for a hypergraph and budget `p`.
pub fn build_kcol_from_hypergraph(
    h: &Hypergraph,
    p: usize,
    rule: GenBoundRule,
) -> Result<ReducedInstance, ReduceError> {
    let nv = h.vertices.len();
    if p == 0 || p > nv {
        return Err(ReduceError::BadP { p, max: nv });
    }

    let mut entities = IndexMap::new();
    let mut line_endpoints = IndexMap::new();
    let mut idrs = Vec::new();
    let mut gen_of_vertex = IndexMap::new();
    let mut load_of_edge = Vec::new();

    for v in &h.vertices {
        let id = EntityId::new(format!("G{v}"));
        gen_of_vertex.insert(v.clone(), id);
    }
    // Generator output and capacity from incident edges.
    for v in &h.vertices {
        let incident: Vec<&BTreeSet<String>> =
            h.edges.iter().filter(|e| e.contains(v)).collect();
        let output = incident.len() as f64;
        let capacity = match rule {
            GenBoundRule::PerEdgeHeadroom => {
                incident.iter().map(|e| e.len() as f64 + 1.0).sum::<f64>()
            }
            GenBoundRule::TotalPlusOne => {
                incident.iter().map(|e| e.len() as f64).sum::<f64>() + 1.0
            }
        };
        let id = gen_of_vertex[v].clone();
        entities.insert(
            id.clone(),
            Entity {
                id,
                kind: EntityKind::Generator,
                lower_bound: 0.0,
                upper_bound: capacity.max(1.0),
                value: output,
            },
        );
    }
    for (j, edge) in h.edges.iter().enumerate() {
        let demand = edge.len() as f64;
        let load_id = EntityId::new(format!("L{}", j + 1));
        entities.insert(
            load_id.clone(),
            Entity {
                id: load_id.clone(),
                kind: EntityKind::Load,
                lower_bound: demand,
                upper_bound: demand,
                value: demand,
            },
        );
        let mut minterms = Vec::new();
        for v in edge {
            let line_id = EntityId::new(format!("T{v}_{}", j + 1));
            entities.insert(
                line_id.clone(),
                Entity {
                    id: line_id.clone(),
                    kind: EntityKind::Line,
                    lower_bound: 0.0,
                    upper_bound: demand + 1.0,
                    value: 1.0,
                },
            );
            line_endpoints
                .insert(line_id.clone(), (gen_of_vertex[v].clone(), load_id.clone()));
            let mut m = BTreeSet::new();
            m.insert(line_id);
            m.insert(gen_of_vertex[v].clone());
            minterms.push(m);
        }
        idrs.push(Idr { target: load_id.clone(), minterms });
        load_of_edge.push(load_id);
    }

    let network = PowerNetwork { entities, idrs, line_endpoints };
    network.validate_shape().expect("reduced instance shape");
    network
        .validate_operating_point()
        .expect("reduced instance operating point");
    Ok(ReducedInstance { network, k: p, p, gen_of_vertex, load_of_edge })
}

/// Exhaustively find a p-vertex set maximizing the number of fully covered
/// edges; ties broken lexicographically on the sorted vertex vector.
pub fn brute_force_densest_subhypergraph(
    h: &Hypergraph,
    p: usize,
    budget: u64,
) -> Result<(BTreeSet<String>, usize), ReduceError> {
    let nv = h.vertices.len();
    if p == 0 || p > nv {
        return Err(ReduceError::BadP { p, max: nv });
    }
    let mut count: u64 = 1;
    for i in 0..p {
        count = count.saturating_mul((nv - i) as u64) / (i as u64 + 1);
    }
    if count > budget {
        return Err(ReduceError::BudgetExceeded { n: nv, p, budget });
    }

    let mut vertices: Vec<&String> = h.vertices.iter().collect();
    vertices.sort();
    let mut best: Option<(usize, Vec<&String>)> = None;
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let set: BTreeSet<&String> = idx.iter().map(|&i| vertices[i]).collect();
        let covered = h
            .edges
            .iter()
            .filter(|e| e.iter().all(|v| set.contains(v)))
            .count();
        let as_vec: Vec<&String> = set.iter().copied().collect();
        let better = match &best {
            None => true,
            Some((c, v)) => covered > *c || (covered == *c && as_vec < *v),
        };
        if better {
            best = Some((covered, as_vec));
        }
        // Advance to the next combination.
        let mut done = true;
        for i in (0..p).rev() {
            if idx[i] != i + nv - p {
                idx[i] += 1;
                for j in i + 1..p {
                    idx[j] = idx[j - 1] + 1;
                }
                done = false;
                break;
            }
        }
        if done {
            break;
        }
    }
    let (covered, set) = best.expect("p >= 1 guarantees a candidate");
    Ok((set.into_iter().cloned().collect(), covered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::propagate_idr_cascade;

    fn three_vertex_two_edges() -> Hypergraph {
        Hypergraph::parse("1 2\n2 3\n").unwrap()
    }

    #[test]
    fn coverage_oracle_small_cases() {
        let h = three_vertex_two_edges();
        let (set, covered) = brute_force_densest_subhypergraph(&h, 1, 1000).unwrap();
        assert_eq!(covered, 0);
        assert_eq!(set, ["1".to_owned()].into_iter().collect());

        let (set, covered) = brute_force_densest_subhypergraph(&h, 2, 1000).unwrap();
        assert_eq!(covered, 1);
        assert_eq!(set, ["1".to_owned(), "2".to_owned()].into_iter().collect());

        let (_, covered) = brute_force_densest_subhypergraph(&h, 3, 1000).unwrap();
        assert_eq!(covered, 2);
    }

    #[test]
    fn reduction_counts_and_central_vertex() {
        let h = three_vertex_two_edges();
        let inst = build_kcol_from_hypergraph(&h, 1, GenBoundRule::default()).unwrap();
        let n = &inst.network;
        assert_eq!(n.entities.values().filter(|e| e.kind == EntityKind::Generator).count(), 3);
        assert_eq!(n.entities.values().filter(|e| e.kind == EntityKind::Load).count(), 2);
        assert_eq!(n.entities.values().filter(|e| e.kind == EntityKind::Line).count(), 4);
        let g2 = n.entity(&EntityId::from("G2")).unwrap();
        assert_eq!(g2.value, 2.0);
        assert_eq!(g2.upper_bound, 6.0);
        for e in n.entities.values().filter(|e| e.kind == EntityKind::Load) {
            assert_eq!(e.value, 2.0);
        }

        // Failing the central generator alone covers neither edge fully, so
        // both loads stay up behind their other minterm; the generator and
        // its two lines go down.
        let initial: BTreeSet<EntityId> = [EntityId::from("G2")].into_iter().collect();
        let result = propagate_idr_cascade(n, &initial).unwrap();
        let dead_loads = result
            .final_failed
            .iter()
            .filter(|id| n.entities[*id].kind == EntityKind::Load)
            .count();
        assert_eq!(dead_loads, 0);
        assert_eq!(result.dead_count(), 3);

        // Failing both edge-1 generators covers that edge and kills its load.
        let initial: BTreeSet<EntityId> =
            [EntityId::from("G1"), EntityId::from("G2")].into_iter().collect();
        let result = propagate_idr_cascade(n, &initial).unwrap();
        assert!(result.final_failed.contains(&EntityId::from("L1")));
        assert!(!result.final_failed.contains(&EntityId::from("L2")));
        assert!(result.dead_count() >= inst.failure_target(1) + 1);
    }

    #[test]
    fn singleton_edge_instance() {
        let h = Hypergraph::parse("7\n").unwrap();
        let inst = build_kcol_from_hypergraph(&h, 1, GenBoundRule::default()).unwrap();
        assert_eq!(inst.network.len(), 3);
        let initial: BTreeSet<EntityId> = [EntityId::from("G7")].into_iter().collect();
        let result = propagate_idr_cascade(&inst.network, &initial).unwrap();
        assert_eq!(result.dead_count(), 3);
    }

    #[test]
    fn alternative_bound_rule_also_clears_margins() {
        let h = three_vertex_two_edges();
        let inst = build_kcol_from_hypergraph(&h, 2, GenBoundRule::TotalPlusOne).unwrap();
        let g2 = inst.network.entity(&EntityId::from("G2")).unwrap();
        assert_eq!(g2.upper_bound, 5.0);
        inst.network.validate_operating_point().unwrap();
    }

    #[test]
    fn bad_p_rejected() {
        let h = three_vertex_two_edges();
        assert!(matches!(
            build_kcol_from_hypergraph(&h, 0, GenBoundRule::default()),
            Err(ReduceError::BadP { .. })
        ));
        assert!(matches!(
            brute_force_densest_subhypergraph(&h, 9, 1000),
            Err(ReduceError::BadP { .. })
        ));
    }
}
