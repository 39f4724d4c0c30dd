//! The network abstraction: typed entities with power bounds, dependency
//! relations, and directed line adjacency, plus the transformation from a raw
//! case and a solved snapshot into that form.

use crate::case::{BranchRow, BusRow, BusType, RawCase, Snapshot};
use crate::error::BuildError;
use crate::id::EntityId;
use indexmap::{IndexMap, IndexSet};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeSet;

pub const CONSERVATION_TOL: f64 = 1e-6;

/// Stand-in MW rating for branches whose case rating is 0 (= unlimited).
pub const UNLIMITED_RATING: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Generator,
    Load,
    Neutral,
    Line,
}

impl EntityKind {
    pub fn is_bus(self) -> bool {
        self != EntityKind::Line
    }
}

/// One entity: a bus or a transmission line with its power bounds and the
/// instantaneous MW value at the snapshot instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub value: f64,
}

/// One dependency relation: the target bus is operable while at least one
/// minterm has all members operational.
#[derive(Debug, Clone, PartialEq)]
pub struct Idr {
    pub target: EntityId,
    pub minterms: Vec<BTreeSet<EntityId>>,
}

/// The network at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    pub entities: IndexMap<EntityId, Entity>,
    pub idrs: Vec<Idr>,
    /// line id -> (source bus, sink bus), oriented by pre-disturbance flow.
    pub line_endpoints: IndexMap<EntityId, (EntityId, EntityId)>,
}

impl PowerNetwork {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn idr_of(&self, target: &EntityId) -> Option<&Idr> {
        self.idrs.iter().find(|i| &i.target == target)
    }

    /// Lines grouped by their source bus.
    pub fn out_lines(&self) -> IndexMap<EntityId, Vec<EntityId>> {
        let mut map: IndexMap<EntityId, Vec<EntityId>> = IndexMap::new();
        for (line, (src, _)) in &self.line_endpoints {
            map.entry(src.clone()).or_default().push(line.clone());
        }
        map
    }

    /// Lines grouped by their sink bus.
    pub fn in_lines(&self) -> IndexMap<EntityId, Vec<EntityId>> {
        let mut map: IndexMap<EntityId, Vec<EntityId>> = IndexMap::new();
        for (line, (_, dst)) in &self.line_endpoints {
            map.entry(dst.clone()).or_default().push(line.clone());
        }
        map
    }

    /// Lines whose recorded pre-disturbance flow is zero.
    pub fn zero_flow_lines(&self) -> Vec<EntityId> {
        self.entities
            .values()
            .filter(|e| e.kind == EntityKind::Line && e.value == 0.0)
            .map(|e| e.id.clone())
            .collect()
    }

    /// Structural invariants: per-entity bound shapes, line table closure,
    /// IDR targets being buses, non-empty minterms, and acyclicity of the
    /// dependency graph.
    pub fn validate_shape(&self) -> Result<(), BuildError> {
        for e in self.entities.values() {
            let bad = |msg: &str| {
                Err(BuildError::BadEntity { id: e.id.clone(), msg: msg.to_owned() })
            };
            if e.lower_bound > e.upper_bound {
                return bad("lower bound exceeds upper bound");
            }
            match e.kind {
                EntityKind::Load => {
                    if e.lower_bound != e.upper_bound || e.value != e.upper_bound {
                        return bad("load bounds and value must all equal its demand");
                    }
                }
                EntityKind::Neutral => {
                    if e.lower_bound != 0.0 || e.upper_bound != 0.0 || e.value != 0.0 {
                        return bad("neutral entities carry all-zero bounds and value");
                    }
                }
                EntityKind::Generator => {
                    if e.lower_bound != 0.0 {
                        return bad("generator lower bound must be 0");
                    }
                }
                EntityKind::Line => {
                    if e.lower_bound != 0.0 {
                        return bad("line lower bound must be 0");
                    }
                    if e.value < 0.0 {
                        return bad("line value must be non-negative");
                    }
                    if !self.line_endpoints.contains_key(&e.id) {
                        return bad("line has no endpoint record");
                    }
                }
            }
        }
        for (line, (src, dst)) in &self.line_endpoints {
            let is_line = self
                .entity(line)
                .map(|e| e.kind == EntityKind::Line)
                .unwrap_or(false);
            if !is_line {
                return Err(BuildError::BadEntity {
                    id: line.clone(),
                    msg: "line table entry is not a line entity".into(),
                });
            }
            for bus in [src, dst] {
                let ok = self.entity(bus).map(|e| e.kind.is_bus()).unwrap_or(false);
                if !ok {
                    return Err(BuildError::BadEntity {
                        id: bus.clone(),
                        msg: format!("line {line} endpoint is not a bus"),
                    });
                }
            }
        }
        let mut seen_targets = IndexSet::new();
        for idr in &self.idrs {
            let target_is_bus = self
                .entity(&idr.target)
                .map(|e| e.kind.is_bus())
                .unwrap_or(false);
            if !target_is_bus {
                return Err(BuildError::BadEntity {
                    id: idr.target.clone(),
                    msg: "IDR target must be an existing bus".into(),
                });
            }
            if !seen_targets.insert(idr.target.clone()) {
                return Err(BuildError::BadEntity {
                    id: idr.target.clone(),
                    msg: "bus carries more than one IDR".into(),
                });
            }
            if idr.minterms.is_empty() {
                return Err(BuildError::BadEntity {
                    id: idr.target.clone(),
                    msg: "IDR has no minterms".into(),
                });
            }
            for m in &idr.minterms {
                if m.is_empty() {
                    return Err(BuildError::BadEntity {
                        id: idr.target.clone(),
                        msg: "IDR has an empty minterm".into(),
                    });
                }
                for member in m {
                    if self.entity(member).is_none() {
                        return Err(BuildError::BadEntity {
                            id: member.clone(),
                            msg: format!("IDR of {} references unknown entity", idr.target),
                        });
                    }
                }
            }
        }
        self.check_acyclic()
    }

    /// Kahn's algorithm over minterm-member -> target edges.
    fn check_acyclic(&self) -> Result<(), BuildError> {
        let mut indegree: IndexMap<&EntityId, usize> =
            self.entities.keys().map(|k| (k, 0usize)).collect();
        let mut succ: IndexMap<&EntityId, Vec<&EntityId>> = IndexMap::new();
        for idr in &self.idrs {
            for m in &idr.minterms {
                for member in m {
                    succ.entry(member).or_default().push(&idr.target);
                    *indegree.get_mut(&idr.target).expect("validated target") += 1;
                }
            }
        }
        let mut queue: Vec<&EntityId> =
            indegree.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
        let mut visited = 0usize;
        while let Some(node) = queue.pop() {
            visited += 1;
            if let Some(next) = succ.get(node) {
                for &t in next {
                    let d = indegree.get_mut(&t).expect("known node");
                    *d -= 1;
                    if *d == 0 {
                        queue.push(t);
                    }
                }
            }
        }
        if visited == self.entities.len() {
            Ok(())
        } else {
            let stuck = indegree
                .iter()
                .find(|(_, &d)| d > 0)
                .map(|(&k, _)| k.clone())
                .expect("some node has positive indegree");
            Err(BuildError::CyclicDependencies(stuck))
        }
    }

    /// Per-bus conservation residual: outflow - inflow - generation + demand.
    pub fn conservation_residual(&self, bus: &EntityId) -> f64 {
        let e = &self.entities[bus];
        let mut acc = 0.0;
        for (line, (src, dst)) in &self.line_endpoints {
            let flow = self.entities[line].value;
            if src == bus {
                acc += flow;
            }
            if dst == bus {
                acc -= flow;
            }
        }
        match e.kind {
            EntityKind::Generator => acc - e.value,
            EntityKind::Load => acc + e.value,
            EntityKind::Neutral => acc,
            EntityKind::Line => 0.0,
        }
    }

    /// Build-time invariants: conservation at every bus and values within
    /// bounds for lines and generators.
    pub fn validate_operating_point(&self) -> Result<(), BuildError> {
        for e in self.entities.values() {
            match e.kind {
                EntityKind::Line if e.value > e.upper_bound => {
                    return Err(BuildError::LineOverBound {
                        line: e.id.clone(),
                        value: e.value,
                        bound: e.upper_bound,
                    });
                }
                EntityKind::Generator if e.value > e.upper_bound => {
                    return Err(BuildError::GenOverBound {
                        gen: e.id.clone(),
                        value: e.value,
                        bound: e.upper_bound,
                    });
                }
                _ => {}
            }
        }
        for e in self.entities.values() {
            if e.kind.is_bus() {
                let residual = self.conservation_residual(&e.id);
                if residual.abs() > CONSERVATION_TOL {
                    return Err(BuildError::Conservation { bus: e.id.clone(), residual });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Generator-bus splitting
// ---------------------------------------------------------------------------

/// Replace every generator bus that carries demand with a zero-demand
/// generator bus, a synthetic load bus, and a synthetic line moving the
/// demand from the former to the latter.
pub fn split_generator_buses(case: &RawCase, snap: &Snapshot) -> (RawCase, Snapshot) {
    let mut case = case.clone();
    let mut snap = snap.clone();
    let mut next_bus_id = case.buses.iter().map(|b| b.bus_id).max().unwrap_or(0) + 1;
    let gen_buses: IndexSet<i64> = case.generators.iter().map(|g| g.bus_id).collect();

    let n = case.buses.len();
    for i in 0..n {
        let (bus_id, demand) = (case.buses[i].bus_id, case.buses[i].p_demand);
        if demand > 0.0 && gen_buses.contains(&bus_id) {
            case.buses[i].p_demand = 0.0;
            let load_id = next_bus_id;
            next_bus_id += 1;
            case.buses.push(BusRow {
                bus_id: load_id,
                bus_type: BusType::Pq,
                p_demand: demand,
                extra: Vec::new(),
            });
            case.branches.push(BranchRow {
                from_bus: bus_id,
                to_bus: load_id,
                resistance: 0.0,
                reactance: 1e-4,
                rate_a: demand + 1.0,
                extra: Vec::new(),
            });
            snap.line_flows.insert(case.branches.len() - 1, demand);
        }
    }
    (case, snap)
}

// ---------------------------------------------------------------------------
// Line flows
// ---------------------------------------------------------------------------

/// A branch flow oriented in the direction power actually moves.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedFlow {
    pub branch_idx: usize,
    pub source_bus: i64,
    pub sink_bus: i64,
    pub mw: f64,
}

/// Per-branch real power. Branches with an explicit snapshot flow use it
/// verbatim; the rest are computed from the bus voltages as the real part of
/// `V1 * conj((V1 - V2) / Z)`, scaled to MW. Positive values flow from the
/// branch's from-bus; negative values are flipped and stored as a magnitude.
pub fn compute_line_flows(case: &RawCase, snap: &Snapshot) -> Result<Vec<DirectedFlow>, BuildError> {
    let mut flows = Vec::with_capacity(case.branches.len());
    for (idx, br) in case.branches.iter().enumerate() {
        let signed_mw = if let Some(&mw) = snap.line_flows.get(&idx) {
            mw
        } else {
            if !snap.has_voltages() {
                return Err(BuildError::MissingVoltages);
            }
            let v1 = *snap
                .voltages
                .get(&br.from_bus)
                .ok_or(BuildError::MissingVoltage(br.from_bus))?;
            let v2 = *snap
                .voltages
                .get(&br.to_bus)
                .ok_or(BuildError::MissingVoltage(br.to_bus))?;
            let z = Complex64::new(br.resistance, br.reactance);
            if z.norm() == 0.0 {
                return Err(BuildError::ZeroImpedance { from: br.from_bus, to: br.to_bus });
            }
            (v1 * ((v1 - v2) / z).conj()).re * case.base_mva
        };
        let (source_bus, sink_bus, mw) = if signed_mw >= 0.0 {
            (br.from_bus, br.to_bus, signed_mw)
        } else {
            (br.to_bus, br.from_bus, -signed_mw)
        };
        flows.push(DirectedFlow { branch_idx: idx, source_bus, sink_bus, mw });
    }
    Ok(flows)
}

// ---------------------------------------------------------------------------
// DC flow convenience solver
// ---------------------------------------------------------------------------

/// Lossless linear power flow: bus angles from the susceptance system with
/// the reference bus pinned at angle zero, branch flows from angle
/// differences. The reference bus generation absorbs the system imbalance.
pub fn solve_dc_flow(case: &RawCase) -> Result<Snapshot, BuildError> {
    let n = case.buses.len();
    let index_of: IndexMap<i64, usize> =
        case.buses.iter().enumerate().map(|(i, b)| (b.bus_id, i)).collect();
    let ref_idx = case
        .buses
        .iter()
        .position(|b| b.bus_type == BusType::Ref)
        .ok_or(BuildError::SingularSystem)?;

    // Injections in per-unit; the reference bus balances the rest.
    let mut inj = vec![0.0; n];
    for b in &case.buses {
        inj[index_of[&b.bus_id]] -= b.p_demand / case.base_mva;
    }
    for g in &case.generators {
        if index_of[&g.bus_id] != ref_idx {
            inj[index_of[&g.bus_id]] += g.p_gen / case.base_mva;
        }
    }
    let others: f64 = inj.iter().enumerate().filter(|&(i, _)| i != ref_idx).map(|(_, v)| v).sum();
    inj[ref_idx] = -others;

    let mut b_mat = DMatrix::<f64>::zeros(n, n);
    for br in &case.branches {
        if br.reactance == 0.0 {
            return Err(BuildError::ZeroImpedance { from: br.from_bus, to: br.to_bus });
        }
        let (f, t) = (index_of[&br.from_bus], index_of[&br.to_bus]);
        let b = 1.0 / br.reactance;
        b_mat[(f, f)] += b;
        b_mat[(t, t)] += b;
        b_mat[(f, t)] -= b;
        b_mat[(t, f)] -= b;
    }

    // Reduced system without the reference row/column.
    let keep: Vec<usize> = (0..n).filter(|&i| i != ref_idx).collect();
    let m = keep.len();
    let mut reduced = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (ri, &i) in keep.iter().enumerate() {
        rhs[ri] = inj[i];
        for (rj, &j) in keep.iter().enumerate() {
            reduced[(ri, rj)] = b_mat[(i, j)];
        }
    }
    let theta_red = if m == 0 {
        DVector::<f64>::zeros(0)
    } else {
        reduced
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(BuildError::SingularSystem)?
    };
    // An LU "solution" of a singular system can still come back; check it.
    if m > 0 {
        let residual = (&reduced * &theta_red - &rhs).amax();
        if !residual.is_finite() || residual > 1e-7 {
            return Err(BuildError::SingularSystem);
        }
    }
    let mut theta = vec![0.0; n];
    for (ri, &i) in keep.iter().enumerate() {
        theta[i] = theta_red[ri];
    }

    let mut snap = Snapshot { time_label: "dc".into(), ..Default::default() };
    for (idx, br) in case.branches.iter().enumerate() {
        let (f, t) = (index_of[&br.from_bus], index_of[&br.to_bus]);
        let mw = (theta[f] - theta[t]) / br.reactance * case.base_mva;
        snap.line_flows.insert(idx, mw);
    }
    for b in &case.buses {
        let i = index_of[&b.bus_id];
        if i == ref_idx {
            snap.gen_outputs.insert(b.bus_id, inj[i] * case.base_mva + b.p_demand);
        }
    }
    for g in &case.generators {
        if index_of[&g.bus_id] != ref_idx {
            let v = snap.gen_outputs.get(&g.bus_id).copied().unwrap_or(0.0);
            snap.gen_outputs.insert(g.bus_id, v + g.p_gen);
        }
    }
    Ok(snap)
}

// ---------------------------------------------------------------------------
// Naming and IDR generation
// ---------------------------------------------------------------------------

/// Deterministic entity naming: buses get kind-sequential names (`G1`, `L2`,
/// `N1`) in bus-table order, lines get `T<k>` in branch-table order.
#[derive(Debug, Clone)]
pub struct EntityNaming {
    pub bus_names: IndexMap<i64, EntityId>,
    pub line_names: Vec<EntityId>,
    pub bus_kinds: IndexMap<i64, EntityKind>,
}

pub fn name_entities(case: &RawCase) -> EntityNaming {
    let gen_buses: IndexSet<i64> = case.generators.iter().map(|g| g.bus_id).collect();
    let mut bus_names = IndexMap::new();
    let mut bus_kinds = IndexMap::new();
    let (mut gens, mut loads, mut neutrals) = (0usize, 0usize, 0usize);
    for b in &case.buses {
        let is_gen = gen_buses.contains(&b.bus_id) || b.bus_type != BusType::Pq;
        let (kind, name) = if is_gen {
            gens += 1;
            (EntityKind::Generator, format!("G{gens}"))
        } else if b.p_demand > 0.0 {
            loads += 1;
            (EntityKind::Load, format!("L{loads}"))
        } else {
            neutrals += 1;
            (EntityKind::Neutral, format!("N{neutrals}"))
        };
        bus_names.insert(b.bus_id, EntityId::new(name));
        bus_kinds.insert(b.bus_id, kind);
    }
    let line_names = (0..case.branches.len())
        .map(|i| EntityId::new(format!("T{}", i + 1)))
        .collect();
    EntityNaming { bus_names, line_names, bus_kinds }
}

/// One dependency relation per bus that receives power: a minterm
/// `{line, source bus}` for every line delivering power into it.
pub fn generate_idrs(case: &RawCase, flows: &[DirectedFlow]) -> Vec<Idr> {
    let naming = name_entities(case);
    generate_idrs_with(case, flows, &naming)
}

fn generate_idrs_with(case: &RawCase, flows: &[DirectedFlow], naming: &EntityNaming) -> Vec<Idr> {
    let mut idrs: Vec<Idr> = Vec::new();
    for b in &case.buses {
        let mut minterms = Vec::new();
        for f in flows {
            if f.sink_bus == b.bus_id {
                let mut m = BTreeSet::new();
                m.insert(naming.line_names[f.branch_idx].clone());
                m.insert(naming.bus_names[&f.source_bus].clone());
                minterms.push(m);
            }
        }
        if !minterms.is_empty() {
            idrs.push(Idr { target: naming.bus_names[&b.bus_id].clone(), minterms });
        }
    }
    idrs
}

// ---------------------------------------------------------------------------
// Full build
// ---------------------------------------------------------------------------

/// Compose splitting, flow orientation, bound assignment, and IDR generation
/// into a validated network.
pub fn build_network(case: &RawCase, snap: &Snapshot) -> Result<PowerNetwork, BuildError> {
    let (case, snap) = split_generator_buses(case, snap);
    let flows = compute_line_flows(&case, &snap)?;
    let naming = name_entities(&case);

    let mut entities = IndexMap::new();
    for b in &case.buses {
        let id = naming.bus_names[&b.bus_id].clone();
        let entity = match naming.bus_kinds[&b.bus_id] {
            EntityKind::Generator => {
                let p_max: f64 = case
                    .generators
                    .iter()
                    .filter(|g| g.bus_id == b.bus_id)
                    .map(|g| g.p_max)
                    .sum();
                let value = snap.gen_outputs.get(&b.bus_id).copied().unwrap_or_else(|| {
                    case.generators
                        .iter()
                        .filter(|g| g.bus_id == b.bus_id)
                        .map(|g| g.p_gen)
                        .sum()
                });
                Entity { id: id.clone(), kind: EntityKind::Generator, lower_bound: 0.0, upper_bound: p_max, value }
            }
            EntityKind::Load => Entity {
                id: id.clone(),
                kind: EntityKind::Load,
                lower_bound: b.p_demand,
                upper_bound: b.p_demand,
                value: b.p_demand,
            },
            _ => Entity {
                id: id.clone(),
                kind: EntityKind::Neutral,
                lower_bound: 0.0,
                upper_bound: 0.0,
                value: 0.0,
            },
        };
        entities.insert(id, entity);
    }
    let mut line_endpoints = IndexMap::new();
    for f in &flows {
        let id = naming.line_names[f.branch_idx].clone();
        let rate = case.branches[f.branch_idx].rate_a;
        let upper = if rate > 0.0 { rate } else { UNLIMITED_RATING };
        entities.insert(
            id.clone(),
            Entity { id: id.clone(), kind: EntityKind::Line, lower_bound: 0.0, upper_bound: upper, value: f.mw },
        );
        line_endpoints.insert(
            id,
            (naming.bus_names[&f.source_bus].clone(), naming.bus_names[&f.sink_bus].clone()),
        );
    }
    let idrs = generate_idrs_with(&case, &flows, &naming);

    let network = PowerNetwork { entities, idrs, line_endpoints };
    network.validate_shape()?;
    network.validate_operating_point()?;
    Ok(network)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_matpower_case;

    fn two_bus_case() -> RawCase {
        parse_matpower_case(
            "mpc.baseMVA = 100;\n\
             mpc.bus = [1 3 0; 2 1 100;];\n\
             mpc.gen = [1 100 0 300 -300 1 100 1 200 0;];\n\
             mpc.branch = [1 2 0 0.1 0 250;];",
        )
        .unwrap()
    }

    #[test]
    fn dc_two_bus_forces_the_single_path() {
        let case = two_bus_case();
        let snap = solve_dc_flow(&case).unwrap();
        let flow = snap.line_flows[&0];
        assert!((flow - 100.0).abs() < 1e-9);
        assert!((snap.gen_outputs[&1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn dc_three_bus_ring_splits_two_to_one() {
        let case = parse_matpower_case(
            "mpc.baseMVA = 100;\n\
             mpc.bus = [1 3 0; 2 1 0; 3 1 90;];\n\
             mpc.gen = [1 90 0 300 -300 1 100 1 200 0;];\n\
             mpc.branch = [1 2 0 0.1 0 250; 2 3 0 0.1 0 250; 1 3 0 0.1 0 250;];",
        )
        .unwrap();
        let snap = solve_dc_flow(&case).unwrap();
        assert!((snap.line_flows[&0] - 30.0).abs() < 1e-9);
        assert!((snap.line_flows[&1] - 30.0).abs() < 1e-9);
        assert!((snap.line_flows[&2] - 60.0).abs() < 1e-9);
    }

    #[test]
    fn dc_disconnected_is_singular() {
        let case = parse_matpower_case(
            "mpc.baseMVA = 100;\n\
             mpc.bus = [1 3 0; 2 1 50; 3 1 10; 4 1 0;];\n\
             mpc.gen = [1 60 0 300 -300 1 100 1 200 0;];\n\
             mpc.branch = [1 2 0 0.1 0 250;];",
        )
        .unwrap();
        assert!(matches!(solve_dc_flow(&case), Err(BuildError::SingularSystem)));
    }

    #[test]
    fn flow_formula_matches_hand_arithmetic() {
        let case = parse_matpower_case(
            "mpc.baseMVA = 100;\n\
             mpc.bus = [1 3 0; 2 1 100;];\n\
             mpc.gen = [1 100 0 300 -300 1 100 1 200 0;];\n\
             mpc.branch = [1 2 0.1 0 0 250;];",
        )
        .unwrap();
        let mut snap = Snapshot { time_label: "t".into(), ..Default::default() };
        snap.voltages.insert(1, Complex64::new(1.0, 0.0));
        snap.voltages.insert(2, Complex64::new(0.9, 0.0));
        let flows = compute_line_flows(&case, &snap).unwrap();
        assert_eq!(flows[0].source_bus, 1);
        assert_eq!(flows[0].sink_bus, 2);
        assert!((flows[0].mw - 100.0).abs() < 1e-9);

        // Swapping the voltages flips the sign, so the direction reverses.
        // The magnitude is measured at the sending end, now the 0.9 pu bus.
        let mut swapped = Snapshot { time_label: "t".into(), ..Default::default() };
        swapped.voltages.insert(1, Complex64::new(0.9, 0.0));
        swapped.voltages.insert(2, Complex64::new(1.0, 0.0));
        let flows = compute_line_flows(&case, &swapped).unwrap();
        assert_eq!(flows[0].source_bus, 2);
        assert_eq!(flows[0].sink_bus, 1);
        assert!((flows[0].mw - 90.0).abs() < 1e-6);
    }

    #[test]
    fn equal_voltages_give_zero_flow() {
        let case = two_bus_case();
        let mut snap = Snapshot { time_label: "t".into(), ..Default::default() };
        snap.voltages.insert(1, Complex64::new(1.0, 0.0));
        snap.voltages.insert(2, Complex64::new(1.0, 0.0));
        let flows = compute_line_flows(&case, &snap).unwrap();
        assert_eq!(flows[0].mw, 0.0);
        assert_eq!(flows[0].source_bus, 1);
    }

    #[test]
    fn split_leaves_zero_demand_gen_bus_alone() {
        let case = two_bus_case();
        let snap = solve_dc_flow(&case).unwrap();
        let (case2, _) = split_generator_buses(&case, &snap);
        assert_eq!(case2.buses.len(), case.buses.len());
        assert_eq!(case2.branches.len(), case.branches.len());
    }

    #[test]
    fn split_moves_demand_onto_synthetic_load() {
        let case = parse_matpower_case(
            "mpc.baseMVA = 100;\n\
             mpc.bus = [1 3 50; 2 1 70;];\n\
             mpc.gen = [1 120 0 300 -300 1 100 1 200 0;];\n\
             mpc.branch = [1 2 0 0.1 0 250;];",
        )
        .unwrap();
        let snap = solve_dc_flow(&case).unwrap();
        let (case2, snap2) = split_generator_buses(&case, &snap);
        assert_eq!(case2.buses.len(), 3);
        assert_eq!(case2.branches.len(), 2);
        assert_eq!(case2.buses[0].p_demand, 0.0);
        let synthetic_bus = &case2.buses[2];
        assert_eq!(synthetic_bus.p_demand, 50.0);
        let synthetic = &case2.branches[1];
        assert_eq!(synthetic.rate_a, 51.0);
        assert_eq!(snap2.line_flows[&1], 50.0);

        let network = build_network(&case, &snap).unwrap();
        assert_eq!(network.len(), 5);
        let gen = network.entity(&EntityId::from("G1")).unwrap();
        assert_eq!(gen.value, 120.0);
        let split_load = network.entity(&EntityId::from("L2")).unwrap();
        assert_eq!(split_load.value, 50.0);
    }

    #[test]
    fn build_rejects_overloaded_line() {
        let case = two_bus_case();
        let mut snap = solve_dc_flow(&case).unwrap();
        snap.line_flows.insert(0, 400.0);
        assert!(matches!(
            build_network(&case, &snap),
            Err(BuildError::LineOverBound { .. })
        ));
    }

    #[test]
    fn build_rejects_broken_conservation() {
        let case = two_bus_case();
        let mut snap = solve_dc_flow(&case).unwrap();
        snap.line_flows.insert(0, 80.0);
        let err = build_network(&case, &snap).unwrap_err();
        assert!(matches!(err, BuildError::Conservation { .. }));
    }
}
