//! Reference networks: the nine-bus tutorial system and the Southwest
//! blackout abstraction. Case-file-backed systems load from `fixtures/`.

use crate::case::{load_snapshot, parse_matpower_case, RawCase, Snapshot};
use crate::id::EntityId;
use crate::network::{build_network, Entity, EntityKind, Idr, PowerNetwork};
use indexmap::IndexMap;
use std::collections::BTreeSet;

pub const FIG1_CASE: &str = include_str!("../fixtures/fig1.m");
pub const FIG1_SNAPSHOT: &str = include_str!("../fixtures/fig1_snapshot.json");
pub const CASE9: &str = include_str!("../fixtures/case9.m");
pub const CASE14: &str = include_str!("../fixtures/case14.m");

pub fn fig1_case() -> RawCase {
    parse_matpower_case(FIG1_CASE).expect("fig1 case parses")
}

pub fn fig1_snapshot() -> Snapshot {
    load_snapshot(FIG1_SNAPSHOT, &fig1_case()).expect("fig1 snapshot loads")
}

/// The nine-bus tutorial network: three generators, four loads, two neutral
/// buses, nine lines.
pub fn fig1_network() -> PowerNetwork {
    build_network(&fig1_case(), &fig1_snapshot()).expect("fig1 builds")
}

pub fn case9() -> RawCase {
    parse_matpower_case(CASE9).expect("case9 parses")
}

pub fn case14() -> RawCase {
    parse_matpower_case(CASE14).expect("case14 parses")
}

fn entity(id: &str, kind: EntityKind, lower: f64, upper: f64, value: f64) -> Entity {
    Entity { id: EntityId::from(id), kind, lower_bound: lower, upper_bound: upper, value }
}

fn minterm(members: &[&str]) -> BTreeSet<EntityId> {
    members.iter().map(|s| EntityId::from(*s)).collect()
}

/// The Southwest power system abstraction: 13 buses, 16 lines, and the eleven
/// dependency relations of the blackout case study. Line orientations follow
/// the pre-disturbance flow arrows; flows and ratings are chosen so the
/// operating point balances exactly and only T6 can be driven to its bound.
pub fn southwest_network() -> PowerNetwork {
    use EntityKind::*;
    let gens = [("WECC", 10000.0, 5500.0), ("PV", 4000.0, 500.0)];
    let loads = [("SDGE", 5000.0), ("IID", 900.0), ("CFE", 100.0)];
    let neutrals = ["SE", "DE", "SONGS", "MI", "IV", "NG", "HA", "WALC"];
    // (id, source, sink, flow, rating)
    let lines = [
        ("T1", "WECC", "SE", 5100.0, 6500.0),
        ("T2", "WECC", "DE", 400.0, 1500.0),
        ("T3", "PV", "DE", 400.0, 1300.0),
        ("T4", "SE", "DE", 100.0, 1500.0),
        ("T5", "SE", "SONGS", 5000.0, 5600.0),
        ("T6", "SONGS", "SDGE", 2100.0, 2200.0),
        ("T7", "SONGS", "SDGE", 2900.0, 5001.0),
        ("T8", "DE", "IID", 900.0, 1800.0),
        ("T9", "IID", "IV", 0.0, 150.0),
        ("T10", "PV", "HA", 100.0, 1200.0),
        ("T11", "HA", "NG", 100.0, 1300.0),
        ("T12", "IV", "MI", 0.0, 200.0),
        ("T13", "NG", "IV", 100.0, 400.0),
        ("T14", "IV", "CFE", 100.0, 300.0),
        ("T15", "IID", "WALC", 0.0, 100.0),
        ("T16", "NG", "WALC", 0.0, 250.0),
    ];
    let idr_table: &[(&str, &[&[&str]])] = &[
        ("SE", &[&["T1", "WECC"], &["T4", "DE"]]),
        ("DE", &[&["T3", "PV"], &["T2", "WECC"]]),
        ("SONGS", &[&["T5", "SE"]]),
        ("SDGE", &[&["T6", "SONGS"], &["T7", "MI"]]),
        ("IID", &[&["T8", "DE"], &["T15", "WALC"], &["T9", "IV"]]),
        ("MI", &[&["T12", "IV"]]),
        ("IV", &[&["T13", "NG"]]),
        ("CFE", &[&["T14", "IV"], &["T13", "MI"]]),
        ("WALC", &[&["T16", "NG"]]),
        ("NG", &[&["T11", "HA"]]),
        ("HA", &[&["T10", "PV"]]),
    ];

    let mut entities = IndexMap::new();
    for (id, cap, value) in gens {
        entities.insert(EntityId::from(id), entity(id, Generator, 0.0, cap, value));
    }
    for (id, demand) in loads {
        entities.insert(EntityId::from(id), entity(id, Load, demand, demand, demand));
    }
    for id in neutrals {
        entities.insert(EntityId::from(id), entity(id, Neutral, 0.0, 0.0, 0.0));
    }
    let mut line_endpoints = IndexMap::new();
    for (id, src, dst, flow, rating) in lines {
        entities.insert(EntityId::from(id), entity(id, Line, 0.0, rating, flow));
        line_endpoints.insert(EntityId::from(id), (EntityId::from(src), EntityId::from(dst)));
    }
    let idrs = idr_table
        .iter()
        .map(|(target, minterms)| Idr {
            target: EntityId::from(*target),
            minterms: minterms.iter().map(|m| minterm(m)).collect(),
        })
        .collect();

    let network = PowerNetwork { entities, idrs, line_endpoints };
    network.validate_shape().expect("southwest shape");
    network.validate_operating_point().expect("southwest operating point");
    network
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_counts() {
        let case = fig1_case();
        assert_eq!(case.buses.len(), 9);
        assert_eq!(case.branches.len(), 9);
        assert_eq!(case.generators.len(), 3);
        let network = fig1_network();
        assert_eq!(network.len(), 18);
    }

    #[test]
    fn fig1_idrs_match_the_reference_table() {
        let network = fig1_network();
        let expect: &[(&str, &[&[&str]])] = &[
            ("L1", &[&["T1", "G1"]]),
            ("L2", &[&["T2", "L1"], &["T7", "N2"]]),
            ("L3", &[&["T3", "L1"], &["T4", "N1"]]),
            ("L4", &[&["T6", "N1"], &["T8", "N2"]]),
            ("N1", &[&["T5", "G3"]]),
            ("N2", &[&["T9", "G2"]]),
        ];
        assert_eq!(network.idrs.len(), expect.len());
        for (target, minterms) in expect {
            let idr = network.idr_of(&EntityId::from(*target)).expect("idr present");
            let got: BTreeSet<BTreeSet<EntityId>> = idr.minterms.iter().cloned().collect();
            let want: BTreeSet<BTreeSet<EntityId>> =
                minterms.iter().map(|m| minterm(m)).collect();
            assert_eq!(got, want, "IDR of {target}");
        }
    }

    #[test]
    fn case9_counts() {
        let case = case9();
        assert_eq!(case.buses.len(), 9);
        assert_eq!(case.branches.len(), 9);
        assert_eq!(case.generators.len(), 3);
    }

    #[test]
    fn case14_counts() {
        let case = case14();
        assert_eq!(case.buses.len(), 14);
        assert_eq!(case.branches.len(), 20);
        assert_eq!(case.generators.len(), 5);
    }

    #[test]
    fn southwest_is_a_valid_operating_point() {
        let network = southwest_network();
        assert_eq!(network.len(), 29);
        assert_eq!(network.idrs.len(), 11);
        let t6 = network.entity(&EntityId::from("T6")).unwrap();
        assert_eq!((t6.lower_bound, t6.upper_bound), (0.0, 2200.0));
        let t8 = network.entity(&EntityId::from("T8")).unwrap();
        assert_eq!(t8.upper_bound, 1800.0);
        let pv = network.entity(&EntityId::from("PV")).unwrap();
        assert_eq!(pv.upper_bound, 4000.0);
        let wecc = network.entity(&EntityId::from("WECC")).unwrap();
        assert_eq!(wecc.upper_bound, 10000.0);
        let sdge = network.entity(&EntityId::from("SDGE")).unwrap();
        assert_eq!(sdge.value, 5000.0);
        let iid = network.entity(&EntityId::from("IID")).unwrap();
        assert_eq!(iid.value, 900.0);
    }
}
