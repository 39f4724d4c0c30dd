//! Case-file and snapshot ingestion plus the on-disk network format.
//!
//! The case parser consumes the MATPOWER grammar subset: `mpc.baseMVA`,
//! `mpc.bus`, `mpc.gen`, and `mpc.branch` assignments whose right-hand sides
//! are bracketed numeric matrices with semicolon-terminated rows. Only the
//! columns this crate consumes are interpreted; remaining columns are kept as
//! opaque payload so case variants with extra columns still parse.

use crate::error::CaseError;
use crate::id::EntityId;
use crate::network::{Entity, EntityKind, Idr, PowerNetwork};
use indexmap::IndexMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Bus type codes from the case format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    /// Load bus (type 1).
    Pq,
    /// Generator bus (type 2).
    Pv,
    /// Reference / slack bus (type 3).
    Ref,
}

#[derive(Debug, Clone)]
pub struct BusRow {
    pub bus_id: i64,
    pub bus_type: BusType,
    pub p_demand: f64,
    /// Columns past the consumed ones, kept verbatim.
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GenRow {
    pub bus_id: i64,
    pub p_gen: f64,
    pub p_max: f64,
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BranchRow {
    pub from_bus: i64,
    pub to_bus: i64,
    pub resistance: f64,
    pub reactance: f64,
    /// Long-term MW rating; 0 in the source format means unlimited.
    pub rate_a: f64,
    pub extra: Vec<f64>,
}

/// A parsed case file: buses, generators, branches, and the MVA base.
#[derive(Debug, Clone)]
pub struct RawCase {
    pub base_mva: f64,
    pub buses: Vec<BusRow>,
    pub generators: Vec<GenRow>,
    pub branches: Vec<BranchRow>,
}

impl RawCase {
    pub fn bus(&self, id: i64) -> Option<&BusRow> {
        self.buses.iter().find(|b| b.bus_id == id)
    }

    pub fn has_bus(&self, id: i64) -> bool {
        self.bus(id).is_some()
    }
}

/// A solved operating point for a case: bus voltages and/or branch flows.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub time_label: String,
    /// Complex per-unit voltage by bus id.
    pub voltages: IndexMap<i64, Complex64>,
    /// Signed MW flow by branch index (positive = from-bus toward to-bus).
    pub line_flows: IndexMap<usize, f64>,
    /// MW output by generator bus id.
    pub gen_outputs: IndexMap<i64, f64>,
}

impl Snapshot {
    pub fn has_voltages(&self) -> bool {
        !self.voltages.is_empty()
    }

    pub fn has_flows(&self) -> bool {
        !self.line_flows.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Case parsing
// ---------------------------------------------------------------------------

struct Matrix {
    rows: Vec<Vec<f64>>,
    /// (line, col) of each row start, for diagnostics.
    row_pos: Vec<(usize, usize)>,
}

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner { src, pos: 0, line: 1, col: 1 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self, n: usize) {
        for c in self.src[self.pos..self.pos + n].chars() {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += n;
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            let rest = self.rest();
            let mut it = rest.char_indices();
            match it.next() {
                Some((_, c)) if c.is_whitespace() => {
                    let n = rest
                        .char_indices()
                        .take_while(|(_, c)| c.is_whitespace())
                        .last()
                        .map(|(i, c)| i + c.len_utf8())
                        .unwrap_or(0);
                    self.bump(n);
                }
                Some((_, '%')) => {
                    let n = rest.find('\n').map(|i| i + 1).unwrap_or(rest.len());
                    self.bump(n);
                }
                _ => break,
            }
        }
    }

    fn error(&self, msg: impl Into<String>) -> CaseError {
        CaseError::Syntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn expect(&mut self, token: &str) -> Result<(), CaseError> {
        self.skip_ws_and_comments();
        if self.rest().starts_with(token) {
            self.bump(token.len());
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn number(&mut self) -> Result<f64, CaseError> {
        self.skip_ws_and_comments();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .take_while(|&(i, c)| {
                c.is_ascii_digit()
                    || c == '.'
                    || c == 'e'
                    || c == 'E'
                    || ((c == '+' || c == '-')
                        && (i == 0 || matches!(rest.as_bytes()[i - 1], b'e' | b'E')))
            })
            .last()
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        let text = &rest[..end];
        let value: f64 = text
            .parse()
            .map_err(|_| self.error(format!("expected a number, found `{}`", preview(rest))))?;
        self.bump(end);
        Ok(value)
    }

    fn matrix(&mut self) -> Result<Matrix, CaseError> {
        self.expect("[")?;
        let mut rows = Vec::new();
        let mut row_pos = Vec::new();
        loop {
            self.skip_ws_and_comments();
            if self.rest().starts_with(']') {
                self.bump(1);
                break;
            }
            if self.rest().is_empty() {
                return Err(self.error("unterminated matrix, missing `]`"));
            }
            let start = (self.line, self.col);
            let mut row = Vec::new();
            loop {
                self.skip_ws_and_comments();
                if self.rest().starts_with(';') {
                    self.bump(1);
                    break;
                }
                if self.rest().starts_with(']') {
                    // Last row may omit the trailing semicolon.
                    break;
                }
                if self.rest().starts_with(',') {
                    self.bump(1);
                    continue;
                }
                row.push(self.number()?);
            }
            if !row.is_empty() {
                rows.push(row);
                row_pos.push(start);
            }
        }
        Ok(Matrix { rows, row_pos })
    }
}

fn preview(s: &str) -> String {
    s.chars().take(12).collect()
}

/// Parse a MATPOWER-style case file.
pub fn parse_matpower_case(text: &str) -> Result<RawCase, CaseError> {
    let mut base_mva: Option<f64> = None;
    let mut bus_matrix: Option<Matrix> = None;
    let mut gen_matrix: Option<Matrix> = None;
    let mut branch_matrix: Option<Matrix> = None;

    let mut sc = Scanner::new(text);
    loop {
        sc.skip_ws_and_comments();
        if sc.rest().is_empty() {
            break;
        }
        if let Some(rest) = sc.rest().strip_prefix("mpc.") {
            let field_len = rest
                .char_indices()
                .take_while(|(_, c)| c.is_ascii_alphanumeric() || *c == '_')
                .last()
                .map(|(i, c)| i + c.len_utf8())
                .unwrap_or(0);
            let field = rest[..field_len].to_owned();
            sc.bump(4 + field_len);
            sc.expect("=")?;
            match field.as_str() {
                "baseMVA" => {
                    base_mva = Some(sc.number()?);
                    sc.expect(";")?;
                }
                "bus" => bus_matrix = Some(sc.matrix()?),
                "gen" => gen_matrix = Some(sc.matrix()?),
                "branch" => branch_matrix = Some(sc.matrix()?),
                _ => skip_assignment(&mut sc)?,
            }
        } else {
            // `function mpc = case9` headers and anything else outside
            // mpc.<field> assignments is skipped line by line.
            let n = sc.rest().find('\n').map(|i| i + 1).unwrap_or(sc.rest().len());
            sc.bump(n);
        }
    }

    let base_mva = base_mva.ok_or(CaseError::Syntax {
        line: 1,
        col: 1,
        msg: "missing mpc.baseMVA".into(),
    })?;
    if base_mva <= 0.0 {
        return Err(CaseError::BadBaseMva(base_mva));
    }

    let bus_matrix = bus_matrix.ok_or(CaseError::Syntax {
        line: 1,
        col: 1,
        msg: "missing mpc.bus".into(),
    })?;
    let mut buses = Vec::new();
    for (row, pos) in bus_matrix.rows.iter().zip(&bus_matrix.row_pos) {
        if row.len() < 3 {
            return Err(CaseError::Syntax {
                line: pos.0,
                col: pos.1,
                msg: format!("bus row needs at least 3 fields, found {}", row.len()),
            });
        }
        let bus_type = match row[1] as i64 {
            1 => BusType::Pq,
            2 => BusType::Pv,
            3 => BusType::Ref,
            other => {
                return Err(CaseError::Syntax {
                    line: pos.0,
                    col: pos.1,
                    msg: format!("unknown bus type {other}"),
                })
            }
        };
        buses.push(BusRow {
            bus_id: row[0] as i64,
            bus_type,
            p_demand: row[2],
            extra: row[3..].to_vec(),
        });
    }
    for (i, b) in buses.iter().enumerate() {
        if buses[..i].iter().any(|o| o.bus_id == b.bus_id) {
            return Err(CaseError::DuplicateBus(b.bus_id));
        }
    }

    let mut generators = Vec::new();
    if let Some(m) = gen_matrix {
        for (row, pos) in m.rows.iter().zip(&m.row_pos) {
            if row.len() < 9 {
                return Err(CaseError::Syntax {
                    line: pos.0,
                    col: pos.1,
                    msg: format!("gen row needs at least 9 fields, found {}", row.len()),
                });
            }
            generators.push(GenRow {
                bus_id: row[0] as i64,
                p_gen: row[1],
                p_max: row[8],
                extra: row[9..].to_vec(),
            });
        }
    }

    let mut branches = Vec::new();
    if let Some(m) = branch_matrix {
        for (row, pos) in m.rows.iter().zip(&m.row_pos) {
            if row.len() < 6 {
                return Err(CaseError::Syntax {
                    line: pos.0,
                    col: pos.1,
                    msg: format!("branch row needs at least 6 fields, found {}", row.len()),
                });
            }
            branches.push(BranchRow {
                from_bus: row[0] as i64,
                to_bus: row[1] as i64,
                resistance: row[2],
                reactance: row[3],
                rate_a: row[5],
                extra: row[6..].to_vec(),
            });
        }
    }

    let case = RawCase { base_mva, buses, generators, branches };
    for g in &case.generators {
        if !case.has_bus(g.bus_id) {
            return Err(CaseError::UnknownBus(g.bus_id));
        }
    }
    for br in &case.branches {
        if !case.has_bus(br.from_bus) {
            return Err(CaseError::UnknownBus(br.from_bus));
        }
        if !case.has_bus(br.to_bus) {
            return Err(CaseError::UnknownBus(br.to_bus));
        }
        if br.reactance == 0.0 && br.resistance == 0.0 {
            return Err(CaseError::ZeroReactance { from: br.from_bus, to: br.to_bus });
        }
    }
    Ok(case)
}

fn skip_assignment(sc: &mut Scanner<'_>) -> Result<(), CaseError> {
    sc.skip_ws_and_comments();
    if sc.rest().starts_with('[') {
        sc.matrix()?;
        Ok(())
    } else {
        let n = sc.rest().find(';').map(|i| i + 1).unwrap_or(sc.rest().len());
        sc.bump(n);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Snapshot file
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    time_label: String,
    #[serde(default)]
    voltages: Vec<(i64, f64, f64)>,
    #[serde(default)]
    line_flows: Vec<(usize, f64)>,
    #[serde(default)]
    gen_outputs: Vec<(i64, f64)>,
}

/// Parse and validate a snapshot against its case.
pub fn load_snapshot(text: &str, case: &RawCase) -> Result<Snapshot, CaseError> {
    let file: SnapshotFile = serde_json::from_str(text)?;
    if file.voltages.is_empty() && file.line_flows.is_empty() {
        return Err(CaseError::EmptySnapshot);
    }
    let mut snap = Snapshot { time_label: file.time_label, ..Default::default() };
    for (bus, re, im) in file.voltages {
        if !case.has_bus(bus) {
            return Err(CaseError::UnknownBus(bus));
        }
        snap.voltages.insert(bus, Complex64::new(re, im));
    }
    for (idx, mw) in file.line_flows {
        if idx >= case.branches.len() {
            return Err(CaseError::UnknownBranch(idx));
        }
        snap.line_flows.insert(idx, mw);
    }
    for (bus, mw) in file.gen_outputs {
        if !case.has_bus(bus) {
            return Err(CaseError::UnknownBus(bus));
        }
        snap.gen_outputs.insert(bus, mw);
    }
    Ok(snap)
}

/// Serialize a snapshot to the on-disk format.
pub fn emit_snapshot(snap: &Snapshot) -> String {
    let file = SnapshotFile {
        time_label: snap.time_label.clone(),
        voltages: snap.voltages.iter().map(|(&b, v)| (b, v.re, v.im)).collect(),
        line_flows: snap.line_flows.iter().map(|(&i, &f)| (i, f)).collect(),
        gen_outputs: snap.gen_outputs.iter().map(|(&b, &f)| (b, f)).collect(),
    };
    serde_json::to_string_pretty(&file).expect("snapshot serializes")
}

// ---------------------------------------------------------------------------
// Network file
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NetworkEntity {
    id: EntityId,
    kind: String,
    lower_bound: f64,
    upper_bound: f64,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkLine {
    id: EntityId,
    from_entity: EntityId,
    to_entity: EntityId,
}

#[derive(Serialize, Deserialize)]
struct NetworkIdr {
    target: EntityId,
    minterms: Vec<Vec<EntityId>>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    entities: Vec<NetworkEntity>,
    lines: Vec<NetworkLine>,
    idrs: Vec<NetworkIdr>,
}

fn kind_name(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::Generator => "generator",
        EntityKind::Load => "load",
        EntityKind::Neutral => "neutral",
        EntityKind::Line => "line",
    }
}

/// Serialize a network to the on-disk format.
pub fn emit_network(network: &PowerNetwork) -> String {
    let file = NetworkFile {
        entities: network
            .entities
            .values()
            .map(|e| NetworkEntity {
                id: e.id.clone(),
                kind: kind_name(e.kind).to_owned(),
                lower_bound: e.lower_bound,
                upper_bound: e.upper_bound,
                value: e.value,
            })
            .collect(),
        lines: network
            .line_endpoints
            .iter()
            .map(|(id, (from, to))| NetworkLine {
                id: id.clone(),
                from_entity: from.clone(),
                to_entity: to.clone(),
            })
            .collect(),
        idrs: network
            .idrs
            .iter()
            .map(|idr| NetworkIdr {
                target: idr.target.clone(),
                minterms: idr
                    .minterms
                    .iter()
                    .map(|m| {
                        let mut v: Vec<EntityId> = m.iter().cloned().collect();
                        v.sort();
                        v
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

/// Parse a network file and re-validate it.
pub fn parse_network(text: &str) -> Result<PowerNetwork, CaseError> {
    let file: NetworkFile = serde_json::from_str(text)?;
    let mut entities = IndexMap::new();
    for e in file.entities {
        let kind = match e.kind.as_str() {
            "generator" => EntityKind::Generator,
            "load" => EntityKind::Load,
            "neutral" => EntityKind::Neutral,
            "line" => EntityKind::Line,
            other => return Err(CaseError::BadNetwork(format!("unknown kind `{other}`"))),
        };
        if entities.contains_key(&e.id) {
            return Err(CaseError::BadNetwork(format!("duplicate entity {}", e.id)));
        }
        entities.insert(
            e.id.clone(),
            Entity {
                id: e.id,
                kind,
                lower_bound: e.lower_bound,
                upper_bound: e.upper_bound,
                value: e.value,
            },
        );
    }
    let mut line_endpoints = IndexMap::new();
    for l in file.lines {
        for id in [&l.id, &l.from_entity, &l.to_entity] {
            if !entities.contains_key(id) {
                return Err(CaseError::BadNetwork(format!("line table references unknown {id}")));
            }
        }
        line_endpoints.insert(l.id, (l.from_entity, l.to_entity));
    }
    let mut idrs = Vec::new();
    for i in file.idrs {
        if !entities.contains_key(&i.target) {
            return Err(CaseError::BadNetwork(format!("IDR targets unknown {}", i.target)));
        }
        for m in &i.minterms {
            if m.is_empty() {
                return Err(CaseError::BadNetwork(format!("empty minterm in IDR of {}", i.target)));
            }
            for id in m {
                if !entities.contains_key(id) {
                    return Err(CaseError::BadNetwork(format!(
                        "IDR of {} references unknown {id}",
                        i.target
                    )));
                }
            }
        }
        idrs.push(Idr {
            target: i.target,
            minterms: i.minterms.into_iter().map(|m| m.into_iter().collect()).collect(),
        });
    }
    let network = PowerNetwork { entities, idrs, line_endpoints };
    network
        .validate_shape()
        .map_err(|e| CaseError::BadNetwork(e.to_string()))?;
    Ok(network)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
% comment line
mpc.bus = [
    1 3 0   0 0 0 1 1.0 0 345 1 1.1 0.9;
    2 1 50  0 0 0 1 1.0 0 345 1 1.1 0.9;
];
mpc.gen = [
    1 60 0 300 -300 1.0 100 1 120 10;
];
mpc.branch = [
    1 2 0.01 0.1 0 130 130 130 0 0 1 -360 360;
];
"#;

    #[test]
    fn parses_tiny_case() {
        let case = parse_matpower_case(TINY).unwrap();
        assert_eq!(case.base_mva, 100.0);
        assert_eq!(case.buses.len(), 2);
        assert_eq!(case.generators.len(), 1);
        assert_eq!(case.branches.len(), 1);
        assert_eq!(case.buses[1].p_demand, 50.0);
        assert_eq!(case.generators[0].p_max, 120.0);
        assert_eq!(case.branches[0].rate_a, 130.0);
        assert_eq!(case.buses[0].extra.len(), 10);
    }

    #[test]
    fn empty_branch_matrix_is_fine() {
        let text = TINY.replace(
            "mpc.branch = [\n    1 2 0.01 0.1 0 130 130 130 0 0 1 -360 360;\n];",
            "mpc.branch = [];",
        );
        let case = parse_matpower_case(&text).unwrap();
        assert_eq!(case.branches.len(), 0);
    }

    #[test]
    fn short_bus_row_names_the_line() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3;\n];";
        let err = parse_matpower_case(text).unwrap_err();
        match err {
            CaseError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_bus_rejected() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0; 1 1 5;];";
        assert!(matches!(parse_matpower_case(text), Err(CaseError::DuplicateBus(1))));
    }

    #[test]
    fn dangling_branch_endpoint_rejected() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0;];\nmpc.gen = [];\nmpc.branch = [1 9 0 0.1 0 100;];";
        assert!(matches!(parse_matpower_case(text), Err(CaseError::UnknownBus(9))));
    }

    #[test]
    fn zero_impedance_rejected() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0; 2 1 0;];\nmpc.gen = [];\nmpc.branch = [1 2 0 0 0 100;];";
        assert!(matches!(parse_matpower_case(text), Err(CaseError::ZeroReactance { .. })));
    }

    #[test]
    fn snapshot_unknown_bus_rejected() {
        let case = parse_matpower_case(TINY).unwrap();
        let text = r#"{"time_label":"t0","voltages":[[99, 1.0, 0.0]]}"#;
        assert!(matches!(load_snapshot(text, &case), Err(CaseError::UnknownBus(99))));
    }

    #[test]
    fn snapshot_needs_voltages_or_flows() {
        let case = parse_matpower_case(TINY).unwrap();
        let text = r#"{"time_label":"t0","gen_outputs":[[1, 60.0]]}"#;
        assert!(matches!(load_snapshot(text, &case), Err(CaseError::EmptySnapshot)));
    }

    #[test]
    fn parser_survives_garbage() {
        for garbage in ["", "mpc.bus = [", "\u{0}\u{1}\u{2}", "mpc.baseMVA = ;", "]]];;;["] {
            let _ = parse_matpower_case(garbage);
        }
    }
}
