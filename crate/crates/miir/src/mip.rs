//! Mixed-integer model of worst-case cascade propagation.
//!
//! For a network with `|E|` entities the model spans timesteps `0..=|E|-1`.
//! Per entity and step it carries a failure indicator `x` and a flow value
//! `y`; per minterm and step a hit indicator `c`. The objective maximizes the
//! number of entities failed at the final step, so the continuous flow values
//! take on the adversarial role: they are steered wherever the constraints
//! allow so that as many entities as possible can be driven over their
//! bounds.
//!
//! Failure rules encoded:
//! - failures are permanent (monotone `x`),
//! - a bus can newly fail only one step after every minterm of its relation
//!   is hit,
//! - a line or generator can newly fail only if it carried at least its
//!   rated bound on the previous step, or (for lines) if its source bus is
//!   down; once failed its flow variable is pinned at the bound so its terms
//!   drop out of the balances,
//! - conservation holds at every bus on steps `1..=|E|-2`, with failed
//!   entities' terms masked,
//! - a line fails no later than the bus it carries power out of.

use crate::cascade::{propagate_idr_cascade, CascadeResult};
use crate::error::{MipError, SolveError};
use crate::id::EntityId;
use crate::network::{EntityKind, PowerNetwork};
use crate::simplex::{solve_lp_simplex, LpProblem, LpRow, LpStatus, Rel};
use indexmap::IndexMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;

pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
}

/// A (possibly partial) assignment of model variables.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub assignment: IndexMap<String, f64>,
    pub objective_value: f64,
    pub status: SolStatus,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConRel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub rel: ConRel,
    pub rhs: f64,
}

/// Model build switches.
#[derive(Debug, Clone, Default)]
pub struct MipOptions {
    /// Keep the line-follows-bus inequality in its printed (reversed)
    /// orientation for comparison runs.
    pub paper_literal: bool,
}

#[derive(Debug, Clone)]
pub struct MipModel {
    pub entity_ids: Vec<EntityId>,
    pub entity_kinds: Vec<EntityKind>,
    pub upper_bounds: Vec<f64>,
    pub build_values: Vec<f64>,
    /// Source bus index per entity, for lines.
    pub line_source: Vec<Option<usize>>,
    /// Relations as (target entity index, minterm member indices).
    pub idrs: Vec<(usize, Vec<Vec<usize>>)>,
    /// Flattened minterms: (idr index, minterm index within the idr).
    pub minterms: Vec<(usize, usize)>,
    /// Final timestep `|E| - 1`; steps run `0..=horizon`.
    pub horizon: usize,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Maximized objective.
    pub objective: Vec<(usize, f64)>,
    pub name_to_var: IndexMap<String, usize>,
    pub k: Option<usize>,
    pub fixed_initial: Option<Vec<bool>>,
}

impl MipModel {
    pub fn steps(&self) -> usize {
        self.horizon + 1
    }

    pub fn num_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn x_var(&self, entity: usize, t: usize) -> usize {
        entity * self.steps() + t
    }

    pub fn y_var(&self, entity: usize, t: usize) -> usize {
        self.num_entities() * self.steps() + entity * self.steps() + t
    }

    pub fn c_var(&self, minterm: usize, t: usize) -> usize {
        2 * self.num_entities() * self.steps() + minterm * self.steps() + t
    }

    pub fn entity_index(&self, id: &EntityId) -> Option<usize> {
        self.entity_ids.iter().position(|e| e == id)
    }

    pub fn objective_of(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Closed-form size census; the builder must agree with it.
    pub fn census(&self) -> ModelCensus {
        let e = self.num_entities();
        let steps = self.steps();
        let m = self.minterms.len();
        let lines = self.line_source.iter().filter(|s| s.is_some()).count();
        let gens = self
            .entity_kinds
            .iter()
            .filter(|k| **k == EntityKind::Generator)
            .count();
        let buses = e - lines;
        let idr_count = self.idrs.len();
        ModelCensus {
            x_vars: e * steps,
            y_vars: e * steps,
            c_vars: m * steps,
            binaries: e * steps + m * steps,
            cardinality_rows: if self.k.is_some() { 1 } else { 0 },
            monotone_rows: e * (steps - 1),
            hit_rows: m * steps,
            idr_rows: idr_count * (steps - 1),
            trip_rows: (lines + gens) * (steps - 1),
            pin_rows: (lines + gens) * (steps - 1),
            balance_rows: buses * (steps - 2),
            follow_rows: lines * (steps - 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelCensus {
    pub x_vars: usize,
    pub y_vars: usize,
    pub c_vars: usize,
    pub binaries: usize,
    pub cardinality_rows: usize,
    pub monotone_rows: usize,
    pub hit_rows: usize,
    pub idr_rows: usize,
    pub trip_rows: usize,
    pub pin_rows: usize,
    pub balance_rows: usize,
    pub follow_rows: usize,
}

impl ModelCensus {
    pub fn total_rows(&self) -> usize {
        self.cardinality_rows
            + self.monotone_rows
            + self.hit_rows
            + self.idr_rows
            + self.trip_rows
            + self.pin_rows
            + self.balance_rows
            + self.follow_rows
    }

    pub fn total_vars(&self) -> usize {
        self.x_vars + self.y_vars + self.c_vars
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

enum InitialSpec<'a> {
    Cardinality(usize),
    Fixed(&'a BTreeSet<EntityId>),
}

/// Build the K-failure model: exactly `k` entities fail at step 0.
pub fn build_mip(network: &PowerNetwork, k: usize, opts: &MipOptions) -> MipModel {
    build(network, InitialSpec::Cardinality(k), opts)
}

/// Build the fixed-initial model: the given entities (and only they) fail at
/// step 0.
pub fn build_fixed_initial_mip(
    network: &PowerNetwork,
    initial: &BTreeSet<EntityId>,
    opts: &MipOptions,
) -> MipModel {
    build(network, InitialSpec::Fixed(initial), opts)
}

fn build(network: &PowerNetwork, init: InitialSpec<'_>, opts: &MipOptions) -> MipModel {
    let entity_ids: Vec<EntityId> = network.entities.keys().cloned().collect();
    let index_of: IndexMap<&EntityId, usize> =
        entity_ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let n = entity_ids.len();
    let horizon = n.saturating_sub(1);
    let steps = horizon + 1;

    let entity_kinds: Vec<EntityKind> =
        entity_ids.iter().map(|id| network.entities[id].kind).collect();
    let upper_bounds: Vec<f64> =
        entity_ids.iter().map(|id| network.entities[id].upper_bound).collect();
    let build_values: Vec<f64> =
        entity_ids.iter().map(|id| network.entities[id].value).collect();
    let line_source: Vec<Option<usize>> = entity_ids
        .iter()
        .map(|id| network.line_endpoints.get(id).map(|(src, _)| index_of[src]))
        .collect();
    let idrs: Vec<(usize, Vec<Vec<usize>>)> = network
        .idrs
        .iter()
        .map(|idr| {
            let target = index_of[&idr.target];
            let minterms = idr
                .minterms
                .iter()
                .map(|m| m.iter().map(|member| index_of[member]).collect())
                .collect();
            (target, minterms)
        })
        .collect();
    let mut minterms = Vec::new();
    for (j, (_, ms)) in idrs.iter().enumerate() {
        for mi in 0..ms.len() {
            minterms.push((j, mi));
        }
    }

    // Sanitized, collision-free name stems.
    let mut stems = Vec::with_capacity(n);
    let mut used: IndexMap<String, usize> = IndexMap::new();
    for id in &entity_ids {
        let mut stem = sanitize(id.as_str());
        let slot = used.entry(stem.clone()).or_insert(0);
        *slot += 1;
        if *slot > 1 {
            stem = format!("{stem}__{slot}");
        }
        stems.push(stem);
    }

    let fixed_initial = match init {
        InitialSpec::Fixed(set) => {
            Some(entity_ids.iter().map(|id| set.contains(id)).collect::<Vec<bool>>())
        }
        InitialSpec::Cardinality(_) => None,
    };

    let mut vars = Vec::with_capacity(2 * n * steps + minterms.len() * steps);
    for (i, stem) in stems.iter().enumerate() {
        for t in 0..steps {
            let (lo, hi) = match &fixed_initial {
                Some(flags) if t == 0 => {
                    let v = if flags[i] { 1.0 } else { 0.0 };
                    (v, v)
                }
                _ => (0.0, 1.0),
            };
            vars.push(Variable { name: format!("x_{stem}_{t}"), lo, hi, binary: true });
        }
    }
    for (i, stem) in stems.iter().enumerate() {
        let u = upper_bounds[i];
        let v0 = build_values[i];
        for t in 0..steps {
            let (lo, hi) = match entity_kinds[i] {
                EntityKind::Load | EntityKind::Neutral => (v0, v0),
                _ if t == 0 => (v0, v0),
                _ => (0.0, u + 1.0),
            };
            vars.push(Variable { name: format!("y_{stem}_{t}"), lo, hi, binary: false });
        }
    }
    for &(j, mi) in &minterms {
        let target = idrs[j].0;
        for t in 0..steps {
            vars.push(Variable {
                name: format!("c_{}_{mi}_{t}", stems[target]),
                lo: 0.0,
                hi: 1.0,
                binary: true,
            });
        }
    }

    let mut model = MipModel {
        entity_ids,
        entity_kinds,
        upper_bounds,
        build_values,
        line_source,
        idrs,
        minterms,
        horizon,
        vars,
        constraints: Vec::new(),
        objective: Vec::new(),
        name_to_var: IndexMap::new(),
        k: match init {
            InitialSpec::Cardinality(k) => Some(k),
            InitialSpec::Fixed(_) => None,
        },
        fixed_initial,
    };

    let mut rows: Vec<Constraint> = Vec::new();

    // Cardinality of the initial failure set.
    if let Some(k) = model.k {
        let terms = (0..n).map(|i| (model.x_var(i, 0), 1.0)).collect();
        rows.push(Constraint { name: "card".into(), terms, rel: ConRel::Eq, rhs: k as f64 });
    }

    // Failures are permanent.
    for i in 0..n {
        for t in 1..steps {
            rows.push(Constraint {
                name: format!("mono_{}_{t}", stems[i]),
                terms: vec![(model.x_var(i, t), 1.0), (model.x_var(i, t - 1), -1.0)],
                rel: ConRel::Ge,
                rhs: 0.0,
            });
        }
    }

    // A minterm counts as hit only if one of its members is down.
    for (m_idx, &(j, mi)) in model.minterms.iter().enumerate() {
        let (target, ref ms) = model.idrs[j];
        for t in 0..steps {
            let mut terms = vec![(model.c_var(m_idx, t), 1.0)];
            for &member in &ms[mi] {
                terms.push((model.x_var(member, t), -1.0));
            }
            rows.push(Constraint {
                name: format!("hit_{}_{mi}_{t}", stems[target]),
                terms,
                rel: ConRel::Le,
                rhs: 0.0,
            });
        }
    }

    // A bus newly fails only after every minterm was hit on the previous step.
    for (j, (target, ms)) in model.idrs.iter().enumerate() {
        let n_minterms = ms.len() as f64;
        let m_base: Vec<usize> = model
            .minterms
            .iter()
            .enumerate()
            .filter(|(_, &(jj, _))| jj == j)
            .map(|(m_idx, _)| m_idx)
            .collect();
        for t in 1..steps {
            let mut terms = vec![
                (model.x_var(*target, t), n_minterms),
                (model.x_var(*target, t - 1), -n_minterms),
            ];
            for &m_idx in &m_base {
                terms.push((model.c_var(m_idx, t - 1), -1.0));
            }
            rows.push(Constraint {
                name: format!("idr_{}_{t}", stems[*target]),
                terms,
                rel: ConRel::Le,
                rhs: 0.0,
            });
        }
    }

    // Trip license: a line or generator newly fails only if it carried at
    // least its bound on the previous step (or, for a line, if its source bus
    // is down this step).
    for i in 0..n {
        let is_line = model.line_source[i].is_some();
        if !(is_line || model.entity_kinds[i] == EntityKind::Generator) {
            continue;
        }
        let u = model.upper_bounds[i];
        for t in 1..steps {
            let mut terms = vec![(model.x_var(i, t), u), (model.x_var(i, t - 1), -u)];
            if let Some(src) = model.line_source[i] {
                terms.push((model.x_var(src, t), -u));
            }
            if u > 0.0 {
                terms.push((model.y_var(i, t - 1), -1.0));
            }
            rows.push(Constraint {
                name: format!("trip_{}_{t}", stems[i]),
                terms,
                rel: ConRel::Le,
                rhs: 0.0,
            });
        }
    }

    // Once failed, the flow value sits at the bound so masked balance terms
    // vanish.
    for i in 0..n {
        let is_line = model.line_source[i].is_some();
        if !(is_line || model.entity_kinds[i] == EntityKind::Generator) {
            continue;
        }
        let u = model.upper_bounds[i];
        for t in 1..steps {
            rows.push(Constraint {
                name: format!("pin_{}_{t}", stems[i]),
                terms: vec![(model.x_var(i, t), u), (model.y_var(i, t), -1.0)],
                rel: ConRel::Le,
                rhs: 0.0,
            });
        }
    }

    // Conservation with masked terms at every bus, steps 1..=|E|-2.
    let mut in_lines: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_lines: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (line, (src, dst)) in &network.line_endpoints {
        let line_i = index_of_id(&model, line);
        out_lines[index_of_id(&model, src)].push(line_i);
        in_lines[index_of_id(&model, dst)].push(line_i);
    }
    for b in 0..n {
        if model.line_source[b].is_some() {
            continue;
        }
        for t in 1..steps.saturating_sub(1) {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for &q in &out_lines[b] {
                terms.push((model.y_var(q, t), 1.0));
                terms.push((model.x_var(q, t), -model.upper_bounds[q]));
            }
            for &q in &in_lines[b] {
                terms.push((model.y_var(q, t), -1.0));
                terms.push((model.x_var(q, t), model.upper_bounds[q]));
            }
            match model.entity_kinds[b] {
                EntityKind::Generator => {
                    terms.push((model.y_var(b, t), -1.0));
                    terms.push((model.x_var(b, t + 1), model.upper_bounds[b]));
                }
                EntityKind::Load => {
                    terms.push((model.y_var(b, t), 1.0));
                    terms.push((model.x_var(b, t + 1), -model.upper_bounds[b]));
                }
                _ => {}
            }
            rows.push(Constraint {
                name: format!("bal_{}_{t}", stems[b]),
                terms,
                rel: ConRel::Eq,
                rhs: 0.0,
            });
        }
    }

    // A line fails no later than its source bus; the printed-orientation
    // variant reverses the inequality.
    for i in 0..n {
        if let Some(src) = model.line_source[i] {
            for t in 1..steps {
                rows.push(Constraint {
                    name: format!("follow_{}_{t}", stems[i]),
                    terms: vec![(model.x_var(i, t), 1.0), (model.x_var(src, t), -1.0)],
                    rel: if opts.paper_literal { ConRel::Le } else { ConRel::Ge },
                    rhs: 0.0,
                });
            }
        }
    }

    model.constraints = rows;
    model.objective = (0..n).map(|i| (model.x_var(i, horizon), 1.0)).collect();
    model.name_to_var =
        model.vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    model
}

fn index_of_id(model: &MipModel, id: &EntityId) -> usize {
    model.entity_index(id).expect("entity known to the model")
}

// ---------------------------------------------------------------------------
// LP emission
// ---------------------------------------------------------------------------

fn fmt_num(v: f64) -> String {
    if v == v.round() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{:.11e}", v)
    }
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    for &(v, c) in terms {
        if c == 0.0 {
            continue;
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let mag = c.abs();
        if (mag - 1.0).abs() < 1e-15 {
            let _ = write!(out, " {sign} {}", vars[v].name);
        } else {
            let _ = write!(out, " {sign} {} {}", fmt_num(mag), vars[v].name);
        }
    }
}

/// Emit the model as LP-format text with deterministic ordering.
pub fn emit_lp(model: &MipModel) -> String {
    let mut out = String::new();
    out.push_str("Maximize\n obj:");
    push_terms(&mut out, &model.objective, &model.vars);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        push_terms(&mut out, &c.terms, &model.vars);
        let rel = match c.rel {
            ConRel::Le => "<=",
            ConRel::Eq => "=",
            ConRel::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.binary && v.lo == 0.0 && v.hi == 1.0 {
            continue;
        }
        if v.lo == v.hi {
            let _ = writeln!(out, " {} = {}", v.name, fmt_num(v.lo));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lo), v.name, fmt_num(v.hi));
        }
    }
    out.push_str("Binaries\n");
    let mut line_len = 0usize;
    for v in &model.vars {
        if !v.binary {
            continue;
        }
        if line_len == 0 {
            out.push(' ');
        }
        out.push_str(&v.name);
        line_len += v.name.len() + 1;
        if line_len > 70 {
            out.push('\n');
            line_len = 0;
        } else {
            out.push(' ');
        }
    }
    if line_len > 0 {
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

// ---------------------------------------------------------------------------
// Solution files
// ---------------------------------------------------------------------------

/// Parse solver output: an `objective <value>` line followed by
/// `<name> <value>` pairs. Unknown names are rejected; missing variables
/// default to zero.
pub fn parse_solution(text: &str, model: &MipModel) -> Result<LpSolution, MipError> {
    let mut objective: Option<f64> = None;
    let mut assignment: IndexMap<String, f64> = IndexMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().expect("non-empty line");
        let value_text = parts
            .next()
            .ok_or(MipError::BadSolutionLine { line: lineno + 1 })?;
        if parts.next().is_some() {
            return Err(MipError::BadSolutionLine { line: lineno + 1 });
        }
        let value: f64 = value_text.parse().map_err(|_| MipError::BadValue {
            line: lineno + 1,
            value: value_text.to_owned(),
        })?;
        if head.eq_ignore_ascii_case("objective") {
            objective = Some(value);
        } else {
            if !model.name_to_var.contains_key(head) {
                return Err(MipError::UnknownVariable(head.to_owned()));
            }
            assignment.insert(head.to_owned(), value);
        }
    }
    let objective_value = objective.ok_or(MipError::MissingObjective)?;
    for v in &model.vars {
        assignment.entry(v.name.clone()).or_insert(0.0);
    }
    Ok(LpSolution { assignment, objective_value, status: SolStatus::Feasible })
}

/// Serialize a solution in the format `parse_solution` accepts.
pub fn emit_solution(sol: &LpSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "objective {}", fmt_num(sol.objective_value));
    for (name, value) in &sol.assignment {
        if *value != 0.0 {
            let _ = writeln!(out, "{name} {}", fmt_num(*value));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Violation {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub constraint_violations: Vec<Violation>,
    pub bound_violations: Vec<Violation>,
    pub integrality_violations: Vec<Violation>,
    /// Only populated in strict mode: buses whose relations were fully hit
    /// yet stayed up the following step.
    pub unforced_failures: Vec<Violation>,
    pub max_residual: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.constraint_violations.is_empty()
            && self.bound_violations.is_empty()
            && self.integrality_violations.is_empty()
    }

    pub fn passed_strict(&self) -> bool {
        self.passed() && self.unforced_failures.is_empty()
    }
}

/// Re-check every constraint, bound, and binary against an assignment.
pub fn verify_solution(model: &MipModel, sol: &LpSolution, strict: bool) -> VerifyReport {
    let mut report = VerifyReport::default();
    let values: Vec<f64> = model
        .vars
        .iter()
        .map(|v| sol.assignment.get(&v.name).copied().unwrap_or(0.0))
        .collect();

    for (i, v) in model.vars.iter().enumerate() {
        let x = values[i];
        let excess = (v.lo - x).max(x - v.hi).max(0.0);
        if excess > VERIFY_TOL {
            report.bound_violations.push(Violation { name: v.name.clone(), residual: excess });
        }
        if v.binary {
            let dist = x.abs().min((x - 1.0).abs());
            if dist > VERIFY_TOL {
                report
                    .integrality_violations
                    .push(Violation { name: v.name.clone(), residual: dist });
            }
        }
    }

    for c in &model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(v, coef)| coef * values[v]).sum();
        let residual = match c.rel {
            ConRel::Le => lhs - c.rhs,
            ConRel::Ge => c.rhs - lhs,
            ConRel::Eq => (lhs - c.rhs).abs(),
        };
        if residual > VERIFY_TOL {
            report.constraint_violations.push(Violation { name: c.name.clone(), residual });
        }
        report.max_residual = report.max_residual.max(residual.max(0.0));
    }

    if strict {
        for (j, (target, ms)) in model.idrs.iter().enumerate() {
            for t in 1..model.steps() {
                let all_hit = (0..ms.len()).all(|mi| {
                    ms[mi]
                        .iter()
                        .any(|&member| values[model.x_var(member, t - 1)] > 0.5)
                });
                if all_hit && values[model.x_var(*target, t)] < 0.5 {
                    report.unforced_failures.push(Violation {
                        name: format!("forced_{}_{t}", model.entity_ids[*target]),
                        residual: 1.0,
                    });
                }
                let _ = j;
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Timeline extraction
// ---------------------------------------------------------------------------

/// Read the failure timeline out of a verified assignment.
pub fn extract_timeline(model: &MipModel, sol: &LpSolution) -> Result<CascadeResult, MipError> {
    let mut failed_at = IndexMap::new();
    let mut final_failed = BTreeSet::new();
    let mut steps = 0usize;
    for (i, id) in model.entity_ids.iter().enumerate() {
        let mut first: Option<usize> = None;
        let mut prev = false;
        for t in 0..model.steps() {
            let name = &model.vars[model.x_var(i, t)].name;
            let dead = sol.assignment.get(name).copied().unwrap_or(0.0) >= 0.5;
            if dead && first.is_none() {
                first = Some(t);
            }
            if prev && !dead {
                return Err(MipError::NonMonotone(id.to_string()));
            }
            prev = dead;
        }
        if let Some(t) = first {
            failed_at.insert(id.clone(), t);
            final_failed.insert(id.clone());
            steps = steps.max(t);
        }
    }
    Ok(CascadeResult { failed_at, final_failed, steps })
}

// ---------------------------------------------------------------------------
// Trajectory construction
// ---------------------------------------------------------------------------

/// First-failure steps for a model trajectory: key entity index, value step.
pub type DeadFrom = IndexMap<usize, usize>;

/// Translate a cascade timeline into model failure steps: initial entities
/// fail at 0, everything else no earlier than step 1.
pub fn cascade_dead_from(
    model: &MipModel,
    cascade: &CascadeResult,
    initial: &BTreeSet<EntityId>,
) -> DeadFrom {
    let mut dead_from = DeadFrom::new();
    for (id, &t) in &cascade.failed_at {
        if let Some(i) = model.entity_index(id) {
            let t = if initial.contains(id) { 0 } else { t.max(1) };
            dead_from.insert(i, t.min(model.horizon));
        }
    }
    dead_from
}

/// Assemble a full assignment from failure steps: integral `x`, minterm-hit
/// indicators for `c`, and flows completed by a least-total-flow LP solve.
pub fn assignment_from_dead_steps(
    model: &MipModel,
    dead_from: &DeadFrom,
) -> Result<LpSolution, SolveError> {
    let mut values = vec![0.0f64; model.vars.len()];
    for i in 0..model.num_entities() {
        let from = dead_from.get(&i).copied();
        for t in 0..model.steps() {
            let dead = from.map(|f| t >= f).unwrap_or(false);
            values[model.x_var(i, t)] = if dead { 1.0 } else { 0.0 };
        }
    }
    for (m_idx, &(j, mi)) in model.minterms.iter().enumerate() {
        let members = &model.idrs[j].1[mi];
        for t in 0..model.steps() {
            let hit = members.iter().any(|&e| values[model.x_var(e, t)] > 0.5);
            values[model.c_var(m_idx, t)] = if hit { 1.0 } else { 0.0 };
        }
    }
    complete_flows(model, &mut values)?;
    let assignment: IndexMap<String, f64> = model
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.clone(), values[i]))
        .collect();
    let objective_value = model.objective_of(&values);
    Ok(LpSolution { assignment, objective_value, status: SolStatus::Feasible })
}

/// The dependency-closure trajectory for an initial set, with flows. Its
/// objective value equals the closure size, making it a warm start for the
/// exact solver.
pub fn closure_solution(
    model: &MipModel,
    network: &PowerNetwork,
    initial: &BTreeSet<EntityId>,
) -> Result<LpSolution, SolveError> {
    let cascade = propagate_idr_cascade(network, initial)
        .map_err(|e| SolveError::Numeric(e.to_string()))?;
    let dead_from = cascade_dead_from(model, &cascade, initial);
    assignment_from_dead_steps(model, &dead_from)
}

/// Given fixed binaries in `values`, overwrite the continuous entries with a
/// feasible flow completion minimizing total flow. Fails if none exists.
pub fn complete_flows(model: &MipModel, values: &mut [f64]) -> Result<(), SolveError> {
    let continuous: Vec<usize> = (0..model.vars.len())
        .filter(|&v| !model.vars[v].binary)
        .collect();
    let col_of: IndexMap<usize, usize> =
        continuous.iter().enumerate().map(|(col, &v)| (v, col)).collect();
    let n = continuous.len();
    let mut problem = LpProblem {
        lo: continuous.iter().map(|&v| model.vars[v].lo).collect(),
        hi: continuous.iter().map(|&v| model.vars[v].hi).collect(),
        rows: Vec::new(),
        objective: vec![-1.0; n],
    };
    for c in &model.constraints {
        let mut constant = 0.0;
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for &(v, coef) in &c.terms {
            match col_of.get(&v) {
                Some(&col) => terms.push((col, coef)),
                None => constant += coef * values[v],
            }
        }
        let rhs = c.rhs - constant;
        if terms.is_empty() {
            let violated = match c.rel {
                ConRel::Le => -rhs > VERIFY_TOL,
                ConRel::Ge => rhs > VERIFY_TOL,
                ConRel::Eq => rhs.abs() > VERIFY_TOL,
            };
            if violated {
                return Err(SolveError::Infeasible);
            }
            continue;
        }
        let rel = match c.rel {
            ConRel::Le => Rel::Le,
            ConRel::Ge => Rel::Ge,
            ConRel::Eq => Rel::Eq,
        };
        problem.rows.push(LpRow { terms, rel, rhs });
    }
    let (status, solution, _) = solve_lp_simplex(&problem)?;
    if status != LpStatus::Optimal {
        return Err(SolveError::Infeasible);
    }
    for (col, &v) in continuous.iter().enumerate() {
        values[v] = solution[col];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::id::EntityId;

    fn fig1_model(k: usize) -> (crate::network::PowerNetwork, MipModel) {
        let network = fixtures::fig1_network();
        let model = build_mip(&network, k, &MipOptions::default());
        (network, model)
    }

    #[test]
    fn fig1_census() {
        let (_, model) = fig1_model(1);
        let census = model.census();
        assert_eq!(census.x_vars, 18 * 18);
        assert_eq!(census.y_vars, 18 * 18);
        assert_eq!(census.c_vars, 9 * 18);
        assert_eq!(census.monotone_rows, 18 * 17);
        assert_eq!(census.cardinality_rows, 1);
        assert_eq!(model.vars.len(), census.total_vars());
        assert_eq!(model.constraints.len(), census.total_rows());
        let binaries = model.vars.iter().filter(|v| v.binary).count();
        assert_eq!(binaries, census.binaries);
    }

    #[test]
    fn emit_is_deterministic() {
        let (_, a) = fig1_model(1);
        let (_, b) = fig1_model(1);
        assert_eq!(emit_lp(&a), emit_lp(&b));
    }

    #[test]
    fn empty_network_emits_minimal_lp() {
        let network = crate::network::PowerNetwork {
            entities: indexmap::IndexMap::new(),
            idrs: Vec::new(),
            line_endpoints: indexmap::IndexMap::new(),
        };
        let model = build_mip(&network, 0, &MipOptions::default());
        let text = emit_lp(&model);
        assert!(text.starts_with("Maximize"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn solution_roundtrip_and_referential_check() {
        let (_, model) = fig1_model(1);
        let text = "objective 5\nx_G1_0 1\ny_T1_0 135\n";
        let sol = parse_solution(text, &model).unwrap();
        assert_eq!(sol.objective_value, 5.0);
        assert_eq!(sol.assignment["x_G1_0"], 1.0);
        assert_eq!(sol.assignment["x_G2_0"], 0.0);

        let err = parse_solution("objective 1\nx_bogus_0 1\n", &model).unwrap_err();
        assert!(matches!(err, MipError::UnknownVariable(_)));
        let err = parse_solution("x_G1_0 1\n", &model).unwrap_err();
        assert!(matches!(err, MipError::MissingObjective));
        let err = parse_solution("objective 1\nx_G1_0 abc\n", &model).unwrap_err();
        assert!(matches!(err, MipError::BadValue { .. }));
    }

    #[test]
    fn closure_trajectory_verifies_for_g1() {
        let network = fixtures::fig1_network();
        let initial: BTreeSet<EntityId> = [EntityId::from("G1")].into_iter().collect();
        let model = build_fixed_initial_mip(&network, &initial, &MipOptions::default());
        let sol = closure_solution(&model, &network, &initial).unwrap();
        assert_eq!(sol.objective_value, 5.0);
        let report = verify_solution(&model, &sol, false);
        assert!(report.passed(), "violations: {:?}", report.constraint_violations);

        let timeline = extract_timeline(&model, &sol).unwrap();
        assert_eq!(timeline.final_failed.len(), 5);
        assert_eq!(timeline.failed_at[&EntityId::from("G1")], 0);
    }

    #[test]
    fn verifier_reports_monotonicity_breach() {
        let network = fixtures::fig1_network();
        let initial: BTreeSet<EntityId> = [EntityId::from("G1")].into_iter().collect();
        let model = build_fixed_initial_mip(&network, &initial, &MipOptions::default());
        let mut sol = closure_solution(&model, &network, &initial).unwrap();
        sol.assignment.insert("x_G1_3".into(), 0.0);
        let report = verify_solution(&model, &sol, false);
        assert!(!report.passed());
        assert!(report
            .constraint_violations
            .iter()
            .any(|v| v.name.starts_with("mono_G1_")));
        let err = extract_timeline(&model, &sol).unwrap_err();
        assert!(matches!(err, MipError::NonMonotone(_)));
    }

    #[test]
    fn verifier_reports_bound_breach() {
        let network = fixtures::fig1_network();
        let initial: BTreeSet<EntityId> = [EntityId::from("G1")].into_iter().collect();
        let model = build_fixed_initial_mip(&network, &initial, &MipOptions::default());
        let mut sol = closure_solution(&model, &network, &initial).unwrap();
        sol.assignment.insert("y_T7_5".into(), 200.0);
        let report = verify_solution(&model, &sol, false);
        assert!(report
            .bound_violations
            .iter()
            .chain(report.constraint_violations.iter())
            .any(|v| v.name.contains("T7")));
    }

    #[test]
    fn strict_mode_flags_unforced_failures() {
        let network = fixtures::fig1_network();
        let initial: BTreeSet<EntityId> = [EntityId::from("G1")].into_iter().collect();
        let model = build_fixed_initial_mip(&network, &initial, &MipOptions::default());
        // Keep L1 alive even though its only minterm is hit from step 0 on.
        let mut dead_from = DeadFrom::new();
        let g1 = model.entity_index(&EntityId::from("G1")).unwrap();
        let t1 = model.entity_index(&EntityId::from("T1")).unwrap();
        dead_from.insert(g1, 0);
        dead_from.insert(t1, 1);
        let sol = assignment_from_dead_steps(&model, &dead_from).unwrap();
        let report = verify_solution(&model, &sol, true);
        assert!(report.passed());
        assert!(!report.passed_strict());
    }
}
