use miir::fixtures;
use miir::id::EntityId;
use miir::mip::{build_fixed_initial_mip, MipOptions, ConRel, cascade_dead_from};
use miir::cascade::propagate_idr_cascade;
use std::collections::BTreeSet;

fn main() {
    let network = fixtures::fig1_network();
    let initial: BTreeSet<EntityId> = [EntityId::from("G1")].into_iter().collect();
    let model = build_fixed_initial_mip(&network, &initial, &MipOptions::default());
    let cascade = propagate_idr_cascade(&network, &initial).unwrap();
    let dead_from = cascade_dead_from(&model, &cascade, &initial);

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
    // Hand-build an expected y completion.
    let idx = |name: &str| model.entity_index(&EntityId::from(name)).unwrap();
    let flows0: &[(&str, f64)] = &[("T1",135.),("T2",40.),("T3",35.),("T4",35.),("T5",80.),("T6",45.),("T7",40.),("T8",45.),("T9",85.),("G1",135.),("G2",85.),("G3",80.)];
    for t in 0..model.steps() {
        for &(name, v0) in flows0 {
            let i = idx(name);
            let u = model.upper_bounds[i];
            let dead = values[model.x_var(i, t)] > 0.5;
            let v = if t == 0 { v0 } else if dead { u } else {
                match name {
                    "T1"|"T2"|"T3" => 0.0,
                    "T7" => 80.0, "T4" => 70.0, "T9" => 80.0+45.0, "T5" => 70.0+45.0,
                    "T6" => 45.0, "T8" => 45.0,
                    "G2" => 125.0, "G3" => 115.0, "G1" => 0.0,
                    _ => v0,
                }
            };
            values[model.y_var(i, t)] = v;
        }
    }
    let mut bad = 0;
    for c in &model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(v, coef)| coef * values[v]).sum();
        let residual = match c.rel {
            ConRel::Le => lhs - c.rhs,
            ConRel::Ge => c.rhs - lhs,
            ConRel::Eq => (lhs - c.rhs).abs(),
        };
        if residual > 1e-6 {
            bad += 1;
            if bad < 15 { println!("violated: {} residual {residual}", c.name); }
        }
    }
    for (i, v) in model.vars.iter().enumerate() {
        let x = values[i];
        if x < v.lo - 1e-9 || x > v.hi + 1e-9 {
            bad += 1;
            if bad < 25 { println!("bound: {} = {x} not in [{}, {}]", v.name, v.lo, v.hi); }
        }
    }
    println!("total violations of hand solution: {bad}");
}
