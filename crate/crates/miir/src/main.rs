use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use miir::bb::{solve_mip_bb_with_stats, SolveOptions};
use miir::case::{emit_network, load_snapshot, parse_matpower_case, parse_network};
use miir::cascade::propagate_idr_cascade;
use miir::contingency::{
    evaluate_initial_set, exhaustive_k_list, heuristic_k_list, ContingencyReport, EvalMode,
    WccpConfig, DEFAULT_ENUM_BUDGET,
};
use miir::error::BuildError;
use miir::id::EntityId;
use miir::mip::{
    build_fixed_initial_mip, build_mip, emit_lp, emit_solution, extract_timeline,
    parse_solution, verify_solution, MipModel, MipOptions, SolStatus,
};
use miir::network::{build_network, solve_dc_flow, PowerNetwork};
use miir::reduction::{build_kcol_from_hypergraph, GenBoundRule, Hypergraph};
use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

#[derive(Parser)]
#[command(name = "miir", version, about = "Power-network dependency modeling and contingency analysis")]
struct Cli {
    /// Worker threads for kill-set sweeps (1 = sequential).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Heuristic,
    Exact,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Idr,
    Wccp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenBound {
    PerEdgeHeadroom,
    TotalPlusOne,
}

#[derive(Subcommand)]
enum Command {
    /// Build a network file from a case file and a solved snapshot.
    Build {
        /// Case file (bus/gen/branch matrices).
        #[arg(long)]
        case: PathBuf,
        /// Snapshot file with voltages and/or line flows.
        #[arg(long, conflicts_with = "dc")]
        snapshot: Option<PathBuf>,
        /// Derive the snapshot with the built-in lossless linear flow.
        #[arg(long)]
        dc: bool,
        /// Output network file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Propagate a cascade and print the timeline as TSV rows.
    Cascade {
        #[arg(long)]
        network: PathBuf,
        /// Comma-separated entity ids failing at step 0.
        #[arg(long, value_delimiter = ',', required = true)]
        initial: Vec<String>,
    },
    /// Compute the K-contingency list.
    Contingency {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Method::Heuristic)]
        method: Method,
        #[arg(long, value_enum, default_value_t = Mode::Idr)]
        mode: Mode,
        /// Write dead-count vs. K rows for plotting.
        #[arg(long)]
        data_out: Option<PathBuf>,
        /// Time limit per worst-case evaluation, seconds.
        #[arg(long, default_value_t = 120.0)]
        time_limit: f64,
    },
    /// Emit the failure model as an LP file.
    ExportLp {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, conflicts_with = "initial")]
        k: Option<usize>,
        /// Comma-separated entity ids fixed to fail at step 0.
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
        /// Keep the line-follows-bus inequality in its printed orientation.
        #[arg(long)]
        paper_literal: bool,
    },
    /// Solve the failure model with the built-in branch-and-bound.
    Solve {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, conflicts_with = "initial")]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<String>>,
        /// Time limit in seconds.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        /// Write the solution file here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        paper_literal: bool,
    },
    /// Check an external solution against the model row by row.
    VerifySolution {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, conflicts_with = "initial")]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<String>>,
        #[arg(long)]
        solution: PathBuf,
        /// Additionally require every fully-hit bus to fail next step.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        paper_literal: bool,
    },
    /// Turn a hypergraph into a contingency-list instance.
    Reduce {
        /// Hypergraph file: one edge per line, whitespace-separated vertices.
        #[arg(long)]
        hypergraph: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum, default_value_t = GenBound::PerEdgeHeadroom)]
        gen_bound: GenBound,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_network_file(path: &PathBuf) -> Result<PowerNetwork> {
    let network = parse_network(&read(path)?)?;
    network.validate_operating_point()?;
    Ok(network)
}

fn to_ids(raw: &[String]) -> BTreeSet<EntityId> {
    raw.iter().map(|s| EntityId::new(s.clone())).collect()
}

fn model_for(
    network: &PowerNetwork,
    k: Option<usize>,
    initial: &Option<Vec<String>>,
    paper_literal: bool,
) -> Result<(MipModel, Option<BTreeSet<EntityId>>)> {
    let opts = MipOptions { paper_literal };
    match (k, initial) {
        (Some(k), None) => Ok((build_mip(network, k, &opts), None)),
        (None, Some(ids)) => {
            let initial = to_ids(ids);
            for id in &initial {
                if network.entity(id).is_none() {
                    bail!("unknown entity {id} in --initial");
                }
            }
            Ok((build_fixed_initial_mip(network, &initial, &opts), Some(initial)))
        }
        _ => Err(anyhow!("exactly one of --k or --initial is required")),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let threads = cli.threads;
    match cli.command {
        Command::Build { case, snapshot, dc, out } => {
            let raw = parse_matpower_case(&read(&case)?)?;
            let snap = match (&snapshot, dc) {
                (Some(path), false) => load_snapshot(&read(path)?, &raw)?,
                (None, true) => solve_dc_flow(&raw)?,
                _ => bail!("provide exactly one of --snapshot or --dc"),
            };
            let network = build_network(&raw, &snap).map_err(describe_build_error)?;
            for line in network.zero_flow_lines() {
                eprintln!("note: line {line} carries no pre-disturbance flow; orientation taken from the case file");
            }
            fs::write(&out, emit_network(&network))
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "network written to {} ({} entities, {} relations)",
                out.display(),
                network.len(),
                network.idrs.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Cascade { network, initial } => {
            let network = load_network_file(&network)?;
            let initial = to_ids(&initial);
            let result = propagate_idr_cascade(&network, &initial)?;
            let mut rows: Vec<(usize, &EntityId)> =
                result.failed_at.iter().map(|(id, &t)| (t, id)).collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
            for (t, id) in rows {
                println!("{t}\t{id}");
            }
            eprintln!("failed {} of {} entities in {} steps", result.dead_count(), network.len(), result.steps);
            Ok(ExitCode::SUCCESS)
        }
        Command::Contingency { network, k, method, mode, data_out, time_limit } => {
            let network = load_network_file(&network)?;
            let eval_mode = match mode {
                Mode::Idr => EvalMode::IdrOnly,
                Mode::Wccp => EvalMode::Wccp,
            };
            let wccp = WccpConfig {
                time_limit: Duration::from_secs_f64(time_limit),
                ..WccpConfig::default()
            };
            let started = Instant::now();
            let mut report = run_contingency(&network, k, method, eval_mode, &wccp, threads)?;
            if eval_mode == EvalMode::Wccp && report.wccp_dead_count.is_none() {
                let initial: BTreeSet<EntityId> = report.chosen.iter().cloned().collect();
                report.wccp_dead_count =
                    Some(evaluate_initial_set(&network, &initial, EvalMode::Wccp, &wccp)?);
            }
            let elapsed = started.elapsed();
            let method_name = match method {
                Method::Heuristic => "heuristic",
                Method::Exact => "exact",
            };
            let dead = match eval_mode {
                EvalMode::IdrOnly => report.idr_dead_count,
                EvalMode::Wccp => report.wccp_dead_count.unwrap_or(report.idr_dead_count),
            };
            println!("k\tmethod\tdead\tseconds");
            println!("{k}\t{method_name}\t{dead}\t{:.3}", elapsed.as_secs_f64());
            println!(
                "chosen\t{}",
                report
                    .chosen
                    .iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            for (round, entry) in report.per_round_log.iter().enumerate() {
                println!(
                    "round\t{}\t{}\t{}\t{:.6}",
                    round + 1,
                    entry.entity,
                    entry.kill_set_size,
                    entry.fmhv
                );
            }
            if let Some(path) = data_out {
                let mut data = String::from("# k dead\n");
                for kk in 1..=k {
                    let r = run_contingency(&network, kk, method, eval_mode, &wccp, threads)?;
                    let dead = match eval_mode {
                        EvalMode::IdrOnly => r.idr_dead_count,
                        EvalMode::Wccp => match r.wccp_dead_count {
                            Some(d) => d,
                            None => {
                                let initial: BTreeSet<EntityId> =
                                    r.chosen.iter().cloned().collect();
                                evaluate_initial_set(&network, &initial, EvalMode::Wccp, &wccp)?
                            }
                        },
                    };
                    data.push_str(&format!("{kk} {dead}\n"));
                }
                fs::write(&path, data)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportLp { network, k, initial, out, paper_literal } => {
            let network = load_network_file(&network)?;
            let (model, _) = model_for(&network, k, &initial, paper_literal)?;
            fs::write(&out, emit_lp(&model))
                .with_context(|| format!("writing {}", out.display()))?;
            let census = model.census();
            println!(
                "LP written to {} ({} variables, {} rows, {} binaries)",
                out.display(),
                census.total_vars(),
                census.total_rows(),
                census.binaries
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { network, k, initial, time_limit, out, paper_literal } => {
            let network = load_network_file(&network)?;
            let (model, _) = model_for(&network, k, &initial, paper_literal)?;
            let opts = SolveOptions {
                time_limit: Duration::from_secs_f64(time_limit),
                ..SolveOptions::default()
            };
            let (sol, stats) = solve_mip_bb_with_stats(&model, &network, &opts)?;
            match sol.status {
                SolStatus::Infeasible => {
                    println!("status\tinfeasible");
                    return Ok(ExitCode::SUCCESS);
                }
                status => {
                    let gap = (stats.best_bound - sol.objective_value).max(0.0);
                    println!("status\t{status:?}");
                    println!("objective\t{}", sol.objective_value);
                    println!("bound\t{}", stats.best_bound);
                    println!("gap\t{gap}");
                    println!("nodes\t{}", stats.nodes);
                    println!("seconds\t{:.3}", stats.elapsed.as_secs_f64());
                }
            }
            let timeline = extract_timeline(&model, &sol)?;
            let mut rows: Vec<(usize, &EntityId)> =
                timeline.failed_at.iter().map(|(id, &t)| (t, id)).collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
            for (t, id) in rows {
                println!("{t}\t{id}");
            }
            if let Some(path) = out {
                fs::write(&path, emit_solution(&sol))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifySolution { network, k, initial, solution, strict, paper_literal } => {
            let network = load_network_file(&network)?;
            let (model, _) = model_for(&network, k, &initial, paper_literal)?;
            let sol = parse_solution(&read(&solution)?, &model)?;
            let report = verify_solution(&model, &sol, strict);
            for v in &report.constraint_violations {
                println!("violated\t{}\tresidual\t{:.9}", v.name, v.residual);
            }
            for v in &report.bound_violations {
                println!("bound\t{}\texcess\t{:.9}", v.name, v.residual);
            }
            for v in &report.integrality_violations {
                println!("fractional\t{}\tdistance\t{:.9}", v.name, v.residual);
            }
            for v in &report.unforced_failures {
                println!("unforced\t{}", v.name);
            }
            let ok = if strict { report.passed_strict() } else { report.passed() };
            if ok {
                println!("verified\tmax-residual\t{:.3e}", report.max_residual);
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verification failed");
                Ok(ExitCode::from(3))
            }
        }
        Command::Reduce { hypergraph, p, gen_bound, out } => {
            let h = Hypergraph::parse(&read(&hypergraph)?)?;
            let rule = match gen_bound {
                GenBound::PerEdgeHeadroom => GenBoundRule::PerEdgeHeadroom,
                GenBound::TotalPlusOne => GenBoundRule::TotalPlusOne,
            };
            let inst = build_kcol_from_hypergraph(&h, p, rule)?;
            fs::write(&out, emit_network(&inst.network))
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "instance written to {} ({} entities); K = {}, failure target S(M) = {} + M",
                out.display(),
                inst.network.len(),
                inst.k,
                inst.p
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_contingency(
    network: &PowerNetwork,
    k: usize,
    method: Method,
    mode: EvalMode,
    wccp: &WccpConfig,
    threads: usize,
) -> Result<ContingencyReport> {
    let report = match method {
        Method::Heuristic => heuristic_k_list(network, k, threads > 1)?,
        Method::Exact => exhaustive_k_list(network, k, mode, DEFAULT_ENUM_BUDGET, wccp)?,
    };
    Ok(report)
}

fn describe_build_error(err: BuildError) -> anyhow::Error {
    anyhow!("{err}")
}
