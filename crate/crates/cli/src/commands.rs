use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use qns_core::engine::{
    append_grid_csv, parasitic_seed, parasitic_spec, read_grid_csv, run_simulation, sweep_grid, with_parasitic_pairs,
    write_grid_csv, CellRecord, CellStatus, LinkParams, RunConfig, RunMetrics, Scenario, ServiceQueues, SweepSpec,
    GRID_CSV_HEADER,
};
use qns_core::netmodel::{
    build_transition_system, compute_routes, generate_topology, parse_route, route_name, select_main_pairs, Graph,
    NetworkSpec, PairKind, ServicePair, TransitionSystem,
};
use qns_core::policies::{PolicyRegistry, PolicySetup, SolveCache};
use qns_core::stochproc::{StochasticParams, Traffic};
use qns_ipsolver::{parse_dump, solve as solve_ip, SolveOptions, SolveStatus};
use qns_satlink::{
    accumulate_pairs, best_fixed_split, dual_rate_series, joint_window, optimal_split_integer, rate_source_adapter,
    single_rate_series, write_rate_csv, Accumulation, Allocation, LinkHardware, LinkTrace, OpticsParams, SatError,
};
use serde::Serialize;
use tracing::{info, warn};

use crate::config::{ExperimentConfig, SatlinkConfig, TrafficConfig};
use crate::CliError;

/// Salt separating the main-pair selection stream from the topology stream.
const SELECTION_SALT: u64 = 0x5E1E_C7ED_9A17_5EED;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub resume: bool,
    pub workers_env: Option<String>,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn sat_err(e: SatError) -> CliError {
    match e {
        SatError::EmptyWindow => runtime_err(e),
        other => config_err(other),
    }
}

fn master_seed(cfg: &ExperimentConfig, opts: &Options) -> u64 {
    opts.seed.unwrap_or(cfg.engine.master_seed)
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime_err(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))
}

/// Graph plus main pairs, with routes fixed by the config or computed.
pub fn build_network(cfg: &ExperimentConfig, master: u64) -> Result<NetworkSpec, CliError> {
    let graph = generate_topology(cfg.topology()?, master).map_err(config_err)?;
    let p = &cfg.pairs;
    let route = |g: &Graph, a, b| compute_routes(g, (a, b), p.routes_per_pair, p.penalty).map_err(config_err);
    let mut pairs = Vec::new();
    if p.main.is_empty() {
        let selected = select_main_pairs(&graph, p.edge_removal_prob, master ^ SELECTION_SALT).map_err(config_err)?;
        for (alice, bob) in selected {
            pairs.push(ServicePair {
                alice,
                bob,
                kind: PairKind::Main,
                routes: route(&graph, alice, bob)?,
            });
        }
    } else {
        let node = |name: &str| {
            graph
                .index_of(name)
                .ok_or_else(|| CliError::Config(format!("pairs.main: unknown node {name:?}")))
        };
        for entry in &p.main {
            let (alice, bob) = (node(&entry.alice)?, node(&entry.bob)?);
            let routes = if entry.routes.is_empty() {
                route(&graph, alice, bob)?
            } else {
                entry
                    .routes
                    .iter()
                    .map(|r| parse_route(&graph, r).map_err(config_err))
                    .collect::<Result<_, _>>()?
            };
            pairs.push(ServicePair {
                alice,
                bob,
                kind: PairKind::Main,
                routes,
            });
        }
    }
    let spec = NetworkSpec { graph, pairs };
    spec.validate().map_err(config_err)?;
    Ok(spec)
}

fn scenario(cfg: &ExperimentConfig, master: u64) -> Result<Scenario, CliError> {
    let s = cfg.stochastic()?;
    Ok(Scenario {
        spec: build_network(cfg, master)?,
        n_parasitic: cfg.pairs.parasitic,
        routes_per_pair: cfg.pairs.routes_per_pair,
        penalty: cfg.pairs.penalty,
        link: LinkParams {
            alpha: s.alpha_hz,
            eta: s.resolved_eta()?,
            dt: s.dt_s,
            cap: s.cap,
            bsm_factor: s.bsm_factor,
        },
    })
}

fn satlink_or_default(cfg: &ExperimentConfig) -> (OpticsParams, LinkHardware) {
    cfg.satlink
        .as_ref()
        .map_or((OpticsParams::default(), LinkHardware::default()), |s| (s.optics, s.hardware))
}

pub fn topo(cfg: &ExperimentConfig, opts: &Options) -> Result<(), CliError> {
    let master = master_seed(cfg, opts);
    let base = build_network(cfg, master)?;
    let p = &cfg.pairs;
    let net = with_parasitic_pairs(&base, p.parasitic, p.routes_per_pair, p.penalty, parasitic_seed(master, 0))
        .map_err(config_err)?;
    let system = build_transition_system(&net.graph, &net.all_routes()).map_err(config_err)?;
    create_out(&opts.out)?;
    write_file(&opts.out.join("edges.txt"), net.graph.to_edge_list().as_bytes())?;
    write_file(&opts.out.join("m_tilde.csv"), system.m_tilde_csv().as_bytes())?;
    write_file(&opts.out.join("n_tilde.csv"), system.n_tilde_csv().as_bytes())?;
    let mut routes = String::new();
    for pair in &net.pairs {
        let kind = match pair.kind {
            PairKind::Main => "main",
            PairKind::Parasitic => "parasitic",
        };
        for r in &pair.routes {
            routes.push_str(&format!(
                "{kind} {} {}\n",
                net.graph.pair_name(pair.alice, pair.bob),
                route_name(&net.graph, r)
            ));
        }
    }
    write_file(&opts.out.join("routes.txt"), routes.as_bytes())?;
    println!(
        "{} nodes, {} edges, {} queues, {} transitions",
        net.graph.node_count(),
        net.graph.edge_count(),
        system.n_queues(),
        system.n_transitions()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    policy: String,
    seed: u64,
    steps: u64,
    transient_discard: u64,
    main_loads_hz: [f64; 2],
    parasitic_load_hz: f64,
    metrics: &'a RunMetrics,
}

fn run_params(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    system: &TransitionSystem,
    queues: &ServiceQueues,
) -> Result<(StochasticParams, [f64; 2], f64), CliError> {
    let s = cfg.stochastic()?;
    let (mut params, loads, parasitic) = match &cfg.traffic {
        TrafficConfig::Poisson {
            main_loads_hz,
            parasitic_load_hz,
        } => (
            queues.params(system, &scenario.link, main_loads_hz[0], main_loads_hz[1], *parasitic_load_hz),
            *main_loads_hz,
            *parasitic_load_hz,
        ),
        TrafficConfig::Batch { count, period_s } => {
            let mut params = queues.params(system, &scenario.link, 0.0, 0.0, 0.0);
            let mut per_queue = vec![0; system.n_queues()];
            per_queue[queues.main[0]] += count[0];
            per_queue[queues.main[1]] += count[1];
            params.traffic = Traffic::Batch {
                count: per_queue,
                period: *period_s,
            };
            (params, [0.0; 2], 0.0)
        }
    };
    if let Some(path) = &s.arrival_trace {
        let trace = LinkTrace::load(path).map_err(sat_err)?;
        let (optics, hw) = satlink_or_default(cfg);
        let steps = usize::try_from(s.steps).map_err(config_err)?;
        let schedule =
            rate_source_adapter(&trace, &optics, &hw, s.arrival_trace_start_s, s.dt_s, steps).map_err(sat_err)?;
        params.arrival_schedule = Some(Arc::new(schedule));
    }
    params.validate(system).map_err(config_err)?;
    Ok((params, loads, parasitic))
}

pub fn run(cfg: &ExperimentConfig, opts: &Options) -> Result<(), CliError> {
    let master = master_seed(cfg, opts);
    let scenario = scenario(cfg, master)?;
    let s = cfg.stochastic()?;
    let policies = cfg.policy_configs()?;
    let solve_options = cfg.engine.solve_options()?;
    let net = parasitic_spec(&scenario, master, 0).map_err(config_err)?;
    let system = build_transition_system(&net.graph, &net.all_routes()).map_err(config_err)?;
    let queues = ServiceQueues::locate(&system, &net).map_err(config_err)?;
    let (params, loads, parasitic) = run_params(cfg, &scenario, &system, &queues)?;
    if s.steps <= s.transient_discard {
        return Err(CliError::Config(format!(
            "stochastic.steps ({}) must exceed transient_discard ({})",
            s.steps, s.transient_discard
        )));
    }
    let registry = PolicyRegistry::default();
    let setup = PolicySetup {
        spec: &net,
        system: &system,
        solve_options,
    };
    let built = policies
        .iter()
        .map(|pc| registry.build(pc, &setup).map_err(config_err))
        .collect::<Result<Vec<_>, _>>()?;
    create_out(&opts.out)?;
    let run_cfg = RunConfig {
        steps: s.steps,
        transient_discard: s.transient_discard,
        seed: master,
    };
    for policy in &built {
        let id = policy.id();
        let cache = (cfg.engine.memo_capacity > 0).then(|| SolveCache::new(cfg.engine.memo_capacity));
        let metrics = run_simulation(&system, &params, policy.as_ref(), &run_cfg, cache.as_ref()).map_err(runtime_err)?;
        info!(policy = %id, unserved = metrics.unserved_fraction, avg_backlog = metrics.avg_backlog, "run finished");
        let report = RunReport {
            policy: id.clone(),
            seed: master,
            steps: s.steps,
            transient_discard: s.transient_discard,
            main_loads_hz: loads,
            parasitic_load_hz: parasitic,
            metrics: &metrics,
        };
        write_json(&opts.out.join(format!("metrics_{id}.json")), &report)?;
        let mut w = csv_writer(&opts.out.join(format!("trace_{id}.csv")))?;
        w.write_record(["t", "total_demand"]).map_err(runtime_err)?;
        for (t, d) in &metrics.demand_trace {
            w.write_record([t.to_string(), d.to_string()]).map_err(runtime_err)?;
        }
        w.flush().map_err(runtime_err)?;
        println!("{id}: unserved_fraction {}", metrics.unserved_fraction);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct GridSummary {
    policy: String,
    parasitic_load_hz: f64,
    stable_area: usize,
    simulated: usize,
    skipped_dominated: usize,
    failed: usize,
}

pub fn sweep(cfg: &ExperimentConfig, opts: &Options) -> Result<(), CliError> {
    let master = master_seed(cfg, opts);
    let scenario = scenario(cfg, master)?;
    let s = cfg.stochastic()?;
    let grid = cfg.grid()?;
    let policies = cfg.policy_configs()?;
    if !matches!(cfg.traffic, TrafficConfig::Poisson { .. }) {
        return Err(CliError::Config("sweep needs Poisson traffic".into()));
    }
    if s.arrival_trace.is_some() {
        return Err(CliError::Config("sweep does not support stochastic.arrival_trace".into()));
    }
    let spec = SweepSpec {
        axis1: grid.axis1,
        axis2: grid.axis2,
        parasitic_loads: grid.parasitic_loads_hz.clone(),
        parasitic_sets: grid.parasitic_sets,
        steps: s.steps,
        transient_discard: s.transient_discard,
        threshold: cfg.engine.threshold,
        workers: cfg.engine.resolved_workers(opts.workers_env.as_deref())?,
        master_seed: master,
        memo_capacity: cfg.engine.memo_capacity,
        skip_dominated: grid.skip_dominated,
        solve_options: cfg.engine.solve_options()?,
    };
    if spec.steps <= spec.transient_discard {
        return Err(CliError::Config("stochastic.steps must exceed transient_discard".into()));
    }
    create_out(&opts.out)?;
    let progress_path = opts.out.join("progress.csv");
    let prior = if opts.resume && progress_path.exists() {
        let f = File::open(&progress_path).map_err(runtime_err)?;
        let cells = read_grid_csv(f).map_err(|e| config_err(format!("{}: {e}", progress_path.display())))?;
        info!(cells = cells.len(), "resuming from progress file");
        cells
    } else {
        write_file(&progress_path, format!("{GRID_CSV_HEADER}\n").as_bytes())?;
        Vec::new()
    };
    let progress = OpenOptions::new()
        .append(true)
        .open(&progress_path)
        .map_err(runtime_err)?;
    let progress = Mutex::new(progress);
    let on_cell = |cell: &CellRecord| {
        let mut f = progress.lock().expect("progress lock");
        let res = append_grid_csv(&mut *f, cell)
            .map_err(|e| e.to_string())
            .and_then(|_| f.flush().map_err(|e| e.to_string()));
        if let Err(e) = res {
            warn!(error = %e, "cannot record progress");
        }
    };
    let registry = PolicyRegistry::default();
    let grids = sweep_grid(&scenario, &spec, &policies, &registry, &prior, &on_cell).map_err(|e| match e {
        qns_core::engine::EngineError::Policy(_) | qns_core::engine::EngineError::Net(_) => config_err(e),
        other => runtime_err(other),
    })?;
    let mut by_policy: BTreeMap<String, Vec<CellRecord>> = BTreeMap::new();
    let mut summary = Vec::new();
    for g in &grids {
        by_policy.entry(g.policy.clone()).or_default().extend(g.cells.iter().cloned());
        let count = |st: CellStatus| g.cells.iter().filter(|c| c.status == st).count();
        summary.push(GridSummary {
            policy: g.policy.clone(),
            parasitic_load_hz: g.parasitic_load_hz,
            stable_area: g.stable_area(),
            simulated: count(CellStatus::Simulated),
            skipped_dominated: count(CellStatus::SkippedDominated),
            failed: count(CellStatus::Failed),
        });
        println!(
            "{} @ {} Hz parasitic: {} stable of {} cells",
            g.policy,
            g.parasitic_load_hz,
            g.stable_area(),
            g.cells.len()
        );
    }
    for (policy, cells) in &by_policy {
        let f = File::create(opts.out.join(format!("grid_{policy}.csv"))).map_err(runtime_err)?;
        write_grid_csv(f, cells).map_err(runtime_err)?;
    }
    write_json(&opts.out.join("summary.json"), &summary)
}

#[derive(Debug, Serialize)]
struct SingleSummary {
    trace: String,
    m_s: u64,
    total_pairs: f64,
    total_pairs_corrected: f64,
    sigma: f64,
}

#[derive(Debug, Serialize)]
struct DualSummary {
    m_s: u64,
    static_split: (u64, u64),
    static_total_corrected: f64,
    dynamic_total_corrected: f64,
    static_sigma: f64,
    dynamic_sigma: f64,
}

#[derive(Debug, Default, Serialize)]
struct SatSummary {
    single: Vec<SingleSummary>,
    dual: Vec<DualSummary>,
}

#[derive(Debug, Serialize)]
struct SplitRow {
    t_s: f64,
    real_a: f64,
    real_b: f64,
    formula_a: u64,
    formula_b: u64,
    exhaustive_a: u64,
    exhaustive_b: u64,
}

fn write_rates(path: &Path, acc: &Accumulation) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))?;
    write_rate_csv(f, &acc.per_second).map_err(runtime_err)
}

fn trace_stems(s: &SatlinkConfig) -> Result<Vec<String>, CliError> {
    let stems: Vec<String> = s
        .traces
        .iter()
        .map(|p| p.file_stem().map_or_else(|| "trace".into(), |x| x.to_string_lossy().into_owned()))
        .collect();
    for (i, a) in stems.iter().enumerate() {
        if stems[..i].contains(a) {
            return Err(CliError::Config(format!("two satlink traces share the file stem {a:?}")));
        }
    }
    Ok(stems)
}

pub fn satrate(cfg: &ExperimentConfig, opts: &Options) -> Result<(), CliError> {
    let s = cfg.satlink()?;
    if s.traces.is_empty() {
        return Err(CliError::Config("satlink.traces is empty".into()));
    }
    s.optics.validate().map_err(config_err)?;
    let stems = trace_stems(s)?;
    let traces = s
        .traces
        .iter()
        .map(|p| LinkTrace::load(p).map_err(sat_err))
        .collect::<Result<Vec<_>, _>>()?;
    let m_list = if s.m_s.is_empty() { vec![s.hardware.m_s] } else { s.m_s.clone() };
    if traces.len() > 2 {
        warn!(n = traces.len(), "dual-link outputs use the first two traces only");
    }
    create_out(&opts.out)?;
    let mut summary = SatSummary::default();
    for &m in &m_list {
        let hw = LinkHardware { m_s: m, ..s.hardware };
        hw.validate().map_err(config_err)?;
        for (trace, stem) in traces.iter().zip(&stems) {
            let acc = accumulate_pairs(&single_rate_series(trace, &s.optics, &hw).map_err(sat_err)?);
            write_rates(&opts.out.join(format!("single_{stem}_m{m}.csv")), &acc)?;
            summary.single.push(SingleSummary {
                trace: stem.clone(),
                m_s: m,
                total_pairs: acc.total,
                total_pairs_corrected: acc.total_corrected,
                sigma: acc.sigma(),
            });
        }
        let [ta, tb, ..] = &traces[..] else { continue };
        let (ma, mb) = match best_fixed_split(ta, tb, &s.optics, &hw) {
            Ok(split) => split,
            Err(SatError::EmptyWindow) => {
                warn!(m_s = m, "the two traces are never visible together; skipping dual-link outputs");
                continue;
            }
            Err(e) => return Err(sat_err(e)),
        };
        let dynamic = accumulate_pairs(&dual_rate_series(ta, tb, Allocation::Dynamic, &s.optics, &hw).map_err(sat_err)?);
        let fixed = accumulate_pairs(&dual_rate_series(ta, tb, Allocation::Static(ma, mb), &s.optics, &hw).map_err(sat_err)?);
        write_rates(&opts.out.join(format!("dual_dynamic_m{m}.csv")), &dynamic)?;
        write_rates(&opts.out.join(format!("dual_static_m{m}.csv")), &fixed)?;
        let mut w = csv_writer(&opts.out.join(format!("splits_m{m}.csv")))?;
        for t in joint_window(ta, tb, &s.optics) {
            let (pa, va) = ta.at(t).expect("inside window");
            let (pb, vb) = tb.at(t).expect("inside window");
            let split = optimal_split_integer((&pa, va), (&pb, vb), &s.optics, &hw).map_err(sat_err)?;
            w.serialize(SplitRow {
                t_s: t,
                real_a: split.real.0,
                real_b: split.real.1,
                formula_a: split.formula.0,
                formula_b: split.formula.1,
                exhaustive_a: split.exhaustive.0,
                exhaustive_b: split.exhaustive.1,
            })
            .map_err(runtime_err)?;
        }
        w.flush().map_err(runtime_err)?;
        println!(
            "m_s {m}: dynamic {:.1} pairs, static ({ma},{mb}) {:.1} pairs",
            dynamic.total_corrected, fixed.total_corrected
        );
        summary.dual.push(DualSummary {
            m_s: m,
            static_split: (ma, mb),
            static_total_corrected: fixed.total_corrected,
            dynamic_total_corrected: dynamic.total_corrected,
            static_sigma: fixed.sigma(),
            dynamic_sigma: dynamic.sigma(),
        });
    }
    write_json(&opts.out.join("satrate_summary.json"), &summary)
}

#[derive(Debug, Serialize)]
struct SolveReport {
    r: Vec<i64>,
    objective: f64,
    swaps: i64,
    optimal: bool,
    nodes: u64,
}

pub fn solve(instance: &Path, cfg: Option<&ExperimentConfig>) -> Result<(), CliError> {
    let text = fs::read_to_string(instance).map_err(|e| config_err(format!("cannot read {}: {e}", instance.display())))?;
    let inst = parse_dump(&text).map_err(|e| config_err(format!("{}: {e}", instance.display())))?;
    let options = match cfg {
        Some(c) => c.engine.solve_options()?,
        None => SolveOptions::unlimited(),
    };
    let sol = solve_ip(&inst, &options).map_err(runtime_err)?;
    let report = SolveReport {
        r: sol.r,
        objective: sol.objective,
        swaps: sol.swaps,
        optimal: sol.status == SolveStatus::Optimal,
        nodes: sol.nodes,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(runtime_err)?);
    Ok(())
}
