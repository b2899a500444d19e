use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Mutex;

use qns_ipsolver::SolveOptions;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::netmodel::{place_parasitic_pairs, NetworkSpec, PairKind, ServicePair, TransitionSystem};
use crate::policies::{PolicyConfig, PolicyRegistry, PolicySetup, SchedulingPolicy, SolveCache};
use crate::stochproc::{SimRng, StochasticParams, Traffic};

use super::run::{run_simulation, RunConfig, RunMetrics};
use super::EngineError;

pub const DEFAULT_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Unstable iff the unserved fraction strictly exceeds `threshold`.
pub fn classify_stability(metrics: &RunMetrics, threshold: f64) -> Stability {
    classify_fraction(metrics.unserved_fraction, threshold)
}

fn classify_fraction(unserved: f64, threshold: f64) -> Stability {
    if unserved > threshold {
        Stability::Unstable
    } else {
        Stability::Stable
    }
}

/// Evenly spaced load values in Hz, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Per-link physics shared by every cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Generation rate on every physical link in Hz.
    pub alpha: f64,
    pub eta: f64,
    pub dt: f64,
    pub cap: Option<u64>,
    pub bsm_factor: f64,
}

/// Network with two main pairs whose loads span the grid axes, plus the
/// number of parasitic pairs redrawn for every parasitic set.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: NetworkSpec,
    pub n_parasitic: usize,
    pub routes_per_pair: usize,
    pub penalty: f64,
    pub link: LinkParams,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    pub parasitic_loads: Vec<f64>,
    pub parasitic_sets: usize,
    pub steps: u64,
    pub transient_discard: u64,
    pub threshold: f64,
    pub workers: usize,
    pub master_seed: u64,
    /// Zero disables memoization.
    pub memo_capacity: usize,
    pub skip_dominated: bool,
    pub solve_options: SolveOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Simulated,
    SkippedDominated,
    Failed,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Simulated => "simulated",
            CellStatus::SkippedDominated => "skipped-dominated",
            CellStatus::Failed => "failed",
        })
    }
}

/// One grid cell; metrics are averaged over parasitic sets and absent
/// unless the cell was simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(skip)]
    pub i1: usize,
    #[serde(skip)]
    pub i2: usize,
    pub axis1_hz: f64,
    pub axis2_hz: f64,
    pub parasitic_load_hz: f64,
    pub policy: String,
    pub status: CellStatus,
    pub unserved_fraction: Option<f64>,
    pub avg_backlog: Option<f64>,
    pub max_excursion: Option<f64>,
    /// Demand trace of the first parasitic set.
    #[serde(skip)]
    pub trace: Option<Vec<(u64, u64)>>,
}

impl CellRecord {
    /// `Some(true)` for simulated-unstable and dominated cells, `None` for failed ones.
    pub fn unstable(&self, threshold: f64) -> Option<bool> {
        match self.status {
            CellStatus::SkippedDominated => Some(true),
            CellStatus::Failed => None,
            CellStatus::Simulated => self
                .unserved_fraction
                .map(|u| classify_fraction(u, threshold) == Stability::Unstable),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityGrid {
    pub policy: String,
    pub parasitic_load_hz: f64,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub threshold: f64,
    /// Row-major: `cells[i1 * axis2.len() + i2]`.
    pub cells: Vec<CellRecord>,
    /// Per-cell seed of parasitic set `k` is `cell_seed(seed, i1, i2, k)`.
    pub seed: u64,
}

impl StabilityGrid {
    pub fn cell(&self, i1: usize, i2: usize) -> &CellRecord {
        &self.cells[i1 * self.axis2.len() + i2]
    }

    /// Number of cells classified stable.
    pub fn stable_area(&self) -> usize {
        self.cells.iter().filter(|c| c.unstable(self.threshold) == Some(false)).count()
    }

    /// Every dominated cell has a simulated unstable cell below it.
    pub fn dominance_is_sound(&self) -> bool {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::SkippedDominated)
            .all(|c| {
                self.cells.iter().any(|u| {
                    u.status == CellStatus::Simulated
                        && u.unstable(self.threshold) == Some(true)
                        && dominates((u.i1, u.i2), (c.i1, c.i2))
                })
            })
    }
}

/// `p` is componentwise at least `u` and differs from it.
fn dominates(u: (usize, usize), p: (usize, usize)) -> bool {
    u != p && p.0 >= u.0 && p.1 >= u.1
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |h, &p| splitmix(h ^ splitmix(p)))
}

/// Seed of one simulation; independent of evaluation order and worker.
pub fn cell_seed(master: u64, i1: usize, i2: usize, set: usize) -> u64 {
    mix(&[master, i1 as u64, i2 as u64, set as u64])
}

/// Seed of the placement of parasitic set `set`.
pub fn parasitic_seed(master: u64, set: usize) -> u64 {
    mix(&[master, u64::MAX, set as u64])
}

/// Queue indices of the two main pairs and of the parasitic pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceQueues {
    pub main: [usize; 2],
    pub parasitic: Vec<usize>,
}

impl ServiceQueues {
    pub fn locate(system: &TransitionSystem, net: &NetworkSpec) -> Result<Self, EngineError> {
        let queue = |p: &ServicePair| {
            system.queue_of(p.alice, p.bob).ok_or_else(|| {
                EngineError::InvalidParams(format!("pair {} has no queue", net.graph.pair_name(p.alice, p.bob)))
            })
        };
        let mains: Vec<usize> = net
            .pairs
            .iter()
            .filter(|p| p.kind == PairKind::Main)
            .map(queue)
            .collect::<Result<_, _>>()?;
        let [a, b] = mains[..] else {
            return Err(EngineError::InvalidParams(format!(
                "need exactly two main pairs, got {}",
                mains.len()
            )));
        };
        let parasitic = net
            .pairs
            .iter()
            .filter(|p| p.kind == PairKind::Parasitic)
            .map(queue)
            .collect::<Result<_, _>>()?;
        Ok(Self { main: [a, b], parasitic })
    }

    /// Poisson traffic `x`, `y` on the main pairs and `load` on every
    /// parasitic pair, with `link` generation on physical queues.
    pub fn params(&self, system: &TransitionSystem, link: &LinkParams, x: f64, y: f64, load: f64) -> StochasticParams {
        let alpha = system
            .queues()
            .iter()
            .map(|q| if q.physical { link.alpha } else { 0.0 })
            .collect();
        let mut beta = vec![0.0; system.n_queues()];
        for &e in &self.parasitic {
            beta[e] = load;
        }
        beta[self.main[0]] += x;
        beta[self.main[1]] += y;
        StochasticParams {
            alpha,
            eta: link.eta,
            traffic: Traffic::Poisson { beta },
            dt: link.dt,
            cap: link.cap,
            bsm_factor: link.bsm_factor,
            arrival_schedule: None,
        }
    }
}

struct PreparedSet {
    system: TransitionSystem,
    queues: ServiceQueues,
    policy: Box<dyn SchedulingPolicy>,
}

/// Network spec of parasitic set `set`: the main pairs plus freshly placed
/// and routed parasitic pairs.
pub fn parasitic_spec(scenario: &Scenario, master: u64, set: usize) -> Result<NetworkSpec, EngineError> {
    with_parasitic_pairs(
        &scenario.spec,
        scenario.n_parasitic,
        scenario.routes_per_pair,
        scenario.penalty,
        parasitic_seed(master, set),
    )
}

/// Adds `n` parasitic pairs on nodes no existing pair uses, each with up to
/// `routes_per_pair` routes.
pub fn with_parasitic_pairs(
    spec: &NetworkSpec,
    n: usize,
    routes_per_pair: usize,
    penalty: f64,
    seed: u64,
) -> Result<NetworkSpec, EngineError> {
    let mut spec = spec.clone();
    if n == 0 {
        return Ok(spec);
    }
    let forbidden: BTreeSet<usize> = spec.pairs.iter().flat_map(|p| [p.alice, p.bob]).collect();
    let placed = place_parasitic_pairs(&spec.graph, n, &forbidden, seed)?;
    let routed = NetworkSpec::routed(
        spec.graph.clone(),
        &placed.iter().map(|&(a, b)| (a, b, PairKind::Parasitic)).collect::<Vec<_>>(),
        routes_per_pair,
        penalty,
    )?;
    spec.pairs.extend(routed.pairs);
    Ok(spec)
}

fn prepare(
    scenario: &Scenario,
    spec: &SweepSpec,
    policy: &PolicyConfig,
    registry: &PolicyRegistry,
) -> Result<Vec<PreparedSet>, EngineError> {
    let n_sets = if scenario.n_parasitic == 0 {
        1
    } else {
        spec.parasitic_sets.max(1)
    };
    let mut out = Vec::with_capacity(n_sets);
    for set in 0..n_sets {
        let net = parasitic_spec(scenario, spec.master_seed, set)?;
        let system = crate::netmodel::build_transition_system(&net.graph, &net.all_routes())?;
        let queues = ServiceQueues::locate(&system, &net)?;
        let setup = PolicySetup {
            spec: &net,
            system: &system,
            solve_options: spec.solve_options,
        };
        let policy = registry.build(policy, &setup)?;
        out.push(PreparedSet { system, queues, policy });
    }
    Ok(out)
}

struct Progress {
    order: Vec<(usize, usize)>,
    next: usize,
    unstable: Vec<(usize, usize)>,
    cells: Vec<Option<CellRecord>>,
}

/// Simulates every grid point (or marks it dominated) for each policy and
/// parasitic load. Returns one grid per (policy, parasitic load), policies
/// outer. `prior` cells with matching policy, load and axis values are
/// reused as-is; `on_cell` sees every newly decided cell.
pub fn sweep_grid(
    scenario: &Scenario,
    spec: &SweepSpec,
    policies: &[PolicyConfig],
    registry: &PolicyRegistry,
    prior: &[CellRecord],
    on_cell: &(dyn Fn(&CellRecord) + Sync),
) -> Result<Vec<StabilityGrid>, EngineError> {
    if spec.steps <= spec.transient_discard {
        return Err(EngineError::InvalidParams("steps must exceed transient_discard".into()));
    }
    let cache = (spec.memo_capacity > 0).then(|| SolveCache::new(spec.memo_capacity));
    let mut grids = Vec::new();
    for pc in policies {
        let sets = prepare(scenario, spec, pc, registry)?;
        for &load in &spec.parasitic_loads {
            grids.push(sweep_one(scenario, spec, &sets, load, cache.as_ref(), prior, on_cell));
        }
    }
    if let Some(c) = &cache {
        info!(hits = c.hits(), misses = c.misses(), entries = c.len(), "memo cache");
    }
    Ok(grids)
}

fn sweep_one(
    scenario: &Scenario,
    spec: &SweepSpec,
    sets: &[PreparedSet],
    load: f64,
    cache: Option<&SolveCache>,
    prior: &[CellRecord],
    on_cell: &(dyn Fn(&CellRecord) + Sync),
) -> StabilityGrid {
    let policy_id = sets[0].policy.id();
    let xs = spec.axis1.values();
    let ys = spec.axis2.values();
    let (n1, n2) = (xs.len(), ys.len());
    let mut order: Vec<(usize, usize)> = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect();
    order.shuffle(&mut SimRng::seed_from_u64(mix(&[spec.master_seed, load.to_bits()])));
    let mut progress = Progress {
        order,
        next: 0,
        unstable: Vec::new(),
        cells: vec![None; n1 * n2],
    };
    for rec in prior.iter().filter(|r| r.policy == policy_id && r.parasitic_load_hz == load) {
        let (Some(i1), Some(i2)) = (
            xs.iter().position(|&x| x == rec.axis1_hz),
            ys.iter().position(|&y| y == rec.axis2_hz),
        ) else {
            continue;
        };
        let mut rec = rec.clone();
        rec.i1 = i1;
        rec.i2 = i2;
        if rec.status == CellStatus::Simulated && rec.unstable(spec.threshold) == Some(true) {
            progress.unstable.push((i1, i2));
        }
        progress.cells[i1 * n2 + i2] = Some(rec);
    }
    let reused = progress.cells.iter().flatten().count();
    if reused > 0 {
        info!(policy = %policy_id, load, reused, "resuming grid");
    }
    let blank = |i1: usize, i2: usize, status| CellRecord {
        i1,
        i2,
        axis1_hz: xs[i1],
        axis2_hz: ys[i2],
        parasitic_load_hz: load,
        policy: policy_id.clone(),
        status,
        unserved_fraction: None,
        avg_backlog: None,
        max_excursion: None,
        trace: None,
    };
    let shared = Mutex::new(progress);
    let workers = spec.workers.max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let point = {
                    let mut p = shared.lock().unwrap_or_else(|e| e.into_inner());
                    let mut found = None;
                    while p.next < p.order.len() {
                        let pt = p.order[p.next];
                        p.next += 1;
                        if p.cells[pt.0 * n2 + pt.1].is_some() {
                            continue;
                        }
                        if spec.skip_dominated && p.unstable.iter().any(|&u| dominates(u, pt)) {
                            let rec = blank(pt.0, pt.1, CellStatus::SkippedDominated);
                            on_cell(&rec);
                            p.cells[pt.0 * n2 + pt.1] = Some(rec);
                            continue;
                        }
                        found = Some(pt);
                        break;
                    }
                    found
                };
                let Some((i1, i2)) = point else { break };
                let rec = simulate_cell(scenario, spec, sets, (xs[i1], ys[i2]), load, (i1, i2), cache)
                    .map(|(avg, trace)| CellRecord {
                        unserved_fraction: Some(avg[0]),
                        avg_backlog: Some(avg[1]),
                        max_excursion: Some(avg[2]),
                        trace: Some(trace),
                        ..blank(i1, i2, CellStatus::Simulated)
                    })
                    .unwrap_or_else(|_| blank(i1, i2, CellStatus::Failed));
                info!(
                    policy = %policy_id, x = xs[i1], y = ys[i2], load,
                    status = %rec.status, unserved = ?rec.unserved_fraction, "cell done"
                );
                let mut p = shared.lock().unwrap_or_else(|e| e.into_inner());
                if rec.unstable(spec.threshold) == Some(true) {
                    p.unstable.push((i1, i2));
                }
                on_cell(&rec);
                p.cells[i1 * n2 + i2] = Some(rec);
            });
        }
    });
    let progress = shared.into_inner().unwrap_or_else(|e| e.into_inner());
    StabilityGrid {
        policy: policy_id,
        parasitic_load_hz: load,
        axis1: xs,
        axis2: ys,
        threshold: spec.threshold,
        cells: progress.cells.into_iter().map(|c| c.expect("every cell decided")).collect(),
        seed: spec.master_seed,
    }
}

type CellResult = ([f64; 3], Vec<(u64, u64)>);

fn simulate_cell(
    scenario: &Scenario,
    spec: &SweepSpec,
    sets: &[PreparedSet],
    (x, y): (f64, f64),
    load: f64,
    (i1, i2): (usize, usize),
    cache: Option<&SolveCache>,
) -> Result<CellResult, EngineError> {
    let mut sum = [0.0; 3];
    let mut trace = Vec::new();
    for (k, set) in sets.iter().enumerate() {
        let params = set.queues.params(&set.system, &scenario.link, x, y, load);
        let cfg = RunConfig {
            steps: spec.steps,
            transient_discard: spec.transient_discard,
            seed: cell_seed(spec.master_seed, i1, i2, k),
        };
        let m = match run_simulation(&set.system, &params, set.policy.as_ref(), &cfg, cache) {
            Ok(m) => m,
            Err(e) => {
                warn!(x, y, load, set = k, error = %e, "cell run failed, retrying once");
                run_simulation(&set.system, &params, set.policy.as_ref(), &cfg, cache)?
            }
        };
        sum[0] += m.unserved_fraction;
        sum[1] += m.avg_backlog;
        sum[2] += m.max_excursion as f64;
        if k == 0 {
            trace = m.demand_trace;
        }
    }
    let n = sets.len() as f64;
    Ok((sum.map(|v| v / n), trace))
}

/// Writes cells as CSV with a header row.
pub fn write_grid_csv<W: Write>(out: W, cells: &[CellRecord]) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c).map_err(|e| EngineError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| EngineError::Io(e.to_string()))?;
    Ok(())
}

/// Appends one cell without a header row.
pub fn append_grid_csv<W: Write>(out: W, cell: &CellRecord) -> Result<(), EngineError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.serialize(cell).map_err(|e| EngineError::Io(e.to_string()))?;
    w.flush().map_err(|e| EngineError::Io(e.to_string()))?;
    Ok(())
}

pub const GRID_CSV_HEADER: &str =
    "axis1_hz,axis2_hz,parasitic_load_hz,policy,status,unserved_fraction,avg_backlog,max_excursion";

pub fn read_grid_csv<R: Read>(input: R) -> Result<Vec<CellRecord>, EngineError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(|e| EngineError::Io(e.to_string())))
        .collect()
}
