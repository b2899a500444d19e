//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 3 to 6 take minutes on a single core and run only with
//! `cargo test --test acceptance -- --include-ignored`. Numeric arguments
//! select criteria by id.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use qns_core::engine::{
    cell_seed, classify_stability, run_simulation, sweep_grid, Axis, CellStatus, LinkParams, RunConfig, Scenario,
    ServiceQueues, Stability, StabilityGrid, SweepSpec,
};
use qns_core::netmodel::{
    build_transition_system, chain, dumbbell, grid, parse_route, NetworkSpec, PairKind, ServicePair, TransitionSystem,
};
use qns_core::policies::{build_instance, Bounds, InfoLevel, Objective, PolicyConfig, PolicyRegistry, PolicySetup};
use qns_core::stochproc::{sample_losses, SimRng, StochasticParams, SystemState, Traffic};
use qns_ipsolver::{solve, IpInstance, SolveOptions};
use qns_satlink::{
    accumulate_pairs, dual_rate_series, exhaustive_split, leg_rate, optimal_split_real, single_link_rate,
    train_bound, Allocation, LinkHardware, LinkTrace, OpticsParams, TracePoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative band around each stability-edge anchor.
const EDGE_TOLERANCE: f64 = 0.15;
/// Resolution of the stability-edge search, Hz.
const EDGE_RESOLUTION: f64 = 10e3;
/// Share of grid cells on which quadratic and linear policies may disagree.
const QUADRATIC_DISAGREEMENT: f64 = 0.05;
/// Standard deviations allowed for Monte Carlo estimates.
const SIGMAS: f64 = 3.0;
/// Accepted train-length bound around the published value.
const TRAIN_BOUND: (u64, u64) = (67, 5);
/// Relative tolerance for equalized split rates.
const SPLIT_EQUALITY: f64 = 1e-9;
const STABILITY_THRESHOLD: f64 = 0.10;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    slow: bool,
    budget: Duration,
    check: fn() -> Verdict,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let full = args.iter().any(|a| a == "--include-ignored" || a == "--ignored");
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let criteria = [
        Criterion { id: 1, name: "matrix fidelity", slow: false, budget: secs(1), check: matrix_fidelity },
        Criterion { id: 2, name: "solver exactness", slow: false, budget: secs(60), check: solver_exactness },
        Criterion { id: 3, name: "lossless diagonal bound", slow: true, budget: secs(600), check: lossless_diagonal },
        Criterion { id: 4, name: "chain stability edges", slow: true, budget: secs(3600), check: chain_edges },
        Criterion { id: 5, name: "quadratic matches max-weight", slow: true, budget: secs(3600), check: quadratic_vs_linear },
        Criterion { id: 6, name: "grid region ordering", slow: true, budget: secs(7200), check: grid_ordering },
        Criterion { id: 7, name: "binary-regime equivalence", slow: false, budget: secs(60), check: binary_regime },
        Criterion { id: 8, name: "loss process statistics", slow: false, budget: secs(30), check: loss_statistics },
        Criterion { id: 9, name: "satellite single link", slow: false, budget: secs(1), check: satellite_single_link },
        Criterion { id: 10, name: "memory splits", slow: false, budget: secs(10), check: memory_splits },
        Criterion { id: 11, name: "engine soundness", slow: false, budget: secs(600), check: engine_soundness },
    ];
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        if c.slow && !full {
            println!("SKIP criterion {:>2} {}: long-running, pass --include-ignored", c.id, c.name);
            continue;
        }
        let t0 = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        let elapsed = t0.elapsed();
        let in_budget = elapsed <= c.budget;
        let pass = v.pass && in_budget;
        failed += !pass as usize;
        println!(
            "{} criterion {:>2} {} [{:.1}s of {}s]: {}{}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            v.detail,
            if in_budget { "" } else { " (over time budget)" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// Criterion 1.

fn chain_system(n: usize, routes: &[&str]) -> TransitionSystem {
    let g = chain(n);
    let routes: Vec<_> = routes.iter().map(|r| parse_route(&g, r).unwrap()).collect();
    build_transition_system(&g, &routes).unwrap()
}

/// Mismatching cells between `generated` and a reference table whose first
/// line names the columns and whose rows start with the queue name.
fn mismatches(generated: &[Vec<i32>], sys: &TransitionSystem, reference: &str) -> usize {
    let mut lines = reference.lines().map(str::trim).filter(|l| !l.is_empty());
    let cols: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    let names = sys.column_names();
    let mut bad = 0;
    let mut rows = 0usize;
    for line in lines {
        rows += 1;
        let mut it = line.split_whitespace();
        let e = sys.queue_by_name(it.next().unwrap()).expect("queue exists");
        for (col, v) in cols.iter().zip(it) {
            let c = names.iter().position(|n| n == col).expect("column exists");
            bad += (generated[e][c] != v.parse::<i32>().unwrap()) as usize;
        }
    }
    bad + rows.abs_diff(generated.len()) + cols.len().abs_diff(generated[0].len())
}

fn matrix_fidelity() -> Verdict {
    let abcd = chain_system(4, &["ABCD"]);
    let m_swaps: Vec<Vec<i32>> = abcd.m_tilde().into_iter().map(|r| r[..abcd.n_transitions()].to_vec()).collect();
    let m = mismatches(
        &m_swaps,
        &abcd,
        "A[B]C B[C]D A[B]D A[C]D
         AB -1 0 -1 0
         BC -1 -1 0 0
         CD 0 -1 0 -1
         AC 1 0 0 -1
         BD 0 1 -1 0
         AD 0 0 1 1",
    );
    let mt = mismatches(
        &abcd.m_tilde(),
        &abcd,
        "A[B]C B[C]D A[B]D A[C]D AB BC CD AC BD AD
         AB -1 0 -1 0 -1 0 0 0 0 0
         BC -1 -1 0 0 0 -1 0 0 0 0
         CD 0 -1 0 -1 0 0 -1 0 0 0
         AC 1 0 0 -1 0 0 0 -1 0 0
         BD 0 1 -1 0 0 0 0 0 -1 0
         AD 0 0 1 1 0 0 0 0 0 -1",
    );
    let nt = mismatches(
        &abcd.n_tilde(),
        &abcd,
        "A[B]C B[C]D A[B]D A[C]D AB BC CD AC BD AD
         AB 0 0 0 0 -1 0 0 0 0 0
         BC 0 0 0 0 0 -1 0 0 0 0
         CD 0 0 0 0 0 0 -1 0 0 0
         AC 0 0 0 0 0 0 0 -1 0 0
         BD 0 0 0 0 0 0 0 0 -1 0
         AD 0 0 0 0 0 0 0 0 0 -1",
    );
    let six = chain_system(6, &["ABCDE", "BCDEF"]);
    let mut expected: Vec<String> = [
        "A[B]C", "A[B]D", "A[B]E", "A[C]D", "A[C]E", "A[D]E", "B[C]D", "B[C]E", "B[C]F", "B[D]E", "B[D]F", "B[E]F",
        "C[D]E", "C[D]F", "C[E]F", "D[E]F",
    ]
    .map(String::from)
    .to_vec();
    expected.sort();
    let mut got: Vec<String> = (0..six.n_transitions()).map(|t| six.transition_name(t)).collect();
    got.sort();
    let no_af = six.queue_by_name("AF").is_none();
    Verdict::new(
        m + mt + nt == 0 && got == expected && no_af,
        format!(
            "ABCD mismatches M={m} M~={mt} N~={nt}; ABCDEF transitions {} (expected 16, set equal: {}), AF queue absent: {no_af}",
            got.len(),
            got == expected
        ),
    )
}

// Criterion 2.

fn random_instance(rng: &mut ChaCha8Rng, quadratic: bool) -> IpInstance {
    let d = rng.random_range(1..=12usize);
    let mut ub: Vec<i64> = (0..d).map(|_| rng.random_range(0..=5)).collect();
    while ub.iter().map(|&u| (u + 1) as u64).product::<u64>() > 200_000 {
        let j = rng.random_range(0..d);
        ub[j] /= 2;
    }
    let m = rng.random_range(0..=14usize);
    let coefs = [-1, 0, 0, 1, 1, 2];
    IpInstance {
        c: (0..d).map(|_| rng.random_range(-6..=3)).collect(),
        qdiag: (0..d).map(|_| if quadratic { rng.random_range(0..=3) } else { 0 }).collect(),
        denom: rng.random_range(1..=4),
        a: (0..m).map(|_| (0..d).map(|_| coefs[rng.random_range(0..coefs.len())]).collect()).collect(),
        b: (0..m).map(|_| rng.random_range(-1..=6)).collect(),
        ub,
        n_swaps: rng.random_range(0..=d),
    }
}

/// Minimum of `2 c·r + Σ q r²` over the feasible box points.
fn enumerate_optimum(inst: &IpInstance) -> i128 {
    let d = inst.c.len();
    let mut r = vec![0i64; d];
    let mut best = i128::MAX;
    loop {
        let feasible = inst
            .a
            .iter()
            .zip(&inst.b)
            .all(|(row, &b)| row.iter().zip(&r).map(|(a, x)| a * x).sum::<i64>() <= b.max(0));
        if feasible {
            let obj: i128 = (0..d)
                .map(|j| 2 * inst.c[j] as i128 * r[j] as i128 + inst.qdiag[j] as i128 * (r[j] * r[j]) as i128)
                .sum();
            best = best.min(obj);
        }
        let mut j = 0;
        loop {
            if j == d {
                return best;
            }
            if r[j] < inst.ub[j] {
                r[j] += 1;
                break;
            }
            r[j] = 0;
            j += 1;
        }
    }
}

fn solver_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut wrong = 0;
    let mut not_optimal = 0;
    for k in 0..1000 {
        let inst = random_instance(&mut rng, k % 2 == 1);
        let sol = solve(&inst, &SolveOptions::unlimited()).unwrap();
        not_optimal += !sol.is_optimal() as usize;
        wrong += (sol.objective_numerator2 != enumerate_optimum(&inst) || !inst.is_feasible(&sol.r)) as usize;
    }
    Verdict::new(
        wrong == 0 && not_optimal == 0,
        format!("1000 instances (500 linear, 500 quadratic): {wrong} objective mismatches, {not_optimal} non-optimal"),
    )
}

// Shared chain scenario for criteria 3 to 5.

fn chain6_scenario(eta: f64) -> Scenario {
    let g = chain(6);
    let pair = |route: &str| {
        let r = parse_route(&g, route).unwrap();
        ServicePair {
            alice: r[0],
            bob: *r.last().unwrap(),
            kind: PairKind::Main,
            routes: vec![r],
        }
    };
    let pairs = vec![pair("ABCDE"), pair("BCDEF")];
    Scenario {
        spec: NetworkSpec { graph: g, pairs },
        n_parasitic: 0,
        routes_per_pair: 1,
        penalty: 10.0,
        link: LinkParams {
            alpha: 1e6,
            eta,
            dt: 1e-6,
            cap: None,
            bsm_factor: 1.0,
        },
    }
}

const CHAIN_STEPS: u64 = 20_000;
const CHAIN_DISCARD: u64 = 2_000;

fn chain_sweep(points: usize, max: f64) -> SweepSpec {
    SweepSpec {
        axis1: Axis { min: 0.0, max, points },
        axis2: Axis { min: 0.0, max, points },
        parasitic_loads: vec![0.0],
        parasitic_sets: 1,
        steps: CHAIN_STEPS,
        transient_discard: CHAIN_DISCARD,
        threshold: STABILITY_THRESHOLD,
        workers: workers(),
        master_seed: 7,
        memo_capacity: 100_000,
        skip_dominated: true,
        solve_options: SolveOptions::default(),
    }
}

// Criterion 3.

fn lossless_diagonal() -> Verdict {
    let scenario = chain6_scenario(1.0);
    let policy = PolicyConfig::new("maxweight", InfoLevel::Fi);
    let grids = sweep_grid(&scenario, &chain_sweep(13, 1.2e6), &[policy], &PolicyRegistry::default(), &[], &|_| {}).unwrap();
    let g = &grids[0];
    let alpha = scenario.link.alpha;
    let (mut low, mut low_bad, mut high, mut high_bad) = (0, Vec::new(), 0, Vec::new());
    for c in &g.cells {
        let sum = c.axis1_hz + c.axis2_hz;
        let unstable = c.unstable(g.threshold);
        if sum <= 0.9 * alpha + 1.0 {
            low += 1;
            if unstable != Some(false) {
                low_bad.push(format!("({:.1},{:.1})", c.axis1_hz / 1e6, c.axis2_hz / 1e6));
            }
        } else if sum >= 1.1 * alpha - 1.0 {
            high += 1;
            if unstable != Some(true) {
                high_bad.push(format!(
                    "({:.1},{:.1}) u={:.3}",
                    c.axis1_hz / 1e6,
                    c.axis2_hz / 1e6,
                    c.unserved_fraction.unwrap_or(f64::NAN)
                ));
            }
        }
    }
    Verdict::new(
        low_bad.is_empty() && high_bad.is_empty(),
        format!(
            "13x13 grid at 0.1 MHz spacing: {}/{low} cells with sum <= 0.9a stable, {}/{high} with sum >= 1.1a unstable; misclassified high: {}",
            low - low_bad.len(),
            high - high_bad.len(),
            if high_bad.is_empty() { "none".into() } else { high_bad.join(" ") }
        ),
    )
}

// Criterion 4.

struct ChainRunner {
    system: TransitionSystem,
    queues: ServiceQueues,
    scenario: Scenario,
    spec: NetworkSpec,
}

impl ChainRunner {
    fn new(eta: f64) -> Self {
        let scenario = chain6_scenario(eta);
        let spec = scenario.spec.clone();
        let system = build_transition_system(&spec.graph, &spec.all_routes()).unwrap();
        let queues = ServiceQueues::locate(&system, &spec).unwrap();
        Self {
            system,
            queues,
            scenario,
            spec,
        }
    }

    fn unstable(&self, policy: &PolicyConfig, x: f64, y: f64, seed: u64) -> bool {
        let setup = PolicySetup {
            spec: &self.spec,
            system: &self.system,
            solve_options: SolveOptions::default(),
        };
        let p = PolicyRegistry::default().build(policy, &setup).unwrap();
        let params = self.queues.params(&self.system, &self.scenario.link, x, y, 0.0);
        let cfg = RunConfig {
            steps: CHAIN_STEPS,
            transient_discard: CHAIN_DISCARD,
            seed,
        };
        let m = run_simulation(&self.system, &params, p.as_ref(), &cfg, None).unwrap();
        classify_stability(&m, STABILITY_THRESHOLD) == Stability::Unstable
    }

    /// Largest total load along `dir` (components summing to 1) classified
    /// stable, by bisection on an `EDGE_RESOLUTION` lattice up to `max`.
    fn edge(&self, policy: &PolicyConfig, dir: (f64, f64), max: f64) -> f64 {
        let at = |k: u64| {
            let load = k as f64 * EDGE_RESOLUTION;
            self.unstable(policy, load * dir.0, load * dir.1, cell_seed(11, k as usize, (dir.1 * 2.0) as usize, 0))
        };
        let (mut lo, mut hi) = (0u64, (max / EDGE_RESOLUTION) as u64);
        if !at(hi) {
            return max;
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if at(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo as f64 * EDGE_RESOLUTION
    }
}

fn within(value: f64, anchor: f64) -> bool {
    (value - anchor).abs() <= EDGE_TOLERANCE * anchor
}

fn chain_edges() -> Verdict {
    let runner = ChainRunner::new(0.9);
    let greedy = PolicyConfig::new("greedy", InfoLevel::Fi);
    let fi = PolicyConfig::new("maxweight", InfoLevel::Fi);
    let li = PolicyConfig::new("maxweight", InfoLevel::Li);
    let individual = (1.0, 0.0);
    let diagonal = (0.5, 0.5);
    let checks = [
        ("greedy individual", runner.edge(&greedy, individual, 1.2e6), 300e3),
        ("FI individual", runner.edge(&fi, individual, 1.2e6), 600e3),
        ("FI cumulative", runner.edge(&fi, diagonal, 2.0e6), 800e3),
        ("LI individual", runner.edge(&li, individual, 1.2e6), 550e3),
        ("LI cumulative", runner.edge(&li, diagonal, 2.0e6), 700e3),
    ];
    let pass = checks.iter().all(|&(_, v, a)| within(v, a));
    let detail = checks
        .iter()
        .map(|&(name, v, a)| {
            format!("{name} {:.0} kHz (anchor {:.0} ± 15%{})", v / 1e3, a / 1e3, if within(v, a) { "" } else { ", OUT" })
        })
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(pass, detail)
}

// Criterion 5.

fn quadratic_vs_linear() -> Verdict {
    let scenario = chain6_scenario(0.9);
    let policies = [
        PolicyConfig::new("maxweight", InfoLevel::Fi),
        PolicyConfig::new("quadratic", InfoLevel::Fi),
    ];
    let grids = sweep_grid(&scenario, &chain_sweep(9, 1.2e6), &policies, &PolicyRegistry::default(), &[], &|_| {}).unwrap();
    let (lin, quad) = (&grids[0], &grids[1]);
    let differ = lin
        .cells
        .iter()
        .zip(&quad.cells)
        .filter(|(a, b)| a.unstable(lin.threshold) != b.unstable(quad.threshold))
        .count();
    let share = differ as f64 / lin.cells.len() as f64;
    Verdict::new(
        share <= QUADRATIC_DISAGREEMENT,
        format!(
            "9x9 grid: {differ}/{} cells differ ({:.1}% <= {:.0}%); stable areas linear {} quadratic {}",
            lin.cells.len(),
            100.0 * share,
            100.0 * QUADRATIC_DISAGREEMENT,
            lin.stable_area(),
            quad.stable_area()
        ),
    )
}

// Criterion 6.

fn grid_ordering() -> Verdict {
    let g = grid(4, 4);
    let pairs = [(0, 15), (3, 12)]
        .map(|(a, b)| (a, b, PairKind::Main))
        .to_vec();
    let spec = NetworkSpec::routed(g, &pairs, 1, 10.0).unwrap();
    let scenario = Scenario {
        spec,
        n_parasitic: 2,
        routes_per_pair: 1,
        penalty: 10.0,
        link: LinkParams {
            alpha: 1e6,
            eta: 0.9,
            dt: 1e-6,
            cap: None,
            bsm_factor: 1.0,
        },
    };
    let loads = vec![0.0, 50e3, 100e3];
    let sweep = SweepSpec {
        axis1: Axis { min: 0.0, max: 1.0e6, points: 5 },
        axis2: Axis { min: 0.0, max: 1.0e6, points: 5 },
        parasitic_loads: loads.clone(),
        parasitic_sets: 2,
        steps: 1000,
        transient_discard: 100,
        threshold: STABILITY_THRESHOLD,
        workers: workers(),
        master_seed: 3,
        memo_capacity: 100_000,
        skip_dominated: true,
        solve_options: SolveOptions::default(),
    };
    let policies = [
        PolicyConfig::new("greedy", InfoLevel::Fi),
        PolicyConfig::new("maxweight", InfoLevel::Li),
        PolicyConfig::new("maxweight", InfoLevel::Fi),
    ];
    let grids = sweep_grid(&scenario, &sweep, &policies, &PolicyRegistry::default(), &[], &|_| {}).unwrap();
    // Policies outer, parasitic loads inner.
    let area = |p: usize, l: usize| grids[p * loads.len() + l].stable_area();
    let ordered = (0..loads.len()).all(|l| area(0, l) <= area(1, l) && area(1, l) <= area(2, l));
    let shrinking = (0..policies.len()).all(|p| (1..loads.len()).all(|l| area(p, l) <= area(p, l - 1)));
    let table = (0..policies.len())
        .map(|p| {
            format!(
                "{} {:?}",
                grids[p * loads.len()].policy,
                (0..loads.len()).map(|l| area(p, l)).collect::<Vec<_>>()
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Verdict::new(
        ordered && shrinking,
        format!(
            "stable areas of 25 cells at parasitic loads 0/50/100 kHz: {table}; greedy <= LI <= FI: {ordered}, shrinking: {shrinking}"
        ),
    )
}

// Criterion 7.

fn binary_regime() -> Verdict {
    let g3 = grid(3, 3);
    let n = |s: &str| parse_route(&g3, s).unwrap();
    let d = dumbbell();
    let systems = [
        chain_system(4, &["ABCD"]),
        chain_system(6, &["ABCDE", "BCDEF"]),
        build_transition_system(&d, &[parse_route(&d, "ABDE").unwrap(), parse_route(&d, "CBDF").unwrap()]).unwrap(),
        build_transition_system(&g3, &[n("ABCFI"), n("GHEB"), n("ADGHI")]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut differ = 0;
    let total = 10_000;
    for k in 0..total {
        let sys = &systems[k % systems.len()];
        let nq = sys.n_queues();
        let bounds = Bounds {
            ebit: (0..nq).map(|_| rng.random_range(0..=1) as f64).collect(),
            demand: (0..nq).map(|_| rng.random_range(0..=1) as f64).collect(),
        };
        let clamp = |mut inst: IpInstance| {
            inst.ub.iter_mut().for_each(|u| *u = (*u).min(1));
            inst
        };
        let lin = clamp(build_instance(sys, &bounds, Objective::Linear));
        let quad = clamp(build_instance(sys, &bounds, Objective::Quadratic));
        let rl = solve(&lin, &SolveOptions::unlimited()).unwrap().r;
        let rq = solve(&quad, &SolveOptions::unlimited()).unwrap().r;
        differ += (lin.objective_numerator2(&rl) != lin.objective_numerator2(&rq)) as usize;
    }
    Verdict::new(
        differ == 0,
        format!("{total} random binary states on 4 systems: {differ} with different linear objective"),
    )
}

// Criterion 8.

fn loss_statistics() -> Verdict {
    let sys = chain_system(2, &["AB"]);
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, eta) in [0.9, 0.5].into_iter().enumerate() {
        let params = StochasticParams {
            alpha: vec![0.0],
            eta,
            traffic: Traffic::Poisson { beta: vec![0.0] },
            dt: 1e-6,
            cap: None,
            bsm_factor: 1.0,
            arrival_schedule: None,
        };
        let mut rng = SimRng::seed_from_u64(80 + k as u64);
        let refill = 200;
        let mut state = SystemState::empty(sys.n_queues());
        let (mut lost, mut held) = (0u64, 0u64);
        for _ in 0..100_000 {
            if state.q[0] == 0 {
                state.q[0] = refill;
            }
            let l = sample_losses(&state, &params, &mut rng)[0];
            held += state.q[0];
            lost += l;
            state.q[0] -= l;
        }
        // Per-step loss fraction: binomial with p = 1 - eta.
        let p = 1.0 - eta;
        let frac = lost as f64 / held as f64;
        let frac_sigma = (p * (1.0 - p) / held as f64).sqrt();
        // Steps held per lost ebit: geometric lifetime with mean 1/(1-eta).
        let survival = held as f64 / lost as f64;
        let mean = 1.0 / p;
        let surv_sigma = (eta / (p * p) / lost as f64).sqrt();
        let ok_frac = (frac - p).abs() <= SIGMAS * frac_sigma;
        let ok_surv = (survival - mean).abs() <= SIGMAS * surv_sigma;
        pass &= ok_frac && ok_surv;
        lines.push(format!(
            "eta {eta}: loss fraction {frac:.5} vs {p:.5} ({:.2} sigma), survival {survival:.4} vs {mean:.4} ({:.2} sigma)",
            (frac - p).abs() / frac_sigma,
            (survival - mean).abs() / surv_sigma
        ));
    }
    Verdict::new(pass, format!("10^5 steps each; {}", lines.join("; ")))
}

// Criterion 9.

fn satellite_single_link() -> Verdict {
    let hw = LinkHardware::default();
    // Clamped geometry (huge receiver) and 20 dB give eta = 0.01; L = c * 2 ms gives t_rt = 4 ms.
    let optics = OpticsParams {
        d_r: 1e6,
        ..OpticsParams::default()
    };
    let point = TracePoint {
        t_s: 0.0,
        distance_m: hw.c * 2e-3,
        elevation_deg: 60.0,
        atm_attenuation_db: 20.0,
    };
    let r = single_link_rate(&point, 0.0, &optics, &hw).unwrap();
    let rate_ok = (r.rate - 125.0).abs() <= 1e-9 * 125.0;
    let bound = train_bound(6998.0, &hw).unwrap();
    let bound_ok = bound.abs_diff(TRAIN_BOUND.0) <= TRAIN_BOUND.1;
    let inactive = [10u64, 50].iter().all(|&m| {
        let leg = leg_rate(&point, 6998.0, m, &optics, &hw).unwrap();
        m <= bound && leg.corrected == leg.rate
    });
    Verdict::new(
        rate_ok && bound_ok && inactive,
        format!(
            "rate {:.12} Hz (expected 125), eta {:.6}, t_rt {:.6} s; train bound {bound} (67 ± 5); correction inactive for m_S 10, 50: {inactive}",
            r.rate, r.eta, r.t_rt
        ),
    )
}

// Criterion 10.

/// Straight overhead pass at altitude `h` (m) and ground speed `v` (m/s),
/// sampled every second over `[-half, half]` and shifted by `offset` s.
fn pass(h: f64, v: f64, half: f64, offset: f64, atm: f64) -> LinkTrace {
    let n = (2.0 * half) as i64;
    LinkTrace::new(
        (0..=n)
            .map(|k| {
                let t = k as f64 - half;
                let x = v * (t - offset);
                let elev = (h / x.abs().max(1e-9)).atan().to_degrees();
                TracePoint {
                    t_s: t,
                    distance_m: (h * h + x * x).sqrt(),
                    elevation_deg: elev,
                    atm_attenuation_db: atm / elev.to_radians().sin(),
                }
            })
            .collect(),
    )
    .unwrap()
}

fn memory_splits() -> Verdict {
    let optics = OpticsParams::default();
    let hw10 = LinkHardware {
        m_s: 10,
        ..LinkHardware::default()
    };
    let p = TracePoint {
        t_s: 0.0,
        distance_m: 7e5,
        elevation_deg: 50.0,
        atm_attenuation_db: 3.0,
    };
    let symmetric = exhaustive_split((&p, 1000.0), (&p, -1000.0), &optics, &hw10).unwrap();

    let hw = LinkHardware::default();
    let q = TracePoint {
        distance_m: 1.2e6,
        elevation_deg: 30.0,
        atm_attenuation_db: 7.0,
        ..p
    };
    let (ma, mb) = optimal_split_real((&p, 0.0), (&q, 0.0), &optics, &hw).unwrap();
    let per_slot = |pt: &TracePoint| leg_rate(pt, 0.0, 1, &optics, &hw).unwrap().rate;
    let (ra, rb) = (per_slot(&p) * ma, per_slot(&q) * mb);
    let equalized = (ra - rb).abs() / ra.max(rb);

    let mut worst_gain = f64::INFINITY;
    let mut cases = 0;
    for (k, (off_b, atm_b, h_b)) in [(20.0, 3.0, 5e5), (-35.0, 6.0, 5e5), (60.0, 2.0, 6e5), (0.0, 9.0, 5e5), (-80.0, 4.0, 7e5)]
        .into_iter()
        .enumerate()
    {
        let ta = pass(5e5, 7.6e3, 300.0, -10.0 * k as f64, 3.0);
        let tb = pass(h_b, 7.6e3, 300.0, off_b, atm_b);
        let (sa, sb) = qns_satlink::best_fixed_split(&ta, &tb, &optics, &hw).unwrap();
        let fixed = accumulate_pairs(&dual_rate_series(&ta, &tb, Allocation::Static(sa, sb), &optics, &hw).unwrap());
        let dynamic = accumulate_pairs(&dual_rate_series(&ta, &tb, Allocation::Dynamic, &optics, &hw).unwrap());
        worst_gain = worst_gain.min(dynamic.total_corrected - fixed.total_corrected);
        cases += 1;
    }
    let pass = symmetric == (5, 5) && equalized < SPLIT_EQUALITY && worst_gain >= 0.0;
    Verdict::new(
        pass,
        format!(
            "symmetric split {symmetric:?}; real split ({ma:.4}, {mb:.4}) equalizes rates to {equalized:.1e}; dynamic - static >= {worst_gain:.3} pairs over {cases} asymmetric passes"
        ),
    )
}

// Criterion 11.

fn engine_soundness() -> Verdict {
    // Randomized runs: run_simulation rejects any negative queue and any
    // demand audit mismatch, so completing without error is the check.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let families = [
        PolicyConfig::new("greedy", InfoLevel::Fi),
        PolicyConfig::new("maxweight", InfoLevel::Fi),
        PolicyConfig::new("maxweight", InfoLevel::Pi),
        PolicyConfig::new("maxweight", InfoLevel::Li),
        PolicyConfig::new("quadratic", InfoLevel::Fi),
    ];
    let mut runs = 0;
    let mut errors = Vec::new();
    for k in 0..60 {
        let runner = ChainRunner::new(rng.random_range(0.7..=1.0));
        let setup = PolicySetup {
            spec: &runner.spec,
            system: &runner.system,
            solve_options: SolveOptions::default(),
        };
        let policy = PolicyRegistry::default().build(&families[k % families.len()], &setup).unwrap();
        let mut params = runner.queues.params(
            &runner.system,
            &runner.scenario.link,
            rng.random_range(0.0..1.5e6),
            rng.random_range(0.0..1.5e6),
            0.0,
        );
        if k % 3 == 0 {
            params.cap = Some(rng.random_range(1..=4));
        }
        let cfg = RunConfig {
            steps: 2000,
            transient_discard: 200,
            seed: rng.random(),
        };
        match run_simulation(&runner.system, &params, policy.as_ref(), &cfg, None) {
            Ok(_) => runs += 1,
            Err(e) => errors.push(e.to_string()),
        }
    }

    // Serial and parallel sweeps with memoization off.
    let g = grid(3, 3);
    let spec = NetworkSpec::routed(g, &[(0, 8, PairKind::Main), (6, 2, PairKind::Main)], 1, 10.0).unwrap();
    let scenario = Scenario {
        spec,
        n_parasitic: 1,
        routes_per_pair: 1,
        penalty: 10.0,
        link: chain6_scenario(0.9).link,
    };
    let sweep = |workers| SweepSpec {
        axis1: Axis { min: 0.0, max: 1.2e6, points: 6 },
        axis2: Axis { min: 0.0, max: 1.2e6, points: 6 },
        parasitic_loads: vec![0.0, 100e3],
        parasitic_sets: 2,
        steps: 2000,
        transient_discard: 200,
        threshold: STABILITY_THRESHOLD,
        workers,
        master_seed: 5,
        memo_capacity: 0,
        skip_dominated: true,
        solve_options: SolveOptions::unlimited(),
    };
    let policies = [
        PolicyConfig::new("greedy", InfoLevel::Fi),
        PolicyConfig::new("maxweight", InfoLevel::Fi),
    ];
    let reg = PolicyRegistry::default();
    let serial = sweep_grid(&scenario, &sweep(1), &policies, &reg, &[], &|_| {}).unwrap();
    let parallel = sweep_grid(&scenario, &sweep(4), &policies, &reg, &[], &|_| {}).unwrap();
    let mut metric_diffs = 0;
    let mut compared = 0;
    for (s, p) in serial.iter().zip(&parallel) {
        for (a, b) in s.cells.iter().zip(&p.cells) {
            if a.status == CellStatus::Simulated && b.status == CellStatus::Simulated {
                compared += 1;
                metric_diffs += (a.unserved_fraction != b.unserved_fraction
                    || a.avg_backlog != b.avg_backlog
                    || a.max_excursion != b.max_excursion) as usize;
            }
            metric_diffs += (a.unstable(s.threshold) != b.unstable(p.threshold)) as usize;
        }
    }
    let unsound = serial.iter().chain(&parallel).filter(|g| !skips_are_sound(g)).count();
    let skipped: usize = serial
        .iter()
        .map(|g| g.cells.iter().filter(|c| c.status == CellStatus::SkippedDominated).count())
        .sum();
    Verdict::new(
        errors.is_empty() && metric_diffs == 0 && unsound == 0,
        format!(
            "{runs}/60 randomized runs clean{}; serial vs parallel: {metric_diffs} differences over {compared} simulated cells; {skipped} skipped cells, {unsound} grids with an unsupported skip",
            if errors.is_empty() { String::new() } else { format!(" ({})", errors.join("; ")) }
        ),
    )
}

/// Every skipped cell has a simulated unstable cell that is componentwise
/// no larger.
fn skips_are_sound(g: &StabilityGrid) -> bool {
    let n2 = g.axis2.len();
    (0..g.cells.len())
        .filter(|&k| g.cells[k].status == CellStatus::SkippedDominated)
        .all(|k| {
            let (i1, i2) = (k / n2, k % n2);
            (0..=i1).any(|j1| {
                (0..=i2).any(|j2| {
                    let u = &g.cells[j1 * n2 + j2];
                    (j1, j2) != (i1, i2) && u.status == CellStatus::Simulated && u.unstable(g.threshold) == Some(true)
                })
            })
        })
}
