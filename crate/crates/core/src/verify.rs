//! Self-check suites behind the `verify` subcommand.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{SeTrace, DEFAULT_ETA_MAX};
use crate::error::Result;
use crate::mip::{self, BuildOptions, FormulationKind};
use crate::optimizer::{minimize_allocation, SearchSpec};
use crate::queue::{simulate, SlaMode, SlaSpec};
use crate::rng::{self, DOMAIN_VERIFY};
use crate::samples::{SampleSet, Topology};
use crate::scenario::Scenario;
use crate::scheduler::{kkt_residuals, schedule_slot, Allocation};
use crate::traffic::{hill_estimator, sample_pareto, ArrivalTrace, ParetoSpec};

pub const KKT_TOL: f64 = 1e-8;
pub const EQUIVALENCE_TOL: f64 = 1e-8;
pub const MIP_TOL: f64 = 1e-6;
pub const HILL_TOL: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn suite(name: &'static str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult { name, passed, detail }
}

/// A random slot: 2-5 slices of 2-8 UEs, eta in (0.1, 7.4], budgets in [0, 20].
pub fn random_slot<R: Rng>(rng: &mut R) -> (Topology, Vec<f64>, Allocation) {
    let slices = rng.random_range(2..=5);
    let counts: Vec<usize> = (0..slices).map(|_| rng.random_range(2..=8)).collect();
    let topo = Topology::from_counts(&counts).expect("non-empty");
    let etas = (0..topo.ue_count()).map(|_| 7.4 - rng.random_range(0.0..7.3)).collect();
    let mut budget = || if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..=20.0) };
    let dedicated = (0..slices).map(|_| budget()).collect();
    let shared = budget();
    (topo, etas, Allocation { dedicated, shared })
}

/// A tiny scenario: at most 2 slices and 4 UEs, `K = 1`, `T <= 3`.
pub fn tiny_samples<R: Rng>(rng: &mut R) -> (SampleSet, SlaSpec) {
    let slices = rng.random_range(1..=2);
    let counts: Vec<usize> = (0..slices).map(|_| rng.random_range(1..=4 / slices)).collect();
    let topo = Topology::from_counts(&counts).expect("non-empty");
    let n = topo.ue_count();
    let t = rng.random_range(1..=3);
    let bits: Vec<u64> = (0..n * t).map(|_| if rng.random_bool(0.25) { 0 } else { rng.random_range(0..3000) }).collect();
    let arrivals = ArrivalTrace::from_fn(n, 1, t, |i, _, tt| bits[i * t + tt]);
    let etas: Vec<f64> = (0..n * t).map(|_| rng.random_range(0.2..=DEFAULT_ETA_MAX)).collect();
    let channel = SeTrace::from_fn(n, 1, t, DEFAULT_ETA_MAX, |i, _, tt| etas[i * t + tt]).expect("etas in range");
    let samples = SampleSet::new(topo, arrivals, channel).expect("consistent dimensions");
    let mode = if rng.random_bool(0.5) { SlaMode::PerUe } else { SlaMode::SliceAggregated };
    let budgets = (0..slices).map(|_| rng.random_range(0.2..2.0)).collect();
    let sla = SlaSpec::from_slice_budgets(mode, &samples.topology, budgets).expect("valid budgets");
    (samples, sla)
}

fn kkt_suite(rng: &mut ChaCha8Rng, trials: usize) -> Result<Vec<SuiteResult>> {
    let mut worst_kkt: f64 = 0.0;
    let mut worst_budget: f64 = 0.0;
    for _ in 0..trials {
        let (topo, etas, alloc) = random_slot(rng);
        let sched = schedule_slot(&alloc, &etas, &topo)?;
        worst_kkt = worst_kkt.max(kkt_residuals(&sched, &alloc, &etas, &topo).max());
        for s in 0..topo.slice_count() {
            let used: f64 = topo.members(s).iter().map(|&i| sched.y_ded[i]).sum();
            worst_budget = worst_budget.max((used - alloc.dedicated[s]).abs() / alloc.dedicated[s].max(1.0));
        }
        let used: f64 = sched.y_sh.iter().sum();
        worst_budget = worst_budget.max((used - alloc.shared).abs() / alloc.shared.max(1.0));
    }
    Ok(vec![
        suite("kkt", worst_kkt <= KKT_TOL, format!("{trials} slots, max residual {worst_kkt:.3e} (tol {KKT_TOL:e})")),
        suite("budget_exactness", worst_budget <= 1e-9, format!("{trials} slots, max relative budget gap {worst_budget:.3e}")),
    ])
}

fn equivalence_suite(seed: u64, trials: usize) -> Result<SuiteResult> {
    let r = mip::verify_transform_equivalence(trials, 6, seed, EQUIVALENCE_TOL)?;
    Ok(suite(
        "transform_equivalence",
        r.passed(),
        format!("{trials} instances, forward max {:.3e}, backward max {:.3e}, failures {}/{}", r.max_forward, r.max_backward, r.forward_failures, r.backward_failures),
    ))
}

/// Lifts the grid optimum of every kind and checks it against the exported
/// model; returns `(worst violation, worst Big-M usage, count mismatches)`.
pub fn mip_consistency(samples: &SampleSet, sla: &SlaSpec) -> Result<(f64, f64, usize)> {
    let spec = SearchSpec { x_max: 40.0, ..SearchSpec::default() };
    let mut worst: f64 = 0.0;
    let mut usage: f64 = 0.0;
    let mut mismatches = 0;
    for kind in FormulationKind::ALL {
        let opt = minimize_allocation(&spec.with_mode(kind), samples, sla)?;
        let model = mip::build(kind, samples, sla, &BuildOptions::for_instance(kind, samples, spec.x_max))?;
        let text = mip::write_lp(&model);
        let lp = mip::parse_lp(&text)?;
        if lp.var_count() != model.var_count() || lp.constraints.len() != model.constraint_count() {
            mismatches += 1;
        }
        let assignment = mip::lift_assignment(&model, samples, &opt.best_relaxed)?;
        let mut v = lp.max_violation(&assignment)?;
        let report = mip::check_solution(&model, &assignment, MIP_TOL)?;
        if !opt.feasible {
            // an infeasible search leaves only the SLA rows violated
            v = report.by_family.iter().filter(|(f, _)| **f != mip::Family::Sla).map(|(_, x)| *x).fold(report.bounds, f64::max);
        }
        worst = worst.max(v).max(if opt.feasible { report.max() } else { 0.0 });
        usage = usage.max(report.big_m_usage);
    }
    Ok((worst, usage, mismatches))
}

fn mip_suite(rng: &mut ChaCha8Rng, scenarios: usize) -> Result<Vec<SuiteResult>> {
    let mut worst: f64 = 0.0;
    let mut usage: f64 = 0.0;
    let mut mismatches = 0;
    for _ in 0..scenarios {
        let (samples, sla) = tiny_samples(rng);
        let (w, u, m) = mip_consistency(&samples, &sla)?;
        worst = worst.max(w);
        usage = usage.max(u);
        mismatches += m;
    }
    Ok(vec![
        suite("mip_consistency", worst <= MIP_TOL && mismatches == 0, format!("{scenarios} scenarios x 3 kinds, max violation {worst:.3e}, re-parse mismatches {mismatches}")),
        suite("big_m_headroom", usage <= mip::BIG_M_HEADROOM, format!("max relaxed-row usage {usage:.3e} of M")),
    ])
}

fn random_samples(rng: &mut ChaCha8Rng) -> SampleSet {
    let counts: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=4)).collect();
    let topo = Topology::from_counts(&counts).expect("non-empty");
    let n = topo.ue_count();
    let (kk, tt) = (rng.random_range(1..=3), rng.random_range(1..=6));
    let bits: Vec<u64> = (0..n * kk * tt).map(|_| rng.random_range(0..4000)).collect();
    let etas: Vec<f64> = (0..n * kk * tt).map(|_| rng.random_range(0.1..=DEFAULT_ETA_MAX)).collect();
    let idx = |i: usize, k: usize, t: usize| (i * kk + k) * tt + t;
    let arrivals = ArrivalTrace::from_fn(n, kk, tt, |i, k, t| bits[idx(i, k, t)]);
    let channel = SeTrace::from_fn(n, kk, tt, DEFAULT_ETA_MAX, |i, k, t| etas[idx(i, k, t)]).expect("etas in range");
    let backlog = (0..n).map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..500.0) } else { 0.0 }).collect();
    SampleSet::new(topo, arrivals, channel).and_then(|s| s.with_initial_backlog(backlog)).expect("consistent dimensions")
}

fn random_allocation(rng: &mut ChaCha8Rng, slices: usize) -> Allocation {
    Allocation { dedicated: (0..slices).map(|_| rng.random_range(0.0..10.0)).collect(), shared: rng.random_range(0.0..10.0) }
}

fn queue_suites(rng: &mut ChaCha8Rng, trials: usize) -> Result<Vec<SuiteResult>> {
    let mut conservation: f64 = 0.0;
    let mut over_capacity: f64 = 0.0;
    let mut monotone: f64 = 0.0;
    let mut equivariance: f64 = 0.0;
    for _ in 0..trials {
        let samples = random_samples(rng);
        let ns = samples.slice_count();
        let a = random_allocation(rng, ns);
        let (q, rep) = simulate(&a, &samples)?;
        for i in 0..samples.ue_count() {
            for k in 0..samples.samples() {
                let served: f64 = (0..samples.slots()).map(|t| q.served(i, k, t)).sum();
                let arrived = samples.arrivals.total(i, k) as f64;
                let gap = (samples.initial_backlog[i] + arrived - served - q.backlog(i, k, samples.slots())).abs();
                conservation = conservation.max(gap / (1.0 + arrived));
                for t in 0..samples.slots() {
                    over_capacity = over_capacity.max(q.served(i, k, t) - q.capacity(i, k, t));
                }
            }
        }

        // componentwise increase
        let mut b = a.clone();
        for x in b.dedicated.iter_mut().chain(std::iter::once(&mut b.shared)) {
            if rng.random_bool(0.5) {
                *x += rng.random_range(0.0..5.0);
            }
        }
        let (_, rep_b) = simulate(&b, &samples)?;
        for i in 0..samples.ue_count() {
            for k in 0..samples.samples() {
                monotone = monotone.max(rep_b.per_sample(i, k) - rep.per_sample(i, k));
            }
        }

        // UE relabelling
        let n = samples.ue_count();
        let mut order: Vec<usize> = (0..n).collect();
        for j in (1..n).rev() {
            order.swap(j, rng.random_range(0..=j));
        }
        let permuted = samples.permuted(&order);
        let (_, rep_p) = simulate(&a, &permuted)?;
        for (new, &old) in order.iter().enumerate() {
            for k in 0..samples.samples() {
                let d = (rep_p.per_sample(new, k) - rep.per_sample(old, k)).abs();
                equivariance = equivariance.max(d / (1.0 + rep.per_sample(old, k)));
            }
        }
        let mut etas = Vec::new();
        samples.etas_at(0, 0, &mut etas);
        let s0 = schedule_slot(&a, &etas, &samples.topology)?;
        permuted.etas_at(0, 0, &mut etas);
        let s1 = schedule_slot(&a, &etas, &permuted.topology)?;
        for (new, &old) in order.iter().enumerate() {
            equivariance = equivariance.max((s1.total(new) - s0.total(old)).abs());
        }
    }
    Ok(vec![
        suite("queue_conservation", conservation <= 1e-9 && over_capacity <= 1e-9, format!("{trials} runs, max relative gap {conservation:.3e}, max excess service {over_capacity:.3e}")),
        suite("delay_monotonicity", monotone <= 1e-9, format!("{trials} runs, max delay increase {monotone:.3e}")),
        suite("permutation_equivariance", equivariance <= 1e-9, format!("{trials} runs, max deviation {equivariance:.3e}")),
    ])
}

fn hill_suite(rng: &mut ChaCha8Rng) -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    for alpha in [1.05, 1.5, 1.95] {
        let xs = sample_pareto(&ParetoSpec::new(alpha, 1.0)?, rng, 200_000)?;
        let est = hill_estimator(&xs, 4_000);
        worst = worst.max((est - alpha).abs());
    }
    Ok(suite("hill_tail_index", worst <= HILL_TOL, format!("alpha in {{1.05, 1.5, 1.95}}, max |error| {worst:.3} (tol {HILL_TOL})")))
}

fn determinism_suite(seed: u64) -> Result<SuiteResult> {
    let mut sc = Scenario::desk(&[2, 2], &[3.0, 8.0]);
    sc.slots = 6;
    sc.samples = 4;
    let a = sc.sample_set(seed)?;
    let b = sc.sample_set(seed)?;
    let sla = sc.sla()?;
    let spec = SearchSpec { x_max: 40.0, ..SearchSpec::default() };
    let ra = minimize_allocation(&spec, &a, &sla)?;
    let rb = minimize_allocation(&spec, &b, &sla)?;
    let opts = BuildOptions::for_instance(FormulationKind::Hyra, &a, spec.x_max);
    let la = mip::write_lp(&mip::build(FormulationKind::Hyra, &a, &sla, &opts)?);
    let lb = mip::write_lp(&mip::build(FormulationKind::Hyra, &b, &sla, &opts)?);
    let same = a == b && ra == rb && la == lb;
    Ok(suite("determinism", same, format!("seed {seed}: samples, optimum and LP text {}", if same { "identical" } else { "differ" })))
}

/// Runs every suite; `trials` scales the random ones.
pub fn run_verify(trials: usize, seed: u64) -> Result<VerifyReport> {
    let mut rng = rng::stream(seed, DOMAIN_VERIFY, 0, 0);
    let mut suites = kkt_suite(&mut rng, trials)?;
    suites.push(equivalence_suite(seed, trials)?);
    suites.extend(mip_suite(&mut rng, (trials / 10).max(20))?);
    suites.extend(queue_suites(&mut rng, trials)?);
    suites.push(hill_suite(&mut rng)?);
    suites.push(determinism_suite(seed)?);
    Ok(VerifyReport { suites })
}
