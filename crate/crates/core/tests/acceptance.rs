//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to stderr
//! (uncaptured) before asserting.

mod common;

use std::io::Write;
use std::time::Instant;

use hyra::experiment::run_scenario;
use hyra::mip::{self, FormulationKind};
use hyra::optimizer::{compare_strategies, minimize_allocation, Comparison, SearchSpec};
use hyra::rng::{self, DOMAIN_VERIFY};
use hyra::scenario::Scenario;
use hyra::scheduler::{kkt_residuals, schedule_slot, utility};
use hyra::verify::{random_slot, run_verify, tiny_samples};
use rand::Rng;

fn report(no: usize, passed: bool, detail: String) {
    let line = format!("{} criterion {no}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "criterion {no}: {detail}");
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_1_scheduler_optimality() {
    let start = Instant::now();
    let mut rng = rng::stream(101, DOMAIN_VERIFY, 1, 0);
    let trials = 1000;
    let mut worst_gap: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut worst_cert: f64 = 0.0;
    for _ in 0..trials {
        let (topo, etas, alloc) = random_slot(&mut rng);
        let s = schedule_slot(&alloc, &etas, &topo).unwrap();
        worst_kkt = worst_kkt.max(kkt_residuals(&s, &alloc, &etas, &topo).max());
        let ours = utility(&etas, &s.y_ded, &s.y_sh);
        let oracle = common::projected_gradient(&etas, topo.slice_map(), &alloc.dedicated, alloc.shared, 1e-8, 20_000);
        worst_cert = worst_cert.max(oracle.gap);
        assert!(oracle.gap >= -1e-9, "dual bound below primal value");
        worst_gap = worst_gap.max((ours - oracle.utility).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst_gap <= 1e-6 && worst_kkt <= 1e-8 && worst_cert <= 1e-6 && secs < 30.0,
        format!("{trials} slots, max |utility gap| {worst_gap:.2e}, max KKT residual {worst_kkt:.2e}, oracle certificate {worst_cert:.1e}, {secs:.1} s"),
    );
}

#[test]
fn criterion_2_transform_equivalence() {
    let r = mip::verify_transform_equivalence(1000, 8, 202, 1e-8).unwrap();
    report(
        2,
        r.passed(),
        format!("{} instances, forward max {:.2e}, backward max {:.2e}, failures {}/{}", r.trials, r.max_forward, r.max_backward, r.forward_failures, r.backward_failures),
    );
}

#[test]
fn criterion_3_mip_consistency() {
    let mut rng = rng::stream(303, DOMAIN_VERIFY, 3, 0);
    let spec = SearchSpec { x_max: 40.0, ..SearchSpec::default() };
    let scenarios = 25;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for n in 0..scenarios {
        let (samples, sla) = tiny_samples(&mut rng);
        for kind in FormulationKind::ALL {
            let opt = minimize_allocation(&spec.with_mode(kind), &samples, &sla).unwrap();
            let model = mip::build(kind, &samples, &sla, &mip::BuildOptions::for_instance(kind, &samples, spec.x_max)).unwrap();
            let lp = mip::parse_lp(&mip::write_lp(&model)).unwrap();
            let lifted = mip::lift_assignment(&model, &samples, &opt.best_relaxed).unwrap();
            let v = lp.max_violation(&lifted).unwrap();
            worst = worst.max(v);
            if !opt.feasible || v > 1e-6 || lp.constraints.len() != model.constraint_count() {
                bad.push(format!("#{n}/{kind}"));
            }
        }
    }
    report(3, bad.is_empty(), format!("{scenarios} scenarios x 3 kinds, max violation {worst:.2e}, failing {bad:?}"));
}

fn random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let slices = rng.random_range(1..=3);
    let counts: Vec<usize> = (0..slices).map(|_| rng.random_range(1..=4)).collect();
    let budgets: Vec<f64> = (0..slices).map(|_| rng.random_range(2.0..10.0_f64).round()).collect();
    let mut sc = Scenario::desk(&counts, &budgets).with_alpha(rng.random_range(1.1..1.9));
    sc.slots = 10;
    sc.samples = 5;
    for s in &mut sc.slices {
        s.traffic.load_bits_per_ms = rng.random_range(100.0..800.0);
    }
    sc
}

#[test]
fn criterion_4_feasible_set_inclusion() {
    let mut rng = rng::stream(404, DOMAIN_VERIFY, 4, 0);
    let runs = 12;
    let mut bad = Vec::new();
    let mut comps = Vec::new();
    for n in 0..runs {
        let sc = random_scenario(&mut rng);
        let c = compare_strategies(&sc.sample_set(n).unwrap(), &sc.sla().unwrap(), &sc.search).unwrap();
        let floor = c.dedicated_only.total_relaxed.min(c.shared_only.total_relaxed);
        if !c.hyra.feasible || c.hyra.total_relaxed > floor + sc.search.grid_step || c.savings() < 0.0 {
            bad.push(n);
        }
        comps.push(c);
    }
    let min_savings = comps.iter().map(Comparison::savings).fold(f64::INFINITY, f64::min);
    report(4, bad.is_empty(), format!("{runs} scenarios, min savings {min_savings:.3}, violating runs {bad:?}"));
}

struct Trend {
    dedicated: f64,
    shared: f64,
    savings: f64,
    per_seed: Vec<(f64, f64)>,
}

fn trend(budgets: &[f64], alpha: f64) -> Trend {
    let sc = Scenario::desk(&[6, 6], budgets).with_alpha(alpha);
    let r = run_scenario(&sc).unwrap();
    assert!(r.runs.iter().all(|s| s.comparison.all_feasible()));
    let d = r.relaxed_totals(FormulationKind::DedicatedOnly);
    let s = r.relaxed_totals(FormulationKind::SharedOnly);
    Trend { dedicated: mean(&d), shared: mean(&s), savings: mean(&r.savings()), per_seed: d.into_iter().zip(s).collect() }
}

#[test]
fn criterion_5_budget_heterogeneity_trend() {
    let start = Instant::now();
    let het = trend(&[3.0, 8.0], 1.5);
    let hom = trend(&[3.0, 3.0], 1.5);
    let het_ok = het.dedicated <= het.shared;
    let hom_ok = hom.shared <= hom.dedicated;
    let hom_seeds = hom.per_seed.iter().filter(|(d, s)| s <= d).count();
    report(
        5,
        het_ok && hom_ok && het.savings > 0.0 && hom.savings > 0.0,
        format!(
            "3/8 ms: dedicated {:.2} vs shared {:.2} ({}); 3/3 ms: shared {:.2} vs dedicated {:.2} ({}, shared <= dedicated on {hom_seeds}/{} seeds); savings {:.3}/{:.3}; {:.1} s",
            het.dedicated,
            het.shared,
            if het_ok { "ok" } else { "reversed" },
            hom.shared,
            hom.dedicated,
            if hom_ok { "ok" } else { "reversed" },
            hom.per_seed.len(),
            het.savings,
            hom.savings,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_burstiness_trend() {
    let bursty = trend(&[3.0, 8.0], 1.05);
    let smooth = trend(&[3.0, 8.0], 1.95);
    report(
        6,
        bursty.savings >= smooth.savings - 0.05,
        format!("mean savings {:.3} at alpha 1.05 vs {:.3} at alpha 1.95", bursty.savings, smooth.savings),
    );
}

#[test]
fn criterion_7_property_suites() {
    let r = run_verify(1000, 7).unwrap();
    let failed: Vec<&str> = r.suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    report(7, r.passed(), format!("{} suites green, failing {failed:?}", r.suites.len() - failed.len()));
}

#[test]
fn criterion_8_ceiling_cost() {
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let mut runs = 0;
    let mut rng = rng::stream(808, DOMAIN_VERIFY, 8, 0);
    let mut check = |c: &Comparison, slices: usize| {
        for r in c.results() {
            runs += 1;
            worst = worst.max(r.ceiling_cost());
            if r.ceiling_cost() >= (slices + 1) as f64 {
                bad += 1;
            }
        }
    };
    for n in 0..10 {
        let sc = random_scenario(&mut rng);
        let c = compare_strategies(&sc.sample_set(n).unwrap(), &sc.sla().unwrap(), &sc.search).unwrap();
        check(&c, sc.slices.len());
    }
    let sc = Scenario::desk(&[6, 6], &[3.0, 8.0]);
    for r in run_scenario(&sc).unwrap().runs {
        check(&r.comparison, 2);
    }
    report(8, bad == 0, format!("{runs} optimization runs, max ceiling cost {worst:.3} PRBs, runs at or above S+1: {bad}"));
}
