//! Outer loop: smallest total allocation whose simulated delays meet the SLA.
//!
//! Feasibility is monotone in every component (more resources never hurt a
//! water-filling schedule), so for a fixed prefix of components the smallest
//! feasible value of the last one is a threshold. The search enumerates the
//! prefixes of a grid in lexicographic order and locates each threshold by
//! galloping down from the best known upper bound, which the thresholds of
//! neighbouring prefixes provide. Points below a located threshold are never
//! evaluated; a sample of them is re-evaluated afterwards as an audit.

use std::collections::HashMap;
use std::io::Write;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mip::FormulationKind;
use crate::queue::{simulate, sla_satisfied, FeasibilityProbe, SlaSpec};
use crate::samples::SampleSet;
use crate::scheduler::Allocation;

/// Every `AUDIT_STRIDE`-th pruned point is re-evaluated.
pub const AUDIT_STRIDE: usize = 100;

const TOTAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub grid_step: f64,
    pub x_max: f64,
    pub refinement_rounds: usize,
    pub mode: FormulationKind,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec { grid_step: 1.0, x_max: 100.0, refinement_rounds: 2, mode: FormulationKind::Hyra }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(Error::config("search.grid_step", format!("must be positive, got {}", self.grid_step)));
        }
        if !(self.x_max >= self.grid_step && self.x_max.is_finite()) {
            return Err(Error::config("search.x_max", format!("must be finite and >= grid_step, got {}", self.x_max)));
        }
        if self.refinement_rounds > 20 {
            return Err(Error::config("search.refinement_rounds", "at most 20 rounds"));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: FormulationKind) -> Self {
        SearchSpec { mode, ..*self }
    }

    /// Step of the last refinement round.
    pub fn finest_step(&self) -> f64 {
        self.grid_step / f64::powi(2.0, self.refinement_rounds as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneAudit {
    pub pruned: usize,
    pub checked: usize,
    /// Audited points that turned out feasible; must be zero.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub mode: FormulationKind,
    /// Componentwise ceiling of `best_relaxed`.
    pub best: Allocation,
    pub best_relaxed: Allocation,
    pub total_prbs: f64,
    pub total_relaxed: f64,
    /// `best_relaxed` meets the SLA on an independent simulation.
    pub feasible: bool,
    pub evaluations: usize,
    pub audit: PruneAudit,
}

impl OptResult {
    pub fn ceiling_cost(&self) -> f64 {
        self.total_prbs - self.total_relaxed
    }
}

/// Active components per mode, in `[x_ded_0, .., x_ded_{S-1}, x_sh]` order.
fn active_dims(mode: FormulationKind, slices: usize) -> Vec<usize> {
    match mode {
        FormulationKind::Hyra => (0..=slices).collect(),
        FormulationKind::DedicatedOnly => (0..slices).collect(),
        FormulationKind::SharedOnly => vec![slices],
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// An axis-aligned grid `lo[d] + j * step`, `j < count[d]`.
struct Grid {
    lo: Vec<f64>,
    step: f64,
    count: Vec<usize>,
}

impl Grid {
    fn value(&self, d: usize, j: usize) -> f64 {
        self.lo[d] + j as f64 * self.step
    }
}

struct Search<'a> {
    probe: FeasibilityProbe<'a>,
    slices: usize,
    dims: Vec<usize>,
    cache: HashMap<Vec<u64>, bool>,
    best: Option<Vec<f64>>,
    best_total: f64,
    pruned: Vec<Vec<f64>>,
    pruned_count: usize,
}

impl<'a> Search<'a> {
    fn allocation(&self, point: &[f64]) -> Allocation {
        let mut comps = vec![0.0; self.slices + 1];
        for (&d, &v) in self.dims.iter().zip(point) {
            comps[d] = v;
        }
        Allocation::from_components(&comps)
    }

    fn feasible(&mut self, point: &[f64]) -> Result<bool> {
        let key: Vec<u64> = point.iter().map(|v| v.to_bits()).collect();
        if let Some(&f) = self.cache.get(&key) {
            return Ok(f);
        }
        let alloc = self.allocation(point);
        let f = self.probe.is_feasible(&alloc)?;
        self.cache.insert(key, f);
        Ok(f)
    }

    fn offer(&mut self, point: Vec<f64>) {
        let total: f64 = point.iter().sum();
        let better = match &self.best {
            None => true,
            Some(b) => total < self.best_total - TOTAL_TOL || (total <= self.best_total + TOTAL_TOL && lex_less(&point, b)),
        };
        if better {
            debug!("incumbent {point:?} total {total}");
            self.best_total = total;
            self.best = Some(point);
        }
    }

    fn record_pruned(&mut self, point: &[f64], last: usize, below: usize, grid: &Grid) {
        // all (point[..last], j) with j < below
        for j in 0..below {
            if self.pruned_count.is_multiple_of(AUDIT_STRIDE) {
                let mut p = point.to_vec();
                p[last] = grid.value(last, j);
                self.pruned.push(p);
            }
            self.pruned_count += 1;
        }
    }

    /// Smallest feasible index of the last dimension at `prefix`, searched in
    /// `0..=top`; `known_feasible` says whether `top` is already known feasible.
    fn threshold(&mut self, grid: &Grid, prefix: &[f64], top: usize, known_feasible: bool) -> Result<Option<usize>> {
        let last = prefix.len();
        let mut point = prefix.to_vec();
        point.push(0.0);
        let mut at = |s: &mut Self, j: usize| -> Result<bool> {
            point[last] = grid.value(last, j);
            s.feasible(&point)
        };
        if !known_feasible && !at(self, top)? {
            return Ok(None);
        }
        // gallop down from `top`, then bisect
        let mut hi = top;
        let mut gap = 1;
        let lo_infeasible: Option<usize> = loop {
            if hi == 0 {
                break None;
            }
            let probe_at = hi.saturating_sub(gap);
            if at(self, probe_at)? {
                hi = probe_at;
                gap *= 2;
            } else {
                break Some(probe_at);
            }
        };
        let Some(mut lo) = lo_infeasible else {
            return Ok(Some(0));
        };
        let floor = lo;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if at(self, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut full = prefix.to_vec();
        full.push(0.0);
        self.record_pruned(&full, last, floor, grid);
        Ok(Some(hi))
    }

    /// Enumerates the grid, updating the incumbent.
    fn run(&mut self, grid: &Grid) -> Result<()> {
        let nd = self.dims.len();
        let outer = nd - 1;
        let last_cap = grid.count[outer] - 1;
        // thresholds of visited prefixes, keyed by prefix indices
        let mut thresholds: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut idx = vec![0usize; outer];
        loop {
            let prefix: Vec<f64> = (0..outer).map(|d| grid.value(d, idx[d])).collect();
            let prefix_sum: f64 = prefix.iter().sum();
            // largest last index keeping the total within the incumbent
            let room = if self.best.is_some() { ((self.best_total - prefix_sum - grid.lo[outer]) / grid.step + TOTAL_TOL).floor() } else { last_cap as f64 };
            let mut skip_rest_of_row = false;
            if room < 0.0 {
                skip_rest_of_row = true;
            } else {
                let room = (room as usize).min(last_cap);
                // a predecessor's threshold bounds this one from above
                let upper = (0..outer)
                    .filter(|&d| idx[d] > 0)
                    .filter_map(|d| {
                        let mut p = idx.clone();
                        p[d] -= 1;
                        thresholds.get(&p).copied()
                    })
                    .min();
                let (top, known) = match upper {
                    Some(u) if u <= room => (u, true),
                    _ => (room, false),
                };
                if let Some(j) = self.threshold(grid, &prefix, top, known)? {
                    thresholds.insert(idx.clone(), j);
                    let mut p = prefix.clone();
                    p.push(grid.value(outer, j));
                    self.offer(p);
                }
            }
            // advance the prefix odometer, last prefix digit fastest
            if outer == 0 {
                break;
            }
            let mut d = outer - 1;
            if skip_rest_of_row {
                idx[d] = grid.count[d] - 1;
            }
            loop {
                idx[d] += 1;
                if idx[d] < grid.count[d] {
                    break;
                }
                idx[d] = 0;
                if d == 0 {
                    return Ok(());
                }
                d -= 1;
            }
        }
        Ok(())
    }

    fn audit(&mut self) -> Result<PruneAudit> {
        let points = std::mem::take(&mut self.pruned);
        let mut violations = 0;
        for p in &points {
            let alloc = self.allocation(p);
            let (_, report) = simulate(&alloc, self.probe_samples())?;
            if sla_satisfied(&report, self.probe_sla()).satisfied {
                violations += 1;
            }
        }
        Ok(PruneAudit { pruned: self.pruned_count, checked: points.len(), violations })
    }

    fn probe_samples(&self) -> &'a SampleSet {
        self.probe.samples()
    }

    fn probe_sla(&self) -> &'a SlaSpec {
        self.probe.sla()
    }
}

fn steps_in(lo: f64, hi: f64, step: f64) -> usize {
    ((hi - lo) / step + 1e-9).floor() as usize + 1
}

/// Grid search with threshold location and local refinement.
pub fn minimize_allocation(spec: &SearchSpec, samples: &SampleSet, sla: &SlaSpec) -> Result<OptResult> {
    minimize_allocation_seeded(spec, samples, sla, &[])
}

/// As [`minimize_allocation`], starting from the best feasible point among
/// `seeds` (each must lie in the mode's support).
pub fn minimize_allocation_seeded(spec: &SearchSpec, samples: &SampleSet, sla: &SlaSpec, seeds: &[Allocation]) -> Result<OptResult> {
    spec.validate()?;
    let slices = samples.slice_count();
    let dims = active_dims(spec.mode, slices);
    let mut search = Search {
        probe: FeasibilityProbe::new(samples, sla)?,
        slices,
        dims: dims.clone(),
        cache: HashMap::new(),
        best: None,
        best_total: f64::INFINITY,
        pruned: Vec::new(),
        pruned_count: 0,
    };
    for seed in seeds {
        seed.check_slices(slices)?;
        let comps = seed.components();
        let outside = (0..=slices).any(|d| !dims.contains(&d) && comps[d] != 0.0);
        if outside {
            return Err(Error::InvalidAllocation(format!("seed {seed:?} outside the {} support", spec.mode)));
        }
        let point: Vec<f64> = dims.iter().map(|&d| comps[d]).collect();
        if point.iter().all(|&v| v <= spec.x_max) && search.feasible(&point)? {
            search.offer(point);
        }
    }

    let n = dims.len();
    let count = steps_in(0.0, spec.x_max, spec.grid_step);
    search.run(&Grid { lo: vec![0.0; n], step: spec.grid_step, count: vec![count; n] })?;

    let mut step = spec.grid_step;
    for round in 0..spec.refinement_rounds {
        let Some(center) = search.best.clone() else { break };
        let half = step / 2.0;
        let lo: Vec<f64> = center.iter().map(|&c| (c - step).max(0.0)).collect();
        let count: Vec<usize> = center.iter().zip(&lo).map(|(&c, &l)| steps_in(l, (c + step).min(spec.x_max), half)).collect();
        debug!("refinement round {} step {half} around {center:?}", round + 1);
        search.run(&Grid { lo, step: half, count })?;
        step = half;
    }

    let audit = search.audit()?;
    let evaluations = search.probe.evaluations;
    let (best_relaxed, feasible) = match search.best.clone() {
        Some(p) => {
            let alloc = search.allocation(&p);
            let (_, report) = simulate(&alloc, samples)?;
            (alloc, sla_satisfied(&report, sla).satisfied)
        }
        None => (search.allocation(&vec![spec.x_max; n]), false),
    };
    let best = best_relaxed.ceil();
    info!("{}: best {:?} (relaxed total {}), {} evaluations", spec.mode, best, best_relaxed.total(), evaluations);
    Ok(OptResult {
        mode: spec.mode,
        total_prbs: best.total(),
        total_relaxed: best_relaxed.total(),
        best,
        best_relaxed,
        feasible,
        evaluations,
        audit,
    })
}

/// Smallest feasible shared pool by bisection to within `tol`; `None` when
/// even `x_max` is infeasible.
pub fn shared_only_bisection(samples: &SampleSet, sla: &SlaSpec, x_max: f64, tol: f64) -> Result<Option<f64>> {
    let slices = samples.slice_count();
    let mut probe = FeasibilityProbe::new(samples, sla)?;
    if probe.is_feasible(&Allocation::shared_only(slices, 0.0))? {
        return Ok(Some(0.0));
    }
    if !probe.is_feasible(&Allocation::shared_only(slices, x_max))? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, x_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if probe.is_feasible(&Allocation::shared_only(slices, mid))? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub hyra: OptResult,
    pub dedicated_only: OptResult,
    pub shared_only: OptResult,
}

impl Comparison {
    pub fn results(&self) -> [&OptResult; 3] {
        [&self.hyra, &self.dedicated_only, &self.shared_only]
    }

    /// `1 - hyra / mean(baselines)` on relaxed totals.
    pub fn savings(&self) -> f64 {
        savings(self.hyra.total_relaxed, self.dedicated_only.total_relaxed, self.shared_only.total_relaxed)
    }

    pub fn all_feasible(&self) -> bool {
        self.results().iter().all(|r| r.feasible)
    }
}

pub fn savings(hyra: f64, dedicated: f64, shared: f64) -> f64 {
    let mean = 0.5 * (dedicated + shared);
    if mean > 0.0 {
        1.0 - hyra / mean
    } else {
        0.0
    }
}

/// Runs all three modes on the same samples. HyRA starts from the baseline
/// optima, which are hybrid allocations too.
pub fn compare_strategies(samples: &SampleSet, sla: &SlaSpec, spec: &SearchSpec) -> Result<Comparison> {
    let dedicated_only = minimize_allocation(&spec.with_mode(FormulationKind::DedicatedOnly), samples, sla)?;
    let shared_only = minimize_allocation(&spec.with_mode(FormulationKind::SharedOnly), samples, sla)?;
    let seeds: Vec<Allocation> = [&dedicated_only, &shared_only].iter().filter(|r| r.feasible).map(|r| r.best_relaxed.clone()).collect();
    let hyra = minimize_allocation_seeded(&spec.with_mode(FormulationKind::Hyra), samples, sla, &seeds)?;
    Ok(Comparison { hyra, dedicated_only, shared_only })
}

/// CSV `mode,x_ded_1..x_ded_S,x_sh,total,feasible,evals,total_relaxed`.
pub fn write_comparison_csv<W: Write>(writer: W, results: &[&OptResult]) -> Result<()> {
    let slices = results.first().map_or(0, |r| r.best.dedicated.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["mode".to_string()];
    header.extend((1..=slices).map(|s| format!("x_ded_{s}")));
    header.extend(["x_sh", "total", "feasible", "evals", "total_relaxed"].map(String::from));
    w.write_record(&header)?;
    for r in results {
        let mut row = vec![r.mode.to_string()];
        row.extend(r.best.dedicated.iter().map(|x| x.to_string()));
        row.push(r.best.shared.to_string());
        row.push(r.total_prbs.to_string());
        row.push(r.feasible.to_string());
        row.push(r.evaluations.to_string());
        row.push(r.total_relaxed.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub comparison: Comparison,
}

/// CSV `alpha,hyra,dedicated_only,shared_only,savings` on relaxed totals.
pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["alpha", "hyra", "dedicated_only", "shared_only", "savings"])?;
    for r in rows {
        let c = &r.comparison;
        w.write_record([
            r.alpha.to_string(),
            c.hyra.total_relaxed.to_string(),
            c.dedicated_only.total_relaxed.to_string(),
            c.shared_only.total_relaxed.to_string(),
            c.savings().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Three-way comparison per tail index, with each alpha's samples produced by
/// `samples_for` (which should hold the mean load fixed).
pub fn burstiness_sweep<F>(alphas: &[f64], sla: &SlaSpec, spec: &SearchSpec, mut samples_for: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(f64) -> Result<SampleSet>,
{
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 1.0 && alpha <= 2.5) {
                return Err(Error::InvalidPareto(format!("sweep alpha {alpha} outside (1, 2.5]")));
            }
            let samples = samples_for(alpha)?;
            Ok(SweepRow { alpha, comparison: compare_strategies(&samples, sla, spec)? })
        })
        .collect()
}
