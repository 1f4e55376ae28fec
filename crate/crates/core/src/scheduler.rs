//! Per-slot scheduling by two-stage water-filling.
//!
//! For one slot the scheduler maximises `sum_i ln(1 + eta_i (y_ded_i + y_sh_i))`
//! subject to per-slice dedicated budgets and one shared budget. Writing
//! `1/eta_i` for the base height of UE `i`:
//!
//! 1. each slice levels its dedicated budget over its own UEs, reaching
//!    height `1/beta_s`;
//! 2. the shared budget is levelled over all UEs on top of the first stage,
//!    reaching height `1/nu`.
//!
//! Both levels are found by bisection on the height. Once the bracket
//! isolates the set of submerged UEs the level is finished in closed form,
//! which leaves a residual at rounding level.
//!
//! Multipliers are recovered as `lambda_s = min(beta_s, nu)`,
//! `gamma_i = lambda_s - u_i` and `sigma_i = nu - u_i`, where
//! `u_i = eta_i / (1 + eta_i y_i)` is the marginal utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::Topology;

/// Bisection stops once `|sum_i max(h - b_i, 0) - budget|` is below this.
pub const LEVEL_TOL: f64 = 1e-10;

/// Negative multipliers within this distance of zero are clipped.
pub const DUAL_CLIP_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 300;

/// Outer-loop decision: dedicated PRBs per slice plus one shared pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub dedicated: Vec<f64>,
    pub shared: f64,
}

impl Allocation {
    pub fn new(dedicated: Vec<f64>, shared: f64) -> Result<Self> {
        let a = Allocation { dedicated, shared };
        a.validate()?;
        Ok(a)
    }

    pub fn zeros(slices: usize) -> Self {
        Allocation { dedicated: vec![0.0; slices], shared: 0.0 }
    }

    pub fn shared_only(slices: usize, shared: f64) -> Self {
        Allocation { dedicated: vec![0.0; slices], shared }
    }

    /// `[x_ded_0, .., x_ded_{S-1}, x_sh]`.
    pub fn components(&self) -> Vec<f64> {
        let mut c = self.dedicated.clone();
        c.push(self.shared);
        c
    }

    pub fn from_components(c: &[f64]) -> Self {
        let (sh, ded) = c.split_last().expect("at least the shared component");
        Allocation { dedicated: ded.to_vec(), shared: *sh }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dedicated.iter().chain(std::iter::once(&self.shared)).any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidAllocation(format!("components must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    pub fn check_slices(&self, slices: usize) -> Result<()> {
        self.validate()?;
        if self.dedicated.len() != slices {
            return Err(Error::InvalidAllocation(format!(
                "{} dedicated budgets for {} slices",
                self.dedicated.len(),
                slices
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.dedicated.iter().sum::<f64>() + self.shared
    }

    pub fn ceil(&self) -> Self {
        Allocation { dedicated: self.dedicated.iter().map(|x| x.ceil()).collect(), shared: self.shared.ceil() }
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Allocation) -> bool {
        self.components().iter().zip(other.components()).all(|(a, b)| *a <= b)
    }
}

/// Water level of one pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    /// Common height `b_i + y_i` of every UE receiving a positive share.
    pub height: f64,
    pub bisections: usize,
}

/// Levels `budget` over vessels with base heights `bases`, writing
/// `max(h - b_i, 0)` to `out`.
///
/// With zero budget the reported height is `min_i b_i`, the highest level at
/// which nothing is poured.
pub fn water_fill(bases: &[f64], budget: f64, out: &mut [f64]) -> Result<Level> {
    debug_assert_eq!(bases.len(), out.len());
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::InvalidAllocation(format!("budget must be finite and >= 0, got {budget}")));
    }
    if bases.is_empty() {
        if budget > 0.0 {
            return Err(Error::EmptyPool { budget });
        }
        return Ok(Level { height: f64::INFINITY, bisections: 0 });
    }
    let (mut lo, mut hi_base) = (f64::INFINITY, f64::NEG_INFINITY);
    for &b in bases {
        lo = lo.min(b);
        hi_base = hi_base.max(b);
    }
    if budget == 0.0 {
        out.iter_mut().for_each(|y| *y = 0.0);
        return Ok(Level { height: lo, bisections: 0 });
    }
    // f(lo) = -budget < 0 and f(hi) >= n * budget - budget >= 0
    let mut hi = hi_base + budget;
    let mut height = hi;
    let mut bisections = 0;
    while bisections < MAX_BISECTIONS {
        bisections += 1;
        let mid = 0.5 * (lo + hi);
        let (mut count, mut sum, mut max_in, mut min_out) = (0usize, 0.0, f64::NEG_INFINITY, f64::INFINITY);
        for &b in bases {
            if b < mid {
                count += 1;
                sum += b;
                max_in = max_in.max(b);
            } else {
                min_out = min_out.min(b);
            }
        }
        if count > 0 {
            let exact = (budget + sum) / count as f64;
            if max_in < exact && exact <= min_out {
                height = exact;
                break;
            }
        }
        let excess = count as f64 * mid - sum - budget;
        if excess.abs() <= LEVEL_TOL {
            height = mid;
            break;
        }
        if excess < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        height = mid;
    }
    for (y, &b) in out.iter_mut().zip(bases) {
        *y = (height - b).max(0.0);
    }
    Ok(Level { height, bisections })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedicatedLevel {
    /// `1/beta` is the dedicated water height; `+inf` when the budget is zero.
    pub beta: f64,
    pub y_ded: Vec<f64>,
}

/// First stage: levels one slice's dedicated budget over its UEs.
pub fn dedicated_level(etas: &[f64], budget: f64) -> Result<DedicatedLevel> {
    check_etas(etas)?;
    let bases: Vec<f64> = etas.iter().map(|e| 1.0 / e).collect();
    let mut y_ded = vec![0.0; etas.len()];
    let level = water_fill(&bases, budget, &mut y_ded)?;
    let beta = if budget == 0.0 { f64::INFINITY } else { 1.0 / level.height };
    Ok(DedicatedLevel { beta, y_ded })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedLevel {
    /// `1/nu` is the shared water height. With zero budget it is the lowest
    /// first-stage height, so `nu = max_i u_i`.
    pub nu: f64,
    pub y_sh: Vec<f64>,
}

/// Second stage: levels the shared budget over all UEs on top of `y_ded`.
pub fn shared_level(etas: &[f64], y_ded: &[f64], budget: f64) -> Result<SharedLevel> {
    check_etas(etas)?;
    if y_ded.len() != etas.len() {
        return Err(Error::Dimension(format!("{} dedicated shares for {} UEs", y_ded.len(), etas.len())));
    }
    if y_ded.iter().any(|&y| !(y >= 0.0)) {
        return Err(Error::InvalidAllocation("dedicated shares must be >= 0".into()));
    }
    let bases: Vec<f64> = etas.iter().zip(y_ded).map(|(e, y)| 1.0 / e + y).collect();
    let mut y_sh = vec![0.0; etas.len()];
    let level = water_fill(&bases, budget, &mut y_sh)?;
    Ok(SharedLevel { nu: 1.0 / level.height, y_sh })
}

fn check_etas(etas: &[f64]) -> Result<()> {
    match etas.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        Some(&e) => Err(Error::NonPositiveEta(e)),
        None => Ok(()),
    }
}

/// Result of one slot: primal shares, water levels and KKT multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSchedule {
    pub y_ded: Vec<f64>,
    pub y_sh: Vec<f64>,
    /// Per-slice dedicated level (`+inf` for a zero dedicated budget).
    pub beta: Vec<f64>,
    /// Shared level.
    pub nu: f64,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SlotSchedule {
    pub fn total(&self, ue: usize) -> f64 {
        self.y_ded[ue] + self.y_sh[ue]
    }

    pub fn totals(&self) -> Vec<f64> {
        self.y_ded.iter().zip(&self.y_sh).map(|(a, b)| a + b).collect()
    }
}

/// `eta / (1 + eta y)`.
#[inline]
pub fn marginal_utility(eta: f64, y: f64) -> f64 {
    eta / (1.0 + eta * y)
}

/// `sum_i ln(1 + eta_i (y_ded_i + y_sh_i))`.
pub fn utility(etas: &[f64], y_ded: &[f64], y_sh: &[f64]) -> f64 {
    etas.iter().zip(y_ded).zip(y_sh).map(|((e, d), s)| (e * (d + s)).ln_1p()).sum()
}

/// Solves the slot problem for `allocation` and recovers the multipliers.
pub fn schedule_slot(allocation: &Allocation, etas: &[f64], topology: &Topology) -> Result<SlotSchedule> {
    allocation.check_slices(topology.slice_count())?;
    if etas.len() != topology.ue_count() {
        return Err(Error::Dimension(format!("{} etas for {} UEs", etas.len(), topology.ue_count())));
    }
    check_etas(etas)?;
    let n = etas.len();
    let mut y_ded = vec![0.0; n];
    let mut beta = Vec::with_capacity(topology.slice_count());
    for s in 0..topology.slice_count() {
        let members = topology.members(s);
        let slice_etas: Vec<f64> = members.iter().map(|&i| etas[i]).collect();
        let level = dedicated_level(&slice_etas, allocation.dedicated[s])?;
        for (&i, y) in members.iter().zip(level.y_ded) {
            y_ded[i] = y;
        }
        beta.push(level.beta);
    }
    let SharedLevel { nu, y_sh } = shared_level(etas, &y_ded, allocation.shared)?;

    let marginal: Vec<f64> = (0..n).map(|i| marginal_utility(etas[i], y_ded[i] + y_sh[i])).collect();
    let lambda: Vec<f64> = beta.iter().map(|&b| b.min(nu)).collect();
    let mut gamma = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for i in 0..n {
        gamma.push(clip_dual("gamma", lambda[topology.slice_of(i)] - marginal[i])?);
        sigma.push(clip_dual("sigma", nu - marginal[i])?);
    }
    Ok(SlotSchedule { y_ded, y_sh, beta, nu, lambda, gamma, sigma })
}

fn clip_dual(name: &str, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -DUAL_CLIP_TOL {
        Ok(0.0)
    } else {
        Err(Error::DualInfeasible { name: name.into(), value })
    }
}

/// Reusable buffers for the simulator hot loop, which only needs totals.
#[derive(Debug, Default)]
pub struct SlotWorkspace {
    bases: Vec<f64>,
    shares: Vec<f64>,
    y_ded: Vec<f64>,
    y_sh: Vec<f64>,
}

impl SlotWorkspace {
    /// Writes `y_ded_i + y_sh_i` for every UE into `totals`.
    pub fn totals(&mut self, allocation: &Allocation, etas: &[f64], topology: &Topology, totals: &mut [f64]) -> Result<()> {
        let n = etas.len();
        self.y_ded.clear();
        self.y_ded.resize(n, 0.0);
        for s in 0..topology.slice_count() {
            let budget = allocation.dedicated[s];
            if budget == 0.0 {
                continue;
            }
            let members = topology.members(s);
            self.bases.clear();
            self.bases.extend(members.iter().map(|&i| 1.0 / etas[i]));
            self.shares.clear();
            self.shares.resize(members.len(), 0.0);
            water_fill(&self.bases, budget, &mut self.shares)?;
            for (&i, &y) in members.iter().zip(&self.shares) {
                self.y_ded[i] = y;
            }
        }
        self.y_sh.clear();
        self.y_sh.resize(n, 0.0);
        if allocation.shared > 0.0 {
            self.bases.clear();
            self.bases.extend((0..n).map(|i| 1.0 / etas[i] + self.y_ded[i]));
            water_fill(&self.bases, allocation.shared, &mut self.y_sh)?;
        }
        for i in 0..n {
            totals[i] = self.y_ded[i] + self.y_sh[i];
        }
        Ok(())
    }
}

/// Largest absolute violation of each KKT family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub complementary_slackness: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementary_slackness).max(self.primal_feasibility).max(self.dual_feasibility)
    }
}

/// KKT residuals of `schedule` for the slot problem defined by `allocation` and `etas`.
pub fn kkt_residuals(schedule: &SlotSchedule, allocation: &Allocation, etas: &[f64], topology: &Topology) -> KktReport {
    let mut r = KktReport::default();
    let n = etas.len();
    let nu = schedule.nu;
    for i in 0..n {
        let s = topology.slice_of(i);
        let u = marginal_utility(etas[i], schedule.total(i));
        r.stationarity = r.stationarity.max((u - (schedule.lambda[s] - schedule.gamma[i])).abs());
        r.stationarity = r.stationarity.max((u - (nu - schedule.sigma[i])).abs());
        r.complementary_slackness = r
            .complementary_slackness
            .max((schedule.gamma[i] * schedule.y_ded[i]).abs())
            .max((schedule.sigma[i] * schedule.y_sh[i]).abs());
        r.primal_feasibility = r.primal_feasibility.max(-schedule.y_ded[i]).max(-schedule.y_sh[i]);
        r.dual_feasibility = r.dual_feasibility.max(-schedule.gamma[i]).max(-schedule.sigma[i]);
    }
    for s in 0..topology.slice_count() {
        let used: f64 = topology.members(s).iter().map(|&i| schedule.y_ded[i]).sum();
        let slack = allocation.dedicated[s] - used;
        r.complementary_slackness = r.complementary_slackness.max((schedule.lambda[s] * slack).abs());
        r.primal_feasibility = r.primal_feasibility.max(-slack);
        r.dual_feasibility = r.dual_feasibility.max(-schedule.lambda[s]);
    }
    let used: f64 = schedule.y_sh.iter().sum();
    let slack = allocation.shared - used;
    r.complementary_slackness = r.complementary_slackness.max((nu * slack).abs());
    r.primal_feasibility = r.primal_feasibility.max(-slack);
    r.dual_feasibility = r.dual_feasibility.max(-nu);
    r
}
