use std::collections::BTreeMap;

use super::model::{Family, FormulationKind, MipModel, VarKind};
use crate::error::{Error, Result};
use crate::queue::simulate;
use crate::samples::SampleSet;
use crate::scheduler::{schedule_slot, Allocation};

/// Variable name to value.
pub type Assignment = BTreeMap<String, f64>;

/// Relaxed Big-M rows may use at most this fraction of `M`.
pub const BIG_M_HEADROOM: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    /// Largest violation per constraint family present in the model.
    pub by_family: BTreeMap<Family, f64>,
    /// Worst single row.
    pub worst: Option<(String, f64)>,
    pub bounds: f64,
    pub integrality: f64,
    /// Largest `|core - tight bound| / M` over relaxed Big-M rows.
    pub big_m_usage: f64,
    pub tol: f64,
}

impl ViolationReport {
    pub fn max(&self) -> f64 {
        self.by_family.values().copied().fold(self.bounds.max(self.integrality), f64::max)
    }

    pub fn feasible(&self) -> bool {
        self.max() <= self.tol
    }

    pub fn family(&self, family: Family) -> f64 {
        self.by_family.get(&family).copied().unwrap_or(0.0)
    }

    pub fn big_m_sufficient(&self) -> bool {
        self.big_m_usage <= BIG_M_HEADROOM
    }
}

/// Evaluates every row, bound and integrality requirement at `assignment`.
pub fn check_solution(model: &MipModel, assignment: &Assignment, tol: f64) -> Result<ViolationReport> {
    let mut values = Vec::with_capacity(model.var_count());
    for v in &model.variables {
        match assignment.get(&v.name) {
            Some(&x) => values.push(x),
            None => return Err(Error::MissingVariable(v.name.clone())),
        }
    }
    let mut bounds: f64 = 0.0;
    let mut integrality: f64 = 0.0;
    for (v, &x) in model.variables.iter().zip(&values) {
        if !x.is_finite() {
            bounds = f64::INFINITY;
            continue;
        }
        bounds = bounds.max(v.lower - x);
        if v.kind == VarKind::Binary {
            bounds = bounds.max(x - 1.0);
            integrality = integrality.max(x.min(1.0 - x).max(0.0));
        }
    }
    let mut by_family: BTreeMap<Family, f64> = BTreeMap::new();
    let mut worst: Option<(String, f64)> = None;
    let mut big_m_usage: f64 = 0.0;
    for c in &model.constraints {
        let viol = match c.big_m {
            None => c.violation(&values),
            Some(info) => {
                // keep the M*z term out of the sum so that a tight row is not
                // swamped by roundoff in M
                let (zc, core) = c.terms.iter().fold((0.0, 0.0), |(zc, core), &(v, a)| if v == info.binary { (zc + a, core) } else { (zc, core + a * values[v]) });
                let raw = values[info.binary];
                let z = if (raw - raw.round()).abs() <= 1e-9 { raw.round() } else { raw };
                let rhs = c.rhs - zc * z;
                if z == info.relaxed_at {
                    let tight = c.rhs - zc * (1.0 - info.relaxed_at);
                    big_m_usage = big_m_usage.max((core - tight).abs() / model.big_m);
                }
                (core - rhs).max(0.0)
            }
        };
        let e = by_family.entry(c.family).or_insert(0.0);
        *e = e.max(viol);
        if worst.as_ref().is_none_or(|(_, w)| viol > *w) {
            worst = Some((c.name.clone(), viol));
        }
    }
    Ok(ViolationReport { by_family, worst, bounds: bounds.max(0.0), integrality, big_m_usage, tol })
}

/// Builds the MIP point induced by `allocation`: water-filling shares,
/// work-conserving queues, `w = 1/lambda`, `mu = 1/nu` and activity binaries.
pub fn lift_assignment(model: &MipModel, samples: &SampleSet, allocation: &Allocation) -> Result<Assignment> {
    let kind = model.kind;
    let ns = samples.slice_count();
    allocation.check_slices(ns)?;
    if kind == FormulationKind::SharedOnly && allocation.dedicated.iter().any(|&x| x != 0.0) {
        return Err(Error::InvalidAllocation("shared-only point with dedicated budget".into()));
    }
    if kind == FormulationKind::DedicatedOnly && allocation.shared != 0.0 {
        return Err(Error::InvalidAllocation("dedicated-only point with shared budget".into()));
    }
    let (n, kk, tt) = (samples.ue_count(), samples.samples(), samples.slots());
    let (queues, _) = simulate(allocation, samples)?;
    let mut a = Assignment::new();
    if kind.has_dedicated() {
        for (s, &x) in allocation.dedicated.iter().enumerate() {
            a.insert(format!("xded_{s}"), x);
        }
    }
    if kind.has_shared() {
        a.insert("xsh".into(), allocation.shared);
    }
    let mut etas = Vec::with_capacity(n);
    for k in 0..kk {
        for t in 0..tt {
            samples.etas_at(k, t, &mut etas);
            let sched = schedule_slot(allocation, &etas, &samples.topology)?;
            for i in 0..n {
                if kind.has_dedicated() {
                    a.insert(format!("yded_{i}_{k}_{t}"), sched.y_ded[i]);
                    a.insert(format!("zded_{i}_{k}_{t}"), if sched.y_ded[i] > 0.0 { 1.0 } else { 0.0 });
                }
                if kind.has_shared() {
                    a.insert(format!("ysh_{i}_{k}_{t}"), sched.y_sh[i]);
                    a.insert(format!("zsh_{i}_{k}_{t}"), if sched.y_sh[i] > 0.0 { 1.0 } else { 0.0 });
                }
                a.insert(format!("s_{i}_{k}_{t}"), queues.served(i, k, t));
            }
            if kind.has_dedicated() {
                for s in 0..ns {
                    a.insert(format!("w_{s}_{k}_{t}"), 1.0 / sched.lambda[s]);
                }
            }
            if kind.has_shared() {
                a.insert(format!("mu_{k}_{t}"), 1.0 / sched.nu);
            }
        }
        for i in 0..n {
            for t in 0..=tt {
                a.insert(format!("q_{i}_{k}_{t}"), queues.backlog(i, k, t));
            }
        }
    }
    Ok(a)
}

/// Reads the allocation variables out of an assignment.
pub fn pinned_allocation(model: &MipModel, slices: usize, assignment: &Assignment) -> Result<Allocation> {
    let get = |name: String| assignment.get(&name).copied().ok_or(Error::MissingVariable(name));
    let dedicated = if model.kind.has_dedicated() { (0..slices).map(|s| get(format!("xded_{s}"))).collect::<Result<Vec<_>>>()? } else { vec![0.0; slices] };
    let shared = if model.kind.has_shared() { get("xsh".into())? } else { 0.0 };
    Allocation::new(dedicated, shared)
}
