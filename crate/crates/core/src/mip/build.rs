use log::info;

use super::model::{BigMInfo, Family, FormulationKind, MipModel, Sense, VarKind};
use crate::channel::N_SYM;
use crate::error::{Error, Result};
use crate::queue::{SlaMode, SlaSpec};
use crate::samples::SampleSet;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub big_m: f64,
    pub epsilon: f64,
}

impl BuildOptions {
    /// Default `M` for allocations bounded by `x_max` per component.
    pub fn for_instance(kind: FormulationKind, samples: &SampleSet, x_max: f64) -> Self {
        let comps = match kind {
            FormulationKind::Hyra => samples.slice_count() + 1,
            FormulationKind::DedicatedOnly => samples.slice_count(),
            FormulationKind::SharedOnly => 1,
        };
        let x_total = comps as f64 * x_max;
        BuildOptions { big_m: default_big_m(samples.channel.eta_max(), x_total, DEFAULT_EPSILON), epsilon: DEFAULT_EPSILON }
    }
}

/// `10 * (1 + eta_max * (X_total + 1/epsilon))`.
pub fn default_big_m(eta_max: f64, x_total: f64, epsilon: f64) -> f64 {
    10.0 * (1.0 + eta_max * (x_total + 1.0 / epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelCounts {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
}

/// Closed-form sizes for `ues` UEs, `slices` slices, `k` samples, `t` slots.
pub fn expected_counts(kind: FormulationKind, ues: usize, slices: usize, k: usize, t: usize, sla_rows: usize) -> ModelCounts {
    let ukt = ues * k * t;
    let q = ues * k * (t + 1);
    // y, s, q and z per pool, plus the pool's multipliers
    let (variables, binaries, constraints) = match kind {
        FormulationKind::Hyra => (slices + 1 + 2 * ukt + ukt + q + slices * k * t + k * t + 2 * ukt, 2 * ukt, 2 * ukt + sla_rows + slices * k * t + k * t + 2 * ukt + 6 * ukt),
        FormulationKind::DedicatedOnly => (slices + ukt + ukt + q + slices * k * t + ukt, ukt, 2 * ukt + sla_rows + slices * k * t + ukt + 3 * ukt),
        FormulationKind::SharedOnly => (1 + ukt + ukt + q + k * t + ukt, ukt, 2 * ukt + sla_rows + k * t + ukt + 3 * ukt),
    };
    ModelCounts { variables, binaries, constraints }
}

struct Index {
    n: usize,
    kk: usize,
    tt: usize,
}

impl Index {
    fn ukt(&self, base: usize, i: usize, k: usize, t: usize) -> usize {
        base + (i * self.kk + k) * self.tt + t
    }

    fn q(&self, base: usize, i: usize, k: usize, t: usize) -> usize {
        base + (i * self.kk + k) * (self.tt + 1) + t
    }

    fn kt(&self, base: usize, k: usize, t: usize) -> usize {
        base + k * self.tt + t
    }

    fn skt(&self, base: usize, s: usize, k: usize, t: usize) -> usize {
        base + (s * self.kk + k) * self.tt + t
    }
}

fn add_ukt(model: &mut MipModel, prefix: &str, ix: &Index, kind: VarKind, lower: f64) -> usize {
    let base = model.var_count();
    for i in 0..ix.n {
        for k in 0..ix.kk {
            for t in 0..ix.tt {
                model.add_var(format!("{prefix}_{i}_{k}_{t}"), kind, lower);
            }
        }
    }
    base
}

/// Builds the single-level MIP of `kind` over `samples`.
pub fn build(kind: FormulationKind, samples: &SampleSet, sla: &SlaSpec, opts: &BuildOptions) -> Result<MipModel> {
    samples.validate()?;
    sla.validate(&samples.topology)?;
    if !(opts.big_m > 0.0 && opts.big_m.is_finite()) {
        return Err(Error::InvalidModel(format!("big_m must be positive and finite, got {}", opts.big_m)));
    }
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::InvalidModel(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let topo = &samples.topology;
    let (n, ns, kk, tt) = (samples.ue_count(), samples.slice_count(), samples.samples(), samples.slots());
    let ix = Index { n, kk, tt };
    let big_m = opts.big_m;
    let ded = kind.has_dedicated();
    let sh = kind.has_shared();
    let mut m = MipModel::new(kind, big_m, opts.epsilon);

    let x_ded = m.var_count();
    if ded {
        for s in 0..ns {
            m.add_var(format!("xded_{s}"), VarKind::Continuous, 0.0);
        }
    }
    let x_sh = m.var_count();
    if sh {
        m.add_var("xsh".into(), VarKind::Continuous, 0.0);
    }
    let y_ded = if ded { add_ukt(&mut m, "yded", &ix, VarKind::Continuous, 0.0) } else { usize::MAX };
    let y_sh = if sh { add_ukt(&mut m, "ysh", &ix, VarKind::Continuous, 0.0) } else { usize::MAX };
    let s_var = add_ukt(&mut m, "s", &ix, VarKind::Continuous, 0.0);
    let q_var = m.var_count();
    for i in 0..n {
        for k in 0..kk {
            for t in 0..=tt {
                let lower = if t == 0 { samples.initial_backlog[i] } else { 0.0 };
                m.add_var(format!("q_{i}_{k}_{t}"), VarKind::Continuous, lower);
            }
        }
    }
    let w_var = m.var_count();
    if ded {
        for s in 0..ns {
            for k in 0..kk {
                for t in 0..tt {
                    m.add_var(format!("w_{s}_{k}_{t}"), VarKind::Continuous, opts.epsilon);
                }
            }
        }
    }
    let mu_var = m.var_count();
    if sh {
        for k in 0..kk {
            for t in 0..tt {
                m.add_var(format!("mu_{k}_{t}"), VarKind::Continuous, opts.epsilon);
            }
        }
    }
    let z_ded = if ded { add_ukt(&mut m, "zded", &ix, VarKind::Binary, 0.0) } else { usize::MAX };
    let z_sh = if sh { add_ukt(&mut m, "zsh", &ix, VarKind::Binary, 0.0) } else { usize::MAX };

    m.objective = (0..m.var_count()).filter(|&v| (ded && v >= x_ded && v < x_ded + ns) || (sh && v == x_sh)).map(|v| (v, 1.0)).collect();

    // y_ded + y_sh as terms scaled by `c`
    let alloc_terms = |i: usize, k: usize, t: usize, c: f64| -> Vec<(usize, f64)> {
        let mut v = Vec::with_capacity(2);
        if ded {
            v.push((ix.ukt(y_ded, i, k, t), c));
        }
        if sh {
            v.push((ix.ukt(y_sh, i, k, t), c));
        }
        v
    };

    for i in 0..n {
        for k in 0..kk {
            for t in 0..tt {
                let eta = samples.channel.get(i, k, t);
                let mut terms = vec![(ix.ukt(s_var, i, k, t), 1.0)];
                terms.extend(alloc_terms(i, k, t, -N_SYM * eta));
                m.add_constraint(format!("cap_{i}_{k}_{t}"), Family::Capacity, terms, Sense::Le, 0.0, None);
            }
        }
    }
    for i in 0..n {
        for k in 0..kk {
            for t in 0..tt {
                let a = samples.arrivals.get(i, k, t) as f64;
                let terms = vec![(ix.q(q_var, i, k, t), 1.0), (ix.ukt(s_var, i, k, t), -1.0), (ix.q(q_var, i, k, t + 1), -1.0)];
                m.add_constraint(format!("queue_{i}_{k}_{t}"), Family::Queue, terms, Sense::Le, -a, None);
            }
        }
    }

    // SLA: (1/K) sum_k sum_t Q(k,t) / sum_t A(k,t); samples without arrivals drop out
    let delay_terms = |i: usize, scale: f64| -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        for k in 0..kk {
            let arrived = samples.arrivals.total(i, k) as f64;
            if arrived > 0.0 {
                let c = scale / (kk as f64 * arrived);
                v.extend((0..tt).map(|t| (ix.q(q_var, i, k, t), c)));
            }
        }
        v
    };
    match sla.mode {
        SlaMode::PerUe => {
            for i in 0..n {
                m.add_constraint(format!("sla_{i}"), Family::Sla, delay_terms(i, 1.0), Sense::Le, sla.ue_budgets[i], None);
            }
        }
        SlaMode::SliceAggregated => {
            for s in 0..ns {
                let members = topo.members(s);
                let scale = if members.is_empty() { 0.0 } else { 1.0 / members.len() as f64 };
                let terms = members.iter().flat_map(|&i| delay_terms(i, scale)).collect();
                m.add_constraint(format!("slaagg_{s}"), Family::Sla, terms, Sense::Le, sla.slice_budgets[s], None);
            }
        }
    }

    if ded {
        for s in 0..ns {
            for k in 0..kk {
                for t in 0..tt {
                    let mut terms: Vec<(usize, f64)> = topo.members(s).iter().map(|&i| (ix.ukt(y_ded, i, k, t), 1.0)).collect();
                    terms.push((x_ded + s, -1.0));
                    m.add_constraint(format!("bded_{s}_{k}_{t}"), Family::BudgetDedicated, terms, Sense::Eq, 0.0, None);
                }
            }
        }
    }
    if sh {
        for k in 0..kk {
            for t in 0..tt {
                let mut terms: Vec<(usize, f64)> = (0..n).map(|i| (ix.ukt(y_sh, i, k, t), 1.0)).collect();
                terms.push((x_sh, -1.0));
                m.add_constraint(format!("bsh_{k}_{t}"), Family::BudgetShared, terms, Sense::Eq, 0.0, None);
            }
        }
    }

    // eta * (y_total - level) >= -1 for each pool's level variable
    let level_terms = |i: usize, k: usize, t: usize, level: usize, eta: f64, sign: f64| -> Vec<(usize, f64)> {
        let mut v = alloc_terms(i, k, t, sign * eta);
        v.push((level, -sign * eta));
        v
    };
    if ded {
        for i in 0..n {
            for k in 0..kk {
                for t in 0..tt {
                    let eta = samples.channel.get(i, k, t);
                    let w = ix.skt(w_var, topo.slice_of(i), k, t);
                    m.add_constraint(format!("statded_{i}_{k}_{t}"), Family::StationarityDedicated, level_terms(i, k, t, w, eta, 1.0), Sense::Ge, -1.0, None);
                }
            }
        }
    }
    if sh {
        for i in 0..n {
            for k in 0..kk {
                for t in 0..tt {
                    let eta = samples.channel.get(i, k, t);
                    let mu = ix.kt(mu_var, k, t);
                    m.add_constraint(format!("statsh_{i}_{k}_{t}"), Family::StationarityShared, level_terms(i, k, t, mu, eta, 1.0), Sense::Ge, -1.0, None);
                }
            }
        }
    }

    let pools: [(bool, &str, usize, usize, [Family; 3]); 2] = [
        (ded, "ded", y_ded, z_ded, [Family::ActivationDedicated, Family::UpperDedicated, Family::LowerDedicated]),
        (sh, "sh", y_sh, z_sh, [Family::ActivationShared, Family::UpperShared, Family::LowerShared]),
    ];
    for (present, tag, y, z, fam) in pools {
        if !present {
            continue;
        }
        for i in 0..n {
            for k in 0..kk {
                for t in 0..tt {
                    let eta = samples.channel.get(i, k, t);
                    let level = if tag == "ded" { ix.skt(w_var, topo.slice_of(i), k, t) } else { ix.kt(mu_var, k, t) };
                    let zv = ix.ukt(z, i, k, t);
                    m.add_constraint(
                        format!("act{tag}_{i}_{k}_{t}"),
                        fam[0],
                        vec![(ix.ukt(y, i, k, t), 1.0), (zv, -big_m)],
                        Sense::Le,
                        0.0,
                        Some(BigMInfo { binary: zv, relaxed_at: 1.0 }),
                    );
                    let mut up = level_terms(i, k, t, level, eta, 1.0);
                    up.push((zv, big_m));
                    m.add_constraint(format!("up{tag}_{i}_{k}_{t}"), fam[1], up, Sense::Le, big_m - 1.0, Some(BigMInfo { binary: zv, relaxed_at: 0.0 }));
                    let mut lo = level_terms(i, k, t, level, eta, -1.0);
                    lo.push((zv, big_m));
                    m.add_constraint(format!("lo{tag}_{i}_{k}_{t}"), fam[2], lo, Sense::Le, big_m + 1.0, Some(BigMInfo { binary: zv, relaxed_at: 0.0 }));
                }
            }
        }
    }

    if kind == FormulationKind::DedicatedOnly {
        info!("dedicated-only model: omitted the lower Big-M row on y_sh/mu, which are not declared in this formulation");
    }
    debug_assert!(m.is_well_formed());
    Ok(m)
}
