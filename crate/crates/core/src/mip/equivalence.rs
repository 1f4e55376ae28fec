//! Numerical check that the reciprocal-multiplier constraints describe the
//! same set as the dedicated-pool KKT conditions, for fixed shared shares.

use rand::Rng;

use crate::error::Result;
use crate::rng::{self, DOMAIN_VERIFY};
use crate::samples::Topology;
use crate::scheduler::{marginal_utility, water_fill};

/// One slot with fixed shared shares.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceInstance {
    pub topology: Topology,
    pub etas: Vec<f64>,
    pub y_sh: Vec<f64>,
    pub x_ded: Vec<f64>,
}

/// `(y_ded, lambda_s, gamma_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub y_ded: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// `(y_ded, omega_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPoint {
    pub y_ded: Vec<f64>,
    pub omega: Vec<f64>,
}

impl EquivalenceInstance {
    fn base(&self, i: usize) -> f64 {
        1.0 / self.etas[i] + self.y_sh[i]
    }

    fn marginal(&self, i: usize, y_ded: f64) -> f64 {
        marginal_utility(self.etas[i], y_ded + self.y_sh[i])
    }
}

/// Largest residual of the KKT system; `0` means membership.
pub fn in_kkt_set(inst: &EquivalenceInstance, p: &KktPoint) -> f64 {
    let topo = &inst.topology;
    let mut r: f64 = 0.0;
    for s in 0..topo.slice_count() {
        let members = topo.members(s);
        let used: f64 = members.iter().map(|&i| p.y_ded[i]).sum();
        r = r.max(used - inst.x_ded[s]);
        r = r.max((p.lambda[s] * (inst.x_ded[s] - used)).abs());
        for &i in members {
            r = r.max(-p.y_ded[i]);
            r = r.max((inst.marginal(i, p.y_ded[i]) - (p.lambda[s] - p.gamma[i])).abs());
            r = r.max((p.gamma[i] * p.y_ded[i]).abs());
            r = r.max(-p.gamma[i]);
        }
    }
    r
}

/// Largest residual of the transformed system; `0` means membership.
pub fn in_transformed_set(inst: &EquivalenceInstance, p: &TransformedPoint) -> f64 {
    let topo = &inst.topology;
    let mut r: f64 = 0.0;
    for s in 0..topo.slice_count() {
        let members = topo.members(s);
        let w = p.omega[s];
        if !(w > 0.0) {
            return f64::INFINITY;
        }
        let used: f64 = members.iter().map(|&i| p.y_ded[i]).sum();
        r = r.max((used - inst.x_ded[s]).abs());
        for &i in members {
            let e = inst.etas[i];
            let slack = 1.0 + e * (p.y_ded[i] + inst.y_sh[i] - w);
            r = r.max(-p.y_ded[i]);
            r = r.max(-slack);
            r = r.max((p.y_ded[i] * slack).abs());
        }
    }
    r
}

/// A KKT point by water-filling each slice's budget on top of `y_sh`.
///
/// For a zero budget any `lambda_s >= max_i eta_i / (1 + eta_i y_sh_i)` is
/// admissible; the smallest one is returned.
pub fn kkt_point_from_fill(inst: &EquivalenceInstance) -> Result<KktPoint> {
    let topo = &inst.topology;
    let n = inst.etas.len();
    let mut y_ded = vec![0.0; n];
    let mut lambda = Vec::with_capacity(topo.slice_count());
    for s in 0..topo.slice_count() {
        let members = topo.members(s);
        let bases: Vec<f64> = members.iter().map(|&i| inst.base(i)).collect();
        let mut out = vec![0.0; members.len()];
        let level = water_fill(&bases, inst.x_ded[s], &mut out)?;
        for (&i, y) in members.iter().zip(out) {
            y_ded[i] = y;
        }
        let l = if inst.x_ded[s] > 0.0 { 1.0 / level.height } else { members.iter().map(|&i| inst.marginal(i, 0.0)).fold(0.0, f64::max) };
        lambda.push(l);
    }
    let gamma = (0..n).map(|i| (lambda[topo.slice_of(i)] - inst.marginal(i, y_ded[i])).max(0.0)).collect();
    Ok(KktPoint { y_ded, lambda, gamma })
}

pub fn to_transformed(p: &KktPoint) -> TransformedPoint {
    TransformedPoint { y_ded: p.y_ded.clone(), omega: p.lambda.iter().map(|l| 1.0 / l).collect() }
}

pub fn to_kkt(inst: &EquivalenceInstance, p: &TransformedPoint) -> KktPoint {
    let lambda: Vec<f64> = p.omega.iter().map(|w| 1.0 / w).collect();
    let gamma = (0..inst.etas.len()).map(|i| lambda[inst.topology.slice_of(i)] - inst.marginal(i, p.y_ded[i])).collect();
    KktPoint { y_ded: p.y_ded.clone(), lambda, gamma }
}

/// A transformed-set point with heights `omega`; rewrites `inst.x_ded` to the
/// budgets those heights imply. Slices whose height is at or below every
/// base get zero budget.
pub fn transformed_point_from_height(inst: &mut EquivalenceInstance, omega: &[f64]) -> TransformedPoint {
    let n = inst.etas.len();
    let mut y_ded = vec![0.0; n];
    for s in 0..inst.topology.slice_count() {
        let mut total = 0.0;
        for &i in inst.topology.members(s) {
            y_ded[i] = (omega[s] - inst.base(i)).max(0.0);
            total += y_ded[i];
        }
        inst.x_ded[s] = total;
    }
    TransformedPoint { y_ded, omega: omega.to_vec() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub tol: f64,
    pub forward_failures: usize,
    pub backward_failures: usize,
    pub max_forward: f64,
    pub max_backward: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.forward_failures == 0 && self.backward_failures == 0
    }
}

/// Both directions on one instance: `(forward residual, backward residual)`.
/// The backward direction draws fresh heights for the same channel and
/// shared shares.
pub fn check_instance<R: Rng>(inst: &EquivalenceInstance, rng: &mut R) -> Result<(f64, f64)> {
    let forward = in_transformed_set(inst, &to_transformed(&kkt_point_from_fill(inst)?));

    let mut back = inst.clone();
    let omega: Vec<f64> = (0..inst.topology.slice_count())
        .map(|s| {
            let min_base = inst.topology.members(s).iter().map(|&i| inst.base(i)).fold(f64::INFINITY, f64::min);
            if rng.random_bool(0.2) {
                // zero-budget slice: any 0 < omega <= min base
                min_base * rng.random_range(0.05..=1.0)
            } else {
                min_base + rng.random_range(0.0..5.0)
            }
        })
        .collect();
    let p = transformed_point_from_height(&mut back, &omega);
    let backward = in_kkt_set(&back, &to_kkt(&back, &p)).max(in_transformed_set(&back, &p));
    Ok((forward, backward))
}

/// A random one-slot instance with up to `max_ues` UEs in 1..=3 slices.
pub fn random_instance<R: Rng>(rng: &mut R, max_ues: usize, eta_max: f64) -> EquivalenceInstance {
    let n = rng.random_range(1..=max_ues.max(1));
    let slices = rng.random_range(1..=n.min(3));
    // every slice gets at least one UE
    let slice_of: Vec<usize> = (0..n).map(|i| if i < slices { i } else { rng.random_range(0..slices) }).collect();
    let topology = Topology::new(slice_of, slices).expect("non-empty slices");
    let etas = (0..n).map(|_| rng.random_range(0.05..=eta_max)).collect();
    let y_sh = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..4.0) }).collect();
    let x_ded = (0..slices).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..10.0) }).collect();
    EquivalenceInstance { topology, etas, y_sh, x_ded }
}

pub fn verify_transform_equivalence(trials: usize, max_ues: usize, seed: u64, tol: f64) -> Result<EquivalenceReport> {
    let mut rng = rng::stream(seed, DOMAIN_VERIFY, 0xe9, 0);
    let mut report = EquivalenceReport { trials, tol, forward_failures: 0, backward_failures: 0, max_forward: 0.0, max_backward: 0.0 };
    for _ in 0..trials {
        let inst = random_instance(&mut rng, max_ues, crate::channel::DEFAULT_ETA_MAX);
        let (f, b) = check_instance(&inst, &mut rng)?;
        report.max_forward = report.max_forward.max(f);
        report.max_backward = report.max_backward.max(b);
        report.forward_failures += usize::from(!(f <= tol));
        report.backward_failures += usize::from(!(b <= tol));
    }
    Ok(report)
}
