//! Queue evolution, Little's-law delays and SLA evaluation.
//!
//! Service is work-conserving: in every slot a UE is served
//! `min(backlog + arrivals, capacity)` bits with capacity
//! `168 * eta * (y_ded + y_sh)`. The delay of sample `k` is
//! `sum_{t=1..T} Q(k, t) / sum_{t=1..T} A(k, t)`, in slots (= ms); the
//! post-horizon backlog `Q(k, T+1)` is tracked but not part of the ratio.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::N_SYM;
use crate::error::{Error, Result};
use crate::samples::{SampleSet, Topology};
use crate::scheduler::{Allocation, SlotWorkspace};

/// One slot of work-conserving service: returns `(Q_next, S)`.
#[inline]
pub fn step_queue(backlog: f64, arrivals: f64, capacity: f64) -> (f64, f64) {
    let offered = backlog + arrivals;
    let served = offered.min(capacity);
    (offered - served, served)
}

/// Little's-law delay of one sample; zero when nothing arrived.
#[inline]
pub fn little_delay(backlog_sum: f64, arrival_sum: f64) -> f64 {
    if arrival_sum > 0.0 {
        backlog_sum / arrival_sum
    } else {
        0.0
    }
}

/// Backlog `Q_i(k, t)` for `t = 0..=T` and service `S_i(k, t)` for `t = 0..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    samples: usize,
    slots: usize,
    backlog: Vec<f64>,
    served: Vec<f64>,
    capacity: Vec<f64>,
}

impl QueueState {
    /// Backlog at the start of slot `t`; `t = T` is the post-horizon backlog.
    pub fn backlog(&self, ue: usize, k: usize, t: usize) -> f64 {
        self.backlog[(ue * self.samples + k) * (self.slots + 1) + t]
    }

    pub fn served(&self, ue: usize, k: usize, t: usize) -> f64 {
        self.served[(ue * self.samples + k) * self.slots + t]
    }

    pub fn capacity(&self, ue: usize, k: usize, t: usize) -> f64 {
        self.capacity[(ue * self.samples + k) * self.slots + t]
    }
}

/// Per-sample and SAA-mean delays.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    samples: usize,
    slice_of: Vec<usize>,
    /// `d_i(k)`, indexed `[ue * K + k]`.
    per_sample: Vec<f64>,
    /// `d_i = (1/K) sum_k d_i(k)`.
    pub mean: Vec<f64>,
    /// Mean of `d_i` over the UEs of each slice.
    pub slice_mean: Vec<f64>,
    /// `(ue, k)` pairs that had no arrivals; their delay is defined as zero.
    pub zero_arrival: Vec<(usize, usize)>,
}

impl DelayReport {
    fn from_per_sample(per_sample: Vec<f64>, samples: usize, topology: &Topology, zero_arrival: Vec<(usize, usize)>) -> Self {
        let n = topology.ue_count();
        let mean: Vec<f64> = (0..n).map(|ue| saa_mean(&per_sample[ue * samples..(ue + 1) * samples])).collect();
        let slice_mean = slice_means(&mean, topology);
        DelayReport { samples, slice_of: topology.slice_map().to_vec(), per_sample, mean, slice_mean, zero_arrival }
    }

    pub fn per_sample(&self, ue: usize, k: usize) -> f64 {
        self.per_sample[ue * self.samples + k]
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn ue_count(&self) -> usize {
        self.mean.len()
    }

    /// CSV `ue_id,slice,d_mean,d_0,..,d_{K-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["ue_id".to_string(), "slice".into(), "d_mean".into()];
        header.extend((0..self.samples).map(|k| format!("d_{k}")));
        w.write_record(&header)?;
        for ue in 0..self.ue_count() {
            let mut row = vec![ue.to_string(), self.slice_of[ue].to_string(), self.mean[ue].to_string()];
            row.extend((0..self.samples).map(|k| self.per_sample(ue, k).to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn saa_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn slice_means(mean: &[f64], topology: &Topology) -> Vec<f64> {
    (0..topology.slice_count())
        .map(|s| {
            let m = topology.members(s);
            if m.is_empty() {
                0.0
            } else {
                m.iter().map(|&i| mean[i]).sum::<f64>() / m.len() as f64
            }
        })
        .collect()
}

/// Simulates every sample under `allocation`.
pub fn simulate(allocation: &Allocation, samples: &SampleSet) -> Result<(QueueState, DelayReport)> {
    allocation.check_slices(samples.slice_count())?;
    samples.validate()?;
    let (n, kk, tt) = (samples.ue_count(), samples.samples(), samples.slots());
    let mut backlog = vec![0.0; n * kk * (tt + 1)];
    let mut served = vec![0.0; n * kk * tt];
    let mut capacity = vec![0.0; n * kk * tt];
    let mut per_sample = vec![0.0; n * kk];
    let mut zero_arrival = Vec::new();
    let mut ws = SlotWorkspace::default();
    let mut etas = Vec::with_capacity(n);
    let mut totals = vec![0.0; n];
    let mut queue = vec![0.0; n];
    let mut queue_sum = vec![0.0; n];
    for k in 0..kk {
        queue.copy_from_slice(&samples.initial_backlog);
        queue_sum.iter_mut().for_each(|q| *q = 0.0);
        for t in 0..tt {
            samples.etas_at(k, t, &mut etas);
            ws.totals(allocation, &etas, &samples.topology, &mut totals)?;
            for ue in 0..n {
                let cap = N_SYM * etas[ue] * totals[ue];
                let a = samples.arrivals.get(ue, k, t) as f64;
                backlog[(ue * kk + k) * (tt + 1) + t] = queue[ue];
                queue_sum[ue] += queue[ue];
                let (next, s) = step_queue(queue[ue], a, cap);
                served[(ue * kk + k) * tt + t] = s;
                capacity[(ue * kk + k) * tt + t] = cap;
                queue[ue] = next;
            }
        }
        for ue in 0..n {
            backlog[(ue * kk + k) * (tt + 1) + tt] = queue[ue];
            let arrived = samples.arrivals.total(ue, k) as f64;
            if arrived == 0.0 {
                zero_arrival.push((ue, k));
            }
            per_sample[ue * kk + k] = little_delay(queue_sum[ue], arrived);
        }
    }
    zero_arrival.sort_unstable();
    let report = DelayReport::from_per_sample(per_sample, kk, &samples.topology, zero_arrival);
    Ok((QueueState { samples: kk, slots: tt, backlog, served, capacity }, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaMode {
    PerUe,
    SliceAggregated,
}

/// Delay budgets in ms (= slots).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaSpec {
    pub mode: SlaMode,
    /// `D_{s,i}` per UE, used in per-UE mode.
    pub ue_budgets: Vec<f64>,
    /// `D_s` per slice, used in slice-aggregated mode.
    pub slice_budgets: Vec<f64>,
}

impl SlaSpec {
    /// Every UE inherits its slice budget.
    pub fn from_slice_budgets(mode: SlaMode, topology: &Topology, slice_budgets: Vec<f64>) -> Result<Self> {
        let ue_budgets = (0..topology.ue_count()).map(|i| slice_budgets.get(topology.slice_of(i)).copied().unwrap_or(0.0)).collect();
        let sla = SlaSpec { mode, ue_budgets, slice_budgets };
        sla.validate(topology)?;
        Ok(sla)
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.ue_budgets.len() != topology.ue_count() || self.slice_budgets.len() != topology.slice_count() {
            return Err(Error::Dimension("SLA budgets do not match the topology".into()));
        }
        if self.ue_budgets.iter().chain(&self.slice_budgets).any(|&d| !(d > 0.0)) {
            return Err(Error::config("sla", "delay budgets must be positive"));
        }
        Ok(())
    }

    /// Number of SLA rows: one per UE or one per slice.
    pub fn row_count(&self) -> usize {
        match self.mode {
            SlaMode::PerUe => self.ue_budgets.len(),
            SlaMode::SliceAggregated => self.slice_budgets.len(),
        }
    }

    /// A copy in the other aggregation mode.
    pub fn with_mode(&self, mode: SlaMode) -> Self {
        SlaSpec { mode, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlaOutcome {
    pub satisfied: bool,
    /// Budget minus achieved delay, one entry per SLA row.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
}

/// Checks `d <= D` (inclusive) for every SLA row.
pub fn sla_satisfied(report: &DelayReport, sla: &SlaSpec) -> SlaOutcome {
    let margins: Vec<f64> = match sla.mode {
        SlaMode::PerUe => sla.ue_budgets.iter().zip(&report.mean).map(|(d, m)| d - m).collect(),
        SlaMode::SliceAggregated => sla.slice_budgets.iter().zip(&report.slice_mean).map(|(d, m)| d - m).collect(),
    };
    let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    SlaOutcome { satisfied: margins.iter().all(|&m| m >= 0.0), margins, worst_margin }
}

/// Feasibility of `allocation` without materialising queue states.
///
/// Delays only accumulate, so the run stops as soon as a partial sum exceeds
/// its budget. The verdict equals `sla_satisfied(simulate(..))`.
pub struct FeasibilityProbe<'a> {
    samples: &'a SampleSet,
    sla: &'a SlaSpec,
    arrival_totals: Vec<f64>,
    ws: SlotWorkspace,
    etas: Vec<f64>,
    totals: Vec<f64>,
    queue: Vec<f64>,
    queue_sum: Vec<f64>,
    acc: Vec<f64>,
    /// Full simulations started.
    pub evaluations: usize,
}

impl<'a> FeasibilityProbe<'a> {
    pub fn new(samples: &'a SampleSet, sla: &'a SlaSpec) -> Result<Self> {
        samples.validate()?;
        sla.validate(&samples.topology)?;
        let n = samples.ue_count();
        let kk = samples.samples();
        let arrival_totals = (0..n).flat_map(|ue| (0..kk).map(move |k| (ue, k))).map(|(ue, k)| samples.arrivals.total(ue, k) as f64).collect();
        Ok(FeasibilityProbe {
            samples,
            sla,
            arrival_totals,
            ws: SlotWorkspace::default(),
            etas: Vec::with_capacity(n),
            totals: vec![0.0; n],
            queue: vec![0.0; n],
            queue_sum: vec![0.0; n],
            acc: vec![0.0; n],
            evaluations: 0,
        })
    }

    fn violated(&self, partial: &[f64]) -> bool {
        let kk = self.samples.samples() as f64;
        match self.sla.mode {
            SlaMode::PerUe => partial.iter().zip(&self.sla.ue_budgets).any(|(p, d)| p / kk > *d),
            SlaMode::SliceAggregated => {
                let topo = &self.samples.topology;
                (0..topo.slice_count()).any(|s| {
                    let m = topo.members(s);
                    !m.is_empty() && m.iter().map(|&i| partial[i] / kk).sum::<f64>() / m.len() as f64 > self.sla.slice_budgets[s]
                })
            }
        }
    }

    pub fn samples(&self) -> &'a SampleSet {
        self.samples
    }

    pub fn sla(&self) -> &'a SlaSpec {
        self.sla
    }

    pub fn is_feasible(&mut self, allocation: &Allocation) -> Result<bool> {
        allocation.check_slices(self.samples.slice_count())?;
        self.evaluations += 1;
        let samples = self.samples;
        let (n, kk, tt) = (samples.ue_count(), samples.samples(), samples.slots());
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        let mut partial = vec![0.0; n];
        for k in 0..kk {
            self.queue.copy_from_slice(&samples.initial_backlog);
            self.queue_sum.iter_mut().for_each(|q| *q = 0.0);
            for t in 0..tt {
                samples.etas_at(k, t, &mut self.etas);
                self.ws.totals(allocation, &self.etas, &samples.topology, &mut self.totals)?;
                for ue in 0..n {
                    self.queue_sum[ue] += self.queue[ue];
                    let cap = N_SYM * self.etas[ue] * self.totals[ue];
                    let a = samples.arrivals.get(ue, k, t) as f64;
                    self.queue[ue] = step_queue(self.queue[ue], a, cap).0;
                    partial[ue] = self.acc[ue] + little_delay(self.queue_sum[ue], self.arrival_totals[ue * kk + k]);
                }
                if self.violated(&partial) {
                    return Ok(false);
                }
            }
            for ue in 0..n {
                self.acc[ue] += little_delay(self.queue_sum[ue], self.arrival_totals[ue * kk + k]);
            }
        }
        let per_sample: Vec<f64> = self.acc.clone();
        // final verdict through the same arithmetic as `sla_satisfied`
        let mean: Vec<f64> = per_sample.iter().map(|a| a / kk as f64).collect();
        Ok(final_verdict(&mean, &samples.topology, self.sla))
    }
}

fn final_verdict(mean: &[f64], topology: &Topology, sla: &SlaSpec) -> bool {
    match sla.mode {
        SlaMode::PerUe => mean.iter().zip(&sla.ue_budgets).all(|(m, d)| *m <= *d),
        SlaMode::SliceAggregated => slice_means(mean, topology).iter().zip(&sla.slice_budgets).all(|(m, d)| *m <= *d),
    }
}
