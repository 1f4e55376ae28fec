//! Slice topology and the SAA sample set.

use crate::channel::SeTrace;
use crate::error::{Error, Result};
use crate::traffic::ArrivalTrace;

/// UE-to-slice membership. UEs are numbered globally, slices `0..slice_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    slice_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(slice_of: Vec<usize>, slice_count: usize) -> Result<Self> {
        if slice_of.is_empty() {
            return Err(Error::Dimension("topology needs at least one UE".into()));
        }
        let mut members = vec![Vec::new(); slice_count];
        for (ue, &s) in slice_of.iter().enumerate() {
            if s >= slice_count {
                return Err(Error::Dimension(format!("UE {ue} maps to slice {s} of {slice_count}")));
            }
            members[s].push(ue);
        }
        Ok(Topology { slice_of, members })
    }

    /// Contiguous slices with the given UE counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let slice_of = counts.iter().enumerate().flat_map(|(s, &n)| std::iter::repeat_n(s, n)).collect();
        Self::new(slice_of, counts.len())
    }

    pub fn ue_count(&self) -> usize {
        self.slice_of.len()
    }

    pub fn slice_count(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn slice_of(&self, ue: usize) -> usize {
        self.slice_of[ue]
    }

    pub fn members(&self, slice: usize) -> &[usize] {
        &self.members[slice]
    }

    pub fn slice_map(&self) -> &[usize] {
        &self.slice_of
    }

    /// Topology after relabelling: new UE `j` is old UE `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let slice_of = order.iter().map(|&o| self.slice_of[o]).collect();
        Topology::new(slice_of, self.slice_count()).expect("permutation of a valid topology")
    }
}

/// Arrival and SE traces over `K` samples of `T` slots for a fixed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub topology: Topology,
    pub arrivals: ArrivalTrace,
    pub channel: SeTrace,
    /// Backlog `Q_i(k, 1)` at the window start, in bits.
    pub initial_backlog: Vec<f64>,
}

impl SampleSet {
    pub fn new(topology: Topology, arrivals: ArrivalTrace, channel: SeTrace) -> Result<Self> {
        let n = topology.ue_count();
        let set = SampleSet { initial_backlog: vec![0.0; n], topology, arrivals, channel };
        set.validate()?;
        Ok(set)
    }

    pub fn with_initial_backlog(mut self, backlog: Vec<f64>) -> Result<Self> {
        if backlog.len() != self.ue_count() || backlog.iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::Dimension("initial backlog must be one non-negative value per UE".into()));
        }
        self.initial_backlog = backlog;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.ue_count();
        let a = &self.arrivals;
        let c = &self.channel;
        if a.ue_count() != n || c.ue_count() != n {
            return Err(Error::Dimension(format!(
                "{} UEs in topology, {} in arrivals, {} in channel",
                n,
                a.ue_count(),
                c.ue_count()
            )));
        }
        if a.samples() != c.samples() || a.slots() != c.slots() {
            return Err(Error::Dimension(format!(
                "arrivals are {}x{}, channel is {}x{}",
                a.samples(),
                a.slots(),
                c.samples(),
                c.slots()
            )));
        }
        if a.samples() == 0 || a.slots() == 0 {
            return Err(Error::Dimension("K and T must be at least 1".into()));
        }
        if self.initial_backlog.len() != n {
            return Err(Error::Dimension("initial backlog length".into()));
        }
        Ok(())
    }

    pub fn ue_count(&self) -> usize {
        self.topology.ue_count()
    }
    pub fn slice_count(&self) -> usize {
        self.topology.slice_count()
    }
    pub fn samples(&self) -> usize {
        self.arrivals.samples()
    }
    pub fn slots(&self) -> usize {
        self.arrivals.slots()
    }

    /// SE of all UEs in slot `(k, t)`.
    pub fn etas_at(&self, k: usize, t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.ue_count()).map(|ue| self.channel.get(ue, k, t)));
    }

    /// Relabelled copy: new UE `j` is old UE `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let arrivals = ArrivalTrace::from_fn(order.len(), self.samples(), self.slots(), |ue, k, t| self.arrivals.get(order[ue], k, t));
        SampleSet {
            topology: self.topology.permuted(order),
            arrivals,
            channel: self.channel.permuted(order),
            initial_backlog: order.iter().map(|&o| self.initial_backlog[o]).collect(),
        }
    }
}
