//! Spectral-efficiency traces and the bits-per-PRB conversion.
//!
//! A PRB carries `N_SYM = 12 subcarriers x 14 OFDM symbols = 168` modulation
//! symbols per slot, so at spectral efficiency `eta` it carries `168 * eta` bits.
//!
//! Link-level traces can be loaded from CSV. For self-contained runs,
//! [`synthesize_se`] generates a stationary AR(1) process in `ln(eta)` whose
//! parameters depend on the mobility profile.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, DOMAIN_CHANNEL};

/// Modulation symbols per PRB per slot.
pub const N_SYM: f64 = 168.0;

/// Highest spectral efficiency of the standard CQI table.
pub const DEFAULT_ETA_MAX: f64 = 7.4;

/// Information bits carried by one PRB at spectral efficiency `eta`.
pub fn bits_per_prb(eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NonPositiveEta(eta));
    }
    Ok(N_SYM * eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityProfile {
    Pedestrian,
    Vehicular,
    Urban,
}

impl MobilityProfile {
    pub const ALL: [MobilityProfile; 3] = [MobilityProfile::Pedestrian, MobilityProfile::Vehicular, MobilityProfile::Urban];

    pub fn default_params(self) -> ProfileParams {
        match self {
            MobilityProfile::Pedestrian => ProfileParams { eta_median: 3.5, log_std: 0.30, rho: 0.98 },
            MobilityProfile::Vehicular => ProfileParams { eta_median: 2.5, log_std: 0.45, rho: 0.60 },
            MobilityProfile::Urban => ProfileParams { eta_median: 2.0, log_std: 0.50, rho: 0.85 },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MobilityProfile::Pedestrian => "pedestrian",
            MobilityProfile::Vehicular => "vehicular",
            MobilityProfile::Urban => "urban",
        }
    }
}

impl fmt::Display for MobilityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MobilityProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pedestrian" | "epa" => Ok(MobilityProfile::Pedestrian),
            "vehicular" | "eva" => Ok(MobilityProfile::Vehicular),
            "urban" | "etu" => Ok(MobilityProfile::Urban),
            other => Err(Error::config("channel", format!("unknown mobility profile `{other}`"))),
        }
    }
}

/// Parameters of the log-AR(1) process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    /// `exp` of the stationary mean of `ln(eta)`; the trace value when `log_std = 0`.
    pub eta_median: f64,
    /// Stationary standard deviation of `ln(eta)`.
    pub log_std: f64,
    /// Lag-1 autocorrelation of `ln(eta)` per 1 ms slot.
    pub rho: f64,
}

impl ProfileParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_median > 0.0 && self.eta_median.is_finite()) {
            return Err(Error::config("channel.eta_median", "must be positive"));
        }
        if !(self.log_std >= 0.0 && self.log_std.is_finite()) {
            return Err(Error::config("channel.log_std", "must be non-negative"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::config("channel.rho", "must lie in (-1, 1)"));
        }
        Ok(())
    }

    /// Slots for the autocorrelation to decay to one half.
    pub fn half_life(&self) -> f64 {
        (0.5f64).ln() / self.rho.abs().ln()
    }
}

/// `eta_i(k, t)` for every UE, sample and slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    ue_count: usize,
    samples: usize,
    slots: usize,
    eta: Vec<f64>,
    profiles: Vec<Option<MobilityProfile>>,
    eta_max: f64,
}

impl SeTrace {
    pub fn from_fn(ue_count: usize, samples: usize, slots: usize, eta_max: f64, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut eta = Vec::with_capacity(ue_count * samples * slots);
        for ue in 0..ue_count {
            for k in 0..samples {
                for t in 0..slots {
                    eta.push(f(ue, k, t));
                }
            }
        }
        let trace = SeTrace { ue_count, samples, slots, eta, profiles: vec![None; ue_count], eta_max };
        trace.validate()?;
        Ok(trace)
    }

    pub fn constant(ue_count: usize, samples: usize, slots: usize, eta: f64) -> Result<Self> {
        Self::from_fn(ue_count, samples, slots, DEFAULT_ETA_MAX.max(eta), |_, _, _| eta)
    }

    pub fn validate(&self) -> Result<()> {
        for ue in 0..self.ue_count {
            for k in 0..self.samples {
                for t in 0..self.slots {
                    let eta = self.get(ue, k, t);
                    if !(eta > 0.0 && eta <= self.eta_max) {
                        return Err(Error::InvalidEta { ue, k, t, eta, eta_max: self.eta_max });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }
    pub fn samples(&self) -> usize {
        self.samples
    }
    pub fn slots(&self) -> usize {
        self.slots
    }
    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }
    pub fn profile(&self, ue: usize) -> Option<MobilityProfile> {
        self.profiles[ue]
    }

    #[inline]
    pub fn get(&self, ue: usize, k: usize, t: usize) -> f64 {
        self.eta[(ue * self.samples + k) * self.slots + t]
    }

    pub fn series(&self, ue: usize, k: usize) -> &[f64] {
        let start = (ue * self.samples + k) * self.slots;
        &self.eta[start..start + self.slots]
    }

    /// Largest value present in the trace.
    pub fn observed_max(&self) -> f64 {
        self.eta.iter().copied().fold(0.0, f64::max)
    }

    /// Concatenates UE blocks of equal dimensions.
    pub fn concat(parts: &[SeTrace]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Dimension("no channel traces".into()))?;
        let (samples, slots) = (first.samples, first.slots);
        let mut out = SeTrace { ue_count: 0, samples, slots, eta: Vec::new(), profiles: Vec::new(), eta_max: 0.0 };
        for p in parts {
            if p.samples != samples || p.slots != slots {
                return Err(Error::Dimension(format!(
                    "channel block is {}x{}, expected {}x{}",
                    p.samples, p.slots, samples, slots
                )));
            }
            out.ue_count += p.ue_count;
            out.eta.extend_from_slice(&p.eta);
            out.profiles.extend_from_slice(&p.profiles);
            out.eta_max = out.eta_max.max(p.eta_max);
        }
        Ok(out)
    }

    /// Copy with UE rows reordered so that new UE `j` is old UE `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut eta = Vec::with_capacity(self.eta.len());
        for &old in order {
            for k in 0..self.samples {
                eta.extend_from_slice(self.series(old, k));
            }
        }
        SeTrace {
            ue_count: order.len(),
            samples: self.samples,
            slots: self.slots,
            eta,
            profiles: order.iter().map(|&o| self.profiles[o]).collect(),
            eta_max: self.eta_max,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ue_id", "k", "t", "eta"])?;
        for ue in 0..self.ue_count {
            for k in 0..self.samples {
                for t in 0..self.slots {
                    w.serialize((ue, k, t, self.get(ue, k, t)))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct SeRow {
    ue_id: usize,
    k: usize,
    t: usize,
    eta: f64,
}

/// Loads an `ue_id,k,t,eta` CSV into a complete `ue_count x samples x slots` grid.
pub fn load_se_traces<R: Read>(reader: R, ue_count: usize, samples: usize, slots: usize, eta_max: f64) -> Result<SeTrace> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut cells: Vec<Option<f64>> = vec![None; ue_count * samples * slots];
    for row in rdr.deserialize() {
        let row: SeRow = row?;
        if row.ue_id >= ue_count || row.k >= samples || row.t >= slots {
            return Err(Error::Dimension(format!(
                "SE row (ue {}, k {}, t {}) outside {}x{}x{}",
                row.ue_id, row.k, row.t, ue_count, samples, slots
            )));
        }
        if !(row.eta > 0.0 && row.eta <= eta_max) {
            return Err(Error::InvalidEta { ue: row.ue_id, k: row.k, t: row.t, eta: row.eta, eta_max });
        }
        cells[(row.ue_id * samples + row.k) * slots + row.t] = Some(row.eta);
    }
    let mut eta = Vec::with_capacity(cells.len());
    for (i, c) in cells.into_iter().enumerate() {
        match c {
            Some(v) => eta.push(v),
            None => {
                let (ue, rest) = (i / (samples * slots), i % (samples * slots));
                return Err(Error::MissingCell { ue, k: rest / slots, t: rest % slots });
            }
        }
    }
    Ok(SeTrace { ue_count, samples, slots, eta, profiles: vec![None; ue_count], eta_max })
}

pub fn load_se_file(path: &std::path::Path, ue_count: usize, samples: usize, slots: usize, eta_max: f64) -> Result<SeTrace> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_se_traces(f, ue_count, samples, slots, eta_max)
}

/// Synthetic log-AR(1) traces. `ue_offset` keys the random streams so that
/// UE blocks generated separately stay independent.
///
/// `ln(eta_t) = m + rho (ln(eta_{t-1}) - m) + log_std sqrt(1 - rho^2) e_t`,
/// started from the stationary law and capped at `eta_max`.
pub fn synthesize_se(
    profile: MobilityProfile,
    params: &ProfileParams,
    ue_count: usize,
    samples: usize,
    slots: usize,
    seed: u64,
    ue_offset: usize,
    eta_max: f64,
) -> Result<SeTrace> {
    params.validate()?;
    let m = params.eta_median.ln();
    let innov = params.log_std * (1.0 - params.rho * params.rho).sqrt();
    let mut eta = Vec::with_capacity(ue_count * samples * slots);
    for ue in 0..ue_count {
        for k in 0..samples {
            let mut rng = rng::stream(seed, DOMAIN_CHANNEL, (ue + ue_offset) as u64, k as u64);
            let mut x = m + params.log_std * rng::standard_normal(&mut rng);
            for t in 0..slots {
                if t > 0 {
                    x = m + params.rho * (x - m) + innov * rng::standard_normal(&mut rng);
                }
                eta.push(x.exp().min(eta_max));
            }
        }
    }
    Ok(SeTrace { ue_count, samples, slots, eta, profiles: vec![Some(profile); ue_count], eta_max })
}
