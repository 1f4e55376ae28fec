//! Experiment configuration (TOML) and sample generation.
//!
//! ```toml
//! slots = 20
//! samples = 20
//! sla_mode = "per_ue"
//! seeds = [1, 2, 3]
//!
//! [search]
//! grid_step = 1.0
//! x_max = 100.0
//!
//! [[slices]]
//! ue_count = 6
//! delay_budget_ms = 3.0
//! channel = "mixed"
//! traffic = { alpha = 1.5, mean_inter_arrival_ms = 1.0, load_bits_per_ms = 500.0 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{load_se_file, synthesize_se, MobilityProfile, ProfileParams, SeTrace, DEFAULT_ETA_MAX};
use crate::error::{Error, Result};
use crate::mip::{BuildOptions, FormulationKind, DEFAULT_EPSILON};
use crate::optimizer::SearchSpec;
use crate::queue::{SlaMode, SlaSpec};
use crate::samples::{SampleSet, Topology};
use crate::traffic::{generate_arrivals_per_ue, ParetoSpec, TrafficSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Tail index of the inter-arrival times.
    pub alpha: f64,
    /// Tail index of the packet sizes; defaults to `alpha`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_alpha: Option<f64>,
    pub mean_inter_arrival_ms: f64,
    pub load_bits_per_ms: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig { alpha: 1.5, packet_alpha: None, mean_inter_arrival_ms: 1.0, load_bits_per_ms: 500.0 }
    }
}

impl TrafficConfig {
    pub fn spec(&self) -> Result<TrafficSpec> {
        let ia = ParetoSpec::with_mean(self.alpha, self.mean_inter_arrival_ms)?;
        let size_alpha = self.packet_alpha.unwrap_or(self.alpha);
        let size = ParetoSpec::with_mean(size_alpha, self.load_bits_per_ms * self.mean_inter_arrival_ms)?;
        TrafficSpec::new(ia, size, Some(self.load_bits_per_ms))
    }

    fn validate(&self, path: &str) -> Result<()> {
        for (name, a) in [("alpha", Some(self.alpha)), ("packet_alpha", self.packet_alpha)] {
            if let Some(a) = a {
                if !(a > 1.0 && a.is_finite()) {
                    return Err(Error::config(format!("{path}.{name}"), format!("tail index must be > 1, got {a}")));
                }
            }
        }
        if !(self.mean_inter_arrival_ms > 0.0 && self.mean_inter_arrival_ms.is_finite()) {
            return Err(Error::config(format!("{path}.mean_inter_arrival_ms"), "must be positive"));
        }
        if !(self.load_bits_per_ms > 0.0 && self.load_bits_per_ms.is_finite()) {
            return Err(Error::config(format!("{path}.load_bits_per_ms"), "must be positive"));
        }
        Ok(())
    }
}

/// Per-UE exceptions, by index within the slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeOverride {
    pub ue: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_budget_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<TrafficConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub ue_count: usize,
    pub delay_budget_ms: f64,
    /// `mixed` (profiles round-robin over the slice's UEs), a profile name, or
    /// the path of an `ue_id,k,t,eta` CSV with one block per slice UE.
    #[serde(default = "default_channel")]
    pub channel: String,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<UeOverride>,
}

fn default_channel() -> String {
    "mixed".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MipConfig {
    /// Explicit Big-M; computed per instance when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    pub epsilon: f64,
}

impl Default for MipConfig {
    fn default() -> Self {
        MipConfig { big_m: None, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_twenty")]
    pub slots: usize,
    #[serde(default = "default_twenty")]
    pub samples: usize,
    #[serde(default = "default_sla_mode")]
    pub sla_mode: SlaMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eta_max")]
    pub eta_max: f64,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub mip: MipConfig,
    /// Overrides of the synthetic channel parameters, keyed by profile name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<MobilityProfile, ProfileParams>,
    pub slices: Vec<SliceConfig>,
    /// Directory that relative trace paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_twenty() -> usize {
    20
}

fn default_sla_mode() -> SlaMode {
    SlaMode::PerUe
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_eta_max() -> f64 {
    DEFAULT_ETA_MAX
}

enum ChannelSource {
    Profile(MobilityProfile),
    Mixed,
    File(PathBuf),
}

impl Scenario {
    /// Two slices with the given UE counts and budgets, all other fields at
    /// their defaults.
    pub fn desk(counts: &[usize], budgets: &[f64]) -> Self {
        Scenario {
            slots: 20,
            samples: 20,
            sla_mode: SlaMode::PerUe,
            seeds: default_seeds(),
            eta_max: DEFAULT_ETA_MAX,
            search: SearchSpec::default(),
            mip: MipConfig::default(),
            profiles: BTreeMap::new(),
            slices: counts
                .iter()
                .zip(budgets)
                .map(|(&ue_count, &d)| SliceConfig { ue_count, delay_budget_ms: d, channel: default_channel(), traffic: TrafficConfig::default(), overrides: Vec::new() })
                .collect(),
            base_dir: None,
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut sc = Self::from_toml_str(&text, &path.display().to_string())?;
        sc.base_dir = path.parent().map(Path::to_path_buf);
        Ok(sc)
    }

    /// The configuration with every default written out.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::config("slots", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::config("samples", "must be at least 1"));
        }
        if self.slices.is_empty() {
            return Err(Error::config("slices", "at least one slice is required"));
        }
        if !(self.eta_max > 0.0 && self.eta_max.is_finite()) {
            return Err(Error::config("eta_max", "must be positive"));
        }
        self.search.validate()?;
        if let Some(m) = self.mip.big_m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config("mip.big_m", "must be positive"));
            }
        }
        if !(self.mip.epsilon > 0.0) {
            return Err(Error::config("mip.epsilon", "must be positive"));
        }
        for (profile, p) in &self.profiles {
            p.validate().map_err(|e| Error::config(format!("profiles.{profile}"), e.to_string()))?;
        }
        for (s, slice) in self.slices.iter().enumerate() {
            let path = format!("slices[{s}]");
            if slice.ue_count == 0 {
                return Err(Error::config(format!("{path}.ue_count"), "must be at least 1"));
            }
            if !(slice.delay_budget_ms > 0.0 && slice.delay_budget_ms.is_finite()) {
                return Err(Error::config(format!("{path}.delay_budget_ms"), "must be positive"));
            }
            parse_channel(&slice.channel).map_err(|e| Error::config(format!("{path}.channel"), e.to_string()))?;
            slice.traffic.validate(&format!("{path}.traffic"))?;
            for (o, ov) in slice.overrides.iter().enumerate() {
                let opath = format!("{path}.overrides[{o}]");
                if ov.ue >= slice.ue_count {
                    return Err(Error::config(format!("{opath}.ue"), format!("index {} outside 0..{}", ov.ue, slice.ue_count)));
                }
                if let Some(d) = ov.delay_budget_ms {
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(Error::config(format!("{opath}.delay_budget_ms"), "must be positive"));
                    }
                }
                if let Some(t) = &ov.traffic {
                    t.validate(&format!("{opath}.traffic"))?;
                }
                if let Some(c) = &ov.channel {
                    match parse_channel(c) {
                        Ok(ChannelSource::File(_)) => return Err(Error::config(format!("{opath}.channel"), "per-UE channels must name a profile")),
                        Ok(_) => {}
                        Err(e) => return Err(Error::config(format!("{opath}.channel"), e.to_string())),
                    }
                }
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::from_counts(&self.slices.iter().map(|s| s.ue_count).collect::<Vec<_>>())
    }

    pub fn ue_count(&self) -> usize {
        self.slices.iter().map(|s| s.ue_count).sum()
    }

    pub fn sla(&self) -> Result<SlaSpec> {
        let topo = self.topology()?;
        let slice_budgets: Vec<f64> = self.slices.iter().map(|s| s.delay_budget_ms).collect();
        let mut sla = SlaSpec::from_slice_budgets(self.sla_mode, &topo, slice_budgets)?;
        let mut first = 0;
        for slice in &self.slices {
            for ov in &slice.overrides {
                if let Some(d) = ov.delay_budget_ms {
                    sla.ue_budgets[first + ov.ue] = d;
                }
            }
            first += slice.ue_count;
        }
        Ok(sla)
    }

    fn traffic_specs(&self) -> Result<Vec<TrafficSpec>> {
        let mut out = Vec::with_capacity(self.ue_count());
        for slice in &self.slices {
            for j in 0..slice.ue_count {
                let cfg = slice.overrides.iter().rev().find(|o| o.ue == j).and_then(|o| o.traffic).unwrap_or(slice.traffic);
                out.push(cfg.spec()?);
            }
        }
        Ok(out)
    }

    fn params(&self, p: MobilityProfile) -> ProfileParams {
        self.profiles.get(&p).copied().unwrap_or_else(|| p.default_params())
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Channel traces for every UE under `seed`.
    pub fn channel(&self, seed: u64) -> Result<SeTrace> {
        let mut parts = Vec::with_capacity(self.ue_count());
        let mut first = 0;
        for slice in &self.slices {
            match parse_channel(&slice.channel)? {
                ChannelSource::File(path) => {
                    let path = self.resolve_path(&path);
                    parts.push(load_se_file(&path, slice.ue_count, self.samples, self.slots, self.eta_max)?);
                }
                source => {
                    for j in 0..slice.ue_count {
                        let over = slice.overrides.iter().rev().find(|o| o.ue == j).and_then(|o| o.channel.as_deref());
                        let profile = match over.map(parse_channel).transpose()? {
                            Some(ChannelSource::Profile(p)) => p,
                            _ => match source {
                                ChannelSource::Profile(p) => p,
                                _ => MobilityProfile::ALL[j % MobilityProfile::ALL.len()],
                            },
                        };
                        parts.push(synthesize_se(profile, &self.params(profile), 1, self.samples, self.slots, seed, first + j, self.eta_max)?);
                    }
                }
            }
            first += slice.ue_count;
        }
        SeTrace::concat(&parts)
    }

    /// Arrivals and channels for one seed.
    pub fn sample_set(&self, seed: u64) -> Result<SampleSet> {
        let arrivals = generate_arrivals_per_ue(&self.traffic_specs()?, self.samples, self.slots, seed)?;
        SampleSet::new(self.topology()?, arrivals, self.channel(seed)?)
    }

    /// Same scenario with every tail index set to `alpha`; mean inter-arrival
    /// time and load are unchanged.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut sc = self.clone();
        let set = |t: &mut TrafficConfig| {
            t.alpha = alpha;
            t.packet_alpha = None;
        };
        for slice in &mut sc.slices {
            set(&mut slice.traffic);
            for ov in &mut slice.overrides {
                if let Some(t) = &mut ov.traffic {
                    set(t);
                }
            }
        }
        sc
    }

    /// MIP constants for `kind` with the configured overrides.
    pub fn build_options(&self, kind: FormulationKind, samples: &SampleSet) -> BuildOptions {
        let mut opts = BuildOptions::for_instance(kind, samples, self.search.x_max);
        opts.epsilon = self.mip.epsilon;
        if let Some(m) = self.mip.big_m {
            opts.big_m = m;
        }
        opts
    }
}

fn parse_channel(s: &str) -> Result<ChannelSource> {
    if s == "mixed" {
        return Ok(ChannelSource::Mixed);
    }
    if let Ok(p) = s.parse::<MobilityProfile>() {
        return Ok(ChannelSource::Profile(p));
    }
    if s.ends_with(".csv") {
        return Ok(ChannelSource::File(PathBuf::from(s)));
    }
    Err(Error::config("channel", format!("`{s}` is neither `mixed`, a profile name nor a .csv path")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[[slices]]\nue_count = 2\ndelay_budget_ms = 3.0\n";

    #[test]
    fn defaults_fill_in() {
        let sc = Scenario::from_toml_str(MINIMAL, "test").unwrap();
        assert_eq!((sc.slots, sc.samples), (20, 20));
        assert_eq!(sc.seeds.len(), 10);
        assert_eq!(sc.search, SearchSpec::default());
        assert_eq!(sc.slices[0].channel, "mixed");
        let echo = sc.resolved_toml();
        assert!(echo.contains("grid_step = 1.0"), "{echo}");
        assert_eq!(Scenario::from_toml_str(&echo, "echo").unwrap(), sc);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = "[[slices]]\nue_count = 0\ndelay_budget_ms = 3.0\n";
        let e = Scenario::from_toml_str(bad, "t").unwrap_err().to_string();
        assert!(e.contains("slices[0].ue_count"), "{e}");
        let bad = "[[slices]]\nue_count = 2\ndelay_budget_ms = 3.0\ntraffic = { alpha = 0.9 }\n";
        let e = Scenario::from_toml_str(bad, "t").unwrap_err().to_string();
        assert!(e.contains("slices[0].traffic.alpha"), "{e}");
        let bad = "slots = 0\n[[slices]]\nue_count = 2\ndelay_budget_ms = 3.0\n";
        assert!(Scenario::from_toml_str(bad, "t").unwrap_err().to_string().contains("`slots`"));
        let bad = "bogus = 1\n[[slices]]\nue_count = 2\ndelay_budget_ms = 3.0\n";
        assert!(Scenario::from_toml_str(bad, "t").is_err());
        let bad = "[[slices]]\nue_count = 2\ndelay_budget_ms = 3.0\nchannel = \"moon\"\n";
        assert!(Scenario::from_toml_str(bad, "t").unwrap_err().to_string().contains("slices[0].channel"));
    }

    #[test]
    fn overrides_apply_to_one_ue() {
        let text = "sla_mode = \"per_ue\"\n[[slices]]\nue_count = 3\ndelay_budget_ms = 3.0\nchannel = \"urban\"\n[[slices.overrides]]\nue = 1\ndelay_budget_ms = 9.0\nchannel = \"pedestrian\"\n";
        let sc = Scenario::from_toml_str(text, "t").unwrap();
        assert_eq!(sc.sla().unwrap().ue_budgets, vec![3.0, 9.0, 3.0]);
        let ch = sc.channel(4).unwrap();
        assert_eq!(ch.profile(0), Some(MobilityProfile::Urban));
        assert_eq!(ch.profile(1), Some(MobilityProfile::Pedestrian));
    }

    #[test]
    fn samples_are_deterministic_per_seed() {
        let mut sc = Scenario::desk(&[2, 3], &[3.0, 8.0]);
        sc.samples = 3;
        sc.slots = 5;
        let a = sc.sample_set(11).unwrap();
        assert_eq!(a, sc.sample_set(11).unwrap());
        assert_ne!(a, sc.sample_set(12).unwrap());
        assert_eq!(a.ue_count(), 5);
        assert_eq!(a.channel.profile(3), Some(MobilityProfile::Vehicular));
    }

    #[test]
    fn with_alpha_keeps_load() {
        let sc = Scenario::desk(&[1], &[3.0]).with_alpha(1.05);
        let spec = sc.slices[0].traffic.spec().unwrap();
        assert_eq!(spec.inter_arrival.alpha, 1.05);
        assert!((spec.mean_load() - 500.0).abs() < 1e-9);
        assert!((spec.inter_arrival.mean() - 1.0).abs() < 1e-12);
    }
}
