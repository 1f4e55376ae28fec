//! Multi-seed experiment: one three-way comparison per seed, aggregated.

use std::fs;
use std::path::Path;

use log::info;

use crate::error::{Error, Result};
use crate::mip::FormulationKind;
use crate::optimizer::{compare_strategies, Comparison, OptResult};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub comparison: Comparison,
}

/// Mean and quartiles of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats { mean: f64::NAN, q25: f64::NAN, median: f64::NAN, q75: f64::NAN };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Stats { mean: v.iter().sum::<f64>() / v.len() as f64, q25: quantile(&v, 0.25), median: quantile(&v, 0.5), q75: quantile(&v, 0.75) }
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Linear interpolation between order statistics of sorted `v`.
fn quantile(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub runs: Vec<SeedRun>,
}

impl ExperimentReport {
    fn series(&self, f: impl Fn(&Comparison) -> f64) -> Vec<f64> {
        self.runs.iter().map(|r| f(&r.comparison)).collect()
    }

    pub fn totals(&self, mode: FormulationKind) -> Vec<f64> {
        self.series(|c| pick(c, mode).total_prbs)
    }

    pub fn relaxed_totals(&self, mode: FormulationKind) -> Vec<f64> {
        self.series(|c| pick(c, mode).total_relaxed)
    }

    pub fn savings(&self) -> Vec<f64> {
        self.series(Comparison::savings)
    }

    /// `mode,runs,feasible_runs,mean,q25,median,q75,iqr,mean_relaxed`, plus a
    /// `savings` row over the per-seed savings.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mode", "runs", "feasible_runs", "mean", "q25", "median", "q75", "iqr", "mean_relaxed"])?;
        let n = self.runs.len();
        for mode in FormulationKind::ALL {
            let s = Stats::of(&self.totals(mode));
            let feasible = self.runs.iter().filter(|r| pick(&r.comparison, mode).feasible).count();
            let relaxed = Stats::of(&self.relaxed_totals(mode)).mean;
            w.write_record(row(mode.as_str(), n, feasible, &s, relaxed))?;
        }
        let s = Stats::of(&self.savings());
        w.write_record(row("savings", n, n, &s, s.mean))?;
        finish(w)
    }

    /// One row per seed and mode.
    pub fn per_seed_csv(&self) -> Result<String> {
        let slices = self.runs.first().map_or(0, |r| r.comparison.hyra.best.dedicated.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["seed".to_string(), "mode".into()];
        header.extend((1..=slices).map(|s| format!("x_ded_{s}")));
        header.extend(["x_sh", "total", "total_relaxed", "feasible", "evals", "savings"].map(String::from));
        w.write_record(&header)?;
        for run in &self.runs {
            let savings = run.comparison.savings();
            for r in run.comparison.results() {
                let mut rec = vec![run.seed.to_string(), r.mode.to_string()];
                rec.extend(r.best.dedicated.iter().map(|x| x.to_string()));
                rec.extend([r.best.shared.to_string(), r.total_prbs.to_string(), r.total_relaxed.to_string(), r.feasible.to_string(), r.evaluations.to_string(), savings.to_string()]);
                w.write_record(&rec)?;
            }
        }
        finish(w)
    }
}

fn row(label: &str, runs: usize, feasible: usize, s: &Stats, relaxed: f64) -> Vec<String> {
    vec![
        label.to_string(),
        runs.to_string(),
        feasible.to_string(),
        s.mean.to_string(),
        s.q25.to_string(),
        s.median.to_string(),
        s.q75.to_string(),
        s.iqr().to_string(),
        relaxed.to_string(),
    ]
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn pick(c: &Comparison, mode: FormulationKind) -> &OptResult {
    match mode {
        FormulationKind::Hyra => &c.hyra,
        FormulationKind::DedicatedOnly => &c.dedicated_only,
        FormulationKind::SharedOnly => &c.shared_only,
    }
}

/// Runs every configured seed.
pub fn run_scenario(scenario: &Scenario) -> Result<ExperimentReport> {
    scenario.validate()?;
    let sla = scenario.sla()?;
    let mut runs = Vec::with_capacity(scenario.seeds.len());
    for &seed in &scenario.seeds {
        let samples = scenario.sample_set(seed)?;
        let comparison = compare_strategies(&samples, &sla, &scenario.search)?;
        info!("seed {seed}: hyra {} dedicated {} shared {}", comparison.hyra.total_relaxed, comparison.dedicated_only.total_relaxed, comparison.shared_only.total_relaxed);
        runs.push(SeedRun { seed, comparison });
    }
    Ok(ExperimentReport { runs })
}

/// Runs `scenario` and writes `summary.csv`, `per_seed.csv` and
/// `resolved_config.toml` into `out_dir`.
pub fn run_experiment(scenario: &Scenario, out_dir: &Path) -> Result<ExperimentReport> {
    let report = run_scenario(scenario)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("summary.csv", &report.summary_csv()?)?;
    write("per_seed.csv", &report.per_seed_csv()?)?;
    write("resolved_config.toml", &scenario.resolved_toml())?;
    Ok(report)
}
