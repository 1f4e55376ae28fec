use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use hyra::experiment::run_experiment;
use hyra::mip::{self, FormulationKind};
use hyra::optimizer::{compare_strategies, minimize_allocation, write_comparison_csv};
use hyra::queue::{sla_satisfied, simulate};
use hyra::scenario::Scenario;
use hyra::scheduler::schedule_slot;
use hyra::verify::run_verify;
use hyra::{Allocation, Error, Result, Topology};

#[derive(Parser)]
#[command(name = "hyra", version, about = "Hybrid dedicated/shared PRB allocation for RAN slices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct ConfigArgs {
    /// Scenario TOML; the built-in 6+6 UE desk scenario when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the search grid step
    #[arg(long)]
    grid_step: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Scenario> {
        let mut sc = match &self.config {
            Some(p) => Scenario::load(p)?,
            None => Scenario::desk(&[6, 6], &[3.0, 8.0]),
        };
        if let Some(step) = self.grid_step {
            sc.search.grid_step = step;
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write arrival and spectral-efficiency traces as CSV
    GenTraces {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "traces")]
        out: PathBuf,
    },
    /// Schedule one slot and print the per-UE split and water levels
    Schedule {
        /// Comma-separated spectral efficiencies, one per UE
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
        /// Comma-separated slice index per UE
        #[arg(long, value_delimiter = ',', required = true)]
        slices: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        dedicated: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        shared: f64,
    },
    /// Simulate queues under a fixed allocation and print the delay report
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        dedicated: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        shared: f64,
        /// CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find the minimal feasible allocation for one mode or all three
    Optimize {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// hyra, dedicated_only, shared_only or all
        #[arg(long, default_value = "all")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the mixed-integer model as an LP file
    ExportMip {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "hyra")]
        kind: FormulationKind,
        #[arg(long)]
        big_m: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value = "model.lp")]
        out: PathBuf,
    },
    /// Run the self-check suites
    Verify {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run the multi-seed experiment and write summary tables
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated seeds overriding the config
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    f(BufWriter::new(file))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenTraces { cfg, seed, out } => {
            let samples = cfg.load()?.sample_set(seed)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write_file(&out.join("arrivals.csv"), |w| samples.arrivals.write_csv(w))?;
            write_file(&out.join("se.csv"), |w| samples.channel.write_csv(w))?;
            println!("wrote {} UEs x {} samples x {} slots to {}", samples.ue_count(), samples.samples(), samples.slots(), out.display());
        }
        Command::Schedule { etas, slices, dedicated, shared } => {
            if etas.len() != slices.len() {
                return Err(Error::Dimension(format!("{} etas but {} slice indices", etas.len(), slices.len())));
            }
            let topo = Topology::new(slices, dedicated.len())?;
            let alloc = Allocation::new(dedicated, shared)?;
            let s = schedule_slot(&alloc, &etas, &topo)?;
            println!("ue slice eta y_ded y_sh total");
            for i in 0..topo.ue_count() {
                println!("{i} {} {} {:.6} {:.6} {:.6}", topo.slice_of(i), etas[i], s.y_ded[i], s.y_sh[i], s.total(i));
            }
            for (sl, b) in s.beta.iter().enumerate() {
                println!("slice {sl}: dedicated level {:.6}", 1.0 / b);
            }
            println!("shared level {:.6}", 1.0 / s.nu);
        }
        Command::Simulate { cfg, seed, dedicated, shared, out } => {
            let sc = cfg.load()?;
            let samples = sc.sample_set(seed)?;
            let alloc = Allocation::new(dedicated, shared)?;
            alloc.check_slices(samples.slice_count())?;
            let (_, report) = simulate(&alloc, &samples)?;
            report.write_csv(output(out.as_deref())?)?;
            let sla = sla_satisfied(&report, &sc.sla()?);
            eprintln!("sla {} (worst margin {:.4} ms)", if sla.satisfied { "met" } else { "violated" }, sla.worst_margin);
        }
        Command::Optimize { cfg, seed, mode, out } => {
            let sc = cfg.load()?;
            let samples = sc.sample_set(seed)?;
            let sla = sc.sla()?;
            let w = output(out.as_deref())?;
            if mode == "all" {
                let c = compare_strategies(&samples, &sla, &sc.search)?;
                write_comparison_csv(w, &c.results())?;
                eprintln!("savings {:.4}", c.savings());
            } else {
                let kind: FormulationKind = mode.parse()?;
                let r = minimize_allocation(&sc.search.with_mode(kind), &samples, &sla)?;
                write_comparison_csv(w, &[&r])?;
            }
        }
        Command::ExportMip { cfg, seed, kind, big_m, epsilon, out } => {
            let mut sc = cfg.load()?;
            if big_m.is_some() {
                sc.mip.big_m = big_m;
            }
            if let Some(eps) = epsilon {
                sc.mip.epsilon = eps;
            }
            let samples = sc.sample_set(seed)?;
            let model = mip::build(kind, &samples, &sc.sla()?, &sc.build_options(kind, &samples))?;
            mip::export_lp(&model, &out)?;
            let text = fs::read_to_string(&out).map_err(|e| Error::io(&out, e))?;
            let lp = mip::parse_lp(&text)?;
            let ok = lp.var_count() == model.var_count() && lp.constraints.len() == model.constraint_count() && lp.binaries.len() == model.binary_count();
            println!(
                "{}: {} variables ({} binary), {} constraints; re-parse {}",
                out.display(),
                model.var_count(),
                model.binary_count(),
                model.constraint_count(),
                if ok { "ok" } else { "MISMATCH" }
            );
            return Ok(ok);
        }
        Command::Verify { trials, seed } => {
            let report = run_verify(trials, seed)?;
            print!("{report}");
            return Ok(report.passed());
        }
        Command::Run { cfg, seeds, out } => {
            let mut sc = cfg.load()?;
            if !seeds.is_empty() {
                sc.seeds = seeds;
            }
            let report = run_experiment(&sc, &out)?;
            info!("{} seeds written to {}", report.runs.len(), out.display());
            print!("{}", report.summary_csv()?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
