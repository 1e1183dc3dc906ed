use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use csk_core::cascade::{self, KernelStore, NoStore, TraceRetention};
use csk_core::scenario::Scenario;
use csk_core::synthesis::synthesize;

use csk_cli::config::load_scenario;
use csk_cli::kcache::FileKernelStore;
use csk_cli::output;
use csk_cli::presets;
use csk_cli::runners;
use csk_cli::units::{quantity, Dimension};

/// Simulator and analysis toolkit for concentration-shift-keying links built
/// from engineered-cell consortia in a microfluidic channel.
#[derive(Parser)]
#[command(name = "csksim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Built-in experiment preset.
    #[arg(long, value_parser = presets::PRESET_NAMES)]
    preset: Option<String>,
    /// Scenario TOML or a manifest.json from a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the sampling step, e.g. "0.1 s".
    #[arg(long)]
    ts: Option<String>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of stochastic realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Directory for cached propagation kernels.
    #[arg(long)]
    kernel_cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the consortium layout for a CSK order and export it.
    Synth {
        /// CSK order m (2^m concentration levels).
        #[arg(long)]
        m: usize,
        /// Comma-separated threshold levels for B_0..B_{2^m-2},
        /// e.g. "0.1 nM,0.45 nM,0.7 nM". Defaults spread 0.1..0.7 nM.
        #[arg(long)]
        thresholds: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write a DOT graph description.
        #[arg(long)]
        dot: bool,
    },
    /// Evaluate the cascade analytically and export every trace.
    Analytic {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run the particle/agent engine and export ensemble statistics.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run both engines and check the analytic traces against the ensemble
    /// (3 standard errors at 95% of decimated samples). Exits 3 on failure.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        threads: Option<usize>,
        /// Compare every n-th sample.
        #[arg(long, default_value_t = 10)]
        decimate: usize,
    },
    /// Random-sequence bit-error-rate sweep over the detection threshold.
    Ber {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Symbol interval(s), e.g. "10 h" (repeatable).
        #[arg(long = "tb")]
        t_b: Vec<String>,
        /// Number of transmitted bits.
        #[arg(long, default_value_t = 100)]
        bits: usize,
        /// Comma-separated detection thresholds in molecules.
        #[arg(long, default_value = "0,1,2,3,4,5,6,8,10,15,1000000")]
        nd: String,
        /// Decision integration window, e.g. "30 min".
        #[arg(long)]
        window: Option<String>,
        /// Sampling delay after each transmission, e.g. "5 h".
        #[arg(long)]
        sample_offset: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Configuration problems exit 2 per the interface contract.
            let msg = format!("{e:#}");
            if msg.contains("config") || msg.contains("invalid scenario") || msg.contains("field") {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

struct LoadedScenario {
    scenario: Scenario,
    preset_name: Option<String>,
    sample_offset: f64,
    decision_window: f64,
    out: PathBuf,
    kernel_cache: Option<PathBuf>,
}

fn load(args: &ScenarioArgs) -> Result<LoadedScenario> {
    let (mut scenario, preset_name, sample_offset, decision_window) =
        match (&args.preset, &args.config) {
            (Some(name), None) => {
                let p = presets::by_name(name)?;
                (p.scenario, Some(p.name.to_string()), p.sample_offset, p.decision_window)
            }
            (None, Some(path)) => (load_scenario(path)?, None, 18_000.0, 1_800.0),
            (Some(_), Some(_)) => bail!("config error: give either --preset or --config"),
            (None, None) => bail!("config error: one of --preset or --config is required"),
        };
    if let Some(ts) = &args.ts {
        let new_ts = quantity(ts, Dimension::Time, "--ts")?;
        // Keep the particle sub-step near its configured length.
        let dt = scenario.ts / scenario.particle_substeps as f64;
        scenario.particle_substeps = (new_ts / dt).ceil().max(1.0) as u32;
        scenario.ts = new_ts;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(n) = args.realizations {
        scenario.realizations = n;
    }
    scenario.validate().map_err(|e| anyhow!("invalid scenario: {e}"))?;
    output::ensure_dir(&args.out)?;
    Ok(LoadedScenario {
        scenario,
        preset_name,
        sample_offset,
        decision_window,
        out: args.out.clone(),
        kernel_cache: args.kernel_cache.clone(),
    })
}

fn kernel_store(dir: &Option<PathBuf>) -> Result<Box<dyn KernelStore>> {
    Ok(match dir {
        Some(d) => Box::new(FileKernelStore::new(d.clone()).context("opening kernel cache")?),
        None => Box::new(NoStore),
    })
}

fn thread_pool(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the worker pool")?;
    }
    Ok(())
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { m, thresholds, out, dot } => {
            let thresholds = match thresholds {
                Some(list) => list
                    .split(',')
                    .map(|s| quantity(s, Dimension::Concentration, "--thresholds"))
                    .collect::<Result<Vec<f64>>>()?,
                None => {
                    let n = (1usize << m) - 1;
                    (0..n).map(|j| 0.1 + 0.6 * j as f64 / (n.max(2) - 1) as f64).collect()
                }
            };
            // The reference channel dimensions host any order; higher orders
            // retile the lanes themselves.
            let geometry = csk_core::geometry::ChannelGeometry {
                stations: vec![0.0, 1.0, 4.0, 39.0, 42.0, 43.0, 46.0, 47.0, 50.0, 55.0],
                lanes: vec![0.0, 2.5, 5.0, 10.0, 15.0],
                height: 3.0,
                cell_radius: 0.5,
                flow: 0.1,
            };
            let layout = synthesize(m, &geometry, &thresholds)
                .map_err(|e| anyhow!("config error: {e}"))?;
            output::ensure_dir(&out)?;
            let json = serde_json::to_string_pretty(&layout)?;
            std::fs::write(out.join("layout.json"), &json)?;
            if dot {
                std::fs::write(out.join("layout.dot"), layout.to_dot())?;
            }
            println!(
                "order {m}: {} populations, {} sinks -> {}",
                layout.populations.len(),
                layout.sinks.len(),
                out.join("layout.json").display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Analytic { scenario: args } => {
            let loaded = load(&args)?;
            let sc = &loaded.scenario;
            let mut store = kernel_store(&loaded.kernel_cache)?;
            let result = cascade::evaluate_with_store(sc, TraceRetention::All, store.as_mut())
                .map_err(|e| anyhow!("evaluation failed: {e}"))?;
            for pop in &sc.layout.populations {
                let volume = sc.lane_volume(&pop.lane);
                output::write_trace_csv(&loaded.out, &pop.name, &result.outputs[&pop.name], volume)?;
            }
            for sink in &sc.layout.sinks {
                let volume = sc.lane_volume(&sink.lane);
                output::write_trace_csv(&loaded.out, &sink.name, &result.sinks[&sink.name], volume)?;
            }
            output::write_manifest(
                &loaded.out,
                "analytic",
                loaded.preset_name.as_deref(),
                sc,
                Some(loaded.sample_offset),
                Some(loaded.decision_window),
            )?;
            println!(
                "analytic: {} traces -> {}",
                sc.layout.populations.len() + sc.layout.sinks.len(),
                loaded.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Simulate { scenario: args, threads } => {
            thread_pool(threads)?;
            let loaded = load(&args)?;
            let sc = &loaded.scenario;
            let stats = runners::run_ensemble(sc, sc.realizations, sc.seed)?;
            for pop in &sc.layout.populations {
                let volume = sc.lane_volume(&pop.lane);
                let (mean, se) = &stats.released[&pop.name];
                output::write_ensemble_csv(&loaded.out, &pop.name, sc.ts, mean, se, volume)?;
            }
            for sink in &sc.layout.sinks {
                let volume = sc.lane_volume(&sink.lane);
                let (mean, se) = &stats.sinks[&sink.name];
                output::write_ensemble_csv(&loaded.out, &sink.name, sc.ts, mean, se, volume)?;
            }
            output::write_manifest(
                &loaded.out,
                "simulate",
                loaded.preset_name.as_deref(),
                sc,
                Some(loaded.sample_offset),
                Some(loaded.decision_window),
            )?;
            println!(
                "simulate: {} realizations, census violations {} -> {}",
                stats.n,
                stats.census.violations,
                loaded.out.display()
            );
            if stats.census.violations > 0 {
                bail!("particle census violated");
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Validate { scenario: args, threads, decimate } => {
            thread_pool(threads)?;
            let loaded = load(&args)?;
            let sc = &loaded.scenario;
            let report =
                runners::validate_against_stochastic(sc, sc.realizations, sc.seed, decimate)?;
            let text = report.render();
            print!("{text}");
            output::write_report(&loaded.out, "validation.txt", &text)?;
            output::write_manifest(
                &loaded.out,
                "validate",
                loaded.preset_name.as_deref(),
                sc,
                Some(loaded.sample_offset),
                Some(loaded.decision_window),
            )?;
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }

        Command::Ber { scenario: args, t_b, bits, nd, window, sample_offset } => {
            let loaded = load(&args)?;
            let sc = &loaded.scenario;
            let n_d_grid = nd
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow!("config error: bad --nd value '{s}'")))
                .collect::<Result<Vec<f64>>>()?;
            let window = match window {
                Some(w) => quantity(&w, Dimension::Time, "--window")?,
                None => loaded.decision_window,
            };
            let offset = match sample_offset {
                Some(o) => quantity(&o, Dimension::Time, "--sample-offset")?,
                None => loaded.sample_offset,
            };
            let t_bs: Vec<f64> = if t_b.is_empty() {
                vec![sc.schedule.period]
            } else {
                t_b.iter()
                    .map(|s| quantity(s, Dimension::Time, "--tb"))
                    .collect::<Result<Vec<f64>>>()?
            };
            let mut all_rows = Vec::new();
            for &tb in &t_bs {
                let exp = runners::ber_experiment(sc, tb, bits, &n_d_grid, sc.seed, offset, window)?;
                println!(
                    "T_b = {tb} s: {} symbols, zero/one fractions {:.3}/{:.3}",
                    exp.symbols.len(),
                    exp.zero_fraction,
                    exp.one_fraction
                );
                for r in &exp.rows {
                    println!("  N_d {:>9}: {} errors / {} bits", r.n_d, r.errors, r.bits);
                }
                all_rows.extend(exp.rows);
            }
            output::write_ber_csv(&loaded.out, &all_rows)?;
            output::write_manifest(
                &loaded.out,
                "ber",
                loaded.preset_name.as_deref(),
                sc,
                Some(offset),
                Some(window),
            )?;
            println!("ber -> {}", loaded.out.join("ber.csv").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
