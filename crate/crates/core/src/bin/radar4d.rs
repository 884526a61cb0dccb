use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use subnyquist_radar::harness::{emit_plot_data, run_sweep, write_results_csv, Algorithm, ExperimentSpec};
use subnyquist_radar::metrics::feasibility_check;
use subnyquist_radar::omp::{omp_recover, support_to_scene};
use subnyquist_radar::tc::{tc_estimate, TcInit, TcSolverConfig};
use subnyquist_radar::{add_noise, build_index_sets, synthesize, PartialMeasurementTensor, RadarConfig, TargetScene};

#[derive(Parser)]
#[command(name = "radar4d", version, about = "Sub-Nyquist MIMO radar simulation and recovery")]
struct Cli {
    /// Report wall-clock time on stderr.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Omp,
    Tc,
}

#[derive(Subcommand)]
enum Command {
    /// Write a radar configuration to start from.
    Config {
        /// Nothing thinned instead of the reference thinning.
        #[arg(long)]
        fully_sampled: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize the observed Fourier coefficients of a scene.
    Synth {
        /// Radar configuration JSON; the reference geometry if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scene: PathBuf,
        /// Noiseless if omitted.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `.csv` for a table, JSON otherwise.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate targets from a measurement file.
    Recover {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "omp")]
        algorithm: AlgorithmArg,
        #[arg(long)]
        targets: usize,
        /// Completion solver settings (JSON); defaults otherwise.
        #[arg(long)]
        solver: Option<PathBuf>,
        /// Random initialization with this seed instead of the pursuit warm start.
        #[arg(long)]
        seed: Option<u64>,
        /// Objective trace CSV of the completion solver.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment spec, or an array of them, and write hit-rate curves.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the master seed of every spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the trial count of every spec.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides the SNR grid of every spec (comma separated, dB).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr_db: Option<Vec<f64>>,
        /// Results CSV.
        #[arg(long)]
        out: PathBuf,
        /// Scatter JSON of true and estimated parameters.
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Check observation counts (and small-instance sparks) against 2L.
    Feasibility {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        targets: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RadarConfig> {
    match path {
        Some(p) => RadarConfig::from_json_file(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RadarConfig::reference()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Config { fully_sampled, out } => {
            let cfg = if fully_sampled {
                RadarConfig::fully_sampled()
            } else {
                RadarConfig::reference()
            };
            write_json(&out, &cfg)?;
        }
        Command::Synth {
            config,
            scene,
            snr_db,
            seed,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let scene = TargetScene::from_json_file(&scene).with_context(|| format!("reading scene {}", scene.display()))?;
            let sets = build_index_sets(&cfg)?;
            let mut z = synthesize(&scene, &cfg, &sets)?;
            if let Some(snr) = snr_db {
                z = add_noise(&z, snr, &cfg, seed)?;
            }
            z.save(&out)?;
        }
        Command::Recover {
            config,
            input,
            algorithm,
            targets,
            solver,
            seed,
            trace,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let sets = build_index_sets(&cfg)?;
            let z = if input.extension().is_some_and(|e| e == "csv") {
                let f = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
                PartialMeasurementTensor::read_csv(f, cfg.grid_shape(), 0.0)?
            } else {
                PartialMeasurementTensor::load(&input).with_context(|| format!("reading measurements {}", input.display()))?
            };
            let report = match algorithm {
                AlgorithmArg::Omp => {
                    if trace.is_some() {
                        bail!("--trace applies to the tc algorithm only");
                    }
                    let res = omp_recover(&z, &sets, &cfg, targets)?;
                    json!({
                        "algorithm": Algorithm::Omp,
                        "targets": support_to_scene(&res, &cfg),
                        "support": res.support,
                        "residual_norm_history": res.residual_norm_history,
                    })
                }
                AlgorithmArg::Tc => {
                    let mut settings: TcSolverConfig = match &solver {
                        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                            .with_context(|| format!("parsing solver settings {}", p.display()))?,
                        None => TcSolverConfig::default(),
                    };
                    if let Some(s) = seed {
                        settings.init = TcInit::Random;
                        settings.seed = s;
                    }
                    let (res, scene) = tc_estimate(&z, &sets, &cfg, targets, &settings)?;
                    if let Some(path) = &trace {
                        res.write_trace(BufWriter::new(File::create(path)?))?;
                    }
                    json!({
                        "algorithm": Algorithm::Tc,
                        "targets": scene,
                        "objective_history": res.objective_history,
                        "converged": res.converged,
                        "iterations": res.iterations,
                        "mu": res.mu,
                    })
                }
            };
            write_json(&out, &report)?;
        }
        Command::Sweep {
            spec,
            seed,
            trials,
            snr_db,
            out,
            scatter,
        } => {
            let mut specs = ExperimentSpec::load_all(&spec).with_context(|| format!("reading spec {}", spec.display()))?;
            for s in specs.iter_mut() {
                if let Some(seed) = seed {
                    s.master_seed = seed;
                }
                if let Some(t) = trials {
                    s.trials = t;
                }
                if let Some(grid) = &snr_db {
                    s.snr_grid_db = grid.clone();
                }
            }
            let results = run_sweep(&specs)?;
            match &scatter {
                Some(path) => emit_plot_data(&results, &out, path)?,
                None => write_results_csv(&results, BufWriter::new(File::create(&out)?))?,
            }
            let failed: usize = results.rows.iter().map(|r| r.failed).sum();
            if failed > 0 {
                eprintln!("{failed} trial recoveries failed and were excluded");
            }
        }
        Command::Feasibility { config, targets, out } => {
            let cfg = load_config(config.as_deref())?;
            let sets = build_index_sets(&cfg)?;
            write_json(&out, &feasibility_check(&sets, targets))?;
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let timing = cli.timing;
    let start = Instant::now();
    let result = run(cli);
    if timing {
        eprintln!("elapsed: {:.3} s", start.elapsed().as_secs_f64());
    }
    result
}
