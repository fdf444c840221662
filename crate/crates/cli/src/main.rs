use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use schedbench::embedding::find_embedding;
use schedbench::harness::{
    analyze, emit_report, run_experiment_with, ExperimentPlan, LabeledFit, RunOptions, SweepResult,
};
use schedbench::instances::{generate_ensemble, SchedulingGraph, DEFAULT_DENSITY};
use schedbench::qubo::{build_coloring_qubo, decode_coloring, spins_to_bits};
use schedbench::samplers::{sample_exact, sample_replay, sample_sa, SamplerConfig, DEFAULT_SWEEPS_PER_US};
use schedbench::seed::{derive_seed, stream};
use schedbench::topology::{HardwareProfile, Machine};
use schedbench::Error;

/// Relative output paths are resolved against this directory when set.
const OUTPUT_ROOT_ENV: &str = "SCHEDBENCH_OUTPUT_ROOT";

const EXIT_ERROR: u8 = 1;
const EXIT_INVALID_PLAN: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "schedbench", version, about = "Annealer benchmark on hard 3-coloring scheduling instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance ensemble.
    Generate {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Edges per vertex.
        #[arg(long, default_value_t = DEFAULT_DENSITY)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed one instance's coloring problem into a machine's hardware graph.
    Embed {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_parser = parse_machine)]
        machine: Machine,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        tries: usize,
        /// Use the defect-free graph.
        #[arg(long)]
        ideal: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the coloring problem of one instance.
    Sample {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = SamplerArg::Sa)]
        sampler: SamplerArg,
        #[arg(long, default_value_t = 1.0)]
        anneal_time: f64,
        #[arg(long, default_value_t = 100)]
        reads: usize,
        #[arg(long, default_value_t = 1)]
        gauges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SWEEPS_PER_US)]
        sweeps_per_us: f64,
        /// Sample file to read with `--sampler replay`.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a plan file with a machine's default settings.
    Plan {
        #[arg(long, value_parser = parse_machine)]
        machine: Machine,
        /// Directory the plan writes results to.
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a plan at a single anneal time and J_F.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        anneal_time: f64,
        #[arg(long, allow_hyphen_values = true)]
        j_f: f64,
        #[arg(long)]
        max_cells: Option<usize>,
    },
    /// Run every cell of a plan's grid.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        max_cells: Option<usize>,
    },
    /// Fit scaling exponents to a sweep result.
    Analyze {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write report tables for one or more sweep results.
    Report {
        #[arg(long, required = true)]
        result: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Leave α labels out of the series.
        #[arg(long)]
        no_fits: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Exact,
    Sa,
    Replay,
}

fn parse_machine(s: &str) -> Result<Machine, String> {
    Machine::parse(s).ok_or_else(|| {
        let names: Vec<_> = Machine::ALL.iter().map(|m| m.name()).collect();
        format!("unknown machine {s:?}; expected one of {}", names.join(", "))
    })
}

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> schedbench::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Format(format!("{}: {e}", parent.display())))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path) -> schedbench::Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::load(path)?;
    plan.output_dir = resolve(&plan.output_dir);
    Ok(plan)
}

fn execute(plan: &ExperimentPlan, max_cells: Option<usize>) -> schedbench::Result<u8> {
    let outcome = run_experiment_with(
        plan,
        &RunOptions {
            max_new_cells: max_cells,
        },
    )?;
    println!("sampled {} new cells", outcome.new_cells);
    let Some(result) = outcome.result else {
        println!("{} cells pending; rerun to continue", outcome.pending_cells);
        return Ok(0);
    };
    for s in &result.settings {
        println!(
            "n={:<3} t={}us J_F={:<7} median TTS={} CI=[{}, {}] infinite={}/{}",
            s.n,
            s.t_us,
            s.j_f,
            s.summary.median,
            s.summary.ci_low,
            s.summary.ci_high,
            s.summary.infinite_count,
            s.summary.count
        );
    }
    println!("result written to {}", plan.output_dir.join(schedbench::harness::RESULT_FILE).display());
    Ok(if result.has_failures() { EXIT_PARTIAL } else { 0 })
}

fn print_fits(fits: &[LabeledFit]) {
    for f in fits {
        match (&f.fit, &f.note) {
            (Some(fit), _) => println!(
                "{}: alpha = {:.4}{} t0 = {:.4} sizes {:?} excluded {:?}",
                f.label,
                fit.alpha,
                fit.stderr.map_or(String::new(), |s| format!(" ± {s:.4}")),
                fit.t0,
                fit.sizes,
                fit.excluded
            ),
            (None, note) => println!("{}: no fit ({})", f.label, note.as_deref().unwrap_or("")),
        }
    }
}

fn dispatch(command: Command) -> schedbench::Result<u8> {
    match command {
        Command::Generate {
            sizes,
            count,
            density,
            seed,
            out,
        } => {
            let out = resolve(&out);
            let ensemble = generate_ensemble(&sizes, count, density, seed)?;
            ensemble.save(&out)?;
            println!("wrote {} instances to {}", ensemble.members.len(), out.display());
            Ok(0)
        }
        Command::Embed {
            instance,
            machine,
            seed,
            tries,
            ideal,
            out,
        } => {
            let graph = SchedulingGraph::load(&instance)?;
            let profile = HardwareProfile::builtin(machine);
            let hardware = if ideal {
                profile.ideal_graph()?
            } else {
                profile.graph(derive_seed(seed, &[stream::DEFECTS]))?
            };
            let adjacency = build_coloring_qubo(&graph, 3)?.to_ising().adjacency();
            let embedding = find_embedding(&adjacency, &hardware, seed, tries)?;
            let out = resolve(&out);
            embedding.save(&out)?;
            let stats = embedding.chain_stats();
            println!(
                "{} variables, {} qubits, max chain {}, mean chain {:.2}",
                embedding.num_vars(),
                stats.total_qubits,
                stats.max,
                stats.mean
            );
            for (length, chains) in &stats.histogram {
                println!("  length {length:>3}: {chains} chains");
            }
            Ok(0)
        }
        Command::Sample {
            instance,
            sampler,
            anneal_time,
            reads,
            gauges,
            seed,
            sweeps_per_us,
            replay,
            out,
        } => {
            let graph = SchedulingGraph::load(&instance)?;
            let qubo = build_coloring_qubo(&graph, 3)?;
            let ising = qubo.to_ising();
            let set = match sampler {
                SamplerArg::Exact => {
                    let exact = sample_exact(&ising)?;
                    println!(
                        "ground energy {} with {} ground states",
                        exact.ground_energy, exact.degeneracy
                    );
                    return Ok(0);
                }
                SamplerArg::Sa => sample_sa(
                    &ising,
                    &SamplerConfig {
                        anneal_time_us: anneal_time,
                        sweeps_per_us,
                        num_reads: reads,
                        num_gauges: gauges,
                        seed,
                        ..SamplerConfig::default()
                    },
                )?,
                SamplerArg::Replay => {
                    let path = replay.ok_or_else(|| {
                        Error::InvalidParameter("--sampler replay needs --replay".into())
                    })?;
                    sample_replay(&path, &ising)?
                }
            };
            let mut valid = 0;
            for record in &set.records {
                if decode_coloring(&qubo, &spins_to_bits(&record.spins))?.is_valid() {
                    valid += 1;
                }
            }
            println!(
                "{valid}/{} samples are valid colorings, lowest energy {}",
                set.records.len(),
                set.lowest_energy().unwrap_or(f64::NAN)
            );
            if let Some(out) = out {
                set.save(&resolve(&out))?;
            }
            Ok(0)
        }
        Command::Plan {
            machine,
            output_dir,
            seed,
            out,
        } => {
            let mut plan = ExperimentPlan::defaults(machine, output_dir);
            plan.master_seed = seed;
            write_json(&resolve(&out), &plan)?;
            Ok(0)
        }
        Command::Run {
            plan,
            anneal_time,
            j_f,
            max_cells,
        } => {
            let mut plan = load_plan(&plan)?;
            plan.anneal_times_us = vec![anneal_time];
            plan.j_f_grid = vec![j_f];
            plan.output_dir = plan.output_dir.join(format!("run_t{anneal_time}_jf{j_f}"));
            execute(&plan, max_cells)
        }
        Command::Sweep { plan, max_cells } => execute(&load_plan(&plan)?, max_cells),
        Command::Analyze { result, out } => {
            let result = SweepResult::load(&result)?;
            let fits = analyze(&result);
            print_fits(&fits);
            if let Some(out) = out {
                write_json(&resolve(&out), &fits)?;
            }
            Ok(0)
        }
        Command::Report {
            result,
            out,
            no_fits,
        } => {
            let results = result
                .iter()
                .map(|p| SweepResult::load(p))
                .collect::<schedbench::Result<Vec<_>>>()?;
            let fits: Vec<LabeledFit> = if no_fits {
                Vec::new()
            } else {
                results.iter().flat_map(analyze).collect()
            };
            let bundle = emit_report(&results, &fits, &resolve(&out))?;
            for path in [
                &bundle.summary_csv,
                &bundle.series_json,
                &bundle.heatmap_json,
                &bundle.comparison_csv,
                &bundle.fits_json,
            ] {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidPlan(_) => EXIT_INVALID_PLAN,
                _ => EXIT_ERROR,
            })
        }
    }
}
