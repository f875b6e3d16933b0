use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use koopwatch::io::{
    compute_metrics, emit_plot_data, read_labels_csv, read_stream_csv, resolve_scenario, run_attack_stage,
    run_detect_stage, run_pipeline, run_simulate_stage, write_atomic, write_labels_csv, write_reports_jsonl,
    write_stream_csv, ArtifactHeader, IoError, Metrics, Overrides, PlotKind, ScenarioConfig, SCENARIO_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "koopwatch", version, about = "Koopman-mode attack detection on simulated grid measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file, or a name looked up in the scenario directory and then
    /// among the bundled scenarios.
    #[arg(long, default_value = "ten_bus_multiplicative")]
    scenario: String,
    /// Overrides both the simulation and the detector seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "n-tilde")]
    n_tilde: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, IoError> {
        resolve_scenario(&self.scenario)?.with_overrides(&Overrides {
            seed: self.seed,
            n: self.n,
            n_tilde: self.n_tilde,
            tau: self.tau,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and print its summary and config hash.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Attack-free simulation; writes true_stream.csv.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Applies the scenario's attacks to a recorded stream; writes
    /// received_stream.csv and labels.csv.
    Attack {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// True stream CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the detector over a received stream; writes reports.jsonl, and
    /// metrics.json when labels are given.
    Detect {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Received stream CSV.
        #[arg(long)]
        input: PathBuf,
        /// Ground-truth labels CSV.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-loop simulation with attacks, detection and metrics.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emits a long-format table from the artifacts of a run.
    PlotData {
        /// Run directory.
        #[arg(long)]
        input: PathBuf,
        /// timeseries, mode_spread or clusters.
        #[arg(long)]
        kind: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_metrics(path: &Path, metrics: &Metrics) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

fn summarize(m: &Metrics) {
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "reports={} attack_steps={} latency={} precision={} recall={} false_positive_steps={}/{}",
        m.reports,
        m.attack_steps,
        m.detection_latency_samples.map_or("n/a".to_string(), |l| l.to_string()),
        opt(m.precision),
        opt(m.recall),
        m.false_positive_steps,
        m.clean_steps
    );
}

fn execute(command: Command) -> Result<(), IoError> {
    match command {
        Command::Validate { scenario } => {
            let cfg = scenario.load()?;
            println!(
                "{}: {} buses, {} sensors, {} events, {} attacks, {:.0} s at dt = {}",
                cfg.name,
                cfg.n_bus(),
                cfg.n_channels(),
                cfg.events.len(),
                cfg.attacks.len(),
                cfg.simulation.t_end,
                cfg.simulation.dt
            );
            println!("config_sha256={}", cfg.config_hash());
        }
        Command::Simulate { scenario, out } => {
            let cfg = scenario.load()?;
            let stream = run_simulate_stage(&cfg)?;
            let header = ArtifactHeader::new("true_stream", &cfg.config_hash());
            write_stream_csv(&out.join("true_stream.csv"), &header, &stream)?;
        }
        Command::Attack { scenario, input, out } => {
            let cfg = scenario.load()?;
            let (_, stream) = read_stream_csv(&input)?;
            let attacked = run_attack_stage(&cfg, &stream)?;
            for w in &attacked.warnings {
                eprintln!("warning: {w}");
            }
            let hash = cfg.config_hash();
            let times: Vec<f64> = stream.iter().map(|f| f.t).collect();
            write_stream_csv(
                &out.join("received_stream.csv"),
                &ArtifactHeader::new("received_stream", &hash),
                &attacked.received,
            )?;
            write_labels_csv(
                &out.join("labels.csv"),
                &ArtifactHeader::new("labels", &hash),
                &times,
                &attacked.labels,
                cfg.n_channels(),
            )?;
        }
        Command::Detect {
            scenario,
            input,
            labels,
            out,
        } => {
            let cfg = scenario.load()?;
            let (_, stream) = read_stream_csv(&input)?;
            let reports = run_detect_stage(&cfg, &stream)?;
            let hash = cfg.config_hash();
            write_reports_jsonl(&out.join("reports.jsonl"), &ArtifactHeader::new("reports", &hash), &reports)?;
            if let Some(path) = labels {
                let (_, rows) = read_labels_csv(&path)?;
                let truth: Vec<Vec<usize>> = rows.into_iter().map(|(_, l)| l).collect();
                let mut metrics = compute_metrics(&truth, &reports, cfg.detector.window.n, cfg.n_channels());
                metrics.config_sha256 = hash;
                write_metrics(&out.join("metrics.json"), &metrics)?;
                summarize(&metrics);
            } else {
                println!("reports={} attack_steps={}", reports.len(), reports.iter().filter(|r| r.attack).count());
            }
        }
        Command::Run { scenario, out } => {
            let cfg = scenario.load()?;
            let artifacts = run_pipeline(&cfg, &out)?;
            for w in &artifacts.metrics.warnings {
                eprintln!("warning: {w}");
            }
            summarize(&artifacts.metrics);
        }
        Command::PlotData { input, kind, out } => {
            let kind: PlotKind = kind.parse()?;
            let table = emit_plot_data(kind, &input)?;
            match out {
                Some(path) => write_atomic(&path, table.as_bytes())?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, IoError::Validation { ref field, .. } if field == "scenario") {
                eprintln!("hint: set {SCENARIO_DIR_ENV} to search a scenario directory");
            }
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
