use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dvsbot::config::{ConfigError, Mode, ScenarioConfig};
use dvsbot::controller::PlantModel;
use dvsbot::evt_file::read_event_file;
use dvsbot::latency::{estimate_delay_with, DelayError, DelayOptions, GyroTrace};
use dvsbot::run::{self, RunError, RunOutput};

#[derive(Parser)]
#[command(
    name = "dvsbot",
    version,
    about = "Event-camera to robot-elbow pipeline simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and report its latency decomposition.
    RunE2e {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Directory for report and CSV artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write the scenario's camera packets to an event file.
    GenEvents {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the downstream pipeline on a recorded event file.
    Replay {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Estimate the delay between two gyro traces (`ts_us,omega_z` CSV).
    MeasureLatency {
        #[arg(long)]
        master: PathBuf,
        #[arg(long)]
        slave: PathBuf,
        /// Largest lag searched, seconds.
        #[arg(long, default_value_t = 1.0)]
        max_lag_s: f64,
        /// Smallest overlap of the two traces, seconds.
        #[arg(long, default_value_t = 4.0)]
        min_overlap_s: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    VirtualTime,
    RealTime,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlantArg {
    Servo,
    Instantaneous,
}

/// Overrides applied on top of the scenario file (or the defaults).
#[derive(Args, Default)]
struct ScenarioArgs {
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Whether to estimate the delay from the gyro traces.
    #[arg(long)]
    estimate_delay: Option<bool>,
    #[arg(long)]
    amplitude_deg: Option<f64>,
    #[arg(long)]
    frequency_hz: Option<f64>,
    #[arg(long)]
    step_size_deg: Option<f64>,
    #[arg(long)]
    salt_fraction: Option<f64>,
    #[arg(long)]
    gyro_sigma: Option<f64>,
    #[arg(long)]
    correlation_window_us: Option<u32>,
    #[arg(long)]
    min_support: Option<usize>,
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    lookahead_s: Option<f64>,
    #[arg(long, value_enum)]
    plant: Option<PlantArg>,
    #[arg(long)]
    nominal_elbow_deg: Option<f64>,
    #[arg(long)]
    capture_ms: Option<f64>,
    #[arg(long)]
    link1_ms: Option<f64>,
    #[arg(long)]
    processing_ms: Option<f64>,
    #[arg(long)]
    link2_ms: Option<f64>,
    #[arg(long)]
    command_ms: Option<f64>,
    #[arg(long)]
    link3_ms: Option<f64>,
    #[arg(long)]
    address: Option<String>,
    #[arg(long)]
    event_port: Option<u16>,
    #[arg(long)]
    roi_port: Option<u16>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ScenarioArgs {
    fn resolve(self) -> Result<ScenarioConfig, ConfigError> {
        let mut c = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        set(
            &mut c.mode,
            self.mode.map(|m| match m {
                ModeArg::VirtualTime => Mode::VirtualTime,
                ModeArg::RealTime => Mode::RealTime,
            }),
        );
        set(&mut c.duration_s, self.duration_s);
        set(&mut c.seed, self.seed);
        set(&mut c.estimate_delay, self.estimate_delay);
        set(&mut c.stepper.amplitude_deg, self.amplitude_deg);
        set(&mut c.stepper.frequency_hz, self.frequency_hz);
        set(&mut c.stepper.step_size_deg, self.step_size_deg);
        set(&mut c.noise.salt_fraction, self.salt_fraction);
        set(&mut c.noise.gyro_sigma, self.gyro_sigma);
        set(
            &mut c.pipeline.correlation_window_us,
            self.correlation_window_us,
        );
        set(&mut c.pipeline.roi.min_support, self.min_support);
        set(&mut c.servo.gain, self.gain);
        set(&mut c.servo.lookahead_s, self.lookahead_s);
        set(
            &mut c.plant,
            self.plant.map(|p| match p {
                PlantArg::Servo => PlantModel::Servo,
                PlantArg::Instantaneous => PlantModel::Instantaneous,
            }),
        );
        set(&mut c.elbow_map.nominal_elbow_deg, self.nominal_elbow_deg);
        set(&mut c.delays.capture_ms, self.capture_ms);
        set(&mut c.delays.link1_ms, self.link1_ms);
        set(&mut c.delays.processing_ms, self.processing_ms);
        set(&mut c.delays.link2_ms, self.link2_ms);
        set(&mut c.delays.command_ms, self.command_ms);
        set(&mut c.delays.link3_ms, self.link3_ms);
        set(&mut c.network.address, self.address);
        set(&mut c.network.event_port, self.event_port);
        set(&mut c.network.roi_port, self.roi_port);
        c.validate()?;
        Ok(c)
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(format!("invalid configuration: {e}"))
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn finish(out: &RunOutput, out_dir: Option<&Path>) -> Result<(), Failure> {
    print!("{}", out.report.render_text());
    if let Some(dir) = out_dir {
        out.write_artifacts(dir)?;
        eprintln!("artifacts written to {}", dir.display());
    }
    Ok(())
}

fn read_trace(path: &Path) -> Result<GyroTrace, Failure> {
    let file = std::fs::File::open(path)
        .map_err(|e| Failure::Runtime(format!("cannot open {}: {e}", path.display())))?;
    GyroTrace::read_csv(file).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::RunE2e { scenario, out_dir } => {
            let cfg = scenario.resolve()?;
            let out = run::run_e2e(&cfg)?;
            finish(&out, out_dir.as_deref())
        }
        Command::GenEvents { scenario, out } => {
            let cfg = ScenarioArgs {
                estimate_delay: Some(false),
                ..scenario
            }
            .resolve()?;
            let n = run::gen_events(&cfg, &out)?;
            println!("wrote {n} packets to {}", out.display());
            Ok(())
        }
        Command::Replay {
            scenario,
            input,
            out_dir,
        } => {
            let cfg = ScenarioArgs {
                estimate_delay: Some(false),
                ..scenario
            }
            .resolve()?;
            let packets = read_event_file(&input)
                .and_then(|r| r.collect::<Result<Vec<_>, _>>())
                .map_err(|e| Failure::Runtime(format!("{}: {e}", input.display())))?;
            let out = run::replay(&cfg, &packets)?;
            finish(&out, out_dir.as_deref())
        }
        Command::MeasureLatency {
            master,
            slave,
            max_lag_s,
            min_overlap_s,
        } => {
            let (m, s) = (read_trace(&master)?, read_trace(&slave)?);
            let opts = DelayOptions {
                max_lag_s,
                min_overlap_s,
            };
            let est = estimate_delay_with(&m, &s, &opts).map_err(|e| match e {
                DelayError::RateMismatch { .. } => Failure::Validation(e.to_string()),
                e => Failure::Runtime(e.to_string()),
            })?;
            println!("delay_ms: {:.3}", est.delay_ms);
            println!("peak_lag_samples: {}", est.peak_lag);
            println!("peak_corr: {:.6}", est.peak_corr);
            match est.peak_ratio() {
                Some(r) => println!("peak_ratio: {r:.3}"),
                None => println!("peak_ratio: -"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
