//! Command-line front end: writes floor maps as CSV and prints summaries.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use owc_cellsim::coexistence::{summarize, CoexistenceScenario, Simulation};
use owc_cellsim::config::{load_scenario, ScenarioConfig};
use owc_cellsim::emitters::build_layout;
use owc_cellsim::grid::to_db;
use owc_cellsim::photometry::scenario_illumination;
use owc_cellsim::receiver::{max_rate_at_ber, sinr_for_ber};
use owc_cellsim::{with_threads, Combining, ScalarGrid, SystemId};

#[derive(Parser)]
#[command(name = "owc-cellsim", version, about = "Co-existing optical wireless cell simulator")]
struct Cli {
    /// Scenario file (TOML); missing keys take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Floor lattice spacing in metres
    #[arg(long, global = true, allow_negative_numbers = true)]
    grid_step: Option<f64>,
    /// Output directory for CSV maps
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Illuminance map from the illumination units
    Illumination {
        /// Calibrate the per-LD flux so the map minimum is LUX
        #[arg(long, value_name = "LUX")]
        calibrate: Option<f64>,
    },
    /// Interference-free SNR map of one cell system
    Snr(LinkArgs),
    /// SINR map with one or two interfering cell systems
    Sinr(LinkArgs),
    /// MRC minus SC gain map of one cell system
    Gain(LinkArgs),
    /// Every map: illumination, per-system SNR and gain, all SINR combinations
    Report,
}

#[derive(Args)]
struct LinkArgs {
    /// micro, pico or atto
    #[arg(long)]
    serving: Option<String>,
    /// Comma-separated interfering systems
    #[arg(long, value_delimiter = ',')]
    interfering: Option<Vec<String>>,
    /// sc or mrc
    #[arg(long)]
    combining: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Scenario(String),
}

impl CliError {
    fn code(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("E_USAGE", 2),
            CliError::Config(_) => ("E_CONFIG", 3),
            CliError::Io(_) => ("E_IO", 4),
            CliError::Scenario(_) => ("E_SCENARIO", 5),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) | CliError::Scenario(m) => m,
        };
        write!(f, "{}: {}", self.code().0, msg.replace('\n', " "))
    }
}

fn scenario_err(e: impl fmt::Display) -> CliError {
    CliError::Scenario(e.to_string())
}

fn parse_system(s: &str) -> Result<SystemId, CliError> {
    match SystemId::parse(s.trim()) {
        Some(id) if id != SystemId::Illumination => Ok(id),
        _ => Err(CliError::Usage(format!("unknown cell system `{s}` (expected micro, pico or atto)"))),
    }
}

fn parse_combining(s: &str) -> Result<Combining, CliError> {
    match s {
        "sc" => Ok(Combining::Sc),
        "mrc" => Ok(Combining::Mrc),
        _ => Err(CliError::Usage(format!("unknown combining `{s}` (expected sc or mrc)"))),
    }
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("OWC_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("OWC_THREADS must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

struct Output {
    dir: PathBuf,
    summary: String,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output {
            dir,
            summary: String::new(),
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn map(&mut self, name: &str, map: &ScalarGrid, threshold: f64, extra: Option<String>) -> Result<(), CliError> {
        let path = self.write(&format!("{name}.csv"), &map.to_csv())?;
        println!("[{name}] -> {}", path.display());
        let mut block = format!("[{name}]\n{}", summarize(map, threshold));
        if let Some(x) = extra {
            block.push_str(&x);
            block.push('\n');
        }
        print!("{}", &block[block.find('\n').unwrap() + 1..]);
        self.summary.push_str(&block);
        Ok(())
    }

    fn note(&mut self, line: String) {
        println!("{line}");
        self.summary.push_str(&line);
        self.summary.push('\n');
    }
}

fn illumination(cfg: &ScenarioConfig, calibrate: Option<f64>, out: &mut Output) -> Result<(), CliError> {
    let layout = build_layout(cfg).map_err(scenario_err)?;
    let ill = scenario_illumination(cfg, &layout, calibrate).map_err(scenario_err)?;
    let window = &cfg.illumination;
    let compliant = ill.map.min_lux >= window.min_lux && ill.map.max_lux <= window.max_lux;
    out.note(format!(
        "illumination: flux per LD {:.6} lm ({}), compliance window [{}, {}] lx: {}",
        ill.flux_per_ld,
        if ill.calibrated { "calibrated" } else { "configured" },
        window.min_lux,
        window.max_lux,
        if compliant { "compliant" } else { "NOT compliant" },
    ));
    out.map("illumination_lux", &ill.map.grid, window.min_lux, None)
}

fn rate_note(cfg: &ScenarioConfig, serving: SystemId, min_db: f64) -> String {
    let bw = cfg.noise.get(serving).expect("cell system").bandwidth;
    let sinr = 10f64.powf(min_db / 10.0);
    let rate = max_rate_at_ber(sinr, bw, cfg.link.target_ber, cfg.link.spectral_efficiency);
    format!("rate at minimum {:.3} Mbit/s", rate / 1e6)
}

fn link_map(
    sim: &Simulation,
    scenario: &CoexistenceScenario,
    combining: Combining,
    out: &mut Output,
) -> Result<(), CliError> {
    let cfg = &sim.config;
    let threshold = to_db(sinr_for_ber(cfg.link.target_ber));
    let map = sim.sweep_map(scenario, combining).map_err(scenario_err)?;
    let kind = if scenario.interfering.is_empty() { "snr" } else { "sinr" };
    let name = format!("{kind}_{}_{}", scenario.label(), combining.name());
    let min = summarize(&map, threshold).min;
    out.map(&name, &map, threshold, Some(rate_note(cfg, scenario.serving, min)))
}

fn gain(sim: &Simulation, serving: SystemId, out: &mut Output) -> Result<(), CliError> {
    let scenario = CoexistenceScenario::snr(serving).map_err(scenario_err)?;
    let map = sim.gain_map(&scenario).map_err(scenario_err)?;
    out.map(&format!("gain_{serving}"), &map, 0.0, None)
}

fn link_inputs(cfg: &ScenarioConfig, args: &LinkArgs) -> Result<(SystemId, Vec<SystemId>, Combining), CliError> {
    let serving = match &args.serving {
        Some(s) => parse_system(s)?,
        None => cfg.run.serving,
    };
    let interfering = match &args.interfering {
        Some(list) => list
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_system(s))
            .collect::<Result<Vec<_>, _>>()?,
        None => cfg.run.interfering.clone(),
    };
    let combining = match &args.combining {
        Some(c) => parse_combining(c)?,
        None => cfg.run.combining,
    };
    Ok((serving, interfering, combining))
}

fn load(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => load_scenario(p).map_err(|e| match e {
            owc_cellsim::config::ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        })?,
        None => ScenarioConfig::default_scenario(),
    };
    if let Some(step) = cli.grid_step {
        cfg.run.grid_step = step;
    }
    if let Some(dir) = &cli.out {
        cfg.run.output_dir = dir.display().to_string();
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load(&cli)?;
    let mut out = Output::new(Path::new(&cfg.run.output_dir).to_path_buf())?;
    let build = |cfg: &ScenarioConfig| Simulation::new(cfg).map_err(scenario_err);
    match &cli.command {
        Command::Illumination { calibrate } => illumination(&cfg, *calibrate, &mut out),
        Command::Snr(args) => {
            let (serving, interfering, combining) = link_inputs(&cfg, args)?;
            if !interfering.is_empty() {
                return Err(CliError::Usage("snr takes no interfering systems; use sinr".into()));
            }
            let scenario = CoexistenceScenario::snr(serving).map_err(scenario_err)?;
            link_map(&build(&cfg)?, &scenario, combining, &mut out)
        }
        Command::Sinr(args) => {
            let (serving, interfering, combining) = link_inputs(&cfg, args)?;
            if interfering.is_empty() {
                return Err(CliError::Usage("sinr needs at least one interfering system".into()));
            }
            let scenario = CoexistenceScenario::new(serving, &interfering).map_err(|e| CliError::Usage(e.to_string()))?;
            link_map(&build(&cfg)?, &scenario, combining, &mut out)
        }
        Command::Gain(args) => {
            let (serving, _, _) = link_inputs(&cfg, args)?;
            gain(&build(&cfg)?, serving, &mut out)
        }
        Command::Report => {
            illumination(&cfg, None, &mut out)?;
            let sim = build(&cfg)?;
            for id in SystemId::CELLS {
                let scenario = CoexistenceScenario::snr(id).map_err(scenario_err)?;
                for combining in [Combining::Sc, Combining::Mrc] {
                    link_map(&sim, &scenario, combining, &mut out)?;
                }
                gain(&sim, id, &mut out)?;
            }
            for scenario in CoexistenceScenario::all_interference_combinations() {
                link_map(&sim, &scenario, cfg.run.combining, &mut out)?;
            }
            let path = out.write("summary.txt", &out.summary)?;
            println!("summary -> {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{err}");
            return ExitCode::from(err.code().1);
        }
    };
    let result = threads().and_then(|n| with_threads(n, || run(cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code().1)
        }
    }
}
