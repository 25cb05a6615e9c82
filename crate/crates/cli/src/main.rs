use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use falsify_core::engine::{
    binned_stats, export_training_configs, learned_distribution, replay, run_campaign, svg_plot,
    write_configs_jsonl, BuiltinTarget, CampaignConfig, CampaignOptions, Override, ResultTable, TargetSpec, Verdict,
    DEFAULT_BIN_WIDTH,
};
use falsify_core::monitor::{parse_spec, Formula};
use falsify_core::refsim::{mode_for, FaultProfile, TaxiSim};
use falsify_core::samplers::{CeParams, Sampler, SamplerChoice};
use falsify_core::scenario::{parse_scenario, FeatureVector, ScenarioProgram};
use falsify_core::simbridge::{run_client, BridgeError, TcpOptions, TestConfig};

#[derive(Parser)]
#[command(name = "falsify", version, about = "Sample scenarios, run a simulator, score traces against a temporal spec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum SamplerKind {
    Uniform,
    Halton,
    Ce,
}

#[derive(Copy, Clone, ValueEnum)]
enum OverrideKind {
    None,
    GroundTruth,
    NoShadow,
}

#[derive(Copy, Clone, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct SimArgs {
    /// `builtin`, or `tcp:HOST:PORT` to listen there for simulator clients
    #[arg(long, default_value = "builtin")]
    sim: String,
    /// Fault profile JSON for the builtin simulator
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Simulator flag, e.g. `perception=ground-truth` or `shadows=off` (repeatable)
    #[arg(long = "flag", value_name = "KEY=VALUE")]
    flags: Vec<String>,
    /// Seconds allowed per remote episode
    #[arg(long, env = "FALSIFY_EPISODE_TIMEOUT", default_value_t = 60.0)]
    episode_timeout: f64,
    /// Seconds a queued episode waits for a client to connect
    #[arg(long, env = "FALSIFY_CONNECT_TIMEOUT", default_value_t = 30.0)]
    connect_timeout: f64,
    /// Run many episodes per client connection
    #[arg(long)]
    keep_alive: bool,
    /// Parallel episodes (forced to 1 for adaptive samplers)
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Episode length in seconds (default: scenario meta, else 30)
    #[arg(long)]
    duration: Option<f64>,
    /// Sample period in seconds (default: scenario meta, else 0.1)
    #[arg(long)]
    period: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a falsification campaign
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "uniform")]
        sampler: SamplerKind,
        /// Scramble Halton digits
        #[arg(long)]
        scramble: bool,
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        stop_on_falsify: bool,
        /// Results table (JSON lines), written as episodes complete
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the learned distribution (CE only)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write wall_ms = 0 so identical seeds give identical tables
        #[arg(long)]
        no_wall_time: bool,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Robustness statistics binned along one parameter
    Analyze {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        bin_by: String,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        width: f64,
        /// Also write a scatter plot with median lines
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Tag parameter that splits the plot into series
        #[arg(long)]
        series_by: Option<String>,
    },
    /// Re-run recorded episodes, optionally with a simulator change
    Replay {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "override", value_enum, default_value = "none")]
        override_: OverrideKind,
        /// Scenario for duration/period metadata
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Replay every scored row instead of only the counterexamples
        #[arg(long)]
        all: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Sample feature vectors for training data
    ExportConfigs {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short = 'n', long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw external parameters from the distribution learned in this CE table
        #[arg(long)]
        learned_from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the distribution a CE campaign learned
    ReportDistribution {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
    },
    /// Serve episodes from the builtin simulator to a listening campaign
    SimClient {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<ScenarioProgram> {
    parse_scenario(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_spec(path: &Path) -> Result<Formula> {
    parse_spec(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_table(path: &Path) -> Result<ResultTable> {
    let t = if path.extension().is_some_and(|e| e == "csv") {
        ResultTable::from_csv(&read(path)?)?
    } else {
        ResultTable::load(path)?
    };
    Ok(t)
}

fn load_profile(path: Option<&Path>) -> Result<FaultProfile> {
    match path {
        None => Ok(FaultProfile::default_profile()),
        Some(p) => FaultProfile::load(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())),
    }
}

fn secs(s: f64, what: &str) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid {what} {s}"))
}

impl SimArgs {
    fn target(&self) -> Result<TargetSpec> {
        if self.sim == "builtin" {
            let profile = load_profile(self.profile.as_deref())?;
            // reject unsupported flags before any episode runs
            let probe = TestConfig {
                flags: self.options()?.flags,
                ..TestConfig::new(0, &FeatureVector::new(Default::default()), 1.0, 1.0, 0)
            };
            mode_for(&probe, &profile).map_err(anyhow::Error::msg)?;
            return Ok(TargetSpec::Builtin(BuiltinTarget {
                profile,
                ..BuiltinTarget::default()
            }));
        }
        let Some(bind) = self.sim.strip_prefix("tcp:") else {
            bail!("--sim must be `builtin` or `tcp:HOST:PORT`, got `{}`", self.sim);
        };
        Ok(TargetSpec::Tcp {
            bind: bind.to_string(),
            options: TcpOptions {
                episode_timeout: secs(self.episode_timeout, "episode timeout")?,
                connect_timeout: secs(self.connect_timeout, "connect timeout")?,
                keep_alive: self.keep_alive,
            },
        })
    }

    fn options(&self) -> Result<CampaignOptions> {
        let mut flags = BTreeMap::new();
        for f in &self.flags {
            let Some((k, v)) = f.split_once('=') else {
                bail!("--flag expects KEY=VALUE, got `{f}`");
            };
            flags.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(CampaignOptions {
            parallelism: self.parallel,
            duration: self.duration,
            period: self.period,
            flags,
            ..CampaignOptions::default()
        })
    }
}

fn summary(table: &ResultTable) {
    let counts: Vec<String> = [
        Verdict::Satisfied,
        Verdict::Falsified,
        Verdict::Rejected,
        Verdict::Timeout,
        Verdict::Error,
    ]
    .iter()
    .map(|v| format!("{} {}", table.count(*v), v.as_str()))
    .collect();
    println!("{} episodes: {}", table.len(), counts.join(", "));
    println!("falsification rate {:.3}", table.falsification_rate());
    if let Some(worst) = table
        .rows
        .iter()
        .filter(|r| r.rho.is_some())
        .min_by(|a, b| a.rho.unwrap().total_cmp(&b.rho.unwrap()))
    {
        println!("worst episode {} rho {:.4}", worst.episode, worst.rho.unwrap());
    }
}

fn falsified(table: &ResultTable) -> ExitCode {
    if table.count(Verdict::Falsified) > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            spec,
            sampler,
            scramble,
            episodes,
            seed,
            stop_on_falsify,
            out,
            report,
            no_wall_time,
            sim,
        } => {
            let sampler = match sampler {
                SamplerKind::Uniform => SamplerChoice::Uniform,
                SamplerKind::Halton => SamplerChoice::Halton { scramble },
                SamplerKind::Ce => SamplerChoice::CrossEntropy(CeParams::default()),
            };
            let config = CampaignConfig {
                scenario,
                spec,
                sampler,
                target: sim.target()?,
                options: CampaignOptions {
                    max_episodes: episodes,
                    stop_on_first: stop_on_falsify,
                    seed,
                    record_wall_time: !no_wall_time,
                    output: out,
                    ..sim.options()?
                },
            };
            let result = run_campaign(&config)?;
            summary(&result.table);
            if result.stopped_early {
                println!("stopped at the first falsifying episode");
            }
            if let Some(r) = &result.report {
                match &report {
                    Some(p) => std::fs::write(p, r.to_csv()).with_context(|| format!("writing {}", p.display()))?,
                    None => print!("{}", r.to_csv()),
                }
            }
            Ok(falsified(&result.table))
        }
        Command::Analyze {
            table,
            bin_by,
            width,
            svg,
            series_by,
        } => {
            let t = load_table(&table)?;
            println!("lo,hi,count,median,q25,q75");
            let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
            for b in binned_stats(&t, &bin_by, width)? {
                println!("{},{},{},{},{},{}", b.lo, b.hi, b.count, fmt(b.median), fmt(b.q25), fmt(b.q75));
            }
            if let Some(p) = svg {
                let plot = svg_plot(&t, &bin_by, width, series_by.as_deref())?;
                std::fs::write(&p, plot).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            table,
            spec,
            override_,
            scenario,
            all,
            out,
            sim,
        } => {
            let t = load_table(&table)?;
            let f = load_spec(&spec)?;
            let program = scenario.as_deref().map(load_scenario).transpose()?;
            let rows: Vec<_> = t
                .rows
                .into_iter()
                .filter(|r| if all { r.rho.is_some() } else { r.verdict == Verdict::Falsified })
                .collect();
            let o = match override_ {
                OverrideKind::None => Override::None,
                OverrideKind::GroundTruth => Override::GroundTruth,
                OverrideKind::NoShadow => Override::NoShadow,
            };
            let options = sim.options()?;
            let replayed = match sim.target()? {
                TargetSpec::Builtin(b) => replay(&rows, &f, &b, &options, program.as_ref(), o)?,
                TargetSpec::Tcp { bind, options: tcp } => {
                    let target = falsify_core::simbridge::TcpTarget::bind(bind.as_str(), tcp)?;
                    eprintln!("listening on {}", target.local_addr());
                    replay(&rows, &f, &target, &options, program.as_ref(), o)?
                }
            };
            summary(&replayed);
            if let Some(p) = out {
                replayed.save_jsonl(&p)?;
            }
            Ok(falsified(&replayed))
        }
        Command::ExportConfigs {
            scenario,
            count,
            seed,
            learned_from,
            out,
        } => {
            let program = load_scenario(&scenario)?;
            let mut learned = match learned_from {
                Some(t) => Some(learned_distribution(&program, &load_table(&t)?, CeParams::default())?),
                None => None,
            };
            let configs = export_training_configs(
                &program,
                learned.as_mut().map(|s| s as &mut dyn Sampler),
                count,
                seed,
            )?;
            write_configs_jsonl(&configs, &out)?;
            println!("wrote {} configurations to {}", configs.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReportDistribution { scenario, table, format } => {
            let program = load_scenario(&scenario)?;
            let ce = learned_distribution(&program, &load_table(&table)?, CeParams::default())?;
            let report = ce.distribution_report()?;
            match format {
                ReportFormat::Csv => print!("{}", report.to_csv()),
                ReportFormat::Json => println!("{}", report.to_json()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SimClient { connect, profile } => {
            let mut sim = TaxiSim::new(load_profile(profile.as_deref())?);
            // servers without keep-alive close after each episode, so
            // reconnect until the campaign stops listening
            let mut served = run_client(connect.as_str(), &mut sim)?;
            loop {
                match run_client(connect.as_str(), &mut sim) {
                    Ok(n) => served += n,
                    Err(BridgeError::Unreachable(_)) => break,
                    Err(e) => return Err(e.into()),
                }
            }
            eprintln!("served {served} episodes");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            // library errors already embed their sources in their message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
