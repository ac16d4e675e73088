use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mvgcn::eval::summary_table;
use mvgcn::harness::pipeline;
use mvgcn::harness::{RunConfig, SynthConfig};
use mvgcn::mapseg::{BBox, DEFAULT_DILATE_ITERATIONS};
use mvgcn::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mvgcn", version, about = "Crowd-flow forecasting on irregular regions")]
#[command(after_help = RunConfig::help_text())]
struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Extra `key=value` settings, applied after the file and MVGCN_* variables.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print a result summary on stdout.
    #[arg(long, global = true)]
    print: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Road segments to irregular regions.
    Segment {
        #[arg(long)]
        roads: PathBuf,
        /// min_lat,min_lon,max_lat,max_lon
        #[arg(long, value_delimiter = ',', num_args = 4)]
        bbox: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_DILATE_ITERATIONS)]
        dilate: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge regions into a target count by flow correlation.
    Cluster {
        #[arg(long)]
        membership: PathBuf,
        #[arg(long)]
        flows: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Region graph from transitions or trips.
    BuildGraph,
    /// Aggregate trips (if configured) and check the dataset.
    Prepare,
    /// Generate a synthetic city.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        weeks: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        daily_amplitude: Option<f64>,
        #[arg(long)]
        weekly_amplitude: Option<f64>,
        #[arg(long)]
        diffusion: Option<f64>,
        #[arg(long)]
        persistence: Option<f64>,
        #[arg(long)]
        shock_prob: Option<f64>,
        #[arg(long)]
        shock_magnitude: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Train and save a checkpoint.
    Train,
    /// Write test-split predictions of the checkpoint.
    Predict,
    /// Score predictions against HA, overall and on sudden/normal timesteps.
    Evaluate,
    /// Train with single components switched off.
    Ablate {
        /// Restrict to these variant names.
        #[arg(long)]
        only: Vec<String>,
    },
    /// Predicted flows at one timestep joined with region centroids.
    ExportHeatmap {
        #[arg(long)]
        t: usize,
        #[arg(long, default_value = "heatmap.csv")]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> mvgcn::Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth_config(cmd: &Command) -> SynthConfig {
    let mut c = SynthConfig::default();
    if let Command::Synth {
        n,
        weeks,
        seed,
        daily_amplitude,
        weekly_amplitude,
        diffusion,
        persistence,
        shock_prob,
        shock_magnitude,
        noise,
        ..
    } = cmd
    {
        c.n = n.unwrap_or(c.n);
        c.weeks = weeks.unwrap_or(c.weeks);
        c.seed = seed.unwrap_or(c.seed);
        c.daily_amplitude = daily_amplitude.unwrap_or(c.daily_amplitude);
        c.weekly_amplitude = weekly_amplitude.unwrap_or(c.weekly_amplitude);
        c.diffusion = diffusion.unwrap_or(c.diffusion);
        c.persistence = persistence.unwrap_or(c.persistence);
        c.shock_prob = shock_prob.unwrap_or(c.shock_prob);
        c.shock_magnitude = shock_magnitude.unwrap_or(c.shock_magnitude);
        c.noise = noise.unwrap_or(c.noise);
    }
    c
}

fn run(cli: &Cli) -> mvgcn::Result<String> {
    let summary = match &cli.command {
        Command::Synth { out, .. } => {
            let cfg = synth_config(&cli.command);
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
            let written = pipeline::synth_to_dir(&cfg, out)?;
            format!("wrote {} files to {}", written.len(), out.display())
        }
        Command::Segment {
            roads,
            bbox,
            height,
            width,
            dilate,
            out,
        } => {
            let bbox = BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]).map_err(|e| Error::Config(e.to_string()))?;
            let written = pipeline::segment_roads(roads, bbox, *height, *width, *dilate, out)?;
            format!("wrote {}", written[1].display())
        }
        Command::Cluster {
            membership,
            flows,
            target,
            out,
        } => {
            let written = pipeline::cluster_membership(membership, flows, *target, out)?;
            format!("wrote {}", written[1].display())
        }
        Command::BuildGraph => {
            let (g, _) = pipeline::build_graph(&load_config(cli)?)?;
            format!("regions={} edges={} theta={} kappa={}", g.n, g.edge_count(), g.kernel.theta, g.kernel.kappa)
        }
        Command::Prepare => {
            let (p, _) = pipeline::prepare(&load_config(cli)?)?;
            format!("train={} val={} test={}", p.data.train.len(), p.data.val.len(), p.data.test.len())
        }
        Command::Train => {
            let (r, _) = pipeline::train_model(&load_config(cli)?)?;
            format!(
                "epochs={} best_epoch={} best_val_rmse={} stop={}",
                r.epochs(),
                r.best_epoch,
                r.best_val_rmse(),
                r.stop.name()
            )
        }
        Command::Predict => {
            let (rows, written) = pipeline::predict(&load_config(cli)?)?;
            format!("{} rows in {}", rows.len(), written[0].display())
        }
        Command::Evaluate => summary_table(&pipeline::evaluate(&load_config(cli)?)?.0),
        Command::Ablate { only } => summary_table(&pipeline::ablate(&load_config(cli)?, only)?.0),
        Command::ExportHeatmap { t, out } => {
            let written = pipeline::heatmap(&load_config(cli)?, *t, out)?;
            format!("wrote {}", written[0].display())
        }
    };
    Ok(summary)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            if cli.print {
                println!("{}", summary.trim_end());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: code={code} {}", e.to_string().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
