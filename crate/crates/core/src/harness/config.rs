use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use crate::dataprep::{ScaleRange, ViewConfig};
use crate::error::{Error, Result};
use crate::io::parse_timestamp;
use crate::model::{ModelConfig, PostNet};
use crate::numkit::Activation;
use crate::stg::{GraphOptions, Metric};

pub const ENV_PREFIX: &str = "MVGCN_";

/// Every recognised key with its one-line description, in `--help` order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("work_dir", "path; directory that relative paths resolve against"),
    ("flows", "path; DTN flow series (T,N,C)"),
    ("externals", "path; externals CSV"),
    ("transitions", "path; DTN transition cube (T,N,N)"),
    ("trips", "path; trips CSV"),
    ("regions", "path; region table CSV (region_id,centroid_lat,centroid_lon,...)"),
    ("membership", "path; cell-to-region CSV used to map trip coordinates"),
    ("start", "timestamp; first slice when aggregating trips"),
    ("interval_secs", "integer; slice length when aggregating trips"),
    ("slices", "integer or `auto`; slice count when aggregating trips"),
    ("graph", "path; graph edge CSV"),
    ("checkpoint", "path; model checkpoint"),
    ("predictions", "path; predictions CSV"),
    ("report_dir", "path; directory for reports"),
    ("views", "five comma-separated view lengths l_r,l_d,l_w,l_m,l_q"),
    ("periods", "four comma-separated periods p_d,p_w,p_m,p_q"),
    ("horizon", "integer ≥ 1; steps ahead"),
    ("scaler_range", "-1,1 or 0,1"),
    ("weather_vocab", "integer; weather code vocabulary size"),
    ("alpha", "integer; minimum transitions for an edge"),
    ("beta", "real; minimum transition ratio for an edge"),
    ("theta", "real or `auto`; Gaussian kernel width"),
    ("kappa", "real, `auto` or `inf`; kernel cutoff distance"),
    ("metric", "haversine or euclidean"),
    ("sudden_fraction", "real in [0,1]; share of timesteps flagged sudden"),
    ("hidden", "integer; GCN hidden width"),
    ("residual_units", "integer; residual units per view"),
    ("residual", "bool; skip connections"),
    ("hidden_act", "relu|tanh|sigmoid|identity"),
    ("output_act", "relu|tanh|sigmoid|identity"),
    ("embed_width", "integer; global-view embedding width"),
    ("use_external", "bool"),
    ("use_meta", "bool"),
    ("postnet", "none or linear"),
    ("delta", "real > 0; Huber threshold"),
    ("lr", "real > 0; Adam learning rate"),
    ("batch_size", "integer ≥ 1"),
    ("max_epochs", "integer ≥ 1"),
    ("patience", "integer; epochs without improvement before stopping"),
    ("seed", "integer; master seed"),
];

/// Run settings read from a flat `key = value` file; `MVGCN_<KEY>`
/// environment variables override file values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub work_dir: PathBuf,
    pub flows: PathBuf,
    pub externals: Option<PathBuf>,
    pub transitions: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub membership: Option<PathBuf>,
    pub start: Option<NaiveDateTime>,
    pub interval_secs: i64,
    pub slices: Option<usize>,
    pub graph: PathBuf,
    pub checkpoint: PathBuf,
    pub predictions: PathBuf,
    pub report_dir: PathBuf,
    pub views: ViewConfig,
    pub horizon: usize,
    pub scaler_range: ScaleRange,
    pub weather_vocab: usize,
    pub graph_options: GraphOptions,
    pub sudden_fraction: f64,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            work_dir: PathBuf::from("."),
            flows: "flows.dtn".into(),
            externals: None,
            transitions: None,
            trips: None,
            regions: None,
            membership: None,
            start: None,
            interval_secs: 3600,
            slices: None,
            graph: "graph.csv".into(),
            checkpoint: "model.ckpt".into(),
            predictions: "predictions.csv".into(),
            report_dir: "reports".into(),
            views: ViewConfig {
                lengths: [3, 3, 1, 0, 0],
                ..ViewConfig::default()
            },
            horizon: 1,
            scaler_range: ScaleRange::Symmetric,
            weather_vocab: 4,
            graph_options: GraphOptions::default(),
            sudden_fraction: crate::eval::DEFAULT_SUDDEN_FRACTION,
            model: ModelConfig::default(),
        }
    }
}

fn invalid(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("{key}: expected {want}, got `{value}`"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<T> {
    value.parse().map_err(|_| invalid(key, value, want))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(invalid(key, value, "a boolean")),
    }
}

fn parse_list<const K: usize>(key: &str, value: &str) -> Result<[usize; K]> {
    let items: Vec<usize> = value
        .split(',')
        .map(|s| parse_num(key, s.trim(), "an integer list"))
        .collect::<Result<_>>()?;
    items
        .try_into()
        .map_err(|_| invalid(key, value, &format!("{K} comma-separated integers")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>> {
    match value {
        "auto" => Ok(None),
        "inf" => Ok(Some(f64::INFINITY)),
        _ => parse_num(key, value, "a number or `auto`").map(Some),
    }
}

fn parse_act(key: &str, value: &str) -> Result<Activation> {
    Activation::parse(value).ok_or_else(|| invalid(key, value, "relu|tanh|sigmoid|identity"))
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || PathBuf::from(value);
        match key {
            "work_dir" => self.work_dir = path(),
            "flows" => self.flows = path(),
            "externals" => self.externals = Some(path()),
            "transitions" => self.transitions = Some(path()),
            "trips" => self.trips = Some(path()),
            "regions" => self.regions = Some(path()),
            "membership" => self.membership = Some(path()),
            "start" => self.start = Some(parse_timestamp(value).ok_or_else(|| invalid(key, value, "a timestamp"))?),
            "interval_secs" => self.interval_secs = parse_num(key, value, "an integer")?,
            "slices" => {
                self.slices = match value {
                    "auto" => None,
                    _ => Some(parse_num(key, value, "an integer or `auto`")?),
                }
            }
            "graph" => self.graph = path(),
            "checkpoint" => self.checkpoint = path(),
            "predictions" => self.predictions = path(),
            "report_dir" => self.report_dir = path(),
            "views" => self.views.lengths = parse_list::<5>(key, value)?,
            "periods" => self.views.periods = parse_list::<4>(key, value)?,
            "horizon" => self.horizon = parse_num(key, value, "an integer")?,
            "scaler_range" => {
                self.scaler_range = ScaleRange::parse(value).ok_or_else(|| invalid(key, value, "-1,1 or 0,1"))?
            }
            "weather_vocab" => self.weather_vocab = parse_num(key, value, "an integer")?,
            "alpha" => self.graph_options.alpha = parse_num(key, value, "an integer")?,
            "beta" => self.graph_options.beta = parse_num(key, value, "a number")?,
            "theta" => self.graph_options.theta = parse_auto(key, value)?,
            "kappa" => self.graph_options.kappa = parse_auto(key, value)?,
            "metric" => {
                self.graph_options.metric = match value {
                    "haversine" => Metric::Haversine,
                    "euclidean" => Metric::Euclidean,
                    _ => return Err(invalid(key, value, "haversine or euclidean")),
                }
            }
            "sudden_fraction" => self.sudden_fraction = parse_num(key, value, "a number")?,
            "hidden" => self.model.hidden = parse_num(key, value, "an integer")?,
            "residual_units" => self.model.residual_units = parse_num(key, value, "an integer")?,
            "residual" => self.model.residual = parse_bool(key, value)?,
            "hidden_act" => self.model.hidden_act = parse_act(key, value)?,
            "output_act" => self.model.output_act = parse_act(key, value)?,
            "embed_width" => self.model.embed_width = parse_num(key, value, "an integer")?,
            "use_external" => self.model.use_external = parse_bool(key, value)?,
            "use_meta" => self.model.use_meta = parse_bool(key, value)?,
            "postnet" => self.model.postnet = PostNet::parse(value).ok_or_else(|| invalid(key, value, "none or linear"))?,
            "delta" => self.model.delta = parse_num(key, value, "a number")?,
            "lr" => self.model.lr = parse_num(key, value, "a number")?,
            "batch_size" => self.model.batch_size = parse_num(key, value, "an integer")?,
            "max_epochs" => self.model.max_epochs = parse_num(key, value, "an integer")?,
            "patience" => self.model.patience = parse_num(key, value, "an integer")?,
            "seed" => self.model.seed = parse_num(key, value, "an integer")?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        for (key, _) in CONFIG_KEYS {
            if let Some(v) = env(&format!("{ENV_PREFIX}{}", key.to_uppercase())) {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or only defaults when `None`) with process-environment
    /// overrides. Relative paths resolve against the file's directory unless
    /// `work_dir` says otherwise.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => {
                let body = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                format!("work_dir = {}\n{body}", dir.display())
            }
            None => String::new(),
        };
        Self::parse(&text, |k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.views.validate().map_err(wrap)?;
        self.model.validate().map_err(wrap)?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.interval_secs <= 0 {
            return Err(Error::Config("interval_secs must be positive".into()));
        }
        if self.weather_vocab == 0 {
            return Err(Error::Config("weather_vocab must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sudden_fraction) {
            return Err(Error::Config("sudden_fraction must lie in [0, 1]".into()));
        }
        if !(self.graph_options.beta >= 0.0) {
            return Err(Error::Config("beta must be nonnegative".into()));
        }
        Ok(())
    }

    /// `p` joined onto the working directory unless absolute.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.work_dir.join(p)
        }
    }

    pub fn help_text() -> String {
        let mut s = String::from("config keys (file lines `key = value`, env overrides MVGCN_<KEY>):\n");
        for (k, d) in CONFIG_KEYS {
            s += &format!("  {k:<16} {d}\n");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env() {
        let text = "# run\nviews = 2,1,0,0,0\nlr=0.01\nresidual = false # plain\n";
        let cfg = RunConfig::parse(text, |k| (k == "MVGCN_LR").then(|| "0.5".to_string())).unwrap();
        assert_eq!(cfg.views.lengths, [2, 1, 0, 0, 0]);
        assert_eq!(cfg.model.lr, 0.5);
        assert!(!cfg.model.residual);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in ["lr = fast", "nope = 1", "views = 1,2", "horizon = 0", "just a line", "views = 0,0,0,0,0"] {
            assert!(matches!(RunConfig::parse(text, |_| None), Err(Error::Config(_))), "{text}");
        }
        assert!(RunConfig::parse("", |k| (k == "MVGCN_SEED").then(|| "x".into())).is_err());
    }

    #[test]
    fn kernel_overrides() {
        let cfg = RunConfig::parse("theta = 0.5\nkappa = inf", |_| None).unwrap();
        assert_eq!(cfg.graph_options.theta, Some(0.5));
        assert_eq!(cfg.graph_options.kappa, Some(f64::INFINITY));
        assert_eq!(RunConfig::parse("theta = auto", |_| None).unwrap().graph_options.theta, None);
    }
}
