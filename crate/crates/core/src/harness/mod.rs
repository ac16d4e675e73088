//! Synthetic data, run configuration, heatmap export and the pipeline steps
//! behind each CLI command.

mod config;
mod export;
pub mod pipeline;
mod synth;

pub use config::{RunConfig, CONFIG_KEYS, ENV_PREFIX};
pub use export::{export_heatmap, update_manifest, write_heatmap, HeatmapRow, MANIFEST};
pub use synth::{
    synth_generate, synth_graph_options, synth_start, SynthConfig, SynthOutput, WEATHER_CLEAR, WEATHER_CLOUDY,
    WEATHER_RAIN, WEATHER_STORM, WEATHER_VOCAB,
};
