use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{load_config, Run, MANIFEST_FILE};
use crate::bundle::{read_text, Bundle};
use crate::datagen::{
    gen_chain_signal, gen_two_cluster, image_to_instance, mask_image, parse_weather_csv, read_ppm, red_square_image,
    synthetic_weather, weather_instance, ChainSpec, RgbImage, TwoClusterSpec,
};
use crate::error::{Error, Result};
use crate::family::AnyModel;
use crate::training::TrainingSet;

/// Generator selected by the `kind` field of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenConfig {
    TwoCluster(TwoClusterSpec),
    Chain(ChainSpec),
    Weather(WeatherGenSpec),
    Image(ImageGenSpec),
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::TwoCluster(TwoClusterSpec::default())
    }
}

impl GenConfig {
    fn set_seed(&mut self, seed: u64) {
        match self {
            GenConfig::TwoCluster(s) => s.seed = seed,
            GenConfig::Chain(s) => s.seed = seed,
            GenConfig::Weather(s) => s.seed = seed,
            GenConfig::Image(s) => s.seed = seed,
        }
    }

    fn seed(&self) -> u64 {
        match self {
            GenConfig::TwoCluster(s) => s.seed,
            GenConfig::Chain(s) => s.seed,
            GenConfig::Weather(s) => s.seed,
            GenConfig::Image(s) => s.seed,
        }
    }
}

/// Station regression on the `k`-NN graph. Reads `csv` when given, otherwise
/// draws a synthetic table of `stations` x `days`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherGenSpec {
    pub csv: Option<PathBuf>,
    pub stations: usize,
    pub days: usize,
    pub k: usize,
    /// 0-based day to regress; the last day when absent.
    pub day: Option<usize>,
    /// Number of stations whose label is in the training set; half when absent.
    pub labelled: Option<usize>,
    pub seed: u64,
}

impl Default for WeatherGenSpec {
    fn default() -> Self {
        Self {
            csv: None,
            stations: 30,
            days: 30,
            k: 3,
            day: None,
            labelled: None,
            seed: 0,
        }
    }
}

/// Segmentation instance from `ppm`, or a noisy red square on blue when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageGenSpec {
    pub ppm: Option<PathBuf>,
    pub size: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ImageGenSpec {
    fn default() -> Self {
        Self {
            ppm: None,
            size: 32,
            noise: 0.1,
            seed: 0,
        }
    }
}

pub(super) fn cmd_gen(run: &mut Run, config: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut cfg: GenConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    run.set_seed(cfg.seed());
    run.set_config(&cfg)?;
    let (bundle, extras) = run.phase("generate", || generate(&cfg))?;
    for extra in &extras {
        match extra {
            Extra::Image(name, img) => run.write_ppm(name, img)?,
            Extra::Csv(name, text) => run.write_commented(name, text)?,
        }
    }
    let dir = run.out_dir().to_path_buf();
    let written = run.phase("write", || bundle.write_annotated(&dir, Some(MANIFEST_FILE)))?;
    for name in written {
        run.note_output(&name);
    }
    Ok(())
}

/// Generated data written next to the bundle.
enum Extra {
    Image(&'static str, RgbImage),
    Csv(&'static str, String),
}

fn generate(cfg: &GenConfig) -> Result<(Bundle, Vec<Extra>)> {
    match cfg {
        GenConfig::TwoCluster(spec) => {
            let inst = gen_two_cluster(spec)?;
            Ok((
                Bundle {
                    graph: inst.graph,
                    model: AnyModel::Gaussian(inst.model),
                    training: inst.training,
                    truth: Some(inst.truth),
                    partition: Some(inst.partition),
                },
                Vec::new(),
            ))
        }
        GenConfig::Chain(spec) => {
            let inst = gen_chain_signal(spec)?;
            Ok((
                Bundle {
                    graph: inst.graph,
                    model: AnyModel::Gaussian(inst.model.into_gaussian()),
                    training: inst.training,
                    truth: Some(inst.truth),
                    partition: Some(inst.partition),
                },
                Vec::new(),
            ))
        }
        GenConfig::Weather(spec) => {
            let mut extras = Vec::new();
            let table = match &spec.csv {
                Some(path) => parse_weather_csv(&read_text(path)?, &path.display().to_string())?,
                None => {
                    let table = synthetic_weather(spec.stations, spec.days, spec.seed)?;
                    extras.push(Extra::Csv("weather.csv", table.to_csv()));
                    table
                }
            };
            let n = table.stations.len();
            let day = spec.day.unwrap_or(table.days().saturating_sub(1));
            let inst = weather_instance(&table, spec.k, day).map_err(|e| Error::Config(format!("weather: {e}")))?;
            let labelled = spec.labelled.unwrap_or(n / 2);
            if labelled == 0 || labelled > n {
                return Err(Error::Config(format!("weather: labelled must lie in 1..={n}, got {labelled}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let training = TrainingSet::new(n, index::sample(&mut rng, n, labelled).into_vec())?;
            Ok((
                Bundle {
                    graph: inst.graph,
                    model: AnyModel::Gaussian(inst.model),
                    training,
                    truth: None,
                    partition: None,
                },
                extras,
            ))
        }
        GenConfig::Image(spec) => {
            let mut extras = Vec::new();
            let img = match &spec.ppm {
                Some(path) => read_ppm(path)?,
                None => {
                    let synth = red_square_image(spec.size, spec.noise, spec.seed)?;
                    extras.push(Extra::Image("truth_mask.ppm", mask_image(spec.size, spec.size, &synth.mask)?));
                    synth.image
                }
            };
            let inst = image_to_instance(&img)?;
            extras.insert(0, Extra::Image("image.ppm", img));
            Ok((
                Bundle {
                    graph: inst.graph,
                    model: AnyModel::Logistic(inst.model),
                    training: inst.training,
                    truth: None,
                    partition: None,
                },
                extras,
            ))
        }
    }
}
