//! The `nexfam` command line: instance generation, fitting, the connectivity
//! sweep, image segmentation, diagnostics and timing.
//!
//! Every run writes its outputs plus a `manifest.json` into `--out-dir`.
//! Text outputs point back at the manifest (a `#` comment line in CSV, PPM
//! and gnuplot files, a `manifest` field in JSON). Apart from the manifest's
//! timings and the bench table, outputs depend only on inputs and seed.

mod bench;
mod diag;
mod fit;
mod gen;
mod segment;
mod sweep;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use bench::BenchConfig;
pub use fit::FitConfig;
pub use gen::{GenConfig, ImageGenSpec, WeatherGenSpec};
pub use segment::SegmentConfig;
pub use sweep::{run_connectivity_sweep, SweepConfig, SweepPoint, SweepRun};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_NOTE: &str = "manifest: manifest.json";

#[derive(Debug, Parser)]
#[command(name = "nexfam", version, about = "Network Lasso for networked exponential families")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base random seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving all outputs (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance bundle from a generator config.
    Gen,
    /// Fit a bundle with the primal-dual solver or the RNC baseline.
    Fit {
        /// Bundle directory.
        bundle: PathBuf,
    },
    /// Sweep boundary sizes of the two-cluster model and record connectivity against NMSE.
    SweepConnectivity,
    /// Segment a PPM image by networked logistic regression.
    Segment {
        /// Input image (P3 or P6).
        image: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Diagnostic report for a bundle and partition.
    Diag {
        /// Bundle directory.
        bundle: PathBuf,
        /// Partition file; defaults to the bundle's own partition.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Time solver iterations on generated instances.
    Bench,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Fit { .. } => "fit",
            Command::SweepConnectivity => "sweep-connectivity",
            Command::Segment { .. } => "segment",
            Command::Diag { .. } => "diag",
            Command::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub timings: Vec<PhaseTiming>,
}

/// `v<package version>`, with `-g<commit>` appended when built from a git checkout.
pub fn version_string() -> String {
    match option_env!("NEXFAM_GIT_REV") {
        Some(rev) if !rev.is_empty() => format!("v{}-g{rev}", env!("CARGO_PKG_VERSION")),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Output directory plus the manifest being assembled for one run.
pub(crate) struct Run {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn new(out_dir: &Path, subcommand: &str) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                version: version_string(),
                seed: 0,
                config: serde_json::Value::Null,
                outputs: Vec::new(),
                timings: Vec::new(),
            },
        })
    }

    pub(crate) fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.manifest.seed = seed;
    }

    pub(crate) fn set_config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.manifest.config = serde_json::to_value(config).map_err(|source| Error::Json {
            context: "config echo".into(),
            source,
        })?;
        Ok(())
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub(crate) fn phase<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.manifest.timings.push(PhaseTiming {
            phase: phase.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub(crate) fn note_output(&mut self, name: &str) {
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
    }

    pub(crate) fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.note_output(name);
        Ok(())
    }

    /// CSV (or gnuplot) text, prefixed with a comment naming the manifest.
    pub(crate) fn write_commented(&mut self, name: &str, body: &str) -> Result<()> {
        self.write_bytes(name, format!("# {MANIFEST_NOTE}\n{body}").as_bytes())
    }

    /// Pretty JSON object with a `manifest` field added.
    pub(crate) fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(|source| Error::Json {
            context: name.to_string(),
            source,
        })?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("manifest".into(), MANIFEST_FILE.into());
        }
        self.write_bytes(name, (to_pretty(&v, name)? + "\n").as_bytes())
    }

    pub(crate) fn write_ppm(&mut self, name: &str, img: &crate::datagen::RgbImage) -> Result<()> {
        self.write_bytes(name, &crate::datagen::encode_ppm(img, Some(MANIFEST_NOTE)))
    }

    fn finish(self) -> Result<RunManifest> {
        let path = self.out_dir.join(MANIFEST_FILE);
        let text = to_pretty(&self.manifest, MANIFEST_FILE)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(self.manifest)
    }
}

fn to_pretty<T: Serialize>(value: &T, what: &str) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: what.to_string(),
        source,
    })
}

/// Reads a JSON config; `None` yields the type's default.
pub(crate) fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => parse_config(&crate::bundle::read_text(p)?, &p.display().to_string()),
    }
}

/// Parses JSON config text; errors carry the line, column and offending field.
pub fn parse_config<T: DeserializeOwned>(text: &str, src: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        context: src.to_string(),
        source,
    })
}

/// Appends one CSV row of displayable fields.
pub(crate) fn csv_line(out: &mut String, fields: &[&dyn std::fmt::Display]) {
    for (k, f) in fields.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write!(out, "{f}").expect("writing to a String");
    }
    out.push('\n');
}

/// Parses `args` (program name first) and runs the selected subcommand.
pub fn run_from<I, T>(args: I) -> Result<RunManifest>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::invalid(e.to_string()))?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<RunManifest> {
    match cli.global.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(&cli)),
        None => dispatch(&cli),
    }
}

fn dispatch(cli: &Cli) -> Result<RunManifest> {
    let g = &cli.global;
    let mut run = Run::new(&g.out_dir, cli.command.name())?;
    let config = g.config.as_deref();
    match &cli.command {
        Command::Gen => gen::cmd_gen(&mut run, config, g.seed)?,
        Command::Fit { bundle } => fit::cmd_fit(&mut run, bundle, config)?,
        Command::SweepConnectivity => sweep::cmd_sweep(&mut run, config, g.seed)?,
        Command::Segment {
            image,
            lambda,
            iterations,
        } => segment::cmd_segment(&mut run, image, config, *lambda, *iterations)?,
        Command::Diag { bundle, partition } => diag::cmd_diag(&mut run, bundle, partition.as_deref(), config, g.seed)?,
        Command::Bench => bench::cmd_bench(&mut run, config, g.seed)?,
    }
    run.finish()
}
