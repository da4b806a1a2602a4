//! Run configuration: TOML file merged over defaults, then command-line flags
//! merged over that.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use gut_core::objective::{CandidateGrid, PurityKind};
use gut_core::projection::{GridSpec, SamplingRatio, TrainConfig};
use gut_core::synth::SynthParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "gut-out";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub inputs: InputsSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub candidates: CandidatesSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSection {
    pub constructs: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub name_embeddings: Option<PathBuf>,
    pub definition_embeddings: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n: Option<usize>,
    pub clusters: Option<usize>,
    pub dim: Option<usize>,
    pub noise: Option<f64>,
    pub distractor_dim: Option<usize>,
    pub relations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub margin: Option<f64>,
    pub delta: Option<f64>,
    pub output_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub step_size: Option<f64>,
    pub sampling_ratio: Option<SamplingRatio>,
    pub grid: Option<GridSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub output_dims: Option<Vec<usize>>,
    pub margins: Option<Vec<f64>>,
    pub deltas: Option<Vec<f64>>,
    pub epochs: Option<Vec<usize>>,
    pub repeats: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesSection {
    pub taus: Option<Vec<f64>>,
    pub agglomerative_k: Option<Vec<usize>>,
    pub agglomerative_distance: Option<Vec<f64>>,
    pub spectral_k: Option<Vec<usize>>,
    pub leiden_resolution: Option<Vec<f64>>,
    pub significant_only: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub alpha_step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub alpha: Option<f64>,
    pub purity: Option<PurityKind>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub artifact: Option<PathBuf>,
    pub addr: Option<SocketAddr>,
    pub allow_origin: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

/// Input file locations. Unset inputs default to the files `gut synth`
/// writes into the output directory.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub constructs: PathBuf,
    pub relations: PathBuf,
    pub gold: PathBuf,
    pub name_embeddings: PathBuf,
    pub definition_embeddings: PathBuf,
    /// Whether the relations path was given explicitly (a default path may be absent).
    pub relations_explicit: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSettings {
    pub n: usize,
    pub clusters: usize,
    pub dim: usize,
    pub noise: f64,
    pub distractor_dim: usize,
    pub relations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSettings {
    pub base: TrainConfig,
    pub grid: Option<GridSpec>,
    pub repeats: usize,
}

#[derive(Debug, Clone)]
pub struct ServeSettings {
    pub artifact: PathBuf,
    pub addr: SocketAddr,
    pub allow_origin: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

/// Fully resolved settings for one invocation. Serializes to the settings
/// that determine results; locations and thread counts are left out.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip)]
    pub jobs: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub inputs: Inputs,
    pub synth: SynthSettings,
    pub split: (f64, f64, f64),
    pub train: TrainSettings,
    pub candidates: CandidateGrid,
    pub significant_only: bool,
    pub alpha_step: f64,
    pub eval_alpha: f64,
    pub eval_purity: PurityKind,
    #[serde(skip)]
    pub serve: ServeSettings,
}

impl RunConfig {
    pub fn synth_params(&self) -> SynthParams {
        SynthParams {
            n: self.synth.n,
            clusters: self.synth.clusters,
            dim: self.synth.dim,
            noise: self.synth.noise,
            distractor_dim: self.synth.distractor_dim,
            relations: self.synth.relations,
            seed: self.seed,
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Default, Clone)]
pub struct GlobalFlags {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Merges defaults, the config file (if any) and the global flags. Relative
/// paths in the file are taken relative to the file's directory.
pub fn resolve(flags: &GlobalFlags) -> Result<RunConfig, CliError> {
    let (file, base) = match &flags.config {
        Some(path) => (
            read_file_config(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (FileConfig::default(), PathBuf::new()),
    };
    let rebase = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

    let seed = flags.seed.or(file.seed).unwrap_or(0);
    let jobs = flags.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let out = match &flags.out {
        Some(o) => o.clone(),
        None => file.out.map(&rebase).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    };

    let i = file.inputs;
    let relations_explicit = i.relations.is_some();
    let inputs = Inputs {
        constructs: i.constructs.map(&rebase).unwrap_or_else(|| out.join("constructs.jsonl")),
        relations: i.relations.map(&rebase).unwrap_or_else(|| out.join("relations.csv")),
        gold: i.gold.map(&rebase).unwrap_or_else(|| out.join("gold.csv")),
        name_embeddings: i
            .name_embeddings
            .map(&rebase)
            .unwrap_or_else(|| out.join("embeddings").join("name.gutemb")),
        definition_embeddings: i
            .definition_embeddings
            .map(&rebase)
            .unwrap_or_else(|| out.join("embeddings").join("definition.gutemb")),
        relations_explicit,
    };

    let d = SynthParams::default();
    let s = file.synth;
    let synth = SynthSettings {
        n: s.n.unwrap_or(d.n),
        clusters: s.clusters.unwrap_or(d.clusters),
        dim: s.dim.unwrap_or(d.dim),
        noise: s.noise.unwrap_or(d.noise),
        distractor_dim: s.distractor_dim.unwrap_or(d.distractor_dim),
        relations: s.relations.or(d.relations),
    };

    let split = (
        file.split.train.unwrap_or(0.4),
        file.split.val.unwrap_or(0.2),
        file.split.test.unwrap_or(0.4),
    );

    let dt = TrainConfig::default();
    let t = file.train;
    let base = TrainConfig {
        margin: t.margin.unwrap_or(dt.margin),
        delta: t.delta.unwrap_or(dt.delta),
        output_dim: t.output_dim.unwrap_or(dt.output_dim),
        epochs: t.epochs.unwrap_or(dt.epochs),
        batch_size: t.batch_size.unwrap_or(dt.batch_size),
        step_size: t.step_size.unwrap_or(dt.step_size),
        sampling_ratio: t.sampling_ratio.unwrap_or(dt.sampling_ratio),
        seed,
    };
    let (grid, repeats) = match t.grid {
        Some(g) => {
            let repeats = g.repeats.unwrap_or(3);
            let spec = GridSpec {
                output_dims: g.output_dims.unwrap_or_else(|| vec![base.output_dim]),
                margins: g.margins.unwrap_or_else(|| vec![base.margin]),
                deltas: g.deltas.unwrap_or_else(|| vec![base.delta]),
                epochs: g.epochs.unwrap_or_else(|| vec![base.epochs]),
            };
            (Some(spec), repeats)
        }
        None => (None, 1),
    };

    let c = file.candidates;
    let candidates = CandidateGrid {
        taus: c.taus.unwrap_or_else(|| vec![0.5, 0.6, 0.7, 0.8]),
        agglomerative_k: c.agglomerative_k.unwrap_or_default(),
        agglomerative_distance: c
            .agglomerative_distance
            .unwrap_or_else(|| (1..=10).map(|i| i as f64 / 10.0).collect()),
        spectral_k: c.spectral_k.unwrap_or_default(),
        leiden_resolution: c
            .leiden_resolution
            .unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]),
        seed,
    };

    let serve = ServeSettings {
        artifact: file
            .serve
            .artifact
            .map(&rebase)
            .unwrap_or_else(|| out.join("sweep.json")),
        addr: file.serve.addr.unwrap_or_else(|| "127.0.0.1:8080".parse().expect("literal")),
        allow_origin: file.serve.allow_origin,
        ui_dir: file.serve.ui_dir.map(&rebase),
    };

    Ok(RunConfig {
        seed,
        jobs,
        out,
        inputs,
        synth,
        split,
        train: TrainSettings { base, grid, repeats },
        candidates,
        significant_only: c.significant_only.unwrap_or(true),
        alpha_step: file.sweep.alpha_step.unwrap_or(0.05),
        eval_alpha: file.evaluate.alpha.unwrap_or(0.6),
        eval_purity: file.evaluate.purity.unwrap_or(PurityKind::Construct),
        serve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("gut.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn defaults() {
        let c = resolve(&GlobalFlags::default()).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.out, PathBuf::from(DEFAULT_OUT));
        assert_eq!(c.inputs.constructs, PathBuf::from("gut-out/constructs.jsonl"));
        assert_eq!(c.train.base, TrainConfig::default());
        assert_eq!(c.alpha_step, 0.05);
        assert!(c.train.grid.is_none());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "seed = 4\nout = \"run\"\n[train]\nepochs = 5\n[inputs]\ngold = \"data/gold.csv\"\n",
        );
        let flags = GlobalFlags {
            config: Some(path.clone()),
            seed: Some(9),
            ..Default::default()
        };
        let c = resolve(&flags).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.train.base.seed, 9);
        assert_eq!(c.candidates.seed, 9);
        assert_eq!(c.train.base.epochs, 5);
        assert_eq!(c.out, dir.path().join("run"));
        assert_eq!(c.inputs.gold, dir.path().join("data/gold.csv"));
        assert_eq!(c.inputs.constructs, dir.path().join("run/constructs.jsonl"));

        let c = resolve(&GlobalFlags { config: Some(path), ..Default::default() }).unwrap();
        assert_eq!(c.seed, 4);
    }

    #[test]
    fn grid_fills_from_base() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "[train]\nmargin = 0.3\n[train.grid]\noutput_dims = [16, 32]\n");
        let c = resolve(&GlobalFlags { config: Some(path), ..Default::default() }).unwrap();
        let g = c.train.grid.unwrap();
        assert_eq!(g.output_dims, vec![16, 32]);
        assert_eq!(g.margins, vec![0.3]);
        assert_eq!(c.train.repeats, 3);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "[train]\nepoch = 5\n");
        let err = resolve(&GlobalFlags { config: Some(path), ..Default::default() }).unwrap_err();
        assert!(matches!(err, CliError::Usage(ref m) if m.contains("epoch")), "{err:?}");
        let err = resolve(&GlobalFlags { jobs: Some(0), ..Default::default() }).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }
}
