//! Command-line flags. Every struct is serialisable so manifests can record it.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hypergcd::datagen::TreeSpec;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hypergcd",
    version,
    about = "Synthetic category-discovery experiments in hyperbolic space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a hierarchical dataset with a seen/unseen split.
    Synth(SynthArgs),
    /// Cluster an embedding file.
    Cluster(ClusterArgs),
    /// Score assignments against ground truth.
    Eval(EvalArgs),
    /// Train free embeddings with the hyperbolic contrastive loss.
    ToyTrain(ToyTrainArgs),
    /// Run a space x clipping x variant grid over paired seeds.
    Ablate(AblateArgs),
    /// Rerun the command recorded in a manifest and compare output digests.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Cluster(_) => "cluster",
            Command::Eval(_) => "eval",
            Command::ToyTrain(_) => "toy-train",
            Command::Ablate(_) => "ablate",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TreeArgs {
    /// Tree depth; defaults to the length of --branching, or 2.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Children per node, one value for every level or one per level.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub branching: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    pub points_per_leaf: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Step scale from parent to child mean, one per level, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    pub dispersion: Vec<f64>,
    /// Sample scale around leaf means.
    #[arg(long)]
    pub sample_dispersion: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub old_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub labeled_fraction: f64,
}

impl TreeArgs {
    pub fn spec(&self, seed: u64) -> Result<TreeSpec> {
        let depth = match (self.depth, self.branching.len()) {
            (Some(d), _) => d,
            (None, 1) => 2,
            (None, n) => n,
        };
        let branching = match self.branching.len() {
            1 => vec![self.branching[0]; depth],
            n if n == depth => self.branching.clone(),
            n => {
                return Err(CliError::Config(format!(
                    "--branching has {n} values for depth {depth}"
                )))
            }
        };
        let mut spec = TreeSpec::uniform(depth, 2, self.points_per_leaf, self.dim);
        spec.branching = branching;
        if !self.dispersion.is_empty() {
            spec.dispersion = self.dispersion.clone();
        }
        if let Some(s) = self.sample_dispersion {
            spec.sample_dispersion = s;
        }
        spec.seed = seed;
        spec.old_fraction = self.old_fraction;
        spec.labeled_fraction = self.labeled_fraction;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Assignments file; the trace and manifest are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = ["euclidean", "lorentz", "poincare"])]
    pub space: String,
    /// Positive kappa of a hyperbolic space (0.05 if omitted).
    #[arg(long)]
    pub curvature: Option<f64>,
    /// Clip radius before the exponential map of Euclidean inputs (2.3 if omitted, `inf` disables).
    #[arg(long)]
    pub clip: Option<f64>,
    /// Number of clusters; defaults to the class count in the file.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub semi_supervised: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restarts; defaults to 10, or 1 with --semi-supervised.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Leave empty clusters empty instead of reseeding them.
    #[arg(long)]
    pub no_reseed: bool,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub assignments: PathBuf,
    /// Embedding file carrying labels and the split.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also report homogeneity at every hierarchy level.
    #[arg(long)]
    pub levels: bool,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0.07)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.35)]
    pub lambda: f64,
    /// Positive kappa of the hyperboloid.
    #[arg(long, default_value_t = 0.05)]
    pub curvature: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    /// Standard deviation of the view jitter.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    /// Samples per step; full batch when omitted.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToyTrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Clip radius, or `inf` to train without clipping.
    #[arg(long, default_value_t = 2.3)]
    pub clip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Seeds as `a..b` or a comma list.
    #[arg(long, default_value = "0..20")]
    pub seeds: String,
    #[arg(long, value_delimiter = ',', default_value = "euclidean,lorentz")]
    pub spaces: Vec<String>,
    /// Clip radii; `inf` is the no-clipping arm.
    #[arg(long, value_delimiter = ',', default_value = "2.3,inf")]
    pub clips: Vec<f64>,
    /// K-Means variants: `semi` and/or `unsupervised`.
    #[arg(long, value_delimiter = ',', default_value = "semi")]
    pub variants: Vec<String>,
    /// Restarts of the unsupervised variant.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write the rerun's outputs here instead of over the originals.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parses `a..b` (half open) or `s1,s2,...`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Config(format!("invalid seed list '{s}'"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse() {
        assert_eq!(parse_seeds("2..5").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7,1").unwrap(), vec![7, 1]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn branching_expands_to_depth() {
        let cli = Cli::try_parse_from(["hypergcd", "synth", "--depth", "3", "--out", "x"]).unwrap();
        let Command::Synth(a) = cli.command else { panic!() };
        assert_eq!(a.tree.spec(0).unwrap().branching, vec![3, 3, 3]);
        let cli = Cli::try_parse_from(["hypergcd", "synth", "--branching", "2,4", "--out", "x"]).unwrap();
        let Command::Synth(a) = cli.command else { panic!() };
        assert_eq!(a.tree.spec(0).unwrap().branching, vec![2, 4]);
    }
}
