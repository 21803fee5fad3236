//! Paired-seed grid over clustering space, clip radius and K-Means variant.
//!
//! Every seed generates its own tree, trains once per clip radius, and then
//! clusters the same trained vectors in every space, so per-seed differences
//! between spaces are paired. The Euclidean arm clusters the trained vectors
//! directly; hyperbolic arms clip and exp-map them first.

use std::time::Instant;

use hypergcd::clustering::{make_space, KMeansConfig, SpaceModel};
use hypergcd::datagen::generate_tree;
use hypergcd::geometry::Curvature;
use rayon::prelude::*;
use serde::Serialize;

use super::{cluster_file, evaluate_file, level_scores, opt, train_config, train_file, write_table};
use crate::args::{parse_seeds, AblateArgs};
use crate::error::{CliError, Result};
use crate::format::EmbeddingFile;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Semi,
    Unsupervised,
}

impl Variant {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "semi" => Ok(Variant::Semi),
            "unsupervised" => Ok(Variant::Unsupervised),
            o => Err(CliError::Config(format!("unknown variant '{o}'"))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Variant::Semi => "semi",
            Variant::Unsupervised => "unsupervised",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    seed: u64,
    clip: f64,
    space: SpaceModel,
    variant: Variant,
    /// `Err` holds the failure message of a cell that could not run.
    scores: std::result::Result<Scores, String>,
}

#[derive(Debug, Clone, PartialEq)]
struct Scores {
    acc_all: f64,
    acc_old: Option<f64>,
    acc_new: Option<f64>,
    homogeneity: f64,
    homogeneity_coarse: f64,
    largest_cluster_fraction: f64,
    initial_loss: f64,
    final_loss: f64,
}

#[derive(Debug, Serialize)]
struct CellSummary {
    clip: f64,
    space: String,
    variant: &'static str,
    runs: usize,
    failures: usize,
    mean_acc_all: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_acc_old: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_acc_new: Option<f64>,
    mean_homogeneity_coarse: f64,
    mean_largest_cluster_fraction: f64,
}

/// Hyperbolic arm minus Euclidean arm on the same seeds.
#[derive(Debug, Serialize)]
struct PairedDelta {
    clip: f64,
    variant: &'static str,
    space: String,
    baseline: String,
    pairs: usize,
    /// Seeds where the hyperbolic arm's All accuracy is at least the baseline's.
    at_least_baseline: usize,
    at_least_baseline_fraction: f64,
    mean_delta_acc_all: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_delta_acc_old: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_delta_acc_new: Option<f64>,
    mean_delta_homogeneity_coarse: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    cells: Vec<CellSummary>,
    paired: Vec<PairedDelta>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn run_seed(
    a: &AblateArgs,
    seed: u64,
    spaces: &[SpaceModel],
    variants: &[Variant],
    k: Curvature,
) -> Result<Vec<Cell>> {
    let data = generate_tree(&a.tree.spec(seed)?)?;
    let file = EmbeddingFile::from_synthetic(&data);
    let classes = file.num_classes();
    let mut cells = Vec::new();
    for &clip in &a.clips {
        let cfg = train_config(&a.train, clip, seed)?;
        let trained = train_file(&file, &cfg);
        for &space in spaces {
            for &variant in variants {
                let scores = match &trained {
                    Err(e) => Err(e.to_string()),
                    Ok((t, trace)) => score(t, trace, space, variant, clip, seed, classes, a.restarts, k)
                        .map_err(|e| e.to_string()),
                };
                cells.push(Cell {
                    seed,
                    clip,
                    space,
                    variant,
                    scores,
                });
            }
        }
    }
    Ok(cells)
}

#[allow(clippy::too_many_arguments)]
fn score(
    file: &EmbeddingFile,
    trace: &[hypergcd::losses::TraceRow],
    space: SpaceModel,
    variant: Variant,
    clip: f64,
    seed: u64,
    classes: usize,
    restarts: usize,
    k: Curvature,
) -> Result<Scores> {
    let handle = make_space(space, space.is_hyperbolic().then_some(k))?;
    let cfg = match variant {
        Variant::Semi => KMeansConfig::semi_supervised(classes).with_seed(seed),
        Variant::Unsupervised => KMeansConfig::new(classes).with_seed(seed).with_restarts(restarts),
    };
    let out = cluster_file(file, handle, clip, variant == Variant::Semi, &cfg)?;
    let levels = level_scores(file, &out.assignments)?;
    let r = evaluate_file(file, out.assignments)?;
    Ok(Scores {
        acc_all: r.acc_all,
        acc_old: r.acc_old,
        acc_new: r.acc_new,
        homogeneity: r.homogeneity,
        homogeneity_coarse: levels.first().map_or(r.homogeneity, |l| l.homogeneity),
        largest_cluster_fraction: out.largest_cluster_fraction,
        initial_loss: trace.first().map_or(f64::NAN, |t| t.total),
        final_loss: trace.last().map_or(f64::NAN, |t| t.total),
    })
}

fn summarise(cells: &[Cell], a: &AblateArgs, spaces: &[SpaceModel], variants: &[Variant]) -> Summary {
    let ok = |clip: f64, space: SpaceModel, variant: Variant| -> Vec<(u64, &Scores)> {
        cells
            .iter()
            .filter(|c| c.clip.to_bits() == clip.to_bits() && c.space == space && c.variant == variant)
            .filter_map(|c| c.scores.as_ref().ok().map(|s| (c.seed, s)))
            .collect()
    };
    let mut summary = Summary {
        cells: Vec::new(),
        paired: Vec::new(),
    };
    for &clip in &a.clips {
        for &variant in variants {
            for &space in spaces {
                let runs = ok(clip, space, variant);
                let total = cells
                    .iter()
                    .filter(|c| c.clip.to_bits() == clip.to_bits() && c.space == space && c.variant == variant)
                    .count();
                summary.cells.push(CellSummary {
                    clip,
                    space: space.to_string(),
                    variant: variant.as_str(),
                    runs: runs.len(),
                    failures: total - runs.len(),
                    mean_acc_all: mean(runs.iter().map(|r| r.1.acc_all)).unwrap_or(f64::NAN),
                    mean_acc_old: mean(runs.iter().filter_map(|r| r.1.acc_old)),
                    mean_acc_new: mean(runs.iter().filter_map(|r| r.1.acc_new)),
                    mean_homogeneity_coarse: mean(runs.iter().map(|r| r.1.homogeneity_coarse))
                        .unwrap_or(f64::NAN),
                    mean_largest_cluster_fraction: mean(runs.iter().map(|r| r.1.largest_cluster_fraction))
                        .unwrap_or(f64::NAN),
                });
            }
            if !spaces.contains(&SpaceModel::Euclidean) {
                continue;
            }
            let base = ok(clip, SpaceModel::Euclidean, variant);
            for &space in spaces.iter().filter(|s| s.is_hyperbolic()) {
                let pairs: Vec<(&Scores, &Scores)> = ok(clip, space, variant)
                    .into_iter()
                    .filter_map(|(seed, h)| base.iter().find(|b| b.0 == seed).map(|b| (h, b.1)))
                    .collect();
                let n = pairs.len();
                let wins = pairs.iter().filter(|(h, e)| h.acc_all >= e.acc_all).count();
                let delta = |f: fn(&Scores) -> Option<f64>| {
                    mean(pairs.iter().filter_map(|(h, e)| Some(f(h)? - f(e)?)))
                };
                summary.paired.push(PairedDelta {
                    clip,
                    variant: variant.as_str(),
                    space: space.to_string(),
                    baseline: SpaceModel::Euclidean.to_string(),
                    pairs: n,
                    at_least_baseline: wins,
                    at_least_baseline_fraction: if n > 0 { wins as f64 / n as f64 } else { f64::NAN },
                    mean_delta_acc_all: delta(|s| Some(s.acc_all)).unwrap_or(f64::NAN),
                    mean_delta_acc_old: delta(|s| s.acc_old),
                    mean_delta_acc_new: delta(|s| s.acc_new),
                    mean_delta_homogeneity_coarse: delta(|s| Some(s.homogeneity_coarse))
                        .unwrap_or(f64::NAN),
                });
            }
        }
    }
    summary
}

const COLUMNS: [&str; 14] = [
    "seed",
    "clip",
    "space",
    "variant",
    "status",
    "acc_all",
    "acc_old",
    "acc_new",
    "homogeneity",
    "homogeneity_coarse",
    "largest_cluster_fraction",
    "initial_loss",
    "final_loss",
    "error",
];

fn table_row(c: &Cell) -> Vec<String> {
    let mut row = vec![
        c.seed.to_string(),
        format!("{:?}", c.clip),
        c.space.to_string(),
        c.variant.as_str().to_string(),
    ];
    match &c.scores {
        Ok(s) => {
            row.push("ok".into());
            row.extend([
                opt(Some(s.acc_all)),
                opt(s.acc_old),
                opt(s.acc_new),
                opt(Some(s.homogeneity)),
                opt(Some(s.homogeneity_coarse)),
                opt(Some(s.largest_cluster_fraction)),
                opt(Some(s.initial_loss)),
                opt(Some(s.final_loss)),
                "-".into(),
            ]);
        }
        Err(e) => {
            row.push("failed".into());
            row.extend(std::iter::repeat_n("-".to_string(), 8));
            row.push(e.replace(['\t', '\n'], " "));
        }
    }
    row
}

pub fn ablate(a: &AblateArgs, argv: &[String]) -> Result<()> {
    let t0 = Instant::now();
    let seeds = parse_seeds(&a.seeds)?;
    let spaces = a
        .spaces
        .iter()
        .map(|s| s.parse::<SpaceModel>().map_err(CliError::Config))
        .collect::<Result<Vec<_>>>()?;
    let variants = a.variants.iter().map(|v| Variant::parse(v)).collect::<Result<Vec<_>>>()?;
    if spaces.is_empty() || variants.is_empty() || a.clips.is_empty() {
        return Err(CliError::Config("spaces, clips and variants must be non-empty".into()));
    }
    let k = Curvature::new(a.train.curvature)?;
    // validate shared settings once so a bad flag fails before any work
    a.tree.spec(seeds[0])?;
    for &clip in &a.clips {
        train_config(&a.train, clip, 0)?;
    }

    // seeds are independent; collecting keeps the output in seed order
    let cells: Vec<Cell> = seeds
        .par_iter()
        .map(|&s| run_seed(a, s, &spaces, &variants, k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let table = a.out_dir.join("ablation.tsv");
    write_table(&table, &COLUMNS, &cells.iter().map(table_row).collect::<Vec<_>>())?;
    let summary_path = a.out_dir.join("summary.toml");
    let summary = summarise(&cells, a, &spaces, &variants);
    let text = toml::to_string(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&summary_path, text).map_err(|e| CliError::io(&summary_path, e))?;

    let mut m = RunManifest::new("ablate", argv, a)?;
    m.seeds = seeds;
    m.output("table", &table)?;
    m.output("summary", &summary_path)?;
    m.diagnostic("cells", cells.len() as i64);
    m.diagnostic("failed_cells", cells.iter().filter(|c| c.scores.is_err()).count() as i64);
    m.wall_clock_seconds = t0.elapsed().as_secs_f64();
    m.write(&a.out_dir.join("ablation.manifest"))?;
    println!("{} cells written to {}", cells.len(), table.display());
    Ok(())
}
