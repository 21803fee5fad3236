//! Subcommand implementations.

mod ablate;
mod replay;

pub use ablate::ablate;
pub use replay::replay;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hypergcd::clustering::{
    kmeans, make_space, semi_supervised_kmeans, ClusteringResult, KMeansConfig, MetricSpace,
    SpaceHandle, SpaceModel,
};
use hypergcd::datagen::generate_tree;
use hypergcd::geometry::{
    clip_euclidean, exp_map_lorentz, lorentz_to_poincare, poincare_to_lorentz, Curvature,
    EuclideanVec, LorentzPoint, PoincarePoint,
};
use hypergcd::losses::{toy_train as train_embeddings, ToyTrainConfig, TraceRow};
use hypergcd::metrics::{evaluate, homogeneity, EvalInput, EvalReport};
use serde::Serialize;

use crate::args::{ClusterArgs, Command, EvalArgs, SynthArgs, ToyTrainArgs, TrainArgs};
use crate::error::{CliError, Result};
use crate::format::{
    read_assignments_path, read_embeddings_path, write_assignments_path, write_embeddings_path,
    Assignments, EmbeddingFile,
};
use crate::manifest::{manifest_path, sibling, RunManifest};

/// Operating curvature when a hyperbolic space is chosen without --curvature.
pub const DEFAULT_CURVATURE: f64 = 0.05;
/// Clip radius applied to Euclidean inputs of hyperbolic spaces by default.
pub const DEFAULT_CLIP: f64 = 2.3;

pub fn execute(command: &Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, argv),
        Command::Cluster(a) => cluster(a, argv),
        Command::Eval(a) => eval(a, argv),
        Command::ToyTrain(a) => toy_train(a, argv),
        Command::Ablate(a) => ablate(a, argv),
        Command::Replay(a) => replay(a),
    }
}

/// Where a command writes its manifest, if it writes one.
pub fn manifest_location(command: &Command) -> Option<PathBuf> {
    match command {
        Command::Synth(a) => Some(manifest_path(&a.out)),
        Command::Cluster(a) => Some(manifest_path(&a.out)),
        Command::Eval(a) => a.out.as_deref().map(manifest_path),
        Command::ToyTrain(a) => Some(manifest_path(&a.out)),
        Command::Ablate(a) => Some(a.out_dir.join("ablation.manifest")),
        Command::Replay(_) => None,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

/// Writes a tab-separated table.
pub(crate) fn write_table(path: &Path, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "{}", columns.join("\t")).map_err(io)?;
    for r in rows {
        writeln!(w, "{}", r.join("\t")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:?}"))
}

pub fn synth(a: &SynthArgs, argv: &[String]) -> Result<()> {
    let t0 = Instant::now();
    let spec = a.tree.spec(a.seed)?;
    let d = generate_tree(&spec)?;
    write_embeddings_path(&a.out, &EmbeddingFile::from_synthetic(&d))?;
    let mut m = RunManifest::new("synth", argv, a)?;
    m.seeds = vec![a.seed];
    m.output("embeddings", &a.out)?;
    m.diagnostic("points", d.len() as i64);
    m.diagnostic("classes", d.num_classes() as i64);
    m.diagnostic(
        "old_classes",
        d.split.is_old_class.iter().filter(|&&o| o).count() as i64,
    );
    m.diagnostic(
        "labeled_points",
        d.split.is_labeled.iter().filter(|&&l| l).count() as i64,
    );
    m.wall_clock_seconds = t0.elapsed().as_secs_f64();
    m.write(&manifest_path(&a.out))
}

/// Clustering outcome with the point type erased.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub assignments: Vec<usize>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
    pub reseeds: usize,
    pub sizes: Vec<usize>,
    pub largest_cluster_fraction: f64,
}

impl<P> From<ClusteringResult<P>> for ClusterOutcome {
    fn from(r: ClusteringResult<P>) -> Self {
        Self {
            sizes: r.cluster_sizes(),
            largest_cluster_fraction: r.largest_cluster_fraction(),
            assignments: r.assignments,
            objective_trace: r.objective_trace,
            iterations: r.iterations,
            converged: r.converged,
            restart: r.restart,
            reseeds: r.reseeds,
        }
    }
}

fn run_in<S: MetricSpace>(
    space: &S,
    points: Vec<S::Point>,
    file: &EmbeddingFile,
    semi: bool,
    cfg: &KMeansConfig,
) -> Result<ClusterOutcome> {
    Ok(if semi {
        semi_supervised_kmeans(&file.labeled_dataset(points)?, cfg, space)?.into()
    } else {
        kmeans(&points, cfg, space)?.into()
    })
}

/// Points of `file` embedded for `space`: Euclidean inputs are clipped and
/// exp-mapped, hyperbolic inputs are converted between models.
pub(crate) fn cluster_file(
    file: &EmbeddingFile,
    space: SpaceHandle,
    clip: f64,
    semi: bool,
    cfg: &KMeansConfig,
) -> Result<ClusterOutcome> {
    let vecs = file.vectors();
    let geometry = file.header.geometry;
    let lorentz = |k: Curvature| -> Result<Vec<LorentzPoint>> {
        vecs.iter()
            .map(|v| {
                Ok(match geometry {
                    SpaceModel::Euclidean => {
                        exp_map_lorentz(&clip_euclidean(&EuclideanVec::new(v.clone())?, clip), k)?
                    }
                    SpaceModel::Lorentz => LorentzPoint::from_ambient(v, k)?,
                    SpaceModel::PoincareViaKlein => poincare_to_lorentz(&PoincarePoint::new(v.clone(), k)?, k)?,
                })
            })
            .collect()
    };
    match space {
        SpaceHandle::Euclidean(s) => {
            if geometry.is_hyperbolic() {
                return Err(CliError::Config(format!(
                    "cannot cluster a {geometry} file in euclidean space"
                )));
            }
            let pts = vecs
                .into_iter()
                .map(EuclideanVec::new)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            run_in(&s, pts, file, semi, cfg)
        }
        SpaceHandle::Lorentz(s) => run_in(&s, lorentz(s.curvature)?, file, semi, cfg),
        SpaceHandle::PoincareViaKlein(s) => {
            let k = s.curvature;
            let pts = match geometry {
                SpaceModel::PoincareViaKlein => vecs
                    .into_iter()
                    .map(|v| PoincarePoint::new(v, k))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
                _ => lorentz(k)?.iter().map(|p| lorentz_to_poincare(p, k)).collect(),
            };
            run_in(&s, pts, file, semi, cfg)
        }
    }
}

/// Resolved clustering settings, as recorded in the manifest.
#[derive(Debug, Serialize)]
struct ClusterConfig<'a> {
    args: &'a ClusterArgs,
    k: usize,
    curvature: Option<f64>,
    clip: Option<f64>,
    restarts: usize,
    reseed_empty: bool,
}

pub fn cluster(a: &ClusterArgs, argv: &[String]) -> Result<()> {
    let t0 = Instant::now();
    let file = read_embeddings_path(&a.input)?;
    let model: SpaceModel = a.space.parse().map_err(CliError::Config)?;
    let geometry = file.header.geometry;
    if !model.is_hyperbolic() && (a.curvature.is_some() || a.clip.is_some()) {
        return Err(CliError::Config(
            "--curvature and --clip need a hyperbolic --space".into(),
        ));
    }
    if geometry.is_hyperbolic() && a.clip.is_some() {
        return Err(CliError::Config(format!(
            "--clip applies to euclidean inputs, but the file is {geometry}"
        )));
    }
    let kappa = match (model.is_hyperbolic(), file.header.curvature, a.curvature) {
        (false, _, _) => None,
        (true, Some(f), Some(c)) if f != c => {
            return Err(CliError::Config(format!(
                "--curvature {c} differs from the file's curvature {f}"
            )))
        }
        (true, Some(f), _) => Some(f),
        (true, None, c) => Some(c.unwrap_or(DEFAULT_CURVATURE)),
    };
    let clip = match (model.is_hyperbolic() && !geometry.is_hyperbolic(), a.clip) {
        (true, c) => Some(c.unwrap_or(DEFAULT_CLIP)),
        (false, _) => None,
    };
    if let Some(c) = clip {
        if c.is_nan() || c <= 0.0 {
            return Err(CliError::Config(format!("--clip must be positive, got {c}")));
        }
    }
    let k = match a.k {
        Some(k) => k,
        None => match file.num_classes() {
            0 => return Err(CliError::Config("--k is required when the file has no labels".into())),
            c => c,
        },
    };
    let mut cfg = if a.semi_supervised {
        KMeansConfig::semi_supervised(k)
    } else {
        KMeansConfig::new(k)
    };
    cfg.seed = a.seed;
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    cfg.reseed_empty = !a.no_reseed;
    cfg.max_iters = a.max_iters;
    cfg.tol_shift = a.tol;

    let space = make_space(model, kappa.map(Curvature::new).transpose()?)?;
    let out = cluster_file(&file, space, clip.unwrap_or(f64::INFINITY), a.semi_supervised, &cfg)?;

    write_assignments_path(
        &a.out,
        &Assignments {
            k,
            space: model,
            ids: file.rows.iter().map(|r| r.id).collect(),
            clusters: out.assignments.clone(),
        },
    )?;
    let trace = sibling(&a.out, "trace");
    let rows: Vec<Vec<String>> = out
        .objective_trace
        .iter()
        .enumerate()
        .map(|(i, o)| vec![(i + 1).to_string(), format!("{o:?}")])
        .collect();
    write_table(&trace, &["iteration", "objective"], &rows)?;

    let recorded = ClusterConfig {
        args: a,
        k,
        curvature: kappa,
        clip,
        restarts: cfg.restarts,
        reseed_empty: cfg.reseed_empty,
    };
    let mut m = RunManifest::new("cluster", argv, &recorded)?;
    m.seeds = vec![a.seed];
    m.input("embeddings", &a.input)?;
    m.output("assignments", &a.out)?;
    m.output("trace", &trace)?;
    m.diagnostic("largest_cluster_fraction", out.largest_cluster_fraction);
    m.diagnostic(
        "cluster_sizes",
        out.sizes.iter().map(|&s| s as i64).collect::<Vec<_>>(),
    );
    m.diagnostic("empty_clusters", out.sizes.iter().filter(|&&s| s == 0).count() as i64);
    m.diagnostic("iterations", out.iterations as i64);
    m.diagnostic("converged", out.converged);
    m.diagnostic("restart", out.restart as i64);
    m.diagnostic("reseeds", out.reseeds as i64);
    if let Some(o) = out.objective_trace.last() {
        m.diagnostic("final_objective", *o);
    }
    m.wall_clock_seconds = t0.elapsed().as_secs_f64();
    m.write(&manifest_path(&a.out))?;
    println!(
        "space = \"{model}\"\nk = {k}\nlargest_cluster_fraction = {:?}\niterations = {}",
        out.largest_cluster_fraction, out.iterations
    );
    Ok(())
}

/// Metrics restricted to the evaluation mask, plus coarse-to-fine homogeneity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalDocument {
    pub acc_all: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc_old: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc_new: Option<f64>,
    pub homogeneity: f64,
    pub n_eval: usize,
    pub n_old: usize,
    pub n_new: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelScore {
    /// 1 is the coarsest level.
    pub level: usize,
    pub classes: usize,
    pub homogeneity: f64,
}

pub(crate) fn truth_labels(file: &EmbeddingFile) -> Result<Vec<usize>> {
    file.rows
        .iter()
        .map(|r| {
            r.label
                .ok_or_else(|| CliError::Config(format!("row {} has no ground-truth label", r.id)))
        })
        .collect()
}

/// Homogeneity of masked points at each level of `file`.
pub(crate) fn level_scores(file: &EmbeddingFile, pred: &[usize]) -> Result<Vec<LevelScore>> {
    let mask = file.eval_mask();
    let pick = |v: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        v.zip(&mask).filter(|(_, &m)| m).map(|(x, _)| x).collect()
    };
    let p = pick(&mut pred.iter().copied());
    (0..file.header.levels)
        .map(|l| {
            let t = pick(&mut file.rows.iter().map(|r| r.levels[l]));
            let mut classes = t.clone();
            classes.sort_unstable();
            classes.dedup();
            Ok(LevelScore {
                level: l + 1,
                classes: classes.len(),
                homogeneity: homogeneity(&p, &t)?,
            })
        })
        .collect()
}

pub(crate) fn evaluate_file(file: &EmbeddingFile, pred: Vec<usize>) -> Result<EvalReport> {
    Ok(evaluate(&EvalInput::new(
        pred,
        truth_labels(file)?,
        file.old_mask(),
        file.eval_mask(),
    )?)?)
}

pub fn eval(a: &EvalArgs, argv: &[String]) -> Result<()> {
    let t0 = Instant::now();
    let asg = read_assignments_path(&a.assignments)?;
    let file = read_embeddings_path(&a.truth)?;
    let ids: Vec<u64> = file.rows.iter().map(|r| r.id).collect();
    if ids != asg.ids {
        return Err(CliError::Config(
            "assignment ids do not match the truth file rows".into(),
        ));
    }
    let levels = if a.levels {
        if file.header.levels == 0 {
            return Err(CliError::Config("--levels given but the truth file has no levels".into()));
        }
        level_scores(&file, &asg.clusters)?
    } else {
        Vec::new()
    };
    let r = evaluate_file(&file, asg.clusters)?;
    let doc = EvalDocument {
        acc_all: r.acc_all,
        acc_old: r.acc_old,
        acc_new: r.acc_new,
        homogeneity: r.homogeneity,
        n_eval: r.n_eval,
        n_old: r.n_old,
        n_new: r.n_new,
        levels,
    };
    let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    let Some(out) = &a.out else {
        print!("{text}");
        return Ok(());
    };
    std::fs::write(out, &text).map_err(|e| CliError::io(out, e))?;
    let mut m = RunManifest::new("eval", argv, a)?;
    m.input("assignments", &a.assignments)?;
    m.input("truth", &a.truth)?;
    m.output("report", out)?;
    if a.levels {
        let table = sibling(out, "levels.tsv");
        let rows: Vec<Vec<String>> = doc
            .levels
            .iter()
            .map(|l| vec![l.level.to_string(), l.classes.to_string(), format!("{:?}", l.homogeneity)])
            .collect();
        write_table(&table, &["level", "classes", "homogeneity"], &rows)?;
        m.output("levels", &table)?;
    }
    m.wall_clock_seconds = t0.elapsed().as_secs_f64();
    m.write(&manifest_path(out))
}

pub(crate) fn train_config(t: &TrainArgs, clip: f64, seed: u64) -> Result<ToyTrainConfig> {
    if clip.is_nan() || clip <= 0.0 {
        return Err(CliError::Config(format!("--clip must be positive, got {clip}")));
    }
    let mut cfg = ToyTrainConfig::new(Curvature::new(t.curvature)?);
    cfg.epochs = t.epochs;
    cfg.lr = t.lr;
    cfg.temperature = t.tau;
    cfg.clip_radius = clip;
    cfg.lambda = t.lambda;
    cfg.jitter = t.jitter;
    cfg.seed = seed;
    cfg.batch_size = t.batch_size;
    Ok(cfg)
}

pub(crate) fn trace_rows(trace: &[TraceRow]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|t| {
            let c = &t.components;
            [
                t.alpha,
                t.total,
                c.self_supervised_distance,
                c.supervised_distance,
                c.self_supervised_angle,
                c.supervised_angle,
            ]
            .iter()
            .map(|v| format!("{v:?}"))
            .fold(vec![t.step.to_string()], |mut row, v| {
                row.push(v);
                row
            })
        })
        .collect()
}

pub const TRAIN_TRACE_COLUMNS: [&str; 7] = [
    "step",
    "alpha",
    "total",
    "self_supervised_distance",
    "supervised_distance",
    "self_supervised_angle",
    "supervised_angle",
];

/// Trains the file's vectors; returns the trained file and the loss trace.
pub(crate) fn train_file(file: &EmbeddingFile, cfg: &ToyTrainConfig) -> Result<(EmbeddingFile, Vec<TraceRow>)> {
    if file.header.geometry.is_hyperbolic() {
        return Err(CliError::Config("toy-train expects a euclidean embedding file".into()));
    }
    let init = file
        .vectors()
        .into_iter()
        .map(EuclideanVec::new)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let out = train_embeddings(&init, &file.training_labels(), cfg)?;
    let x = out.embeddings.into_iter().map(EuclideanVec::into_inner).collect();
    Ok((file.with_vectors(x, SpaceModel::Euclidean, None), out.trace))
}

pub fn toy_train(a: &ToyTrainArgs, argv: &[String]) -> Result<()> {
    let t0 = Instant::now();
    let file = read_embeddings_path(&a.input)?;
    let cfg = train_config(&a.train, a.clip, a.seed)?;
    let (trained, trace) = train_file(&file, &cfg)?;
    write_embeddings_path(&a.out, &trained)?;
    let trace_path = sibling(&a.out, "trace");
    write_table(&trace_path, &TRAIN_TRACE_COLUMNS, &trace_rows(&trace))?;

    let mut m = RunManifest::new("toy-train", argv, a)?;
    m.seeds = vec![a.seed];
    m.input("embeddings", &a.input)?;
    m.output("embeddings", &a.out)?;
    m.output("trace", &trace_path)?;
    m.diagnostic("steps", trace.len() as i64);
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        m.diagnostic("initial_total", first.total);
        m.diagnostic("final_total", last.total);
    }
    let norms: Vec<f64> = trained
        .rows
        .iter()
        .map(|r| r.x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    m.diagnostic("mean_norm", norms.iter().sum::<f64>() / norms.len() as f64);
    m.diagnostic(
        "clipped_fraction",
        norms.iter().filter(|&&n| n > a.clip).count() as f64 / norms.len() as f64,
    );
    m.wall_clock_seconds = t0.elapsed().as_secs_f64();
    m.write(&manifest_path(&a.out))
}
