//! Subcommand definitions and drivers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fgw_core::barycenter::{solve_barycenter, BarycenterOptions};
use fgw_core::dataset::{read_candidates, read_dataset, write_candidates, write_dataset, CandidateSets, Dataset};
use fgw_core::fgw::FgwOptions;
use fgw_core::graph::{bernoulli_sample_with, FeatureDiscretization};
use fgw_core::io::write_graph;
use fgw_core::krr::{select_hyperparameters, truncate_weights, Kernel, KrrGrid, KrrModel};
use fgw_core::neural::{Checkpoint, SolverConfig, TemplateInit, TrainConfig, Trainer};
use fgw_core::synth::{make_dataset, sample_graph, LabelEncoding, X_MAX, X_MIN};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{usage, CliError, CliResult};
use crate::eval::{eval_topk, interp_curve, interp_points, weights_sweep, EvalParams, TestCase};
use crate::model::{KrrFile, Predictor};
use crate::output::{num, write_csv};
use crate::settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "fgwpred", version, about = "FGW barycentric graph prediction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each maps onto a setting of the same name.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output graph size; `predict` accepts a comma-separated list.
    #[arg(long = "n-out")]
    pub n_out: Option<String>,
    /// Number of kept template weights, or `all`.
    #[arg(long = "top-k")]
    pub top_k: Option<String>,
    /// key=value settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` setting, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a synthetic block-model dataset.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// Candidates per input (including the truth); 0 writes none.
        #[arg(long)]
        candidates: Option<usize>,
        /// `scalar` or `onehot` node labels.
        #[arg(long)]
        encoding: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the neural barycenter model.
    TrainNeural {
        #[arg(long)]
        data: PathBuf,
        /// Output directory for `checkpoint.json` and `loss.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint up to `epochs` total.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a kernel ridge model with validation grid search.
    FitKrr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `gaussian` or `linear`.
        #[arg(long)]
        kernel: Option<String>,
        /// Bandwidth grid (comma-separated).
        #[arg(long)]
        gammas: Option<String>,
        /// Ridge grid (comma-separated).
        #[arg(long)]
        lambdas: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Predict relaxed graphs and optional discrete samples.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inputs separated by `;`, coordinates by `,`.
        #[arg(long)]
        inputs: Option<String>,
        /// File with one input vector per line.
        #[arg(long = "inputs-file")]
        inputs_file: Option<PathBuf>,
        /// 1-D grid `lo:hi:steps`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Top-k accuracy over candidate lists.
    EvalTopk {
        #[arg(long)]
        model: PathBuf,
        /// Test directory with `manifest.tsv` and `candidates.tsv`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ks: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Interpolation curves against the distance to the closest training graph.
    EvalInterp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-point CSV.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long = "d-min", allow_hyphen_values = true)]
        d_min: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Top-k accuracy for several numbers of kept weights.
    EvalWeightsSweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        keep: Option<String>,
        #[arg(long)]
        ks: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

const SOLVER_KEYS: &[(&str, &str)] = &[
    ("fgw_restarts", "1"),
    ("fgw_max_iter", "100"),
    ("fgw_tol", "1e-6"),
    ("bary_max_outer", "50"),
    ("bary_tol", "1e-6"),
];

fn resolve(
    command: &str,
    defaults: &[(&str, &str)],
    common: &Common,
    extra: Vec<(&str, Option<String>)>,
) -> CliResult<Settings> {
    let mut overrides: Vec<(&str, Option<String>)> = vec![
        ("seed", common.seed.map(|v| v.to_string())),
        ("beta", common.beta.map(num)),
        ("n_out", common.n_out.clone()),
        ("top_k", common.top_k.clone()),
    ];
    overrides.extend(extra);
    let mut pairs = Vec::new();
    for item in &common.set {
        let Some((k, v)) = item.split_once('=') else {
            return usage(format!("--set expects KEY=VALUE, got {item:?}"));
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in &pairs {
        overrides.push((k.as_str(), Some(v.clone())));
    }
    Settings::resolve(command, defaults, common.config.as_deref(), &overrides)
}

fn fgw_options(s: &Settings) -> CliResult<FgwOptions> {
    Ok(FgwOptions {
        max_iter: s.get("fgw_max_iter")?,
        tol: s.get("fgw_tol")?,
        restarts: s.get::<usize>("fgw_restarts")?.max(1),
        seed: s.get("seed")?,
        ..Default::default()
    })
}

fn bary_options(s: &Settings) -> CliResult<BarycenterOptions> {
    Ok(BarycenterOptions {
        max_outer: s.get("bary_max_outer")?,
        tol: s.get("bary_tol")?,
        seed: s.get("seed")?,
        fgw: fgw_options(s)?,
        ..Default::default()
    })
}

fn beta(s: &Settings) -> CliResult<f64> {
    let b: f64 = s.get("beta")?;
    if !(0.0..=1.0).contains(&b) {
        return usage(format!("beta must lie in [0, 1], got {b}"));
    }
    Ok(b)
}

/// Output size where `truth`/`model` means "use the natural default".
fn n_out(s: &Settings) -> CliResult<Option<usize>> {
    match s.raw("n_out") {
        "truth" | "model" => Ok(None),
        _ => match s.get::<usize>("n_out")? {
            0 => usage("n_out must be positive"),
            n => Ok(Some(n)),
        },
    }
}

fn eval_params(s: &Settings) -> CliResult<EvalParams> {
    let top_k = if s.has("top_k") { s.get_limit("top_k")? } else { None };
    Ok(EvalParams {
        beta: beta(s)?,
        fgw: fgw_options(s)?,
        bary: bary_options(s)?,
        top_k,
        n_out: if s.has("n_out") { n_out(s)? } else { None },
    })
}

fn with_solver_keys<'a>(own: &[(&'a str, &'a str)]) -> Vec<(&'a str, &'a str)> {
    own.iter().chain(SOLVER_KEYS).copied().collect()
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { out, count, candidates, encoding, common } => {
            let s = resolve(
                "generate",
                &[("seed", "0"), ("count", "50"), ("candidates", "0"), ("encoding", "scalar")],
                &common,
                vec![("count", count.map(|v| v.to_string())), ("candidates", candidates.map(|v| v.to_string())), ("encoding", encoding)],
            )?;
            generate(&s, &out)
        }
        Command::TrainNeural { data, out, resume, epochs, common } => {
            let d = TrainConfig::default();
            let sv = SolverConfig::training();
            let defaults: Vec<(String, String)> = vec![
                ("seed".into(), "0".into()),
                ("beta".into(), num(d.beta)),
                ("n_out".into(), d.n_out.to_string()),
                ("epochs".into(), d.epochs.to_string()),
                ("batch_size".into(), d.batch_size.to_string()),
                ("lr_mlp".into(), num(d.lr_mlp)),
                ("lr_templates".into(), num(d.lr_templates)),
                ("hidden".into(), "100,100".into()),
                ("templates".into(), d.template_sizes.len().to_string()),
                ("template_size".into(), d.template_sizes[0].to_string()),
                ("template_init".into(), "random".into()),
                ("learn_templates".into(), "true".into()),
                ("clamp_features".into(), "false".into()),
                ("bary_max_outer".into(), sv.bary_max_outer.to_string()),
                ("bary_tol".into(), num(sv.bary_tol)),
                ("fgw_max_iter".into(), sv.fgw_max_iter.to_string()),
                ("fgw_tol".into(), num(sv.fgw_tol)),
                ("loss_restarts".into(), sv.loss_restarts.to_string()),
            ];
            let defaults: Vec<(&str, &str)> = defaults.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            let s = resolve("train-neural", &defaults, &common, vec![("epochs", epochs.map(|v| v.to_string()))])?;
            train_neural(&s, &data, &out, resume.as_deref())
        }
        Command::FitKrr { data, out, kernel, gammas, lambdas, common } => {
            let g = KrrGrid::default();
            let join = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",");
            let (gs, ls) = (join(&g.gammas), join(&g.lambdas));
            let own = [("seed", "0"), ("beta", "0.5"), ("top_k", "all"), ("kernel", "gaussian"), ("gammas", gs.as_str()), ("lambdas", ls.as_str())];
            let s = resolve(
                "fit-krr",
                &with_solver_keys(&own),
                &common,
                vec![("kernel", kernel), ("gammas", gammas), ("lambdas", lambdas)],
            )?;
            fit_krr(&s, &data, &out)
        }
        Command::Predict { model, out, inputs, inputs_file, grid, samples, common } => {
            let own = [("seed", "0"), ("beta", "0.5"), ("n_out", "model"), ("top_k", "all"), ("samples", "0"), ("snap_one_hot", "false")];
            let s = resolve("predict", &with_solver_keys(&own), &common, vec![("samples", samples.map(|v| v.to_string()))])?;
            let xs = collect_inputs(inputs.as_deref(), inputs_file.as_deref(), grid.as_deref())?;
            predict(&s, &model, &out, &xs)
        }
        Command::EvalTopk { model, data, out, ks, common } => {
            let own = [("seed", "0"), ("beta", "0.5"), ("n_out", "model"), ("top_k", "all"), ("ks", "1,10,20")];
            let s = resolve("eval-topk", &with_solver_keys(&own), &common, vec![("ks", ks)])?;
            cmd_eval_topk(&s, &model, &data, &out)
        }
        Command::EvalInterp { model, data, out, points, d_min, common } => {
            let own = [
                ("seed", "0"),
                ("beta", "0.5"),
                ("n_out", "truth"),
                ("top_k", "10"),
                ("d_min", "-1,0.05,0.1,0.15,0.2,0.25,0.3,0.4,0.5"),
            ];
            let s = resolve("eval-interp", &with_solver_keys(&own), &common, vec![("d_min", d_min)])?;
            cmd_eval_interp(&s, &model, &data, &out, points.as_deref())
        }
        Command::EvalWeightsSweep { model, data, out, keep, ks, common } => {
            let own = [("seed", "0"), ("beta", "0.5"), ("keep", "1,2,5,10,20,all"), ("ks", "1,10,20")];
            let s = resolve("eval-weights-sweep", &with_solver_keys(&own), &common, vec![("keep", keep), ("ks", ks)])?;
            cmd_eval_weights_sweep(&s, &model, &data, &out)
        }
    }
}

fn generate(s: &Settings, out: &Path) -> CliResult<()> {
    let count: usize = s.get("count")?;
    if count == 0 {
        return usage("count must be at least 1");
    }
    let encoding = match s.raw("encoding") {
        "scalar" => LabelEncoding::Scalar,
        "onehot" | "one-hot" => LabelEncoding::OneHot,
        other => return usage(format!("unknown encoding {other:?}")),
    };
    let seed: u64 = s.get("seed")?;
    let data = make_dataset(count, seed, encoding)?;
    write_dataset(out, &data)?;
    let per_input: usize = s.get("candidates")?;
    if per_input > 0 {
        // separate stream so the dataset itself does not depend on the candidate count
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut sets = CandidateSets::new();
        for (i, truth) in data.graphs.iter().enumerate() {
            let mut list = vec![truth.clone()];
            for _ in 1..per_input {
                let x = rng.random_range(X_MIN..=X_MAX);
                let mut g_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
                list.push(sample_graph(x, encoding, &mut g_rng)?);
            }
            list.shuffle(&mut rng);
            sets.insert(i, list);
        }
        write_candidates(out, &sets)?;
    }
    eprintln!("wrote {count} samples to {}", out.display());
    Ok(())
}

fn train_config(s: &Settings) -> CliResult<TrainConfig> {
    let init = match s.raw("template_init") {
        "random" => TemplateInit::RandomUniform,
        "training" => TemplateInit::FromTraining,
        other => return usage(format!("unknown template_init {other:?}")),
    };
    let n_out = n_out(s)?.unwrap_or(TrainConfig::default().n_out);
    let config = TrainConfig {
        epochs: s.get("epochs")?,
        batch_size: s.get("batch_size")?,
        lr_mlp: s.get("lr_mlp")?,
        lr_templates: s.get("lr_templates")?,
        seed: s.get("seed")?,
        learn_templates: s.get_bool("learn_templates")?,
        hidden: s.get_list("hidden")?,
        template_sizes: vec![s.get("template_size")?; s.get("templates")?],
        template_init: init,
        beta: beta(s)?,
        n_out,
        clamp_features: s.get_bool("clamp_features")?,
        solver: SolverConfig {
            bary_max_outer: s.get("bary_max_outer")?,
            bary_tol: s.get("bary_tol")?,
            fgw_max_iter: s.get("fgw_max_iter")?,
            fgw_tol: s.get("fgw_tol")?,
            loss_restarts: s.get::<usize>("loss_restarts")?.max(1),
        },
        ..Default::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn train_neural(s: &Settings, data: &Path, out: &Path, resume: Option<&Path>) -> CliResult<()> {
    let config = train_config(s)?;
    let data = read_dataset(data)?;
    let mut trainer = match resume {
        Some(path) => {
            let mut t = Checkpoint::load(path)?.trainer;
            t.config.epochs = config.epochs;
            t
        }
        None => Trainer::new(config, &data)?,
    };
    trainer.run(&data, |epoch, loss| eprintln!("epoch {epoch} loss {loss}"))?;
    fs::create_dir_all(out)?;
    let rows: Vec<Vec<String>> =
        trainer.history.iter().enumerate().map(|(e, l)| vec![(e + 1).to_string(), num(*l)]).collect();
    write_csv(&out.join("loss.csv"), s, &["epoch", "loss"], &rows)?;
    Checkpoint::new(trainer).save(&out.join("checkpoint.json"))?;
    Ok(())
}

fn fit_krr(s: &Settings, data: &Path, out: &Path) -> CliResult<()> {
    let data = read_dataset(data)?;
    let linear = match s.raw("kernel") {
        "gaussian" => false,
        "linear" => true,
        other => return usage(format!("unknown kernel {other:?}")),
    };
    let grid = KrrGrid { lambdas: s.get_list("lambdas")?, gammas: s.get_list("gammas")? };
    let top_k = s.get_limit("top_k")?.unwrap_or(data.len());
    let sel = select_hyperparameters(linear, &data.inputs, &data.graphs, &grid, beta(s)?, top_k, &fgw_options(s)?, s.get("seed")?)?;
    KrrFile::new(&sel.kernel, sel.lambda, Some(sel.accuracy), &data.inputs, &data.graphs)?.save(out)?;
    let gamma = match sel.kernel {
        Kernel::Gaussian { gamma } => num(gamma),
        _ => "-".into(),
    };
    println!("kernel={} gamma={gamma} lambda={} validation_top1={}", s.raw("kernel"), num(sel.lambda), num(sel.accuracy));
    Ok(())
}

/// Input vectors from exactly one of the three sources.
pub fn collect_inputs(inline: Option<&str>, file: Option<&Path>, grid: Option<&str>) -> CliResult<Vec<Vec<f64>>> {
    let parse_list = |text: &str, sep: char| -> CliResult<Vec<Vec<f64>>> {
        text.split(sep)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| fgw_core::dataset::parse_vector(t).map_err(|e| CliError::Usage(e.to_string())))
            .collect()
    };
    let xs = match (inline, file, grid) {
        (Some(t), None, None) => parse_list(t, ';')?,
        (None, Some(p), None) => parse_list(&fs::read_to_string(p)?, '\n')?,
        (None, None, Some(g)) => {
            let parts: Vec<&str> = g.split(':').collect();
            let bad = || CliError::Usage(format!("grid must be lo:hi:steps, got {g:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = parts[0].parse().map_err(|_| bad())?;
            let hi: f64 = parts[1].parse().map_err(|_| bad())?;
            let steps: usize = parts[2].parse().map_err(|_| bad())?;
            match steps {
                0 => return Err(bad()),
                1 => vec![vec![lo]],
                _ => (0..steps).map(|i| vec![lo + (hi - lo) * i as f64 / (steps - 1) as f64]).collect(),
            }
        }
        _ => return usage("give exactly one of --inputs, --inputs-file, --grid"),
    };
    if xs.is_empty() {
        return usage("no inputs given");
    }
    Ok(xs)
}

fn predict(s: &Settings, model: &Path, out: &Path, xs: &[Vec<f64>]) -> CliResult<()> {
    let predictor = Predictor::load(model)?;
    let sizes: Vec<usize> = match s.raw("n_out") {
        "model" => vec![match &predictor {
            Predictor::Neural { model, .. } => model.n_out,
            Predictor::Krr { .. } => TrainConfig::default().n_out,
        }],
        _ => s.get_list("n_out")?,
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return usage("n_out sizes must be positive");
    }
    let samples: usize = s.get("samples")?;
    let features = if s.get_bool("snap_one_hot")? { FeatureDiscretization::SnapOneHot } else { FeatureDiscretization::Keep };
    let bary = bary_options(s)?;
    let (templates, beta) = match &predictor {
        Predictor::Krr { model, .. } => (model.templates().clone(), beta(s)?),
        Predictor::Neural { model, .. } => (model.templates()?, model.beta),
    };
    let mut sample_rng = ChaCha8Rng::seed_from_u64(s.get("seed")?);
    fs::create_dir_all(out.join("graphs"))?;
    let mut pred_rows = Vec::new();
    let mut alpha_rows = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let alpha = predictor.weights(x)?;
        let kept = truncate_weights(&alpha, s.get_limit("top_k")?.unwrap_or(alpha.len()).max(1))?;
        let mut row = vec![i.to_string(), fgw_core::dataset::format_vector(x)];
        row.extend(alpha.iter().map(|a| num(*a)));
        alpha_rows.push(row);
        for &n in &sizes {
            let res = solve_barycenter(&templates, &kept, n, beta, &bary)?;
            let rel = format!("graphs/p{i:05}_n{n}.fgwg");
            write_graph(&out.join(&rel), &res.graph)?;
            let mut sample_paths = Vec::new();
            for k in 0..samples {
                let g = bernoulli_sample_with(&res.graph, &mut sample_rng, features);
                let rel = format!("graphs/p{i:05}_n{n}_s{k:03}.fgwg");
                write_graph(&out.join(&rel), &g)?;
                sample_paths.push(rel);
            }
            pred_rows.push(vec![
                i.to_string(),
                n.to_string(),
                num(res.objective),
                res.iterations.to_string(),
                rel,
                sample_paths.join(";"),
            ]);
        }
    }
    write_csv(
        &out.join("predictions.csv"),
        s,
        &["input_id", "n", "objective", "iterations", "graph", "samples"],
        &pred_rows,
    )?;
    let m = templates.len();
    let mut header: Vec<String> = vec!["input_id".into(), "x".into()];
    header.extend((0..m).map(|j| format!("alpha_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("alpha.csv"), s, &header, &alpha_rows)?;
    Ok(())
}

/// Test inputs joined with their candidate lists.
pub fn load_cases(dir: &Path, need_candidates: bool) -> CliResult<Vec<TestCase>> {
    let Dataset { inputs, graphs } = read_dataset(dir)?;
    let mut sets = if need_candidates {
        read_candidates(dir)?
    } else {
        CandidateSets::new()
    };
    let cases = inputs
        .into_iter()
        .zip(graphs)
        .enumerate()
        .map(|(i, (x, truth))| TestCase { x, truth, candidates: sets.remove(&i).unwrap_or_default() })
        .collect::<Vec<_>>();
    if need_candidates {
        if let Some(c) = cases.iter().position(|c| c.candidates.is_empty()) {
            return Err(CliError::Data(format!("test input {c} has no candidates")));
        }
    }
    Ok(cases)
}

fn krr_only(p: Predictor, command: &str) -> CliResult<KrrModel> {
    match p {
        Predictor::Krr { model, .. } => Ok(model),
        Predictor::Neural { .. } => usage(format!("{command} needs a KRR model")),
    }
}

fn cmd_eval_topk(s: &Settings, model: &Path, data: &Path, out: &Path) -> CliResult<()> {
    let predictor = Predictor::load(model)?;
    let cases = load_cases(data, true)?;
    let report = eval_topk(&predictor, &cases, &s.get_list("ks")?, &eval_params(s)?)?;
    let rows: Vec<Vec<String>> = report
        .topk
        .iter()
        .zip(&report.hits)
        .map(|((k, acc), h)| vec![k.to_string(), num(*acc), h.to_string(), report.evaluated.to_string()])
        .collect();
    write_csv(out, s, &["k", "accuracy", "hits", "evaluated"], &rows)?;
    if report.truth_missing > 0 {
        eprintln!("warning: {} test inputs have no true graph among their candidates", report.truth_missing);
    }
    eprintln!("evaluated {} inputs in {:.2}s", report.evaluated, report.seconds);
    Ok(())
}

fn cmd_eval_interp(s: &Settings, model: &Path, data: &Path, out: &Path, points_out: Option<&Path>) -> CliResult<()> {
    let model = krr_only(Predictor::load(model)?, "eval-interp")?;
    let cases = load_cases(data, false)?;
    let points = interp_points(&model, &cases, &eval_params(s)?)?;
    let d_mins: Vec<f64> = s.get_list("d_min")?;
    let curve = interp_curve(&points, &d_mins);
    for d in &d_mins {
        if !curve.iter().any(|r| r.d_min == *d) {
            eprintln!("d_min={d}: no test point has d0 above it; row omitted");
        }
    }
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|r| vec![num(r.d_min), r.count.to_string(), num(r.mean_d0), num(r.mean_fgw_pred)])
        .collect();
    write_csv(out, s, &["d_min", "count", "mean_d0", "mean_fgw_pred"], &rows)?;
    if let Some(path) = points_out {
        let rows: Vec<Vec<String>> = points
            .iter()
            .enumerate()
            .map(|(i, p)| vec![i.to_string(), p.closest.to_string(), num(p.d0), num(p.fgw_pred)])
            .collect();
        write_csv(path, s, &["input_id", "closest", "d0", "fgw_pred"], &rows)?;
    }
    Ok(())
}

fn cmd_eval_weights_sweep(s: &Settings, model: &Path, data: &Path, out: &Path) -> CliResult<()> {
    let model = krr_only(Predictor::load(model)?, "eval-weights-sweep")?;
    let cases = load_cases(data, true)?;
    let keeps = s.get_limit_list("keep")?;
    let table = weights_sweep(&model, &cases, &keeps, &s.get_list("ks")?, &eval_params(s)?)?;
    let mut rows = Vec::new();
    for (limit, report) in &table {
        let label = limit.map_or("all".to_string(), |k| k.to_string());
        for ((k, acc), h) in report.topk.iter().zip(&report.hits) {
            rows.push(vec![label.clone(), k.to_string(), num(*acc), h.to_string()]);
        }
    }
    write_csv(out, s, &["keep", "k", "accuracy", "hits"], &rows)?;
    Ok(())
}
