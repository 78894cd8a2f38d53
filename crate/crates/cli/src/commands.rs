use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hamflow::autodiff::{grad_check, Tape, Var};
use hamflow::flows::Flow;
use hamflow::graph::{generate_sbm, NodeDataset, SbmParams};
use hamflow::nets::{build_energy, EnergyConfig, EnergyKind, GraphContext, ParamStore};
use hamflow::rng;
use hamflow::robustness::{
    cross_entropy, edge_flip_attack, evaluate_in, injection_attack, pgd_feature_attack, robustness_suite, train,
    train_surrogate, write_suite_csv, AttackKind, FlowModel, GcnSurrogate, NodeClassifier, SuiteRow,
};
use hamflow::stability::{assess, example1_portrait};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Whether every hard check of a command passed.
pub type Outcome = Result<bool, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text + "\n").map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn model_dir(cfg: &ExperimentConfig, i: usize) -> PathBuf {
    cfg.output
        .join("models")
        .join(format!("{i}_{}", cfg.models[i].flow.kind.as_str()))
}

/// Builds and trains every configured model on `data`.
fn train_models(
    cfg: &ExperimentConfig,
    data: &NodeDataset,
    ctx: &GraphContext,
) -> Result<Vec<(FlowModel, hamflow::robustness::History)>, CliError> {
    cfg.models
        .iter()
        .enumerate()
        .map(|(i, mc)| {
            let mut r = rng::stream(cfg.seed, &format!("init.{i}"));
            let mut model = FlowModel::new(mc, data.feature_dim(), data.num_classes, ctx, &mut r)?;
            let history = train(&mut model, data, &cfg.train)?;
            Ok((model, history))
        })
        .collect()
}

#[derive(Serialize)]
struct Accuracies {
    model: String,
    checkpoint: PathBuf,
    train_acc: f64,
    val_acc: Option<f64>,
    test_acc: Option<f64>,
}

fn accuracies(
    model: &dyn NodeClassifier,
    checkpoint: PathBuf,
    ctx: &GraphContext,
    data: &NodeDataset,
) -> Result<Accuracies, CliError> {
    let acc = |nodes: &[usize]| -> Result<Option<f64>, CliError> {
        if nodes.is_empty() {
            Ok(None)
        } else {
            Ok(Some(evaluate_in(model, ctx, data, nodes)?))
        }
    };
    Ok(Accuracies {
        model: model.name().to_string(),
        checkpoint,
        train_acc: acc(&data.split.train)?.unwrap_or(f64::NAN),
        val_acc: acc(&data.split.val)?,
        test_acc: acc(&data.split.test)?,
    })
}

fn print_accuracy(a: &Accuracies) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "{:<10} train {:.4}  val {}  test {}  ({})",
        a.model,
        a.train_acc,
        fmt(a.val_acc),
        fmt(a.test_acc),
        a.checkpoint.display()
    );
}

pub fn train_cmd(cfg: &ExperimentConfig) -> Outcome {
    let data = cfg.dataset.load()?;
    let ctx = GraphContext::new(&data.graph);
    let trained = train_models(cfg, &data, &ctx)?;
    let mut summary = Vec::new();
    for (i, (model, history)) in trained.iter().enumerate() {
        let dir = model_dir(cfg, i);
        model.save(&dir)?;
        history.write_csv(create(&dir.join("history.csv"))?)?;
        let acc = accuracies(model, dir, &ctx, &data)?;
        print_accuracy(&acc);
        summary.push(json!({"accuracy": acc, "best_epoch": history.best_epoch, "epochs_run": history.records.len()}));
    }
    write_json(&cfg.output.join("train_summary.json"), &summary)?;
    Ok(true)
}

fn checkpoints_under(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    found.sort();
    Ok(found)
}

pub fn evaluate_cmd(cfg: &ExperimentConfig, checkpoints: &[PathBuf]) -> Outcome {
    let data = cfg.dataset.load()?;
    let ctx = GraphContext::new(&data.graph);
    let dirs = if checkpoints.is_empty() {
        checkpoints_under(&cfg.output.join("models"))?
    } else {
        checkpoints.to_vec()
    };
    if dirs.is_empty() {
        return Err(CliError::Usage(
            "no checkpoints found; run `train` first or pass --checkpoint".into(),
        ));
    }
    let mut results = Vec::new();
    for dir in dirs {
        let acc = match FlowModel::load(&dir, &ctx) {
            Ok(model) => accuracies(&model, dir, &ctx, &data)?,
            Err(hamflow::Error::Contract(_)) => accuracies(&GcnSurrogate::load(&dir)?, dir, &ctx, &data)?,
            Err(e) => return Err(e.into()),
        };
        print_accuracy(&acc);
        results.push(acc);
    }
    write_json(&cfg.output.join("evaluation.json"), &results)?;
    Ok(true)
}

pub fn attack_cmd(cfg: &ExperimentConfig) -> Outcome {
    let data = cfg.dataset.load()?;
    let (surrogate, _) = train_surrogate(&data, &cfg.train, cfg.suite.surrogate_hidden)?;
    surrogate.save(&cfg.output.join("surrogate"))?;
    let ctx = GraphContext::new(&data.graph);
    let clean = evaluate_in(&surrogate, &ctx, &data, &data.split.test)?;
    let mut summary = Vec::new();
    for (k, budget) in cfg.attacks.iter().enumerate() {
        let dir = cfg
            .output
            .join("attacks")
            .join(format!("{k}_{}", kind_name(budget.kind)));
        let attacked = match budget.kind {
            AttackKind::PgdFeature => data.with_features(pgd_feature_attack(&surrogate, &data, budget)?)?,
            AttackKind::Injection => injection_attack(&surrogate, &data, budget)?,
            AttackKind::EdgeFlip => {
                let (attacked, flips) = edge_flip_attack(&surrogate, &data, budget)?;
                write_json(&dir.join("flips.json"), &flips)?;
                attacked
            }
        };
        attacked.save(&dir)?;
        let after = evaluate_in(
            &surrogate,
            &GraphContext::new(&attacked.graph),
            &attacked,
            &data.split.test,
        )?;
        println!("{:<40} surrogate test acc {clean:.4} -> {after:.4}", budget.label());
        summary.push(json!({"attack": budget.label(), "dir": dir, "clean_acc": clean, "attacked_acc": after}));
    }
    write_json(&cfg.output.join("attacks").join("summary.json"), &summary)?;
    Ok(true)
}

fn kind_name(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::PgdFeature => "pgd_feature",
        AttackKind::Injection => "injection",
        AttackKind::EdgeFlip => "edge_flip",
    }
}

/// One independent suite cell: data, surrogate, victims and attacks all
/// derived from `seed`.
fn suite_cell(base: &ExperimentConfig, seed: u64) -> Result<Vec<SuiteRow>, CliError> {
    let cfg = base.reseeded(seed);
    let data = cfg.dataset.load()?;
    let ctx = GraphContext::new(&data.graph);
    let (surrogate, _) = train_surrogate(&data, &cfg.train, cfg.suite.surrogate_hidden)?;
    let trained = train_models(&cfg, &data, &ctx)?;
    let mut victims: Vec<&dyn NodeClassifier> = trained.iter().map(|(m, _)| m as &dyn NodeClassifier).collect();
    victims.push(&surrogate);
    let rows = robustness_suite(&victims, &surrogate, &data, &cfg.attacks, seed, cfg.suite.mode)?;
    let dir = cfg.output.join("suite").join(format!("seed_{seed}"));
    write_json(&dir.join("report.json"), &rows)?;
    write_suite_csv(&rows, create(&dir.join("report.csv"))?)?;
    info!("suite cell seed {seed} done");
    Ok(rows)
}

pub fn suite_cmd(cfg: &ExperimentConfig) -> Outcome {
    let seeds = if cfg.suite.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.suite.seeds.clone()
    };
    let cells: Vec<Vec<SuiteRow>> = seeds
        .par_iter()
        .map(|&s| suite_cell(cfg, s))
        .collect::<Result<_, _>>()?;
    let rows: Vec<SuiteRow> = cells.into_iter().flatten().collect();
    for r in &rows {
        println!(
            "seed {:<4} {:<10} {:<40} clean {:.4}  attacked {:.4}  drop {:+.4}",
            r.seed, r.model, r.attack, r.clean_acc, r.attacked_acc, r.drop
        );
    }
    let dir = cfg.output.join("suite");
    write_json(&dir.join("report.json"), &rows)?;
    write_suite_csv(&rows, create(&dir.join("report.csv"))?)?;
    Ok(true)
}

pub fn stability_cmd(cfg: &ExperimentConfig) -> Outcome {
    let data = cfg.dataset.load()?;
    let ctx = GraphContext::new(&data.graph);
    let dir = cfg.output.join("stability");
    let results: Vec<bool> = cfg
        .models
        .par_iter()
        .enumerate()
        .map(|(i, mc)| -> Result<bool, CliError> {
            let mut store = ParamStore::new();
            let mut r = rng::stream(cfg.seed, &format!("init.{i}"));
            let flow = Flow::build(&mc.flow, &mut store, &ctx, data.feature_dim(), &mut r)?;
            let (mut report, traj) = assess(&flow, &store, &data.graph, &data.features, &cfg.stability)?;
            let stem = format!("{i}_{}", mc.flow.kind.as_str());
            let traj_path = dir.join(format!("{stem}_trajectory.csv"));
            traj.write_csv(create(&traj_path)?, false)?;
            report.trajectory = Some(traj_path.display().to_string());
            fs::create_dir_all(&dir).map_err(|e| CliError::Io {
                path: dir.clone(),
                source: e,
            })?;
            let path = dir.join(format!("{stem}.json"));
            fs::write(&path, report.to_json()? + "\n").map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            let mut lines = format!("{stem} (alpha {})\n", mc.flow.alpha);
            for c in &report.checks {
                let verdict = if c.pass { "pass" } else { "FAIL" };
                lines += &format!(
                    "  {:<28} {verdict}  measured {:.3e}  tolerance {:.1e}\n",
                    c.name, c.measured, c.tolerance
                );
            }
            print!("{lines}");
            Ok(report.passed())
        })
        .collect::<Result<_, _>>()?;
    Ok(results.into_iter().all(|p| p))
}

pub fn portrait_cmd(cfg: &ExperimentConfig) -> Outcome {
    let portrait = example1_portrait(&cfg.portrait)?;
    let dir = cfg.output.join("portrait");
    let field = dir.join("field.csv");
    let trajectories = dir.join("trajectories.csv");
    portrait.write_field_csv(create(&field)?)?;
    portrait.write_trajectories_csv(create(&trajectories)?)?;
    println!("{}\n{}", field.display(), trajectories.display());
    Ok(true)
}

#[derive(Serialize)]
struct GradcheckLine {
    name: String,
    max_rel_error: f64,
    max_rel_error_smooth: f64,
    non_smooth: usize,
    components: usize,
    pass: bool,
}

pub fn gradcheck_cmd(cfg: &ExperimentConfig) -> Outcome {
    let g = &cfg.gradcheck;
    let data = generate_sbm(&SbmParams {
        n_per_class: g.nodes_per_class,
        feat_dim: 3,
        seed: cfg.seed,
        ..SbmParams::default()
    })?;
    let ctx = GraphContext::new(&data.graph);
    let n = data.num_nodes();
    let r = g.hidden;
    let mut rs = rng::stream(cfg.seed, "gradcheck");
    let q0 = hamflow::autodiff::Tensor::from_fn(n, r, |_, _| rand::Rng::random_range(&mut rs, -1.0..1.0));
    let p0 = hamflow::autodiff::Tensor::from_fn(n, r, |_, _| rand::Rng::random_range(&mut rs, -1.0..1.0));

    let mut reports = Vec::new();
    for kind in [EnergyKind::Vanilla, EnergyKind::Quadratic] {
        let mut store = ParamStore::new();
        let ecfg = EnergyConfig {
            kind,
            hidden: g.hidden,
            ..EnergyConfig::default()
        };
        let h = build_energy(&ecfg, &mut store, &ctx, r, &mut rng::stream(cfg.seed, "init"))?;
        let name = h.name();
        let energy_q = |tape: &mut Tape, q: Var| {
            let params = store.bind(tape, false);
            let p = tape.constant(p0.clone());
            h.energy(tape, &params, q, p)
        };
        reports.push((format!("{name}_energy_dq"), grad_check(energy_q, &q0, g.h)?));
        let energy_p = |tape: &mut Tape, p: Var| {
            let params = store.bind(tape, false);
            let q = tape.constant(q0.clone());
            h.energy(tape, &params, q, p)
        };
        reports.push((format!("{name}_energy_dp"), grad_check(energy_p, &p0, g.h)?));
    }

    let surrogate = GcnSurrogate::new(
        data.feature_dim(),
        g.hidden,
        data.num_classes,
        &mut rng::stream(cfg.seed, "init"),
    )?;
    let gcn_loss = |tape: &mut Tape, x: Var| {
        let params = surrogate.store.bind(tape, false);
        let logits = surrogate.logits(tape, &params, &ctx, x)?;
        cross_entropy(tape, logits, &data.labels, &data.split.test)
    };
    reports.push(("gcn_stack_dx".into(), grad_check(gcn_loss, &data.features, g.h)?));
    let a0 = data.graph.to_dense();
    let adj_loss = |tape: &mut Tape, a: Var| {
        let params = surrogate.store.bind(tape, false);
        let a_hat = GcnSurrogate::normalize_dense(tape, a)?;
        let x = tape.constant(data.features.clone());
        let logits = surrogate.logits_dense(tape, &params, a_hat, x)?;
        cross_entropy(tape, logits, &data.labels, &data.split.test)
    };
    reports.push(("surrogate_adjacency".into(), grad_check(adj_loss, &a0, g.h)?));

    let mut lines = Vec::new();
    for (name, rep) in reports {
        let pass = rep.max_rel_error_smooth <= g.tolerance;
        println!(
            "{name:<24} max rel error {:.3e} ({} non-smooth of {}) {}",
            rep.max_rel_error_smooth,
            rep.non_smooth.len(),
            rep.components,
            if pass { "pass" } else { "FAIL" }
        );
        lines.push(GradcheckLine {
            name,
            max_rel_error: rep.max_rel_error,
            max_rel_error_smooth: rep.max_rel_error_smooth,
            non_smooth: rep.non_smooth.len(),
            components: rep.components,
            pass,
        });
    }
    let all = lines.iter().all(|l| l.pass);
    write_json(&cfg.output.join("gradcheck.json"), &lines)?;
    Ok(all)
}
