use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hitadv_core::attack::{ifgm_baseline, run_attack, si_score, AttackResult};
use hitadv_core::classifier::{accuracy, adversarial_train, load_model, normalize_cloud, save_model, Dataset, Split};
use hitadv_core::cloud::{load_cloud, save_cloud, CloudFormat};
use hitadv_core::config::ExperimentConfig;
use hitadv_core::defense::{evaluate_defenses, AttackSpec, DefenseKind, DefenseSpec, MetricReport};
use hitadv_core::hardening::hardened_attack;
use hitadv_core::{par, PointCloud};
use log::{info, warn};
use serde::Serialize;

use crate::manifest::{load_split, write_dataset};
use crate::{Common, DefenseArg, Method};

pub const MODEL_FILE: &str = "model.json";
pub const ROBUST_MODEL_FILE: &str = "model_robust.json";

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    Ok(match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.resolve_out_dir(common.out.as_deref());
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn datasets(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<(Dataset, Dataset)> {
    match data {
        Some(dir) => Ok((load_split(dir, Split::Train)?, load_split(dir, Split::Test)?)),
        None => Ok(cfg.dataset.generate()?),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "cloud".to_string(), |s| s.to_string_lossy().into_owned())
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    let Some(format) = CloudFormat::from_path(path) else {
        bail!("{}: unknown point cloud format (expected .xyz, .off or .ply)", path.display());
    };
    if !path.exists() {
        bail!("input file not found: {}", path.display());
    }
    Ok(load_cloud(path, format)?)
}

pub fn gen_data(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, &cfg)?;
    let (train, test) = cfg.dataset.generate()?;
    let manifest = write_dataset(&dir, &train, &test)?;
    println!(
        "wrote {} train and {} test clouds ({} classes, {} points each) to {}",
        manifest.train.len(),
        manifest.test.len(),
        manifest.class_names.len(),
        manifest.points_per_cloud,
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    model: String,
    train_accuracy: f64,
    test_accuracy: f64,
    epoch_losses: Vec<f64>,
    robust: Option<RobustSummary>,
}

#[derive(Serialize)]
struct RobustSummary {
    model: String,
    train_accuracy: f64,
    test_accuracy: f64,
    max_perturbation_norm: Option<f64>,
}

pub fn train(common: &Common, data: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, &cfg)?;
    let (train_set, test_set) = datasets(&cfg, data)?;
    let trained = hitadv_core::classifier::train(&train_set, &cfg.train)?;
    let model_path = dir.join(MODEL_FILE);
    save_model(&trained.model, &model_path)?;
    let test_accuracy = accuracy(&trained.model, &test_set);
    println!("model: {} (train acc {:.4}, test acc {test_accuracy:.4})", model_path.display(), trained.report.final_train_accuracy);
    let robust = match &cfg.adversarial_training {
        Some(pgd) => {
            let at = adversarial_train(&train_set, &cfg.train, pgd)?;
            let path = dir.join(ROBUST_MODEL_FILE);
            save_model(&at.model, &path)?;
            let acc = accuracy(&at.model, &test_set);
            println!("robust model: {} (test acc {acc:.4})", path.display());
            Some(RobustSummary {
                model: ROBUST_MODEL_FILE.into(),
                train_accuracy: at.report.final_train_accuracy,
                test_accuracy: acc,
                max_perturbation_norm: at.report.max_perturbation_norm,
            })
        }
        None => None,
    };
    write_json(
        &dir.join("train_report.json"),
        &TrainSummary {
            model: MODEL_FILE.into(),
            train_accuracy: trained.report.final_train_accuracy,
            test_accuracy,
            epoch_losses: trained.report.epoch_losses,
            robust,
        },
    )
}

fn attack_spec(cfg: &ExperimentConfig, method: Method) -> AttackSpec {
    match method {
        Method::HitAdv => AttackSpec::HitAdv {
            attack: cfg.attack.clone(),
            region: cfg.region.clone(),
        },
        Method::Ifgm => AttackSpec::Ifgm { ifgm: cfg.ifgm.clone() },
        Method::HitAdvHardened => AttackSpec::HitAdvHardened {
            attack: cfg.attack.clone(),
            region: cfg.region.clone(),
            hardening: cfg.hardening.clone(),
        },
    }
}

/// Adds the clean-cloud scores and the per-point displacement as channels.
fn annotate(result: &AttackResult, clean: &PointCloud, scores: Option<&hitadv_core::attack::SIScores>) -> Result<PointCloud> {
    let mut adv = result.adversarial.clone();
    let disp = adv.points().iter().zip(clean.points()).map(|(a, c)| (a - c).norm()).collect();
    adv.set_attr("displacement", disp)?;
    if let Some(si) = scores {
        adv.set_attr("si", si.combined.clone())?;
        adv.set_attr("si_saliency", si.s1.clone())?;
        adv.set_attr("si_curvature", si.s2.clone())?;
    }
    Ok(adv)
}

pub fn attack(common: &Common, model_path: &Path, inputs: &[PathBuf], label: Option<usize>, method: Method) -> Result<()> {
    let cfg = load_config(common)?;
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    if label.is_some_and(|l| l >= model.num_classes()) {
        bail!("--label must be below the model's {} classes", model.num_classes());
    }
    let dir = out_dir(common, &cfg)?;
    let clouds = inputs
        .iter()
        .map(|p| {
            let c = normalize_cloud(&read_cloud(p)?);
            let y = label.unwrap_or_else(|| model.predict(c.points()));
            Ok(c.with_label(y))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = attack_spec(&cfg, method);
    spec.validate()?;
    let k = cfg.evaluation.metric_k;
    let results = par::map_slice(&clouds, |c| -> hitadv_core::Result<(AttackResult, Option<_>)> {
        let r = match method {
            Method::HitAdv => run_attack(&model, c, &cfg.attack, &cfg.region)?,
            Method::Ifgm => ifgm_baseline(&model, c, &cfg.ifgm, k)?,
            Method::HitAdvHardened => hardened_attack(&model, c, &cfg.attack, &cfg.region, &cfg.hardening)?,
        };
        let si = match method {
            Method::Ifgm => None,
            _ => Some(si_score(c, &model, &cfg.region, cfg.attack.alpha)?),
        };
        Ok((r, si))
    });
    for ((path, clean), res) in inputs.iter().zip(&clouds).zip(results) {
        let (r, si) = res.with_context(|| format!("attacking {}", path.display()))?;
        let name = format!("{}_adv", stem(path));
        let ply = format!("{name}.ply");
        save_cloud(&annotate(&r, clean, si.as_ref())?, dir.join(&ply), CloudFormat::Ply)?;
        write_json(&dir.join(format!("{name}.json")), &r.report(Some(ply.clone())))?;
        println!(
            "{}: {} (label {} -> {}), csd {:.4}, chamfer {:.5} -> {}",
            path.display(),
            if r.success { "success" } else { "failed" },
            r.true_label,
            r.predicted,
            r.metrics.csd,
            r.metrics.chamfer,
            dir.join(&ply).display()
        );
    }
    Ok(())
}

fn defense_for(cfg: &ExperimentConfig, arg: DefenseArg) -> DefenseSpec {
    let kind = match arg {
        DefenseArg::None => DefenseKind::None,
        DefenseArg::Srs => DefenseKind::Srs,
        DefenseArg::Sor => DefenseKind::Sor,
    };
    cfg.defenses.iter().find(|d| d.kind == kind).cloned().unwrap_or(DefenseSpec { kind, ..DefenseSpec::default() })
}

pub fn defend(common: &Common, inputs: &[PathBuf], arg: DefenseArg, seed: u64) -> Result<()> {
    let cfg = load_config(common)?;
    let spec = defense_for(&cfg, arg);
    spec.validate()?;
    let dir = out_dir(common, &cfg)?;
    for (i, path) in inputs.iter().enumerate() {
        let cloud = read_cloud(path)?;
        let out = spec.apply(&cloud, hitadv_core::rng::derive(seed, i as u64))?;
        let target = dir.join(format!("{}_{}.xyz", stem(path), spec.name()));
        save_cloud(&out, &target, CloudFormat::Xyz)?;
        println!("{}: kept {} of {} points -> {}", path.display(), out.len(), cloud.len(), target.display());
    }
    Ok(())
}

pub fn evaluate(common: &Common, model_path: &Path, robust_path: Option<&Path>, data: Option<&Path>, methods: &[Method]) -> Result<()> {
    let cfg = load_config(common)?;
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let robust = robust_path
        .map(|p| load_model(p).with_context(|| format!("loading model {}", p.display())))
        .transpose()?;
    let dir = out_dir(common, &cfg)?;
    let (_, test) = datasets(&cfg, data)?;
    let mut seen = Vec::new();
    for &method in methods {
        if seen.contains(&method) {
            continue;
        }
        seen.push(method);
        let spec = attack_spec(&cfg, method);
        info!("evaluating {} on {} test clouds", spec.method(), test.len());
        let reports = evaluate_defenses(&model, robust.as_ref(), &test, &spec, &cfg.defenses, &cfg.evaluation)?;
        for r in reports {
            let path = dir.join(format!("report_{}_{}.json", r.summary.attack, r.summary.defense));
            r.save(&path)?;
            let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
            println!(
                "{:<17} {:<5} asr {:.3} (undefended {:.3}, {} attempted) csd {} -> {}",
                r.summary.attack,
                r.summary.defense,
                r.summary.asr,
                r.summary.undefended_asr,
                r.summary.attempted,
                fmt(r.summary.csd_mean),
                path.display()
            );
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize)]
struct Row {
    attack: String,
    defense: String,
    robust_victim: bool,
    attempted: usize,
    successes: usize,
    asr: f64,
    undefended_asr: f64,
    csd_mean: Option<f64>,
    chamfer_mean: Option<f64>,
    knn_dist_mean: Option<f64>,
}

fn report_files(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, bool)>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    name.starts_with("report_") && name.ends_with(".json")
                })
                .collect();
            found.sort();
            files.extend(found.into_iter().map(|f| (f, false)));
        } else if p.exists() {
            files.push((p.clone(), true));
        } else {
            bail!("report not found: {}", p.display());
        }
    }
    Ok(files)
}

pub fn report(inputs: &[PathBuf], csv_path: Option<&Path>) -> Result<()> {
    let mut rows = Vec::new();
    for (path, explicit) in report_files(inputs)? {
        let r = match MetricReport::load(&path) {
            Ok(r) => r,
            // A stray report_*.json in a scanned directory is not fatal.
            Err(e) if !explicit => {
                warn!("skipping {}: {e}", path.display());
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("reading report {}", path.display())),
        };
        if !r.is_consistent() {
            bail!("{}: summary does not match its per-example records", path.display());
        }
        let s = r.summary;
        rows.push(Row {
            attack: s.attack,
            defense: s.defense,
            robust_victim: r.config_echo.robust_victim,
            attempted: s.attempted,
            successes: s.successes,
            asr: s.asr,
            undefended_asr: s.undefended_asr,
            csd_mean: s.csd_mean,
            chamfer_mean: s.chamfer_mean,
            knn_dist_mean: s.knn_dist_mean,
        });
    }
    if rows.is_empty() {
        bail!("no metric reports found");
    }
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let sink: Box<dyn std::io::Write> = match csv_path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    if let Some(p) = csv_path {
        eprintln!("wrote {} rows to {}", rows.len(), p.display());
    }
    Ok(())
}
