//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Takes roughly twenty minutes on a single core.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::invariants::*;
use common::*;
use hitadv_core::attack::{ifgm_baseline, run_attack, AttackConfig, AttackResult, IfgmConfig, RegionSearchConfig};
use hitadv_core::classifier::{accuracy, train, Augmentation, ClassifierModel, Dataset, TrainConfig};
use hitadv_core::data::DatasetSpec;
use hitadv_core::defense::DefenseSpec;
use hitadv_core::hardening::{hardened_attack, random_transform, simulate_rescan, HardeningConfig};
use hitadv_core::{par, PointCloud};
use statrs::distribution::{Binomial, DiscreteCDF};

const M: usize = 256;
const EFFICACY_CLOUDS: usize = 100;
const HARDENING_CLOUDS: usize = 50;
const ABLATION_CLOUDS: usize = 30;
const IFGM_BUDGETS: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
/// Random poses and rescans drawn per adversarial cloud.
const DRAWS: u64 = 3;

struct Verdicts {
    lines: Vec<(String, bool, String)>,
}

impl Verdicts {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((name.to_string(), pass, detail));
    }
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `wins + losses` fair coin flips.
fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    Binomial::new(0.5, n).unwrap().sf(wins as u64 - 1)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn asr(rs: &[AttackResult]) -> f64 {
    rs.iter().filter(|r| r.success).count() as f64 / rs.len() as f64
}

fn csd_of_successes(rs: &[AttackResult]) -> f64 {
    mean(rs.iter().filter(|r| r.success).map(|r| r.metrics.csd))
}

/// Largest displacement over the allowed bound, or `None` when within it.
fn convexity_violation(clean: &PointCloud, r: &AttackResult) -> Option<f64> {
    let field = r.field.as_ref()?;
    let bound = field.max_delta_norm();
    let worst = r.adversarial.points().iter().zip(clean.points()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    (worst > bound * (1.0 + 1e-12) + 1e-15).then_some(worst - bound)
}

fn correct<'a>(model: &ClassifierModel, data: &'a Dataset, n: usize) -> Vec<&'a PointCloud> {
    data.examples()
        .iter()
        .enumerate()
        .filter(|(i, c)| model.predict(c.points()) == data.label(*i))
        .map(|(_, c)| c)
        .take(n)
        .collect()
}

fn attack_all(model: &ClassifierModel, clouds: &[&PointCloud], cfg: &AttackConfig) -> Vec<AttackResult> {
    let rcfg = RegionSearchConfig::default();
    par::map_slice(clouds, |c| run_attack(model, c, cfg, &rcfg).unwrap())
}

/// Draws on which the adversarial cloud still fools `model` after a random
/// in-bounds pose and after a simulated rescan.
fn retained(model: &ClassifierModel, rs: &[AttackResult], hcfg: &HardeningConfig) -> (usize, usize) {
    let (mut posed, mut rescanned) = (0, 0);
    for (i, r) in rs.iter().enumerate() {
        if !r.success {
            continue;
        }
        for d in 0..DRAWS {
            let seed = i as u64 * DRAWS + d;
            let t = random_transform(hcfg, r.adversarial.radius(), 1000 + seed);
            posed += (model.predict(&t.apply_points(r.adversarial.points())) != r.true_label) as usize;
            let scan = simulate_rescan(&r.adversarial, hcfg, 2000 + seed).unwrap();
            rescanned += (model.predict(scan.points()) != r.true_label) as usize;
        }
    }
    (posed, rescanned)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut v = Verdicts { lines: Vec::new() };
    let mut violations: Vec<String> = Vec::new();
    let mut checked = 0usize;

    // Gradient exactness.
    let t = Instant::now();
    let worst = (0..24).map(|s| fd_case(s).worst_error()).fold(0.0, f64::max);
    v.record(
        "C1 gradient exactness",
        worst <= 1e-4,
        format!("worst relative error {worst:.2e} over 24 configs, h=1e-4 ({:.1}s)", t.elapsed().as_secs_f64()),
    );

    // Oracle equivalence.
    let t = Instant::now();
    let checks: [(&str, fn(u64) -> Check); 6] = [
        ("knn", check_knn),
        ("fps", check_fps),
        ("chamfer", check_chamfer),
        ("sor", check_sor),
        ("search_regions", check_regions),
        ("hide", check_hide),
    ];
    let failures: Vec<String> = checks.iter().filter_map(|(name, c)| run_checks(120, *c).err().map(|e| format!("{name}: {e}"))).collect();
    v.record(
        "C2 oracle equivalence",
        failures.is_empty(),
        if failures.is_empty() {
            format!("6 operations x 120 instances match ({:.1}s)", t.elapsed().as_secs_f64())
        } else {
            failures.join("; ")
        },
    );

    // Victim on the bundled suite.
    let t = Instant::now();
    let spec = DatasetSpec {
        m: M,
        ..Default::default()
    };
    let (train_set, test) = spec.generate().unwrap();
    let victim = train(&train_set, &TrainConfig::default()).unwrap().model;
    let test_acc = accuracy(&victim, &test);
    println!("info victim: 8 classes, m={M}, test accuracy {test_acc:.3} ({:.1}s)", t.elapsed().as_secs_f64());

    // Attack efficacy with the default configuration.
    let t = Instant::now();
    let clouds = correct(&victim, &test, EFFICACY_CLOUDS);
    let hits = attack_all(&victim, &clouds, &AttackConfig::default());
    for (c, r) in clouds.iter().zip(&hits) {
        checked += 1;
        if let Some(d) = convexity_violation(c, r) {
            violations.push(format!("efficacy run exceeds bound by {d:.2e}"));
        }
    }
    let hit_asr = asr(&hits);
    v.record(
        "C4 attack efficacy",
        test_acc >= 0.90 && clouds.len() >= 100 && hit_asr >= 0.90,
        format!(
            "test accuracy {test_acc:.3}, ASR {hit_asr:.3} over {} clouds ({:.1}s)",
            clouds.len(),
            t.elapsed().as_secs_f64()
        ),
    );

    // Baseline at matched undefended ASR: the smallest budget reaching ours.
    let t = Instant::now();
    let mut baseline = None;
    for budget in IFGM_BUDGETS {
        let cfg = IfgmConfig { budget, ..Default::default() };
        let rs: Vec<AttackResult> = par::map_slice(&clouds, |c| ifgm_baseline(&victim, c, &cfg, 10).unwrap());
        let a = asr(&rs);
        println!("info ifgm budget {budget}: ASR {a:.3}");
        if a >= hit_asr.max(0.90) {
            baseline = Some((budget, rs));
            break;
        }
    }
    match &baseline {
        None => v.record("C5 imperceptibility direction", false, "no IFGM budget reached the matched ASR".into()),
        Some((budget, ifgm)) => {
            let (mut wins, mut losses) = (0, 0);
            for (h, f) in hits.iter().zip(ifgm) {
                if h.success && f.success {
                    if h.metrics.csd < f.metrics.csd {
                        wins += 1;
                    } else if h.metrics.csd > f.metrics.csd {
                        losses += 1;
                    }
                }
            }
            let p = sign_test(wins, losses);
            let (ours, theirs) = (csd_of_successes(&hits), csd_of_successes(ifgm));
            v.record(
                "C5 imperceptibility direction",
                ours < theirs && p < 0.05 && wins + losses >= 50,
                format!(
                    "mean CSD {ours:.4} vs IFGM {theirs:.4} at budget {budget} (ASR {:.3}); lower on {wins}/{} pairs, p={p:.2e} ({:.1}s)",
                    asr(ifgm),
                    wins + losses,
                    t.elapsed().as_secs_f64()
                ),
            );

            // Both attacks' outputs through SOR.
            let sor = DefenseSpec::sor();
            let survives = |r: &AttackResult, i: usize| r.success && victim.predict(sor.apply(&r.adversarial, i as u64).unwrap().points()) != r.true_label;
            let ours: Vec<bool> = hits.iter().enumerate().map(|(i, r)| survives(r, i)).collect();
            let theirs: Vec<bool> = ifgm.iter().enumerate().map(|(i, r)| survives(r, i)).collect();
            let wins = ours.iter().zip(&theirs).filter(|(a, b)| **a && !**b).count();
            let losses = ours.iter().zip(&theirs).filter(|(a, b)| !**a && **b).count();
            let (a, b) = (ours.iter().filter(|x| **x).count(), theirs.iter().filter(|x| **x).count());
            let p = sign_test(wins, losses);
            v.record(
                "C6 SOR robustness direction",
                a > b && p < 0.05 && ours.len() >= 50,
                format!(
                    "ASR under SOR {:.3} vs IFGM {:.3} over {} clouds; discordant {wins}:{losses}, p={p:.2e}",
                    a as f64 / ours.len() as f64,
                    b as f64 / theirs.len() as f64,
                    ours.len()
                ),
            );
        }
    }
    if baseline.is_none() {
        v.record("C6 SOR robustness direction", false, "no matched IFGM baseline".into());
    }

    // Hardening, against a victim trained with the same pose augmentation.
    let t = Instant::now();
    let hcfg = HardeningConfig::default();
    let augmented = TrainConfig {
        epochs: 40,
        augmentation: Augmentation {
            max_rotation: hcfg.rotation_max_angle,
            scale_lo: hcfg.scale_lo,
            scale_hi: hcfg.scale_hi,
            max_translation: hcfg.translation_max,
            jitter: 0.0,
        },
        ..Default::default()
    };
    let robust = train(&train_set, &augmented).unwrap().model;
    let pool = correct(&robust, &test, usize::MAX);
    let step = (pool.len() / HARDENING_CLOUDS).max(1);
    let subset: Vec<&PointCloud> = pool.iter().step_by(step).take(HARDENING_CLOUDS).copied().collect();
    let rcfg = RegionSearchConfig::default();
    let zero_margin = AttackConfig { kappa: 0.0, ..Default::default() };
    let plain = attack_all(&robust, &subset, &zero_margin);
    let hardened: Vec<AttackResult> = par::map_slice(&subset, |c| hardened_attack(&robust, c, &zero_margin, &rcfg, &hcfg).unwrap());
    for (c, r) in subset.iter().zip(&plain) {
        checked += 1;
        if let Some(d) = convexity_violation(c, r) {
            violations.push(format!("hardening run exceeds bound by {d:.2e}"));
        }
    }
    for (c, r) in subset.iter().zip(&hardened) {
        checked += 1;
        if let Some(d) = convexity_violation(c, r) {
            violations.push(format!("hardened run exceeds bound by {d:.2e}"));
        }
    }
    let (p_pose, p_scan) = retained(&robust, &plain, &hcfg);
    let (h_pose, h_scan) = retained(&robust, &hardened, &hcfg);
    let draws = subset.len() as u64 * DRAWS;
    v.record(
        "C7 hardening effect",
        h_pose > p_pose && h_scan > p_scan && subset.len() >= 50,
        format!(
            "of {draws} draws over {} clouds: pose {h_pose} vs {p_pose}, rescan {h_scan} vs {p_scan} (hardened vs plain; ASR {:.3} vs {:.3}; {:.1}s)",
            subset.len(),
            asr(&hardened),
            asr(&plain),
            t.elapsed().as_secs_f64()
        ),
    );
    {
        // Same comparison at the default margin, for context only.
        let few: Vec<&PointCloud> = subset.iter().take(10).copied().collect();
        let cfg = AttackConfig::default();
        let p: Vec<AttackResult> = attack_all(&robust, &few, &cfg);
        let h: Vec<AttackResult> = par::map_slice(&few, |c| hardened_attack(&robust, c, &cfg, &rcfg, &hcfg).unwrap());
        let (a, b) = (retained(&robust, &h, &hcfg), retained(&robust, &p, &hcfg));
        println!("info hardening at kappa=30 on {} clouds: pose {} vs {}, rescan {} vs {}", few.len(), a.0, b.0, a.1, b.1);
    }

    // Ablation directions on the first clouds of the efficacy run.
    let t = Instant::now();
    let few = &clouds[..ABLATION_CLOUDS.min(clouds.len())];
    let base = &hits[..few.len()];
    let low_kappa = attack_all(&victim, few, &AttackConfig { kappa: 0.0, ..Default::default() });
    let narrow = attack_all(&victim, few, &AttackConfig { a: 0.5, ..Default::default() });
    for (c, r) in few.iter().zip(&low_kappa) {
        checked += 1;
        if let Some(d) = convexity_violation(c, r) {
            violations.push(format!("ablation run exceeds bound by {d:.2e}"));
        }
    }
    for (c, r) in few.iter().zip(&narrow) {
        checked += 1;
        if let Some(d) = convexity_violation(c, r) {
            violations.push(format!("ablation run exceeds bound by {d:.2e}"));
        }
    }
    let (k0, k30) = (csd_of_successes(&low_kappa), csd_of_successes(base));
    let (a05, a15) = (csd_of_successes(&narrow), k30);
    let drop = asr(&narrow) - asr(base);
    v.record(
        "C8 ablation directions",
        k30 > k0 && a15 < a05 && drop <= 0.10 + 1e-12,
        format!(
            "CSD kappa 0 -> 30: {k0:.4} -> {k30:.4}; a 0.5 -> 1.5: {a05:.4} -> {a15:.4}, ASR {:.3} -> {:.3} ({} clouds, {:.1}s)",
            asr(&narrow),
            asr(base),
            few.len(),
            t.elapsed().as_secs_f64()
        ),
    );

    v.record(
        "C3 no-outlier guarantee",
        violations.is_empty(),
        if violations.is_empty() {
            format!("{checked} deformation results, zero violations")
        } else {
            format!("{} violations: {}", violations.len(), violations.join("; "))
        },
    );

    // Invariants.
    let t = Instant::now();
    let invariants: [(&str, fn(u64) -> Check, u64); 7] = [
        ("permutation", check_permutation, 100),
        ("curvature similarity", check_curvature_rigid, 50),
        ("csd similarity", check_csd_rigid, 50),
        ("sigma clipping", check_sigma_clip, 100),
        ("zero field", check_zero_field, 100),
        ("maxot monotone", check_maxot_monotone, 50),
        ("replay", check_replay, 10),
    ];
    let failures: Vec<String> = invariants
        .iter()
        .filter_map(|(name, c, n)| match std::panic::catch_unwind(|| run_checks(*n, *c)) {
            Ok(r) => r.err().map(|e| format!("{name}: {e}")),
            Err(_) => Some(format!("{name}: panicked")),
        })
        .collect();
    v.record(
        "C9 invariant suite",
        failures.is_empty(),
        if failures.is_empty() {
            format!("7 invariant families hold ({:.1}s)", t.elapsed().as_secs_f64())
        } else {
            failures.join("; ")
        },
    );

    let failed: Vec<&str> = v.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {}/{} passed in {:.1} min{}",
        v.lines.len() - failed.len(),
        v.lines.len(),
        start.elapsed().as_secs_f64() / 60.0,
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
