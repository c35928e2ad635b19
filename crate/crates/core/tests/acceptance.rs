//! Acceptance criteria P1-P10. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use alpf_core::acquisition::{binary_entropy, binary_split_question, edc, eig, erc};
use alpf_core::datagen::{gen_hierarchical_gaussians, make_adversarial, SynthParams};
use alpf_core::engine::{
    audit_text, metrics_csv, metrics_json, run, Phase, RoundMetrics, RunOutcome,
};
use alpf_core::model::Sample;
use alpf_core::study::{run_study, StudyConfig};
use alpf_core::*;
use common::{desk_train, median, random_hierarchy};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const K16: usize = 16;
const RETRAIN_INTERVAL: usize = 400;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_set<R: Rng>(k: usize, rng: &mut R) -> ClassSet {
    loop {
        let s = ClassSet::from_indices(k, (0..k).filter(|_| rng.random_bool(0.5)));
        if !s.is_empty() {
            return s;
        }
    }
}

fn random_dist<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn p1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut cases = 0;
    while cases < 10_000 {
        let k = rng.random_range(2..=32);
        let label = PartialLabel::new(random_set(k, &mut rng)).unwrap();
        let c = random_set(k, &mut rng);
        if !label.is_informative(&c) {
            continue;
        }
        let no = label.update(&c, Answer::No).map_err(|e| e.to_string())?;
        let yes = label.update(&c, Answer::Yes).map_err(|e| e.to_string())?;
        let disjoint = no.potential().is_disjoint(yes.potential());
        let covers = no.potential().union(yes.potential()) == *label.potential();
        if !(disjoint && covers && no.len() < label.len() && yes.len() < label.len()) {
            return Err(format!("partition fails for {label:?} / {c}"));
        }
        cases += 1;
    }
    let mut sequences = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=32);
        let h = random_hierarchy(k, &mut rng);
        let truth = rng.random_range(0..k);
        let mut label = PartialLabel::full(k);
        let mut steps = 0;
        while !label.is_exact() {
            let informative: Vec<&ClassSet> = h
                .composites()
                .iter()
                .filter(|c| label.is_informative(c))
                .collect();
            let c = *informative
                .choose(&mut rng)
                .ok_or("no informative question on a non-exact label")?;
            label = label
                .update(c, Answer::from_bit(c.contains(truth)))
                .map_err(|e| e.to_string())?;
            steps += 1;
            if steps > h.m() {
                return Err("oracle sequence did not terminate".into());
            }
        }
        if label.exact_class() != Some(truth) {
            return Err(format!("terminated at {label:?}, truth {truth}"));
        }
        sequences += 1;
    }
    Ok(format!(
        "{cases} partitions, {sequences} oracle sequences end at the true class"
    ))
}

fn p2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(2..=10);
        let d = rng.random_range(1..=8);
        let clf = Classifier::init(Architecture::Linear, k, d, rng.random());
        let n = rng.random_range(1..=20);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let labels: Vec<PartialLabel> = ys.iter().map(|&y| PartialLabel::exact(k, y)).collect();
        let batch: Vec<Sample<'_>> = rows.iter().map(Vec::as_slice).zip(&labels).collect();
        let (loss, _) = clf.partial_loss(&batch).map_err(|e| e.to_string())?;
        let ce: f64 = rows
            .iter()
            .zip(&ys)
            .map(|(x, &y)| {
                let z = clf.logits(x).unwrap();
                let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - z[y]
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((loss - ce).abs());

        let full: Vec<PartialLabel> = (0..n).map(|_| PartialLabel::full(k)).collect();
        let batch: Vec<Sample<'_>> = rows.iter().map(Vec::as_slice).zip(&full).collect();
        let (loss, grad) = clf.partial_loss(&batch).map_err(|e| e.to_string())?;
        if loss != 0.0 || grad.iter().any(|&g| g != 0.0) {
            return Err(format!("full-set labels give loss {loss}"));
        }
    }
    ensure(
        worst <= 1e-12,
        format!("max |loss - cross-entropy| = {worst:.2e}; full-set loss and gradient are 0"),
    )
}

fn p3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let k = rng.random_range(2..=6);
        let d = rng.random_range(1..=8);
        let arch = if case % 2 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp {
                hidden: rng.random_range(2..=6),
            }
        };
        let mut clf = Classifier::init(arch, k, d, rng.random());
        // Non-zero biases so every coordinate carries gradient.
        for t in clf.theta_mut() {
            *t += rng.random_range(-0.1..0.1);
        }
        let n = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<PartialLabel> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    PartialLabel::exact(k, rng.random_range(0..k))
                } else {
                    PartialLabel::new(random_set(k, &mut rng)).unwrap()
                }
            })
            .collect();
        let batch: Vec<Sample<'_>> = rows.iter().map(Vec::as_slice).zip(&labels).collect();
        let (_, grad) = clf.partial_loss(&batch).map_err(|e| e.to_string())?;
        for (i, &g) in grad.iter().enumerate() {
            let orig = clf.theta()[i];
            clf.theta_mut()[i] = orig + step;
            let (up, _) = clf.partial_loss(&batch).unwrap();
            clf.theta_mut()[i] = orig - step;
            let (down, _) = clf.partial_loss(&batch).unwrap();
            clf.theta_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    ensure(
        worst < 1e-5,
        format!("200 instances, max relative error {worst:.2e}"),
    )
}

fn p4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 10_000 {
        let k = rng.random_range(2..=12);
        let yhat = random_dist(k, &mut rng);
        let label = PartialLabel::new(random_set(k, &mut rng)).unwrap();
        let c = random_set(k, &mut rng);
        if !label.is_informative(&c) {
            continue;
        }
        let mass: f64 = label.potential().iter().map(|y| yhat[y]).sum();
        let inside: f64 = label
            .potential()
            .intersection(&c)
            .iter()
            .map(|y| yhat[y])
            .sum();
        let v = eig(&yhat, &label, &c).map_err(|e| e.to_string())?;
        worst = worst.max((v - binary_entropy(inside / mass)).abs());
        cases += 1;
    }
    let worked = eig(
        &[0.7, 0.2, 0.1],
        &PartialLabel::full(3),
        &ClassSet::singleton(3, 0),
    )
    .unwrap();
    let grid_best = (1..100)
        .map(|i| i as f64 / 100.0)
        .max_by(|a, b| binary_entropy(*a).total_cmp(&binary_entropy(*b)))
        .unwrap();
    ensure(
        worst < 1e-9 && (worked - 0.610864).abs() < 5e-7 && (grid_best - 0.5).abs() < 1e-12,
        format!("max |eig - H_b(p)| = {worst:.2e}; worked case {worked:.6}; grid argmax p = {grid_best}"),
    )
}

fn p5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=12);
        let yhat = random_dist(k, &mut rng);
        let label = PartialLabel::new(random_set(k, &mut rng)).unwrap();
        let c = random_set(k, &mut rng);
        if !label.is_informative(&c) {
            continue;
        }
        let r = erc(&yhat, &label, &c).unwrap();
        let e = edc(&yhat, &label, &c).unwrap();
        worst = worst.max((r + e - label.len() as f64).abs());
        if label.len() == 2 {
            if r != 1.0 {
                return Err(format!("erc = {r} on a two-class label"));
            }
            pairs += 1;
        }
    }
    ensure(
        worst <= 1e-12,
        format!("max |erc + edc - |y|| = {worst:.2e}; erc = 1 on {pairs} two-class labels"),
    )
}

fn p6() -> Check {
    for depth in 2..=6u32 {
        let h = ClassHierarchy::balanced(2, depth).map_err(|e| e.to_string())?;
        let uniform = vec![1.0; h.k()];
        for truth in 0..h.k() {
            let mut label = PartialLabel::full(h.k());
            let mut asked = 0;
            while !label.is_exact() {
                let j = binary_split_question(&uniform, &label, h.composites())
                    .map_err(|e| e.to_string())?;
                let c = &h.composites()[j];
                label = label
                    .update(c, Answer::from_bit(c.contains(truth)))
                    .unwrap();
                asked += 1;
            }
            if asked != depth as usize || label.exact_class() != Some(truth) {
                return Err(format!(
                    "k = {}: class {truth} took {asked} questions",
                    h.k()
                ));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..2000 {
        let k = rng.random_range(2..=8);
        let h = random_hierarchy(k, &mut rng);
        let prior = random_dist(k, &mut rng);
        let label = PartialLabel::new(random_set(k, &mut rng)).unwrap();
        if label.is_exact() {
            continue;
        }
        let mass: f64 = label.potential().iter().map(|y| prior[y]).sum();
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in h.composites().iter().enumerate() {
            if !label.is_informative(c) {
                continue;
            }
            let share: f64 = label
                .potential()
                .intersection(c)
                .iter()
                .map(|y| prior[y])
                .sum::<f64>()
                / mass;
            let dist = (share - 0.5).abs();
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((j, dist));
            }
        }
        let got =
            binary_split_question(&prior, &label, h.composites()).map_err(|e| e.to_string())?;
        let (want, want_dist) = best.unwrap();
        if got != want {
            let c = &h.composites()[got];
            let share: f64 = label
                .potential()
                .intersection(c)
                .iter()
                .map(|y| prior[y])
                .sum::<f64>()
                / mass;
            if ((share - 0.5).abs() - want_dist).abs() > 1e-12 {
                return Err(format!("picked composite {got}, brute force {want}"));
            }
        }
    }
    Ok("depth d questions for k = 2^d, d = 2..6; 2000 brute-force argmin checks on k <= 8".into())
}

fn p7() -> Check {
    let rows: Vec<(f64, f64)> = SEEDS
        .par_iter()
        .map(|&seed| {
            let (data, h) = gen_hierarchical_gaussians(&SynthParams::synth16(seed)).unwrap();
            let cfg = StudyConfig {
                gammas: vec![0.2],
                levels: vec![1, 2],
                train: TrainConfig {
                    seed,
                    ..desk_train()
                },
                seed,
            };
            let table = run_study(&data, &h, &cfg).unwrap();
            let d = &table.rows[0].deltas;
            (d[0].unwrap(), d[1].unwrap())
        })
        .collect();
    let l1 = median(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let l2 = median(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    ensure(
        l1 >= 0.01 && l1 >= l2,
        format!("median gain level 1 {l1:+.4}, level 2 {l2:+.4}"),
    )
}

struct Synth {
    pool: Arc<engine::Pool>,
    hierarchy: Arc<ClassHierarchy>,
    truth: Vec<usize>,
}

fn synth(seed: u64) -> Synth {
    let (data, h) = gen_hierarchical_gaussians(&SynthParams::synth16(seed)).unwrap();
    Synth {
        pool: Arc::new(engine::Pool::with_diagnostics(&data, K16)),
        hierarchy: Arc::new(h),
        truth: data.train_labels(),
    }
}

fn simulate(s: &Synth, mode: Mode, budget: usize, seed: u64) -> RunOutcome {
    let cfg = ExperimentConfig {
        train: desk_train(),
        ..ExperimentConfig::new(mode, RETRAIN_INTERVAL, budget, seed)
    };
    let mut oracle = OracleAnnotator::new(s.truth.clone(), K16).unwrap();
    run(
        cfg,
        Arc::clone(&s.pool),
        Arc::clone(&s.hierarchy),
        &mut oracle,
    )
    .unwrap()
}

fn accuracy_at(history: &[RoundMetrics], spend: usize) -> f64 {
    history
        .iter()
        .filter(|m| m.questions_asked <= spend)
        .filter_map(|m| m.accuracy)
        .next_back()
        .unwrap_or(0.0)
}

fn selected_entropy(history: &[RoundMetrics]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for m in history {
        let n: usize = m.selected_per_class.iter().sum();
        if let Some(e) = m.mean_selected_entropy {
            total += e * n as f64;
            count += n;
        }
    }
    total / count.max(1) as f64
}

const P8_MODES: [&str; 5] = ["baseline", "alpf-erc", "aq-eig", "aq-edc", "aq-erc"];

// Baseline first (to size the budget), then the other modes at that budget.
fn p8_runs() -> Vec<(u64, Vec<(String, RunOutcome)>)> {
    SEEDS
        .par_iter()
        .map(|&seed| {
            let s = synth(seed);
            let base = simulate(&s, Mode::Baseline, usize::MAX, seed);
            let budget = base.state.questions_asked;
            let mut runs = vec![("baseline".to_string(), base)];
            for name in &P8_MODES[1..] {
                runs.push((
                    name.to_string(),
                    simulate(&s, name.parse().unwrap(), budget, seed),
                ));
            }
            runs.push((
                "alpf-eig".to_string(),
                simulate(&s, "alpf-eig".parse().unwrap(), budget, seed),
            ));
            (seed, runs)
        })
        .collect()
}

fn p8(runs: &[(u64, Vec<(String, RunOutcome)>)]) -> Check {
    let get = |r: &[(String, RunOutcome)], name: &str| -> usize {
        r.iter().position(|(n, _)| n == name).unwrap()
    };
    let mut ratio = Vec::new();
    let mut gap = Vec::new();
    let mut aq_ratio: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for (_, r) in runs {
        let base = &r[get(r, "baseline")].1;
        let alpf = &r[get(r, "alpf-erc")].1;
        let cost = base.state.questions_asked as f64;
        if alpf.stop != StopReason::Complete {
            return Err("ALPF-ERC did not finish labeling within the Baseline cost".into());
        }
        ratio.push(alpf.state.questions_asked as f64 / cost);
        let spend = (0.3 * cost).floor() as usize;
        gap.push(accuracy_at(alpf.history(), spend) - accuracy_at(base.history(), spend));
        for (i, name) in ["aq-eig", "aq-edc", "aq-erc"].iter().enumerate() {
            let aq = &r[get(r, name)].1;
            let used = if aq.stop == StopReason::Complete {
                aq.state.questions_asked as f64
            } else {
                f64::INFINITY
            };
            aq_ratio[i].push(used / cost);
        }
    }
    let ratio = median(&ratio);
    let gap = median(&gap);
    let aq: Vec<f64> = aq_ratio.iter().map(|v| median(v)).collect();
    ensure(
        ratio <= 0.85 && gap >= 0.0 && aq.iter().all(|&r| r < 1.0),
        format!(
            "ALPF-ERC cost {ratio:.3}x Baseline; accuracy gap at 30% spend {gap:+.4}; AQ-EIG/EDC/ERC cost {:.3}x/{:.3}x/{:.3}x",
            aq[0], aq[1], aq[2]
        ),
    )
}

fn p9(runs: &[(u64, Vec<(String, RunOutcome)>)]) -> Check {
    let pick = |r: &[(String, RunOutcome)], name: &str| -> f64 {
        selected_entropy(r.iter().find(|(n, _)| n == name).unwrap().1.history())
    };
    let eig_h = median(
        &runs
            .iter()
            .map(|(_, r)| pick(r, "alpf-eig"))
            .collect::<Vec<_>>(),
    );
    let erc_h = median(
        &runs
            .iter()
            .map(|(_, r)| pick(r, "alpf-erc"))
            .collect::<Vec<_>>(),
    );

    let shares: Vec<f64> = SEEDS
        .par_iter()
        .map(|&seed| {
            let (data, h) = gen_hierarchical_gaussians(&SynthParams::synth16(seed)).unwrap();
            let adv = make_adversarial(&data, K16, 2, seed).unwrap();
            let truth = adv.dataset.train_labels();
            let easy = |i: usize| adv.easy_classes.contains(&truth[i]);
            let n_easy = (0..truth.len()).filter(|&i| easy(i)).count();
            let s = Synth {
                pool: Arc::new(engine::Pool::with_diagnostics(&adv.dataset, K16)),
                hierarchy: Arc::new(h),
                truth: truth.clone(),
            };
            let out = simulate(&s, "alpf-erc".parse().unwrap(), 4 * truth.len(), seed);
            let first: Vec<_> = out
                .audit()
                .iter()
                .filter(|e| e.phase == Phase::Active)
                .take(n_easy)
                .collect();
            first.iter().filter(|e| easy(e.question.example)).count() as f64
                / first.len().max(1) as f64
        })
        .collect();
    let share = median(&shares);
    ensure(
        eig_h > erc_h && share >= 0.6,
        format!("selected entropy ALPF-EIG {eig_h:.4} vs ALPF-ERC {erc_h:.4}; easy-class share of early ALPF-ERC questions {share:.3}"),
    )
}

fn p10() -> Check {
    let s = synth(7);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for mode in ["alpf-erc", "al-me", "aq-eig", "baseline"] {
        let mut bytes = Vec::new();
        for attempt in 0..2 {
            let out = simulate(&s, mode.parse().unwrap(), 3000, 7);
            let base = dir.path().join(format!("{mode}-{attempt}"));
            std::fs::create_dir_all(&base).unwrap();
            std::fs::write(base.join("audit.log"), audit_text(out.audit())).unwrap();
            std::fs::write(base.join("metrics.csv"), metrics_csv(out.history())).unwrap();
            std::fs::write(base.join("metrics.json"), metrics_json(out.history())).unwrap();
            bytes.push(
                ["audit.log", "metrics.csv", "metrics.json"]
                    .map(|f| std::fs::read(base.join(f)).unwrap()),
            );
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{mode}: outputs differ between runs"));
        }
        files += 3;
    }
    Ok(format!("{files} files byte-identical across repeated runs"))
}

fn report(name: &str, start: Instant, outcome: std::thread::Result<Check>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(p) => (
            false,
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()),
        ),
    };
    println!(
        "{name} {} ({secs:.1}s) {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn main() {
    let mut all = true;
    type Criterion = (&'static str, fn() -> Check);
    let quick: [Criterion; 7] = [
        ("P1", p1),
        ("P2", p2),
        ("P3", p3),
        ("P4", p4),
        ("P5", p5),
        ("P6", p6),
        ("P7", p7),
    ];
    for (name, f) in quick {
        let t = Instant::now();
        all &= report(name, t, catch_unwind(f));
    }
    let t = Instant::now();
    let runs = catch_unwind(p8_runs);
    match runs {
        Ok(runs) => {
            all &= report("P8", t, catch_unwind(AssertUnwindSafe(|| p8(&runs))));
            let t = Instant::now();
            all &= report("P9", t, catch_unwind(AssertUnwindSafe(|| p9(&runs))));
        }
        Err(p) => {
            report("P8", t, Err(p));
            all = false;
            println!("P9 FAIL shared simulation runs panicked");
        }
    }
    let t = Instant::now();
    all &= report("P10", t, catch_unwind(p10));
    if !all {
        std::process::exit(1);
    }
}
