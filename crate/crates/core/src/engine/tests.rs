use super::*;
use crate::acquisition::QuestionStrategy;
use crate::annotator::OracleAnnotator;
use crate::datagen::{gen_hierarchical_gaussians, SynthParams};
use crate::model::Architecture;

fn small_data(
    k_depth: u32,
    n_train: usize,
    seed: u64,
) -> (Arc<Pool>, Arc<ClassHierarchy>, Vec<usize>) {
    let p = SynthParams {
        k: 1 << k_depth,
        branching: 2,
        depth: k_depth,
        d: 6,
        n_train,
        n_holdout: 40,
        root_scale: 4.0,
        decay: 0.5,
        seed,
    };
    let (data, h) = gen_hierarchical_gaussians(&p).unwrap();
    let truth = data.train_labels();
    (
        Arc::new(Pool::with_diagnostics(&data, h.k())),
        Arc::new(h),
        truth,
    )
}

fn fast_cfg(mode: Mode, interval: usize, budget: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            epochs: 3,
            learning_rate: 0.01,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::new(mode, interval, budget, seed)
    }
}

fn oracle(truth: &[usize], k: usize) -> OracleAnnotator {
    OracleAnnotator::new(truth.to_vec(), k).unwrap()
}

#[test]
fn no_warm_start_and_no_budget_gives_empty_history() {
    let (pool, h, truth) = small_data(2, 40, 1);
    let cfg = ExperimentConfig {
        warm_start_fraction: 0.0,
        ..fast_cfg(Mode::Baseline, 10, 0, 1)
    };
    let out = run(cfg, pool, h, &mut oracle(&truth, 4)).unwrap();
    assert_eq!(out.stop, StopReason::Exhausted);
    assert!(out.history().is_empty());
    assert_eq!(out.state.questions_asked, 0);
    assert!(out.state.labels.iter().all(PartialLabel::is_trivial));
}

#[test]
fn zero_budget_with_warm_start_reports_warm_round_only() {
    let (pool, h, truth) = small_data(2, 40, 1);
    let out = run(
        fast_cfg(Mode::Baseline, 10, 0, 1),
        pool,
        h,
        &mut oracle(&truth, 4),
    )
    .unwrap();
    assert_eq!(out.history().len(), 1);
    assert_eq!(out.history()[0].questions_asked, 0);
    assert!(out.state.warm_start_incomplete);
}

#[test]
fn warm_start_charges_two_questions_per_example_on_four_leaf_tree() {
    let (pool, h, truth) = small_data(2, 100, 2);
    let cfg = ExperimentConfig {
        warm_start_fraction: 0.1,
        ..fast_cfg(Mode::Alpf(QuestionStrategy::Erc), 5, 20, 2)
    };
    let mut exp = Experiment::new(cfg, pool, h).unwrap();
    assert_eq!(exp.warm_sample().len(), 10);
    let mut annot = oracle(&truth, 4);
    drive(&mut exp, &mut annot).unwrap();
    let state = exp.state();
    assert_eq!(state.questions_asked, 20);
    assert!(state.audit.iter().all(|e| e.phase == Phase::Warm));
    assert_eq!(state.labels.iter().filter(|l| l.is_exact()).count(), 10);
    assert!(!state.warm_start_incomplete);
}

#[test]
fn warm_start_sample_size_rounds_up() {
    let (pool, h, _) = small_data(2, 1000, 3);
    let exp = Experiment::new(fast_cfg(Mode::Baseline, 10, 0, 3), pool, h).unwrap();
    assert_eq!(exp.warm_sample().len(), 50);
}

#[test]
fn budget_exhausted_mid_warm_start_is_flagged() {
    let (pool, h, truth) = small_data(2, 100, 4);
    let out = run(
        fast_cfg(Mode::Baseline, 10, 7, 4),
        pool,
        h,
        &mut oracle(&truth, 4),
    )
    .unwrap();
    assert_eq!(out.stop, StopReason::Exhausted);
    assert_eq!(out.state.questions_asked, 7);
    assert!(out.state.warm_start_incomplete);
    assert_eq!(out.history().len(), 1);
}

// Independent cost of labeling one example by repeatedly splitting the
// uniform mass over its remaining classes, written without the engine.
fn splitting_path_cost(h: &ClassHierarchy, y: usize) -> usize {
    let mut remaining: Vec<usize> = (0..h.k()).collect();
    let mut cost = 0;
    while remaining.len() > 1 {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in h.composites().iter().enumerate() {
            let inside = remaining.iter().filter(|&&r| c.contains(r)).count();
            if inside == 0 || inside == remaining.len() {
                continue;
            }
            let dist = (inside as f64 / remaining.len() as f64 - 0.5).abs();
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((j, dist));
            }
        }
        let c = &h.composites()[best.unwrap().0];
        let yes = c.contains(y);
        remaining.retain(|&r| c.contains(r) == yes);
        cost += 1;
    }
    cost
}

#[test]
fn baseline_cost_matches_standalone_splitting() {
    // An unbalanced tree so path costs differ between classes.
    let doc = r#"{"name":"r","children":[
        {"name":"a"},
        {"name":"x","children":[{"name":"b"},{"name":"c"},
            {"name":"y","children":[{"name":"d"},{"name":"e"}]}]}]}"#;
    let h = Arc::new(ClassHierarchy::from_json(doc).unwrap());
    let (pool, _, _) = small_data(2, 60, 5);
    let truth: Vec<usize> = (0..60).map(|i| (i * 7) % 5).collect();
    let data = crate::datagen::Dataset::new(
        1,
        (0..60).map(|i| i as f64).collect(),
        truth.clone(),
        5,
        (0..60).collect(),
        vec![],
    )
    .unwrap();
    drop(pool);
    let pool = Arc::new(Pool::from_dataset(&data, 5));
    let expected: usize = truth.iter().map(|&y| splitting_path_cost(&h, y)).sum();
    let out = run(
        fast_cfg(Mode::Baseline, 25, usize::MAX, 5),
        pool,
        Arc::clone(&h),
        &mut oracle(&truth, 5),
    )
    .unwrap();
    assert_eq!(out.stop, StopReason::Complete);
    assert_eq!(out.state.questions_asked, expected);
    assert!(out.history().last().unwrap().accuracy.is_none());
}

#[test]
fn identical_config_gives_identical_audit() {
    for mode in Mode::grid() {
        let (pool, h, truth) = small_data(3, 60, 6);
        let cfg = fast_cfg(mode, 20, 150, 6);
        let a = run(
            cfg.clone(),
            Arc::clone(&pool),
            Arc::clone(&h),
            &mut oracle(&truth, 8),
        )
        .unwrap();
        let b = run(cfg, pool, h, &mut oracle(&truth, 8)).unwrap();
        assert_eq!(audit_text(a.audit()), audit_text(b.audit()), "{mode}");
        assert_eq!(metrics_csv(a.history()), metrics_csv(b.history()), "{mode}");
    }
}

fn replay_checks(out: &RunOutcome, h: &ClassHierarchy, truth: &[usize], budget: usize) {
    let mut labels = vec![PartialLabel::full(h.k()); truth.len()];
    for (t, e) in out.audit().iter().enumerate() {
        assert_eq!(e.t, t);
        let label = &labels[e.question.example];
        let c = &h.composites()[e.question.composite];
        assert!(!label.is_exact(), "queried an exact example");
        assert!(label.is_informative(c), "asked an implied question");
        labels[e.question.example] = label.update(c, e.answer).unwrap();
        assert!(labels[e.question.example].contains(truth[e.question.example]));
    }
    assert_eq!(labels, out.state.labels);
    assert_eq!(out.audit().len(), out.state.questions_asked);
    assert!(out.state.questions_asked <= budget);
    for pair in out.history().windows(2) {
        assert!(pair[1].mean_remaining <= pair[0].mean_remaining);
        assert!(pair[1].fraction_exact >= pair[0].fraction_exact);
    }
}

#[test]
fn every_mode_completes_with_ample_budget() {
    let (pool, h, truth) = small_data(3, 80, 7);
    let worst: usize = truth.len() * (h.m() - 1);
    for mode in Mode::grid() {
        let out = run(
            fast_cfg(mode, 30, worst, 7),
            Arc::clone(&pool),
            Arc::clone(&h),
            &mut oracle(&truth, 8),
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::Complete, "{mode}");
        assert!(out
            .state
            .labels
            .iter()
            .zip(&truth)
            .all(|(l, &y)| l.exact_class() == Some(y)));
        replay_checks(&out, &h, &truth, worst);
    }
}

#[test]
fn limited_budget_is_respected() {
    let (pool, h, truth) = small_data(3, 80, 8);
    for mode in Mode::grid() {
        let out = run(
            fast_cfg(mode, 17, 90, 8),
            Arc::clone(&pool),
            Arc::clone(&h),
            &mut oracle(&truth, 8),
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::Exhausted, "{mode}");
        assert_eq!(out.state.questions_asked, 90);
        replay_checks(&out, &h, &truth, 90);
        let last = out.history().last().unwrap();
        assert_eq!(last.questions_asked, 90);
    }
}

// Puts `exp` into a state with the given labels and a zero (uniform) model.
fn install_uniform(exp: &mut Experiment, labels: Vec<PartialLabel>) {
    exp.state.labels = labels;
    exp.stage = Stage::NeedsTraining;
    let clf = Classifier::zeros(Architecture::Linear, exp.pool.k(), exp.pool.d());
    exp.install(clf).unwrap();
}

#[test]
fn alpf_erc_prefers_pair_label_singleton() {
    let (pool, h, _) = small_data(3, 20, 9);
    let mut exp = Experiment::new(
        fast_cfg(Mode::Alpf(QuestionStrategy::Erc), 10, 1000, 9),
        pool,
        Arc::clone(&h),
    )
    .unwrap();
    let mut labels = vec![PartialLabel::full(8); 20];
    labels[13] = PartialLabel::new(ClassSet::from_indices(8, [4, 5])).unwrap();
    install_uniform(&mut exp, labels.clone());
    let q = exp.select_next().unwrap();

    // Brute force over every informative pair.
    let mut best: Option<(Question, f64)> = None;
    for (i, label) in labels.iter().enumerate() {
        for (j, c) in h.composites().iter().enumerate() {
            if !label.is_informative(c) {
                continue;
            }
            let v = crate::acquisition::erc(exp.prediction(i).unwrap(), label, c).unwrap();
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((
                    Question {
                        example: i,
                        composite: j,
                    },
                    v,
                ));
            }
        }
    }
    let (expected, value) = best.unwrap();
    assert_eq!(q, expected);
    assert_eq!(value, 1.0);
    assert_eq!(q.example, 13);
    assert_eq!(h.composites()[q.composite].len(), 1);
}

#[test]
fn alpf_queue_matches_serial_rescoring() {
    let (pool, h, truth) = small_data(3, 50, 10);
    let cfg = fast_cfg(Mode::Alpf(QuestionStrategy::Eig), 1000, 1000, 10);
    let mut exp = Experiment::new(cfg, pool, Arc::clone(&h)).unwrap();
    let annot = oracle(&truth, 8);
    // Finish warm-start and first training.
    loop {
        match exp.next_step().unwrap() {
            Step::Ask(q) => {
                let c = h.composites()[q.composite].clone();
                exp.answer(q, annot.oracle_answer(q, &c).unwrap()).unwrap();
            }
            Step::Retrain => {
                exp.retrain().unwrap();
                break;
            }
            Step::Finished(_) => panic!("finished early"),
        }
    }
    for _ in 0..40 {
        let Step::Ask(q) = exp.next_step().unwrap() else {
            break;
        };
        // Serial argmax over the same cached predictions.
        let mut best: Option<(Question, f64)> = None;
        for i in 0..exp.state.labels.len() {
            for (j, u) in exp.score_example(i) {
                if best.is_none_or(|(_, b)| u > b) {
                    best = Some((
                        Question {
                            example: i,
                            composite: j,
                        },
                        u,
                    ));
                }
            }
        }
        assert_eq!(q, best.unwrap().0);
        let c = h.composites()[q.composite].clone();
        exp.answer(q, annot.oracle_answer(q, &c).unwrap()).unwrap();
    }
}

#[test]
fn aq_sticks_with_current_example() {
    let (pool, h, truth) = small_data(3, 30, 11);
    let cfg = ExperimentConfig {
        warm_start_fraction: 0.0,
        ..fast_cfg(Mode::Aq(QuestionStrategy::Eig), 100, 1000, 11)
    };
    let mut exp = Experiment::new(cfg, pool, Arc::clone(&h)).unwrap();
    assert_eq!(exp.next_step().unwrap(), Step::Retrain);
    exp.retrain().unwrap();
    let annot = oracle(&truth, 8);
    let mut previous: Option<usize> = None;
    for _ in 0..60 {
        let Step::Ask(q) = exp.next_step().unwrap() else {
            break;
        };
        if let Some(p) = previous {
            if !exp.state.labels[p].is_exact() {
                assert_eq!(q.example, p);
            }
        }
        previous = Some(q.example);
        let c = h.composites()[q.composite].clone();
        exp.answer(q, annot.oracle_answer(q, &c).unwrap()).unwrap();
    }
}

#[test]
fn next_step_is_idempotent_and_rejects_wrong_answers() {
    let (pool, h, _) = small_data(2, 20, 12);
    let mut exp = Experiment::new(fast_cfg(Mode::Baseline, 5, 100, 12), pool, h).unwrap();
    let Step::Ask(q) = exp.next_step().unwrap() else {
        panic!("expected a question")
    };
    assert_eq!(exp.next_step().unwrap(), Step::Ask(q));
    let other = Question {
        example: q.example,
        composite: q.composite + 1,
    };
    assert!(matches!(
        exp.answer(other, Answer::Yes),
        Err(Error::Protocol(_))
    ));
    assert_eq!(exp.state().questions_asked, 0);
    assert!(matches!(
        exp.install(Classifier::zeros(Architecture::Linear, 4, 6)),
        Err(Error::Protocol(_))
    ));
}

#[test]
fn contradictory_answer_leaves_state_unchanged() {
    let (pool, h, _) = small_data(2, 20, 13);
    let mut exp =
        Experiment::new(fast_cfg(Mode::Baseline, 5, 100, 13), pool, Arc::clone(&h)).unwrap();
    let Step::Ask(q) = exp.next_step().unwrap() else {
        panic!("expected a question")
    };
    // Narrow the pending example to classes outside the asked composite, so
    // "yes" would leave nothing.
    let c = h.composites()[q.composite].clone();
    let outside = exp.state.labels[q.example].potential().difference(&c);
    exp.state.labels[q.example] = PartialLabel::new(outside).unwrap();
    let snapshot = exp.state().labels.clone();
    let err = exp.answer(q, Answer::Yes).unwrap_err();
    assert!(matches!(err, Error::InconsistentAnswer { .. }), "{err:?}");
    assert_eq!(exp.state().labels, snapshot);
    assert_eq!(exp.state().questions_asked, 0);
    assert!(exp.state().audit.is_empty());
    assert_eq!(exp.pending(), Some(q));
}

#[test]
fn mlp_architecture_runs() {
    let (pool, h, truth) = small_data(2, 40, 14);
    let cfg = ExperimentConfig {
        train: TrainConfig {
            epochs: 2,
            architecture: Architecture::Mlp { hidden: 8 },
            ..TrainConfig::default()
        },
        ..ExperimentConfig::new(Mode::Alpf(QuestionStrategy::Edc), 20, 200, 14)
    };
    let out = run(cfg, pool, Arc::clone(&h), &mut oracle(&truth, 4)).unwrap();
    replay_checks(&out, &h, &truth, 200);
}
