//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits non-zero if any gating criterion fails.
//!
//! Criterion 10 (MNIST 3-vs-8) is non-gating. It runs only when
//! `MPBOOST_MNIST_TRAIN` and `MPBOOST_MNIST_TEST` point at CSV files with a
//! `label` column; `MPBOOST_MNIST_POSITIVE` picks the positive class
//! (default `8`).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mpboost::{
    fit_tree, generate_cones, load_csv, train, train_test_split, train_with_test, Dataset64, Decision, DepthLimit,
    Hyperparams, Label, LabelColumn, LossKind, MpRng, Node, StoppingState, TrainState, Trainer,
};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cones_split() -> (Dataset64, Dataset64) {
    let data = generate_cones::<f64>(2500, 10, 90, 0.3, 0).expect("cones");
    train_test_split(&data, 0.2, 0).expect("split")
}

struct ConesRun {
    accuracy: f64,
    seconds: f64,
    informative_mass: f64,
}

fn cones_default_run() -> ConesRun {
    let (train_set, test_set) = cones_split();
    let hp = Hyperparams::for_shape(train_set.n_rows(), train_set.n_cols());
    let start = Instant::now();
    let (model, _) = train(&train_set, &hp).expect("train");
    let seconds = start.elapsed().as_secs_f64();
    ConesRun {
        accuracy: model.accuracy(&test_set, true).expect("accuracy"),
        seconds,
        informative_mass: model.final_q().as_slice()[..10].iter().sum(),
    }
}

fn criterion_1(run: &ConesRun) -> Outcome {
    check(
        run.accuracy >= 0.99 && run.seconds < 60.0,
        format!("test accuracy {:.4}, training {:.2} s", run.accuracy, run.seconds),
    )
}

fn criterion_2() -> Outcome {
    let (train_set, test_set) = cones_split();
    let arms = [("both", true, true), ("rows", true, false), ("cols", false, true), ("neither", false, false)];
    let mut means = Vec::new();
    for (name, rows, cols) in arms {
        let mut total = 0.0;
        let mut iterations = 0;
        for seed in 0..5 {
            let mut hp = Hyperparams::for_shape(train_set.n_rows(), train_set.n_cols());
            hp.adaptive_rows = rows;
            hp.adaptive_cols = cols;
            hp.seed = seed;
            let (model, diag) = train(&train_set, &hp).expect("train");
            total += model.accuracy(&test_set, true).expect("accuracy");
            iterations += diag.records.len();
        }
        means.push((name, total / 5.0, iterations / 5));
    }
    let (both, rows, cols, neither) = (means[0].1, means[1].1, means[2].1, means[3].1);
    let detail = means
        .iter()
        .map(|(n, m, it)| format!("{n} {m:.4} ({it} iterations)"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        both >= rows && both >= cols && rows >= neither && cols >= neither && both - neither >= 0.02,
        detail,
    )
}

fn criterion_3(run: &ConesRun) -> Outcome {
    check(
        run.informative_mass >= 0.5,
        format!("informative q mass {:.4}", run.informative_mass),
    )
}

fn criterion_4() -> Outcome {
    let data = generate_cones::<f64>(600, 5, 45, 0.3, 11).expect("cones");
    let mut worst = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY, 0.0f64);
    for kind in [LossKind::SoftLogistic, LossKind::SoftExponential] {
        let mut hp = Hyperparams::for_shape(data.n_rows(), data.n_cols());
        hp.early_stopping = false;
        hp.t_max = 1000;
        hp.loss = kind;
        let mut trainer = Trainer::new(&data, None, &hp).expect("trainer");
        for _ in 0..1000 {
            let step = trainer.step().expect("step");
            let q = &trainer.state().q;
            let after: f64 = step.columns.iter().map(|&j| q[j]).sum();
            worst.4 = worst.4.max((after - step.column_mass_before).abs());
        }
        let s = trainer.state();
        worst.0 = worst.0.max((s.p.sum() - 1.0).abs());
        worst.1 = worst.1.max((s.q.sum() - 1.0).abs());
        worst.2 = worst.2.min(s.p.min());
        worst.3 = worst.3.min(s.q.min());
    }
    let (dp, dq, min_p, min_q, mass) = worst;
    check(
        dp < 1e-9 && dq < 1e-9 && min_p > 0.0 && min_q > 0.0 && mass < 1e-9,
        format!("|sum p - 1| {dp:.1e}, |sum q - 1| {dq:.1e}, min p {min_p:.1e}, min q {min_q:.1e}, mass drift {mass:.1e}"),
    )
}

fn brute_force_weight(kind: LossKind, y: Label, f: f64) -> f64 {
    let y = f64::from(y);
    let margin = (y * f).clamp(-50.0, 50.0);
    let hard = y * if f > 0.0 {
        1.0
    } else if f < 0.0 {
        -1.0
    } else {
        0.0
    };
    match kind {
        LossKind::SoftExponential => (-margin).exp(),
        LossKind::SoftLogistic => 1.0 / (1.0 + margin.exp()),
        LossKind::HardExponential => (-hard).exp(),
        LossKind::HardLogistic => 1.0 / (1.0 + hard.exp()),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = MpRng::seed_from_u64(5);
    for case in 0..100 {
        let n = rng.random_range(1..300);
        let t: i32 = rng.random_range(0..200);
        let kind = LossKind::ALL[rng.random_range(0..4)];
        let labels: Vec<Label> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let mut state = TrainState::new(n, 3).expect("state");
        for f in state.ensemble_output.iter_mut() {
            // parity of a sum of t votes matches t
            *f = f64::from(2 * rng.random_range(0..=t) - t);
        }
        state.update_observation_probs(&labels, kind).expect("update");

        let weights: Vec<f64> = labels
            .iter()
            .zip(&state.ensemble_output)
            .map(|(&y, &f)| brute_force_weight(kind, y, f))
            .collect();
        let mut total = 0.0;
        for w in &weights {
            total += w;
        }
        for (i, (&got, w)) in state.p.as_slice().iter().zip(&weights).enumerate() {
            let want = w / total;
            if got.to_bits() != want.to_bits() {
                return Err(format!("case {case} ({}), row {i}: {got:e} vs {want:e}", kind.name()));
            }
        }
    }
    Ok("100 random states bitwise equal".into())
}

fn gini(n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let frac_pos = pos as f64 / n as f64;
    let frac_neg = (n - pos) as f64 / n as f64;
    1.0 - frac_pos * frac_pos - frac_neg * frac_neg
}

/// Tries every (feature, midpoint between adjacent distinct values) by a
/// full rescan of the rows.
fn brute_force_root(x: &[f64], m: usize, y: &[Label]) -> Option<(usize, f64, f64)> {
    let n = y.len();
    let pos = y.iter().filter(|&&v| v == 1).count();
    let parent = gini(n, pos);
    let mut candidates = Vec::new();
    for j in 0..m {
        let mut values: Vec<f64> = (0..n).map(|i| x[i * m + j]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let (mut nl, mut pl, mut nr, mut pr) = (0, 0, 0, 0);
            for i in 0..n {
                let positive = usize::from(y[i] == 1);
                if x[i * m + j] <= threshold {
                    nl += 1;
                    pl += positive;
                } else {
                    nr += 1;
                    pr += positive;
                }
            }
            let gain = parent - nl as f64 / n as f64 * gini(nl, pl) - nr as f64 / n as f64 * gini(nr, pr);
            candidates.push((j, threshold, gain));
        }
    }
    let top = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    // distinct achievable gains differ by far more than 1e-12 at n <= 50
    candidates
        .into_iter()
        .filter(|c| c.2 >= top - 1e-12)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

fn criterion_6() -> Outcome {
    let mut rng = MpRng::seed_from_u64(6);
    let mut splits = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=50);
        let m = rng.random_range(1..=8);
        let levels = rng.random_range(2..=6);
        let x: Vec<f64> = (0..n * m).map(|_| f64::from(rng.random_range(0..levels)) * 0.5).collect();
        let y: Vec<Label> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let pure = y.iter().all(|&v| v == y[0]);

        let tree = fit_tree(&x, m, &y, DepthLimit::Saturated).expect("fit");
        let got = match tree.nodes()[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold, tree.stats()[0].impurity_decrease)),
            Node::Leaf { .. } => None,
        };
        let want = if pure { None } else { brute_force_root(&x, m, &y) };
        let agree = match (got, want) {
            (None, None) => true,
            (Some(g), Some(w)) => g.0 == w.0 && g.1 == w.1 && (g.2 - w.2).abs() <= 1e-12,
            _ => false,
        };
        if !agree {
            return Err(format!("case {case} (n={n}, m={m}): fit_tree {got:?}, brute force {want:?}"));
        }
        splits += usize::from(got.is_some());
    }
    Ok(format!("200 instances agree ({splits} with a root split)"))
}

fn run_stopping(mut state: StoppingState, seq: &[f64]) -> (Option<usize>, usize) {
    for (i, &v) in seq.iter().enumerate() {
        if state.observe(v, i + 1).expect("observe") == Decision::Halt {
            return (Some(i + 1), state.best_iteration());
        }
    }
    (None, state.best_iteration())
}

fn criterion_7() -> Outcome {
    let mut plateau_rise = vec![0.5; 4];
    plateau_rise.extend([0.8; 10]);
    let mut noisy = vec![0.70, 0.72, 0.69, 0.71, 0.70, 0.72, 0.71, 0.70];
    noisy.extend([0.69, 0.71, 0.70, 0.72]);
    let traces: Vec<(&str, StoppingState, Vec<f64>, usize, usize)> = vec![
        ("constant", StoppingState::new(10, 100, 2000), vec![0.8; 50], 12, 1),
        (
            "strictly increasing",
            StoppingState::with_params(1.1, 2, 10),
            (0..20).map(|i| 0.1 * 1.2f64.powi(i)).collect(),
            11,
            11,
        ),
        (
            "single peak",
            StoppingState::with_params(1.1, 2, 100),
            vec![0.5, 0.6, 0.9, 0.6, 0.5, 0.5, 0.5, 0.5, 0.5],
            7,
            3,
        ),
        ("plateau then rise", StoppingState::with_params(1.1, 2, 100), plateau_rise, 10, 5),
        ("noisy plateau", StoppingState::with_params(1.05, 3, 100), noisy, 8, 2),
    ];
    let mut failures = Vec::new();
    for (name, state, seq, halt, best) in traces {
        let got = run_stopping(state, &seq);
        if got != (Some(halt), best) {
            failures.push(format!("{name}: got {got:?}, traced (halt {halt}, T {best})"));
        }
    }

    let mut rng = MpRng::seed_from_u64(7);
    for case in 0..1000 {
        let len = rng.random_range(1..300);
        let seq: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..40u8)) / 40.0).collect();
        let (halt, best) = run_stopping(StoppingState::new(25, 250, 10_000), &seq);
        let seen = &seq[..halt.unwrap_or(len)];
        let mut argmax = 0;
        for (i, &v) in seen.iter().enumerate() {
            if argmax == 0 && v > 0.0 || argmax > 0 && v > seen[argmax - 1] {
                argmax = i + 1;
            }
        }
        if best != argmax {
            failures.push(format!("random sequence {case}: T {best}, first argmax {argmax}"));
            break;
        }
    }
    if failures.is_empty() {
        Ok("5 traces and 1000 random sequences".into())
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_8() -> Outcome {
    let (train_set, _) = cones_split();
    let mut hp = Hyperparams::for_shape(train_set.n_rows(), train_set.n_cols());
    hp.record_patches = true;
    let (model, diag) = train(&train_set, &hp).expect("train");
    let patches = diag.patches.as_ref().expect("patches");
    let mut mismatches = 0;
    for (i, row) in train_set.rows().enumerate() {
        let mut g = 0.0;
        for (learner, rows) in model.learners().iter().zip(patches) {
            if rows.binary_search(&i).is_err() {
                g += f64::from(learner.tree.predict_projected(row, &learner.columns));
            }
        }
        mismatches += usize::from(g != diag.oop_output[i]);
    }
    check(
        mismatches == 0 && patches.len() == model.learners().len(),
        format!("{} rows, {} iterations, {mismatches} mismatches", train_set.n_rows(), patches.len()),
    )
}

fn mpboost(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mpboost"))
        .args(args)
        .output()
        .expect("spawn mpboost")
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let data = p("cones.csv");
    let gen = mpboost(&["generate-cones", "--n-samples", "800", "--informative", "5", "--noise", "45", "--seed", "3", "--out", &data]);
    if !gen.status.success() {
        return Err(format!("generate-cones failed: {}", String::from_utf8_lossy(&gen.stderr)));
    }
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let model = p(&format!("model_{run}.json"));
        let curves = p(&format!("curves_{run}.csv"));
        let out = mpboost(&[
            "train", "--data", &data, "--test-frac", "0.2", "--seed", "7", "--model-out", &model, "--curves-out",
            &curves,
        ]);
        if !out.status.success() {
            return Err(format!("train failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        files.push((read(&model)?, read(&curves)?));
    }
    check(
        files[0] == files[1],
        format!("model {} bytes, curves {} bytes", files[0].0.len(), files[0].1.len()),
    )
}

fn read(path: impl AsRef<Path>) -> Result<Vec<u8>, String> {
    std::fs::read(path.as_ref()).map_err(|e| format!("{}: {e}", path.as_ref().display()))
}

fn criterion_10() -> Option<Outcome> {
    let train_path = PathBuf::from(std::env::var_os("MPBOOST_MNIST_TRAIN")?);
    let test_path = PathBuf::from(std::env::var_os("MPBOOST_MNIST_TEST")?);
    let positive = std::env::var("MPBOOST_MNIST_POSITIVE").unwrap_or_else(|_| "8".into());
    let label = LabelColumn::Name("label".into());
    let load = |path: &Path| load_csv::<f64>(path, &label, &positive).map_err(|e| e.to_string());
    let run = || -> Outcome {
        let train_set = load(&train_path)?;
        let test_set = load(&test_path)?;
        let mut hp = Hyperparams::for_shape(train_set.n_rows(), train_set.n_cols());
        hp.n_obs = 500;
        hp.m_feat = 30;
        hp.momentum = 0.5;
        let (model, _) = train_with_test(&train_set, Some(&test_set), &hp).map_err(|e| e.to_string())?;
        let acc = model.accuracy(&test_set, true).map_err(|e| e.to_string())?;
        check((acc - 0.9931).abs() <= 0.005, format!("test accuracy {acc:.4}"))
    };
    Some(run())
}

fn main() {
    let started = Instant::now();
    let cones = cones_default_run();
    let gating: Vec<(&str, Outcome)> = vec![
        ("1 cones accuracy and time", criterion_1(&cones)),
        ("2 adaptivity ablation ordering", criterion_2()),
        ("3 feature distribution recovery", criterion_3(&cones)),
        ("4 probability invariants", criterion_4()),
        ("5 observation update oracle", criterion_5()),
        ("6 root split oracle", criterion_6()),
        ("7 stopping traces", criterion_7()),
        ("8 out-of-patch audit", criterion_8()),
        ("9 determinism", criterion_9()),
    ];
    let mut failed = 0;
    for (name, outcome) in &gating {
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    match criterion_10() {
        None => println!("SKIP  criterion 10 MNIST 3 vs 8 (non-gating): MPBOOST_MNIST_TRAIN/TEST not set"),
        Some(Ok(detail)) => println!("PASS  criterion 10 MNIST 3 vs 8 (non-gating): {detail}"),
        Some(Err(detail)) => println!("FAIL  criterion 10 MNIST 3 vs 8 (non-gating): {detail}"),
    }
    println!(
        "{} of {} gating criteria passed in {:.1} s",
        gating.len() - failed,
        gating.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
