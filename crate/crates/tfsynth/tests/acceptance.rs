//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary so the lines always print, in order. Exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use tfsynth_core::baselines::{build_feature_bank, conv_from_program, conv_forward};
use tfsynth_core::data::{
    make_windows, planted_single, planted_two_mode, synthetic_task, LabelRule, SyntheticSpec, SyntheticTask,
    TrajectoryTable, WindowConfig, WindowGeometry, WindowedDataset,
};
use tfsynth_core::dsl::{evaluate, Architecture, FeatureSpace, HoleType, InitRanges, Node, NodeId, ParameterStore};
use tfsynth_core::eval::{f1, score, ConfusionCounts};
use tfsynth_core::filter::{filter_curve, morlet, morlet_partials, MorletParams};
use tfsynth_core::rng::seeded;
use tfsynth_core::search::{synthesize, synthesize_disjunction, Strategy, SynthesisConfig};
use tfsynth_core::train::{backward, fit, snapshot, Batch, TrainConfig};
use tfsynth_core::Window;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_program(rng: &mut impl Rng, features: usize) -> Architecture {
    let k = rng.random_range(1..=3);
    let mut children = Vec::new();
    for _ in 0..k {
        let a = rng.random_range(0..features);
        let head = if rng.random_bool(0.5) {
            Node::affine(&[a])
        } else {
            let mut b = rng.random_range(0..features - 1);
            if b >= a {
                b += 1;
            }
            Node::affine(&[a.min(b), a.max(b)])
        };
        children.push(Node::filter_program(head));
    }
    let root = if k == 1 {
        children.pop().unwrap()
    } else {
        Node::Disjunction { children }
    };
    Architecture::new(FeatureSpace::unnamed(features), root)
}

fn random_windows(rng: &mut impl Rng, n: usize, frames: usize, features: usize) -> WindowedDataset {
    let windows = (0..n)
        .map(|_| Window::from_fn(frames, features, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let labels = (0..n).map(|_| rng.random_bool(0.4)).collect();
    WindowedDataset::from_windows(FeatureSpace::unnamed(features), windows, labels).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn gradients() -> Outcome {
    let mut rng = seeded(101);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..100 {
        let f = rng.random_range(2..=15);
        let t = 2 * rng.random_range(2..=30) + 1;
        let arch = random_program(&mut rng, f);
        let params = ParameterStore::initialize(&arch, t, None, &InitRanges::default(), &mut rng);
        let data = random_windows(&mut rng, 6, t, f);
        let idx: Vec<usize> = (0..data.len()).collect();
        let batch = Batch::new(&data, &idx, 1.5);
        let (_, grad) = backward(&arch, &params, &batch).unwrap();
        let theta = params.flatten();
        for k in 0..theta.len() {
            let (mut a, mut b) = (params.clone(), params.clone());
            let (mut ta, mut tb) = (theta.clone(), theta.clone());
            ta[k] += h;
            tb[k] -= h;
            a.assign_trainable(&ta);
            b.assign_trainable(&tb);
            let fd = (backward(&arch, &a, &batch).unwrap().0 - backward(&arch, &b, &batch).unwrap().0) / (2.0 * h);
            worst = worst.max(rel_err(grad[k], fd));
            checked += 1;
        }
        // Partials of the filter itself in (s, w).
        for (_, e) in params.iter() {
            let Some(m) = e.block.morlet_params() else { continue };
            for x in tfsynth_core::filter::frame_to_x(t).unwrap() {
                let (ds, dw) = morlet_partials(x, m.s1, m.w1);
                let fs = (morlet(x, m.s1 + h, m.w1) - morlet(x, m.s1 - h, m.w1)) / (2.0 * h);
                let fw = (morlet(x, m.s1, m.w1 + h) - morlet(x, m.s1, m.w1 - h)) / (2.0 * h);
                worst = worst.max(rel_err(ds, fs)).max(rel_err(dw, fw));
                checked += 2;
            }
        }
    }
    outcome(
        worst < 1e-4,
        format!("{checked} partials over 100 programs, worst relative error {worst:.2e} (limit 1e-4)"),
    )
}

fn filter_formula() -> Outcome {
    let mut rng = seeded(202);
    let pi = std::f64::consts::PI;
    let mut ok = true;
    let mut max_abs = 0.0f64;
    for _ in 0..10_000 {
        let s = rng.random_range(0.05..10.0);
        let w = rng.random_range(0.05..10.0);
        let x = rng.random_range(-pi..pi);
        ok &= morlet(0.0, s, w) == 1.0;
        ok &= morlet(-x, s, w) == morlet(x, s, w);
        max_abs = max_abs.max(morlet(x, s, w).abs());
    }
    let reference = morlet(pi, pi, 1.0);
    let ref_err = (reference + (-0.5f64).exp()).abs();
    let curve = filter_curve(&MorletParams::symmetric(2.0, 1.3), 61).unwrap();
    let w = curve.weights();
    let sym = (0..61).all(|i| w[i] == w[60 - i]) && w[30] == 1.0;
    let pass = ok && sym && ref_err <= 1e-12 && max_abs <= 1.0;
    outcome(
        pass,
        format!("psi(0)=1 and even over 1e4 draws: {ok}; |psi(pi;pi,1)+e^-0.5| = {ref_err:.1e}; max |psi| = {max_abs:.6}; symmetric curve: {sym}"),
    )
}

fn windowing() -> Outcome {
    let g30 = WindowGeometry::new(30, &WindowConfig::default()).unwrap();
    let g6 = WindowGeometry::new(6, &WindowConfig::default()).unwrap();
    let lengths = g30.frames() == 61 && g30.stride == 5 && g6.frames() == 61 && g6.stride == 1;

    let (n, f) = (5000usize, 3usize);
    let values: Vec<f64> = (0..n * f).map(|i| i as f64).collect();
    let labels = vec![(0..n).map(|i| i % 7 == 0).collect()];
    let table = TrajectoryTable::new("v", 30, FeatureSpace::unnamed(f), values, vec!["y".into()], labels).unwrap();
    let data = make_windows(&table, 0, &WindowConfig::default()).unwrap();
    let count_ok = data.len() == n - 300;
    let mut rng = seeded(303);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let i = rng.random_range(0..data.len());
        let c = data.provenance(i).center as usize;
        let w = data.window(i);
        for t in 0..61 {
            // Oracle: frame c - 150 + 5t of the table.
            let src = c + 5 * t - 150;
            for j in 0..f {
                if w.get(t, j) != (src * f + j) as f64 {
                    mismatches += 1;
                }
            }
        }
        if data.label(i) != c.is_multiple_of(7) {
            mismatches += 1;
        }
    }
    outcome(
        lengths && count_ok && mismatches == 0,
        format!(
            "T = {} at 30->6 Hz (stride {}), {} windows from {n} frames, {mismatches} index mismatches over 1000 centers",
            g30.frames(),
            g30.stride,
            data.len()
        ),
    )
}

fn spec(seed: u64, two_mode: bool, frames: usize) -> SyntheticSpec {
    let features = FeatureSpace::new(vec!["a".into(), "b".into()]);
    let (planted, planted_params) = if two_mode {
        planted_two_mode(features.clone())
    } else {
        planted_single(features.clone())
    };
    SyntheticSpec {
        seed,
        video_id: "syn".into(),
        features,
        frames,
        fps: 30,
        window: WindowConfig::default(),
        planted,
        planted_params,
        noise_rate: 0.05,
        smoothness: 10.0,
        label_rule: if two_mode { LabelRule::AnyTerm } else { LabelRule::Logit },
    }
}

fn task(seed: u64, two_mode: bool, frames: usize) -> SyntheticTask {
    synthetic_task(&spec(seed, two_mode, frames), 3, 1, 1).unwrap()
}

fn search_optimality() -> Outcome {
    let mut gaps = Vec::new();
    for seed in 0..5u64 {
        let t = task(400 + seed, seed % 2 == 1, 3000);
        let mut c = SynthesisConfig::default();
        c.search.seed = seed;
        c.search.root = HoleType::Program;
        c.search.max_depth = 3;
        let bf = synthesize(&t.splits.train, &t.splits.val, &c).unwrap();
        c.search.strategy = Strategy::Exhaustive;
        let ex = synthesize(&t.splits.train, &t.splits.val, &c).unwrap();
        gaps.push(bf.objective - ex.objective);
    }
    outcome(
        gaps.iter().all(|g| g.abs() <= 0.02),
        format!("best-first minus exhaustive objective per dataset: {gaps:.4?} (limit 0.02)"),
    )
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn planted_recovery() -> Outcome {
    let mut good = 0;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let sp = spec(500 + seed, false, 6000);
        let t = synthetic_task(&sp, 3, 1, 1).unwrap();
        let mut c = SynthesisConfig::default();
        c.search.seed = seed;
        c.search.root = HoleType::FilterProgram;
        let r = synthesize(&t.splits.train, &t.splits.val, &c).unwrap();
        let frames = t.splits.train.frames();
        let prepared = tfsynth_core::dsl::Prepared::new(&r.arch, &r.params, frames).unwrap();
        let test_f1 = score(|w| prepared.predict(w), &t.splits.test).unwrap().f1();
        // Effective kernels (affine weight times curve, per feature): the
        // affine sign carries over, so a flipped curve cannot look similar.
        let learned = conv_from_program(&r.arch, &r.params, frames).unwrap();
        let planted = conv_from_program(&sp.planted, &sp.planted_params, frames).unwrap();
        let cos = cosine(&learned.weights, &planted.weights);
        if test_f1 >= 0.9 && cos >= 0.9 {
            good += 1;
        }
        rows.push(format!("F1 {test_f1:.3} cos {cos:.3}"));
    }
    outcome(good >= 4, format!("{good}/5 seeds recovered (need 4): [{}]", rows.join("; ")))
}

fn disjunction_staging() -> Outcome {
    let t = task(600, true, 3000);
    let mut c = SynthesisConfig::default();
    c.search.root = HoleType::FilterProgram;
    let one = synthesize(&t.splits.train, &t.splits.val, &c).unwrap();
    let two = synthesize_disjunction(2, &t.splits.train, &t.splits.val, &c).unwrap();
    let before = snapshot(&one.params);
    let after = snapshot(&two.params);
    let frozen_ok = before
        .iter()
        .all(|(id, bits)| after.get(&NodeId(id.0 + 1)) == Some(bits) && two.params.is_frozen(NodeId(id.0 + 1)));
    let f1_ok = two.val_f1 >= one.val_f1 - 0.01;
    outcome(
        f1_ok && frozen_ok && two.arch.filter_programs().len() == 2,
        format!(
            "k=1 val F1 {:.4}, k=2 val F1 {:.4}; first child bit-identical and frozen: {frozen_ok}",
            one.val_f1, two.val_f1
        ),
    )
}

fn relaxation_superset() -> Outcome {
    let mut rng = seeded(707);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = rng.random_range(2..=8);
        let t = 2 * rng.random_range(2..=30) + 1;
        let arch = random_program(&mut rng, f);
        let params = ParameterStore::initialize(&arch, t, None, &InitRanges::default(), &mut rng);
        let conv = conv_from_program(&arch, &params, t).unwrap();
        for _ in 0..10 {
            let w = Window::from_fn(t, f, |_, _| rng.random_range(-2.0..2.0));
            let d = (evaluate(&arch, &params, w.view()).unwrap() - conv_forward(&conv, w.view()).unwrap()).abs();
            worst = worst.max(d);
        }
    }
    let mut gaps = Vec::new();
    for seed in 0..10u64 {
        let tk = task(700 + seed, seed % 2 == 1, 3000);
        let (train, val) = (&tk.splits.train, &tk.splits.val);
        let cfg = TrainConfig {
            seed,
            ..Default::default()
        };
        let loss = |arch: Architecture| {
            let mut p = ParameterStore::initialize(&arch, train.frames(), None, &InitRanges::default(), &mut seeded(seed));
            fit(&arch, &mut p, train, val, &cfg).unwrap().final_train_loss
        };
        let fs = train.feature_space().clone();
        let relaxed = loss(Architecture::root_hole(fs.clone()));
        let morlet = loss(Architecture::single(fs, &[0]));
        gaps.push(relaxed - morlet);
    }
    let worst_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= 1e-10 && worst_gap <= 0.02,
        format!(
            "conv reproduction max |diff| {worst:.1e} over 20 programs; relaxed minus Morlet train loss, worst {worst_gap:.4} over 10 tasks"
        ),
    )
}

fn metrics() -> Outcome {
    let mut rng = seeded(808);
    let mut exact = true;
    for _ in 0..10_000 {
        let c = ConfusionCounts {
            tp: rng.random_range(0..5000),
            fp: rng.random_range(0..5000),
            tn: rng.random_range(0..5000),
            fn_: rng.random_range(0..5000),
        };
        let closed = if c.tp == 0 {
            0.0
        } else {
            (2 * c.tp) as f64 / (2 * c.tp + c.fp + c.fn_) as f64
        };
        exact &= f1(&c) == closed;
    }
    let data = random_windows(&mut rng, 500, 7, 3);
    let predict = |w: tfsynth_core::WindowRef<'_>| Ok::<bool, std::convert::Infallible>(w.get(3, 1) + w.get(0, 2) > 0.1);
    let counts = score(predict, &data).unwrap();
    let mut tally = ConfusionCounts::default();
    for i in 0..data.len() {
        let p = predict(data.window(i)).unwrap();
        match (p, data.label(i)) {
            (true, true) => tally.tp += 1,
            (true, false) => tally.fp += 1,
            (false, false) => tally.tn += 1,
            (false, true) => tally.fn_ += 1,
        }
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.reverse();
    let permuted = score(predict, &data.select(&order)).unwrap();
    let pass = exact && counts == tally && permuted == counts;
    outcome(
        pass,
        format!("closed form exact on 1e4 counts: {exact}; score equals tally: {}; permutation invariant: {}", counts == tally, permuted == counts),
    )
}

fn feature_bank() -> Outcome {
    let n = 1500;
    let names: Vec<String> = (0..15).map(|i| format!("x{i}")).collect();
    let slope = 0.37;
    let mut values = vec![0.0; n * 15];
    for i in 0..n {
        for j in 0..15 {
            values[i * 15 + j] = slope * i as f64 + j as f64;
        }
    }
    let table = TrajectoryTable::new("r", 30, FeatureSpace::new(names), values, vec!["y".into()], vec![vec![false; n]]).unwrap();
    let bank = build_feature_bank(&table);
    // Interior frames lie beyond the widest kernel (4 * 120) from both ends.
    let mut worst = 0.0f64;
    for i in 482..n - 482 {
        let row = bank.row(i);
        for j in 0..15 {
            for s in 0..3 {
                worst = worst.max((row[j * 9 + 3 + s] - slope).abs());
            }
        }
    }
    let names_ok = bank.names[0] == "x0__d0__g8" && bank.names[134] == "x14__d2__g120";
    outcome(
        bank.width() == 135 && worst <= 1e-6 && names_ok,
        format!("bank width {} for F = 15; ramp slope error {worst:.1e} (limit 1e-6)", bank.width()),
    )
}

const CLI_CONFIG: &str = r#"
task = "acceptance"
seed = 11

[synthetic]
planted = "two_mode"
label_rule = "any_term"
features = ["a", "b"]
frames = 1800
train_videos = 2

[matrix]
models = ["morlet", "conv", "tree:2"]
fractions = [0.5, 1.0]
sample_seeds = [0, 1]
run_seeds = [0]
"#;

fn cli_outputs(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_tfsynth");
    let cfg = root.join("run.toml");
    std::fs::write(&cfg, CLI_CONFIG).map_err(|e| e.to_string())?;
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let cfg = p("run.toml");
    let data_cfg = p("data/config.toml");
    let runs: Vec<Vec<String>> = vec![
        vec!["gen-synthetic".into(), "--config".into(), cfg.clone(), "--out".into(), p("data")],
        vec!["synth".into(), "--config".into(), data_cfg.clone(), "--out".into(), p("synth")],
        vec!["synth".into(), "--config".into(), data_cfg.clone(), "--out".into(), p("disj"), "--model".into(), "disjunction:2".into()],
        vec!["train-baseline".into(), "--config".into(), data_cfg.clone(), "--out".into(), p("conv"), "--model".into(), "conv".into()],
        vec!["train-baseline".into(), "--config".into(), data_cfg.clone(), "--out".into(), p("tree"), "--model".into(), "tree:4".into()],
        vec!["eval".into(), "--config".into(), data_cfg.clone(), "--out".into(), p("eval"), "--artifact".into(), p("disj/program.json")],
        vec!["export-filter".into(), "--program".into(), p("disj/program.json"), "--out".into(), p("filters")],
        vec!["run-matrix".into(), "--config".into(), cfg, "--out".into(), p("matrix")],
    ];
    for args in &runs {
        let o = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&o.stderr)));
        }
    }
    let mut out = BTreeMap::new();
    for dir in ["data", "synth", "disj", "conv", "tree", "eval", "filters", "matrix"] {
        for e in std::fs::read_dir(root.join(dir)).map_err(|e| e.to_string())? {
            let path = e.map_err(|e| e.to_string())?.path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if name != "timing.jsonl" {
                out.insert(format!("{dir}/{name}"), std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (cli_outputs(a.path()), cli_outputs(b.path())) {
        (Ok(x), Ok(y)) => {
            let differing: Vec<&String> = x.keys().filter(|k| y.get(*k) != Some(&x[*k])).collect();
            let same_set = x.keys().eq(y.keys());
            outcome(
                same_set && differing.is_empty(),
                format!("{} artifacts from 6 commands, {} differ between runs {differing:?}", x.len(), differing.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 10] = [
        ("gradient correctness", gradients, Some(Duration::from_secs(60))),
        ("filter formula", filter_formula, None),
        ("windowing protocol", windowing, None),
        ("search optimality at toy scale", search_optimality, Some(Duration::from_secs(600))),
        ("planted-program recovery", planted_recovery, Some(Duration::from_secs(600))),
        ("disjunction staging", disjunction_staging, None),
        ("relaxation superset", relaxation_superset, None),
        ("metric correctness", metrics, None),
        ("feature bank", feature_bank, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let mut o = result.unwrap_or_else(|_| outcome(false, "panicked"));
        if let Some(limit) = limit {
            if elapsed > *limit {
                o.pass = false;
                o.detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
            }
        }
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
