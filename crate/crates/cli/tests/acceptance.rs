//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p tempclust-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tempclust::augment::{augmented_len, fast_augment_traced, interval_weights, sample_intervals, AugmentConfig};
use tempclust::coarsen::{ceil_count, cluster_and_count, grid_and_count, CoarsenMode};
use tempclust::codec::{FeatureCodec, Schema};
use tempclust::eval::{fgsm, fgsm_predictions, invariance_gap, roc_auc};
use tempclust::kmeans::kmeans1d_exact;
use tempclust::model::{train_with_observer, Model, MreModel, Predictor, ReferencePredictor, Task, TrainConfig};
use tempclust::sequence::{Event, EventSequence, LabeledSequence};
use tempclust::synth::{generate, SynthConfig};
use tempclust::Error;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

/// Random sequence with `t` events on `[0, 100]`, some of them tied,
/// values partly masked and counts in `1..=3`.
fn random_sequence(rng: &mut ChaCha8Rng, t: usize, r: usize) -> EventSequence {
    let mut times: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..100.0)).collect();
    for i in 1..t {
        if rng.random::<f64>() < 0.1 {
            times[i] = times[i - 1];
        }
    }
    times.sort_by(f64::total_cmp);
    let events = times
        .into_iter()
        .map(|time| {
            let values: Vec<Option<f64>> =
                (0..r).map(|_| (rng.random::<f64>() < 0.7).then(|| rng.random_range(-5.0..5.0))).collect();
            Event::from_options(time, &values, rng.random_range(1..=3))
        })
        .collect();
    EventSequence::new("r", events)
}

fn corpus() -> Vec<(EventSequence, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..10_000)
        .map(|_| {
            let t = rng.random_range(1..=200);
            let p = rng.random_range(0.01..=1.0);
            (random_sequence(&mut rng, t, 3), p)
        })
        .collect()
}

fn c1_length_contracts() -> Outcome {
    let start = Instant::now();
    let aug = AugmentConfig { p_high: 0.99, weighted: true, rng_seed: 0 };
    let (mut violations, mut inapplicable, mut capped) = (0, 0, 0);
    for (i, (seq, p)) in corpus().iter().enumerate() {
        let t = seq.len();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(i as u64);
        let draw = fast_augment_traced(seq, &aug, &mut rng).map_err(|e| e.to_string())?;
        let merges = ceil_count(draw.p, t);
        let expected = if merges < t {
            t - merges
        } else {
            capped += 1;
            t.min(1)
        };
        if draw.sequence.len() != expected || augmented_len(draw.p, t) != expected {
            violations += 1;
        }
        let want = ceil_count(*p, t);
        if cluster_and_count(seq, *p).map_err(|e| e.to_string())?.len() != want {
            violations += 1;
        }
        match grid_and_count(seq, *p, (0.0, 100.0)) {
            Ok(g) if g.len() == want => {}
            Err(Error::GridInapplicable { .. }) if want < 2 => inapplicable += 1,
            _ => violations += 1,
        }
    }
    let el = start.elapsed();
    check(
        violations == 0 && within(el, 10),
        format!(
            "{violations} violations over 10^4 sequences ({capped} augment draws with ceil(pT) = T kept one event, \
             {inapplicable} grid cases with fewer than 2 cells rejected), {el:.2?}"
        ),
    )
}

fn c2_count_conservation() -> Outcome {
    let aug = AugmentConfig { p_high: 0.99, weighted: false, rng_seed: 0 };
    let mut violations = 0;
    for (i, (seq, p)) in corpus().iter().enumerate() {
        let total = seq.total_count();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        rng.set_stream(i as u64);
        let a = fast_augment_traced(seq, &aug, &mut rng).map_err(|e| e.to_string())?.sequence;
        let c = cluster_and_count(seq, *p).map_err(|e| e.to_string())?;
        violations += usize::from(a.total_count() != total) + usize::from(c.total_count() != total);
        if let Ok(g) = grid_and_count(seq, *p, (0.0, 100.0)) {
            violations += usize::from(g.total_count() != total);
        }
    }
    check(violations == 0, format!("{violations} violations over 10^4 sequences and three operators"))
}

fn c3_kmeans_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut cases, mut worst) = (0usize, 0.0f64);
    for _ in 0..500 {
        let n = rng.random_range(1..=12);
        let mut pts: Vec<f64> = (0..n).map(|_| (rng.random_range(0..40) as f64) * 0.25).collect();
        pts.sort_by(f64::total_cmp);
        let mut best = vec![f64::INFINITY; n + 1];
        for mask in 0u32..(1 << (n - 1)) {
            let k = mask.count_ones() as usize + 1;
            let (mut cost, mut lo) = (0.0, 0);
            for hi in 1..=n {
                if hi == n || mask & (1 << (hi - 1)) != 0 {
                    let seg = &pts[lo..hi];
                    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
                    cost += seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
                    lo = hi;
                }
            }
            best[k] = best[k].min(cost);
        }
        for k in 1..=n {
            let got = kmeans1d_exact(&pts, k).map_err(|e| e.to_string())?.cost;
            let rel = (got - best[k]).abs() / best[k].abs().max(1e-300);
            if (got - best[k]).abs() > 1e-12 {
                worst = worst.max(rel);
            }
            cases += 1;
        }
    }
    let el = start.elapsed();
    check(worst <= 1e-9 && within(el, 30), format!("{cases} (set, k) cases, worst relative gap {worst:.1e}, {el:.2?}"))
}

fn c4_five_event_fixture() -> Outcome {
    let t = [0.0, 0.45, 0.55, 0.90, 1.00];
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let seq = EventSequence::new("five", t.iter().zip(&x).map(|(&t, &v)| Event::observed(t, vec![v])).collect());
    let want_t = [t[0], (t[1] + t[2]) / 2.0, (t[3] + t[4]) / 2.0];
    let want_x = [x[0], (x[1] + x[2]) / 2.0, (x[3] + x[4]) / 2.0];
    let mut problems = Vec::new();
    let cluster = cluster_and_count(&seq, 0.6).map_err(|e| e.to_string())?;
    let grid = grid_and_count(&seq, 0.6, (0.0, 1.0)).map_err(|e| e.to_string())?;
    for (name, out) in [("cluster", &cluster), ("grid", &grid)] {
        let counts: Vec<u32> = out.events.iter().map(|e| e.c).collect();
        let times: Vec<f64> = out.times().collect();
        let values: Vec<f64> = out.events.iter().map(|e| e.x[0]).collect();
        if counts != [1, 2, 2] || times != want_t || values != want_x {
            problems.push(format!("{name}: counts {counts:?} t' {times:?} x' {values:?}"));
        }
    }
    check(problems.is_empty(), if problems.is_empty() {
        format!("both operators give counts [1, 2, 2], t' = {want_t:?}, x' = {want_x:?}")
    } else {
        problems.join("; ")
    })
}

fn c5_weighted_sampling() -> Outcome {
    let start = Instant::now();
    let seq = EventSequence::new("g", [0.0, 1.0, 4.0].iter().map(|&t| Event::observed(t, vec![0.0])).collect());
    let w = interval_weights(&seq, true).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 1_000_000;
    let mut first = 0usize;
    for _ in 0..draws {
        if sample_intervals(&w, 1, &mut rng).map_err(|e| e.to_string())?[0] == 0 {
            first += 1;
        }
    }
    let freq = first as f64 / draws as f64;
    let el = start.elapsed();
    check((0.745..=0.755).contains(&freq) && within(el, 5), format!("frequency {freq:.5} over 10^6 draws, {el:.2?}"))
}

fn c6_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for fixture in 0..20 {
        let task = if fixture % 2 == 0 { Task::Classification } else { Task::Regression };
        let (t, d) = (rng.random_range(1..8), rng.random_range(1..10));
        let outputs = if task == Task::Classification { rng.random_range(1..4) } else { 1 };
        let p = ReferencePredictor::new(task, d, rng.random_range(2..16), outputs, &mut rng);
        let x = Array2::from_shape_fn((t, d), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..outputs)
            .map(|_| if task == Task::Classification { f64::from(u8::from(rng.random::<bool>())) } else { rng.random_range(-1.0..1.0) })
            .collect();
        let analytic = p.input_gradient(x.view(), &y);
        let h = 1e-5;
        let mut numeric = Array2::zeros((t, d));
        for i in 0..t {
            for j in 0..d {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[[i, j]] += h;
                down[[i, j]] -= h;
                numeric[[i, j]] = (p.loss(up.view(), &y) - p.loss(down.view(), &y)) / (2.0 * h);
            }
        }
        let diff = (&analytic - &numeric).mapv(|v| v * v).sum().sqrt();
        let scale = analytic.mapv(|v| v * v).sum().sqrt().max(numeric.mapv(|v| v * v).sum().sqrt()).max(1e-12);
        worst = worst.max(diff / scale);
    }
    check(worst < 1e-4, format!("worst relative error {worst:.2e} over 20 fixtures"))
}

fn c7_mre_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let codec = FeatureCodec::fit(&Schema::all_real(2), [random_sequence(&mut rng, 50, 2)].iter()).map_err(|e| e.to_string())?;
    let (mut sum_err, mut hull_violations, mut identity_failures) = (0.0f64, 0, 0);
    for i in 0..1000 {
        let outputs = rng.random_range(1..3);
        let predictor = ReferencePredictor::new(Task::Classification, codec.width(), 8, outputs, &mut rng);
        let mode = if i % 2 == 0 { CoarsenMode::Cluster } else { CoarsenMode::Grid };
        let mut m = MreModel::new(predictor.clone(), vec![1.0, 0.5, 0.25, 0.125], mode);
        m.beta = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let len = rng.random_range(2..40);
        let seq = random_sequence(&mut rng, len, 2);
        let pred = m.predict_views(&m.views(&seq, &codec).map_err(|e| e.to_string())?);
        sum_err = sum_err.max((pred.alpha.iter().sum::<f64>() - 1.0).abs());
        for o in 0..outputs {
            let lo = pred.per_resolution.iter().map(|f| f[o]).fold(f64::INFINITY, f64::min);
            let hi = pred.per_resolution.iter().map(|f| f[o]).fold(f64::NEG_INFINITY, f64::max);
            if !(lo - 1e-15..=hi + 1e-15).contains(&pred.combined[o]) {
                hull_violations += 1;
            }
        }
        let len = rng.random_range(1..30);
        let mut distinct = random_sequence(&mut rng, len, 2);
        for (k, e) in distinct.events.iter_mut().enumerate() {
            e.t = k as f64 * 0.5;
        }
        let single = MreModel::new(predictor.clone(), vec![1.0], CoarsenMode::Cluster);
        let bare = predictor.forward(codec.featurize(&distinct).map_err(|e| e.to_string())?.view()).to_vec();
        if single.predict(&distinct, &codec).map_err(|e| e.to_string())? != bare {
            identity_failures += 1;
        }
    }
    check(
        sum_err <= 1e-12 && hull_violations == 0 && identity_failures == 0,
        format!(
            "max |sum alpha - 1| = {sum_err:.1e}, {hull_violations} hull violations, \
             {identity_failures} K=1 mismatches over 10^3 fixtures"
        ),
    )
}

/// Shared fixed-seed training protocol behind the FGSM, augmentation and
/// invariance criteria.
struct Protocol {
    test: Vec<LabeledSequence>,
    codec: FeatureCodec,
    /// Per seed: (best-epoch test AUC, final model) without and with
    /// augmentation.
    runs: Vec<[(f64, Model); 2]>,
    elapsed: Duration,
}

const SEEDS: u64 = 5;

fn protocol() -> Result<Protocol, String> {
    let start = Instant::now();
    let data = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let (train, test) = (data.train.items, data.test.items);
    if train.len() != 2000 || test.len() != 500 {
        return Err(format!("expected 2000/500 sequences, got {}/{}", train.len(), test.len()));
    }
    let codec = FeatureCodec::fit(&Schema::all_real(SynthConfig::default().r), train.iter().map(|s| &s.sequence))
        .map_err(|e| e.to_string())?;
    let feats: Vec<Array2<f64>> = test.iter().map(|s| codec.featurize(&s.sequence)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let labels: Vec<f64> = test.iter().map(|s| s.label.as_targets()[0]).collect();
    let mut runs = Vec::new();
    for seed in 0..SEEDS {
        let mut pair = Vec::new();
        for augment in [false, true] {
            let cfg = TrainConfig {
                epochs: 300,
                learning_rate: 0.05,
                momentum: 0.9,
                batch_size: 32,
                hidden: 256,
                seed,
                augment: augment.then_some(AugmentConfig { p_high: 0.5, weighted: true, rng_seed: seed }),
                mre: None,
            };
            let mut best = f64::NEG_INFINITY;
            let out = train_with_observer(&train, &[], &codec, &cfg, |_, m| {
                let p = m.predictor();
                let scores: Vec<f64> = feats.iter().map(|f| p.forward(f.view())[0]).collect();
                best = best.max(roc_auc(&scores, &labels).unwrap_or(f64::NEG_INFINITY));
            })
            .map_err(|e| e.to_string())?;
            pair.push((best, out.model));
        }
        let [a, b]: [(f64, Model); 2] = pair.try_into().map_err(|_| "two runs per seed")?;
        runs.push([a, b]);
    }
    Ok(Protocol { test, codec, runs, elapsed: start.elapsed() })
}

fn c8_fgsm(p: &Protocol) -> Outcome {
    let model = &p.runs[0][0].1;
    let labels: Vec<f64> = p.test.iter().map(|s| s.label.as_targets()[0]).collect();
    let clean: Vec<Vec<f64>> = p.test.iter().map(|s| model.predict(&s.sequence, &p.codec)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let zero = fgsm_predictions(model, &p.codec, &p.test, 0.0).map_err(|e| e.to_string())?;
    let identical = zero.iter().flatten().zip(clean.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
    let Model::Single(predictor) = model else { return Err("expected a single predictor".into()) };
    let mut bound_violations = 0;
    let mut aucs = Vec::new();
    for eps in [0.01, 0.05, 0.1] {
        for s in &p.test {
            let x = p.codec.featurize(&s.sequence).map_err(|e| e.to_string())?;
            let g = predictor.input_gradient(x.view(), &s.label.as_targets());
            let adv = fgsm(x.view(), eps, g.view()).map_err(|e| e.to_string())?;
            bound_violations += adv.iter().zip(x.iter()).filter(|(a, b)| (*a - *b).abs() > eps).count();
        }
        let adv = fgsm_predictions(model, &p.codec, &p.test, eps).map_err(|e| e.to_string())?;
        let scores: Vec<f64> = adv.iter().map(|v| v[0]).collect();
        aucs.push(roc_auc(&scores, &labels).map_err(|e| e.to_string())?);
    }
    let monotone = aucs.windows(2).all(|w| w[1] <= w[0]);
    check(
        identical && bound_violations == 0 && monotone,
        format!(
            "eps=0 bit-identical: {identical}; {bound_violations} max-norm violations; \
             roc_auc at eps 0.01/0.05/0.1 = {:.4}/{:.4}/{:.4}",
            aucs[0], aucs[1], aucs[2]
        ),
    )
}

fn c9_augmentation_effect(p: &Protocol) -> Outcome {
    let wins = p.runs.iter().filter(|r| r[1].0 >= r[0].0).count();
    let pairs: Vec<String> = p.runs.iter().map(|r| format!("{:.4}/{:.4}", r[0].0, r[1].0)).collect();
    check(
        wins >= 4 && within(p.elapsed, 600),
        format!("augmented >= plain in {wins}/5 seeds (plain/augmented best-epoch AUC {}), {:.1?}", pairs.join(" "), p.elapsed),
    )
}

fn c10_invariance_gap(p: &Protocol) -> Outcome {
    let seqs: Vec<EventSequence> = p.test.iter().map(|s| s.sequence.clone()).collect();
    let mut wins = 0;
    let mut pairs = Vec::new();
    for r in &p.runs {
        let gap = |m: &Model| -> Result<f64, String> {
            invariance_gap(|s| m.predict(s, &p.codec), &seqs, |_, s| cluster_and_count(s, 0.5))
                .map(|g| g[0])
                .map_err(|e| e.to_string())
        };
        let (plain, aug) = (gap(&r[0].1)?, gap(&r[1].1)?);
        wins += usize::from(aug <= plain);
        pairs.push(format!("{plain:.4}/{aug:.4}"));
    }
    check(wins >= 4, format!("augmented gap <= plain in {wins}/5 seeds (plain/augmented {})", pairs.join(" ")))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tempclust")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// A file's bytes, or every file of a directory in name order.
fn read_output(path: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    if !path.is_dir() {
        return Ok(vec![(String::new(), fs::read(path)?)]);
    }
    let mut names: Vec<_> = fs::read_dir(path)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    names.sort();
    names
        .into_iter()
        .map(|n| Ok((n.to_string_lossy().into_owned(), fs::read(path.join(&n))?)))
        .collect()
}

fn c11_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    fs::write(p.join("cfg.json"), r#"{"n_sequences": 150}"#).map_err(|e| e.to_string())?;
    let runs: Vec<(&str, Vec<&str>, &str)> = vec![
        ("synth", vec!["synth", "--config", "cfg.json", "--out", "OUT", "--seed", "4"], "OUT"),
        ("coarsen grid", vec!["coarsen", "--mode", "grid", "--p", "0.75", "--interval", "0,24", "--in", "data/train.jsonl", "--out", "OUT"], "OUT"),
        ("coarsen cluster", vec!["coarsen", "--mode", "cluster", "--p", "0.3", "--in", "data/train.jsonl", "--out", "OUT"], "OUT"),
        ("augment", vec!["augment", "--p-high", "0.5", "--weighted", "--seed", "2", "--in", "data/train.jsonl", "--out", "OUT"], "OUT"),
        ("fit-codec", vec!["fit-codec", "--in", "data/train.jsonl", "--out", "OUT"], "OUT"),
        ("featurize", vec!["featurize", "--codec", "codec.txt", "--in", "data/test.jsonl", "--out", "OUT"], "OUT"),
        ("train", vec!["train", "--in", "data", "--codec", "codec.txt", "--seed", "3", "--epochs", "4", "--augment", "0.4", "--out", "OUT"], "OUT"),
        ("train mre", vec!["train", "--in", "data", "--codec", "codec.txt", "--seed", "3", "--epochs", "2", "--mre", "grid", "--out", "OUT"], "OUT"),
        ("evaluate", vec!["evaluate", "--model", "model.txt", "--codec", "codec.txt", "--in", "data/test.jsonl", "--bootstrap", "50",
            "--seed", "1", "--fgsm", "0.05", "--invariance-gap", "cluster,0.5", "--format", "kv", "--out", "OUT"], "OUT"),
    ];
    run_cli(p, &["synth", "--config", "cfg.json", "--out", "data", "--seed", "4"])?;
    run_cli(p, &["fit-codec", "--in", "data/train.jsonl", "--out", "codec.txt"])?;
    run_cli(p, &["train", "--in", "data", "--codec", "codec.txt", "--seed", "3", "--epochs", "3", "--out", "model.txt"])?;
    let mut differing = Vec::new();
    for (i, (name, args, file)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for attempt in ["a", "b"] {
            let target = format!("out{i}_{attempt}");
            let args: Vec<String> = args.iter().map(|a| a.replace("OUT", &target)).collect();
            let argv: Vec<&str> = args.iter().map(String::as_str).collect();
            let stdout = run_cli(p, &argv)?;
            let bytes = read_output(&p.join(file.replace("OUT", &target))).map_err(|e| e.to_string())?;
            outputs.push((stdout, bytes));
        }
        if outputs[0] != outputs[1] {
            differing.push(*name);
        }
    }
    check(
        differing.is_empty(),
        format!("{} subcommand runs repeated, differing: {:?}", runs.len(), differing),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} [{status}] {name}: {detail}");
    };
    report(1, "length contracts", c1_length_contracts());
    report(2, "count conservation", c2_count_conservation());
    report(3, "k-means oracle", c3_kmeans_oracle());
    report(4, "five-event merge fixture", c4_five_event_fixture());
    report(5, "weighted sampling", c5_weighted_sampling());
    report(6, "gradient check", c6_gradient_check());
    report(7, "ensemble algebra", c7_mre_algebra());
    match protocol() {
        Ok(p) => {
            report(8, "FGSM", c8_fgsm(&p));
            report(9, "augmentation effect", c9_augmentation_effect(&p));
            report(10, "invariance gap", c10_invariance_gap(&p));
        }
        Err(e) => {
            for (n, name) in [(8, "FGSM"), (9, "augmentation effect"), (10, "invariance gap")] {
                report(n, name, Err(format!("training protocol failed: {e}")));
            }
        }
    }
    report(11, "CLI determinism", c11_cli_determinism());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
