//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Run with `cargo test -p qcomp-bench --test acceptance`; pass criterion
//! numbers after `--` to run a subset (criterion 10 reruns 1–4 and 6).

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use qcomp_bench::{linear_fit, lmax_sweep, make_dataset, run_benchmark, summarize, Dataset, PpoCompiler};
use qcomp_core::channel::{channel_distance, compose, random_cptp, AffineChannel};
use qcomp_core::decomposer::{build_elementary_set, decompose_channel, length_bound, replay};
use qcomp_core::gateset::GateId;
use qcomp_core::linalg::{haar_unitary, phase_normalize, su2_to_bloch, UnitaryGate};
use qcomp_core::majorana::verify_majorana_identities;
use qcomp_ppo::model::log_softmax;
use qcomp_ppo::ppo::{loss, loss_and_grad, LossWeights, Minibatch};
use qcomp_ppo::{train, CompileOptions, Hyper, LogRow, Normalization, PolicyModel, TrainConfig};
use qcomp_sk::{build_net, sk_compile};

const TOL: f64 = 1e-3;
const HELD_OUT_SEED: u64 = 7007;
const SWEEP_SEED: u64 = 8008;

struct Outcome {
    passed: bool,
    detail: String,
    /// Text whose hash is compared across reruns.
    artifact: String,
}

fn sha(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn cptp_sample(seed: u64, count: usize) -> Vec<AffineChannel> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = r.random_range(1..=4);
            random_cptp(&mut r, k)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let channels = cptp_sample(101, 100);
    let mut artifact = String::new();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut longest = 0;
    for eps in [0.35, 0.14, 0.07] {
        let bound = length_bound(eps).unwrap();
        for c in &channels {
            let plan = decompose_channel(c, eps).unwrap();
            let d = channel_distance(&replay(&plan).unwrap(), c);
            worst = worst.max(d / eps);
            longest = longest.max(plan.elementary_ids.len());
            if d > eps + 1e-9 || plan.elementary_ids.len() > bound {
                failures += 1;
            }
            artifact.push_str(&plan.to_json_line());
            artifact.push('\n');
        }
    }
    Outcome {
        passed: failures == 0,
        detail: format!("300 plans, {failures} violations, max replay/ε = {worst:.4}, longest plan {longest}"),
        artifact,
    }
}

fn criterion_2() -> Outcome {
    let channels = cptp_sample(102, 100);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for eps in [0.35, 0.14, 0.07, 0.035] {
        let delta: f64 = eps / 7.0;
        let max_len = channels
            .iter()
            .map(|c| decompose_channel(c, eps).unwrap().elementary_ids.len())
            .max()
            .unwrap();
        xs.push((1.0 / delta) * (1.0 / delta).ln());
        ys.push(max_len as f64);
    }
    let (a, b, r2) = linear_fit(&xs, &ys);
    let artifact = format!("{xs:?}\n{ys:?}\n{a:e} {b:e} {r2:e}\n");
    Outcome {
        passed: a <= 3.0,
        detail: format!("max lengths {ys:?}, fit L = {a:.4}·(1/δ)ln(1/δ) + {b:.2} (R² {r2:.4})"),
        artifact,
    }
}

fn min_eigen_modulus(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
}

fn criterion_3() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(103);
    let mut artifact = String::new();
    let mut gap_fail = 0;
    let mut tested = 0;
    while tested < 200 {
        let a = {
            let k = r.random_range(1..3);
            random_cptp(&mut r, k)
        };
        let b = {
            let k = r.random_range(2..5);
            random_cptp(&mut r, k)
        };
        let (da, db) = (a.distortion().determinant().abs(), b.distortion().determinant().abs());
        let (e1, e2, gap) = if da > db { (a, b, da - db) } else { (b, a, db - da) };
        let eps = 0.999 * (gap / 6.0).min(min_eigen_modulus(e1.distortion()));
        if eps <= 0.0 {
            continue;
        }
        let d = channel_distance(&e1, &e2);
        if d <= eps {
            gap_fail += 1;
        }
        artifact.push_str(&format!("{eps:e} {d:e}\n"));
        tested += 1;
    }

    let set = build_elementary_set(0.7).unwrap();
    let d1 = set
        .channels()
        .iter()
        .map(|c| c.distortion().determinant().abs())
        .fold(0.0, f64::max);
    let mut dichotomy_fail = 0;
    for _ in 0..1000 {
        let len = r.random_range(0..12);
        let mut acc = AffineChannel::from_rotation(&su2_to_bloch(&haar_unitary(&mut r)));
        for _ in 0..len {
            let id = r.random_range(1..=14u8);
            acc = compose(set.channel(id).unwrap(), &acc);
            acc = compose(&AffineChannel::from_rotation(&su2_to_bloch(&haar_unitary(&mut r))), &acc);
        }
        let det = acc.distortion().determinant().abs();
        if !(det <= d1 + 1e-12 || (det - 1.0).abs() <= 1e-12) {
            dichotomy_fail += 1;
        }
        artifact.push_str(&format!("{det:e}\n"));
    }
    Outcome {
        passed: gap_fail == 0 && dichotomy_fail == 0,
        detail: format!("gap-bound violations {gap_fail}/200, dichotomy violations {dichotomy_fail}/1000 (d₁ = {d1:.6})"),
        artifact,
    }
}

fn criterion_4() -> Outcome {
    let report = verify_majorana_identities();
    let mut artifact = String::new();
    let mut failing = Vec::new();
    for c in &report.checks {
        artifact.push_str(&format!("{} {} {:e}\n", c.name, c.literal, c.max_deviation));
        if c.literal && !c.passed {
            failing.push(format!("`{}` off by {:.3e}", c.name, c.max_deviation));
        }
    }
    let literal = report.checks.iter().filter(|c| c.literal).count();
    Outcome {
        passed: report.literal_checks_pass(),
        detail: if failing.is_empty() {
            format!("{literal} literal identities within 1e-10")
        } else {
            format!("{}/{literal} literal identities fail: {}", failing.len(), failing.join("; "))
        },
        artifact,
    }
}

fn criterion_5() -> Outcome {
    let net = build_net(6).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(105);
    let targets: Vec<_> = (0..50).map(|_| haar_unitary(&mut r)).collect();
    let mut medians = Vec::new();
    let mut deepest = Vec::new();
    for level in 0..=3 {
        let d: Vec<f64> = targets.iter().map(|t| sk_compile(&net, t, level).achieved_distance).collect();
        medians.push(median(&d));
        deepest = d;
    }
    let decreasing = medians[1] < medians[0] && medians[2] < medians[1];
    // log d_{n+1} = log C + p log d_n, least squares over consecutive level medians
    let logs: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let (p, log_c, _) = linear_fit(&logs[..3], &logs[1..]);
    let c = log_c.exp();
    let below = deepest.iter().filter(|&&d| d < TOL).count();
    let bimodal = below > 0 && below < deepest.len();
    Outcome {
        passed: decreasing && p >= 1.3 && bimodal,
        detail: format!(
            "{} entries, medians L0..L3 {:?}, p = {p:.3}, C = {c:.3}, level 3: {below}/50 below ε_t",
            net.len(),
            medians.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>()
        ),
        artifact: String::new(),
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let model = PolicyModel::new(&[7], Normalization::None, Hyper::default(), &mut rng);
    let b = 16;
    let inputs = DMatrix::from_fn(8, b, |_, _| rng.random_range(-1.0..1.0));
    let (logits, _) = model.forward_batch(&inputs);
    let actions: Vec<usize> = (0..b).map(|_| rng.random_range(0..6)).collect();
    let old_log_probs = (0..b)
        .map(|j| {
            let z: Vec<f64> = logits.column(j).iter().copied().collect();
            log_softmax(&z)[actions[j]] + rng.random_range(-0.4..0.4)
        })
        .collect();
    let mb = Minibatch {
        inputs,
        actions,
        old_log_probs,
        advantages: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..b).map(|_| rng.random_range(-1.0..3.0)).collect(),
    };
    let w = LossWeights {
        eps_clip: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.05,
    };
    let (stats, g) = loss_and_grad(&model, &mb, w);
    let p = model.params();
    let h = 1e-5;
    let mut fd = vec![0.0; p.len()];
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] = p[i] + h;
        let mut plus = model.clone();
        plus.set_params(&q);
        q[i] = p[i] - h;
        let mut minus = model.clone();
        minus.set_params(&q);
        fd[i] = (loss(&plus, &mb, w).loss - loss(&minus, &mb, w).loss) / (2.0 * h);
    }
    let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    let global = diff / norm;
    let worst = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs() / (a.abs() + b.abs()).max(1e-6))
        .fold(0.0, f64::max);
    let artifact = g.iter().chain(&fd).map(|v| format!("{v:e}")).collect::<Vec<_>>().join("\n");
    Outcome {
        passed: global < 1e-4 && worst < 1e-4,
        detail: format!(
            "{} parameters, relative error ‖Δ‖/‖g‖ = {global:.2e}, worst entry {worst:.2e}, clip fraction {:.2}",
            p.len(),
            stats.clip_fraction
        ),
        artifact,
    }
}

/// Trained smoke policies are shared by criteria 7–9.
struct Policies {
    free: (PolicyModel, Vec<LogRow>),
    costly: Option<(PolicyModel, Vec<LogRow>)>,
}

fn smoke(t_cost: f64) -> (PolicyModel, Vec<LogRow>) {
    let mut cfg = TrainConfig::smoke();
    cfg.env.t_cost = t_cost;
    train(&cfg).unwrap()
}

fn compile_options() -> CompileOptions {
    let cfg = TrainConfig::smoke();
    CompileOptions {
        tolerance: cfg.env.tolerance,
        max_steps: cfg.env.max_steps,
        retries: 16,
        seed: 1,
    }
}

fn held_out() -> Dataset {
    make_dataset("held-out", 100, 1, 6, HELD_OUT_SEED).unwrap()
}

fn criterion_7(p: &Policies) -> Outcome {
    let (model, rows) = &p.free;
    let initial = rows.first().unwrap().rolling_reward;
    let last = rows.last().unwrap();
    let final_ = last.rolling_reward;
    let c = PpoCompiler {
        label: "ppo/ct=0".into(),
        model: Arc::new(model.clone()),
        options: compile_options(),
    };
    let recs = run_benchmark(&held_out(), &[&c], TOL);
    let rate = recs.iter().filter(|r| r.success).count() as f64 / recs.len() as f64;
    let ratio_ok = final_ > 0.0 && final_ >= 3.0 * initial;
    Outcome {
        passed: ratio_ok && rate >= 0.6,
        detail: format!(
            "rolling reward {initial:.3} → {final_:.3} (×{:.2}) after {} updates, curriculum length {}, held-out success {:.0}%",
            final_ / initial,
            rows.len(),
            last.curriculum_length,
            100.0 * rate
        ),
        artifact: String::new(),
    }
}

/// Fewest T gates over all sequences reaching each unitary, up to `max_t`
/// T gates (0-1 breadth-first search, braids cost 0).
fn min_t_table(max_t: usize) -> HashMap<[i64; 8], usize> {
    let key = |u: &UnitaryGate| phase_normalize(u).to_reals().map(|v| (v * 1e7).round() as i64);
    let mut best = HashMap::new();
    let mut queue = VecDeque::from([(UnitaryGate::identity(), 0usize)]);
    best.insert(key(&UnitaryGate::identity()), 0);
    while let Some((u, c)) = queue.pop_front() {
        if best[&key(&u)] < c {
            continue;
        }
        for g in GateId::ALL {
            let nc = c + usize::from(g.is_t());
            if nc > max_t {
                continue;
            }
            let v = g.matrix().mul(&u);
            let k = key(&v);
            if best.get(&k).is_none_or(|&b| nc < b) {
                best.insert(k, nc);
                if g.is_t() {
                    queue.push_back((v, nc));
                } else {
                    queue.push_front((v, nc));
                }
            }
        }
    }
    best
}

fn criterion_8(p: &Policies) -> Outcome {
    let data = held_out();
    let (m0, _) = &p.free;
    let (m2, _) = p.costly.as_ref().unwrap();
    let c0 = PpoCompiler {
        label: "ppo/ct=0".into(),
        model: Arc::new(m0.clone()),
        options: compile_options(),
    };
    let c2 = PpoCompiler {
        label: "ppo/ct=2".into(),
        model: Arc::new(m2.clone()),
        options: compile_options(),
    };
    let recs = run_benchmark(&data, &[&c0, &c2], TOL);
    let summary = summarize(&recs);
    let (t0, t2) = (summary[0].success_t_proportion, summary[1].success_t_proportion);
    let reduction = (t0 - t2) / t0;
    let table = min_t_table(8);
    let key = |u: &UnitaryGate| phase_normalize(u).to_reals().map(|v| (v * 1e7).round() as i64);
    let floor = |tag: &str| -> (usize, usize, usize) {
        let mut used = 0;
        let mut least = 0;
        let mut len = 0;
        for r in recs.iter().filter(|r| r.compiler == tag && r.success) {
            used += r.t_count;
            len += r.sequence_length;
            least += table.get(&key(&data.items[r.target_index].target)).copied().unwrap_or(0);
        }
        (used, least, len)
    };
    let (u0, f0, l0) = floor("ppo/ct=0");
    let (u2, f2, l2) = floor("ppo/ct=2");
    Outcome {
        passed: t2 < t0 && reduction >= 0.2,
        detail: format!(
            "T-proportion {t0:.3} (C_T=0) → {t2:.3} (C_T=2), reduction {:.1}%; T gates used/minimum: {u0}/{f0} in {l0} gates vs {u2}/{f2} in {l2} gates",
            100.0 * reduction
        ),
        artifact: String::new(),
    }
}

fn criterion_9(p: &Policies) -> Outcome {
    let (model, _) = &p.free;
    let data = make_dataset("sweep", 1000, 80, 80, SWEEP_SEED).unwrap();
    let lmax: Vec<usize> = (1..=8).map(|k| 8 * k).collect();
    let opts = CompileOptions {
        retries: 4,
        ..compile_options()
    };
    let rows = lmax_sweep(&data, model, &lmax, opts);
    let x: Vec<f64> = lmax.iter().map(|&l| l as f64).collect();
    let time: Vec<f64> = rows.iter().map(|r| r.wall_time_ms).collect();
    let len: Vec<f64> = rows.iter().map(|r| r.mean_length).collect();
    let tc: Vec<f64> = rows.iter().map(|r| r.mean_t_count).collect();
    let (_, _, r2) = linear_fit(&x, &time);
    let (len_slope, _, len_r2) = linear_fit(&x, &len);
    let (t_slope, _, t_r2) = linear_fit(&x, &tc);
    let props: Vec<f64> = rows.iter().map(|r| r.t_proportion).collect();
    let spread = props.iter().copied().fold(f64::NEG_INFINITY, f64::max) - props.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        passed: r2 >= 0.9 && len_slope > 0.0 && t_slope > 0.0 && spread < 0.05,
        detail: format!(
            "wall time R² {r2:.3}; length slope {len_slope:.3} (R² {len_r2:.3}); T-count slope {t_slope:.3} (R² {t_r2:.3}); T-proportion spread {spread:.3}; mean distance {:.3e} → {:.3e}",
            rows.first().unwrap().mean_distance,
            rows.last().unwrap().mean_distance
        ),
        artifact: String::new(),
    }
}

fn report(id: usize, name: &str, o: &Outcome, secs: f64) {
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {verdict} {name}: {} [{secs:.1} s]", o.detail);
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |id: usize| wanted.is_empty() || wanted.contains(&id);
    let names = [
        "",
        "channel certification",
        "length scaling",
        "determinant gap bound and dichotomy",
        "Majorana identities",
        "SK contraction",
        "PPO gradient check",
        "PPO learning",
        "weighted T cost",
        "depth-first cost linearity",
        "determinism",
    ];
    let deterministic: [(usize, fn() -> Outcome); 5] = [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (6, criterion_6)];
    let mut all_passed = true;
    let mut hashes = HashMap::new();
    let record = |id: usize, o: Outcome, secs: f64, all: &mut bool| {
        report(id, names[id], &o, secs);
        *all &= o.passed;
        o
    };
    for (id, f) in [(1usize, criterion_1 as fn() -> Outcome), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6)] {
        if run(id) {
            let t = Instant::now();
            let o = f();
            let o = record(id, o, t.elapsed().as_secs_f64(), &mut all_passed);
            hashes.insert(id, sha(&o.artifact));
        }
    }
    if run(7) || run(8) || run(9) {
        let t = Instant::now();
        let policies = Policies {
            free: smoke(0.0),
            costly: run(8).then(|| smoke(2.0)),
        };
        println!("trained smoke policies in {:.1} s", t.elapsed().as_secs_f64());
        let steps: [(usize, fn(&Policies) -> Outcome); 3] = [(7, criterion_7), (8, criterion_8), (9, criterion_9)];
        for (id, f) in steps {
            if run(id) {
                let t = Instant::now();
                let o = f(&policies);
                record(id, o, t.elapsed().as_secs_f64(), &mut all_passed);
            }
        }
    }
    if run(10) {
        let t = Instant::now();
        let mut mismatched = Vec::new();
        for (id, f) in deterministic {
            let first = hashes.get(&id).cloned().unwrap_or_else(|| sha(&f().artifact));
            if sha(&f().artifact) != first {
                mismatched.push(id);
            }
        }
        let o = Outcome {
            passed: mismatched.is_empty(),
            detail: if mismatched.is_empty() {
                "criteria 1–4 and 6 artifacts byte-identical on rerun".into()
            } else {
                format!("artifacts differ for criteria {mismatched:?}")
            },
            artifact: String::new(),
        };
        record(10, o, t.elapsed().as_secs_f64(), &mut all_passed);
    }
    if !all_passed {
        std::process::exit(1);
    }
}
