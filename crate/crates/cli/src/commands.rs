//! One function per subcommand. Each prints a short report and writes its
//! artifacts with the effective config embedded.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Matrix2;
use serde_json::{json, Map, Value};

use qcomp_bench::{
    histogram, lmax_sweep, make_dataset, run_benchmark, summarize, write_csv_file, Compiler, PpoCompiler, SkCompiler,
};
use qcomp_core::decomposer::{decompose_channel, t_count_lower_bound, DecomposeError};
use qcomp_core::gateset::{evaluate, GateSequence};
use qcomp_core::linalg::{bloch_to_su2, fidelity_distance, BlochRotation, UnitaryGate, C64};
use qcomp_core::AffineChannel;
use qcomp_ppo::{compile, Checkpoint, CompileOptions, LogRow, Trainer};
use qcomp_sk::{load_or_build, sk_compile, EpsilonNet};

use crate::config::Config;
use crate::error::CliError;

fn config_object(cfg: &Config) -> Value {
    Value::Object(cfg.entries().into_iter().map(|(k, v)| (k, Value::String(v))).collect::<Map<_, _>>())
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| CliError::io(p, e)),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_reals(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        lines.push(vals);
    }
    Ok(lines)
}

fn net(cfg: &Config) -> Result<EpsilonNet, CliError> {
    load_or_build(&cfg.net_cache, cfg.sk_depth).map_err(|e| CliError::io(&cfg.net_cache, e))
}

fn compile_options(cfg: &Config) -> CompileOptions {
    CompileOptions {
        tolerance: cfg.train.env.tolerance,
        max_steps: cfg.train.env.max_steps,
        retries: cfg.compile_retries,
        seed: cfg.compile_seed,
    }
}

fn layers(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
}

/// Keeps the config echo, header and rows for updates before `next`.
fn trim_log(path: &Path, next: usize) -> Result<bool, CliError> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(false),
        Err(e) => return Err(CliError::io(path, e)),
    };
    let mut kept = String::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let keep = match line.split(',').next().and_then(|u| u.parse::<usize>().ok()) {
            Some(u) => u < next,
            None => true,
        };
        if keep {
            kept.push_str(&line);
            kept.push('\n');
        }
    }
    write_text(path, &kept)?;
    Ok(true)
}

/// Trains until `train.updates`, or until `until` updates when given.
pub fn train(cfg: &Config, resume: bool, force: bool, until: Option<usize>) -> Result<(), CliError> {
    let mut trainer = if resume {
        let ck = Checkpoint::load(&cfg.checkpoint)?;
        Trainer::resume(cfg.train.clone(), &ck, force)?
    } else {
        Trainer::new(cfg.train.clone())?
    };
    let m = trainer.model();
    println!("policy layers {}", layers(m.policy.sizes()));
    println!("value layers {}", layers(m.value.sizes()));
    ensure_parent(&cfg.checkpoint)?;

    let continuing = resume && trim_log(&cfg.log, trainer.next_update())?;
    ensure_parent(&cfg.log)?;
    let mut log = OpenOptions::new()
        .create(true)
        .append(continuing)
        .write(true)
        .truncate(!continuing)
        .open(&cfg.log)
        .map_err(|e| CliError::io(&cfg.log, e))?;
    let io = |e| CliError::io(&cfg.log, e);
    if !continuing {
        for (k, v) in cfg.entries() {
            writeln!(log, "# {k}={v}").map_err(io)?;
        }
        writeln!(log, "{}", LogRow::HEADER).map_err(io)?;
    }
    if resume {
        println!("resuming at update {}", trainer.next_update());
    }

    let every = cfg.train.checkpoint_every;
    let stop = until.unwrap_or(usize::MAX);
    while !trainer.is_finished() && trainer.next_update() < stop {
        let row = trainer.step()?;
        writeln!(log, "{}", row.to_csv()).map_err(io)?;
        log.flush().map_err(io)?;
        let done = row.update + 1;
        if every > 0 && done % every == 0 && !trainer.is_finished() && done < stop {
            trainer.checkpoint().save(&cfg.checkpoint)?;
            println!(
                "update {done}: rolling reward {:.3}, success {:.2}, length {}",
                row.rolling_reward, row.success_rate, row.curriculum_length
            );
        }
    }
    trainer.checkpoint().save(&cfg.checkpoint)?;
    println!(
        "trained {} updates, curriculum length {}; checkpoint {}, log {}",
        trainer.next_update(),
        trainer.curriculum().length,
        cfg.checkpoint.display(),
        cfg.log.display()
    );
    Ok(())
}

pub enum Target {
    Tokens(String),
    Matrix(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Ppo,
    Sk,
}

fn load_target(t: &Target) -> Result<UnitaryGate, CliError> {
    match t {
        Target::Tokens(s) => Ok(evaluate(&GateSequence::parse(s).map_err(|e| CliError::Usage(e.to_string()))?)),
        Target::Matrix(path) => {
            let vals: Vec<f64> = read_reals(path)?.concat();
            let arr: [f64; 8] = vals
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage(format!("{}: expected 8 reals, found {}", path.display(), vals.len())))?;
            UnitaryGate::from_reals(&arr).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

pub fn compile_target(cfg: &Config, target: &Target, method: Method, out: Option<&Path>) -> Result<(), CliError> {
    let u = load_target(target)?;
    let start = Instant::now();
    let (seq, label) = match method {
        Method::Sk => {
            let net = net(cfg)?;
            (sk_compile(&net, &u, cfg.sk_level).sequence, format!("sk/{}/{}", cfg.sk_depth, cfg.sk_level))
        }
        Method::Ppo => {
            let model = Checkpoint::load(&cfg.checkpoint)?.model()?;
            (compile(&model, &u, &compile_options(cfg)).sequence, "ppo".to_string())
        }
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let distance = fidelity_distance(&evaluate(&seq), &u);
    let success = distance < cfg.train.env.tolerance;
    println!("method {label}");
    println!("sequence {}", seq.to_tokens());
    println!("length {}", seq.len());
    println!("t_count {}", seq.t_count());
    println!("distance {distance:e}");
    println!("success {success}");
    println!("wall_time_ms {wall_time_ms:.3}");
    if let Some(path) = out {
        let rec = json!({
            "config": config_object(cfg),
            "method": label,
            "target": u.to_reals().to_vec(),
            "sequence": seq.to_tokens(),
            "length": seq.len(),
            "t_count": seq.t_count(),
            "achieved_distance": distance,
            "success": success,
            "wall_time_ms": wall_time_ms,
        });
        write_text(path, &format!("{rec}\n"))?;
    }
    Ok(())
}

pub enum ChannelSource {
    Kraus(PathBuf),
    Transfer(PathBuf),
}

fn load_channel(src: &ChannelSource) -> Result<AffineChannel, CliError> {
    match src {
        ChannelSource::Kraus(path) => {
            let mut ops = Vec::new();
            for (i, v) in read_reals(path)?.iter().enumerate() {
                if v.len() != 8 {
                    return Err(CliError::Usage(format!(
                        "{}: Kraus operator {} has {} reals, expected 8",
                        path.display(),
                        i + 1,
                        v.len()
                    )));
                }
                let c = |k: usize| C64::new(v[2 * k], v[2 * k + 1]);
                ops.push(Matrix2::new(c(0), c(1), c(2), c(3)));
            }
            AffineChannel::from_kraus(&ops).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
        ChannelSource::Transfer(path) => {
            let vals = read_reals(path)?.concat();
            AffineChannel::from_params(&vals).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

/// SK sequence for a proper rotation; `None` when orientation reversing.
fn rotation_sequence(net: &EpsilonNet, level: usize, r: &BlochRotation) -> Option<(GateSequence, f64)> {
    let u = bloch_to_su2(r).ok()?;
    let res = sk_compile(net, &u, level);
    Some((res.sequence, res.achieved_distance))
}

pub fn decompose(cfg: &Config, src: &ChannelSource, out: &Path, compile_maps: bool) -> Result<(), CliError> {
    let channel = load_channel(src)?;
    let plan = match decompose_channel(&channel, cfg.decomposer_epsilon) {
        Ok(p) => p,
        Err(DecomposeError::NotCptp(min)) => {
            return Err(CliError::Usage(format!("channel is not CPTP: minimum Choi eigenvalue {min:.6e}")));
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    println!("epsilon {}", plan.epsilon);
    println!("delta {}", plan.delta);
    println!("k {:?}", plan.digits.k);
    println!("elementary_count {}", plan.elementary_ids.len());
    println!("certified_error {:e}", plan.certified_error);
    println!("orientation_reversing {}", plan.orientation_reversing);

    let mut rec = serde_json::to_value(plan.to_record()).expect("plan records serialize");
    if compile_maps {
        let net = net(cfg)?;
        for (name, r) in [("pre_map", &plan.pre_map), ("final_map", &plan.final_map)] {
            match rotation_sequence(&net, cfg.sk_level, r) {
                Some((seq, d)) => {
                    println!("{name} sequence {} (distance {d:e})", seq.to_tokens());
                    rec[format!("{name}_sequence")] = Value::String(seq.to_tokens());
                    rec[format!("{name}_distance")] = json!(d);
                }
                None => println!("{name} is orientation reversing; no unitary realizes it"),
            }
        }
    }
    rec["config"] = config_object(cfg);
    write_text(out, &format!("{rec}\n"))?;
    println!("plan written to {}", out.display());
    Ok(())
}

pub fn bench(cfg: &Config) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let dataset = make_dataset("bench", cfg.bench_count, cfg.bench_min_len, cfg.bench_max_len, cfg.bench_seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ds_path = dir.join("dataset.txt");
    dataset.save(&ds_path).map_err(|e| CliError::io(&ds_path, e))?;

    let mut owned: Vec<Box<dyn Compiler>> = Vec::new();
    if cfg.bench_sk {
        owned.push(Box::new(SkCompiler {
            net: Arc::new(net(cfg)?),
            level: cfg.sk_level,
        }));
    }
    let mut models = Vec::new();
    for path in &cfg.bench_checkpoints {
        let model = Arc::new(Checkpoint::load(path)?.model()?);
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        owned.push(Box::new(PpoCompiler {
            label: format!("ppo/{stem}"),
            model: Arc::clone(&model),
            options: compile_options(cfg),
        }));
        models.push(model);
    }
    if owned.is_empty() {
        return Err(CliError::Usage("nothing to benchmark: set bench.sk = true or bench.checkpoints".into()));
    }
    let compilers: Vec<&dyn Compiler> = owned.iter().map(|c| c.as_ref()).collect();
    let records = run_benchmark(&dataset, &compilers, cfg.train.env.tolerance);
    let summary = summarize(&records);
    let echo = cfg.entries();
    let write = |name: &str, f: &dyn Fn(&Path) -> std::io::Result<()>| {
        let p = dir.join(name);
        f(&p).map_err(|e| CliError::io(&p, e))
    };
    write("records.csv", &|p| write_csv_file(p, &echo, &records))?;
    write("summary.csv", &|p| write_csv_file(p, &echo, &summary))?;
    write("histogram.csv", &|p| write_csv_file(p, &echo, &histogram(&records)))?;

    for s in &summary {
        println!(
            "{}: n {} success {:.3} median distance {:.3e} mean length {:.1} T-proportion {:.3}",
            s.compiler, s.count, s.success_rate, s.median_distance, s.mean_length, s.mean_t_proportion
        );
    }

    if !cfg.bench_lmax.is_empty() {
        let model = models
            .first()
            .ok_or_else(|| CliError::Usage("bench.lmax needs at least one entry in bench.checkpoints".into()))?;
        let sweep_set = make_dataset("sweep", cfg.bench_sweep_count, cfg.bench_max_len, cfg.bench_max_len, cfg.bench_seed + 1)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let rows = lmax_sweep(&sweep_set, model, &cfg.bench_lmax, compile_options(cfg));
        write("sweep.csv", &|p| write_csv_file(p, &echo, &rows))?;
        for r in &rows {
            println!(
                "L_max {}: success {:.3} mean length {:.1} T-proportion {:.3} wall {:.1} ms",
                r.l_max, r.success_rate, r.mean_length, r.t_proportion, r.wall_time_ms
            );
        }
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

pub fn bound(dim: usize, group_order: usize, epsilon: f64) -> Result<(), CliError> {
    let b = t_count_lower_bound(dim, group_order, epsilon).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("dim {dim} group_order {group_order} epsilon {epsilon}");
    println!("t_count_lower_bound {b:.6}");
    Ok(())
}

pub fn build_net(cfg: &Config, depth: usize) -> Result<(), CliError> {
    let net = load_or_build(&cfg.net_cache, depth).map_err(|e| CliError::io(&cfg.net_cache, e))?;
    println!(
        "depth {depth}: {} entries in {}",
        net.len(),
        qcomp_sk::net::cache_path(&cfg.net_cache, depth).display()
    );
    Ok(())
}
