//! Running compilers over a dataset and summarizing the results.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use qcomp_core::gateset::{evaluate, GateSequence};
use qcomp_core::linalg::{fidelity_distance, UnitaryGate};
use qcomp_ppo::{compile, CompileOptions, PolicyModel};
use qcomp_sk::{sk_compile, EpsilonNet};

use crate::dataset::Dataset;

/// Histogram covers `log10(distance)` in `[HIST_MIN, HIST_MAX)`.
pub const HIST_MIN: f64 = -6.0;
pub const HIST_MAX: f64 = 0.0;
pub const HIST_WIDTH: f64 = 0.25;
pub const HIST_BINS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct CompilerOutput {
    pub sequence: GateSequence,
    pub reported_distance: f64,
}

pub trait Compiler: Sync {
    /// Short label such as `sk/6/2` or `ppo/ct=2`.
    fn tag(&self) -> String;

    fn compile(&self, target: &UnitaryGate) -> Result<CompilerOutput, String>;
}

pub struct SkCompiler {
    pub net: Arc<EpsilonNet>,
    pub level: usize,
}

impl Compiler for SkCompiler {
    fn tag(&self) -> String {
        format!("sk/{}/{}", self.net.depth(), self.level)
    }

    fn compile(&self, target: &UnitaryGate) -> Result<CompilerOutput, String> {
        let r = sk_compile(&self.net, target, self.level);
        Ok(CompilerOutput {
            sequence: r.sequence,
            reported_distance: r.achieved_distance,
        })
    }
}

pub struct PpoCompiler {
    pub label: String,
    pub model: Arc<PolicyModel>,
    pub options: CompileOptions,
}

impl Compiler for PpoCompiler {
    fn tag(&self) -> String {
        self.label.clone()
    }

    fn compile(&self, target: &UnitaryGate) -> Result<CompilerOutput, String> {
        let out = compile(&self.model, target, &self.options);
        Ok(CompilerOutput {
            sequence: out.sequence,
            reported_distance: out.achieved_distance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub target_index: usize,
    pub compiler: String,
    /// Recomputed from the returned sequence.
    pub achieved_distance: f64,
    pub reported_distance: f64,
    pub sequence_length: usize,
    pub t_count: usize,
    pub wall_time_ms: f64,
    pub success: bool,
    pub sequence: String,
}

impl BenchRecord {
    pub fn t_proportion(&self) -> f64 {
        if self.sequence_length == 0 {
            0.0
        } else {
            self.t_count as f64 / self.sequence_length as f64
        }
    }
}

fn run_one(index: usize, target: &UnitaryGate, c: &dyn Compiler, tolerance: f64) -> BenchRecord {
    let start = Instant::now();
    let result = c.compile(target);
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(out) => {
            let achieved_distance = fidelity_distance(&evaluate(&out.sequence), target);
            BenchRecord {
                target_index: index,
                compiler: c.tag(),
                achieved_distance,
                reported_distance: out.reported_distance,
                sequence_length: out.sequence.len(),
                t_count: out.sequence.t_count(),
                wall_time_ms,
                success: achieved_distance < tolerance,
                sequence: out.sequence.to_tokens(),
            }
        }
        Err(_) => BenchRecord {
            target_index: index,
            compiler: c.tag(),
            achieved_distance: f64::NAN,
            reported_distance: f64::NAN,
            sequence_length: 0,
            t_count: 0,
            wall_time_ms,
            success: false,
            sequence: String::new(),
        },
    }
}

/// One record per (item, compiler), ordered by item then compiler.
pub fn run_benchmark(dataset: &Dataset, compilers: &[&dyn Compiler], tolerance: f64) -> Vec<BenchRecord> {
    let mut records: Vec<(usize, usize, BenchRecord)> = dataset
        .items
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, item)| {
            compilers
                .iter()
                .enumerate()
                .map(move |(k, c)| (i, k, run_one(i, &item.target, *c, tolerance)))
        })
        .collect();
    records.sort_by_key(|(i, k, _)| (*i, *k));
    records.into_iter().map(|(_, _, r)| r).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub compiler: String,
    pub count: usize,
    pub success_rate: f64,
    pub mean_distance: f64,
    pub median_distance: f64,
    pub mean_length: f64,
    /// Mean of `t_count / length` over records with a non-empty sequence.
    pub mean_t_proportion: f64,
    /// Same, restricted to successful records.
    pub success_t_proportion: f64,
    /// Least-squares slope of `t_count` against length; NaN when lengths do not vary.
    pub t_slope: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares slope and coefficient of determination of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Groups in order of first appearance.
fn groups(records: &[BenchRecord]) -> Vec<(String, Vec<&BenchRecord>)> {
    let mut out: Vec<(String, Vec<&BenchRecord>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(k, _)| *k == r.compiler) {
            Some((_, v)) => v.push(r),
            None => out.push((r.compiler.clone(), vec![r])),
        }
    }
    out
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    groups(records)
        .into_iter()
        .map(|(compiler, rs)| {
            let dist: Vec<f64> = rs.iter().map(|r| r.achieved_distance).collect();
            let props: Vec<f64> = rs.iter().filter(|r| r.sequence_length > 0).map(|r| r.t_proportion()).collect();
            let sprops: Vec<f64> = rs
                .iter()
                .filter(|r| r.success && r.sequence_length > 0)
                .map(|r| r.t_proportion())
                .collect();
            let lens: Vec<f64> = rs.iter().map(|r| r.sequence_length as f64).collect();
            let ts: Vec<f64> = rs.iter().map(|r| r.t_count as f64).collect();
            SummaryRow {
                count: rs.len(),
                success_rate: rs.iter().filter(|r| r.success).count() as f64 / rs.len() as f64,
                mean_distance: mean(&dist),
                median_distance: median(&dist),
                mean_length: mean(&lens),
                mean_t_proportion: mean(&props),
                success_t_proportion: mean(&sprops),
                t_slope: linear_fit(&lens, &ts).0,
                compiler,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub compiler: String,
    pub bin_left: f64,
    pub count: usize,
}

/// Bin of `log10(d)`; values below the range (including 0) go to the first
/// bin, values at or above it to the last.
pub fn hist_bin(d: f64) -> usize {
    if d <= 0.0 {
        return 0;
    }
    let x = (d.log10() - HIST_MIN) / HIST_WIDTH;
    (x.floor().max(0.0) as usize).min(HIST_BINS - 1)
}

pub fn histogram(records: &[BenchRecord]) -> Vec<HistogramRow> {
    let mut out = Vec::new();
    for (compiler, rs) in groups(records) {
        let mut counts = [0usize; HIST_BINS];
        for r in rs.iter().filter(|r| r.achieved_distance.is_finite()) {
            counts[hist_bin(r.achieved_distance)] += 1;
        }
        for (b, &count) in counts.iter().enumerate() {
            out.push(HistogramRow {
                compiler: compiler.clone(),
                bin_left: HIST_MIN + b as f64 * HIST_WIDTH,
                count,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub l_max: usize,
    pub success_rate: f64,
    pub mean_distance: f64,
    pub mean_length: f64,
    pub mean_t_count: f64,
    pub t_proportion: f64,
    /// Summed compile wall time over the dataset.
    pub wall_time_ms: f64,
}

/// Compiles the dataset once per `L_max`, sequentially so timings are clean.
pub fn lmax_sweep(dataset: &Dataset, model: &PolicyModel, lmax_values: &[usize], base: CompileOptions) -> Vec<SweepRow> {
    lmax_values
        .iter()
        .map(|&l_max| {
            let opts = CompileOptions { max_steps: l_max, ..base };
            let c = PpoCompiler {
                label: format!("ppo/lmax={l_max}"),
                model: Arc::new(model.clone()),
                options: opts,
            };
            let recs: Vec<BenchRecord> = dataset
                .items
                .iter()
                .enumerate()
                .map(|(i, it)| run_one(i, &it.target, &c, base.tolerance))
                .collect();
            let n = recs.len().max(1) as f64;
            let total_len: usize = recs.iter().map(|r| r.sequence_length).sum();
            let total_t: usize = recs.iter().map(|r| r.t_count).sum();
            SweepRow {
                l_max,
                success_rate: recs.iter().filter(|r| r.success).count() as f64 / n,
                mean_distance: recs.iter().map(|r| r.achieved_distance).sum::<f64>() / n,
                mean_length: total_len as f64 / n,
                mean_t_count: total_t as f64 / n,
                t_proportion: if total_len == 0 { 0.0 } else { total_t as f64 / total_len as f64 },
                wall_time_ms: recs.iter().map(|r| r.wall_time_ms).sum(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use qcomp_sk::build_net;

    fn rec(compiler: &str, len: usize, t: usize, d: f64) -> BenchRecord {
        BenchRecord {
            target_index: 0,
            compiler: compiler.into(),
            achieved_distance: d,
            reported_distance: d,
            sequence_length: len,
            t_count: t,
            wall_time_ms: 0.0,
            success: d < 1e-3,
            sequence: String::new(),
        }
    }

    #[test]
    fn single_record_proportion() {
        let s = summarize(&[rec("a", 10, 4, 0.1)]);
        assert_eq!(s.len(), 1);
        assert!((s[0].mean_t_proportion - 0.4).abs() < 1e-15);
    }

    #[test]
    fn two_compilers_two_rows() {
        let s = summarize(&[rec("a", 10, 4, 0.1), rec("b", 5, 1, 0.0), rec("a", 3, 0, 0.2)]);
        assert_eq!(s.iter().map(|r| r.compiler.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(s[0].count, 2);
    }

    #[test]
    fn slope_of_proportional_data() {
        let rs: Vec<_> = (1..=10).map(|k| rec("a", 10 * k, 3 * k, 0.5)).collect();
        let s = summarize(&rs);
        assert!((s[0].t_slope - 0.3).abs() < 1e-12);
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(hist_bin(0.0), 0);
        assert_eq!(hist_bin(1e-9), 0);
        assert_eq!(hist_bin(1e-6), 0);
        assert_eq!(hist_bin(1.5e-3), 12);
        assert_eq!(hist_bin(0.99), HIST_BINS - 1);
        assert_eq!(hist_bin(1.0), HIST_BINS - 1);
        let h = histogram(&[rec("a", 1, 0, 1e-3), rec("a", 1, 0, 0.5)]);
        assert_eq!(h.len(), HIST_BINS);
        assert_eq!(h.iter().map(|r| r.count).sum::<usize>(), 2);
        assert_eq!(h[12].count, 1);
        assert!((h[12].bin_left + 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_gives_no_records() {
        let net = Arc::new(build_net(2).unwrap());
        let sk = SkCompiler { net, level: 0 };
        let d = Dataset::from_generators("e", 0, vec![]);
        assert!(run_benchmark(&d, &[&sk], 1e-3).is_empty());
    }

    #[test]
    fn identity_dataset_all_succeed() {
        let net = Arc::new(build_net(2).unwrap());
        let sk = SkCompiler { net, level: 1 };
        let d = Dataset::from_generators("id", 0, vec![GateSequence::empty(); 5]);
        let recs = run_benchmark(&d, &[&sk], 1e-3);
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.success && r.achieved_distance == 0.0));
    }

    struct Failing;
    impl Compiler for Failing {
        fn tag(&self) -> String {
            "fail".into()
        }
        fn compile(&self, _: &UnitaryGate) -> Result<CompilerOutput, String> {
            Err("nope".into())
        }
    }

    #[test]
    fn compiler_error_becomes_failed_record() {
        let d = Dataset::from_generators("x", 0, vec![GateSequence::empty(); 2]);
        let recs = run_benchmark(&d, &[&Failing], 1e-3);
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| !r.success));
    }

    #[test]
    fn linear_fit_r2() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let (s, b, r2) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && b.abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
