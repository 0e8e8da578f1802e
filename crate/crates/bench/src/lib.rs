//! Benchmark datasets, per-item records, summaries, histograms and the
//! maximal-length sweep.

pub mod dataset;
pub mod harness;
pub mod output;

pub use dataset::{make_dataset, Dataset, DatasetError, DatasetItem};
pub use harness::{
    histogram, linear_fit, lmax_sweep, run_benchmark, summarize, BenchRecord, Compiler, CompilerOutput, HistogramRow,
    PpoCompiler, SkCompiler, SummaryRow, SweepRow,
};
pub use output::{read_config_echo, write_csv, write_csv_file};
