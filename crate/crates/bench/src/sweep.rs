//! The benchmark sweep: time every operator over `(n, k)` and score it against
//! exact top-k.

use std::env;
use std::fs;
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;
use softtopk_core::{
    exact_topk, generate_instance, nccs, HalvingTopK, Instance, InstanceConfig, IterativeTopK, Matrix,
    PeakedKernel, SoftTopK, SoftmaxMode,
};

use crate::error::{BenchError, Result};
use crate::record::{Algo, BenchRecord};

pub const THREADS_ENV: &str = "SOFTTOPK_THREADS";

/// `(n, k)`.
pub type Pair = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub d: usize,
    pub batch: usize,
    pub boost: f64,
    pub mode: SoftmaxMode,
    /// Temperature for `normalized` mode.
    pub alpha: f64,
    pub seed: u64,
    pub repeats: usize,
    /// Time the batch on the worker pool instead of a single thread.
    pub parallel_batch: bool,
    /// Worker pool size; `None` defers to `SOFTTOPK_THREADS`, then rayon's default.
    pub threads: Option<usize>,
    pub csv_path: Option<PathBuf>,
    pub chart_prefix: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_list: (4..=14).map(|e| 1 << e).collect(),
            k_list: (1..=11).map(|e| 1 << e).collect(),
            d: 64,
            batch: 16,
            boost: 100.0,
            mode: SoftmaxMode::Verbatim,
            alpha: 100.0,
            seed: 42,
            repeats: 5,
            parallel_batch: false,
            threads: None,
            csv_path: None,
            chart_prefix: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let usage = |m: &str| Err(BenchError::Usage(m.to_string()));
        if self.n_list.is_empty() || self.k_list.is_empty() {
            return usage("n and k lists must be non-empty");
        }
        if self.n_list.contains(&0) || self.k_list.contains(&0) {
            return usage("n and k must be at least 1");
        }
        if self.repeats == 0 {
            return usage("repeats must be at least 1");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return usage("alpha must be a positive finite number");
        }
        if self.threads == Some(0) {
            return usage("thread count must be at least 1");
        }
        // d, batch and boost are checked by the instance config.
        self.instance_config(2, 1).validate()?;
        Ok(())
    }

    /// `(n, k)` pairs to run, in list order, and the skipped pairs with `k >= n`.
    pub fn pairs(&self) -> (Vec<Pair>, Vec<Pair>) {
        let mut run = Vec::new();
        let mut skipped = Vec::new();
        for &n in &self.n_list {
            for &k in &self.k_list {
                if k < n {
                    run.push((n, k));
                } else {
                    skipped.push((n, k));
                }
            }
        }
        (run, skipped)
    }

    pub fn instance_config(&self, n: usize, k: usize) -> InstanceConfig {
        InstanceConfig {
            n,
            k,
            d: self.d,
            batch: self.batch,
            seed: self.seed,
            boost: self.boost,
            mode: self.mode,
        }
    }

    pub fn iterative(&self) -> IterativeTopK {
        IterativeTopK::new(PeakedKernel::for_mode(self.mode, self.alpha))
    }

    pub fn halving(&self) -> HalvingTopK {
        HalvingTopK::new(self.boost)
    }
}

/// Worker pool size: explicit value, else `SOFTTOPK_THREADS`, else rayon's default.
pub fn resolve_threads(explicit: Option<usize>) -> Result<Option<usize>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(BenchError::Usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn build_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = resolve_threads(threads)? {
        builder = builder.num_threads(t);
    }
    builder.build().map_err(|e| BenchError::Pool(e.to_string()))
}

/// Checks that a file can be created next to `path` without touching `path`.
pub fn check_writable(path: &Path) -> Result<()> {
    if path.is_dir() {
        return Err(BenchError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::IsADirectory, "output path is a directory"),
        ));
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let meta = fs::metadata(parent).map_err(|e| BenchError::io(parent, e))?;
    if !meta.is_dir() {
        return Err(BenchError::io(
            parent,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "parent is not a directory"),
        ));
    }
    tempfile::NamedTempFile::new_in(parent).map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// One algorithm under measurement.
pub enum Runner {
    Exact,
    Soft(Box<dyn SoftTopK>),
}

impl Runner {
    pub fn for_algo(algo: Algo, cfg: &SweepConfig) -> Runner {
        match algo {
            Algo::Exact => Runner::Exact,
            Algo::Halving => Runner::Soft(Box::new(cfg.halving())),
            Algo::Iterative => Runner::Soft(Box::new(cfg.iterative())),
        }
    }

    pub fn select(&self, inst: &Instance, k: usize) -> Result<Matrix> {
        Ok(match self {
            Runner::Exact => exact_topk(&inst.embeddings, &inst.scores, k)?,
            Runner::Soft(op) => op.forward(&inst.embeddings, &inst.scores, k)?.output,
        })
    }

    /// Forward over the whole batch, in instance order.
    pub fn run_batch(&self, batch: &[Instance], k: usize, pool: Option<&ThreadPool>) -> Result<Vec<Matrix>> {
        match pool {
            Some(pool) => pool.install(|| batch.par_iter().map(|inst| self.select(inst, k)).collect()),
            None => batch.iter().map(|inst| self.select(inst, k)).collect(),
        }
    }

    /// Wall time of one forward pass over the batch, plus its outputs.
    pub fn time_batch(
        &self,
        batch: &[Instance],
        k: usize,
        pool: Option<&ThreadPool>,
    ) -> Result<(f64, Vec<Matrix>)> {
        let start = Instant::now();
        let out = black_box(self.run_batch(black_box(batch), k, pool)?);
        let secs = start.elapsed().as_secs_f64();
        // Clock granularity can report zero for tiny batches.
        Ok((secs.max(1e-9), out))
    }
}

/// Mean and population standard deviation, summed in order.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// nCCS of each output against exact top-k, in instance order.
pub fn batch_nccs(batch: &[Instance], outputs: &[Matrix], k: usize, pool: &ThreadPool) -> Result<Vec<f64>> {
    pool.install(|| {
        batch
            .par_iter()
            .zip(outputs.par_iter())
            .map(|(inst, out)| {
                let exact = exact_topk(&inst.embeddings, &inst.scores, k)?;
                Ok(nccs(&exact, out)?)
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<Pair>,
}

/// Runs the sweep. `progress` receives one line per finished `(n, k)`.
///
/// Output paths in `cfg` are only checked for writability here; writing is
/// left to [`crate::emit_csv`] and [`crate::emit_charts`].
pub fn run_sweep(cfg: &SweepConfig, mut progress: impl FnMut(&str)) -> Result<SweepOutput> {
    cfg.validate()?;
    if let Some(p) = &cfg.csv_path {
        check_writable(p)?;
    }
    if let Some(prefix) = &cfg.chart_prefix {
        for suffix in crate::chart::CHART_SUFFIXES {
            check_writable(&crate::chart::chart_path(prefix, suffix))?;
        }
    }
    let pool = build_pool(cfg.threads)?;
    let timing_pool = cfg.parallel_batch.then_some(&pool);

    let (pairs, skipped) = cfg.pairs();
    for &(n, k) in &skipped {
        progress(&format!("skip n={n} k={k}: k >= n"));
    }

    let mut records = Vec::with_capacity(pairs.len() * Algo::ALL.len() * cfg.repeats);
    for (n, k) in pairs {
        let icfg = cfg.instance_config(n, k);
        let batch = generate_instance(&icfg)?;
        for algo in Algo::ALL {
            let runner = Runner::for_algo(algo, cfg);
            // Warmup: untimed, never recorded. Its outputs feed nCCS, which
            // does not depend on timing.
            let outputs = runner.run_batch(&batch, k, timing_pool)?;
            let scores = batch_nccs(&batch, &outputs, k, &pool)?;
            let (nccs_mean, nccs_std) = mean_std(&scores);
            for repeat_index in 0..cfg.repeats {
                let (wall_time_s, _) = runner.time_batch(&batch, k, timing_pool)?;
                records.push(BenchRecord {
                    algo,
                    n,
                    k,
                    d: cfg.d,
                    batch: cfg.batch,
                    boost: cfg.boost,
                    mode: cfg.mode,
                    seed: cfg.seed,
                    repeat_index,
                    wall_time_s,
                    nccs_mean,
                    nccs_std,
                });
            }
        }
        progress(&format!("done n={n} k={k}"));
    }
    Ok(SweepOutput { records, skipped })
}

/// Median wall time per `(algo, n, k)`, ordered by key.
pub fn median_times(records: &[BenchRecord]) -> Vec<((Algo, usize, usize), f64)> {
    let mut groups: std::collections::BTreeMap<(Algo, usize, usize), Vec<f64>> = Default::default();
    for r in records {
        groups.entry((r.algo, r.n, r.k)).or_default().push(r.wall_time_s);
    }
    groups.into_iter().map(|(key, times)| (key, median(times))).collect()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Post-run sanity check: at the largest `n`, the iterative median time should
/// grow with `k`. Returns one message per violation.
pub fn iterative_time_warnings(records: &[BenchRecord]) -> Vec<String> {
    let Some(n_max) = records.iter().filter(|r| r.algo == Algo::Iterative).map(|r| r.n).max() else {
        return Vec::new();
    };
    let series: Vec<(usize, f64)> = median_times(records)
        .into_iter()
        .filter(|((algo, n, _), _)| *algo == Algo::Iterative && *n == n_max)
        .map(|((_, _, k), t)| (k, t))
        .collect();
    series
        .windows(2)
        .filter(|w| w[1].1 <= w[0].1)
        .map(|w| {
            format!(
                "iterative time at n={n_max} not increasing in k: k={} {:.3e}s, k={} {:.3e}s",
                w[0].0, w[0].1, w[1].0, w[1].1
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.n_list.first(), Some(&16));
        assert_eq!(cfg.n_list.last(), Some(&16384));
        assert_eq!(cfg.k_list.first(), Some(&2));
        assert_eq!(cfg.k_list.last(), Some(&2048));
        let (run, skipped) = cfg.pairs();
        assert_eq!(run.len() + skipped.len(), 11 * 11);
        assert!(run.iter().all(|(n, k)| k < n));
        assert!(skipped.iter().all(|(n, k)| k >= n));
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn validation_errors() {
        let bad = [
            SweepConfig { repeats: 0, ..Default::default() },
            SweepConfig { n_list: vec![], ..Default::default() },
            SweepConfig { k_list: vec![0], ..Default::default() },
            SweepConfig { boost: -1.0, ..Default::default() },
            SweepConfig { d: 0, ..Default::default() },
            SweepConfig { alpha: 0.0, ..Default::default() },
            SweepConfig { threads: Some(0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
