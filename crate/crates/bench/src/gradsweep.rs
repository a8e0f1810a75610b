//! Finite-difference gradient checks over a grid of random instances.

use softtopk_core::{
    generate_instance, gradcheck_operator, GradCheckConfig, GradCheckReport, Instance, InstanceConfig,
    Matrix, SoftTopK,
};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradSweep {
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub d: usize,
    /// Instances per `(n, k)` pair with `k <= n`.
    pub instances: usize,
    pub seed: u64,
}

impl Default for GradSweep {
    fn default() -> Self {
        GradSweep { n_list: vec![8, 16], k_list: vec![2, 4], d: 4, instances: 50, seed: 0 }
    }
}

/// Instance `seed` at `(n, k, d)` and an upstream gradient of the output's shape.
pub fn grad_case(n: usize, k: usize, d: usize, seed: u64) -> Result<(Instance, Matrix)> {
    let cfg = InstanceConfig { n, k, d, batch: 1, seed, ..Default::default() };
    let inst = generate_instance(&cfg)?.remove(0);
    let probe_cfg = InstanceConfig { n: k, k, d, batch: 1, seed: seed ^ 0xABCD, ..Default::default() };
    let probe = generate_instance(&probe_cfg)?.remove(0).embeddings;
    Ok((inst, probe))
}

impl GradSweep {
    pub fn cases(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for i in 0..self.instances as u64 {
            for &n in &self.n_list {
                for &k in &self.k_list {
                    if k <= n {
                        out.push((n, k, self.seed.wrapping_add(i)));
                    }
                }
            }
        }
        out
    }

    /// Merged report over every case. Instances whose scores are too close for
    /// `cfg.min_gap` are counted as skipped.
    pub fn run<O: SoftTopK + ?Sized>(&self, op: &O, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
        let mut total: Option<GradCheckReport> = None;
        for (n, k, seed) in self.cases() {
            let (inst, probe) = grad_case(n, k, self.d, seed)?;
            let r = gradcheck_operator(op, &inst.embeddings, &inst.scores, k, &probe, cfg)?;
            match &mut total {
                Some(t) => t.merge(&r),
                None => total = Some(r),
            }
        }
        total.ok_or_else(|| BenchError::Usage("gradcheck grid has no (n, k) pair with k <= n".into()))
    }
}
