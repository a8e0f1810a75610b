use softtopk_core::{
    generate_instance, gradcheck_operator, GradCheckConfig, GradCheckReport, HalvingTopK, Instance,
    InstanceConfig, IterativeTopK, Matrix, PeakedKernel, Scores, SoftTopK,
};

/// Random instance plus a random upstream gradient of matching output shape.
fn case(n: usize, k: usize, d: usize, seed: u64) -> (Instance, Matrix) {
    let cfg = InstanceConfig { n, k, d, batch: 1, seed, ..Default::default() };
    let inst = generate_instance(&cfg).unwrap().remove(0);
    let probe_cfg = InstanceConfig { n: k, k, d, batch: 1, seed: seed ^ 0xABCD, ..Default::default() };
    let probe = generate_instance(&probe_cfg).unwrap().remove(0).embeddings;
    (inst, probe)
}

fn sweep<O: SoftTopK>(op: &O, seeds: std::ops::Range<u64>) -> GradCheckReport {
    let cfg = GradCheckConfig::default();
    let mut total: Option<GradCheckReport> = None;
    for seed in seeds {
        for (n, k) in [(8, 2), (8, 4), (16, 2), (16, 4)] {
            let (inst, probe) = case(n, k, 4, seed);
            let r = gradcheck_operator(op, &inst.embeddings, &inst.scores, k, &probe, &cfg).unwrap();
            match &mut total {
                Some(t) => t.merge(&r),
                None => total = Some(r),
            }
        }
    }
    total.unwrap()
}

#[test]
fn iterative_verbatim_matches_finite_differences() {
    let r = sweep(&IterativeTopK::default(), 0..50);
    println!("iterative verbatim: {r}");
    assert!(r.noise_adjusted_error < 1e-5, "{r}");
    assert!(r.checked >= 190);
}

#[test]
fn iterative_normalized_matches_finite_differences() {
    let r = sweep(&IterativeTopK::new(PeakedKernel::normalized(4.0)), 0..50);
    println!("iterative normalized: {r}");
    assert!(r.noise_adjusted_error < 1e-5, "{r}");
}

#[test]
fn halving_matches_finite_differences() {
    let r = sweep(&HalvingTopK::new(5.0), 0..50);
    println!("halving C=5: {r}");
    assert!(r.noise_adjusted_error < 1e-5, "{r}");
    assert!(r.checked >= 190);
}

#[test]
fn halving_with_padding_matches_finite_differences() {
    let cfg = GradCheckConfig::default();
    let op = HalvingTopK::new(5.0);
    for seed in 0..20 {
        for (n, k) in [(5, 2), (7, 3), (12, 4)] {
            let (inst, probe) = case(n, k, 3, seed);
            let r = gradcheck_operator(&op, &inst.embeddings, &inst.scores, k, &probe, &cfg).unwrap();
            assert!(r.noise_adjusted_error < 1e-5, "n={n} k={k} seed={seed}: {r}");
        }
    }
}

#[test]
fn two_candidate_iterative_score_gradient() {
    let e = Matrix::from_rows(&[[1.0], [3.0]]).unwrap();
    let v = Scores::new(vec![1.0, 0.0]).unwrap();
    let probe = Matrix::from_rows(&[[1.0]]).unwrap();
    let r = gradcheck_operator(
        &IterativeTopK::default(),
        &e,
        &v,
        1,
        &probe,
        &GradCheckConfig { tol: 1e-6, ..Default::default() },
    )
    .unwrap();
    assert!(r.noise_adjusted_error < 1e-5, "{r}");
}

#[test]
fn embedding_gradient_is_weighted_upstream() {
    // Both operators are linear in E, so dE_j = Σ_i weight_ij * G_i exactly.
    let (inst, probe) = case(16, 4, 3, 11);
    let op = IterativeTopK::default();
    let s = op.forward(&inst.embeddings, &inst.scores, 4).unwrap();
    let g = op.backward(&s.tape, &probe).unwrap();
    let tape = s.tape.as_iterative().unwrap();
    let mut expected = Matrix::zeros(16, 3);
    for (i, step) in tape.steps.iter().enumerate() {
        for j in 0..16 {
            for c in 0..3 {
                expected[(j, c)] += step.weights[j] * probe[(i, c)];
            }
        }
    }
    assert!(g.d_embeddings.max_abs_diff(&expected).unwrap() < 1e-12);
}

#[test]
fn zero_upstream_halving() {
    let (inst, _) = case(16, 2, 3, 5);
    let op = HalvingTopK::new(5.0);
    let s = op.forward(&inst.embeddings, &inst.scores, 2).unwrap();
    let g = op.backward(&s.tape, &Matrix::zeros(2, 3)).unwrap();
    assert!(g.d_embeddings.as_slice().iter().all(|&x| x == 0.0));
    assert!(g.d_scores.iter().all(|&x| x == 0.0));
    assert_eq!(g.d_embeddings.shape(), (16, 3));
    assert_eq!(g.d_scores.len(), 16);
}
