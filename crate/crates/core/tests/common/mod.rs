#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng as _;

use maids_core::belief::FiniteSupportBelief;
use maids_core::env::KernelEnv;
use maids_core::mg::{random_kernel, MarkovPolicy, Side};
use maids_core::rng::Rng;

pub fn benchmarks_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmarks")
}

/// Every combination of `options[h]` kernel slices at step `h`, weighted by
/// the product of random per-step marginals. Such priors factor over steps.
pub fn step_product<E: KernelEnv>(base: &E, options: &[usize], rng: &mut Rng) -> FiniteSupportBelief<E> {
    let kd = base.kernel_dims();
    assert_eq!(options.len(), kd.horizon);
    let ns = kd.num_states;
    let slices: Vec<Vec<Vec<f64>>> = (0..kd.horizon)
        .map(|h| {
            let r = kd.step_rows(h);
            (0..options[h])
                .map(|_| random_kernel(kd, rng)[r.start * ns..r.end * ns].to_vec())
                .collect()
        })
        .collect();
    let marginals: Vec<Vec<f64>> = options
        .iter()
        .map(|&o| {
            let w: Vec<f64> = (0..o).map(|_| 0.05 + rng.random::<f64>()).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        })
        .collect();
    let total: usize = options.iter().product();
    let mut cands = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut k = base.kernel().to_vec();
        let mut w = 1.0;
        for h in (0..kd.horizon).rev() {
            let o = idx % options[h];
            idx /= options[h];
            let r = kd.step_rows(h);
            k[r.start * ns..r.end * ns].copy_from_slice(&slices[h][o]);
            w *= marginals[h][o];
        }
        cands.push(base.with_kernel(k));
        weights.push(w);
    }
    FiniteSupportBelief::new(cands, weights).unwrap()
}

/// Per-step option counts with at most `max_candidates` combinations and
/// at least two when the horizon allows.
pub fn random_options(horizon: usize, max_candidates: usize, rng: &mut Rng) -> Vec<usize> {
    loop {
        let o: Vec<usize> = (0..horizon).map(|_| rng.random_range(1..=2)).collect();
        let n: usize = o.iter().product();
        if n >= 2 && n <= max_candidates {
            return o;
        }
    }
}

pub fn random_policy(side: Side, h: usize, s: usize, a: usize, rng: &mut Rng) -> MarkovPolicy {
    let mut dist = Vec::with_capacity(h * s * a);
    for _ in 0..h * s {
        let row: Vec<f64> = (0..a).map(|_| rng.random::<f64>() + 1e-3).collect();
        let z: f64 = row.iter().sum();
        dist.extend(row.into_iter().map(|x| x / z));
    }
    MarkovPolicy::new(side, h, s, a, dist).unwrap()
}
