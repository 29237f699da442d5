//! Shape shared by every tabular game: kernel rows indexed by
//! `(h, s, joint action)`, flattened row-major, each row a distribution over
//! next states. Beliefs and information measures only see this view.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Row-sum tolerance for kernels.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelDims {
    pub horizon: usize,
    pub num_states: usize,
    pub num_joint: usize,
}

impl KernelDims {
    pub fn num_rows(&self) -> usize {
        self.horizon * self.num_states * self.num_joint
    }

    pub fn kernel_len(&self) -> usize {
        self.num_rows() * self.num_states
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.num_states + s) * self.num_joint + j
    }

    /// Rows belonging to step `h`.
    pub fn step_rows(&self, h: usize) -> std::ops::Range<usize> {
        let per = self.num_states * self.num_joint;
        h * per..(h + 1) * per
    }
}

/// One observed transition `(h, s, joint action) → next`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub h: usize,
    pub s: usize,
    pub joint: usize,
    pub next: usize,
}

/// Environments a belief can range over.
pub trait KernelEnv: Clone + Send + Sync {
    fn kernel_dims(&self) -> KernelDims;
    fn kernel(&self) -> &[f64];
    fn initial_state(&self) -> usize;
    /// Same rewards and dimensions, new kernel. Rows are trusted.
    fn with_kernel(&self, kernel: Vec<f64>) -> Self;
    /// Adds `shift[row]` to every reward on that row, without clamping.
    fn shift_rewards(&self, shift: &[f64]) -> Self;
    fn same_rewards(&self, other: &Self) -> bool;

    fn kernel_row(&self, row: usize) -> &[f64] {
        let s = self.kernel_dims().num_states;
        &self.kernel()[row * s..(row + 1) * s]
    }
}

pub(crate) fn validate_kernel(dims: KernelDims, kernel: &[f64]) -> Result<()> {
    if kernel.len() != dims.kernel_len() {
        return invalid(format!(
            "kernel has {} entries, expected {}",
            kernel.len(),
            dims.kernel_len()
        ));
    }
    for (r, row) in kernel.chunks(dims.num_states).enumerate() {
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid(format!("kernel row {r} has a negative or non-finite entry"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return invalid(format!("kernel row {r} sums to {sum}"));
        }
    }
    Ok(())
}

/// Forward occupancy over kernel rows. `joint[(h*S+s)*J + j]` is the
/// probability of joint action `j` at `(h, s)`.
pub fn occupancy_rows(dims: KernelDims, kernel: &[f64], s1: usize, joint: &[f64]) -> Vec<f64> {
    let (ns, nj) = (dims.num_states, dims.num_joint);
    let mut d = vec![0.0; dims.num_rows()];
    let mut state = vec![0.0; ns];
    state[s1] = 1.0;
    for h in 0..dims.horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state[s] == 0.0 {
                continue;
            }
            for j in 0..nj {
                let row = dims.row(h, s, j);
                let m = state[s] * joint[row];
                if m == 0.0 {
                    continue;
                }
                d[row] = m;
                for (n, p) in next.iter_mut().zip(&kernel[row * ns..(row + 1) * ns]) {
                    *n += m * p;
                }
            }
        }
        state = next;
    }
    d
}

pub(crate) fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            kl += pi * (pi / qi).ln();
        }
    }
    kl.max(0.0)
}

/// Log-sum-exp normalized weights.
pub(crate) fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; log_w.len()];
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_handles_zero_mass() {
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]), 2f64.ln());
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]), f64::INFINITY);
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn log_weights_normalize() {
        let w = normalize_log_weights(&[-1000.0, -1000.0 + 2f64.ln(), f64::NEG_INFINITY]);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(w[2], 0.0);
    }
}
