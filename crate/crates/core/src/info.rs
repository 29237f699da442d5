//! Mutual information between the environment (or its compression) and one
//! episode's trajectory, and the information ratios built on it.

use serde::{Deserialize, Serialize};

use crate::belief::{weighted_mean, Belief, FiniteSupportBelief, McSpec};
use crate::compression::{CellAssignment, Partition};
use crate::env::{occupancy_rows, KernelDims, KernelEnv};
use crate::error::{Error, Result};
use crate::mg::{best_response_min, joint_table, solve_nash, value, MarkovPolicy, TabularZeroSumMG};

/// Information at or below this is treated as zero.
pub const MI_FLOOR: f64 = 1e-12;
/// Trajectory enumeration guard: `(S·J)^H` leaves.
pub const ENUM_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoRatioReport {
    pub numerator_regret: f64,
    pub denominator_mi: f64,
    pub ratio: f64,
    pub infinite: bool,
    pub estimation_stderr: Option<f64>,
}

impl InfoRatioReport {
    /// `num²/den`; a floored denominator gives an infinite ratio unless the
    /// numerator vanishes too, in which case the ratio is 0.
    pub fn new(numerator_regret: f64, denominator_mi: f64, estimation_stderr: Option<f64>) -> Self {
        let denominator_mi = denominator_mi.max(0.0);
        let (ratio, infinite) = if denominator_mi > MI_FLOOR {
            (numerator_regret * numerator_regret / denominator_mi, false)
        } else if numerator_regret.abs() <= MI_FLOOR {
            (0.0, false)
        } else {
            (f64::INFINITY, true)
        };
        Self {
            numerator_regret,
            denominator_mi,
            ratio,
            infinite,
            estimation_stderr,
        }
    }
}

/// Per-row expected KL and the reward-free mean kernel of a belief; MI of
/// any joint policy table is then one forward pass.
#[derive(Debug, Clone)]
pub struct InfoContext {
    dims: KernelDims,
    initial_state: usize,
    mean_kernel: Vec<f64>,
    kl_rows: Vec<f64>,
}

impl InfoContext {
    pub fn new<E: KernelEnv>(belief: &Belief<E>) -> Self {
        Self {
            dims: belief.kernel_dims(),
            initial_state: belief.template().initial_state(),
            mean_kernel: belief.mean_kernel(),
            kl_rows: belief.expected_kl_rows(),
        }
    }

    pub fn kl_rows(&self) -> &[f64] {
        &self.kl_rows
    }

    /// `Σ_rows d^{ẽ}(row)·E[KL(row)]` for joint table `joint`.
    pub fn mi(&self, joint: &[f64]) -> f64 {
        let d = occupancy_rows(self.dims, &self.mean_kernel, self.initial_state, joint);
        mutual_info_from_occupancy(&d, &self.kl_rows)
    }
}

pub fn mutual_info_from_occupancy(occupancy: &[f64], kl_rows: &[f64]) -> f64 {
    occupancy
        .iter()
        .zip(kl_rows)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, k)| d * k)
        .sum::<f64>()
        .max(0.0)
}

/// Occupancy-weighted expected KL in the reward-free mean environment.
pub fn mutual_info_trajectory(belief: &Belief<TabularZeroSumMG>, mu: &MarkovPolicy, nu: &MarkovPolicy) -> f64 {
    InfoContext::new(belief).mi(&joint_table(mu, nu))
}

/// `I(C; 𝒯)` by exhaustive enumeration, where candidate `k` lies in cell
/// `cells[k]` (identity when `None`).
pub fn trajectory_mi_enum<E: KernelEnv>(candidates: &[E], weights: &[f64], cells: Option<&[usize]>, joint: &[f64]) -> Result<f64> {
    let dims = candidates[0].kernel_dims();
    let leaves = ((dims.num_states * dims.num_joint) as f64).powi(dims.horizon as i32);
    if leaves > ENUM_LIMIT {
        return Err(Error::EnumerationTooLarge {
            what: "trajectories",
            size: leaves,
            limit: ENUM_LIMIT,
        });
    }
    let live: Vec<usize> = (0..candidates.len()).filter(|&k| weights[k] > 0.0).collect();
    let cell_of: Vec<usize> = match cells {
        Some(c) => live.iter().map(|&k| c[k]).collect(),
        None => (0..live.len()).collect(),
    };
    let num_cells = cell_of.iter().max().map_or(0, |m| m + 1);
    let mut cell_prior = vec![0.0; num_cells];
    for (i, &k) in live.iter().enumerate() {
        cell_prior[cell_of[i]] += weights[k];
    }
    let kernels: Vec<&[f64]> = live.iter().map(|&k| candidates[k].kernel()).collect();
    let w: Vec<f64> = live.iter().map(|&k| weights[k]).collect();
    let walker = Walker {
        dims,
        kernels,
        weights: w,
        cell_of,
        cell_prior,
        joint,
    };
    let start = vec![1.0; walker.kernels.len()];
    let mut acc = 0.0;
    walker.walk(0, candidates[0].initial_state(), 1.0, &start, &mut acc);
    Ok(acc.max(0.0))
}

struct Walker<'a> {
    dims: KernelDims,
    kernels: Vec<&'a [f64]>,
    weights: Vec<f64>,
    cell_of: Vec<usize>,
    cell_prior: Vec<f64>,
    joint: &'a [f64],
}

impl Walker<'_> {
    fn walk(&self, h: usize, s: usize, pi: f64, p: &[f64], acc: &mut f64) {
        if h == self.dims.horizon {
            let mut by_cell = vec![0.0; self.cell_prior.len()];
            for (i, &pe) in p.iter().enumerate() {
                by_cell[self.cell_of[i]] += self.weights[i] * pe;
            }
            let total: f64 = by_cell.iter().sum();
            if total <= 0.0 {
                return;
            }
            for (c, &m) in by_cell.iter().enumerate() {
                if m > 0.0 {
                    *acc += pi * m * ((m / self.cell_prior[c]) / total).ln();
                }
            }
            return;
        }
        let ns = self.dims.num_states;
        let mut next = vec![0.0; p.len()];
        for j in 0..self.dims.num_joint {
            let row = self.dims.row(h, s, j);
            let pj = self.joint[row];
            if pj == 0.0 {
                continue;
            }
            for s2 in 0..ns {
                let mut any = false;
                for (i, k) in self.kernels.iter().enumerate() {
                    next[i] = p[i] * k[row * ns + s2];
                    any |= next[i] > 0.0;
                }
                if any {
                    self.walk(h + 1, s2, pi * pj, &next, acc);
                }
            }
        }
    }
}

/// `I(𝓔; 𝒯)` by trajectory enumeration.
pub fn mutual_info_trajectory_enum(belief: &FiniteSupportBelief<TabularZeroSumMG>, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<f64> {
    trajectory_mi_enum(belief.candidates(), &belief.weights(), None, &joint_table(mu, nu))
}

/// `I(Ẽ; 𝒯)` by enumeration over the finite (or sampled) belief.
pub fn mutual_info_compressed(
    belief: &Belief<TabularZeroSumMG>,
    partition: &Partition,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
    mc: Option<McSpec>,
) -> Result<f64> {
    let (finite, cells) = partition.assign_belief(belief, mc)?;
    compressed_mi_assigned(&finite, &cells, &joint_table(mu, nu))
}

pub(crate) fn compressed_mi_assigned(finite: &FiniteSupportBelief<TabularZeroSumMG>, cells: &CellAssignment, joint: &[f64]) -> Result<f64> {
    trajectory_mi_enum(finite.candidates(), &finite.weights(), Some(&cells.cell_of), joint)
}

fn expectation<F>(parts: &[(f64, &TabularZeroSumMG)], sampled: bool, f: F) -> Result<(f64, Option<f64>)>
where
    F: Fn(usize, &TabularZeroSumMG) -> Result<f64>,
{
    let vals: Vec<(f64, f64)> = parts
        .iter()
        .enumerate()
        .map(|(i, (w, e))| Ok((*w, f(i, e)?)))
        .collect::<Result<_>>()?;
    Ok(weighted_mean(&vals, sampled))
}

fn live_parts(finite: &FiniteSupportBelief<TabularZeroSumMG>) -> Vec<(f64, usize)> {
    finite.weights().into_iter().enumerate().filter(|(_, w)| *w > 0.0).map(|(k, w)| (w, k)).collect()
}

/// `Γ`: numerator `E[V^𝓔(μ*(𝓔), ν) − V^𝓔(μ, ν)]`.
pub fn joint_info_ratio(belief: &Belief<TabularZeroSumMG>, mu: &MarkovPolicy, nu: &MarkovPolicy, mc: Option<McSpec>) -> Result<InfoRatioReport> {
    let parts = belief.particles(mc)?;
    let refs: Vec<(f64, &TabularZeroSumMG)> = parts.iter().map(|(w, e)| (*w, e)).collect();
    let (num, se) = expectation(&refs, !belief.is_exact(), |_, e| {
        let star = solve_nash(e)?;
        Ok(value(e, &star.mu, nu)? - value(e, mu, nu)?)
    })?;
    Ok(InfoRatioReport::new(num, mutual_info_trajectory(belief, mu, nu), se))
}

/// `Λ^μ`: numerator `E[V^𝓔(μ, ν) − V^𝓔(μ, ν†_𝓔(μ))]`.
pub fn marginal_info_ratio(belief: &Belief<TabularZeroSumMG>, mu: &MarkovPolicy, nu: &MarkovPolicy, mc: Option<McSpec>) -> Result<InfoRatioReport> {
    let parts = belief.particles(mc)?;
    let refs: Vec<(f64, &TabularZeroSumMG)> = parts.iter().map(|(w, e)| (*w, e)).collect();
    let (num, se) = expectation(&refs, !belief.is_exact(), |_, e| {
        let (br, _) = best_response_min(e, mu)?;
        Ok(value(e, mu, nu)? - value(e, mu, &br)?)
    })?;
    Ok(InfoRatioReport::new(num, mutual_info_trajectory(belief, mu, nu), se))
}

/// `Γ̃`: numerator `E[V^Ẽ(μ*(𝓔), ν) − V^Ẽ(μ, ν)]`.
pub fn compressed_joint_ratio(
    belief: &Belief<TabularZeroSumMG>,
    partition: &Partition,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
    mc: Option<McSpec>,
) -> Result<InfoRatioReport> {
    let (finite, cells) = partition.assign_belief(belief, mc)?;
    let live = live_parts(&finite);
    let refs: Vec<(f64, &TabularZeroSumMG)> = live.iter().map(|&(w, k)| (w, &finite.candidates()[k])).collect();
    let (num, se) = expectation(&refs, !belief.is_exact(), |i, e| {
        let r = cells.reference_of(live[i].1);
        let star = solve_nash(e)?;
        Ok(value(r, &star.mu, nu)? - value(r, mu, nu)?)
    })?;
    let den = compressed_mi_assigned(&finite, &cells, &joint_table(mu, nu))?;
    Ok(InfoRatioReport::new(num, den, se))
}

/// `Λ̃^μ`: numerator `E[V^Ẽ(μ, ν) − V^Ẽ(μ, ν†_𝓔(μ))]`.
pub fn compressed_marginal_ratio(
    belief: &Belief<TabularZeroSumMG>,
    partition: &Partition,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
    mc: Option<McSpec>,
) -> Result<InfoRatioReport> {
    let (finite, cells) = partition.assign_belief(belief, mc)?;
    let live = live_parts(&finite);
    let refs: Vec<(f64, &TabularZeroSumMG)> = live.iter().map(|&(w, k)| (w, &finite.candidates()[k])).collect();
    let (num, se) = expectation(&refs, !belief.is_exact(), |i, e| {
        let r = cells.reference_of(live[i].1);
        let (br, _) = best_response_min(e, mu)?;
        Ok(value(r, mu, nu)? - value(r, mu, &br)?)
    })?;
    let den = compressed_mi_assigned(&finite, &cells, &joint_table(mu, nu))?;
    Ok(InfoRatioReport::new(num, den, se))
}
