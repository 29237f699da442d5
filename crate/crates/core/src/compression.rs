//! Environment compression: worst-case value distortion, lattice covers of
//! the simplex, and hard partitions of the environment space.
//!
//! Total variation is `½‖p − q‖₁`. A cover of resolution `n` has centers
//! `c/n` for integer compositions `c` of `n`; largest-remainder rounding
//! keeps `‖p − c/n‖₁ ≤ S/(2n)`, so `n = ⌈S/(2δ)⌉` gives TV at most `δ/2`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, FiniteSupportBelief, McSpec};
use crate::env::KernelEnv;
use crate::error::{invalid, Error, Result};
use crate::mg::{value, MarkovPolicy, MgDims, Side, TabularZeroSumMG};

/// Enumeration guard per side for [`PolicyClassSpec::AllDeterministic`].
pub const POLICY_CLASS_LIMIT: f64 = 1e5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyClassSpec {
    ExplicitSet {
        max: Vec<MarkovPolicy>,
        min: Vec<MarkovPolicy>,
    },
    AllDeterministic,
}

impl PolicyClassSpec {
    pub fn enumerate(&self, dims: MgDims) -> Result<(Vec<MarkovPolicy>, Vec<MarkovPolicy>)> {
        match self {
            PolicyClassSpec::ExplicitSet { max, min } => {
                if max.is_empty() || min.is_empty() {
                    return invalid("explicit policy classes must be nonempty");
                }
                Ok((max.clone(), min.clone()))
            }
            PolicyClassSpec::AllDeterministic => Ok((
                MarkovPolicy::all_deterministic(Side::Max, dims.horizon, dims.num_states, dims.actions_max, POLICY_CLASS_LIMIT)?,
                MarkovPolicy::all_deterministic(Side::Min, dims.horizon, dims.num_states, dims.actions_min, POLICY_CLASS_LIMIT)?,
            )),
        }
    }
}

/// `max |V^e_{μ,ν}(s1) − V^{e2}_{μ,ν}(s1)|` over the class.
pub fn distortion(e: &TabularZeroSumMG, e2: &TabularZeroSumMG, phi: &PolicyClassSpec) -> Result<f64> {
    if !e.same_rewards(e2) {
        return invalid("distortion needs environments with identical dimensions and rewards");
    }
    let (maxes, mins) = phi.enumerate(e.dims())?;
    distortion_over(e, e2, &maxes, &mins)
}

fn distortion_over(e: &TabularZeroSumMG, e2: &TabularZeroSumMG, maxes: &[MarkovPolicy], mins: &[MarkovPolicy]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for mu in maxes {
        for nu in mins {
            worst = worst.max((value(e, mu, nu)? - value(e2, mu, nu)?).abs());
        }
    }
    Ok(worst)
}

/// Largest `d(e_k, reference of k)` over live candidates of `finite`.
pub fn max_cell_distortion(finite: &FiniteSupportBelief<TabularZeroSumMG>, cells: &CellAssignment, phi: &PolicyClassSpec) -> Result<f64> {
    let (maxes, mins) = phi.enumerate(finite.candidates()[0].dims())?;
    let w = finite.weights();
    let mut worst: f64 = 0.0;
    for (k, e) in finite.candidates().iter().enumerate() {
        if w[k] > 0.0 {
            worst = worst.max(distortion_over(e, cells.reference_of(k), &maxes, &mins)?);
        }
    }
    Ok(worst)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexCover {
    num_states: usize,
    delta: f64,
    resolution: usize,
}

impl SimplexCover {
    pub fn new(num_states: usize, delta: f64) -> Result<Self> {
        if num_states == 0 {
            return invalid("cover needs at least one state");
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return invalid(format!("cover radius {delta} must lie in (0, 1]"));
        }
        let resolution = (num_states as f64 / (2.0 * delta)).ceil() as usize;
        Ok(Self {
            num_states,
            delta,
            resolution,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of centers, `C(n + S − 1, S − 1)`.
    pub fn kappa(&self) -> u128 {
        binomial((self.resolution + self.num_states - 1) as u64, (self.num_states - 1) as u64)
    }

    /// Lattice counts of the assigned center: largest-remainder rounding,
    /// ties to the lowest index.
    pub fn assign_counts(&self, p: &[f64]) -> Vec<u64> {
        let n = self.resolution as f64;
        let z: f64 = p.iter().sum();
        let scaled: Vec<f64> = p.iter().map(|x| x.max(0.0) / z * n).collect();
        let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&i, &j| {
            let (fi, fj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
            fj.total_cmp(&fi).then(i.cmp(&j))
        });
        let total: u64 = counts.iter().sum();
        let n = self.resolution as u64;
        if total < n {
            for &i in order.iter().take((n - total) as usize) {
                counts[i] += 1;
            }
        } else {
            let mut excess = total - n;
            for &i in order.iter().rev() {
                if excess == 0 {
                    break;
                }
                if counts[i] > 0 {
                    counts[i] -= 1;
                    excess -= 1;
                }
            }
        }
        counts
    }

    /// Lexicographic rank of a composition.
    pub fn center_index(&self, counts: &[u64]) -> u128 {
        let s = self.num_states;
        let mut rank: u128 = 0;
        let mut remaining = self.resolution as u64;
        for (i, &c) in counts.iter().enumerate().take(s - 1) {
            let parts = (s - i - 1) as u64;
            for v in 0..c {
                let rest = remaining - v;
                rank += binomial(rest + parts - 1, parts - 1);
            }
            remaining -= c;
        }
        rank
    }

    pub fn center_counts(&self, mut index: u128) -> Vec<u64> {
        let s = self.num_states;
        let mut out = vec![0u64; s];
        let mut remaining = self.resolution as u64;
        for (i, slot) in out.iter_mut().enumerate().take(s - 1) {
            let parts = (s - i - 1) as u64;
            let mut v = 0;
            loop {
                let block = binomial(remaining - v + parts - 1, parts - 1);
                if index < block {
                    break;
                }
                index -= block;
                v += 1;
            }
            *slot = v;
            remaining -= v;
        }
        out[s - 1] = remaining;
        out
    }

    pub fn counts_to_center(&self, counts: &[u64]) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 / self.resolution as f64).collect()
    }

    pub fn center(&self, index: u128) -> Vec<f64> {
        self.counts_to_center(&self.center_counts(index))
    }

    /// Assigned center index and the center itself.
    pub fn assign(&self, p: &[f64]) -> (u128, Vec<f64>) {
        let c = self.assign_counts(p);
        (self.center_index(&c), self.counts_to_center(&c))
    }

    pub fn centers(&self, limit: u128) -> Result<Vec<Vec<f64>>> {
        let k = self.kappa();
        if k > limit {
            return Err(Error::EnumerationTooLarge {
                what: "cover centers",
                size: k as f64,
                limit: limit as f64,
            });
        }
        Ok((0..k).map(|i| self.center(i)).collect())
    }
}

pub fn simplex_cover(num_states: usize, delta: f64) -> Result<SimplexCover> {
    SimplexCover::new(num_states, delta)
}

/// One assigned center per kernel row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub Vec<u128>);

/// Partition of environments sharing `template`'s rewards into cells whose
/// rows round to the same cover centers (radius `ε/(2H²)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardPartition {
    epsilon: f64,
    cover: SimplexCover,
    template: TabularZeroSumMG,
}

impl HardPartition {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.cover.delta()
    }

    pub fn cover(&self) -> &SimplexCover {
        &self.cover
    }

    /// `κ(δ)^{rows}` as a float; never materialized.
    pub fn num_cells(&self) -> f64 {
        (self.cover.kappa() as f64).powi(self.template.kernel_dims().num_rows() as i32)
    }

    pub fn cell_id(&self, e: &TabularZeroSumMG) -> CellId {
        let kd = e.kernel_dims();
        CellId((0..kd.num_rows()).map(|r| self.cover.assign(e.kernel_row(r)).0).collect())
    }

    pub fn reference(&self, cell: &CellId) -> TabularZeroSumMG {
        let kernel = cell.0.iter().flat_map(|&c| self.cover.center(c)).collect();
        self.template.with_kernel(kernel)
    }
}

pub fn build_hard_partition(template: &TabularZeroSumMG, epsilon: f64) -> Result<HardPartition> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid("epsilon must be positive");
    }
    let h = template.horizon() as f64;
    let delta = (epsilon / (2.0 * h * h)).min(1.0);
    Ok(HardPartition {
        epsilon,
        cover: SimplexCover::new(template.num_states(), delta)?,
        template: template.clone(),
    })
}

pub fn compress_env(partition: &HardPartition, e: &TabularZeroSumMG) -> Result<(CellId, TabularZeroSumMG)> {
    if !e.same_rewards(&partition.template) {
        return invalid("environment does not match the partition's dimensions and rewards");
    }
    let id = partition.cell_id(e);
    let r = partition.reference(&id);
    Ok((id, r))
}

/// Cells given by hand: `cell_of[k]` for candidate `k` of a finite belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPartition {
    pub cell_of: Vec<usize>,
    pub references: Vec<TabularZeroSumMG>,
}

impl ExplicitPartition {
    pub fn new(cell_of: Vec<usize>, references: Vec<TabularZeroSumMG>) -> Result<Self> {
        if references.is_empty() || cell_of.iter().any(|&c| c >= references.len()) {
            return invalid("explicit partition refers to a missing cell");
        }
        Ok(Self { cell_of, references })
    }

    /// Each candidate is its own cell and reference.
    pub fn identity(belief: &FiniteSupportBelief<TabularZeroSumMG>) -> Self {
        let n = belief.candidates().len();
        Self {
            cell_of: (0..n).collect(),
            references: belief.candidates().to_vec(),
        }
    }

    pub fn one_cell(num_candidates: usize, reference: TabularZeroSumMG) -> Self {
        Self {
            cell_of: vec![0; num_candidates],
            references: vec![reference],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Partition {
    Hard(HardPartition),
    Explicit(ExplicitPartition),
}

/// Cells occupied by a finite belief's candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAssignment {
    pub cell_of: Vec<usize>,
    pub references: Vec<TabularZeroSumMG>,
}

impl CellAssignment {
    pub fn cell_weights(&self, weights: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.references.len()];
        for (k, &c) in self.cell_of.iter().enumerate() {
            p[c] += weights[k];
        }
        p
    }

    pub fn reference_of(&self, candidate: usize) -> &TabularZeroSumMG {
        &self.references[self.cell_of[candidate]]
    }
}

impl Partition {
    pub fn assign(&self, belief: &FiniteSupportBelief<TabularZeroSumMG>) -> Result<CellAssignment> {
        match self {
            Partition::Explicit(p) => {
                if p.cell_of.len() != belief.candidates().len() {
                    return invalid("explicit partition size does not match the belief");
                }
                Ok(CellAssignment {
                    cell_of: p.cell_of.clone(),
                    references: p.references.clone(),
                })
            }
            Partition::Hard(p) => {
                let mut index: HashMap<CellId, usize> = HashMap::new();
                let mut references = Vec::new();
                let mut cell_of = Vec::with_capacity(belief.candidates().len());
                for e in belief.candidates() {
                    let (id, r) = compress_env(p, e)?;
                    let next = references.len();
                    let c = *index.entry(id).or_insert_with(|| {
                        references.push(r);
                        next
                    });
                    cell_of.push(c);
                }
                Ok(CellAssignment { cell_of, references })
            }
        }
    }

    pub fn assign_belief(&self, belief: &Belief<TabularZeroSumMG>, mc: Option<McSpec>) -> Result<(FiniteSupportBelief<TabularZeroSumMG>, CellAssignment)> {
        if matches!(self, Partition::Explicit(_)) && !belief.is_exact() {
            return invalid("explicit partitions need a finite-support belief");
        }
        let finite = belief.to_finite(mc)?;
        let cells = self.assign(&finite)?;
        Ok((finite, cells))
    }
}

/// Posterior mean of `d(𝓔, Ẽ)` and its standard error when sampled.
pub fn check_soft_constraint(
    belief: &Belief<TabularZeroSumMG>,
    partition: &Partition,
    phi: &PolicyClassSpec,
    mc: Option<McSpec>,
) -> Result<(f64, Option<f64>)> {
    let (finite, cells) = partition.assign_belief(belief, mc)?;
    let (maxes, mins) = phi.enumerate(belief.template().dims())?;
    let w = finite.weights();
    let vals: Vec<(f64, f64)> = finite
        .candidates()
        .iter()
        .enumerate()
        .filter(|(k, _)| w[*k] > 0.0)
        .map(|(k, e)| Ok((w[k], distortion_over(e, cells.reference_of(k), &maxes, &mins)?)))
        .collect::<Result<_>>()?;
    Ok(crate::belief::weighted_mean(&vals, !belief.is_exact()))
}

/// Entropy (nats) of the induced cell distribution.
pub fn compressed_entropy(belief: &Belief<TabularZeroSumMG>, partition: &Partition, mc: Option<McSpec>) -> Result<f64> {
    let (finite, cells) = partition.assign_belief(belief, mc)?;
    Ok(entropy(&cells.cell_weights(&finite.weights())))
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mg::{random_env, random_kernel};
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn tiny() -> MgDims {
        MgDims {
            horizon: 2,
            num_states: 2,
            actions_max: 2,
            actions_min: 2,
        }
    }

    #[test]
    fn cover_hand_example() {
        let c = simplex_cover(2, 0.25).unwrap();
        assert_eq!(c.resolution(), 4);
        assert_eq!(c.kappa(), 5);
        let (_, center) = c.assign(&[0.3, 0.7]);
        assert_eq!(center, vec![0.25, 0.75]);
        assert!((total_variation(&[0.3, 0.7], &center) - 0.05).abs() < 1e-15);
        let all = c.centers(100).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all[0], vec![0.0, 1.0]);
        assert!(simplex_cover(2, 0.0).is_err());
        let wide = simplex_cover(3, 1.0).unwrap();
        assert_eq!(wide.resolution(), 2);
        let (_, center) = wide.assign(&[0.2, 0.3, 0.5]);
        assert!(total_variation(&[0.2, 0.3, 0.5], &center) <= 1.0);
    }

    #[test]
    fn rank_and_unrank_are_inverse() {
        let c = simplex_cover(4, 0.1).unwrap();
        for i in 0..c.kappa() {
            assert_eq!(c.center_index(&c.center_counts(i)), i);
        }
        let centers = c.centers(10_000).unwrap();
        for i in 1..centers.len() {
            assert_ne!(centers[i], centers[i - 1]);
        }
    }

    #[test]
    fn random_vectors_stay_within_delta() {
        let mut rng = rng_from_seed(3);
        for &(s, delta) in &[(2, 0.3), (3, 0.05), (5, 0.01), (4, 0.2)] {
            let c = simplex_cover(s, delta).unwrap();
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..s).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let z: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|x| x / z).collect();
                let (_, center) = c.assign(&p);
                assert!(total_variation(&p, &center) <= delta + 1e-12);
                assert!((center.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distortion_basics() {
        let e = random_env(tiny(), 1);
        let mut rng = rng_from_seed(2);
        let e2 = e.with_kernel(random_kernel(e.kernel_dims(), &mut rng));
        let phi = PolicyClassSpec::AllDeterministic;
        assert_eq!(distortion(&e, &e, &phi).unwrap(), 0.0);
        let d = distortion(&e, &e2, &phi).unwrap();
        assert_eq!(d, distortion(&e2, &e, &phi).unwrap());
        assert!(d > 0.0);
    }

    #[test]
    fn same_cell_and_reference_bounds() {
        let template = random_env(tiny(), 10);
        let eps = 0.2;
        let part = build_hard_partition(&template, eps).unwrap();
        let phi = PolicyClassSpec::AllDeterministic;
        let mut rng = rng_from_seed(11);
        for _ in 0..50 {
            let e = template.with_kernel(random_kernel(template.kernel_dims(), &mut rng));
            let (id, r) = compress_env(&part, &e).unwrap();
            assert_eq!(part.cell_id(&e), id);
            assert_eq!(compress_env(&part, &r).unwrap().1, r);
            for row in 0..e.kernel_dims().num_rows() {
                assert!(total_variation(e.kernel_row(row), r.kernel_row(row)) <= part.delta() + 1e-12);
            }
            assert!(distortion(&e, &r, &phi).unwrap() <= eps);
        }
    }

    #[test]
    fn entropy_and_soft_constraint() {
        let template = random_env(tiny(), 1);
        let mut rng = rng_from_seed(4);
        let e2 = template.with_kernel(random_kernel(template.kernel_dims(), &mut rng));
        let b = FiniteSupportBelief::uniform(vec![template.clone(), e2.clone()]).unwrap();
        let belief = Belief::Finite(b.clone());
        let id = Partition::Explicit(ExplicitPartition::identity(&b));
        assert!((compressed_entropy(&belief, &id, None).unwrap() - 2f64.ln()).abs() < 1e-15);
        let mean = belief.reward_free_mean_env();
        let one = Partition::Explicit(ExplicitPartition::one_cell(2, mean.clone()));
        assert_eq!(compressed_entropy(&belief, &one, None).unwrap(), 0.0);
        let phi = PolicyClassSpec::AllDeterministic;
        let (soft, se) = check_soft_constraint(&belief, &one, &phi, None).unwrap();
        let direct = 0.5 * distortion(&template, &mean, &phi).unwrap() + 0.5 * distortion(&e2, &mean, &phi).unwrap();
        assert!((soft - direct).abs() < 1e-15 && se.is_none());

        let point = Belief::Finite(FiniteSupportBelief::uniform(vec![template.clone()]).unwrap());
        let own = Partition::Explicit(ExplicitPartition::identity(point.as_finite().unwrap()));
        assert_eq!(check_soft_constraint(&point, &own, &phi, None).unwrap().0, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn assignment_is_total_and_deterministic(seed in any::<u64>(), s in 1usize..6, delta in 0.01f64..1.0) {
            let c = simplex_cover(s, delta).unwrap();
            let mut rng = rng_from_seed(seed);
            let raw: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 1e-9).collect();
            let z: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / z).collect();
            let (i, center) = c.assign(&p);
            prop_assert_eq!(c.assign(&p).0, i);
            prop_assert!(i < c.kappa());
            prop_assert!(total_variation(&p, &center) <= delta + 1e-12);
        }
    }
}
