//! Beliefs over environments: finite-support mixtures and per-row Dirichlet
//! products. Both are generic over [`KernelEnv`] so the general-sum module
//! reuses them with joint-action rows.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::env::{kl_divergence, normalize_log_weights, KernelDims, KernelEnv, Transition};
use crate::error::{invalid, Error, Result};
use crate::mg::{value, MarkovPolicy, TabularZeroSumMG, Trajectory};
use crate::rng::{derive_seed, rng_from_seed, sample_index};

/// Monte-Carlo budget for posterior expectations under continuous beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSpec {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "FiniteJson<E>",
    into = "FiniteJson<E>",
    bound(serialize = "E: Serialize + Clone", deserialize = "E: Deserialize<'de> + KernelEnv")
)]
pub struct FiniteSupportBelief<E> {
    candidates: Vec<E>,
    log_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FiniteJson<E> {
    candidates: Vec<E>,
    weights: Vec<f64>,
}

impl<E: KernelEnv> TryFrom<FiniteJson<E>> for FiniteSupportBelief<E> {
    type Error = Error;

    fn try_from(j: FiniteJson<E>) -> Result<Self> {
        Self::new(j.candidates, j.weights)
    }
}

impl<E: Clone> From<FiniteSupportBelief<E>> for FiniteJson<E> {
    fn from(b: FiniteSupportBelief<E>) -> Self {
        let weights = normalize_log_weights(&b.log_weights);
        FiniteJson {
            candidates: b.candidates,
            weights,
        }
    }
}

impl<E: KernelEnv> FiniteSupportBelief<E> {
    /// Weights need not be normalized; zero weights are allowed.
    pub fn new(candidates: Vec<E>, weights: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() || candidates.len() != weights.len() {
            return invalid("finite belief needs one weight per candidate");
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return invalid("finite belief weights must be nonnegative with positive total");
        }
        let first = &candidates[0];
        if candidates.iter().any(|c| c.kernel_dims() != first.kernel_dims() || !c.same_rewards(first)) {
            return invalid("candidates must share dimensions, rewards and initial state");
        }
        let z: f64 = weights.iter().sum();
        Ok(Self {
            candidates,
            log_weights: weights.iter().map(|w| (w / z).ln()).collect(),
        })
    }

    pub fn uniform(candidates: Vec<E>) -> Result<Self> {
        let n = candidates.len();
        Self::new(candidates, vec![1.0; n])
    }

    /// Equal-weight belief over sampled environments.
    pub fn empirical(samples: Vec<E>) -> Result<Self> {
        Self::uniform(samples)
    }

    pub fn candidates(&self) -> &[E] {
        &self.candidates
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        normalize_log_weights(&self.log_weights)
    }

    /// Whether the weights factor over steps: the law of the step-`h` kernel
    /// slices is the product of its per-step marginals.
    pub fn is_step_product(&self) -> bool {
        let kd = self.candidates[0].kernel_dims();
        let w = self.weights();
        let ns = kd.num_states;
        let slice = |e: &E, h: usize| {
            let r = kd.step_rows(h);
            e.kernel()[r.start * ns..r.end * ns].to_vec()
        };
        // Distinct slices per step with their marginal mass.
        let mut ids: Vec<Vec<usize>> = vec![Vec::new(); self.candidates.len()];
        let mut marginals: Vec<Vec<f64>> = Vec::new();
        for h in 0..kd.horizon {
            let mut seen: Vec<Vec<f64>> = Vec::new();
            let mut mass: Vec<f64> = Vec::new();
            for (k, e) in self.candidates.iter().enumerate() {
                let sl = slice(e, h);
                let id = match seen.iter().position(|x| *x == sl) {
                    Some(i) => i,
                    None => {
                        seen.push(sl);
                        mass.push(0.0);
                        seen.len() - 1
                    }
                };
                mass[id] += w[k];
                ids[k].push(id);
            }
            marginals.push(mass);
        }
        let cells: f64 = marginals.iter().map(|m| m.len() as f64).product();
        if cells > 1e6 {
            return false;
        }
        let mut joint: std::collections::HashMap<&[usize], f64> = std::collections::HashMap::new();
        for (k, id) in ids.iter().enumerate() {
            *joint.entry(id.as_slice()).or_default() += w[k];
        }
        let mut idx = vec![0usize; kd.horizon];
        loop {
            let expect: f64 = idx.iter().enumerate().map(|(h, &i)| marginals[h][i]).product();
            let got = joint.get(idx.as_slice()).copied().unwrap_or(0.0);
            if (expect - got).abs() > 1e-12 {
                return false;
            }
            let mut h = kd.horizon;
            loop {
                if h == 0 {
                    return true;
                }
                h -= 1;
                idx[h] += 1;
                if idx[h] < marginals[h].len() {
                    break;
                }
                idx[h] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletBelief<E> {
    base: E,
    alpha: Vec<f64>,
}

impl<E: KernelEnv> DirichletBelief<E> {
    /// `alpha` is laid out like the kernel: one vector over next states per
    /// row. The base environment supplies rewards and dimensions.
    pub fn new(base: E, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != base.kernel_dims().kernel_len() {
            return invalid("alpha must match the kernel layout");
        }
        if alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return invalid("Dirichlet concentrations must be positive");
        }
        Ok(Self { base, alpha })
    }

    pub fn symmetric(base: E, concentration: f64) -> Result<Self> {
        let n = base.kernel_dims().kernel_len();
        Self::new(base, vec![concentration; n])
    }

    pub fn base(&self) -> &E {
        &self.base
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_row(&self, row: usize) -> &[f64] {
        let ns = self.base.kernel_dims().num_states;
        &self.alpha[row * ns..(row + 1) * ns]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[serde(bound(serialize = "E: Serialize + Clone", deserialize = "E: Deserialize<'de> + KernelEnv"))]
pub enum Belief<E> {
    Finite(FiniteSupportBelief<E>),
    Dirichlet(DirichletBelief<E>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BonusSign {
    Bonus,
    Penalty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEnvironment<E> {
    pub env: E,
    pub lambda: f64,
    pub sign: BonusSign,
}

/// Expected KL from a Dirichlet draw to its mean, in closed form.
pub fn dirichlet_expected_kl(alpha: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let psi0 = digamma(a0 + 1.0);
    let v: f64 = alpha
        .iter()
        .map(|&a| {
            let m = a / a0;
            m * (digamma(a + 1.0) - psi0) - m * m.ln()
        })
        .sum();
    v.max(0.0)
}

impl<E: KernelEnv> Belief<E> {
    pub fn template(&self) -> &E {
        match self {
            Belief::Finite(f) => &f.candidates[0],
            Belief::Dirichlet(d) => &d.base,
        }
    }

    pub fn kernel_dims(&self) -> KernelDims {
        self.template().kernel_dims()
    }

    pub fn as_finite(&self) -> Option<&FiniteSupportBelief<E>> {
        match self {
            Belief::Finite(f) => Some(f),
            Belief::Dirichlet(_) => None,
        }
    }

    /// Bayes update on observed transitions.
    pub fn posterior_update(&self, transitions: &[Transition]) -> Result<Self> {
        let kd = self.kernel_dims();
        for t in transitions {
            if t.h >= kd.horizon || t.s >= kd.num_states || t.joint >= kd.num_joint || t.next >= kd.num_states {
                return invalid(format!("transition {t:?} is out of range"));
            }
        }
        match self {
            Belief::Finite(f) => {
                let mut log_weights = f.log_weights.clone();
                for (lw, e) in log_weights.iter_mut().zip(&f.candidates) {
                    if *lw == f64::NEG_INFINITY {
                        continue;
                    }
                    for t in transitions {
                        let p = e.kernel_row(kd.row(t.h, t.s, t.joint))[t.next];
                        *lw += p.ln();
                    }
                }
                if log_weights.iter().all(|l| *l == f64::NEG_INFINITY) {
                    return Err(Error::DegeneratePosterior(
                        "observed transitions have zero likelihood under every candidate".into(),
                    ));
                }
                let w = normalize_log_weights(&log_weights);
                Ok(Belief::Finite(FiniteSupportBelief {
                    candidates: f.candidates.clone(),
                    log_weights: w.iter().map(|x| x.ln()).collect(),
                }))
            }
            Belief::Dirichlet(d) => {
                let mut alpha = d.alpha.clone();
                for t in transitions {
                    alpha[kd.row(t.h, t.s, t.joint) * kd.num_states + t.next] += 1.0;
                }
                Ok(Belief::Dirichlet(DirichletBelief {
                    base: d.base.clone(),
                    alpha,
                }))
            }
        }
    }

    /// Posterior sampling oracle.
    pub fn sample_env(&self, seed: u64) -> E {
        let mut rng = rng_from_seed(seed);
        match self {
            Belief::Finite(f) => {
                let w = f.weights();
                f.candidates[sample_index(&w, rng.random())].clone()
            }
            Belief::Dirichlet(d) => {
                let ns = d.base.kernel_dims().num_states;
                let mut kernel = Vec::with_capacity(d.alpha.len());
                for a in d.alpha.chunks(ns) {
                    let draws: Vec<f64> = a
                        .iter()
                        .map(|&ai| Gamma::new(ai, 1.0).expect("positive shape").sample(&mut rng))
                        .collect();
                    let z: f64 = draws.iter().sum();
                    if z > 0.0 && z.is_finite() {
                        kernel.extend(draws.iter().map(|x| x / z));
                    } else {
                        let a0: f64 = a.iter().sum();
                        kernel.extend(a.iter().map(|x| x / a0));
                    }
                }
                d.base.with_kernel(kernel)
            }
        }
    }

    /// Posterior-mean kernel.
    pub fn mean_kernel(&self) -> Vec<f64> {
        match self {
            Belief::Finite(f) => {
                let w = f.weights();
                let mut m = vec![0.0; f.candidates[0].kernel().len()];
                for (wi, e) in w.iter().zip(&f.candidates) {
                    if *wi > 0.0 {
                        for (x, p) in m.iter_mut().zip(e.kernel()) {
                            *x += wi * p;
                        }
                    }
                }
                let ns = self.kernel_dims().num_states;
                for row in m.chunks_mut(ns) {
                    let z: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x /= z);
                }
                m
            }
            Belief::Dirichlet(d) => {
                let ns = d.base.kernel_dims().num_states;
                let mut m = Vec::with_capacity(d.alpha.len());
                for a in d.alpha.chunks(ns) {
                    let a0: f64 = a.iter().sum();
                    m.extend(a.iter().map(|x| x / a0));
                }
                m
            }
        }
    }

    /// `E_k[KL(P^𝓔_row ‖ P̄_row)]` for every kernel row.
    pub fn expected_kl_rows(&self) -> Vec<f64> {
        let kd = self.kernel_dims();
        let ns = kd.num_states;
        match self {
            Belief::Finite(f) => {
                let mean = self.mean_kernel();
                let w = f.weights();
                (0..kd.num_rows())
                    .map(|row| {
                        let q = &mean[row * ns..(row + 1) * ns];
                        w.iter()
                            .zip(&f.candidates)
                            .filter(|(wi, _)| **wi > 0.0)
                            .map(|(wi, e)| wi * kl_divergence(e.kernel_row(row), q))
                            .sum()
                    })
                    .collect()
            }
            Belief::Dirichlet(d) => (0..kd.num_rows()).map(|row| dirichlet_expected_kl(d.alpha_row(row))).collect(),
        }
    }

    pub fn expected_kl_row(&self, row: usize) -> f64 {
        match self {
            Belief::Dirichlet(d) => dirichlet_expected_kl(d.alpha_row(row)),
            Belief::Finite(_) => self.expected_kl_rows()[row],
        }
    }

    /// Mean kernel with rewards shifted by `± λ·E_k[KL]`.
    pub fn build_mean_env(&self, lambda: f64, sign: BonusSign) -> Result<MeanEnvironment<E>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return invalid("lambda must be a finite nonnegative number");
        }
        let base = self.template().with_kernel(self.mean_kernel());
        let env = if lambda == 0.0 {
            base
        } else {
            let s = match sign {
                BonusSign::Bonus => lambda,
                BonusSign::Penalty => -lambda,
            };
            let shift: Vec<f64> = self.expected_kl_rows().iter().map(|k| s * k).collect();
            base.shift_rewards(&shift)
        };
        Ok(MeanEnvironment { env, lambda, sign })
    }

    /// Mean kernel with base rewards.
    pub fn reward_free_mean_env(&self) -> E {
        self.template().with_kernel(self.mean_kernel())
    }

    /// Weighted environments representing the posterior: exact support for
    /// finite beliefs, `mc.samples` equal-weight draws otherwise.
    pub fn particles(&self, mc: Option<McSpec>) -> Result<Vec<(f64, E)>> {
        match self {
            Belief::Finite(f) => Ok(f
                .weights()
                .into_iter()
                .zip(&f.candidates)
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, e)| (w, e.clone()))
                .collect()),
            Belief::Dirichlet(_) => {
                let Some(mc) = mc.filter(|m| m.samples > 0) else {
                    return invalid("a Dirichlet belief needs a Monte-Carlo sample count");
                };
                let w = 1.0 / mc.samples as f64;
                Ok((0..mc.samples)
                    .map(|i| (w, self.sample_env(derive_seed(mc.seed, i as u64))))
                    .collect())
            }
        }
    }

    /// Finite belief used for exact computations: the belief itself when
    /// finite, an empirical sample otherwise.
    pub fn to_finite(&self, mc: Option<McSpec>) -> Result<FiniteSupportBelief<E>> {
        match self {
            Belief::Finite(f) => Ok(f.clone()),
            Belief::Dirichlet(_) => {
                let parts = self.particles(mc)?;
                FiniteSupportBelief::empirical(parts.into_iter().map(|(_, e)| e).collect())
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Belief::Finite(_))
    }
}

pub fn posterior_update(belief: &Belief<TabularZeroSumMG>, trajectory: &Trajectory) -> Result<Belief<TabularZeroSumMG>> {
    let nb = belief.template().actions_min();
    belief.posterior_update(&trajectory.transitions(nb))
}

pub fn sample_env<E: KernelEnv>(belief: &Belief<E>, seed: u64) -> E {
    belief.sample_env(seed)
}

pub fn mean_kernel<E: KernelEnv>(belief: &Belief<E>) -> Vec<f64> {
    belief.mean_kernel()
}

pub fn expected_kl_to_mean(belief: &Belief<TabularZeroSumMG>, h: usize, s: usize, a: usize, b: usize) -> f64 {
    belief.expected_kl_row(belief.template().row(h, s, a, b))
}

pub fn build_mean_env<E: KernelEnv>(belief: &Belief<E>, lambda: f64, sign: BonusSign) -> Result<MeanEnvironment<E>> {
    belief.build_mean_env(lambda, sign)
}

/// Posterior expectation of `V_{1,μ,ν}(s1)` with its Monte-Carlo standard
/// error (`None` when exact).
pub fn expected_value(
    belief: &Belief<TabularZeroSumMG>,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
    mc: Option<McSpec>,
) -> Result<(f64, Option<f64>)> {
    let parts = belief.particles(mc)?;
    let vals: Vec<(f64, f64)> = parts
        .iter()
        .map(|(w, e)| Ok((*w, value(e, mu, nu)?)))
        .collect::<Result<_>>()?;
    Ok(weighted_mean(&vals, !belief.is_exact()))
}

pub(crate) fn weighted_mean(vals: &[(f64, f64)], with_stderr: bool) -> (f64, Option<f64>) {
    let mean: f64 = vals.iter().map(|(w, v)| w * v).sum();
    if !with_stderr {
        return (mean, None);
    }
    let n = vals.len() as f64;
    let var = vals.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, Some((var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mg::{random_env, random_kernel, MgDims, Side};

    fn dims() -> MgDims {
        MgDims {
            horizon: 2,
            num_states: 2,
            actions_max: 2,
            actions_min: 2,
        }
    }

    fn two_candidates(w: [f64; 2]) -> Belief<TabularZeroSumMG> {
        let e1 = random_env(dims(), 1);
        let mut rng = rng_from_seed(2);
        let e2 = e1.with_kernel(random_kernel(e1.kernel_dims(), &mut rng));
        Belief::Finite(FiniteSupportBelief::new(vec![e1, e2], w.to_vec()).unwrap())
    }

    #[test]
    fn empty_update_keeps_belief() {
        let b = two_candidates([0.3, 0.7]);
        assert_eq!(b.posterior_update(&[]).unwrap(), b);
        let single = Belief::Finite(FiniteSupportBelief::uniform(vec![random_env(dims(), 4)]).unwrap());
        let t = Transition { h: 0, s: 0, joint: 1, next: 1 };
        let up = single.posterior_update(&[t]).unwrap();
        assert_eq!(up.as_finite().unwrap().weights(), vec![1.0]);
    }

    #[test]
    fn zero_likelihood_eliminates_candidate() {
        let one = [1.0, 0.0].repeat(16);
        let other = [0.5, 0.5].repeat(16);
        let e1 = TabularZeroSumMG::from_flat(dims(), 0, other, vec![0.5; 16]).unwrap();
        let e2 = e1.with_kernel(one);
        let b = Belief::Finite(FiniteSupportBelief::uniform(vec![e1, e2]).unwrap());
        let t = Transition { h: 0, s: 0, joint: 0, next: 1 };
        let up = b.posterior_update(&[t]).unwrap();
        assert_eq!(up.as_finite().unwrap().weights(), vec![1.0, 0.0]);
        let only2 = Belief::Finite(FiniteSupportBelief::new(up.as_finite().unwrap().candidates().to_vec(), vec![0.0, 1.0]).unwrap());
        assert!(matches!(only2.posterior_update(&[t]), Err(Error::DegeneratePosterior(_))));
    }

    #[test]
    fn mean_kernel_examples() {
        let k1 = [1.0, 0.0].repeat(16);
        let k2 = [0.0, 1.0].repeat(16);
        let e1 = TabularZeroSumMG::from_flat(dims(), 0, k1, vec![0.5; 16]).unwrap();
        let e2 = e1.with_kernel(k2);
        let b = Belief::Finite(FiniteSupportBelief::new(vec![e1, e2], vec![0.25, 0.75]).unwrap());
        let m = b.mean_kernel();
        assert!((m[0] - 0.25).abs() < 1e-15 && (m[1] - 0.75).abs() < 1e-15);

        let base = random_env(dims(), 3);
        let mut alpha = vec![1.0; 32];
        alpha[0] = 2.0;
        alpha[1] = 3.0;
        let d = Belief::Dirichlet(DirichletBelief::new(base, alpha).unwrap());
        let m = d.mean_kernel();
        assert!((m[0] - 0.4).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_kl_closed_form_matches_monte_carlo() {
        let exact = dirichlet_expected_kl(&[1.0, 1.0]);
        assert!((exact - (2f64.ln() - 0.5)).abs() < 1e-12);
        let mut rng = rng_from_seed(5);
        let g = Gamma::new(1.0, 1.0).unwrap();
        let n = 1_000_000;
        let (mut s, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let (x, y): (f64, f64) = (g.sample(&mut rng), g.sample(&mut rng));
            let p = x / (x + y);
            let kl = kl_divergence(&[p, 1.0 - p], &[0.5, 0.5]);
            s += kl;
            sq += kl * kl;
        }
        let mean = s / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact}");
    }

    #[test]
    fn point_mass_has_no_kl() {
        let b = Belief::Finite(FiniteSupportBelief::uniform(vec![random_env(dims(), 6)]).unwrap());
        assert!(b.expected_kl_rows().iter().all(|&k| k == 0.0));
        let m = b.build_mean_env(5.0, BonusSign::Bonus).unwrap();
        assert_eq!(m.env.rewards(), b.template().rewards());
        let e = random_env(dims(), 6);
        let same = Belief::Finite(FiniteSupportBelief::uniform(vec![e.clone(), e]).unwrap());
        assert!(same.expected_kl_rows().iter().all(|&k| k == 0.0));
    }

    #[test]
    fn bonus_and_penalty_bracket_base_rewards() {
        let b = two_candidates([0.5, 0.5]);
        let up = b.build_mean_env(2.0, BonusSign::Bonus).unwrap().env;
        let down = b.build_mean_env(2.0, BonusSign::Penalty).unwrap().env;
        let zero = b.build_mean_env(0.0, BonusSign::Bonus).unwrap().env;
        for k in 0..16 {
            assert!(up.rewards()[k] >= b.template().rewards()[k]);
            assert!(down.rewards()[k] <= b.template().rewards()[k]);
        }
        assert_eq!(zero.rewards(), b.template().rewards());
        assert!(b.build_mean_env(-1.0, BonusSign::Bonus).is_err());
    }

    #[test]
    fn conjugate_update_adds_counts() {
        let base = random_env(dims(), 7);
        let d = Belief::Dirichlet(DirichletBelief::symmetric(base, 0.5).unwrap());
        let ts = [
            Transition { h: 0, s: 0, joint: 3, next: 1 },
            Transition { h: 0, s: 0, joint: 3, next: 1 },
            Transition { h: 1, s: 1, joint: 0, next: 0 },
        ];
        let up = d.posterior_update(&ts).unwrap();
        let Belief::Dirichlet(u) = &up else { unreachable!() };
        assert_eq!(u.alpha_row(3), &[0.5, 2.5]);
        let row = d.kernel_dims().row(1, 1, 0);
        assert_eq!(u.alpha_row(row), &[1.5, 0.5]);
        assert_eq!(&up.mean_kernel()[6..8], &[0.5 / 3.0, 2.5 / 3.0]);
    }

    #[test]
    fn sampling_frequencies_and_moments() {
        let b = two_candidates([0.5, 0.5]);
        let c0 = b.as_finite().unwrap().candidates()[0].clone();
        let n = 100_000;
        let hits = (0..n).filter(|&i| b.sample_env(i) == c0).count();
        let se = (0.25 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 3.0 * se);

        let mut alpha = vec![1.0; 32];
        alpha[0] = 2.0;
        alpha[1] = 3.0;
        let d = Belief::Dirichlet(DirichletBelief::new(random_env(dims(), 1), alpha).unwrap());
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|i| d.sample_env(i).kernel()[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Beta(2,3) variance is 0.04.
        assert!((mean - 0.4).abs() < 3.0 * (0.04 / n as f64).sqrt());
        assert_eq!(d.sample_env(9), d.sample_env(9));
    }

    #[test]
    fn expected_value_examples() {
        let b = two_candidates([0.5, 0.5]);
        let f = b.as_finite().unwrap();
        let mu = MarkovPolicy::uniform(Side::Max, 2, 2, 2);
        let nu = MarkovPolicy::uniform(Side::Min, 2, 2, 2);
        let (v, se) = expected_value(&b, &mu, &nu, None).unwrap();
        let direct = 0.5 * value(&f.candidates()[0], &mu, &nu).unwrap() + 0.5 * value(&f.candidates()[1], &mu, &nu).unwrap();
        assert!((v - direct).abs() < 1e-15 && se.is_none());

        let d = Belief::Dirichlet(DirichletBelief::symmetric(random_env(dims(), 1), 1.0).unwrap());
        assert!(expected_value(&d, &mu, &nu, None).is_err());
        let (a, sa) = expected_value(&d, &mu, &nu, Some(McSpec { samples: 2000, seed: 1 })).unwrap();
        let (b2, sb) = expected_value(&d, &mu, &nu, Some(McSpec { samples: 20000, seed: 2 })).unwrap();
        let se = (sa.unwrap().powi(2) + sb.unwrap().powi(2)).sqrt();
        assert!((a - b2).abs() < 3.0 * se);
    }

    #[test]
    fn step_product_detection() {
        let b = two_candidates([0.5, 0.5]);
        assert!(!b.as_finite().unwrap().is_step_product());
        let e = random_env(dims(), 1);
        let kd = e.kernel_dims();
        let mut rng = rng_from_seed(8);
        let alt = random_kernel(kd, &mut rng);
        let half = kd.step_rows(1).start * kd.num_states;
        let mk = |first: &[f64], second: &[f64]| e.with_kernel([&first[..half], &second[half..]].concat());
        let cands = vec![
            mk(e.kernel(), e.kernel()),
            mk(e.kernel(), &alt),
            mk(&alt, e.kernel()),
            mk(&alt, &alt),
        ];
        let p = FiniteSupportBelief::new(cands.clone(), vec![0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4]).unwrap();
        assert!(p.is_step_product());
        let q = FiniteSupportBelief::new(cands, vec![0.25, 0.25, 0.25, 0.0]).unwrap();
        assert!(!q.is_step_product());
    }

    #[test]
    fn belief_json_round_trip() {
        let b = two_candidates([0.25, 0.75]);
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.contains("\"type\":\"finite\""));
        let back: Belief<TabularZeroSumMG> = serde_json::from_str(&s).unwrap();
        assert_eq!(back.as_finite().unwrap().weights(), b.as_finite().unwrap().weights());
    }
}
