//! N-player general-sum tabular games and Reg-MAIDS through the normal-form
//! reduction over pure Markov policies.
//!
//! Joint actions use mixed radix with player 0 most significant, matching
//! [`NormalFormGame`] profile indices. Mixed policies are distributions over
//! pure profiles, realized once per episode.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, BonusSign};
use crate::env::{validate_kernel, KernelDims, KernelEnv, Transition};
use crate::error::{invalid, Error, Result};
use crate::game::{cce_gaps, cce_solve, ne_solve, JointDistribution, NormalFormGame, ProductDistribution};
use crate::info::InfoContext;
use crate::mg::TabularZeroSumMG;
use crate::rng::{derive_seed, rng_from_seed, sample_index};

/// Payoff tensors larger than this are refused.
pub const PROFILE_LIMIT: f64 = 1e4;
/// Per-player enumeration guard for deterministic policy sets.
pub const PURE_SET_LIMIT: f64 = 1e5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GsJson", into = "GsJson")]
pub struct TabularGeneralSumMG {
    horizon: usize,
    num_states: usize,
    action_counts: Vec<usize>,
    initial_state: usize,
    kernel: Vec<f64>,
    /// `rewards[i][row]`.
    rewards: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GsJson {
    horizon: usize,
    num_states: usize,
    action_counts: Vec<usize>,
    initial_state: usize,
    /// `[h][s][joint][s']`
    kernel: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[player][h][s][joint]`
    rewards: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<GsJson> for TabularGeneralSumMG {
    type Error = Error;

    fn try_from(j: GsJson) -> Result<Self> {
        let nj: usize = j.action_counts.iter().product();
        let ok = j.kernel.len() == j.horizon
            && j.kernel.iter().all(|hs| hs.len() == j.num_states && hs.iter().all(|js| js.len() == nj && js.iter().all(|r| r.len() == j.num_states)))
            && j.rewards.len() == j.action_counts.len()
            && j.rewards.iter().all(|p| p.len() == j.horizon && p.iter().all(|hs| hs.len() == j.num_states && hs.iter().all(|js| js.len() == nj)));
        if !ok {
            return invalid("kernel or reward shape does not match the declared dimensions");
        }
        let kernel = j.kernel.into_iter().flatten().flatten().flatten().collect();
        let rewards = j.rewards.into_iter().map(|p| p.into_iter().flatten().flatten().collect()).collect();
        Self::new(j.horizon, j.num_states, j.action_counts, j.initial_state, kernel, rewards)
    }
}

impl From<TabularGeneralSumMG> for GsJson {
    fn from(e: TabularGeneralSumMG) -> Self {
        let (h, s, nj) = (e.horizon, e.num_states, e.num_joint());
        let kernel = (0..h)
            .map(|hh| {
                (0..s)
                    .map(|ss| {
                        (0..nj)
                            .map(|j| {
                                let r = (hh * s + ss) * nj + j;
                                e.kernel[r * s..(r + 1) * s].to_vec()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = e
            .rewards
            .iter()
            .map(|rw| (0..h).map(|hh| (0..s).map(|ss| rw[(hh * s + ss) * nj..(hh * s + ss + 1) * nj].to_vec()).collect()).collect())
            .collect();
        GsJson {
            horizon: e.horizon,
            num_states: e.num_states,
            action_counts: e.action_counts,
            initial_state: e.initial_state,
            kernel,
            rewards,
        }
    }
}

impl TabularGeneralSumMG {
    pub fn new(horizon: usize, num_states: usize, action_counts: Vec<usize>, initial_state: usize, kernel: Vec<f64>, rewards: Vec<Vec<f64>>) -> Result<Self> {
        if horizon == 0 || num_states == 0 || action_counts.is_empty() || action_counts.contains(&0) {
            return invalid("horizon, states, players and action counts must be positive");
        }
        if initial_state >= num_states {
            return invalid("initial state out of range");
        }
        let e = Self {
            horizon,
            num_states,
            action_counts,
            initial_state,
            kernel,
            rewards,
        };
        validate_kernel(e.kernel_dims(), &e.kernel)?;
        let rows = e.kernel_dims().num_rows();
        for (i, r) in e.rewards.iter().enumerate() {
            if r.len() != rows || r.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return invalid(format!("player {i} rewards must have {rows} entries in [0, 1]"));
            }
        }
        Ok(e)
    }

    /// Player 0 receives `r`, player 1 receives `1 − r`.
    pub fn from_zero_sum(e: &TabularZeroSumMG) -> Result<Self> {
        let r = e.rewards().to_vec();
        let r2 = r.iter().map(|x| 1.0 - x).collect();
        Self::new(e.horizon(), e.num_states(), vec![e.actions_max(), e.actions_min()], e.initial_state(), e.kernel().to_vec(), vec![r, r2])
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_joint(&self) -> usize {
        self.action_counts.iter().product()
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.action_counts).fold(0, |acc, (&a, &n)| acc * n + a)
    }

    pub fn reward(&self, player: usize, row: usize) -> f64 {
        self.rewards[player][row]
    }

    pub fn rewards(&self, player: usize) -> &[f64] {
        &self.rewards[player]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl KernelEnv for TabularGeneralSumMG {
    fn kernel_dims(&self) -> KernelDims {
        KernelDims {
            horizon: self.horizon,
            num_states: self.num_states,
            num_joint: self.num_joint(),
        }
    }

    fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn initial_state(&self) -> usize {
        self.initial_state
    }

    fn with_kernel(&self, kernel: Vec<f64>) -> Self {
        Self {
            kernel,
            ..self.clone()
        }
    }

    fn shift_rewards(&self, shift: &[f64]) -> Self {
        let rewards = self.rewards.iter().map(|r| r.iter().zip(shift).map(|(x, d)| x + d).collect()).collect();
        Self {
            rewards,
            ..self.clone()
        }
    }

    fn same_rewards(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.num_states == other.num_states
            && self.action_counts == other.action_counts
            && self.initial_state == other.initial_state
            && self.rewards == other.rewards
    }
}

/// Deterministic Markov policy: one action per `(h, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurePolicy {
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurePolicyProfileSet {
    pub sets: Vec<Vec<PurePolicy>>,
}

impl PurePolicyProfileSet {
    pub fn new(env: &TabularGeneralSumMG, sets: Vec<Vec<PurePolicy>>) -> Result<Self> {
        let s = Self { sets };
        s.validate(env)?;
        Ok(s)
    }

    /// Every deterministic Markov policy for every player.
    pub fn all_deterministic(env: &TabularGeneralSumMG) -> Result<Self> {
        let cells = env.horizon * env.num_states;
        let mut sets = Vec::new();
        for &n in &env.action_counts {
            let size = (n as f64).powi(cells as i32);
            if size > PURE_SET_LIMIT {
                return Err(Error::EnumerationTooLarge {
                    what: "pure policies",
                    size,
                    limit: PURE_SET_LIMIT,
                });
            }
            let set = (0..size as usize)
                .map(|mut code| {
                    let mut actions = vec![0; cells];
                    for a in actions.iter_mut().rev() {
                        *a = code % n;
                        code /= n;
                    }
                    PurePolicy { actions }
                })
                .collect();
            sets.push(set);
        }
        Self::new(env, sets)
    }

    pub fn validate(&self, env: &TabularGeneralSumMG) -> Result<()> {
        if self.sets.len() != env.num_players() {
            return invalid("one pure policy set per player");
        }
        let cells = env.horizon * env.num_states;
        for (i, set) in self.sets.iter().enumerate() {
            if set.is_empty() {
                return invalid(format!("player {i} has no pure policies"));
            }
            if set.iter().any(|p| p.actions.len() != cells || p.actions.iter().any(|&a| a >= env.action_counts[i])) {
                return invalid(format!("player {i} has a policy that does not match the environment"));
            }
        }
        let n = self.num_profiles_f64();
        if n > PROFILE_LIMIT {
            return Err(Error::EnumerationTooLarge {
                what: "pure profiles",
                size: n,
                limit: PROFILE_LIMIT,
            });
        }
        Ok(())
    }

    fn num_profiles_f64(&self) -> f64 {
        self.sets.iter().map(|s| s.len() as f64).product()
    }

    pub fn num_profiles(&self) -> usize {
        self.sets.iter().map(Vec::len).product()
    }

    pub fn strategy_counts(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    /// Per-player policy indices of profile `k`.
    pub fn profile(&self, mut k: usize) -> Vec<usize> {
        let mut out = vec![0; self.sets.len()];
        for (i, set) in self.sets.iter().enumerate().rev() {
            out[i] = k % set.len();
            k /= set.len();
        }
        out
    }

    /// Joint action played at each `(h, s)` by profile `k`.
    pub fn joint_actions(&self, env: &TabularGeneralSumMG, k: usize) -> Vec<usize> {
        let idx = self.profile(k);
        let cells = env.horizon * env.num_states;
        (0..cells)
            .map(|c| {
                let acts: Vec<usize> = idx.iter().enumerate().map(|(i, &p)| self.sets[i][p].actions[c]).collect();
                env.joint_index(&acts)
            })
            .collect()
    }

    /// One-hot joint action table of profile `k`.
    pub fn joint_table(&self, env: &TabularGeneralSumMG, k: usize) -> Vec<f64> {
        let nj = env.num_joint();
        let mut t = vec![0.0; env.horizon * env.num_states * nj];
        for (c, j) in self.joint_actions(env, k).into_iter().enumerate() {
            t[c * nj + j] = 1.0;
        }
        t
    }
}

/// Per-player `V_1(s1)` of pure profile `k`.
pub fn profile_values(env: &TabularGeneralSumMG, sets: &PurePolicyProfileSet, k: usize) -> Vec<f64> {
    let acts = sets.joint_actions(env, k);
    let (ns, nj, n) = (env.num_states, env.num_joint(), env.num_players());
    let mut v = vec![vec![0.0; ns]; n];
    for h in (0..env.horizon).rev() {
        let mut next = vec![vec![0.0; ns]; n];
        for s in 0..ns {
            let row = (h * ns + s) * nj + acts[h * ns + s];
            let p = &env.kernel[row * ns..(row + 1) * ns];
            for i in 0..n {
                next[i][s] = env.rewards[i][row] + p.iter().zip(&v[i]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        v = next;
    }
    v.into_iter().map(|vi| vi[env.initial_state]).collect()
}

/// Normal-form game of profile values.
pub fn payoff_tensor(env: &TabularGeneralSumMG, sets: &PurePolicyProfileSet) -> Result<NormalFormGame> {
    sets.validate(env)?;
    let np = sets.num_profiles();
    let mut payoffs = vec![vec![0.0; np]; env.num_players()];
    for k in 0..np {
        for (i, v) in profile_values(env, sets, k).into_iter().enumerate() {
            payoffs[i][k] = v;
        }
    }
    NormalFormGame::new(sets.strategy_counts(), payoffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MixedJointPolicy {
    Joint(JointDistribution),
    Product(ProductDistribution),
}

impl MixedJointPolicy {
    pub fn point(sets: &PurePolicyProfileSet, k: usize) -> Self {
        let mut probs = vec![0.0; sets.num_profiles()];
        probs[k] = 1.0;
        MixedJointPolicy::Joint(JointDistribution { probs })
    }

    /// Profile probabilities.
    pub fn joint_probs(&self, sets: &PurePolicyProfileSet) -> Result<Vec<f64>> {
        let np = sets.num_profiles();
        let probs = match self {
            MixedJointPolicy::Joint(j) => j.probs.clone(),
            MixedJointPolicy::Product(p) => {
                if p.marginals.len() != sets.sets.len() || p.marginals.iter().zip(&sets.sets).any(|(m, s)| m.len() != s.len()) {
                    return invalid("product marginals do not match the pure sets");
                }
                (0..np).map(|k| sets.profile(k).iter().enumerate().map(|(i, &s)| p.marginals[i][s]).product()).collect()
            }
        };
        if probs.len() != np || probs.iter().any(|p| *p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return invalid("mixed policy is not a distribution over pure profiles");
        }
        Ok(probs)
    }

    /// Pure profile for one episode: one correlated draw for joint policies,
    /// independent per-player draws for product policies.
    pub fn realize(&self, sets: &PurePolicyProfileSet, seed: u64) -> Result<usize> {
        match self {
            MixedJointPolicy::Joint(j) => {
                let u: f64 = rng_from_seed(seed).random();
                Ok(sample_index(&j.probs, u))
            }
            MixedJointPolicy::Product(p) => {
                self.joint_probs(sets)?;
                let idx: Vec<usize> = p
                    .marginals
                    .iter()
                    .enumerate()
                    .map(|(i, m)| sample_index(m, rng_from_seed(derive_seed(seed, i as u64)).random()))
                    .collect();
                Ok(idx.iter().zip(&sets.sets).fold(0, |acc, (&s, set)| acc * set.len() + s))
            }
        }
    }
}

/// Per-player `V_{1,π}(s1)`.
pub fn evaluate_values_gs(env: &TabularGeneralSumMG, sets: &PurePolicyProfileSet, pi: &MixedJointPolicy) -> Result<Vec<f64>> {
    sets.validate(env)?;
    let probs = pi.joint_probs(sets)?;
    let mut out = vec![0.0; env.num_players()];
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            for (o, v) in out.iter_mut().zip(profile_values(env, sets, k)) {
                *o += p * v;
            }
        }
    }
    Ok(out)
}

/// Best pure deviation of player `i` against the others' marginal under
/// `pi`: index into `sets.sets[i]` and its value.
pub fn best_response_gs(env: &TabularGeneralSumMG, sets: &PurePolicyProfileSet, pi: &MixedJointPolicy, i: usize) -> Result<(usize, f64)> {
    if i >= env.num_players() {
        return invalid("player index out of range");
    }
    let g = payoff_tensor(env, sets)?;
    let probs = pi.joint_probs(sets)?;
    Ok(deviation_values(&g, &probs, i)
        .into_iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (d, v)| if v > best.1 + 1e-12 { (d, v) } else { best }))
}

fn deviation_values(g: &NormalFormGame, probs: &[f64], i: usize) -> Vec<f64> {
    let counts = g.strategy_counts();
    let mut out = vec![0.0; counts[i]];
    for (k, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut prof = g.profile(k);
        for (d, o) in out.iter_mut().enumerate() {
            prof[i] = d;
            *o += p * g.payoff(i, g.profile_index(&prof));
        }
    }
    out
}

/// `V_i(π_i^†, π_{−i}) − V_i(π)` per player, with deviations over the pure
/// set. Correlated policies can give negative entries.
pub fn equilibrium_gap(env: &TabularGeneralSumMG, sets: &PurePolicyProfileSet, pi: &MixedJointPolicy) -> Result<Vec<f64>> {
    let g = payoff_tensor(env, sets)?;
    equilibrium_gap_in(&g, &pi.joint_probs(sets)?)
}

/// [`equilibrium_gap`] against a precomputed payoff tensor.
pub fn equilibrium_gap_in(g: &NormalFormGame, probs: &[f64]) -> Result<Vec<f64>> {
    Ok(cce_gaps(g, &JointDistribution { probs: probs.to_vec() }))
}

/// Mean kernel with every player's reward raised by `λ·E_k[KL]`.
pub fn build_mean_env_gs(belief: &Belief<TabularGeneralSumMG>, lambda: f64) -> Result<TabularGeneralSumMG> {
    Ok(belief.build_mean_env(lambda, BonusSign::Bonus)?.env)
}

/// Information of a mixed policy (linear in the profile weights).
pub fn mutual_info_gs(belief: &Belief<TabularGeneralSumMG>, sets: &PurePolicyProfileSet, pi: &MixedJointPolicy) -> Result<f64> {
    let env = belief.template();
    let ctx = InfoContext::new(belief);
    let probs = pi.joint_probs(sets)?;
    Ok(probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| p * ctx.mi(&sets.joint_table(env, k)))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumTarget {
    Ne,
    #[default]
    Cce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsSelection {
    pub policy: MixedJointPolicy,
    /// NE was requested but not found; `policy` is a CCE instead.
    pub ne_fallback: bool,
}

/// Equilibrium of the normal-form game on the bonus mean environment.
pub fn reg_maids_gs_select(belief: &Belief<TabularGeneralSumMG>, lambda: f64, sets: &PurePolicyProfileSet, target: EquilibriumTarget) -> Result<GsSelection> {
    let mean = build_mean_env_gs(belief, lambda)?;
    let g = payoff_tensor(&mean, sets)?;
    match target {
        EquilibriumTarget::Cce => Ok(GsSelection {
            policy: MixedJointPolicy::Joint(cce_solve(&g)?),
            ne_fallback: false,
        }),
        EquilibriumTarget::Ne => match ne_solve(&g) {
            Ok(p) => Ok(GsSelection {
                policy: MixedJointPolicy::Product(p),
                ne_fallback: false,
            }),
            Err(Error::ConvergenceFailure { .. }) => Ok(GsSelection {
                policy: MixedJointPolicy::Joint(cce_solve(&g)?),
                ne_fallback: true,
            }),
            Err(e) => Err(e),
        },
    }
}

/// One episode of pure profile `k`; returns the observed transitions.
pub fn simulate_profile(env: &TabularGeneralSumMG, sets: &PurePolicyProfileSet, k: usize, seed: u64) -> Vec<Transition> {
    let acts = sets.joint_actions(env, k);
    let mut rng = rng_from_seed(seed);
    let ns = env.num_states;
    let nj = env.num_joint();
    let mut s = env.initial_state;
    let mut out = Vec::with_capacity(env.horizon);
    for h in 0..env.horizon {
        let j = acts[h * ns + s];
        let row = (h * ns + s) * nj + j;
        let next = sample_index(&env.kernel[row * ns..(row + 1) * ns], rng.random());
        out.push(Transition { h, s, joint: j, next });
        s = next;
    }
    out
}

/// Random game with simplex-uniform kernel rows and uniform rewards.
pub fn random_gs_env(horizon: usize, num_states: usize, action_counts: Vec<usize>, seed: u64) -> TabularGeneralSumMG {
    let mut rng = rng_from_seed(seed);
    let kd = KernelDims {
        horizon,
        num_states,
        num_joint: action_counts.iter().product(),
    };
    let kernel = crate::mg::random_kernel(kd, &mut rng);
    let rewards = (0..action_counts.len()).map(|_| (0..kd.num_rows()).map(|_| rng.random::<f64>()).collect()).collect();
    TabularGeneralSumMG {
        horizon,
        num_states,
        action_counts,
        initial_state: 0,
        kernel,
        rewards,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::FiniteSupportBelief;
    use crate::mg::{random_env, solve_nash, MgDims};

    fn small(seed: u64) -> TabularGeneralSumMG {
        random_gs_env(2, 2, vec![2, 2], seed)
    }

    #[test]
    fn json_round_trip_and_validation() {
        let e = small(1);
        let back = TabularGeneralSumMG::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
        let mut bad = e.clone();
        bad.rewards[0][0] = 1.5;
        assert!(TabularGeneralSumMG::from_json(&serde_json::to_string(&GsJson::from(bad)).unwrap()).is_err());
    }

    #[test]
    fn constant_sum_embedding() {
        let z = random_env(
            MgDims {
                horizon: 2,
                num_states: 2,
                actions_max: 2,
                actions_min: 2,
            },
            3,
        );
        let g = TabularGeneralSumMG::from_zero_sum(&z).unwrap();
        let sets = PurePolicyProfileSet::all_deterministic(&g).unwrap();
        assert_eq!(sets.num_profiles(), 256);
        for k in [0, 17, 255] {
            let v = evaluate_values_gs(&g, &sets, &MixedJointPolicy::point(&sets, k)).unwrap();
            assert!((v[0] + v[1] - 2.0).abs() < 1e-12);
        }
        let point = Belief::Finite(FiniteSupportBelief::uniform(vec![g.clone()]).unwrap());
        let sel = reg_maids_gs_select(&point, 0.0, &sets, EquilibriumTarget::Cce).unwrap();
        let v = evaluate_values_gs(&g, &sets, &sel.policy).unwrap();
        assert!((v[0] - solve_nash(&z).unwrap().value(0)).abs() < 1e-6);
    }

    #[test]
    fn best_response_matches_brute_force() {
        let e = small(5);
        let sets = PurePolicyProfileSet::all_deterministic(&e).unwrap();
        let probs: Vec<f64> = (0..256).map(|k| ((k * 37) % 11) as f64).collect();
        let z: f64 = probs.iter().sum();
        let pi = MixedJointPolicy::Joint(JointDistribution {
            probs: probs.iter().map(|p| p / z).collect(),
        });
        let (d, v) = best_response_gs(&e, &sets, &pi, 1).unwrap();
        let p = pi.joint_probs(&sets).unwrap();
        let mut brute = f64::NEG_INFINITY;
        for dev in 0..16 {
            let mut val = 0.0;
            for k in 0..256 {
                let mut prof = sets.profile(k);
                prof[1] = dev;
                val += p[k] * profile_values(&e, &sets, prof[0] * 16 + prof[1])[1];
            }
            brute = brute.max(val);
        }
        assert!((v - brute).abs() < 1e-12);
        assert!(d < 16);
    }

    #[test]
    fn product_gaps_are_nonnegative_and_single_profile_is_zero() {
        let e = small(6);
        let sets = PurePolicyProfileSet::all_deterministic(&e).unwrap();
        let pi = MixedJointPolicy::Product(ProductDistribution {
            marginals: vec![vec![1.0 / 16.0; 16], (0..16).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect()],
        });
        assert!(equilibrium_gap(&e, &sets, &pi).unwrap().iter().all(|g| *g >= -1e-12));
        let one = PurePolicyProfileSet::new(&e, vec![vec![sets.sets[0][2].clone()], vec![sets.sets[1][9].clone()]]).unwrap();
        let gap = equilibrium_gap(&e, &one, &MixedJointPolicy::point(&one, 0)).unwrap();
        assert_eq!(gap, vec![0.0, 0.0]);
    }

    #[test]
    fn solver_output_is_an_equilibrium_of_its_mean_env() {
        let base = small(7);
        let mut rng = rng_from_seed(8);
        let other = base.with_kernel(crate::mg::random_kernel(base.kernel_dims(), &mut rng));
        let belief = Belief::Finite(FiniteSupportBelief::uniform(vec![base, other]).unwrap());
        let sets = PurePolicyProfileSet::all_deterministic(belief.template()).unwrap();
        let mean = build_mean_env_gs(&belief, 0.3).unwrap();
        for target in [EquilibriumTarget::Cce, EquilibriumTarget::Ne] {
            let sel = reg_maids_gs_select(&belief, 0.3, &sets, target).unwrap();
            let gaps = equilibrium_gap(&mean, &sets, &sel.policy).unwrap();
            assert!(gaps.iter().all(|g| *g <= 1e-6), "{target:?} {gaps:?}");
        }
    }

    #[test]
    fn realize_is_seeded() {
        let e = small(2);
        let sets = PurePolicyProfileSet::all_deterministic(&e).unwrap();
        let pi = MixedJointPolicy::Product(ProductDistribution {
            marginals: vec![vec![1.0 / 16.0; 16], vec![1.0 / 16.0; 16]],
        });
        assert_eq!(pi.realize(&sets, 4).unwrap(), pi.realize(&sets, 4).unwrap());
        assert!(pi.realize(&sets, 4).unwrap() < 256);
        let t = simulate_profile(&e, &sets, 5, 1);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].s, 0);
    }
}
