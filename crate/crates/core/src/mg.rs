//! Tabular two-player zero-sum episodic Markov games.
//!
//! Steps are 0-based (`h ∈ 0..H`), `V_H ≡ 0`, and every episode starts from
//! the fixed state `initial_state`. The max player picks `a`, the min player
//! picks `b`, and the joint row index is `a * B + b`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{occupancy_rows, validate_kernel, KernelDims, KernelEnv, Transition};
use crate::error::{invalid, Error, Result};
use crate::game::{minimax_solve, MatrixGame};
use crate::rng::{rng_from_seed, sample_index};

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MgDims {
    pub horizon: usize,
    pub num_states: usize,
    pub actions_max: usize,
    pub actions_min: usize,
}

impl MgDims {
    pub fn kernel_dims(&self) -> KernelDims {
        KernelDims {
            horizon: self.horizon,
            num_states: self.num_states,
            num_joint: self.actions_max * self.actions_min,
        }
    }

    fn check(&self) -> Result<()> {
        if self.horizon == 0 || self.num_states == 0 || self.actions_max == 0 || self.actions_min == 0 {
            return invalid("dimensions must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MgJson", into = "MgJson")]
pub struct TabularZeroSumMG {
    dims: MgDims,
    initial_state: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MgJson {
    horizon: usize,
    num_states: usize,
    actions_max: usize,
    actions_min: usize,
    kernel: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    reward: Vec<Vec<Vec<Vec<f64>>>>,
    initial_state: usize,
}

impl TryFrom<MgJson> for TabularZeroSumMG {
    type Error = Error;

    fn try_from(j: MgJson) -> Result<Self> {
        let dims = MgDims {
            horizon: j.horizon,
            num_states: j.num_states,
            actions_max: j.actions_max,
            actions_min: j.actions_min,
        };
        dims.check()?;
        let shape_ok = j.kernel.len() == dims.horizon
            && j.kernel.iter().all(|hs| {
                hs.len() == dims.num_states
                    && hs.iter().all(|a| {
                        a.len() == dims.actions_max
                            && a.iter().all(|b| b.len() == dims.actions_min && b.iter().all(|r| r.len() == dims.num_states))
                    })
            })
            && j.reward.len() == dims.horizon
            && j.reward.iter().all(|hs| {
                hs.len() == dims.num_states
                    && hs.iter().all(|a| a.len() == dims.actions_max && a.iter().all(|b| b.len() == dims.actions_min))
            });
        if !shape_ok {
            return invalid("kernel or reward shape does not match the declared dimensions");
        }
        let kernel = j.kernel.into_iter().flatten().flatten().flatten().flatten().collect();
        let reward = j.reward.into_iter().flatten().flatten().flatten().collect();
        Self::from_flat(dims, j.initial_state, kernel, reward)
    }
}

impl From<TabularZeroSumMG> for MgJson {
    fn from(e: TabularZeroSumMG) -> Self {
        let d = e.dims;
        let mut kernel = e.kernel.chunks(d.num_states).map(<[f64]>::to_vec);
        let mut reward = e.reward.iter().copied();
        let nest = |n: usize| 0..n;
        MgJson {
            horizon: d.horizon,
            num_states: d.num_states,
            actions_max: d.actions_max,
            actions_min: d.actions_min,
            kernel: nest(d.horizon)
                .map(|_| {
                    nest(d.num_states)
                        .map(|_| {
                            nest(d.actions_max)
                                .map(|_| nest(d.actions_min).map(|_| kernel.next().unwrap()).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            reward: nest(d.horizon)
                .map(|_| {
                    nest(d.num_states)
                        .map(|_| {
                            nest(d.actions_max)
                                .map(|_| nest(d.actions_min).map(|_| reward.next().unwrap()).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            initial_state: e.initial_state,
        }
    }
}

impl TabularZeroSumMG {
    /// Validated constructor over flat row-major tables.
    pub fn from_flat(dims: MgDims, initial_state: usize, kernel: Vec<f64>, reward: Vec<f64>) -> Result<Self> {
        let e = Self::from_flat_unchecked(dims, initial_state, kernel, reward);
        e.validate()?;
        Ok(e)
    }

    /// Skips range checks; mean environments carry shifted rewards.
    pub(crate) fn from_flat_unchecked(dims: MgDims, initial_state: usize, kernel: Vec<f64>, reward: Vec<f64>) -> Self {
        Self {
            dims,
            initial_state,
            kernel,
            reward,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.check()?;
        let kd = self.dims.kernel_dims();
        if self.initial_state >= self.dims.num_states {
            return invalid(format!("initial state {} out of range", self.initial_state));
        }
        validate_kernel(kd, &self.kernel)?;
        if self.reward.len() != kd.num_rows() {
            return invalid(format!("reward has {} entries, expected {}", self.reward.len(), kd.num_rows()));
        }
        if let Some(r) = self.reward.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return invalid(format!("reward at row {r} is {} (outside [0,1])", self.reward[r]));
        }
        Ok(())
    }

    pub fn dims(&self) -> MgDims {
        self.dims
    }

    pub fn horizon(&self) -> usize {
        self.dims.horizon
    }

    pub fn num_states(&self) -> usize {
        self.dims.num_states
    }

    pub fn actions_max(&self) -> usize {
        self.dims.actions_max
    }

    pub fn actions_min(&self) -> usize {
        self.dims.actions_min
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize, b: usize) -> usize {
        ((h * self.dims.num_states + s) * self.dims.actions_max + a) * self.dims.actions_min + b
    }

    pub fn transition(&self, h: usize, s: usize, a: usize, b: usize) -> &[f64] {
        let r = self.row(h, s, a, b);
        &self.kernel[r * self.dims.num_states..(r + 1) * self.dims.num_states]
    }

    pub fn reward(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.reward[self.row(h, s, a, b)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl KernelEnv for TabularZeroSumMG {
    fn kernel_dims(&self) -> KernelDims {
        self.dims.kernel_dims()
    }

    fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn initial_state(&self) -> usize {
        self.initial_state
    }

    fn with_kernel(&self, kernel: Vec<f64>) -> Self {
        debug_assert_eq!(kernel.len(), self.kernel.len());
        Self {
            kernel,
            ..self.clone()
        }
    }

    fn shift_rewards(&self, shift: &[f64]) -> Self {
        let reward = self.reward.iter().zip(shift).map(|(r, d)| r + d).collect();
        Self {
            reward,
            ..self.clone()
        }
    }

    fn same_rewards(&self, other: &Self) -> bool {
        self.dims == other.dims && self.initial_state == other.initial_state && self.reward == other.reward
    }
}

/// Random kernel with rows drawn uniformly from the simplex.
pub fn random_kernel(dims: KernelDims, rng: &mut crate::rng::Rng) -> Vec<f64> {
    let mut k = Vec::with_capacity(dims.kernel_len());
    for _ in 0..dims.num_rows() {
        let row: Vec<f64> = (0..dims.num_states).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let z: f64 = row.iter().sum();
        k.extend(row.into_iter().map(|x| x / z));
    }
    k
}

/// Random environment with uniform rewards and simplex-uniform kernel rows.
pub fn random_env(dims: MgDims, seed: u64) -> TabularZeroSumMG {
    let mut rng = rng_from_seed(seed);
    let kernel = random_kernel(dims.kernel_dims(), &mut rng);
    let reward = (0..dims.kernel_dims().num_rows()).map(|_| rng.random::<f64>()).collect();
    TabularZeroSumMG::from_flat_unchecked(dims, 0, kernel, reward)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    side: Side,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    dist: Vec<f64>,
}

impl MarkovPolicy {
    pub fn new(side: Side, horizon: usize, num_states: usize, num_actions: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != horizon * num_states * num_actions {
            return invalid("policy table has the wrong length");
        }
        for (k, row) in dist.chunks(num_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return invalid(format!("policy row {k} is not a distribution"));
            }
        }
        Ok(Self {
            side,
            horizon,
            num_states,
            num_actions,
            dist,
        })
    }

    pub fn uniform(side: Side, horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            side,
            horizon,
            num_states,
            num_actions,
            dist: vec![1.0 / num_actions as f64; horizon * num_states * num_actions],
        }
    }

    /// `actions[h * S + s]` is the action taken at `(h, s)`.
    pub fn deterministic(side: Side, horizon: usize, num_states: usize, num_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != horizon * num_states || actions.iter().any(|&a| a >= num_actions) {
            return invalid("deterministic action table is malformed");
        }
        let mut dist = vec![0.0; horizon * num_states * num_actions];
        for (k, &a) in actions.iter().enumerate() {
            dist[k * num_actions + a] = 1.0;
        }
        Ok(Self {
            side,
            horizon,
            num_states,
            num_actions,
            dist,
        })
    }

    /// Every deterministic Markov policy, in lexicographic order of the
    /// action table.
    pub fn all_deterministic(side: Side, horizon: usize, num_states: usize, num_actions: usize, limit: f64) -> Result<Vec<Self>> {
        let cells = horizon * num_states;
        let count = (num_actions as f64).powi(cells as i32);
        if count > limit {
            return Err(Error::EnumerationTooLarge {
                what: "deterministic policies",
                size: count,
                limit,
            });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut actions = vec![0usize; cells];
        loop {
            out.push(Self::deterministic(side, horizon, num_states, num_actions, &actions)?);
            let mut k = cells;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                actions[k] += 1;
                if actions[k] < num_actions {
                    break;
                }
                actions[k] = 0;
            }
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        let k = (h * self.num_states + s) * self.num_actions;
        &self.dist[k..k + self.num_actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.dist
    }

    pub fn is_deterministic(&self) -> bool {
        self.dist.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    fn check(&self, env: &TabularZeroSumMG, side: Side) -> Result<()> {
        let want = match side {
            Side::Max => env.actions_max(),
            Side::Min => env.actions_min(),
        };
        if self.side != side || self.horizon != env.horizon() || self.num_states != env.num_states() || self.num_actions != want {
            return invalid(format!("{:?} policy does not match the environment", side));
        }
        Ok(())
    }
}

/// Finite mixture of Markov policies, realized once per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMixture {
    pub weights: Vec<f64>,
    pub components: Vec<MarkovPolicy>,
}

impl PolicyMixture {
    pub fn pure(p: MarkovPolicy) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![p],
        }
    }

    pub fn new(weights: Vec<f64>, components: Vec<MarkovPolicy>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if components.is_empty() || weights.len() != components.len() || weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-10 {
            return invalid("mixture weights must be a distribution over its components");
        }
        Ok(Self { weights, components })
    }

    pub fn realize(&self, seed: u64) -> &MarkovPolicy {
        let u: f64 = rng_from_seed(seed).random();
        &self.components[sample_index(&self.weights, u)]
    }

    /// Support components with their weights.
    pub fn support(&self) -> impl Iterator<Item = (f64, &MarkovPolicy)> {
        self.weights.iter().copied().zip(&self.components).filter(|(w, _)| *w > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    dims: MgDims,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTables {
    /// `V_h(s)` for `h ∈ 0..=H`.
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.dims.num_states + s]
    }

    pub fn q(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.q[((h * self.dims.num_states + s) * self.dims.actions_max + a) * self.dims.actions_min + b]
    }

    pub fn v_step(&self, h: usize) -> &[f64] {
        &self.v[h * self.dims.num_states..(h + 1) * self.dims.num_states]
    }
}

/// Backward induction; `stage(h, s, q_row)` returns `V_h(s)` from the
/// `A × B` block of `Q_h(s,·,·)`.
fn backward<F>(env: &TabularZeroSumMG, mut stage: F) -> Result<ValueTables>
where
    F: FnMut(usize, usize, &[f64]) -> Result<f64>,
{
    let d = env.dims;
    let (ns, nj) = (d.num_states, d.actions_max * d.actions_min);
    let mut v = vec![0.0; (d.horizon + 1) * ns];
    let mut q = vec![0.0; d.horizon * ns * nj];
    for h in (0..d.horizon).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let base = (h * ns + s) * nj;
            for j in 0..nj {
                let row = base + j;
                let p = &env.kernel[row * ns..(row + 1) * ns];
                q[row] = env.reward[row] + p.iter().zip(next).map(|(a, b)| a * b).sum::<f64>();
            }
            cur[h * ns + s] = stage(h, s, &q[base..base + nj])?;
        }
    }
    Ok(ValueTables { dims: d, v, q })
}

pub fn evaluate_values(env: &TabularZeroSumMG, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<ValueTables> {
    mu.check(env, Side::Max)?;
    nu.check(env, Side::Min)?;
    let nb = env.actions_min();
    backward(env, |h, s, q| {
        let (x, y) = (mu.probs(h, s), nu.probs(h, s));
        let mut v = 0.0;
        for (a, &pa) in x.iter().enumerate() {
            if pa != 0.0 {
                for (b, &pb) in y.iter().enumerate() {
                    v += pa * pb * q[a * nb + b];
                }
            }
        }
        Ok(v)
    })
}

/// `V^e_{1,μ,ν}(s1)`.
pub fn value(env: &TabularZeroSumMG, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<f64> {
    Ok(evaluate_values(env, mu, nu)?.v(0, env.initial_state))
}

fn argbest(values: impl Iterator<Item = f64>, maximize: bool) -> (usize, f64) {
    let mut best = (0, if maximize { f64::NEG_INFINITY } else { f64::INFINITY });
    for (i, v) in values.enumerate() {
        let better = if maximize { v > best.1 + TIE_TOL } else { v < best.1 - TIE_TOL };
        if better {
            best = (i, v);
        }
    }
    best
}

/// Deterministic min-player best response to `mu`, lowest index on ties.
pub fn best_response_min(env: &TabularZeroSumMG, mu: &MarkovPolicy) -> Result<(MarkovPolicy, ValueTables)> {
    mu.check(env, Side::Max)?;
    let (na, nb) = (env.actions_max(), env.actions_min());
    let mut actions = vec![0; env.horizon() * env.num_states()];
    let vt = backward(env, |h, s, q| {
        let x = mu.probs(h, s);
        let (b, v) = argbest((0..nb).map(|b| (0..na).map(|a| x[a] * q[a * nb + b]).sum()), false);
        actions[h * env.num_states() + s] = b;
        Ok(v)
    })?;
    let nu = MarkovPolicy::deterministic(Side::Min, env.horizon(), env.num_states(), nb, &actions)?;
    Ok((nu, vt))
}

/// Deterministic max-player best response to `nu`, lowest index on ties.
pub fn best_response_max(env: &TabularZeroSumMG, nu: &MarkovPolicy) -> Result<(MarkovPolicy, ValueTables)> {
    nu.check(env, Side::Min)?;
    let (na, nb) = (env.actions_max(), env.actions_min());
    let mut actions = vec![0; env.horizon() * env.num_states()];
    let vt = backward(env, |h, s, q| {
        let y = nu.probs(h, s);
        let (a, v) = argbest((0..na).map(|a| (0..nb).map(|b| y[b] * q[a * nb + b]).sum()), true);
        actions[h * env.num_states() + s] = a;
        Ok(v)
    })?;
    let mu = MarkovPolicy::deterministic(Side::Max, env.horizon(), env.num_states(), na, &actions)?;
    Ok((mu, vt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashSolution {
    pub mu: MarkovPolicy,
    pub nu: MarkovPolicy,
    pub values: ValueTables,
}

impl NashSolution {
    pub fn value(&self, s: usize) -> f64 {
        self.values.v(0, s)
    }
}

/// Nash equilibrium by backward induction over stage matrix games.
pub fn solve_nash(env: &TabularZeroSumMG) -> Result<NashSolution> {
    let d = env.dims;
    let (na, nb) = (d.actions_max, d.actions_min);
    let mut x = vec![0.0; d.horizon * d.num_states * na];
    let mut y = vec![0.0; d.horizon * d.num_states * nb];
    let values = backward(env, |h, s, q| {
        let k = h * d.num_states + s;
        let sol = minimax_solve(&MatrixGame::new(na, nb, q.to_vec())?)?;
        x[k * na..(k + 1) * na].copy_from_slice(&sol.row_strategy);
        y[k * nb..(k + 1) * nb].copy_from_slice(&sol.col_strategy);
        Ok(sol.value)
    })?;
    let mu = MarkovPolicy {
        side: Side::Max,
        horizon: d.horizon,
        num_states: d.num_states,
        num_actions: na,
        dist: x,
    };
    let nu = MarkovPolicy {
        side: Side::Min,
        horizon: d.horizon,
        num_states: d.num_states,
        num_actions: nb,
        dist: y,
    };
    Ok(NashSolution { mu, nu, values })
}

/// Joint action table `(h*S+s)*AB + a*B + b → μ(a)ν(b)`.
pub fn joint_table(mu: &MarkovPolicy, nu: &MarkovPolicy) -> Vec<f64> {
    let (na, nb) = (mu.num_actions, nu.num_actions);
    let cells = mu.horizon * mu.num_states;
    let mut t = Vec::with_capacity(cells * na * nb);
    for k in 0..cells {
        let x = &mu.dist[k * na..(k + 1) * na];
        let y = &nu.dist[k * nb..(k + 1) * nb];
        for &pa in x {
            for &pb in y {
                t.push(pa * pb);
            }
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTable {
    dims: MgDims,
    d: Vec<f64>,
}

impl OccupancyTable {
    pub fn get(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.d[((h * self.dims.num_states + s) * self.dims.actions_max + a) * self.dims.actions_min + b]
    }

    /// Flat table aligned with kernel rows.
    pub fn rows(&self) -> &[f64] {
        &self.d
    }

    pub fn step_mass(&self, h: usize) -> f64 {
        self.d[self.dims.kernel_dims().step_rows(h)].iter().sum()
    }

    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        let nj = self.dims.actions_max * self.dims.actions_min;
        (0..self.dims.num_states)
            .map(|s| {
                let base = (h * self.dims.num_states + s) * nj;
                self.d[base..base + nj].iter().sum()
            })
            .collect()
    }
}

pub fn occupancy(env: &TabularZeroSumMG, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<OccupancyTable> {
    mu.check(env, Side::Max)?;
    nu.check(env, Side::Min)?;
    let d = occupancy_rows(env.kernel_dims(), &env.kernel, env.initial_state, &joint_table(mu, nu));
    Ok(OccupancyTable { dims: env.dims, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action_max: usize,
    pub action_min: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub terminal_state: usize,
}

impl Trajectory {
    pub fn transitions(&self, actions_min: usize) -> Vec<Transition> {
        self.steps
            .iter()
            .enumerate()
            .map(|(h, st)| Transition {
                h,
                s: st.state,
                joint: st.action_max * actions_min + st.action_min,
                next: self.steps.get(h + 1).map_or(self.terminal_state, |n| n.state),
            })
            .collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

pub fn simulate_episode(env: &TabularZeroSumMG, mu: &MarkovPolicy, nu: &MarkovPolicy, seed: u64) -> Result<Trajectory> {
    mu.check(env, Side::Max)?;
    nu.check(env, Side::Min)?;
    let mut rng = rng_from_seed(seed);
    let mut s = env.initial_state;
    let mut steps = Vec::with_capacity(env.horizon());
    for h in 0..env.horizon() {
        let a = sample_index(mu.probs(h, s), rng.random());
        let b = sample_index(nu.probs(h, s), rng.random());
        let reward = env.reward(h, s, a, b);
        steps.push(Step {
            state: s,
            action_max: a,
            action_min: b,
            reward,
        });
        s = sample_index(env.transition(h, s, a, b), rng.random());
    }
    Ok(Trajectory { steps, terminal_state: s })
}

/// `V^e − V^{e2}` at the initial state and its per-step terms
/// `E^{e2}[(P^e_h − P^{e2}_h) V^e_{h+1}]`.
pub fn value_gap_decomposition(e: &TabularZeroSumMG, e2: &TabularZeroSumMG, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<(f64, Vec<f64>)> {
    if !e.same_rewards(e2) {
        return invalid("value gap decomposition needs identical dimensions and rewards");
    }
    let ve = evaluate_values(e, mu, nu)?;
    let ve2 = evaluate_values(e2, mu, nu)?;
    let d2 = occupancy(e2, mu, nu)?;
    let kd = e.kernel_dims();
    let ns = kd.num_states;
    let terms = (0..kd.horizon)
        .map(|h| {
            let next = ve.v_step(h + 1);
            kd.step_rows(h)
                .map(|row| {
                    let w = d2.d[row];
                    if w == 0.0 {
                        return 0.0;
                    }
                    let p = &e.kernel[row * ns..(row + 1) * ns];
                    let q = &e2.kernel[row * ns..(row + 1) * ns];
                    w * (0..ns).map(|s| (p[s] - q[s]) * next[s]).sum::<f64>()
                })
                .sum()
        })
        .collect();
    let s1 = e.initial_state;
    Ok((ve.v(0, s1) - ve2.v(0, s1), terms))
}

/// Product of two sub-games: states, actions and kernels multiply, rewards
/// add. The summed reward must stay in `[0, 1]`.
pub fn build_product_mg(m1: &TabularZeroSumMG, m2: &TabularZeroSumMG) -> Result<TabularZeroSumMG> {
    if m1.horizon() != m2.horizon() {
        return invalid("product sub-games need equal horizons");
    }
    let (d1, d2) = (m1.dims, m2.dims);
    let dims = MgDims {
        horizon: d1.horizon,
        num_states: d1.num_states * d2.num_states,
        actions_max: d1.actions_max * d2.actions_max,
        actions_min: d1.actions_min * d2.actions_min,
    };
    let kd = dims.kernel_dims();
    let mut kernel = vec![0.0; kd.kernel_len()];
    let mut reward = vec![0.0; kd.num_rows()];
    for h in 0..dims.horizon {
        for s1 in 0..d1.num_states {
            for s2 in 0..d2.num_states {
                let s = s1 * d2.num_states + s2;
                for a1 in 0..d1.actions_max {
                    for a2 in 0..d2.actions_max {
                        for b1 in 0..d1.actions_min {
                            for b2 in 0..d2.actions_min {
                                let a = a1 * d2.actions_max + a2;
                                let b = b1 * d2.actions_min + b2;
                                let row = kd.row(h, s, a * dims.actions_min + b);
                                let r = m1.reward(h, s1, a1, b1) + m2.reward(h, s2, a2, b2);
                                if r > 1.0 + 1e-12 {
                                    return invalid(format!("product reward {r} exceeds 1; rescale the sub-games"));
                                }
                                reward[row] = r.min(1.0);
                                let p1 = m1.transition(h, s1, a1, b1);
                                let p2 = m2.transition(h, s2, a2, b2);
                                let out = &mut kernel[row * dims.num_states..(row + 1) * dims.num_states];
                                for (n1, &q1) in p1.iter().enumerate() {
                                    for (n2, &q2) in p2.iter().enumerate() {
                                        out[n1 * d2.num_states + n2] = q1 * q2;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let s1 = m1.initial_state * d2.num_states + m2.initial_state;
    TabularZeroSumMG::from_flat(dims, s1, kernel, reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(h: usize, s: usize, a: usize, b: usize) -> MgDims {
        MgDims {
            horizon: h,
            num_states: s,
            actions_max: a,
            actions_min: b,
        }
    }

    fn random_policy(side: Side, env: &TabularZeroSumMG, seed: u64) -> MarkovPolicy {
        let n = match side {
            Side::Max => env.actions_max(),
            Side::Min => env.actions_min(),
        };
        let mut rng = rng_from_seed(seed);
        let mut dist = Vec::new();
        for _ in 0..env.horizon() * env.num_states() {
            let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let z: f64 = row.iter().sum();
            dist.extend(row.iter().map(|x| x / z));
        }
        MarkovPolicy::new(side, env.horizon(), env.num_states(), n, dist).unwrap()
    }

    #[test]
    fn single_step_value() {
        let e = TabularZeroSumMG::from_flat(dims(1, 1, 1, 1), 0, vec![1.0], vec![0.7]).unwrap();
        let mu = MarkovPolicy::uniform(Side::Max, 1, 1, 1);
        let nu = MarkovPolicy::uniform(Side::Min, 1, 1, 1);
        assert_eq!(value(&e, &mu, &nu).unwrap(), 0.7);
    }

    #[test]
    fn validation_rejects_bad_envs() {
        assert!(TabularZeroSumMG::from_flat(dims(1, 1, 1, 1), 0, vec![0.9], vec![0.5]).is_err());
        assert!(TabularZeroSumMG::from_flat(dims(1, 1, 1, 1), 0, vec![1.0], vec![1.5]).is_err());
        assert!(TabularZeroSumMG::from_flat(dims(1, 1, 1, 1), 1, vec![1.0], vec![0.5]).is_err());
        let e = random_env(dims(2, 2, 2, 2), 1);
        let wrong = MarkovPolicy::uniform(Side::Max, 2, 2, 3);
        assert!(evaluate_values(&e, &wrong, &MarkovPolicy::uniform(Side::Min, 2, 2, 2)).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let e = random_env(dims(2, 3, 2, 2), 5);
        let back = TabularZeroSumMG::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn value_matches_monte_carlo() {
        let e = random_env(dims(2, 2, 2, 2), 17);
        let mu = random_policy(Side::Max, &e, 1);
        let nu = random_policy(Side::Min, &e, 2);
        let v = value(&e, &mu, &nu).unwrap();
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for k in 0..n {
            let g = simulate_episode(&e, &mu, &nu, k).unwrap().total_reward();
            sum += g;
            sq += g * g;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - v).abs() < 3.0 * se, "{mean} vs {v} (se {se})");
    }

    #[test]
    fn best_responses_match_enumeration() {
        for seed in 0..10 {
            let e = random_env(dims(2, 2, 2, 3), seed);
            let mu = random_policy(Side::Max, &e, seed + 100);
            let nu = random_policy(Side::Min, &e, seed + 200);
            let (br, vt) = best_response_min(&e, &mu).unwrap();
            assert!(br.is_deterministic());
            let brute = MarkovPolicy::all_deterministic(Side::Min, 2, 2, 3, 1e5)
                .unwrap()
                .iter()
                .map(|p| value(&e, &mu, p).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!((vt.v(0, 0) - brute).abs() < 1e-12);
            let (_, vt) = best_response_max(&e, &nu).unwrap();
            let brute = MarkovPolicy::all_deterministic(Side::Max, 2, 2, 2, 1e5)
                .unwrap()
                .iter()
                .map(|p| value(&e, p, &nu).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((vt.v(0, 0) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_best_responses() {
        let mut e = random_env(dims(2, 2, 2, 1), 3);
        let mu = random_policy(Side::Max, &e, 4);
        let (nu, vt) = best_response_min(&e, &mu).unwrap();
        let direct = evaluate_values(&e, &mu, &nu).unwrap();
        assert_eq!(vt.v(0, 0), direct.v(0, 0));

        e.dims.actions_min = 1;
        e.reward.iter_mut().for_each(|r| *r = 1.0);
        let nu = MarkovPolicy::uniform(Side::Min, 2, 2, 1);
        let (_, vt) = best_response_max(&e, &nu).unwrap();
        assert!((vt.v(0, 0) - 2.0).abs() < 1e-12);

        // Matching pennies, rewards shifted to [0,1]: any response gives 1/2.
        let mp = TabularZeroSumMG::from_flat(dims(1, 1, 2, 2), 0, vec![1.0; 4], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (_, vt) = best_response_min(&mp, &MarkovPolicy::uniform(Side::Max, 1, 1, 2)).unwrap();
        assert!((vt.v(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rock_paper_scissors_nash() {
        let u = [0.5, 0.0, 1.0, 1.0, 0.5, 0.0, 0.0, 1.0, 0.5];
        let e = TabularZeroSumMG::from_flat(dims(1, 1, 3, 3), 0, vec![1.0; 9], u.to_vec()).unwrap();
        let sol = solve_nash(&e).unwrap();
        assert!((sol.value(0) - 0.5).abs() < 1e-12);
        for p in sol.mu.probs(0, 0).iter().chain(sol.nu.probs(0, 0)) {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nash_lies_in_brute_force_interval() {
        for seed in 0..10 {
            let e = random_env(dims(2, 2, 2, 2), 1000 + seed);
            let sol = solve_nash(&e).unwrap();
            let maxes = MarkovPolicy::all_deterministic(Side::Max, 2, 2, 2, 1e5).unwrap();
            let mins = MarkovPolicy::all_deterministic(Side::Min, 2, 2, 2, 1e5).unwrap();
            let lower = maxes
                .iter()
                .map(|m| mins.iter().map(|n| value(&e, m, n).unwrap()).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max);
            let upper = mins
                .iter()
                .map(|n| maxes.iter().map(|m| value(&e, m, n).unwrap()).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            let v = sol.value(0);
            assert!(lower - 1e-9 <= v && v <= upper + 1e-9);
            let (_, lo) = best_response_min(&e, &sol.mu).unwrap();
            let (_, hi) = best_response_max(&e, &sol.nu).unwrap();
            assert!((lo.v(0, 0) - v).abs() < 1e-8);
            assert!((hi.v(0, 0) - v).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic_chain_has_point_mass_occupancy() {
        // State s moves to (s+1) mod 2 whatever the actions.
        let kernel = [0.0, 1.0, 1.0, 0.0].repeat(2);
        let e = TabularZeroSumMG::from_flat(dims(2, 2, 1, 1), 0, kernel, vec![0.5; 4]).unwrap();
        let mu = MarkovPolicy::uniform(Side::Max, 2, 2, 1);
        let nu = MarkovPolicy::uniform(Side::Min, 2, 2, 1);
        let d = occupancy(&e, &mu, &nu).unwrap();
        assert_eq!(d.get(0, 0, 0, 0), 1.0);
        assert_eq!(d.get(1, 1, 0, 0), 1.0);
        let t1 = simulate_episode(&e, &mu, &nu, 1).unwrap();
        let t2 = simulate_episode(&e, &mu, &nu, 99).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.terminal_state, 0);
    }

    #[test]
    fn visit_frequencies_match_occupancy() {
        let e = random_env(dims(3, 3, 2, 2), 8);
        let mu = random_policy(Side::Max, &e, 9);
        let nu = random_policy(Side::Min, &e, 10);
        let d = occupancy(&e, &mu, &nu).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for k in 0..n {
            counts[simulate_episode(&e, &mu, &nu, k).unwrap().steps[2].state] += 1;
        }
        for (s, &p) in d.state_marginal(2).iter().enumerate() {
            let f = counts[s] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() <= 3.0 * se + 1e-12, "state {s}: {f} vs {p}");
        }
    }

    #[test]
    fn identical_envs_have_zero_gap_terms() {
        let e = random_env(dims(3, 2, 2, 2), 4);
        let mu = random_policy(Side::Max, &e, 1);
        let nu = random_policy(Side::Min, &e, 2);
        let (gap, terms) = value_gap_decomposition(&e, &e, &mu, &nu).unwrap();
        assert_eq!(gap, 0.0);
        assert!(terms.iter().all(|&t| t == 0.0));

        // Kernels differing only at the last step: earlier terms vanish.
        let mut e2 = e.clone();
        let kd = e.kernel_dims();
        let mut rng = rng_from_seed(3);
        let fresh = random_kernel(kd, &mut rng);
        let last = kd.step_rows(2);
        let ns = kd.num_states;
        e2.kernel[last.start * ns..last.end * ns].copy_from_slice(&fresh[last.start * ns..last.end * ns]);
        let (_, terms) = value_gap_decomposition(&e, &e2, &mu, &nu).unwrap();
        assert_eq!(terms[0], 0.0);
        assert_eq!(terms[1], 0.0);

        let mut e3 = e.clone();
        e3.reward[0] = 0.123;
        assert!(value_gap_decomposition(&e, &e3, &mu, &nu).is_err());
    }

    #[test]
    fn product_with_trivial_side_factor() {
        let m1 = random_env(dims(2, 2, 2, 2), 12);
        let m2 = TabularZeroSumMG::from_flat(dims(2, 1, 1, 1), 0, vec![1.0; 2], vec![0.0; 2]).unwrap();
        let p = build_product_mg(&m1, &m2).unwrap();
        assert_eq!(p.num_states(), 2);
        let mu = random_policy(Side::Max, &m1, 1);
        let nu = random_policy(Side::Min, &m1, 2);
        assert!((value(&p, &mu, &nu).unwrap() - value(&m1, &mu, &nu).unwrap()).abs() < 1e-15);

        let m3 = random_env(dims(2, 3, 1, 2), 2);
        let mut m1s = m1.clone();
        m1s.reward.iter_mut().for_each(|r| *r *= 0.5);
        let mut m3s = m3.clone();
        m3s.reward.iter_mut().for_each(|r| *r *= 0.5);
        let p = build_product_mg(&m1s, &m3s).unwrap();
        assert_eq!(p.num_states(), 6);
        assert_eq!(p.actions_min(), 4);
        assert!(build_product_mg(&m1, &m3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bellman_and_duality(seed in any::<u64>(), h in 1usize..4, s in 1usize..4, a in 1usize..4, b in 1usize..4) {
            let e = random_env(dims(h, s, a, b), seed);
            let mu = random_policy(Side::Max, &e, seed ^ 1);
            let nu = random_policy(Side::Min, &e, seed ^ 2);
            let vt = evaluate_values(&e, &mu, &nu).unwrap();
            for hh in 0..h {
                for ss in 0..s {
                    let mut v = 0.0;
                    for aa in 0..a {
                        for bb in 0..b {
                            let q = e.reward(hh, ss, aa, bb)
                                + e.transition(hh, ss, aa, bb).iter().enumerate().map(|(n, p)| p * vt.v(hh + 1, n)).sum::<f64>();
                            prop_assert!((q - vt.q(hh, ss, aa, bb)).abs() < 1e-10);
                            v += mu.probs(hh, ss)[aa] * nu.probs(hh, ss)[bb] * q;
                        }
                    }
                    prop_assert!((v - vt.v(hh, ss)).abs() < 1e-10);
                    prop_assert!(vt.v(hh, ss) >= 0.0 && vt.v(hh, ss) <= (h - hh) as f64 + 1e-12);
                }
            }
            let d = occupancy(&e, &mu, &nu).unwrap();
            for hh in 0..h {
                prop_assert!((d.step_mass(hh) - 1.0).abs() < 1e-10);
            }
            let dr: f64 = d.rows().iter().zip(e.rewards()).map(|(x, r)| x * r).sum();
            prop_assert!((dr - vt.v(0, 0)).abs() < 1e-10);
        }

        #[test]
        fn saddle_against_perturbations(seed in any::<u64>()) {
            let e = random_env(dims(2, 3, 2, 3), seed);
            let sol = solve_nash(&e).unwrap();
            let v = sol.value(0);
            for k in 0..5 {
                let mu = random_policy(Side::Max, &e, seed.wrapping_add(k));
                let nu = random_policy(Side::Min, &e, seed.wrapping_add(100 + k));
                prop_assert!(value(&e, &mu, &sol.nu).unwrap() <= v + 1e-8);
                prop_assert!(value(&e, &sol.mu, &nu).unwrap() >= v - 1e-8);
            }
        }

        #[test]
        fn simulation_lemma(seed in any::<u64>()) {
            let e = random_env(dims(3, 2, 2, 2), seed);
            let mut rng = rng_from_seed(seed ^ 7);
            let e2 = e.with_kernel(random_kernel(e.kernel_dims(), &mut rng));
            let mu = random_policy(Side::Max, &e, seed ^ 3);
            let nu = random_policy(Side::Min, &e, seed ^ 4);
            let (gap, terms) = value_gap_decomposition(&e, &e2, &mu, &nu).unwrap();
            prop_assert!((gap - terms.iter().sum::<f64>()).abs() < 1e-10);
        }
    }
}
