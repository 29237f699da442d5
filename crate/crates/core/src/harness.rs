//! Experiment runner: draw a true environment from the prior, play K
//! episodes (select, simulate, update), and score every episode exactly in
//! the true environment. Outer prior draws run in parallel and are merged in
//! draw order, so output is a function of the config alone.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, DirichletBelief, FiniteSupportBelief, McSpec};
use crate::bounds::{mi_cap, theoretical_bounds, ts_ratio_cap, BoundDims, CompressionExtra, Theorem};
use crate::compression::{
    build_hard_partition, compressed_entropy, max_cell_distortion, ExplicitPartition, Partition, PolicyClassSpec,
};
use crate::env::{KernelDims, KernelEnv};
use crate::error::{invalid, Error, Result};
use crate::general_sum::{
    equilibrium_gap_in, mutual_info_gs, payoff_tensor, random_gs_env, reg_maids_gs_select, simulate_profile, EquilibriumTarget,
    MixedJointPolicy, PurePolicyProfileSet, TabularGeneralSumMG,
};
use crate::ids::{general_sum_lambda, select, AlgorithmConfig, AlgorithmKind};
use crate::info::{mutual_info_trajectory, mutual_info_trajectory_enum, trajectory_mi_enum, InfoContext};
use crate::mg::{
    best_response_max, best_response_min, build_product_mg, joint_table, random_env, random_kernel, simulate_episode, solve_nash,
    value, MarkovPolicy, MgDims, TabularZeroSumMG,
};
use crate::rng::{derive_seed, derive_seed_path, rng_from_seed};

const DRAW_TAG: u64 = 0x6472_6177;
const ENV_TAG: u64 = 0x656e_76;
const SELECT_TAG: u64 = 0x7365_6c;
const SIM_TAG: u64 = 0x7369_6d;
const PRIOR_TAG: u64 = 0x7072_696f;
const MC_TAG: u64 = 0x6d63_6d63;
/// Largest trajectory space the harness enumerates for per-episode MI.
const EPISODE_ENUM_LIMIT: f64 = 4096.0;
/// Largest deterministic policy-pair count for measuring cell distortion.
const DISTORTION_PAIR_LIMIT: f64 = 1e6;
/// Largest step-product prior the generator builds.
const STEP_PRODUCT_LIMIT: f64 = 4096.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ZeroSum,
    GeneralSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GameSpec {
    ZeroSum {
        dims: MgDims,
    },
    GeneralSum {
        horizon: usize,
        num_states: usize,
        action_counts: Vec<usize>,
        #[serde(default)]
        target: EquilibriumTarget,
        /// Unset means the general-sum schedule.
        #[serde(default)]
        lambda: Option<f64>,
    },
}

fn step_zero() -> Vec<usize> {
    vec![0]
}

/// How the prior is built. Generated priors share one random base
/// environment (rewards included) drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// The base environment alone.
    PointMass { seed: u64 },
    /// Uniform over `candidates` kernels that redraw the rows of `vary_steps`.
    RandomFinite {
        candidates: usize,
        seed: u64,
        #[serde(default = "step_zero")]
        vary_steps: Vec<usize>,
    },
    /// Every combination of `options` per-step kernel slices, uniform.
    StepProduct { options: usize, seed: u64 },
    /// Symmetric Dirichlet rows around the base environment's rewards.
    Dirichlet { seed: u64, concentration: f64 },
    /// Inline finite belief (zero-sum).
    Explicit { belief: FiniteSupportBelief<TabularZeroSumMG> },
    /// Environment JSON files with optional weights (zero-sum).
    EnvFiles {
        paths: Vec<PathBuf>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// Product of a 2-state main game and a 2-state single-action side game
    /// whose per-step reward is at most `1/(2HK)`. Candidate `i·side + j`
    /// pairs main candidate `i` with side candidate `j`.
    ProductExample {
        main_candidates: usize,
        side_candidates: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionSpec {
    /// Simplex-cover partition; `epsilon` defaults to the algorithm's.
    Hard {
        #[serde(default)]
        epsilon: Option<f64>,
    },
    /// `cell_of[k]` per prior candidate; each cell's first member is its
    /// reference.
    Groups { cell_of: Vec<usize> },
    Identity,
}

fn default_draws() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub game: GameSpec,
    pub prior: PriorSpec,
    /// Run side by side on common seeds. Empty means Reg-MAIDS.
    #[serde(default)]
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    pub episodes: usize,
    #[serde(default = "default_draws")]
    pub num_prior_draws: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let PriorSpec::EnvFiles { paths, .. } = &mut c.prior {
            let dir = path.parent().unwrap_or(Path::new("."));
            for p in paths.iter_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(c)
    }

    pub fn mode(&self) -> Mode {
        match self.game {
            GameSpec::ZeroSum { .. } => Mode::ZeroSum,
            GameSpec::GeneralSum { .. } => Mode::GeneralSum,
        }
    }

    pub fn algorithm_configs(&self) -> Vec<AlgorithmConfig> {
        if self.algorithms.is_empty() {
            vec![AlgorithmConfig::new(AlgorithmKind::RegMaids)]
        } else {
            self.algorithms.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.num_prior_draws == 0 {
            return invalid("episodes and num_prior_draws must be at least 1");
        }
        for a in self.algorithm_configs() {
            a.validate()?;
        }
        match &self.game {
            GameSpec::ZeroSum { dims } => {
                if dims.horizon == 0 || dims.num_states == 0 || dims.actions_max == 0 || dims.actions_min == 0 {
                    return invalid("dimensions must be positive");
                }
            }
            GameSpec::GeneralSum {
                horizon,
                num_states,
                action_counts,
                lambda,
                ..
            } => {
                if *horizon == 0 || *num_states == 0 || action_counts.is_empty() || action_counts.contains(&0) {
                    return invalid("dimensions must be positive");
                }
                if lambda.is_some_and(|l| !(l >= 0.0) || !l.is_finite()) {
                    return invalid("lambda must be finite and nonnegative");
                }
                if self.algorithm_configs().iter().any(|a| a.algorithm != AlgorithmKind::RegMaids) {
                    return invalid("general-sum runs support reg_maids only");
                }
                if matches!(self.prior, PriorSpec::Explicit { .. } | PriorSpec::EnvFiles { .. } | PriorSpec::ProductExample { .. }) {
                    return invalid("this prior kind is zero-sum only");
                }
                if self.partition.is_some() {
                    return invalid("general-sum runs take no partition");
                }
            }
        }
        match &self.prior {
            PriorSpec::RandomFinite { candidates, vary_steps, .. } => {
                let h = self.horizon();
                if *candidates == 0 || vary_steps.iter().any(|&s| s >= h) {
                    return invalid("random_finite needs candidates ≥ 1 and steps below the horizon");
                }
            }
            PriorSpec::StepProduct { options, .. } => {
                if *options == 0 || (*options as f64).powi(self.horizon() as i32) > STEP_PRODUCT_LIMIT {
                    return Err(Error::EnumerationTooLarge {
                        what: "step-product prior",
                        size: (*options as f64).powi(self.horizon() as i32),
                        limit: STEP_PRODUCT_LIMIT,
                    });
                }
            }
            PriorSpec::Dirichlet { concentration, .. } => {
                if !(*concentration > 0.0) || !concentration.is_finite() {
                    return invalid("concentration must be positive");
                }
            }
            PriorSpec::ProductExample {
                main_candidates,
                side_candidates,
                ..
            } => {
                let GameSpec::ZeroSum { dims } = &self.game else { unreachable!() };
                if dims.num_states != 4 || dims.actions_max != 2 || dims.actions_min != 2 {
                    return invalid("product_example needs 4 states and 2 actions per player");
                }
                if *main_candidates == 0 || *side_candidates == 0 {
                    return invalid("product_example needs candidates on both sides");
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn horizon(&self) -> usize {
        match &self.game {
            GameSpec::ZeroSum { dims } => dims.horizon,
            GameSpec::GeneralSum { horizon, .. } => *horizon,
        }
    }
}

fn redraw_steps<E: KernelEnv>(base: &E, steps: &[usize], rng: &mut crate::rng::Rng) -> E {
    let kd = base.kernel_dims();
    let fresh = random_kernel(kd, rng);
    let mut k = base.kernel().to_vec();
    for &h in steps {
        let r = kd.step_rows(h);
        let span = r.start * kd.num_states..r.end * kd.num_states;
        k[span.clone()].copy_from_slice(&fresh[span]);
    }
    base.with_kernel(k)
}

fn generic_prior<E: KernelEnv>(spec: &PriorSpec, base: E) -> Result<Belief<E>> {
    match spec {
        PriorSpec::PointMass { .. } => Ok(Belief::Finite(FiniteSupportBelief::uniform(vec![base])?)),
        PriorSpec::RandomFinite {
            candidates,
            seed,
            vary_steps,
        } => {
            let mut rng = rng_from_seed(derive_seed(*seed, PRIOR_TAG));
            let c = (0..*candidates).map(|_| redraw_steps(&base, vary_steps, &mut rng)).collect();
            Ok(Belief::Finite(FiniteSupportBelief::uniform(c)?))
        }
        PriorSpec::StepProduct { options, seed } => {
            let kd = base.kernel_dims();
            let mut rng = rng_from_seed(derive_seed(*seed, PRIOR_TAG));
            let pool: Vec<Vec<f64>> = (0..*options).map(|_| random_kernel(kd, &mut rng)).collect();
            let total = options.pow(kd.horizon as u32);
            let c = (0..total)
                .map(|mut idx| {
                    let mut k = vec![0.0; kd.kernel_len()];
                    for h in (0..kd.horizon).rev() {
                        let o = idx % options;
                        idx /= options;
                        let r = kd.step_rows(h);
                        let span = r.start * kd.num_states..r.end * kd.num_states;
                        k[span.clone()].copy_from_slice(&pool[o][span]);
                    }
                    base.with_kernel(k)
                })
                .collect();
            Ok(Belief::Finite(FiniteSupportBelief::uniform(c)?))
        }
        PriorSpec::Dirichlet { concentration, .. } => Ok(Belief::Dirichlet(DirichletBelief::symmetric(base, *concentration)?)),
        _ => invalid("prior kind not available for this game"),
    }
}

fn spec_seed(spec: &PriorSpec) -> u64 {
    match spec {
        PriorSpec::PointMass { seed }
        | PriorSpec::RandomFinite { seed, .. }
        | PriorSpec::StepProduct { seed, .. }
        | PriorSpec::Dirichlet { seed, .. }
        | PriorSpec::ProductExample { seed, .. } => *seed,
        PriorSpec::Explicit { .. } | PriorSpec::EnvFiles { .. } => 0,
    }
}

fn scale_rewards(e: &TabularZeroSumMG, c: f64) -> Result<TabularZeroSumMG> {
    TabularZeroSumMG::from_flat(e.dims(), e.initial_state(), e.kernel().to_vec(), e.rewards().iter().map(|r| r * c).collect())
}

/// Prior for the product example and its grouping by main candidate.
pub fn product_example_prior(
    horizon: usize,
    main_candidates: usize,
    side_candidates: usize,
    seed: u64,
    episodes: usize,
) -> Result<(FiniteSupportBelief<TabularZeroSumMG>, ExplicitPartition)> {
    let delta = 1.0 / (2.0 * horizon as f64 * episodes as f64);
    let md = MgDims {
        horizon,
        num_states: 2,
        actions_max: 2,
        actions_min: 2,
    };
    let sd = MgDims {
        horizon,
        num_states: 2,
        actions_max: 1,
        actions_min: 1,
    };
    let main = scale_rewards(&random_env(md, seed), 1.0 - delta)?;
    let side = scale_rewards(&random_env(sd, derive_seed(seed, 1)), delta)?;
    let mut rng = rng_from_seed(derive_seed(seed, PRIOR_TAG));
    let mains: Vec<_> = (0..main_candidates).map(|_| redraw_steps(&main, &[0], &mut rng)).collect();
    let sides: Vec<_> = (0..side_candidates).map(|_| redraw_steps(&side, &[0], &mut rng)).collect();
    let mut cands = Vec::new();
    let mut cell_of = Vec::new();
    for (i, m) in mains.iter().enumerate() {
        for s in &sides {
            cands.push(build_product_mg(m, s)?);
            cell_of.push(i);
        }
    }
    let references = (0..main_candidates).map(|i| cands[i * side_candidates].clone()).collect();
    Ok((FiniteSupportBelief::uniform(cands)?, ExplicitPartition::new(cell_of, references)?))
}

/// Prior belief of a zero-sum config.
pub fn zero_sum_prior(cfg: &ExperimentConfig) -> Result<Belief<TabularZeroSumMG>> {
    let GameSpec::ZeroSum { dims } = &cfg.game else {
        return invalid("not a zero-sum config");
    };
    let belief = match &cfg.prior {
        PriorSpec::Explicit { belief } => Belief::Finite(belief.clone()),
        PriorSpec::EnvFiles { paths, weights } => {
            let envs = paths
                .iter()
                .map(|p| TabularZeroSumMG::from_json(&std::fs::read_to_string(p)?))
                .collect::<Result<Vec<_>>>()?;
            let w = weights.clone().unwrap_or_else(|| vec![1.0; envs.len()]);
            Belief::Finite(FiniteSupportBelief::new(envs, w)?)
        }
        PriorSpec::ProductExample {
            main_candidates,
            side_candidates,
            seed,
        } => Belief::Finite(product_example_prior(dims.horizon, *main_candidates, *side_candidates, *seed, cfg.episodes)?.0),
        spec => generic_prior(spec, random_env(*dims, spec_seed(spec)))?,
    };
    if belief.template().dims() != *dims {
        return invalid("prior environments do not match the configured dimensions");
    }
    Ok(belief)
}

/// Prior belief of a general-sum config.
pub fn general_sum_prior(cfg: &ExperimentConfig) -> Result<Belief<TabularGeneralSumMG>> {
    let GameSpec::GeneralSum {
        horizon,
        num_states,
        action_counts,
        ..
    } = &cfg.game
    else {
        return invalid("not a general-sum config");
    };
    let base = random_gs_env(*horizon, *num_states, action_counts.clone(), spec_seed(&cfg.prior));
    generic_prior(&cfg.prior, base)
}

fn build_partition(cfg: &ExperimentConfig, prior: &Belief<TabularZeroSumMG>, epsilon: f64) -> Result<Partition> {
    let finite = || prior.as_finite().ok_or_else(|| Error::InvalidArgument("this partition needs a finite prior".into()));
    let spec = match (&cfg.partition, &cfg.prior) {
        (Some(p), _) => p.clone(),
        (None, PriorSpec::ProductExample { .. }) => {
            let f = finite()?;
            let n = f.candidates().len();
            let PriorSpec::ProductExample { side_candidates, .. } = cfg.prior else { unreachable!() };
            PartitionSpec::Groups {
                cell_of: (0..n).map(|k| k / side_candidates).collect(),
            }
        }
        (None, _) => PartitionSpec::Hard { epsilon: None },
    };
    Ok(match spec {
        PartitionSpec::Hard { epsilon: e } => Partition::Hard(build_hard_partition(prior.template(), e.unwrap_or(epsilon))?),
        PartitionSpec::Identity => Partition::Explicit(ExplicitPartition::identity(finite()?)),
        PartitionSpec::Groups { cell_of } => {
            let f = finite()?;
            if cell_of.len() != f.candidates().len() {
                return invalid("partition size does not match the prior");
            }
            let cells = cell_of.iter().max().map_or(0, |m| m + 1);
            let references = (0..cells)
                .map(|c| match cell_of.iter().position(|&x| x == c) {
                    Some(k) => Ok(f.candidates()[k].clone()),
                    None => invalid(format!("cell {c} is empty")),
                })
                .collect::<Result<_>>()?;
            Partition::Explicit(ExplicitPartition::new(cell_of, references)?)
        }
    })
}

/// Per-episode record for one algorithm and one prior draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub inst_regret: f64,
    /// Zero-sum: `V_{†,ν} − V_{μ,†}`. General-sum: the largest player gap.
    pub duality_gap: f64,
    pub mi_episode: f64,
    /// General-sum: the smallest player gap.
    pub min_player_gap: Option<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSeries {
    pub draw: usize,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
}

impl SeedSeries {
    pub fn cum_regret(&self) -> Vec<f64> {
        cumsum(self.episodes.iter().map(|e| e.inst_regret))
    }

    pub fn mi_cum(&self) -> Vec<f64> {
        cumsum(self.episodes.iter().map(|e| e.mi_episode))
    }
}

fn cumsum(it: impl Iterator<Item = f64>) -> Vec<f64> {
    it.scan(0.0, |acc, x| {
        *acc += x;
        Some(*acc)
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub label: String,
    pub config: AlgorithmConfig,
    pub theorem: Option<Theorem>,
    /// Compressed runs: entropy of the prior cell distribution and `ε`.
    pub compression: Option<CompressionExtra>,
    pub mean_cum_regret: Vec<f64>,
    pub stderr_cum_regret: Vec<f64>,
    pub mean_mi_cum: Vec<f64>,
    pub mean_duality_gap: Vec<f64>,
    /// Bound with `K = k` at episode `k`.
    pub bound: Option<Vec<f64>>,
    pub final_cum_regret_per_draw: Vec<f64>,
    pub final_mi_cum_per_draw: Vec<f64>,
    pub below_bound_everywhere: Option<bool>,
    pub mi_cap: f64,
    pub mi_cap_respected: bool,
    pub min_inst_regret: f64,
    pub min_player_gap: Option<f64>,
    pub fallback_episodes: usize,
    #[serde(skip)]
    pub per_draw: Vec<SeedSeries>,
}

impl AlgorithmReport {
    pub fn final_mean(&self) -> f64 {
        *self.mean_cum_regret.last().unwrap_or(&0.0)
    }

    pub fn final_stderr(&self) -> f64 {
        *self.stderr_cum_regret.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub name: String,
    pub mode: Mode,
    pub episodes: usize,
    pub num_prior_draws: usize,
    pub base_seed: u64,
    pub log_base: String,
    pub algorithms: Vec<AlgorithmReport>,
}

impl RegretReport {
    pub fn algorithm(&self, kind: AlgorithmKind) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|a| a.config.algorithm == kind)
    }
}

fn label(kind: AlgorithmKind, taken: &[String]) -> String {
    let base = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    let mut l = base.clone();
    let mut n = 2;
    while taken.contains(&l) {
        l = format!("{base}#{n}");
        n += 1;
    }
    l
}

fn draw_seed(base: u64, i: usize) -> u64 {
    derive_seed_path(base, &[DRAW_TAG, i as u64])
}

fn episode_seeds(seed: u64, k: usize) -> (u64, u64) {
    (derive_seed_path(seed, &[SELECT_TAG, k as u64]), derive_seed_path(seed, &[SIM_TAG, k as u64]))
}

fn enumerable(kd: KernelDims) -> bool {
    ((kd.num_states * kd.num_joint) as f64).powi(kd.horizon as i32) <= EPISODE_ENUM_LIMIT
}

/// `I(𝓔; τ)` of one episode: exact enumeration when small, else the
/// occupancy formula.
fn episode_mi(belief: &Belief<TabularZeroSumMG>, mu: &MarkovPolicy, nu: &MarkovPolicy) -> f64 {
    if let Some(f) = belief.as_finite() {
        if enumerable(belief.kernel_dims()) {
            if let Ok(v) = mutual_info_trajectory_enum(f, mu, nu) {
                return v;
            }
        }
    }
    mutual_info_trajectory(belief, mu, nu)
}

fn episode_mi_gs(belief: &Belief<TabularGeneralSumMG>, sets: &PurePolicyProfileSet, pi: &MixedJointPolicy, probs: &[f64]) -> Result<f64> {
    if let Some(f) = belief.as_finite() {
        if enumerable(belief.kernel_dims()) {
            let env = belief.template();
            let w = f.weights();
            let mut total = 0.0;
            for (k, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    total += p * trajectory_mi_enum(f.candidates(), &w, None, &sets.joint_table(env, k))?;
                }
            }
            return Ok(total);
        }
    }
    mutual_info_gs(belief, sets, pi)
}

fn summarize(
    label: String,
    config: AlgorithmConfig,
    theorem: Option<Theorem>,
    compression: Option<CompressionExtra>,
    bound_dims: BoundDims,
    per_draw: Vec<SeedSeries>,
) -> Result<AlgorithmReport> {
    let k = bound_dims.episodes;
    let n = per_draw.len() as f64;
    let cums: Vec<Vec<f64>> = per_draw.iter().map(|s| s.cum_regret()).collect();
    let mis: Vec<Vec<f64>> = per_draw.iter().map(|s| s.mi_cum()).collect();
    let mean_at = |series: &[Vec<f64>], t: usize| series.iter().map(|s| s[t]).sum::<f64>() / n;
    let mean_cum_regret: Vec<f64> = (0..k).map(|t| mean_at(&cums, t)).collect();
    let stderr_cum_regret = (0..k)
        .map(|t| {
            if per_draw.len() < 2 {
                return 0.0;
            }
            let m = mean_cum_regret[t];
            let var = cums.iter().map(|s| (s[t] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let mean_mi_cum: Vec<f64> = (0..k).map(|t| mean_at(&mis, t)).collect();
    let mean_duality_gap = (0..k).map(|t| per_draw.iter().map(|s| s.episodes[t].duality_gap).sum::<f64>() / n).collect();
    let bound = match theorem {
        Some(th) => Some(
            (1..=k)
                .map(|kk| theoretical_bounds(&BoundDims { episodes: kk, ..bound_dims }, th, compression))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    let below_bound_everywhere = bound.as_ref().map(|b| mean_cum_regret.iter().zip(b).all(|(r, b)| r < b));
    let cap = mi_cap(&bound_dims);
    let recs = per_draw.iter().flat_map(|s| s.episodes.iter());
    let min_inst_regret = recs.clone().map(|e| e.inst_regret).fold(f64::INFINITY, f64::min);
    let min_player_gap = recs.clone().filter_map(|e| e.min_player_gap).reduce(f64::min);
    let fallback_episodes = recs.filter(|e| e.fallback).count();
    Ok(AlgorithmReport {
        label,
        config,
        theorem,
        compression,
        mi_cap_respected: mean_mi_cum.iter().all(|m| *m <= cap),
        mean_cum_regret,
        stderr_cum_regret,
        mean_mi_cum,
        mean_duality_gap,
        bound,
        final_cum_regret_per_draw: cums.iter().map(|c| *c.last().unwrap_or(&0.0)).collect(),
        final_mi_cum_per_draw: mis.iter().map(|c| *c.last().unwrap_or(&0.0)).collect(),
        below_bound_everywhere,
        mi_cap: cap,
        min_inst_regret,
        min_player_gap,
        fallback_episodes,
        per_draw,
    })
}

fn policy_pairs(d: MgDims) -> f64 {
    let cells = (d.horizon * d.num_states) as f64;
    (d.actions_max as f64).powf(cells) * (d.actions_min as f64).powf(cells)
}

struct ZsAlgo {
    label: String,
    cfg: AlgorithmConfig,
    partition: Option<Partition>,
    theorem: Option<Theorem>,
    compression: Option<CompressionExtra>,
}

fn prepare_zero_sum(cfg: &ExperimentConfig, prior: &Belief<TabularZeroSumMG>) -> Result<Vec<ZsAlgo>> {
    let dims = prior.template().dims();
    let mut out: Vec<ZsAlgo> = Vec::new();
    for a in cfg.algorithm_configs() {
        let sched = a.with_schedule(dims, cfg.episodes)?;
        let taken: Vec<String> = out.iter().map(|x| x.label.clone()).collect();
        let (partition, compression) = if sched.algorithm == AlgorithmKind::CompressedMaids {
            let eps = sched.epsilon.unwrap_or(1.0 / cfg.episodes as f64);
            let p = build_partition(cfg, prior, eps)?;
            let eps = match (&p, prior.as_finite()) {
                (Partition::Hard(h), _) => h.epsilon(),
                (Partition::Explicit(_), Some(f)) if policy_pairs(dims) <= DISTORTION_PAIR_LIMIT => {
                    max_cell_distortion(f, &p.assign(f)?, &PolicyClassSpec::AllDeterministic)?
                }
                (Partition::Explicit(_), _) => eps,
            };
            let mc = McSpec {
                samples: sched.mc_samples,
                seed: derive_seed(cfg.base_seed, MC_TAG),
            };
            let info = compressed_entropy(prior, &p, Some(mc))?;
            (Some(p), Some(CompressionExtra { information: info, epsilon: eps }))
        } else {
            (None, None)
        };
        let theorem = match sched.algorithm {
            AlgorithmKind::Maids => Some(Theorem::Thm1),
            AlgorithmKind::RegMaids => Some(Theorem::Thm2),
            AlgorithmKind::CompressedMaids => Some(Theorem::Thm3),
            AlgorithmKind::ThompsonSampling | AlgorithmKind::UniformRandom => None,
        };
        out.push(ZsAlgo {
            label: label(sched.algorithm, &taken),
            cfg: sched,
            partition,
            theorem,
            compression,
        });
    }
    Ok(out)
}

fn run_zero_sum_draw(prior: &Belief<TabularZeroSumMG>, algo: &ZsAlgo, episodes: usize, seed: u64) -> Result<Vec<EpisodeRecord>> {
    let env = prior.sample_env(derive_seed(seed, ENV_TAG));
    let s1 = env.initial_state();
    let v_star = solve_nash(&env)?.value(s1);
    let mut belief = prior.clone();
    let mut out = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let (sel_seed, sim_seed) = episode_seeds(seed, k);
        let pair = select(&belief, &algo.cfg, algo.partition.as_ref(), sel_seed)?;
        let v_mu = best_response_min(&env, &pair.mu)?.1.v(0, s1);
        let v_nu = best_response_max(&env, &pair.nu)?.1.v(0, s1);
        let mi = episode_mi(&belief, &pair.mu, &pair.nu);
        let traj = simulate_episode(&env, &pair.mu, &pair.nu, sim_seed)?;
        out.push(EpisodeRecord {
            inst_regret: v_star - v_mu,
            duality_gap: v_nu - v_mu,
            mi_episode: mi,
            min_player_gap: None,
            fallback: pair.diagnostics.fallback,
        });
        belief = belief.posterior_update(&traj.transitions(env.actions_min()))?;
    }
    Ok(out)
}

fn run_draws<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<SeedSeries>>
where
    F: Fn(u64) -> Result<Vec<EpisodeRecord>> + Sync,
{
    (0..cfg.num_prior_draws)
        .into_par_iter()
        .map(|i| {
            let seed = draw_seed(cfg.base_seed, i);
            Ok(SeedSeries {
                draw: i,
                seed,
                episodes: f(seed)?,
            })
        })
        .collect()
}

pub fn run_zero_sum_experiment(cfg: &ExperimentConfig) -> Result<RegretReport> {
    cfg.validate()?;
    let prior = zero_sum_prior(cfg)?;
    let dims = prior.template().dims();
    let algos = prepare_zero_sum(cfg, &prior)?;
    let bound_dims = BoundDims {
        states: dims.num_states,
        actions_max: dims.actions_max,
        actions_min: dims.actions_min,
        horizon: dims.horizon,
        episodes: cfg.episodes,
        players: 2,
    };
    let mut reports = Vec::new();
    for a in algos {
        let per_draw = run_draws(cfg, |seed| run_zero_sum_draw(&prior, &a, cfg.episodes, seed))?;
        reports.push(summarize(a.label, a.cfg, a.theorem, a.compression, bound_dims, per_draw)?);
    }
    Ok(RegretReport {
        name: cfg.name.clone(),
        mode: Mode::ZeroSum,
        episodes: cfg.episodes,
        num_prior_draws: cfg.num_prior_draws,
        base_seed: cfg.base_seed,
        log_base: "natural".into(),
        algorithms: reports,
    })
}

fn run_general_sum_draw(
    prior: &Belief<TabularGeneralSumMG>,
    lambda: f64,
    target: EquilibriumTarget,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    let env = prior.sample_env(derive_seed(seed, ENV_TAG));
    let sets = PurePolicyProfileSet::all_deterministic(&env)?;
    let truth = payoff_tensor(&env, &sets)?;
    let mut belief = prior.clone();
    let mut out = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let (sel_seed, sim_seed) = episode_seeds(seed, k);
        let sel = reg_maids_gs_select(&belief, lambda, &sets, target)?;
        let probs = sel.policy.joint_probs(&sets)?;
        let gaps = equilibrium_gap_in(&truth, &probs)?;
        let mi = episode_mi_gs(&belief, &sets, &sel.policy, &probs)?;
        let profile = sel.policy.realize(&sets, sel_seed)?;
        let trans = simulate_profile(&env, &sets, profile, sim_seed);
        out.push(EpisodeRecord {
            inst_regret: gaps.iter().sum(),
            duality_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mi_episode: mi,
            min_player_gap: Some(gaps.iter().copied().fold(f64::INFINITY, f64::min)),
            fallback: sel.ne_fallback,
        });
        belief = belief.posterior_update(&trans)?;
    }
    Ok(out)
}

pub fn run_general_sum_experiment(cfg: &ExperimentConfig) -> Result<RegretReport> {
    cfg.validate()?;
    let GameSpec::GeneralSum {
        horizon,
        num_states,
        action_counts,
        target,
        lambda,
    } = &cfg.game
    else {
        return invalid("not a general-sum config");
    };
    let prior = general_sum_prior(cfg)?;
    let lambda = match lambda {
        Some(l) => *l,
        None => general_sum_lambda(cfg.episodes, *horizon, *num_states)?,
    };
    let mut acfg = cfg.algorithm_configs().remove(0);
    acfg.lambda = Some(lambda);
    let per_draw = run_draws(cfg, |seed| run_general_sum_draw(&prior, lambda, *target, cfg.episodes, seed))?;
    let bound_dims = BoundDims {
        states: *num_states,
        actions_max: action_counts.iter().product(),
        actions_min: 1,
        horizon: *horizon,
        episodes: cfg.episodes,
        players: action_counts.len(),
    };
    let report = summarize(label(AlgorithmKind::RegMaids, &[]), acfg, Some(Theorem::Thm4), None, bound_dims, per_draw)?;
    Ok(RegretReport {
        name: cfg.name.clone(),
        mode: Mode::GeneralSum,
        episodes: cfg.episodes,
        num_prior_draws: cfg.num_prior_draws,
        base_seed: cfg.base_seed,
        log_base: "natural".into(),
        algorithms: vec![report],
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretReport> {
    match cfg.mode() {
        Mode::ZeroSum => run_zero_sum_experiment(cfg),
        Mode::GeneralSum => run_general_sum_experiment(cfg),
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    episode: usize,
    seed: usize,
    algorithm: &'a str,
    inst_regret: f64,
    cum_regret: f64,
    duality_gap: f64,
    mi_episode: f64,
    mi_cum: f64,
    bound_value: Option<f64>,
}

/// Per-episode CSV: one row per algorithm, prior draw and episode
/// (episodes 1-based, `seed` is the draw index).
pub fn write_csv<W: std::io::Write>(report: &RegretReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for a in &report.algorithms {
        for s in &a.per_draw {
            let (mut cum, mut mi_cum) = (0.0, 0.0);
            for (k, e) in s.episodes.iter().enumerate() {
                cum += e.inst_regret;
                mi_cum += e.mi_episode;
                wr.serialize(CsvRow {
                    episode: k + 1,
                    seed: s.draw,
                    algorithm: &a.label,
                    inst_regret: e.inst_regret,
                    cum_regret: cum,
                    duality_gap: e.duality_gap,
                    mi_episode: e.mi_episode,
                    mi_cum,
                    bound_value: a.bound.as_ref().map(|b| b[k]),
                })
                .map_err(csv_err)?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn csv_bytes(report: &RegretReport) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a ExperimentConfig,
    report: &'a RegretReport,
    versions: Versions,
}

#[derive(Serialize)]
struct Versions {
    maids_core: &'static str,
}

pub fn report_json(cfg: &ExperimentConfig, report: &RegretReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ReportJson {
        config: cfg,
        report,
        versions: Versions {
            maids_core: env!("CARGO_PKG_VERSION"),
        },
    })?)
}

/// Writes `regret.csv` and `report.json` into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, report: &RegretReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join("regret.csv"))?;
    write_csv(report, std::io::BufWriter::new(f))?;
    let mut f = std::fs::File::create(dir.join("report.json"))?;
    f.write_all(report_json(cfg, report)?.as_bytes())?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return invalid("slope needs at least two positive points");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub check: String,
    pub algorithm: String,
    pub draw: usize,
    pub episode: usize,
    pub value: f64,
    pub limit: f64,
    pub state: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: usize,
    /// Whether the formula-vs-enumeration check ran (step-product priors).
    pub formula_checked: bool,
    pub max_ts_ratio: f64,
    pub max_min_ratio: f64,
    pub max_formula_error: f64,
    pub violations: Vec<AuditViolation>,
}

/// Numerator, information and weights of a seed-known mixture of
/// `(mu_j, nu_j)` pairs, `j` over posterior candidates.
struct Proxy {
    numerator: f64,
    information: f64,
}

fn mixture_mi(belief: &Belief<TabularZeroSumMG>, exact: bool, ctx: &InfoContext, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<f64> {
    match (exact, belief.as_finite()) {
        (true, Some(f)) => mutual_info_trajectory_enum(f, mu, nu),
        _ => Ok(ctx.mi(&joint_table(mu, nu))),
    }
}

fn ratio_excess(p: &Proxy, cap: f64) -> (f64, bool) {
    let ratio = if p.information > 0.0 { p.numerator.max(0.0).powi(2) / p.information } else { 0.0 };
    let violated = p.numerator > 0.0 && p.numerator * p.numerator > cap * p.information + 1e-9;
    (if violated && p.information <= 0.0 { f64::INFINITY } else { ratio }, violated)
}

/// Replays the configured zero-sum run and checks, per episode, the
/// posterior-sampling ratio caps for both players, the cumulative
/// information cap, and the occupancy MI formula against enumeration.
pub fn lemma_audit(cfg: &ExperimentConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let prior = zero_sum_prior(cfg)?;
    let Some(fin) = prior.as_finite() else {
        return invalid("the audit needs a finite-support prior");
    };
    let kd = prior.kernel_dims();
    let exact = enumerable(kd);
    if !exact {
        return Err(Error::EnumerationTooLarge {
            what: "audit trajectory space",
            size: ((kd.num_states * kd.num_joint) as f64).powi(kd.horizon as i32),
            limit: EPISODE_ENUM_LIMIT,
        });
    }
    let dims = prior.template().dims();
    let formula_checked = fin.is_step_product();
    let cap = ts_ratio_cap(dims.horizon, dims.num_states, dims.actions_max, dims.actions_min);
    let mcap = mi_cap(&BoundDims {
        states: dims.num_states,
        actions_max: dims.actions_max,
        actions_min: dims.actions_min,
        horizon: dims.horizon,
        episodes: cfg.episodes,
        players: 2,
    });
    let nash: Vec<MarkovPolicy> = fin.candidates().iter().map(|e| Ok(solve_nash(e)?.mu)).collect::<Result<_>>()?;
    let algos = prepare_zero_sum(cfg, &prior)?;
    let mut report = AuditReport {
        formula_checked,
        ..Default::default()
    };
    for a in &algos {
        let draws: Vec<Result<AuditReport>> = (0..cfg.num_prior_draws)
            .into_par_iter()
            .map(|i| audit_draw(&prior, a, &nash, cfg.episodes, i, draw_seed(cfg.base_seed, i), cap, mcap, formula_checked))
            .collect();
        for d in draws {
            let d = d?;
            report.checks += d.checks;
            report.max_ts_ratio = report.max_ts_ratio.max(d.max_ts_ratio);
            report.max_min_ratio = report.max_min_ratio.max(d.max_min_ratio);
            report.max_formula_error = report.max_formula_error.max(d.max_formula_error);
            report.violations.extend(d.violations);
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn audit_draw(
    prior: &Belief<TabularZeroSumMG>,
    algo: &ZsAlgo,
    nash: &[MarkovPolicy],
    episodes: usize,
    draw: usize,
    seed: u64,
    cap: f64,
    mcap: f64,
    formula_checked: bool,
) -> Result<AuditReport> {
    let env = prior.sample_env(derive_seed(seed, ENV_TAG));
    let mut belief = prior.clone();
    let mut rep = AuditReport::default();
    let mut mi_cum = 0.0;
    let mut over_cap = false;
    for k in 0..episodes {
        let (sel_seed, sim_seed) = episode_seeds(seed, k);
        let pair = select(&belief, &algo.cfg, algo.partition.as_ref(), sel_seed)?;
        let fin = belief.as_finite().expect("finite prior stays finite");
        let w = fin.weights();
        let cands = fin.candidates();
        let live: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
        let ctx = InfoContext::new(&belief);
        let dump = |extra: serde_json::Value| {
            serde_json::json!({
                "weights": w,
                "mu": pair.mu,
                "nu": pair.nu,
                "detail": extra,
            })
        };
        let flag = |rep: &mut AuditReport, check: &str, value: f64, limit: f64, detail: serde_json::Value| {
            rep.violations.push(AuditViolation {
                check: check.into(),
                algorithm: algo.label.clone(),
                draw,
                episode: k + 1,
                value,
                limit,
                state: dump(detail),
            });
        };

        // Max-player proxy against the played ν and the uniform ν.
        let uniform = crate::ids::uniform_baseline(env.dims(), 0).nu;
        for (name, nu) in [("played", &pair.nu), ("uniform", &uniform)] {
            let best: f64 = live.iter().map(|&i| Ok(w[i] * value(&cands[i], &nash[i], nu)?)).sum::<Result<f64>>()?;
            let mut p = Proxy {
                numerator: best,
                information: 0.0,
            };
            for &j in &live {
                let vj: f64 = live.iter().map(|&i| Ok(w[i] * value(&cands[i], &nash[j], nu)?)).sum::<Result<f64>>()?;
                p.numerator -= w[j] * vj;
                p.information += w[j] * mixture_mi(&belief, true, &ctx, &nash[j], nu)?;
            }
            let (ratio, bad) = ratio_excess(&p, cap);
            rep.checks += 1;
            rep.max_ts_ratio = rep.max_ts_ratio.max(ratio);
            if bad {
                flag(&mut rep, "ts_ratio_max", ratio, cap, serde_json::json!({ "nu": name, "numerator": p.numerator, "information": p.information }));
            }
        }

        // Min-player proxy against the played μ.
        let brs: Vec<(MarkovPolicy, f64)> = live
            .iter()
            .map(|&i| {
                let (b, v) = best_response_min(&cands[i], &pair.mu)?;
                Ok((b, v.v(0, cands[i].initial_state())))
            })
            .collect::<Result<_>>()?;
        let floor: f64 = live.iter().zip(&brs).map(|(&i, (_, v))| w[i] * v).sum();
        let mut p = Proxy {
            numerator: -floor,
            information: 0.0,
        };
        for (jj, &j) in live.iter().enumerate() {
            let nu_j = &brs[jj].0;
            let vj: f64 = live.iter().map(|&i| Ok(w[i] * value(&cands[i], &pair.mu, nu_j)?)).sum::<Result<f64>>()?;
            p.numerator += w[j] * vj;
            p.information += w[j] * mixture_mi(&belief, true, &ctx, &pair.mu, nu_j)?;
        }
        let (ratio, bad) = ratio_excess(&p, cap);
        rep.checks += 1;
        rep.max_min_ratio = rep.max_min_ratio.max(ratio);
        if bad {
            flag(&mut rep, "ts_ratio_min", ratio, cap, serde_json::json!({ "numerator": p.numerator, "information": p.information }));
        }

        let enum_mi = mutual_info_trajectory_enum(fin, &pair.mu, &pair.nu)?;
        if formula_checked {
            let err = (ctx.mi(&joint_table(&pair.mu, &pair.nu)) - enum_mi).abs();
            rep.checks += 1;
            rep.max_formula_error = rep.max_formula_error.max(err);
            if err > 1e-9 {
                flag(&mut rep, "mi_formula", err, 1e-9, serde_json::json!({ "enumerated": enum_mi }));
            }
        }
        mi_cum += enum_mi;
        rep.checks += 1;
        if mi_cum > mcap && !over_cap {
            over_cap = true;
            flag(&mut rep, "mi_cumulative", mi_cum, mcap, serde_json::Value::Null);
        }
        if enum_mi < -1e-12 {
            flag(&mut rep, "mi_nonnegative", enum_mi, 0.0, serde_json::Value::Null);
        }

        let traj = simulate_episode(&env, &pair.mu, &pair.nu, sim_seed)?;
        belief = belief.posterior_update(&traj.transitions(env.actions_min()))?;
    }
    Ok(rep)
}
