//! Per-episode policy selection: MAIDS and its regularized and compressed
//! variants, Thompson sampling, and a uniform baseline.
//!
//! MAIDS searches mixtures of a finite candidate set on a grid of
//! resolution `1/G`. A mixture is realized by drawing one component from the
//! episode seed; values, occupancies and information are linear in the
//! weights under that convention, so each step needs only a table of
//! per-pair numerators and information terms.

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, BonusSign, McSpec};
use crate::compression::Partition;
use crate::error::{invalid, Error, Result};
use crate::info::{compressed_mi_assigned, InfoContext, InfoRatioReport};
use crate::mg::{best_response_min, joint_table, solve_nash, value, MarkovPolicy, MgDims, PolicyMixture, Side, TabularZeroSumMG};
use crate::rng::{derive_seed, derive_seed_path};

pub const MAX_TAG: u64 = 0x6d61_78;
pub const MIN_TAG: u64 = 0x6d69_6e;
const REALIZE_MAX_TAG: u64 = 0x7278_6d61;
const REALIZE_MIN_TAG: u64 = 0x7278_6d69;
const MC_TAG: u64 = 0x6d63;
/// Ratios within this relative distance are ties.
pub const TIE_REL: f64 = 1e-12;
/// Largest mixture grid searched per step.
pub const GRID_LIMIT: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Maids,
    RegMaids,
    CompressedMaids,
    ThompsonSampling,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningTarget {
    #[default]
    FullEnvironment,
    Compressed,
}

fn default_candidates() -> usize {
    4
}

fn default_grid() -> usize {
    2
}

fn default_mc() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: AlgorithmKind,
    /// Unset means the theorem schedule for the run.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda_tilde: Option<f64>,
    #[serde(default = "default_candidates")]
    pub candidate_count: usize,
    #[serde(default = "default_grid")]
    pub mixture_grid: usize,
    /// Unset means `1/K`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub learning_target: LearningTarget,
}

impl AlgorithmConfig {
    pub fn new(algorithm: AlgorithmKind) -> Self {
        Self {
            algorithm,
            lambda: None,
            lambda_tilde: None,
            candidate_count: default_candidates(),
            mixture_grid: default_grid(),
            epsilon: None,
            mc_samples: default_mc(),
            learning_target: if algorithm == AlgorithmKind::CompressedMaids {
                LearningTarget::Compressed
            } else {
                LearningTarget::FullEnvironment
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("lambda_tilde", self.lambda_tilde)] {
            if let Some(l) = v {
                if !(l >= 0.0) || !l.is_finite() {
                    return invalid(format!("{name} must be finite and nonnegative"));
                }
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return invalid("epsilon must be positive");
            }
        }
        if self.candidate_count == 0 || self.mixture_grid == 0 || self.mc_samples == 0 {
            return invalid("candidate_count, mixture_grid and mc_samples must be positive");
        }
        if self.learning_target == LearningTarget::Compressed && self.algorithm != AlgorithmKind::CompressedMaids {
            return invalid("a compressed learning target needs the compressed algorithm");
        }
        Ok(())
    }

    /// Fills unset parameters from the schedule for `episodes` episodes.
    pub fn with_schedule(&self, dims: MgDims, episodes: usize) -> Result<Self> {
        let mut c = self.clone();
        if matches!(c.algorithm, AlgorithmKind::RegMaids) {
            let l = zero_sum_lambda(episodes, dims.horizon, dims.num_states)?;
            c.lambda.get_or_insert(l);
            c.lambda_tilde.get_or_insert(l);
        }
        if c.algorithm == AlgorithmKind::CompressedMaids {
            c.epsilon.get_or_insert(1.0 / episodes.max(1) as f64);
        }
        Ok(c)
    }
}

fn log_skh(states: usize, episodes: usize, horizon: usize) -> Result<f64> {
    let x = (states * episodes * horizon) as f64;
    if x < 2.0 {
        return invalid("the schedule needs S·K·H ≥ 2");
    }
    Ok(x.ln())
}

/// `√(2KH²/(S ln(SKH)))`.
pub fn zero_sum_lambda(episodes: usize, horizon: usize, states: usize) -> Result<f64> {
    let (k, h, s) = (episodes as f64, horizon as f64, states as f64);
    Ok((2.0 * k * h * h / (s * log_skh(states, episodes, horizon)?)).sqrt())
}

/// `√(HK²/(S ln(SKH)))`.
pub fn general_sum_lambda(episodes: usize, horizon: usize, states: usize) -> Result<f64> {
    let (k, h, s) = (episodes as f64, horizon as f64, states as f64);
    Ok((h * k * k / (s * log_skh(states, episodes, horizon)?)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    /// Chosen max-step objective (worst-case ratio over the min candidates).
    pub objective: Option<f64>,
    pub numerator: Option<f64>,
    pub information: Option<f64>,
    /// Chosen min-step ratio.
    pub marginal_ratio: Option<f64>,
    pub fallback: bool,
    pub lambda: Option<f64>,
    pub lambda_tilde: Option<f64>,
    pub mu_weights: Vec<f64>,
    pub nu_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodePolicyPair {
    pub mu: MarkovPolicy,
    pub nu: MarkovPolicy,
    pub diagnostics: SelectionDiagnostics,
}

/// Posterior NE policy of one sampled environment.
pub fn ts_select_max(belief: &Belief<TabularZeroSumMG>, rng_seed: u64) -> Result<MarkovPolicy> {
    let e = belief.sample_env(derive_seed_path(rng_seed, &[MAX_TAG, 0]));
    Ok(solve_nash(&e)?.mu)
}

/// Best response to `mu` in one sampled environment.
pub fn ts_select_min(belief: &Belief<TabularZeroSumMG>, mu: &MarkovPolicy, rng_seed: u64) -> Result<MarkovPolicy> {
    let e = belief.sample_env(derive_seed_path(rng_seed, &[MIN_TAG, 0]));
    Ok(best_response_min(&e, mu)?.0)
}

pub fn ts_select(belief: &Belief<TabularZeroSumMG>, rng_seed: u64) -> Result<EpisodePolicyPair> {
    let mu = ts_select_max(belief, rng_seed)?;
    let nu = ts_select_min(belief, &mu, rng_seed)?;
    Ok(EpisodePolicyPair {
        mu,
        nu,
        diagnostics: SelectionDiagnostics::default(),
    })
}

pub fn uniform_baseline(dims: MgDims, _rng_seed: u64) -> EpisodePolicyPair {
    EpisodePolicyPair {
        mu: MarkovPolicy::uniform(Side::Max, dims.horizon, dims.num_states, dims.actions_max),
        nu: MarkovPolicy::uniform(Side::Min, dims.horizon, dims.num_states, dims.actions_min),
        diagnostics: SelectionDiagnostics::default(),
    }
}

/// NE of the bonus mean environment, then the best response in the penalty
/// mean environment.
pub fn reg_maids_select(belief: &Belief<TabularZeroSumMG>, cfg: &AlgorithmConfig) -> Result<EpisodePolicyPair> {
    let (Some(lambda), Some(lambda_tilde)) = (cfg.lambda, cfg.lambda_tilde) else {
        return invalid("lambda and lambda_tilde must be set (see AlgorithmConfig::with_schedule)");
    };
    let bonus = belief.build_mean_env(lambda, BonusSign::Bonus)?;
    let mu = solve_nash(&bonus.env)?.mu;
    let penalty = belief.build_mean_env(lambda_tilde, BonusSign::Penalty)?;
    let (nu, _) = best_response_min(&penalty.env, &mu)?;
    let info = InfoContext::new(belief).mi(&joint_table(&mu, &nu));
    Ok(EpisodePolicyPair {
        mu,
        nu,
        diagnostics: SelectionDiagnostics {
            information: Some(info),
            lambda: Some(lambda),
            lambda_tilde: Some(lambda_tilde),
            ..Default::default()
        },
    })
}

/// Weighted environments the numerators average over, each paired with the
/// environment its values are read in (itself, or its cell reference).
struct Target {
    weights: Vec<f64>,
    envs: Vec<TabularZeroSumMG>,
    eval: Vec<TabularZeroSumMG>,
    info: InfoSource,
}

enum InfoSource {
    Formula(InfoContext),
    Compressed {
        finite: crate::belief::FiniteSupportBelief<TabularZeroSumMG>,
        cells: crate::compression::CellAssignment,
    },
}

impl Target {
    fn full(belief: &Belief<TabularZeroSumMG>, mc: McSpec) -> Result<Self> {
        let parts = belief.particles(Some(mc))?;
        let (weights, envs): (Vec<f64>, Vec<TabularZeroSumMG>) = parts.into_iter().unzip();
        Ok(Self {
            weights,
            eval: envs.clone(),
            envs,
            info: InfoSource::Formula(InfoContext::new(belief)),
        })
    }

    fn compressed(belief: &Belief<TabularZeroSumMG>, partition: &Partition, mc: McSpec) -> Result<Self> {
        let (finite, cells) = partition.assign_belief(belief, Some(mc))?;
        let w = finite.weights();
        let live: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
        Ok(Self {
            weights: live.iter().map(|&k| w[k]).collect(),
            envs: live.iter().map(|&k| finite.candidates()[k].clone()).collect(),
            eval: live.iter().map(|&k| cells.reference_of(k).clone()).collect(),
            info: InfoSource::Compressed { finite, cells },
        })
    }

    fn mi(&self, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<f64> {
        let joint = joint_table(mu, nu);
        match &self.info {
            InfoSource::Formula(ctx) => Ok(ctx.mi(&joint)),
            InfoSource::Compressed { finite, cells } => compressed_mi_assigned(finite, cells, &joint),
        }
    }
}

fn push_unique(set: &mut Vec<MarkovPolicy>, p: MarkovPolicy) {
    if !set.contains(&p) {
        set.push(p);
    }
}

/// All compositions of `g` into `parts` nonnegative parts, lexicographic
/// with the first part largest first.
pub fn mixture_grid(parts: usize, g: usize) -> Result<Vec<Vec<usize>>> {
    let size = (1..parts).fold(1.0, |acc, i| acc * (g + i) as f64 / i as f64);
    if size > GRID_LIMIT {
        return Err(Error::EnumerationTooLarge {
            what: "mixture grid",
            size,
            limit: GRID_LIMIT,
        });
    }
    fn rec(parts: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == parts {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(parts, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, g, &mut Vec::with_capacity(parts), &mut out);
    Ok(out)
}

/// Report for a mixture `x` (grid counts over `g`) against table rows.
fn mixed_report(x: &[usize], g: usize, num: &[f64], mi: &[f64]) -> InfoRatioReport {
    let gf = g as f64;
    let n: f64 = x.iter().zip(num).map(|(&c, v)| c as f64 / gf * v).sum();
    let d: f64 = x.iter().zip(mi).map(|(&c, v)| c as f64 / gf * v).sum();
    InfoRatioReport::new(n, d, None)
}

/// Strictly better: lower ratio beyond the tie band, then lower numerator.
fn better(a: &InfoRatioReport, b: &InfoRatioReport) -> bool {
    let tie = if a.infinite || b.infinite {
        a.infinite == b.infinite
    } else {
        (a.ratio - b.ratio).abs() <= TIE_REL * a.ratio.abs().max(b.ratio.abs())
    };
    if !tie {
        return a.ratio < b.ratio;
    }
    a.numerator_regret < b.numerator_regret
}

/// Outcome of the max-player step, exposed for rechecks.
#[derive(Debug, Clone)]
pub struct MaxStep {
    pub candidates_max: Vec<MarkovPolicy>,
    pub candidates_min: Vec<MarkovPolicy>,
    pub grid: Vec<Vec<usize>>,
    /// Per-grid-point worst case over the min candidates.
    pub worst: Vec<InfoRatioReport>,
    pub chosen: usize,
    pub fallback: bool,
}

fn max_step(belief: &Belief<TabularZeroSumMG>, target: &Target, cfg: &AlgorithmConfig, seed: u64) -> Result<MaxStep> {
    let m = cfg.candidate_count;
    let samples: Vec<TabularZeroSumMG> = (0..m).map(|i| belief.sample_env(derive_seed_path(seed, &[MAX_TAG, i as u64]))).collect();
    let nash: Vec<_> = samples.iter().map(solve_nash).collect::<Result<_>>()?;
    let mean = if m >= 2 { Some(solve_nash(&belief.reward_free_mean_env())?) } else { None };

    let mut cand_a = Vec::new();
    for n in &nash {
        push_unique(&mut cand_a, n.mu.clone());
    }
    if let Some(n) = &mean {
        push_unique(&mut cand_a, n.mu.clone());
    }
    let mut cand_b = Vec::new();
    for n in &nash {
        push_unique(&mut cand_b, n.nu.clone());
    }
    for e in &samples {
        for n in &nash {
            push_unique(&mut cand_b, best_response_min(e, &n.mu)?.0);
        }
    }
    if let Some(n) = &mean {
        push_unique(&mut cand_b, n.nu.clone());
    }

    // num[j][c] = E[V^Ẽ(μ*(𝓔), ν_j) − V^Ẽ(μ_c, ν_j)], mi[j][c] likewise.
    let stars: Vec<MarkovPolicy> = target.envs.iter().map(|e| Ok(solve_nash(e)?.mu)).collect::<Result<_>>()?;
    let mut num = vec![vec![0.0; cand_a.len()]; cand_b.len()];
    let mut mi = vec![vec![0.0; cand_a.len()]; cand_b.len()];
    for (j, nu) in cand_b.iter().enumerate() {
        for (p, ev) in target.eval.iter().enumerate() {
            let w = target.weights[p];
            let base = value(ev, &stars[p], nu)?;
            for (c, mu) in cand_a.iter().enumerate() {
                num[j][c] += w * (base - value(ev, mu, nu)?);
            }
        }
        for (c, mu) in cand_a.iter().enumerate() {
            mi[j][c] = target.mi(mu, nu)?;
        }
    }

    let g = cfg.mixture_grid;
    let grid = mixture_grid(cand_a.len(), g)?;
    let worst: Vec<InfoRatioReport> = grid
        .iter()
        .map(|x| {
            let mut w = mixed_report(x, g, &num[0], &mi[0]);
            for j in 1..cand_b.len() {
                let r = mixed_report(x, g, &num[j], &mi[j]);
                if better(&w, &r) {
                    w = r;
                }
            }
            w
        })
        .collect();
    let fallback = worst.iter().all(|r| r.infinite);
    let chosen = if fallback {
        // Numerator-only minimax.
        let score = |x: &Vec<usize>| (0..cand_b.len()).map(|j| mixed_report(x, g, &num[j], &mi[j]).numerator_regret).fold(f64::NEG_INFINITY, f64::max);
        let scores: Vec<f64> = grid.iter().map(score).collect();
        (1..grid.len()).fold(0, |best, i| if scores[i] < scores[best] { i } else { best })
    } else {
        (1..grid.len()).fold(0, |best, i| if better(&worst[i], &worst[best]) { i } else { best })
    };
    Ok(MaxStep {
        candidates_max: cand_a,
        candidates_min: cand_b,
        grid,
        worst,
        chosen,
        fallback,
    })
}

/// Outcome of the min-player step for a realized `mu`.
#[derive(Debug, Clone)]
pub struct MinStep {
    pub candidates_min: Vec<MarkovPolicy>,
    pub grid: Vec<Vec<usize>>,
    pub reports: Vec<InfoRatioReport>,
    pub chosen: usize,
    pub fallback: bool,
}

fn min_step(belief: &Belief<TabularZeroSumMG>, target: &Target, cfg: &AlgorithmConfig, mu: &MarkovPolicy, seed: u64) -> Result<MinStep> {
    let m = cfg.candidate_count;
    let mut cand = Vec::new();
    for i in 0..m {
        let e = belief.sample_env(derive_seed_path(seed, &[MIN_TAG, i as u64]));
        push_unique(&mut cand, best_response_min(&e, mu)?.0);
    }
    if m >= 2 {
        push_unique(&mut cand, best_response_min(&belief.reward_free_mean_env(), mu)?.0);
    }
    let brs: Vec<MarkovPolicy> = target.envs.iter().map(|e| Ok(best_response_min(e, mu)?.0)).collect::<Result<_>>()?;
    let mut num = vec![0.0; cand.len()];
    let mut mi = vec![0.0; cand.len()];
    for (p, ev) in target.eval.iter().enumerate() {
        let w = target.weights[p];
        let base = value(ev, mu, &brs[p])?;
        for (j, nu) in cand.iter().enumerate() {
            num[j] += w * (value(ev, mu, nu)? - base);
        }
    }
    for (j, nu) in cand.iter().enumerate() {
        mi[j] = target.mi(mu, nu)?;
    }
    let g = cfg.mixture_grid;
    let grid = mixture_grid(cand.len(), g)?;
    let reports: Vec<InfoRatioReport> = grid.iter().map(|y| mixed_report(y, g, &num, &mi)).collect();
    let fallback = reports.iter().all(|r| r.infinite);
    let chosen = if fallback {
        (1..grid.len()).fold(0, |best, i| if reports[i].numerator_regret < reports[best].numerator_regret { i } else { best })
    } else {
        (1..grid.len()).fold(0, |best, i| if better(&reports[i], &reports[best]) { i } else { best })
    };
    Ok(MinStep {
        candidates_min: cand,
        grid,
        reports,
        chosen,
        fallback,
    })
}

fn weights_of(x: &[usize], g: usize) -> Vec<f64> {
    x.iter().map(|&c| c as f64 / g as f64).collect()
}

fn two_step(belief: &Belief<TabularZeroSumMG>, target: &Target, cfg: &AlgorithmConfig, seed: u64) -> Result<EpisodePolicyPair> {
    let g = cfg.mixture_grid;
    let a = max_step(belief, target, cfg, seed)?;
    let mu_weights = weights_of(&a.grid[a.chosen], g);
    let mu_mix = PolicyMixture::new(mu_weights.clone(), a.candidates_max.clone())?;
    let mu = mu_mix.realize(derive_seed(seed, REALIZE_MAX_TAG)).clone();
    let b = min_step(belief, target, cfg, &mu, seed)?;
    let nu_weights = weights_of(&b.grid[b.chosen], g);
    let nu_mix = PolicyMixture::new(nu_weights.clone(), b.candidates_min.clone())?;
    let nu = nu_mix.realize(derive_seed(seed, REALIZE_MIN_TAG)).clone();
    let w = &a.worst[a.chosen];
    Ok(EpisodePolicyPair {
        mu,
        nu,
        diagnostics: SelectionDiagnostics {
            objective: Some(w.ratio),
            numerator: Some(w.numerator_regret),
            information: Some(w.denominator_mi),
            marginal_ratio: Some(b.reports[b.chosen].ratio),
            fallback: a.fallback || b.fallback,
            mu_weights,
            nu_weights,
            ..Default::default()
        },
    })
}

fn mc_spec(cfg: &AlgorithmConfig, seed: u64) -> McSpec {
    McSpec {
        samples: cfg.mc_samples,
        seed: derive_seed(seed, MC_TAG),
    }
}

pub fn maids_select(belief: &Belief<TabularZeroSumMG>, cfg: &AlgorithmConfig, rng_seed: u64) -> Result<EpisodePolicyPair> {
    let target = Target::full(belief, mc_spec(cfg, rng_seed))?;
    two_step(belief, &target, cfg, rng_seed)
}

pub fn compressed_maids_select(belief: &Belief<TabularZeroSumMG>, cfg: &AlgorithmConfig, partition: &Partition, rng_seed: u64) -> Result<EpisodePolicyPair> {
    let target = Target::compressed(belief, partition, mc_spec(cfg, rng_seed))?;
    two_step(belief, &target, cfg, rng_seed)
}

/// The max step of [`maids_select`], for inspection.
pub fn maids_max_step(belief: &Belief<TabularZeroSumMG>, cfg: &AlgorithmConfig, rng_seed: u64) -> Result<MaxStep> {
    let target = Target::full(belief, mc_spec(cfg, rng_seed))?;
    max_step(belief, &target, cfg, rng_seed)
}

/// The min step of [`maids_select`] for a given realized `mu`.
pub fn maids_min_step(belief: &Belief<TabularZeroSumMG>, cfg: &AlgorithmConfig, mu: &MarkovPolicy, rng_seed: u64) -> Result<MinStep> {
    let target = Target::full(belief, mc_spec(cfg, rng_seed))?;
    min_step(belief, &target, cfg, mu, rng_seed)
}

/// Dispatches on `cfg.algorithm`. `cfg` must already carry its schedule.
pub fn select(belief: &Belief<TabularZeroSumMG>, cfg: &AlgorithmConfig, partition: Option<&Partition>, rng_seed: u64) -> Result<EpisodePolicyPair> {
    match cfg.algorithm {
        AlgorithmKind::Maids => maids_select(belief, cfg, rng_seed),
        AlgorithmKind::RegMaids => reg_maids_select(belief, cfg),
        AlgorithmKind::CompressedMaids => match partition {
            Some(p) => compressed_maids_select(belief, cfg, p, rng_seed),
            None => invalid("the compressed algorithm needs a partition"),
        },
        AlgorithmKind::ThompsonSampling => ts_select(belief, rng_seed),
        AlgorithmKind::UniformRandom => Ok(uniform_baseline(belief.template().dims(), rng_seed)),
    }
}
