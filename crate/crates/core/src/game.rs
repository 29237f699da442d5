//! Matrix-game minimax and finite normal-form equilibria.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::rng::{rng_from_seed, derive_seed};
use rand::Rng as _;

/// Row player maximizes, column player minimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    payoff: Vec<f64>,
}

impl MatrixGame {
    pub fn new(rows: usize, cols: usize, payoff: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("matrix game needs at least one row and one column");
        }
        if payoff.len() != rows * cols {
            return invalid(format!("payoff has {} entries, expected {}", payoff.len(), rows * cols));
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return invalid("payoff entries must be finite");
        }
        Ok(Self { rows, cols, payoff })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return invalid("ragged payoff matrix");
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.payoff[a * self.cols + b]
    }

    /// `min_b xᵀU(·,b)`.
    pub fn row_guarantee(&self, x: &[f64]) -> f64 {
        (0..self.cols)
            .map(|b| (0..self.rows).map(|a| x[a] * self.get(a, b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_a U(a,·)y`.
    pub fn col_guarantee(&self, y: &[f64]) -> f64 {
        (0..self.rows)
            .map(|a| (0..self.cols).map(|b| y[b] * self.get(a, b)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSolution {
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
}

fn clean_distribution(v: &mut [f64]) {
    for p in v.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let z: f64 = v.iter().sum();
    for p in v.iter_mut() {
        *p /= z;
    }
}

/// Solves the game with one LP: after shifting payoffs to be at least 1,
/// `max Σy s.t. U'y ≤ 1` gives the column strategy and its duals give the row
/// strategy.
pub fn minimax_solve(g: &MatrixGame) -> Result<MinimaxSolution> {
    let lo = g.payoff.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - lo;
    let mut lp = LinearProgram::maximize(vec![1.0; g.cols]);
    for a in 0..g.rows {
        let coeffs = (0..g.cols).map(|b| g.get(a, b) + shift).collect();
        lp.add_constraint(coeffs, Relation::Le, 1.0);
    }
    let sol = lp.solve()?;
    let shifted_value = 1.0 / sol.objective;
    let mut col: Vec<f64> = sol.x.iter().map(|y| y * shifted_value).collect();
    let mut row: Vec<f64> = sol.duals.iter().map(|x| x * shifted_value).collect();
    clean_distribution(&mut col);
    clean_distribution(&mut row);
    Ok(MinimaxSolution {
        row_strategy: row,
        col_strategy: col,
        value: shifted_value - shift,
    })
}

/// Finite game with payoffs indexed by pure profile (player 0 most
/// significant in the mixed-radix profile index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormGame {
    strategy_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl NormalFormGame {
    pub fn new(strategy_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if strategy_counts.is_empty() || strategy_counts.contains(&0) {
            return invalid("every player needs at least one strategy");
        }
        if payoffs.len() != strategy_counts.len() {
            return invalid("one payoff table per player");
        }
        let n: usize = strategy_counts.iter().product();
        if payoffs.iter().any(|u| u.len() != n || u.iter().any(|v| !v.is_finite())) {
            return invalid(format!("payoff tables must have {n} finite entries"));
        }
        Ok(Self {
            strategy_counts,
            payoffs,
        })
    }

    pub fn num_players(&self) -> usize {
        self.strategy_counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.strategy_counts
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs[0].len()
    }

    pub fn payoff(&self, player: usize, profile: usize) -> f64 {
        self.payoffs[player][profile]
    }

    pub fn profile_index(&self, strategies: &[usize]) -> usize {
        strategies
            .iter()
            .zip(&self.strategy_counts)
            .fold(0, |acc, (&s, &n)| acc * n + s)
    }

    pub fn profile(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.strategy_counts.len()];
        for (i, &n) in self.strategy_counts.iter().enumerate().rev() {
            out[i] = index % n;
            index /= n;
        }
        out
    }

    fn with_strategy(&self, profile: usize, player: usize, strategy: usize) -> usize {
        let mut p = self.profile(profile);
        p[player] = strategy;
        self.profile_index(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDistribution {
    pub marginals: Vec<Vec<f64>>,
}

impl ProductDistribution {
    pub fn to_joint(&self, g: &NormalFormGame) -> JointDistribution {
        let probs = (0..g.num_profiles())
            .map(|k| {
                g.profile(k)
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| self.marginals[i][s])
                    .product()
            })
            .collect();
        JointDistribution { probs }
    }
}

/// Gain of each player's best fixed pure deviation against a joint
/// distribution.
pub fn cce_gaps(g: &NormalFormGame, pi: &JointDistribution) -> Vec<f64> {
    (0..g.num_players())
        .map(|i| {
            let current: f64 = (0..g.num_profiles()).map(|k| pi.probs[k] * g.payoff(i, k)).sum();
            let best = (0..g.strategy_counts[i])
                .map(|d| {
                    (0..g.num_profiles())
                        .map(|k| pi.probs[k] * g.payoff(i, g.with_strategy(k, i, d)))
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            best - current
        })
        .collect()
}

/// Unilateral deviation gains for a product profile.
pub fn ne_gaps(g: &NormalFormGame, pi: &ProductDistribution) -> Vec<f64> {
    cce_gaps(g, &pi.to_joint(g))
}

/// Welfare-maximizing coarse correlated equilibrium.
///
/// Welfare is shifted to be strictly positive so the optimum saturates
/// `Σp ≤ 1`; the all-zero point is feasible, so no phase one is needed.
pub fn cce_solve(g: &NormalFormGame) -> Result<JointDistribution> {
    let np = g.num_profiles();
    if np == 1 {
        return Ok(JointDistribution { probs: vec![1.0] });
    }
    let welfare: Vec<f64> = (0..np)
        .map(|k| (0..g.num_players()).map(|i| g.payoff(i, k)).sum())
        .collect();
    let lo = welfare.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lp = LinearProgram::maximize(welfare.iter().map(|w| w - lo + 1.0).collect());
    for i in 0..g.num_players() {
        for d in 0..g.strategy_counts[i] {
            let coeffs = (0..np)
                .map(|k| g.payoff(i, g.with_strategy(k, i, d)) - g.payoff(i, k))
                .collect();
            lp.add_constraint(coeffs, Relation::Le, 0.0);
        }
    }
    lp.add_constraint(vec![1.0; np], Relation::Le, 1.0);
    let sol = lp.solve()?;
    let mut probs = sol.x;
    clean_distribution(&mut probs);
    Ok(JointDistribution { probs })
}

/// Nash equilibrium of a normal-form game.
///
/// Two players: support enumeration, smallest supports first. Three or more:
/// pure equilibria first, then fictitious play with seeded restarts.
pub fn ne_solve(g: &NormalFormGame) -> Result<ProductDistribution> {
    ne_solve_with(g, NeOptions::default())
}

#[derive(Debug, Clone, Copy)]
pub struct NeOptions {
    pub tolerance: f64,
    pub max_support_pairs: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_support_pairs: 200_000,
            iterations: 20_000,
            restarts: 8,
            seed: 0,
        }
    }
}

pub fn ne_solve_with(g: &NormalFormGame, opts: NeOptions) -> Result<ProductDistribution> {
    if let Some(p) = pure_nash(g, opts.tolerance) {
        return Ok(p);
    }
    match g.num_players() {
        1 => unreachable!("a one-player game always has a pure optimum"),
        2 => support_enumeration(g, opts),
        _ => fictitious_play(g, opts),
    }
}

fn point_mass(g: &NormalFormGame, profile: &[usize]) -> ProductDistribution {
    ProductDistribution {
        marginals: profile
            .iter()
            .zip(g.strategy_counts())
            .map(|(&s, &n)| {
                let mut m = vec![0.0; n];
                m[s] = 1.0;
                m
            })
            .collect(),
    }
}

fn pure_nash(g: &NormalFormGame, tol: f64) -> Option<ProductDistribution> {
    (0..g.num_profiles()).find_map(|k| {
        let stable = (0..g.num_players()).all(|i| {
            let u = g.payoff(i, k);
            (0..g.strategy_counts[i]).all(|d| g.payoff(i, g.with_strategy(k, i, d)) <= u + tol)
        });
        stable.then(|| point_mass(g, &g.profile(k)))
    })
}

/// Next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Support pairs by total size, then size imbalance, then lexicographic.
fn support_pairs(n1: usize, n2: usize) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> {
    (2..=n1 + n2).flat_map(move |t| {
        let mut sizes: Vec<(usize, usize)> = (1..=n1).filter(|&k1| t > k1 && t - k1 <= n2).map(|k1| (k1, t - k1)).collect();
        sizes.sort_by_key(|&(k1, k2)| (k1.abs_diff(k2), k1));
        sizes.into_iter().flat_map(move |(k1, k2)| {
            let mut a: Vec<usize> = (0..k1).collect();
            let mut first_a = true;
            std::iter::from_fn(move || {
                if !first_a && !next_combination(&mut a, n1) {
                    return None;
                }
                first_a = false;
                Some(a.clone())
            })
            .flat_map(move |si| {
                let mut b: Vec<usize> = (0..k2).collect();
                let mut first_b = true;
                std::iter::from_fn(move || {
                    if !first_b && !next_combination(&mut b, n2) {
                        return None;
                    }
                    first_b = false;
                    Some((si.clone(), b.clone()))
                })
            })
        })
    })
}

fn support_enumeration(g: &NormalFormGame, opts: NeOptions) -> Result<ProductDistribution> {
    let (n1, n2) = (g.strategy_counts[0], g.strategy_counts[1]);
    let lo = g.payoffs.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let u = |i: usize, a: usize, b: usize| g.payoff(i, a * n2 + b) - lo + 1.0;
    let mut tried = 0;
    let mut best_gap = f64::INFINITY;
    for (si, sj) in support_pairs(n1, n2) {
        tried += 1;
        if tried > opts.max_support_pairs {
            break;
        }
        let (si, sj) = (&si, &sj);
        // Variables: x over si, y over sj, v1, v2.
        let nv = si.len() + sj.len() + 2;
        let (iv1, iv2) = (nv - 2, nv - 1);
        let mut lp = LinearProgram::maximize(vec![0.0; nv]);
        let mut row = vec![0.0; nv];
        row[..si.len()].fill(1.0);
        lp.add_constraint(row, Relation::Eq, 1.0);
        let mut row = vec![0.0; nv];
        row[si.len()..si.len() + sj.len()].fill(1.0);
        lp.add_constraint(row, Relation::Eq, 1.0);
        for a in 0..n1 {
            let mut row = vec![0.0; nv];
            for (k, &b) in sj.iter().enumerate() {
                row[si.len() + k] = u(0, a, b);
            }
            row[iv1] = -1.0;
            let rel = if si.contains(&a) { Relation::Eq } else { Relation::Le };
            lp.add_constraint(row, rel, 0.0);
        }
        for b in 0..n2 {
            let mut row = vec![0.0; nv];
            for (k, &a) in si.iter().enumerate() {
                row[k] = u(1, a, b);
            }
            row[iv2] = -1.0;
            let rel = if sj.contains(&b) { Relation::Eq } else { Relation::Le };
            lp.add_constraint(row, rel, 0.0);
        }
        let Ok(sol) = lp.solve() else { continue };
        let mut x = vec![0.0; n1];
        let mut y = vec![0.0; n2];
        for (k, &a) in si.iter().enumerate() {
            x[a] = sol.x[k];
        }
        for (k, &b) in sj.iter().enumerate() {
            y[b] = sol.x[si.len() + k];
        }
        clean_distribution(&mut x);
        clean_distribution(&mut y);
        let p = ProductDistribution { marginals: vec![x, y] };
        let gap = ne_gaps(g, &p).into_iter().fold(f64::NEG_INFINITY, f64::max);
        if gap <= opts.tolerance {
            return Ok(p);
        }
        best_gap = best_gap.min(gap);
    }
    Err(Error::ConvergenceFailure { best_gap })
}

fn fictitious_play(g: &NormalFormGame, opts: NeOptions) -> Result<ProductDistribution> {
    let n = g.num_players();
    let mut best_gap = f64::INFINITY;
    for restart in 0..opts.restarts {
        let mut rng = rng_from_seed(derive_seed(opts.seed, restart as u64));
        let mut counts: Vec<Vec<f64>> = g
            .strategy_counts
            .iter()
            .map(|&k| (0..k).map(|_| rng.random::<f64>()).collect())
            .collect();
        for _ in 0..opts.iterations {
            let p = ProductDistribution {
                marginals: counts
                    .iter()
                    .map(|c| {
                        let z: f64 = c.iter().sum();
                        c.iter().map(|v| v / z).collect()
                    })
                    .collect(),
            };
            let joint = p.to_joint(g);
            for i in 0..n {
                let br = (0..g.strategy_counts[i])
                    .map(|d| {
                        (0..g.num_profiles())
                            .map(|k| joint.probs[k] * g.payoff(i, g.with_strategy(k, i, d)))
                            .sum::<f64>()
                    })
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (d, v)| if v > acc.1 { (d, v) } else { acc })
                    .0;
                counts[i][br] += 1.0;
            }
        }
        let p = ProductDistribution {
            marginals: counts
                .iter()
                .map(|c| {
                    let z: f64 = c.iter().sum();
                    c.iter().map(|v| v / z).collect()
                })
                .collect(),
        };
        let gap = ne_gaps(g, &p).into_iter().fold(f64::NEG_INFINITY, f64::max);
        if gap <= opts.tolerance {
            return Ok(p);
        }
        best_gap = best_gap.min(gap);
    }
    Err(Error::ConvergenceFailure { best_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_value(g: &MatrixGame, step: f64) -> f64 {
        // Exhaustive row-simplex grid for up to three rows.
        assert!(g.rows() <= 3);
        let n = (1.0 / step).round() as usize;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let mut x = vec![i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                x.truncate(g.rows());
                if g.rows() == 2 && i + j != n {
                    continue;
                }
                best = best.max(g.row_guarantee(&x));
            }
        }
        best
    }

    #[test]
    fn single_entry_and_matching_pennies() {
        let g = MatrixGame::from_rows(&[vec![0.3]]).unwrap();
        assert!((minimax_solve(&g).unwrap().value - 0.3).abs() < 1e-12);
        let g = MatrixGame::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let s = minimax_solve(&g).unwrap();
        assert!(s.value.abs() < 1e-12);
        for p in s.row_strategy.iter().chain(&s.col_strategy) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn random_three_by_four_matches_grid() {
        let mut rng = rng_from_seed(11);
        for _ in 0..5 {
            let payoff: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
            let g = MatrixGame::new(3, 4, payoff).unwrap();
            let s = minimax_solve(&g).unwrap();
            let oracle = grid_value(&g, 1e-3);
            assert!((s.value - oracle).abs() < 2e-3, "{} vs {}", s.value, oracle);
            assert!(oracle <= s.value + 1e-12);
        }
    }

    #[test]
    fn cce_of_zero_sum_game_has_minimax_payoff() {
        let u = [vec![0.8, 0.1, 0.4], vec![0.2, 0.7, 0.5]];
        let mg = MatrixGame::from_rows(&u).unwrap();
        let v = minimax_solve(&mg).unwrap().value;
        let p1: Vec<f64> = u.concat();
        let p2: Vec<f64> = p1.iter().map(|x| 1.0 - x).collect();
        let g = NormalFormGame::new(vec![2, 3], vec![p1, p2]).unwrap();
        let cce = cce_solve(&g).unwrap();
        let pay: f64 = (0..6).map(|k| cce.probs[k] * g.payoff(0, k)).sum();
        assert!((pay - v).abs() < 1e-6);
        assert!(cce_gaps(&g, &cce).iter().all(|&d| d <= 1e-8));
        let ne = ne_solve(&g).unwrap();
        let pay: f64 = ne.to_joint(&g).probs.iter().enumerate().map(|(k, p)| p * g.payoff(0, k)).sum();
        assert!((pay - v).abs() < 1e-6);
    }

    #[test]
    fn dominant_profile_and_battle_of_sexes() {
        // Player 0 prefers strategy 1, player 1 prefers strategy 0, strictly.
        let g = NormalFormGame::new(
            vec![2, 2],
            vec![vec![0.0, 0.1, 0.5, 0.6], vec![0.9, 0.2, 0.8, 0.1]],
        )
        .unwrap();
        let ne = ne_solve(&g).unwrap();
        assert_eq!(ne.marginals, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let bos = NormalFormGame::new(
            vec![2, 2],
            vec![vec![2.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 2.0]],
        )
        .unwrap();
        let ne = ne_solve(&bos).unwrap();
        assert!(ne_gaps(&bos, &ne).iter().all(|&d| d <= 1e-6));
    }

    #[test]
    fn mixed_only_equilibrium_and_three_players() {
        // Matching pennies has no pure equilibrium.
        let g = NormalFormGame::new(
            vec![2, 2],
            vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]],
        )
        .unwrap();
        let ne = ne_solve(&g).unwrap();
        assert!((ne.marginals[0][0] - 0.5).abs() < 1e-9);

        // Coordination among three players has pure equilibria.
        let pay: Vec<f64> = (0..8).map(|k| if k == 0 || k == 7 { 1.0 } else { 0.0 }).collect();
        let g = NormalFormGame::new(vec![2, 2, 2], vec![pay.clone(), pay.clone(), pay]).unwrap();
        let ne = ne_solve(&g).unwrap();
        assert!(ne_gaps(&g, &ne).iter().all(|&d| d <= 1e-6));
    }

    #[test]
    fn support_pairs_cover_everything_smallest_first() {
        let all: Vec<_> = support_pairs(2, 3).collect();
        assert_eq!(all.len(), 3 * 7);
        assert_eq!(all[0], (vec![0], vec![0]));
        assert!(all.windows(2).all(|w| w[0].0.len() + w[0].1.len() <= w[1].0.len() + w[1].1.len()));
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
    }

    #[test]
    fn trivial_single_profile() {
        let g = NormalFormGame::new(vec![1, 1], vec![vec![0.4], vec![0.2]]).unwrap();
        assert_eq!(cce_solve(&g).unwrap().probs, vec![1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lp_duality_and_guarantees(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let payoff: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let g = MatrixGame::new(rows, cols, payoff).unwrap();
            let s = minimax_solve(&g).unwrap();
            let lower = g.row_guarantee(&s.row_strategy);
            let upper = g.col_guarantee(&s.col_strategy);
            prop_assert!(lower >= s.value - 1e-9);
            prop_assert!(upper <= s.value + 1e-9);
            prop_assert!((upper - lower).abs() <= 1e-8);
        }

        #[test]
        fn scale_shift_covariance(seed in any::<u64>(), alpha in 0.1f64..5.0, beta in -3.0f64..3.0) {
            let mut rng = rng_from_seed(seed);
            let payoff: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
            let g = MatrixGame::new(3, 3, payoff.clone()).unwrap();
            let h = MatrixGame::new(3, 3, payoff.iter().map(|v| alpha * v + beta).collect()).unwrap();
            let (s, t) = (minimax_solve(&g).unwrap(), minimax_solve(&h).unwrap());
            prop_assert!((t.value - (alpha * s.value + beta)).abs() < 1e-8);
            // Optimal strategies of g remain optimal in h.
            prop_assert!(h.row_guarantee(&s.row_strategy) >= t.value - 1e-8);
            prop_assert!(h.col_guarantee(&s.col_strategy) <= t.value + 1e-8);
        }

        #[test]
        fn cce_passes_deviation_check(seed in any::<u64>(), n1 in 1usize..4, n2 in 1usize..4) {
            let mut rng = rng_from_seed(seed);
            let np = n1 * n2;
            let u: Vec<Vec<f64>> = (0..2).map(|_| (0..np).map(|_| rng.random::<f64>()).collect()).collect();
            let g = NormalFormGame::new(vec![n1, n2], u).unwrap();
            let cce = cce_solve(&g).unwrap();
            prop_assert!((cce.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(cce_gaps(&g, &cce).iter().all(|&d| d <= 1e-8));
            let ne = ne_solve(&g).unwrap();
            prop_assert!(ne_gaps(&g, &ne).iter().all(|&d| d <= 1e-6));
        }
    }
}
