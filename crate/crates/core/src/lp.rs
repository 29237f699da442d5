//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Sized for the tiny programs this crate produces (stage games, CCE
//! feasibility over a few hundred pure profiles). Ties in the ratio test go
//! to the lowest basic-variable index, so results are reproducible.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `maximize cᵀx` subject to linear rows and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One shadow price per constraint row, in insertion order.
    pub duals: Vec<f64>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width");
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    t: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_artificial: Vec<bool>,
    unit_col: Vec<usize>,
    row_sign: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.objective.len();
        let mut extra = 0;
        for row in &lp.rows {
            let rel = normalized_relation(row);
            extra += match rel {
                Relation::Le | Relation::Eq => 1,
                Relation::Ge => 2,
            };
        }
        let ncols = n + extra;
        let mut t = vec![vec![0.0; ncols]; m];
        let mut b = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut is_artificial = vec![false; ncols];
        let mut unit_col = vec![0; m];
        let mut row_sign = vec![1.0; m];
        let mut next = n;
        for (i, row) in lp.rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = sign;
            for (j, &c) in row.coeffs.iter().enumerate() {
                t[i][j] = sign * c;
            }
            b[i] = sign * row.rhs;
            match normalized_relation(row) {
                Relation::Le => {
                    t[i][next] = 1.0;
                    basis[i] = next;
                    unit_col[i] = next;
                    next += 1;
                }
                Relation::Eq => {
                    t[i][next] = 1.0;
                    is_artificial[next] = true;
                    basis[i] = next;
                    unit_col[i] = next;
                    next += 1;
                }
                Relation::Ge => {
                    t[i][next] = -1.0;
                    t[i][next + 1] = 1.0;
                    is_artificial[next + 1] = true;
                    basis[i] = next + 1;
                    unit_col[i] = next + 1;
                    next += 2;
                }
            }
        }
        Self {
            m,
            n,
            ncols,
            t,
            b,
            basis,
            is_artificial,
            unit_col,
            row_sign,
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut z = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (zj, tij) in z.iter_mut().zip(&self.t[i]) {
                    *zj -= cb * tij;
                }
            }
        }
        z
    }

    fn pivot(&mut self, r: usize, e: usize, z: &mut [f64]) {
        let p = self.t[r][e];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        self.b[r] /= p;
        let pivot_row = self.t[r].clone();
        let pivot_b = self.b[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i][e];
            if f != 0.0 {
                for (v, pv) in self.t[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.t[i][e] = 0.0;
                self.b[i] -= f * pivot_b;
                if self.b[i] < 0.0 && self.b[i] > -1e-13 {
                    self.b[i] = 0.0;
                }
            }
        }
        let f = z[e];
        if f != 0.0 {
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            z[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Bland's rule iterations; `allowed` masks columns that may enter.
    fn optimize(&mut self, z: &mut [f64], allowed: &[bool]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.ncols).find(|&j| allowed[j] && z[j] > PIVOT_EPS);
            let Some(e) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i][e];
                if a > PIVOT_EPS {
                    let ratio = self.b[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, e, z);
        }
        Err(Error::InvalidArgument("simplex pivot limit reached".into()))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let has_artificial = self.is_artificial.iter().any(|&a| a);
        if has_artificial {
            let cost: Vec<f64> = self
                .is_artificial
                .iter()
                .map(|&a| if a { -1.0 } else { 0.0 })
                .collect();
            let mut z = self.reduced_costs(&cost);
            let allowed = vec![true; self.ncols];
            self.optimize(&mut z, &allowed)?;
            let infeasibility: f64 = (0..self.m)
                .filter(|&i| self.is_artificial[self.basis[i]])
                .map(|i| self.b[i])
                .sum();
            if infeasibility > 1e-9 {
                return Err(Error::Infeasible);
            }
            // Drive zero-level artificials out where a structural pivot exists.
            for r in 0..self.m {
                if self.is_artificial[self.basis[r]] {
                    if let Some(e) = (0..self.ncols)
                        .find(|&j| !self.is_artificial[j] && self.t[r][j].abs() > 1e-9)
                    {
                        let mut dummy = vec![0.0; self.ncols];
                        self.pivot(r, e, &mut dummy);
                    }
                }
            }
        }

        let mut cost = vec![0.0; self.ncols];
        cost[..self.n].copy_from_slice(&lp.objective);
        let mut z = self.reduced_costs(&cost);
        let allowed: Vec<bool> = self.is_artificial.iter().map(|&a| !a).collect();
        self.optimize(&mut z, &allowed)?;

        let mut x = vec![0.0; self.n];
        for i in 0..self.m {
            if self.basis[i] < self.n {
                x[self.basis[i]] = self.b[i].max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let duals = (0..self.m)
            .map(|i| {
                let col = self.unit_col[i];
                let y: f64 = (0..self.m).map(|k| cost[self.basis[k]] * self.t[k][col]).sum();
                y * self.row_sign[i]
            })
            .collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
        })
    }
}

fn normalized_relation(row: &Row) -> Relation {
    if row.rhs < 0.0 {
        match row.relation {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    } else {
        row.relation
    }
}
