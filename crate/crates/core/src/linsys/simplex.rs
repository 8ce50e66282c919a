//! Exact two-phase simplex over rationals.
//!
//! Dense tableau, Bland's rule (smallest-index entering and leaving), so the
//! method terminates without any perturbation. All arithmetic is exact; a bit
//! budget aborts runs whose intermediate rationals grow past the configured
//! width instead of silently thrashing.

use crate::kernel::{rat_bits, Rat};
use num_traits::{One, Signed, Zero};

/// Row sense for a standard-form LP (strict relations never reach this layer).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpRel {
    Le,
    Eq,
}

/// `maximize c.y` subject to `A y (<=|=) b`, `y >= 0`.
pub(crate) struct StandardLp {
    pub a: Vec<Vec<Rat>>,
    pub b: Vec<Rat>,
    pub rel: Vec<LpRel>,
    pub c: Vec<Rat>,
}

#[derive(Debug)]
pub(crate) enum LpOutcome {
    Optimal { y: Vec<Rat>, value: Rat },
    Infeasible,
    Unbounded,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LinError {
    #[error("row {0} has {1} coefficients, expected {2}")]
    RowWidth(usize, usize, usize),
    #[error("intermediate rationals reached {bits} bits, over the budget of {budget}; raise MFI_RAT_BIT_BUDGET to proceed")]
    BitBudgetExceeded { bits: u64, budget: u64 },
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("internal solver invariant violated: {0}")]
    Internal(&'static str),
}

const PIVOT_LIMIT: usize = 200_000;

/// Widest rational allowed in a tableau, in total numerator+denominator bits.
pub fn bit_budget() -> u64 {
    std::env::var("MFI_RAT_BIT_BUDGET")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(4096)
}

struct Tableau {
    ncols: usize,
    rows: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    basis: Vec<usize>,
    obj: Vec<Rat>,
    obj_val: Rat,
    allowed: Vec<bool>,
    budget: u64,
    pivots: usize,
}

impl Tableau {
    fn check_budget(&self) -> Result<(), LinError> {
        let mut worst = 0u64;
        for row in self.rows.iter().chain(std::iter::once(&self.obj)) {
            for v in row {
                worst = worst.max(rat_bits(v));
            }
        }
        for v in &self.rhs {
            worst = worst.max(rat_bits(v));
        }
        if worst > self.budget {
            Err(LinError::BitBudgetExceeded {
                bits: worst,
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    fn pivot(&mut self, r: usize, e: usize) -> Result<(), LinError> {
        self.pivots += 1;
        if self.pivots > PIVOT_LIMIT {
            return Err(LinError::IterationLimit(PIVOT_LIMIT));
        }
        let inv = self.rows[r][e]
            .clone()
            .recip();
        for v in self.rows[r].iter_mut() {
            *v *= &inv;
        }
        self.rhs[r] *= &inv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][e].is_zero() {
                continue;
            }
            let factor = self.rows[i][e].clone();
            for j in 0..self.ncols {
                let delta = &factor * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= &factor * &pivot_rhs;
        }
        if !self.obj[e].is_zero() {
            let factor = self.obj[e].clone();
            for j in 0..self.ncols {
                let delta = &factor * &pivot_row[j];
                self.obj[j] -= delta;
            }
            self.obj_val += &factor * &pivot_rhs;
        }
        self.basis[r] = e;
        if self.pivots % 8 == 0 {
            self.check_budget()?;
        }
        Ok(())
    }

    /// Run Bland iterations until optimal or unbounded. Returns false when
    /// the objective is unbounded above.
    fn optimize(&mut self) -> Result<bool, LinError> {
        loop {
            let entering = (0..self.ncols)
                .find(|&j| self.allowed[j] && self.obj[j].is_positive());
            let e = match entering {
                Some(e) => e,
                None => return Ok(true),
            };
            let mut leave: Option<usize> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][e].is_positive() {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let cand = &self.rhs[i] / &self.rows[i][e];
                        let best = &self.rhs[l] / &self.rows[l][e];
                        cand < best || (cand == best && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leave = Some(i);
                }
            }
            match leave {
                Some(r) => self.pivot(r, e)?,
                None => return Ok(false),
            }
        }
    }
}

/// Solve a standard-form LP exactly.
pub(crate) fn solve_lp(lp: &StandardLp, budget: u64) -> Result<LpOutcome, LinError> {
    let n = lp.c.len();
    let m = lp.a.len();
    for (i, row) in lp.a.iter().enumerate() {
        if row.len() != n {
            return Err(LinError::RowWidth(i, row.len(), n));
        }
    }

    // Normalize to nonnegative rhs; a flipped Le becomes Ge (surplus column).
    #[derive(Clone, Copy, PartialEq)]
    enum Sense {
        Le,
        Ge,
        Eq,
    }
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rat> = Vec::with_capacity(m);
    let mut sense: Vec<Sense> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = lp.a[i].clone();
        let mut b = lp.b[i].clone();
        let mut s = match lp.rel[i] {
            LpRel::Le => Sense::Le,
            LpRel::Eq => Sense::Eq,
        };
        if b.is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
            b = -b;
            s = match s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        rows.push(row);
        rhs.push(b);
        sense.push(s);
    }

    // Column layout: structural | one slack/surplus per inequality | one
    // artificial per Ge/Eq row.
    let n_slack = sense.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = sense.iter().filter(|s| **s != Sense::Le).count();
    let ncols = n + n_slack + n_art;
    let mut full_rows = vec![vec![Rat::zero(); ncols]; m];
    let mut basis = vec![usize::MAX; m];
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    let mut art_cols = Vec::new();
    for i in 0..m {
        full_rows[i][..n].clone_from_slice(&rows[i]);
        match sense[i] {
            Sense::Le => {
                full_rows[i][slack_at] = Rat::one();
                basis[i] = slack_at;
                slack_at += 1;
            }
            Sense::Ge => {
                full_rows[i][slack_at] = -Rat::one();
                slack_at += 1;
                full_rows[i][art_at] = Rat::one();
                basis[i] = art_at;
                art_cols.push(art_at);
                art_at += 1;
            }
            Sense::Eq => {
                full_rows[i][art_at] = Rat::one();
                basis[i] = art_at;
                art_cols.push(art_at);
                art_at += 1;
            }
        }
    }

    // Phase 1: maximize -(sum of artificials); feasible iff the optimum is 0.
    let mut obj = vec![Rat::zero(); ncols];
    let mut obj_val = Rat::zero();
    for &c in &art_cols {
        obj[c] = -Rat::one();
    }
    for i in 0..m {
        if art_cols.binary_search(&basis[i]).is_ok() {
            for j in 0..ncols {
                let add = full_rows[i][j].clone();
                obj[j] += add;
            }
            obj_val -= &rhs[i];
        }
    }
    let mut t = Tableau {
        ncols,
        rows: full_rows,
        rhs,
        basis,
        obj,
        obj_val,
        allowed: vec![true; ncols],
        budget,
        pivots: 0,
    };
    if !t.optimize()? {
        return Err(LinError::Internal("phase 1 unbounded"));
    }
    if t.obj_val.is_negative() {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive basic artificials out or drop their (redundant) rows.
    let is_art = |j: usize| j >= n + n_slack;
    let mut drop_rows = Vec::new();
    for i in 0..t.rows.len() {
        if !is_art(t.basis[i]) {
            continue;
        }
        match (0..n + n_slack).find(|&j| !t.rows[i][j].is_zero()) {
            Some(j) => t.pivot(i, j)?,
            None => drop_rows.push(i),
        }
    }
    for &i in drop_rows.iter().rev() {
        t.rows.remove(i);
        t.rhs.remove(i);
        t.basis.remove(i);
    }
    for j in n + n_slack..ncols {
        t.allowed[j] = false;
    }

    // Phase 2: real objective, rebuilt against the current basis.
    t.obj = vec![Rat::zero(); ncols];
    t.obj_val = Rat::zero();
    t.obj[..n].clone_from_slice(&lp.c);
    for i in 0..t.rows.len() {
        let bj = t.basis[i];
        if t.obj[bj].is_zero() {
            continue;
        }
        let factor = t.obj[bj].clone();
        for j in 0..ncols {
            let delta = &factor * &t.rows[i][j];
            t.obj[j] -= delta;
        }
        t.obj_val += &factor * &t.rhs[i];
    }
    if !t.optimize()? {
        return Ok(LpOutcome::Unbounded);
    }
    t.check_budget()?;

    let mut y = vec![Rat::zero(); n];
    for i in 0..t.rows.len() {
        if t.basis[i] < n {
            y[t.basis[i]] = t.rhs[i].clone();
        }
    }
    Ok(LpOutcome::Optimal {
        y,
        value: t.obj_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rat, rat_int};

    fn lp(a: Vec<Vec<Rat>>, b: Vec<Rat>, rel: Vec<LpRel>, c: Vec<Rat>) -> StandardLp {
        StandardLp { a, b, rel, c }
    }

    #[test]
    fn two_variable_optimum_at_vertex() {
        // max x+y, x+2y <= 4, 3x+y <= 6: optimum 14/5 at (8/5, 6/5).
        let out = solve_lp(
            &lp(
                vec![vec![rat_int(1), rat_int(2)], vec![rat_int(3), rat_int(1)]],
                vec![rat_int(4), rat_int(6)],
                vec![LpRel::Le, LpRel::Le],
                vec![rat_int(1), rat_int(1)],
            ),
            4096,
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { y, value } => {
                assert_eq!(value, rat(14, 5));
                assert_eq!(y, vec![rat(8, 5), rat(6, 5)]);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn equality_rows_respected() {
        // max x, x + y = 1, y >= 0 forces x <= 1.
        let out = solve_lp(
            &lp(
                vec![vec![rat_int(1), rat_int(1)]],
                vec![rat_int(1)],
                vec![LpRel::Eq],
                vec![rat_int(1), rat_int(0)],
            ),
            4096,
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { y, value } => {
                assert_eq!(value, rat_int(1));
                assert_eq!(y[0], rat_int(1));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_becomes_ge_row() {
        // -x <= -2 means x >= 2; maximize -x so the optimum sits at x = 2.
        let out = solve_lp(
            &lp(
                vec![vec![rat_int(-1)]],
                vec![rat_int(-2)],
                vec![LpRel::Le],
                vec![rat_int(-1)],
            ),
            4096,
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { y, value } => {
                assert_eq!(y, vec![rat_int(2)]);
                assert_eq!(value, rat_int(-2));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn infeasible_detected() {
        // x <= 1 and x >= 2.
        let out = solve_lp(
            &lp(
                vec![vec![rat_int(1)], vec![rat_int(-1)]],
                vec![rat_int(1), rat_int(-2)],
                vec![LpRel::Le, LpRel::Le],
                vec![rat_int(0)],
            ),
            4096,
        )
        .unwrap();
        assert!(matches!(out, LpOutcome::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let out = solve_lp(
            &lp(
                vec![vec![rat_int(-1)]],
                vec![rat_int(0)],
                vec![LpRel::Le],
                vec![rat_int(1)],
            ),
            4096,
        )
        .unwrap();
        assert!(matches!(out, LpOutcome::Unbounded));
    }

    #[test]
    fn beale_cycling_instance_terminates() {
        // Beale's classic cycling instance; Bland's rule must terminate at
        // objective value 1/20.
        let out = solve_lp(
            &lp(
                vec![
                    vec![rat(1, 4), rat_int(-60), rat(-1, 25), rat_int(9)],
                    vec![rat(1, 2), rat_int(-90), rat(-1, 50), rat_int(3)],
                    vec![rat_int(0), rat_int(0), rat_int(1), rat_int(0)],
                ],
                vec![rat_int(0), rat_int(0), rat_int(1)],
                vec![LpRel::Le, LpRel::Le, LpRel::Le],
                vec![rat(3, 4), rat_int(-150), rat(1, 50), rat_int(-6)],
            ),
            4096,
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, rat(1, 20)),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn bit_budget_enforced() {
        // A tiny budget trips immediately on any nontrivial pivot.
        let err = solve_lp(
            &lp(
                vec![vec![rat(123456789, 987654321), rat_int(2)]],
                vec![rat_int(4)],
                vec![LpRel::Le],
                vec![rat_int(1), rat_int(1)],
            ),
            8,
        )
        .unwrap_err();
        assert!(matches!(err, LinError::BitBudgetExceeded { .. }));
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // Duplicate equality rows leave a redundant artificial basic at zero.
        let out = solve_lp(
            &lp(
                vec![
                    vec![rat_int(1), rat_int(1)],
                    vec![rat_int(1), rat_int(1)],
                    vec![rat_int(1), rat_int(-1)],
                ],
                vec![rat_int(2), rat_int(2), rat_int(0)],
                vec![LpRel::Eq, LpRel::Eq, LpRel::Eq],
                vec![rat_int(1), rat_int(0)],
            ),
            4096,
        )
        .unwrap();
        match out {
            LpOutcome::Optimal { y, value } => {
                assert_eq!(value, rat_int(1));
                assert_eq!(y, vec![rat_int(1), rat_int(1)]);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }
}
