//! Mixed strict/non-strict rational linear systems and their feasibility
//! engine.
//!
//! A [`LinSystem`] is a list of rows `v . x (< | <= | =) a` over free rational
//! variables. [`solve`] decides feasibility exactly: strict rows are handled
//! by maximizing a shared slack variable `t` (the system is solvable iff the
//! optimum is positive), and every infeasible answer carries a multiplier
//! [`Certificate`] that can be replayed against the rows by hand.

mod simplex;

pub mod builders;
pub mod fold;

pub use builders::{build_system, SystemKind};
pub use fold::{distribute_and_fold, FoldMode, FoldOutput};
pub use simplex::{bit_budget, LinError};

use crate::kernel::{Rat, SubsetMask};
use num_traits::{One, Signed, Zero};
use simplex::{solve_lp, LpOutcome, LpRel, StandardLp};
use std::fmt;

/// Relation of one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// Strict upper bound `v . x < a`.
    Lt,
    /// Non-strict upper bound `v . x <= a`.
    Le,
    /// Equality `v . x = a`.
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
        }
    }
}

/// One row of a system. `label` names the row in dumps and reports; `subset`
/// optionally records which index set generated it.
#[derive(Clone, Debug)]
pub struct Row {
    pub label: String,
    pub subset: Option<SubsetMask>,
    pub coeffs: Vec<Rat>,
    pub rel: Relation,
    pub rhs: Rat,
}

/// A finite system of rows over named free variables.
#[derive(Clone, Debug, Default)]
pub struct LinSystem {
    pub vars: Vec<String>,
    pub rows: Vec<Row>,
}

impl LinSystem {
    pub fn new(vars: Vec<String>) -> Self {
        LinSystem {
            vars,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn push(
        &mut self,
        label: impl Into<String>,
        subset: Option<SubsetMask>,
        coeffs: Vec<Rat>,
        rel: Relation,
        rhs: Rat,
    ) {
        debug_assert_eq!(coeffs.len(), self.vars.len());
        self.rows.push(Row {
            label: label.into(),
            subset,
            coeffs,
            rel,
            rhs,
        });
    }

    fn validate(&self) -> Result<(), LinError> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != self.vars.len() {
                return Err(LinError::RowWidth(i, row.coeffs.len(), self.vars.len()));
            }
        }
        Ok(())
    }

    /// Value of each row's left side at `x`.
    pub fn eval(&self, x: &[Rat]) -> Vec<Rat> {
        self.rows
            .iter()
            .map(|row| {
                row.coeffs
                    .iter()
                    .zip(x)
                    .map(|(c, v)| c * v)
                    .fold(Rat::zero(), |acc, t| acc + t)
            })
            .collect()
    }

    /// Whether `x` satisfies every row, strict rows strictly.
    pub fn is_satisfied_by(&self, x: &[Rat]) -> bool {
        self.eval(x)
            .iter()
            .zip(&self.rows)
            .all(|(lhs, row)| match row.rel {
                Relation::Lt => lhs < &row.rhs,
                Relation::Le => lhs <= &row.rhs,
                Relation::Eq => lhs == &row.rhs,
            })
    }

    /// Multi-line plain-text rendering (one row per line), used by the CLI's
    /// system dump.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut terms = Vec::new();
            for (c, name) in row.coeffs.iter().zip(&self.vars) {
                if c.is_zero() {
                    continue;
                }
                let c_str = crate::kernel::format_rat(c);
                if c.is_one() {
                    terms.push(name.clone());
                } else {
                    terms.push(format!("{c_str}*{name}"));
                }
            }
            let lhs = if terms.is_empty() {
                "0".to_string()
            } else {
                terms.join(" + ")
            };
            out.push_str(&format!(
                "{:<28} {} {} {}\n",
                row.label,
                lhs,
                row.rel.symbol(),
                crate::kernel::format_rat(&row.rhs)
            ));
        }
        out
    }
}

impl fmt::Display for LinSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// What an infeasibility certificate claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateKind {
    /// Nonnegative multipliers with positive mass on at least one strict row
    /// combine the rows to `0 < 0` (right sides sum to at most zero).
    MixedStrict,
    /// Multipliers supported on non-strict rows alone combine to a negative
    /// right side: even the relaxed system is inconsistent.
    NonStrictSubsystem,
}

/// Row multipliers witnessing infeasibility. Inequality rows carry
/// nonnegative multipliers; equality rows may carry either sign.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub multipliers: Vec<Rat>,
}

impl Certificate {
    /// Replay the certificate against the system it was issued for.
    pub fn verify(&self, sys: &LinSystem) -> bool {
        if self.multipliers.len() != sys.rows.len() {
            return false;
        }
        let d = sys.num_vars();
        let mut combo = vec![Rat::zero(); d];
        let mut rhs = Rat::zero();
        let mut strict_mass = Rat::zero();
        for (lam, row) in self.multipliers.iter().zip(&sys.rows) {
            match row.rel {
                Relation::Eq => {}
                _ => {
                    if lam.is_negative() {
                        return false;
                    }
                }
            }
            if lam.is_zero() {
                continue;
            }
            for (j, c) in row.coeffs.iter().enumerate() {
                combo[j] += lam * c;
            }
            rhs += lam * &row.rhs;
            if row.rel == Relation::Lt {
                strict_mass += lam;
            }
        }
        if combo.iter().any(|c| !c.is_zero()) {
            return false;
        }
        match self.kind {
            CertificateKind::MixedStrict => strict_mass.is_positive() && !rhs.is_positive(),
            CertificateKind::NonStrictSubsystem => strict_mass.is_zero() && rhs.is_negative(),
        }
    }
}

/// Result of an exact feasibility decision.
#[derive(Clone, Debug)]
pub enum FeasibilityOutcome {
    /// A point satisfying every row, with the margin `min (a - v.x)` over
    /// strict rows (1 when there are none) and per-row slacks.
    Feasible {
        witness: Vec<Rat>,
        margin: Rat,
        slacks: Vec<Rat>,
    },
    Infeasible { certificate: Certificate },
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityOutcome::Feasible { .. })
    }
}

/// Decide feasibility of a mixed strict/non-strict system over free
/// variables.
pub fn solve(sys: &LinSystem) -> Result<FeasibilityOutcome, LinError> {
    solve_with_budget(sys, bit_budget())
}

/// [`solve`] with an explicit rational bit budget.
pub fn solve_with_budget(sys: &LinSystem, budget: u64) -> Result<FeasibilityOutcome, LinError> {
    sys.validate()?;
    let d = sys.num_vars();

    // Max-slack program over y = [x+ | x- | t]: strict rows get `+ t`, the
    // extra row `t <= 1` keeps it bounded, and we maximize t.
    let nvars = 2 * d + 1;
    let mut a = Vec::with_capacity(sys.rows.len() + 1);
    let mut b = Vec::with_capacity(sys.rows.len() + 1);
    let mut rel = Vec::with_capacity(sys.rows.len() + 1);
    for row in &sys.rows {
        let mut r = vec![Rat::zero(); nvars];
        for (j, c) in row.coeffs.iter().enumerate() {
            r[j] = c.clone();
            r[d + j] = -c.clone();
        }
        if row.rel == Relation::Lt {
            r[2 * d] = Rat::one();
        }
        a.push(r);
        b.push(row.rhs.clone());
        rel.push(match row.rel {
            Relation::Eq => LpRel::Eq,
            _ => LpRel::Le,
        });
    }
    let mut cap = vec![Rat::zero(); nvars];
    cap[2 * d] = Rat::one();
    a.push(cap);
    b.push(Rat::one());
    rel.push(LpRel::Le);
    let mut c = vec![Rat::zero(); nvars];
    c[2 * d] = Rat::one();

    match solve_lp(&StandardLp { a, b, rel, c }, budget)? {
        LpOutcome::Optimal { y, value } if value.is_positive() => {
            let witness: Vec<Rat> = (0..d).map(|j| &y[j] - &y[d + j]).collect();
            let slacks: Vec<Rat> = sys
                .eval(&witness)
                .iter()
                .zip(&sys.rows)
                .map(|(lhs, row)| &row.rhs - lhs)
                .collect();
            Ok(FeasibilityOutcome::Feasible {
                witness,
                margin: value,
                slacks,
            })
        }
        LpOutcome::Optimal { .. } => {
            // Relaxation feasible, strict system not: a strict-mass
            // certificate exists by duality.
            let certificate = mixed_strict_certificate(sys, budget)?
                .ok_or(LinError::Internal("dual search failed at zero margin"))?;
            Ok(FeasibilityOutcome::Infeasible { certificate })
        }
        LpOutcome::Infeasible => {
            // Even the non-strict relaxation is inconsistent. Prefer a
            // certificate over the non-strict rows alone when one exists.
            if let Some(certificate) = nonstrict_certificate(sys, budget)? {
                return Ok(FeasibilityOutcome::Infeasible { certificate });
            }
            let certificate = mixed_strict_certificate(sys, budget)?.ok_or(
                LinError::Internal("dual search failed on infeasible relaxation"),
            )?;
            Ok(FeasibilityOutcome::Infeasible { certificate })
        }
        LpOutcome::Unbounded => Err(LinError::Internal("capped slack reported unbounded")),
    }
}

/// Search for multipliers supported on non-strict rows with combination 0 and
/// negative right side (normalized to -1).
fn nonstrict_certificate(
    sys: &LinSystem,
    budget: u64,
) -> Result<Option<Certificate>, LinError> {
    let rows: Vec<usize> = (0..sys.rows.len())
        .filter(|&r| sys.rows[r].rel != Relation::Lt)
        .collect();
    dual_search(sys, &rows, &[], budget)
        .map(|m| m.map(|multipliers| Certificate {
            kind: CertificateKind::NonStrictSubsystem,
            multipliers,
        }))
}

/// Search for multipliers over all rows with combination 0, right side at
/// most 0, and strict mass normalized to 1.
fn mixed_strict_certificate(
    sys: &LinSystem,
    budget: u64,
) -> Result<Option<Certificate>, LinError> {
    let rows: Vec<usize> = (0..sys.rows.len()).collect();
    let strict: Vec<usize> = (0..sys.rows.len())
        .filter(|&r| sys.rows[r].rel == Relation::Lt)
        .collect();
    if strict.is_empty() {
        return Ok(None);
    }
    dual_search(sys, &rows, &strict, budget)
        .map(|m| m.map(|multipliers| Certificate {
            kind: CertificateKind::MixedStrict,
            multipliers,
        }))
}

/// Shared multiplier-search LP.
///
/// Variables: one nonnegative multiplier per inequality row in `rows`, a
/// split pair per equality row. Constraints: the coefficient combination
/// vanishes; if `strict` is empty the combined right side equals -1, else the
/// strict multipliers sum to 1 and the combined right side is at most 0.
fn dual_search(
    sys: &LinSystem,
    rows: &[usize],
    strict: &[usize],
    budget: u64,
) -> Result<Option<Vec<Rat>>, LinError> {
    let d = sys.num_vars();
    // Column layout: inequality rows first (single nonnegative var), then
    // equality rows (two columns each: plus, minus).
    let mut col_of = Vec::new(); // (row index, is_eq)
    for &r in rows {
        col_of.push((r, sys.rows[r].rel == Relation::Eq));
    }
    let ncols: usize = col_of.iter().map(|&(_, eq)| if eq { 2 } else { 1 }).sum();

    let mut a = vec![vec![Rat::zero(); ncols]; d];
    let mut rhs_row = vec![Rat::zero(); ncols];
    let mut strict_row = vec![Rat::zero(); ncols];
    let mut at = 0usize;
    for &(r, eq) in &col_of {
        let row = &sys.rows[r];
        for j in 0..d {
            a[j][at] = row.coeffs[j].clone();
            if eq {
                a[j][at + 1] = -row.coeffs[j].clone();
            }
        }
        rhs_row[at] = row.rhs.clone();
        if eq {
            rhs_row[at + 1] = -row.rhs.clone();
        }
        if strict.contains(&r) {
            strict_row[at] = Rat::one();
        }
        at += if eq { 2 } else { 1 };
    }

    let mut lp_a = a;
    let mut lp_b = vec![Rat::zero(); d];
    let mut lp_rel = vec![LpRel::Eq; d];
    if strict.is_empty() {
        lp_a.push(rhs_row);
        lp_b.push(-Rat::one());
        lp_rel.push(LpRel::Eq);
    } else {
        lp_a.push(strict_row);
        lp_b.push(Rat::one());
        lp_rel.push(LpRel::Eq);
        lp_a.push(rhs_row);
        lp_b.push(Rat::zero());
        lp_rel.push(LpRel::Le);
    }
    let lp = StandardLp {
        a: lp_a,
        b: lp_b,
        rel: lp_rel,
        c: vec![Rat::zero(); ncols],
    };
    match solve_lp(&lp, budget)? {
        LpOutcome::Optimal { y, .. } => {
            let mut multipliers = vec![Rat::zero(); sys.rows.len()];
            let mut at = 0usize;
            for &(r, eq) in &col_of {
                if eq {
                    multipliers[r] = &y[at] - &y[at + 1];
                    at += 2;
                } else {
                    multipliers[r] = y[at].clone();
                    at += 1;
                }
            }
            Ok(Some(multipliers))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(LinError::Internal("feasibility LP unbounded")),
    }
}
