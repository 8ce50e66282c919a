//! Fold engines: eliminate the last point of a kernel by integrating it out
//! and redistributing its couplings onto the remaining points.
//!
//! Three modes share one recursion skeleton. Let `Theta` be the fold support
//! (points coupled to the last one) and `A` the coupling mass attached to the
//! fold point. Integrating the fold point away costs an envelope factor; the
//! factor is either a plain negative power of the support diameter (spread it
//! over support pairs with a distribution system), a critical logarithm
//! (spread it, then shave `eps` from one pair onto another), or — when the
//! mass remaining after removing one support point still exceeds `n` — a
//! residual integral of the same shape (relocate that point's coupling and
//! recurse on a smaller support).
//!
//! * [`FoldMode::Integrability`] works on bare kernels and preserves cluster
//!   integrability; it folds directly when `A < n`.
//! * [`FoldMode::LInfty`] carries a Lebesgue profile whose fold slot is a
//!   sup-norm slot (reciprocal exponent 0); its hypotheses force `A > n`, and
//!   every reduced problem keeps the same interior profile.
//! * [`FoldMode::WeakPower`] carries a fully interior profile and treats the
//!   origin as one more envelope center weighted by the fold point's own
//!   reciprocal exponent; the heavy origin branch converts that exponent to a
//!   sup-norm slot and hands the problem to the [`FoldMode::LInfty`] engine.
//!
//! Every intermediate and every emitted problem is re-checked against the
//! conditions its construction promises (cluster integrability alone for
//! `Integrability`; homogeneity, integrability, and strict capacity at every
//! proper cluster for the profiled modes). A failed re-check or an infeasible
//! distribution system surfaces as an error carrying the offending detail —
//! the engines never emit an unverified problem.
//!
//! Deterministic tie-breaks: support points are processed in increasing index
//! order with the origin branch last, perturbations pick the first positive
//! component and the first eligible pair in lexicographic order, and `eps` is
//! half the binding bound (the decremented component or the smallest strict
//! slack of the solved system, whichever is smaller). Identical reduced
//! problems produced by different envelope branches are emitted once.

use num_traits::{Signed, Zero};

use crate::conditions::{
    check_condition_iii, check_homogeneity, check_integrability, ConditionIiiStatus,
};
use crate::kernel::{
    format_rat, rat_int, KernelError, KernelSpec, LebesgueProfile, Rat, SubsetMask,
};
use crate::linsys::builders::{build_system, SystemKind};
use crate::linsys::{solve, FeasibilityOutcome, Relation};
use crate::EngineError;

/// Which elimination regime drives the fold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldMode {
    /// Bare-kernel fold preserving cluster integrability.
    Integrability,
    /// Profiled fold with the last slot at reciprocal exponent 0.
    LInfty,
    /// Profiled fold with every slot interior; origin-weighted envelope.
    WeakPower,
}

impl FoldMode {
    fn name(self) -> &'static str {
        match self {
            FoldMode::Integrability => "integrability",
            FoldMode::LInfty => "sup-norm endpoint",
            FoldMode::WeakPower => "weak power-weight",
        }
    }
}

impl std::fmt::Display for FoldMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One reduced problem produced by a fold, with the derivation steps that
/// led to it.
#[derive(Clone, Debug)]
pub struct FoldOutput {
    pub spec: KernelSpec,
    pub profile: Option<LebesgueProfile>,
    pub annotations: Vec<String>,
}

/// Eliminate the last point, emitting the finite family of reduced problems
/// whose sum dominates the original.
///
/// `profile` is required for the profiled modes and ignored by
/// [`FoldMode::Integrability`]. The kernel needs at least three points so
/// that the reduced kernel still has a pair. Mode hypotheses are checked up
/// front; a violation is reported as [`EngineError::FoldHypotheses`] naming
/// the failing condition.
pub fn distribute_and_fold(
    spec: &KernelSpec,
    profile: Option<&LebesgueProfile>,
    mode: FoldMode,
) -> Result<Vec<FoldOutput>, EngineError> {
    if spec.m() < 3 {
        return Err(KernelError::TooFewPoints(spec.m()).into());
    }
    let profile = match mode {
        FoldMode::Integrability => {
            if let Some(detail) = integrability_detail(spec)? {
                return Err(EngineError::FoldHypotheses {
                    mode: mode.name(),
                    detail,
                });
            }
            None
        }
        FoldMode::LInfty | FoldMode::WeakPower => {
            let p = profile.ok_or(KernelError::ProfileRequired)?;
            if p.m() != spec.m() {
                return Err(KernelError::ProfileSizeMismatch(p.m(), spec.m()).into());
            }
            let sup_slot = mode == FoldMode::LInfty;
            if let Some(detail) = profiled_detail(spec, p, sup_slot)? {
                return Err(EngineError::FoldHypotheses {
                    mode: mode.name(),
                    detail,
                });
            }
            Some(p.clone())
        }
    };

    let mut folder = Folder {
        top_mode: mode,
        outputs: Vec::new(),
    };
    folder.run(spec, profile.as_ref(), mode, &[], 0)?;
    Ok(folder.outputs)
}

/// Cluster-integrability failure description, if any.
fn integrability_detail(spec: &KernelSpec) -> Result<Option<String>, KernelError> {
    let bad = check_integrability(spec)?;
    Ok(bad.first().map(|j| {
        format!(
            "cluster {j} carries exponent mass {} at or above its capacity",
            format_rat(&spec.subset_alpha_sum(*j))
        )
    }))
}

/// Failure description for a profiled problem that must satisfy exact
/// homogeneity, cluster integrability, and strict capacity at every proper
/// cluster. `sup_slot_last` switches the last slot's requirement between
/// "exactly 0" and "interior".
fn profiled_detail(
    spec: &KernelSpec,
    profile: &LebesgueProfile,
    sup_slot_last: bool,
) -> Result<Option<String>, KernelError> {
    if profile.m() != spec.m() {
        return Ok(Some("profile length differs from the point count".into()));
    }
    let one = rat_int(1);
    for i in 0..spec.m() {
        let r = profile.r(i);
        if sup_slot_last && i == spec.last() {
            if !r.is_zero() {
                return Ok(Some(format!(
                    "the fold slot must carry reciprocal exponent 0, found {}",
                    format_rat(r)
                )));
            }
        } else if r.is_zero() || *r >= one {
            return Ok(Some(format!(
                "reciprocal exponent {} of point {} is not interior",
                format_rat(r),
                i + 1
            )));
        }
    }
    let h = check_homogeneity(spec, profile);
    if !h.holds {
        return Ok(Some(format!(
            "homogeneity total {} differs from the point count {}",
            format_rat(&h.lhs),
            format_rat(&h.rhs)
        )));
    }
    if let Some(detail) = integrability_detail(spec)? {
        return Ok(Some(detail));
    }
    for (mask, status) in check_condition_iii(spec, profile)? {
        if !matches!(status, ConditionIiiStatus::StrictA { .. }) {
            return Ok(Some(format!(
                "capacity at cluster {mask} is not strictly satisfied"
            )));
        }
    }
    Ok(None)
}

/// A solved distribution system, decoded into pair and single components.
struct Distribution {
    pairs: Vec<(usize, usize)>,
    singles: Vec<usize>,
    pair_vals: Vec<Rat>,
    single_vals: Vec<Rat>,
    /// Smallest `rhs - lhs` over strict rows at the witness; positive.
    min_strict_slack: Rat,
}

impl Distribution {
    /// First pair with a positive weight, in lexicographic order.
    fn first_positive_pair(&self) -> Option<(usize, (usize, usize))> {
        self.pair_vals
            .iter()
            .position(|v| v.is_positive())
            .map(|idx| (idx, self.pairs[idx]))
    }

    /// First single with a positive weight, in increasing index order.
    fn first_positive_single(&self) -> Option<(usize, usize)> {
        self.single_vals
            .iter()
            .position(|v| v.is_positive())
            .map(|idx| (idx, self.singles[idx]))
    }
}

fn solve_distribution(
    spec: &KernelSpec,
    profile: Option<&LebesgueProfile>,
    kind: SystemKind,
    label: &str,
) -> Result<Distribution, EngineError> {
    let theta = spec.fold_support();
    let pairs: Vec<(usize, usize)> = theta.pairs().collect();
    let singles: Vec<usize> = match kind {
        SystemKind::WeakPairSingles
        | SystemKind::WeakRelocation { .. }
        | SystemKind::WeakOriginSplit => theta.indices().collect(),
        _ => Vec::new(),
    };
    let sys = build_system(kind, spec, profile)?;
    debug_assert_eq!(sys.num_vars(), pairs.len() + singles.len());
    match solve(&sys)? {
        FeasibilityOutcome::Feasible {
            witness, slacks, ..
        } => {
            let mut min_strict_slack: Option<Rat> = None;
            for (row, s) in sys.rows.iter().zip(&slacks) {
                if row.rel == Relation::Lt
                    && min_strict_slack.as_ref().is_none_or(|m| s < m)
                {
                    min_strict_slack = Some(s.clone());
                }
            }
            let (pair_vals, single_vals) = witness.split_at(pairs.len());
            Ok(Distribution {
                pairs,
                singles,
                pair_vals: pair_vals.to_vec(),
                single_vals: single_vals.to_vec(),
                min_strict_slack: min_strict_slack.unwrap_or_else(|| rat_int(1)),
            })
        }
        FeasibilityOutcome::Infeasible { certificate } => {
            Err(EngineError::DistributionInfeasible {
                label: label.to_string(),
                certificate: Box::new(certificate),
            })
        }
    }
}

/// Cloned exponent matrix with the distribution's pair weights added.
fn matrix_plus_pairs(spec: &KernelSpec, dist: &Distribution) -> Vec<Vec<Rat>> {
    let mut alpha = spec.alpha_matrix().clone();
    for (&(i, j), v) in dist.pairs.iter().zip(&dist.pair_vals) {
        alpha[i][j] += v;
        alpha[j][i] = alpha[i][j].clone();
    }
    alpha
}

fn shift_pair(alpha: &mut [Vec<Rat>], i: usize, j: usize, delta: &Rat) {
    alpha[i][j] += delta;
    alpha[j][i] = alpha[i][j].clone();
}

/// Profile with the distribution's single weights added.
fn profile_plus_singles(
    profile: &LebesgueProfile,
    dist: &Distribution,
) -> Result<LebesgueProfile, KernelError> {
    let mut r = profile.reciprocals().to_vec();
    for (&i, v) in dist.singles.iter().zip(&dist.single_vals) {
        r[i] += v;
    }
    LebesgueProfile::new(r)
}

fn half_min(a: &Rat, b: &Rat) -> Rat {
    let m = if a <= b { a } else { b };
    m / rat_int(2)
}

/// Readable pair name in 1-based report indexing.
fn pair_name(i: usize, j: usize) -> String {
    SubsetMask::from_indices([i, j]).to_string()
}

struct Folder {
    top_mode: FoldMode,
    outputs: Vec<FoldOutput>,
}

impl Folder {
    fn run(
        &mut self,
        spec: &KernelSpec,
        profile: Option<&LebesgueProfile>,
        mode: FoldMode,
        trail: &[String],
        depth: usize,
    ) -> Result<(), EngineError> {
        if depth > 2 * spec.m() + 2 {
            return Err(self.internal(trail, "fold recursion exceeded its depth bound"));
        }
        match mode {
            FoldMode::Integrability => self.run_integrability(spec, trail, depth),
            FoldMode::LInfty => self.run_linfty(spec, profile, trail, depth),
            FoldMode::WeakPower => self.run_weak(spec, profile, trail, depth),
        }
    }

    fn internal(&self, trail: &[String], detail: &str) -> EngineError {
        let derivation = if trail.is_empty() {
            "at the root".to_string()
        } else {
            trail.join(" -> ")
        };
        EngineError::ReducedCheckFailed {
            detail: format!("{detail} [{derivation}]"),
        }
    }

    fn extend_trail(trail: &[String], step: String) -> Vec<String> {
        let mut t = trail.to_vec();
        t.push(step);
        t
    }

    /// Verify a reduced or intermediate problem and either record or recurse.
    fn emit(
        &mut self,
        spec: KernelSpec,
        profile: Option<LebesgueProfile>,
        trail: Vec<String>,
    ) -> Result<(), EngineError> {
        let detail = match (self.top_mode, &profile) {
            (FoldMode::Integrability, _) => integrability_detail(&spec)?,
            (_, Some(p)) => profiled_detail(&spec, p, false)?,
            (_, None) => Some("profiled fold emitted a bare kernel".into()),
        };
        if let Some(d) = detail {
            return Err(self.internal(&trail, &format!("emitted problem fails re-check: {d}")));
        }
        let duplicate = self.outputs.iter().any(|o| {
            o.spec.alpha_matrix() == spec.alpha_matrix()
                && o.profile.as_ref().map(|p| p.reciprocals())
                    == profile.as_ref().map(|p| p.reciprocals())
        });
        if !duplicate {
            self.outputs.push(FoldOutput {
                spec,
                profile,
                annotations: trail,
            });
        }
        Ok(())
    }

    /// Verify an intermediate (same point count) before recursing on it.
    fn recurse(
        &mut self,
        spec: KernelSpec,
        profile: Option<LebesgueProfile>,
        mode: FoldMode,
        trail: Vec<String>,
        depth: usize,
    ) -> Result<(), EngineError> {
        let detail = match mode {
            FoldMode::Integrability => integrability_detail(&spec)?,
            FoldMode::LInfty => {
                let p = profile.as_ref().expect("profiled mode keeps its profile");
                profiled_detail(&spec, p, true)?
            }
            FoldMode::WeakPower => {
                let p = profile.as_ref().expect("profiled mode keeps its profile");
                profiled_detail(&spec, p, false)?
            }
        };
        if let Some(d) = detail {
            return Err(self.internal(&trail, &format!("intermediate fails re-check: {d}")));
        }
        self.run(&spec, profile.as_ref(), mode, &trail, depth + 1)
    }

    fn run_integrability(
        &mut self,
        spec: &KernelSpec,
        trail: &[String],
        depth: usize,
    ) -> Result<(), EngineError> {
        let theta = spec.fold_support();
        let n = spec.n_rat();
        let last = spec.last();
        let s = spec.s_mask();
        let a = spec.cross_sum(last, theta);

        if a < n {
            let step = format!(
                "dropped point {}: its coupling mass {} stays below the dimension",
                last + 1,
                format_rat(&a)
            );
            let reduced = spec.restrict(s)?;
            return self.emit(reduced, None, Self::extend_trail(trail, step));
        }

        if a == n {
            // Critical mass: the fold costs a logarithm, absorbed by widening
            // one support pair by half the smallest remaining cluster slack.
            let (i0, j0) = theta.pairs().next().expect("critical mass needs a pair");
            let eps = min_cluster_slack(spec, s) / rat_int(2);
            let mut alpha = spec.alpha_matrix().clone();
            shift_pair(&mut alpha, i0, j0, &eps);
            let step = format!(
                "critical coupling mass: widened pair {} by {}",
                pair_name(i0, j0),
                format_rat(&eps)
            );
            let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
            return self.emit(reduced, None, Self::extend_trail(trail, step));
        }

        // Excess mass. Two support points take the whole excess exactly.
        if theta.len() == 2 {
            let (u, v) = theta.pairs().next().expect("two support points");
            let excess = &a - &n;
            let mut alpha = spec.alpha_matrix().clone();
            shift_pair(&mut alpha, u, v, &excess);
            let step = format!(
                "relocated excess {} onto pair {}",
                format_rat(&excess),
                pair_name(u, v)
            );
            let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
            return self.emit(reduced, None, Self::extend_trail(trail, step));
        }

        // Larger support: one envelope branch per support point.
        let mut shared: Option<Distribution> = None;
        for u in theta.indices().collect::<Vec<_>>() {
            let b_u = &a - spec.alpha(u, last);
            if b_u <= n && shared.is_none() {
                shared = Some(solve_distribution(
                    spec,
                    None,
                    SystemKind::PairRedistribution,
                    "pair redistribution",
                )?);
            }
            if b_u < n {
                let dist = shared.as_ref().expect("solved above");
                let alpha = matrix_plus_pairs(spec, dist);
                let step = format!(
                    "spread excess {} over support pairs (light branch at point {})",
                    format_rat(&(&a - &n)),
                    u + 1
                );
                let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
                self.emit(reduced, None, Self::extend_trail(trail, step))?;
            } else if b_u == n {
                let dist = shared.as_ref().expect("solved above");
                let (idx0, (i0, j0)) = dist
                    .first_positive_pair()
                    .ok_or_else(|| self.internal(trail, "positive excess left no positive pair"))?;
                let (i1, j1) = theta
                    .remove(u)
                    .pairs()
                    .next()
                    .ok_or_else(|| self.internal(trail, "log branch needs a residual pair"))?;
                let eps = half_min(&dist.pair_vals[idx0], &dist.min_strict_slack);
                let mut alpha = matrix_plus_pairs(spec, dist);
                shift_pair(&mut alpha, i0, j0, &(-eps.clone()));
                shift_pair(&mut alpha, i1, j1, &eps);
                let step = format!(
                    "log-critical branch at point {}: moved {} from pair {} to pair {}",
                    u + 1,
                    format_rat(&eps),
                    pair_name(i0, j0),
                    pair_name(i1, j1)
                );
                let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
                self.emit(reduced, None, Self::extend_trail(trail, step))?;
            } else {
                let dist = solve_distribution(
                    spec,
                    None,
                    SystemKind::PairRelocation { target: u },
                    &format!("pair relocation of point {}", u + 1),
                )?;
                let mut alpha = matrix_plus_pairs(spec, &dist);
                let moved = alpha[u][last].clone();
                alpha[u][last] = Rat::zero();
                alpha[last][u] = Rat::zero();
                let step = format!(
                    "relocated coupling {} of point {} onto support pairs",
                    format_rat(&moved),
                    u + 1
                );
                let inter = KernelSpec::new(spec.n(), alpha)?;
                self.recurse(
                    inter,
                    None,
                    FoldMode::Integrability,
                    Self::extend_trail(trail, step),
                    depth,
                )?;
            }
        }
        Ok(())
    }

    fn run_linfty(
        &mut self,
        spec: &KernelSpec,
        profile: Option<&LebesgueProfile>,
        trail: &[String],
        depth: usize,
    ) -> Result<(), EngineError> {
        let profile = profile.expect("profiled mode keeps its profile");
        let theta = spec.fold_support();
        let n = spec.n_rat();
        let last = spec.last();
        let s = spec.s_mask();
        let a = spec.cross_sum(last, theta);
        if a <= n {
            // The hypotheses force strict excess; reaching this is a bug.
            return Err(self.internal(trail, "sup-norm fold reached non-excess mass"));
        }

        if theta.len() == 2 {
            let (u, v) = theta.pairs().next().expect("two support points");
            let excess = &a - &n;
            let mut alpha = spec.alpha_matrix().clone();
            shift_pair(&mut alpha, u, v, &excess);
            let step = format!(
                "relocated excess {} onto pair {}",
                format_rat(&excess),
                pair_name(u, v)
            );
            let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
            return self.emit(
                reduced,
                Some(profile.restrict(s)),
                Self::extend_trail(trail, step),
            );
        }

        let mut shared: Option<Distribution> = None;
        for u in theta.indices().collect::<Vec<_>>() {
            let b_u = &a - spec.alpha(u, last);
            if b_u <= n && shared.is_none() {
                shared = Some(solve_distribution(
                    spec,
                    Some(profile),
                    SystemKind::ProfilePairRedistribution,
                    "profiled pair redistribution",
                )?);
            }
            if b_u < n {
                let dist = shared.as_ref().expect("solved above");
                let alpha = matrix_plus_pairs(spec, dist);
                let step = format!(
                    "spread excess {} over support pairs (light branch at point {})",
                    format_rat(&(&a - &n)),
                    u + 1
                );
                let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
                self.emit(
                    reduced,
                    Some(profile.restrict(s)),
                    Self::extend_trail(trail, step),
                )?;
            } else if b_u == n {
                let dist = shared.as_ref().expect("solved above");
                let (idx0, (i0, j0)) = dist
                    .first_positive_pair()
                    .ok_or_else(|| self.internal(trail, "positive excess left no positive pair"))?;
                let (i1, j1) = theta
                    .remove(u)
                    .pairs()
                    .next()
                    .ok_or_else(|| self.internal(trail, "log branch needs a residual pair"))?;
                let eps = half_min(&dist.pair_vals[idx0], &dist.min_strict_slack);
                let mut alpha = matrix_plus_pairs(spec, dist);
                shift_pair(&mut alpha, i0, j0, &(-eps.clone()));
                shift_pair(&mut alpha, i1, j1, &eps);
                let step = format!(
                    "log-critical branch at point {}: moved {} from pair {} to pair {}",
                    u + 1,
                    format_rat(&eps),
                    pair_name(i0, j0),
                    pair_name(i1, j1)
                );
                let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
                self.emit(
                    reduced,
                    Some(profile.restrict(s)),
                    Self::extend_trail(trail, step),
                )?;
            } else {
                let dist = solve_distribution(
                    spec,
                    Some(profile),
                    SystemKind::ProfilePairRelocation { target: u },
                    &format!("profiled pair relocation of point {}", u + 1),
                )?;
                let mut alpha = matrix_plus_pairs(spec, &dist);
                let moved = alpha[u][last].clone();
                alpha[u][last] = Rat::zero();
                alpha[last][u] = Rat::zero();
                let step = format!(
                    "relocated coupling {} of point {} onto support pairs",
                    format_rat(&moved),
                    u + 1
                );
                let inter = KernelSpec::new(spec.n(), alpha)?;
                self.recurse(
                    inter,
                    Some(profile.clone()),
                    FoldMode::LInfty,
                    Self::extend_trail(trail, step),
                    depth,
                )?;
            }
        }
        Ok(())
    }

    fn run_weak(
        &mut self,
        spec: &KernelSpec,
        profile: Option<&LebesgueProfile>,
        trail: &[String],
        depth: usize,
    ) -> Result<(), EngineError> {
        let profile = profile.expect("profiled mode keeps its profile");
        let theta = spec.fold_support();
        let n = spec.n_rat();
        let last = spec.last();
        let s = spec.s_mask();
        let a = spec.cross_sum(last, theta);
        let r_last = profile.r(last).clone();

        if theta.is_empty() {
            // Interior profile plus strict capacity at the remaining points
            // forces a positive coupling mass; reaching this is a bug.
            return Err(self.internal(trail, "weak fold reached an empty support"));
        }

        if theta.len() == 1 {
            // Single support point: the fold is an exact beta-type identity
            // that raises that point's reciprocal exponent.
            let u = theta.smallest().expect("single support point");
            let bump = profile.r(u) + &r_last + spec.alpha(u, last) / &n - rat_int(1);
            let reduced_profile = profile.with_r(u, bump.clone())?.restrict(s);
            let step = format!(
                "beta reduction at point {}: reciprocal exponent raised to {}",
                u + 1,
                format_rat(&bump)
            );
            let reduced = spec.restrict(s)?;
            return self.emit(
                reduced,
                Some(reduced_profile),
                Self::extend_trail(trail, step),
            );
        }

        let mut shared: Option<Distribution> = None;
        let ensure_shared = |shared: &mut Option<Distribution>| -> Result<(), EngineError> {
            if shared.is_none() {
                *shared = Some(solve_distribution(
                    spec,
                    Some(profile),
                    SystemKind::WeakPairSingles,
                    "weak pair/single redistribution",
                )?);
            }
            Ok(())
        };

        // Envelope branches at the support points.
        for u in theta.indices().collect::<Vec<_>>() {
            let d_u = &a - spec.alpha(u, last) + &r_last * &n;
            if d_u < n {
                ensure_shared(&mut shared)?;
                let dist = shared.as_ref().expect("solved above");
                let alpha = matrix_plus_pairs(spec, dist);
                let reduced_profile = profile_plus_singles(profile, dist)?.restrict(s);
                let step = format!(
                    "spread fold load over support pairs and weights (light branch at point {})",
                    u + 1
                );
                let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
                self.emit(
                    reduced,
                    Some(reduced_profile),
                    Self::extend_trail(trail, step),
                )?;
            } else if d_u == n {
                ensure_shared(&mut shared)?;
                let dist = shared.as_ref().expect("solved above");
                let i1 = theta
                    .remove(u)
                    .smallest()
                    .expect("support has a second point");
                let mut alpha = matrix_plus_pairs(spec, dist);
                let mut r = profile_plus_singles(profile, dist)?.reciprocals().to_vec();
                let step;
                if let Some((idx0, (i0, j0))) = dist.first_positive_pair() {
                    // Shave a pair, feed the residual weight of one point.
                    let eps = half_min(&dist.pair_vals[idx0], &dist.min_strict_slack);
                    shift_pair(&mut alpha, i0, j0, &(-eps.clone()));
                    r[i1] += &eps / &n;
                    step = format!(
                        "log-critical branch at point {}: moved {} from pair {} to the weight of point {}",
                        u + 1,
                        format_rat(&eps),
                        pair_name(i0, j0),
                        i1 + 1
                    );
                } else {
                    // All pair weights vanish; shave one single weight.
                    let (idx0, i0) = dist.first_positive_single().ok_or_else(|| {
                        self.internal(trail, "positive fold load left no positive component")
                    })?;
                    let bound = &dist.min_strict_slack / &n;
                    let eps = half_min(&dist.single_vals[idx0], &bound);
                    r[i0] -= &eps;
                    r[i1] += &eps;
                    step = format!(
                        "log-critical branch at point {}: moved weight {} from point {} to point {}",
                        u + 1,
                        format_rat(&eps),
                        i0 + 1,
                        i1 + 1
                    );
                }
                let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
                let reduced_profile = LebesgueProfile::new(r)?.restrict(s);
                self.emit(
                    reduced,
                    Some(reduced_profile),
                    Self::extend_trail(trail, step),
                )?;
            } else {
                let dist = solve_distribution(
                    spec,
                    Some(profile),
                    SystemKind::WeakRelocation { target: u },
                    &format!("weak relocation of point {}", u + 1),
                )?;
                let mut alpha = matrix_plus_pairs(spec, &dist);
                let moved = alpha[u][last].clone();
                alpha[u][last] = Rat::zero();
                alpha[last][u] = Rat::zero();
                let inter_profile = profile_plus_singles(profile, &dist)?;
                let step = format!(
                    "relocated coupling {} of point {} onto support pairs and weights",
                    format_rat(&moved),
                    u + 1
                );
                let inter = KernelSpec::new(spec.n(), alpha)?;
                self.recurse(
                    inter,
                    Some(inter_profile),
                    FoldMode::WeakPower,
                    Self::extend_trail(trail, step),
                    depth,
                )?;
            }
        }

        // Origin branch: the fold point's own weight is the removed center.
        if a < n {
            ensure_shared(&mut shared)?;
            let dist = shared.as_ref().expect("solved above");
            let alpha = matrix_plus_pairs(spec, dist);
            let reduced_profile = profile_plus_singles(profile, dist)?.restrict(s);
            let step =
                "spread fold load over support pairs and weights (light origin branch)".to_string();
            let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
            self.emit(
                reduced,
                Some(reduced_profile),
                Self::extend_trail(trail, step),
            )?;
        } else if a == n {
            ensure_shared(&mut shared)?;
            let dist = shared.as_ref().expect("solved above");
            let (i1, j1) = theta
                .pairs()
                .next()
                .expect("support has a pair in the origin branch");
            let mut alpha = matrix_plus_pairs(spec, dist);
            let mut r = profile_plus_singles(profile, dist)?.reciprocals().to_vec();
            let step;
            if let Some((idx0, (i0, j0))) = dist.first_positive_pair() {
                let eps = half_min(&dist.pair_vals[idx0], &dist.min_strict_slack);
                shift_pair(&mut alpha, i0, j0, &(-eps.clone()));
                shift_pair(&mut alpha, i1, j1, &eps);
                step = format!(
                    "log-critical origin branch: moved {} from pair {} to pair {}",
                    format_rat(&eps),
                    pair_name(i0, j0),
                    pair_name(i1, j1)
                );
            } else {
                let (idx0, i0) = dist.first_positive_single().ok_or_else(|| {
                    self.internal(trail, "positive fold load left no positive component")
                })?;
                let scaled = &dist.single_vals[idx0] * &n;
                let eps = half_min(&scaled, &dist.min_strict_slack);
                r[i0] -= &eps / &n;
                shift_pair(&mut alpha, i1, j1, &eps);
                step = format!(
                    "log-critical origin branch: moved {} from the weight of point {} to pair {}",
                    format_rat(&eps),
                    i0 + 1,
                    pair_name(i1, j1)
                );
            }
            let reduced = KernelSpec::new(spec.n(), alpha)?.restrict(s)?;
            let reduced_profile = LebesgueProfile::new(r)?.restrict(s);
            self.emit(
                reduced,
                Some(reduced_profile),
                Self::extend_trail(trail, step),
            )?;
        } else {
            // Heavy origin: convert the fold point's weight to a sup-norm
            // slot and hand the problem to the sup-norm engine.
            let dist = solve_distribution(
                spec,
                Some(profile),
                SystemKind::WeakOriginSplit,
                "origin weight split",
            )?;
            let alpha = matrix_plus_pairs(spec, &dist);
            let inter_profile = profile_plus_singles(profile, &dist)?.with_r(last, Rat::zero())?;
            let step = format!(
                "split the fold point's weight {} over the support; sup-norm handoff",
                format_rat(&(&r_last * &n))
            );
            let inter = KernelSpec::new(spec.n(), alpha)?;
            self.recurse(
                inter,
                Some(inter_profile),
                FoldMode::LInfty,
                Self::extend_trail(trail, step),
                depth,
            )?;
        }
        Ok(())
    }
}

/// Smallest cluster capacity slack `(|J|-1)n - alpha(J)` over subsets of
/// `ground` with at least two points. Positive on integrable kernels.
fn min_cluster_slack(spec: &KernelSpec, ground: SubsetMask) -> Rat {
    let n = spec.n_rat();
    let mut best: Option<Rat> = None;
    for j in crate::kernel::subsets_of(ground) {
        if j.len() < 2 {
            continue;
        }
        let slack = rat_int(j.len() as i64 - 1) * &n - spec.subset_alpha_sum(j);
        if best.as_ref().is_none_or(|b| &slack < b) {
            best = Some(slack);
        }
    }
    best.unwrap_or_else(|| rat_int(1))
}
