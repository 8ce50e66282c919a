//! Constructors for the nine certificate systems used by the fold engines.
//!
//! Every system redistributes coupling mass attached to the fold point (the
//! last index) onto pair or single weights over the fold support `Theta`
//! (the points coupled to it), subject to per-subset capacity rows. Two
//! capacity shapes occur:
//!
//! * cluster rows `sum_(pairs in J) d < (|J|-1)n - alpha(J)` keep every
//!   cluster of points integrable after the move;
//! * load rows `sum d + n sum e < |J|n - alpha(J) - n r(J)` keep the total
//!   exponent load of a cluster below its Lebesgue capacity.
//!
//! Relocation variants (`*Relocation { target }`) move one coupling
//! `alpha(target, last)` in full; their capacity right sides use the matrix
//! with that entry zeroed. Row order is deterministic: nonnegativity, mass,
//! then capacity rows in increasing subset-mask order.

use crate::kernel::{
    subsets_of, KernelError, KernelSpec, LebesgueProfile, Rat, SubsetMask, SubsetTables,
};
use crate::linsys::{LinSystem, Relation};
use num_traits::Zero;

/// Which certificate system to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    /// Spread the excess fold mass `sum_Theta alpha(i,last) - n` onto pairs
    /// of the support; capacity is cluster rows over subsets of `S`.
    PairRedistribution,
    /// Move the single coupling `alpha(target,last)` onto support pairs;
    /// capacity rows range over subsets of all points, right sides computed
    /// with the moved entry zeroed.
    PairRelocation { target: usize },
    /// `PairRedistribution` with Lebesgue load rows: every capacity is the
    /// minimum of a cluster row and a load row, and the full set `S` enters
    /// with non-strict rows.
    ProfilePairRedistribution,
    /// `PairRelocation` with Lebesgue load rows; the full point set enters
    /// with non-strict rows.
    ProfilePairRelocation { target: usize },
    /// Single weights on every point balancing total homogeneity; decides
    /// whether any admissible interior profile exists.
    SingleWeights,
    /// Pair and single weights on the support, mass
    /// `sum_Theta alpha(i,last) + n r_last - n`; cluster rows over subsets
    /// of `S` (full set included), load rows over proper subsets of `S`.
    WeakPairSingles,
    /// Pair/single relocation of `alpha(target,last)`: cluster rows over all
    /// subsets meeting the support twice, load rows over proper subsets of
    /// all points, right sides with the moved entry zeroed.
    WeakRelocation { target: usize },
    /// Pair/single redistribution of the fold point's own Lebesgue load
    /// `n r_last`; capacity right sides keep the exponent matrix unmodified
    /// but drop `r_last` from load rows.
    WeakOriginSplit,
    /// Single weights on `S` for the endpoint world: floors at `r_i`, caps
    /// at `r_i + (alpha(i,last) + [i = target])/n`, slot rows on proper
    /// subsets.
    EndpointSingles { target: usize },
}

impl SystemKind {
    /// Whether the kind needs a Lebesgue profile.
    pub fn needs_profile(self) -> bool {
        !matches!(
            self,
            SystemKind::PairRedistribution
                | SystemKind::PairRelocation { .. }
                | SystemKind::SingleWeights
        )
    }

    /// The distinguished index, if the kind has one.
    pub fn target(self) -> Option<usize> {
        match self {
            SystemKind::PairRelocation { target }
            | SystemKind::ProfilePairRelocation { target }
            | SystemKind::WeakRelocation { target }
            | SystemKind::EndpointSingles { target } => Some(target),
            _ => None,
        }
    }
}

fn pair_label(i: usize, j: usize) -> String {
    format!("d[{},{}]", i + 1, j + 1)
}

fn single_label(i: usize) -> String {
    format!("e[{}]", i + 1)
}

/// Pair variables over `theta` in lexicographic order.
fn theta_pairs(theta: SubsetMask) -> Vec<(usize, usize)> {
    theta.pairs().collect()
}

/// Indicator row over pair variables: 1 on pairs lying inside `inside`.
fn pair_indicator(pairs: &[(usize, usize)], inside: SubsetMask) -> Vec<Rat> {
    pairs
        .iter()
        .map(|&(i, j)| {
            if inside.contains(i) && inside.contains(j) {
                Rat::from_integer(1.into())
            } else {
                Rat::zero()
            }
        })
        .collect()
}

struct Ctx<'a> {
    spec: &'a KernelSpec,
    profile: Option<&'a LebesgueProfile>,
    tables: SubsetTables,
    theta: SubsetMask,
    n: Rat,
    last: usize,
}

impl<'a> Ctx<'a> {
    fn new(
        spec: &'a KernelSpec,
        profile: Option<&'a LebesgueProfile>,
        kind: SystemKind,
    ) -> Result<Self, KernelError> {
        if kind.needs_profile() && profile.is_none() {
            return Err(KernelError::ProfileRequired);
        }
        if let Some(p) = profile {
            if p.m() != spec.m() {
                return Err(KernelError::ProfileSizeMismatch(p.m(), spec.m()));
            }
        }
        let theta = spec.fold_support();
        let need = match kind {
            SystemKind::SingleWeights => 0,
            SystemKind::WeakPairSingles
            | SystemKind::WeakRelocation { .. }
            | SystemKind::WeakOriginSplit
            | SystemKind::EndpointSingles { .. } => 1,
            _ => 2,
        };
        if theta.len() < need {
            return Err(KernelError::SupportTooSmall {
                need,
                got: theta.len(),
            });
        }
        if let Some(t) = kind.target() {
            if !theta.contains(t) {
                return Err(KernelError::TargetNotInSupport(t));
            }
        }
        let tables = SubsetTables::build(spec, profile)?;
        Ok(Ctx {
            spec,
            profile,
            tables,
            theta,
            n: spec.n_rat(),
            last: spec.last(),
        })
    }

    /// `alpha(J)` with the `(target,last)` entry zeroed when `moved` names a
    /// target.
    fn alpha_sum(&self, j: SubsetMask, moved: Option<usize>) -> Rat {
        let mut total = self.tables.alpha_sum(j).clone();
        if let Some(u) = moved {
            if j.contains(u) && j.contains(self.last) {
                total -= self.spec.alpha(u, self.last);
            }
        }
        total
    }

    fn size_rat(&self, j: SubsetMask) -> Rat {
        Rat::from_integer((j.len() as i64).into())
    }

    /// `n * sum_(i in J) r_i`, optionally dropping the fold point's term.
    fn load_sum(&self, j: SubsetMask, drop_last: bool) -> Rat {
        let profile = self.profile.expect("profile checked in Ctx::new");
        let mut total = profile.recip_sum(j);
        if drop_last && j.contains(self.last) {
            total -= profile.r(self.last);
        }
        total * &self.n
    }

    /// Total coupling between the support and the fold point.
    fn support_mass(&self) -> Rat {
        self.spec.cross_sum(self.last, self.theta)
    }
}

/// Build one of the certificate systems for `spec` (and `profile`, when the
/// kind uses Lebesgue data).
pub fn build_system(
    kind: SystemKind,
    spec: &KernelSpec,
    profile: Option<&LebesgueProfile>,
) -> Result<LinSystem, KernelError> {
    let ctx = Ctx::new(spec, profile, kind)?;
    match kind {
        SystemKind::PairRedistribution => build_pair_spread(&ctx, None),
        SystemKind::PairRelocation { target } => build_pair_spread(&ctx, Some(target)),
        SystemKind::ProfilePairRedistribution => build_profile_pair_spread(&ctx, None),
        SystemKind::ProfilePairRelocation { target } => {
            build_profile_pair_spread(&ctx, Some(target))
        }
        SystemKind::SingleWeights => build_single_weights(&ctx),
        SystemKind::WeakPairSingles => build_weak(&ctx, WeakVariant::Base),
        SystemKind::WeakRelocation { target } => build_weak(&ctx, WeakVariant::Relocate(target)),
        SystemKind::WeakOriginSplit => build_weak(&ctx, WeakVariant::OriginSplit),
        SystemKind::EndpointSingles { target } => build_endpoint_singles(&ctx, target),
    }
}

fn new_pair_system(pairs: &[(usize, usize)]) -> LinSystem {
    LinSystem::new(pairs.iter().map(|&(i, j)| pair_label(i, j)).collect())
}

fn push_nonneg(sys: &mut LinSystem, count: usize) {
    for v in 0..count {
        let mut coeffs = vec![Rat::zero(); sys.num_vars()];
        coeffs[v] = -Rat::from_integer(1.into());
        let label = format!("nonneg {}", sys.vars[v]);
        sys.push(label, None, coeffs, Relation::Le, Rat::zero());
    }
}

/// Shared shape of the two pure-pair systems: mass row plus cluster rows.
/// `moved = None` spreads the excess `support_mass - n` with capacity subsets
/// ranging over `S`; `moved = Some(u)` relocates `alpha(u,last)` with
/// capacity subsets ranging over all points and right sides zeroing the
/// moved entry.
fn build_pair_spread(ctx: &Ctx, moved: Option<usize>) -> Result<LinSystem, KernelError> {
    let pairs = theta_pairs(ctx.theta);
    let mut sys = new_pair_system(&pairs);
    push_nonneg(&mut sys, pairs.len());

    let mass = match moved {
        None => ctx.support_mass() - &ctx.n,
        Some(u) => ctx.spec.alpha(u, ctx.last).clone(),
    };
    sys.push(
        "mass",
        None,
        vec![Rat::from_integer(1.into()); pairs.len()],
        Relation::Eq,
        mass,
    );

    let ground = match moved {
        None => ctx.spec.s_mask(),
        Some(_) => ctx.spec.all_mask(),
    };
    for j in subsets_of(ground) {
        if j.intersect(ctx.theta).len() < 2 {
            continue;
        }
        let rhs = (ctx.size_rat(j) - Rat::from_integer(1.into())) * &ctx.n
            - ctx.alpha_sum(j, moved);
        sys.push(
            format!("cluster J={j}"),
            Some(j),
            pair_indicator(&pairs, j.intersect(ctx.theta)),
            Relation::Lt,
            rhs,
        );
    }
    Ok(sys)
}

/// Pair systems with Lebesgue load rows: each subset contributes both a
/// cluster row and a load row; the full set's rows are non-strict.
fn build_profile_pair_spread(ctx: &Ctx, moved: Option<usize>) -> Result<LinSystem, KernelError> {
    let pairs = theta_pairs(ctx.theta);
    let mut sys = new_pair_system(&pairs);
    push_nonneg(&mut sys, pairs.len());

    let mass = match moved {
        None => ctx.support_mass() - &ctx.n,
        Some(u) => ctx.spec.alpha(u, ctx.last).clone(),
    };
    sys.push(
        "mass",
        None,
        vec![Rat::from_integer(1.into()); pairs.len()],
        Relation::Eq,
        mass,
    );

    let ground = match moved {
        None => ctx.spec.s_mask(),
        Some(_) => ctx.spec.all_mask(),
    };
    for j in subsets_of(ground) {
        if j.intersect(ctx.theta).len() < 2 {
            continue;
        }
        let rel = if j == ground { Relation::Le } else { Relation::Lt };
        let coeffs = pair_indicator(&pairs, j.intersect(ctx.theta));
        let alpha = ctx.alpha_sum(j, moved);
        let cluster_rhs =
            (ctx.size_rat(j) - Rat::from_integer(1.into())) * &ctx.n - &alpha;
        let load_rhs = ctx.size_rat(j) * &ctx.n - &alpha - ctx.load_sum(j, false);
        sys.push(
            format!("cluster J={j}"),
            Some(j),
            coeffs.clone(),
            rel,
            cluster_rhs,
        );
        sys.push(format!("load J={j}"), Some(j), coeffs, rel, load_rhs);
    }
    Ok(sys)
}

/// Single weights on all points: interior positivity, subset slot rows, and
/// the total-balance equality.
fn build_single_weights(ctx: &Ctx) -> Result<LinSystem, KernelError> {
    let m = ctx.spec.m();
    let mut sys = LinSystem::new((0..m).map(single_label).collect());
    for i in 0..m {
        let mut coeffs = vec![Rat::zero(); m];
        coeffs[i] = -Rat::from_integer(1.into());
        sys.push(
            format!("pos {}", single_label(i)),
            Some(SubsetMask::singleton(i)),
            coeffs,
            Relation::Lt,
            Rat::zero(),
        );
    }
    let all = ctx.spec.all_mask();
    let total_rhs =
        Rat::from_integer((m as i64).into()) - ctx.tables.alpha_sum(all) / &ctx.n;
    sys.push(
        "mass",
        Some(all),
        vec![Rat::from_integer(1.into()); m],
        Relation::Eq,
        total_rhs.clone(),
    );
    for j in subsets_of(all) {
        if j.is_empty() || j == all {
            continue;
        }
        let mut coeffs = vec![Rat::zero(); m];
        for i in j.indices() {
            coeffs[i] = Rat::from_integer(1.into());
        }
        let rhs = ctx.size_rat(j) - ctx.tables.alpha_sum(j) / &ctx.n;
        sys.push(format!("slots J={j}"), Some(j), coeffs, Relation::Lt, rhs);
    }
    sys.push(
        "total",
        Some(all),
        vec![Rat::from_integer(1.into()); m],
        Relation::Le,
        total_rhs,
    );
    Ok(sys)
}

enum WeakVariant {
    Base,
    Relocate(usize),
    OriginSplit,
}

/// The three pair-plus-single systems of the weak-type fold. Variables are
/// pair weights over the support followed by single weights over the
/// support; singles enter mass and load rows with coefficient `n`.
fn build_weak(ctx: &Ctx, variant: WeakVariant) -> Result<LinSystem, KernelError> {
    let pairs = theta_pairs(ctx.theta);
    let singles: Vec<usize> = ctx.theta.indices().collect();
    let mut vars: Vec<String> = pairs.iter().map(|&(i, j)| pair_label(i, j)).collect();
    vars.extend(singles.iter().map(|&i| single_label(i)));
    let mut sys = LinSystem::new(vars);
    let nv = pairs.len() + singles.len();
    push_nonneg(&mut sys, nv);

    let profile = ctx.profile.expect("weak systems require a profile");
    let r_last = profile.r(ctx.last).clone();
    let moved = match variant {
        WeakVariant::Relocate(u) => Some(u),
        _ => None,
    };

    let mass = match variant {
        WeakVariant::Base => ctx.support_mass() + &r_last * &ctx.n - &ctx.n,
        WeakVariant::Relocate(u) => ctx.spec.alpha(u, ctx.last).clone(),
        WeakVariant::OriginSplit => &r_last * &ctx.n,
    };
    let mut mass_coeffs = vec![Rat::from_integer(1.into()); pairs.len()];
    mass_coeffs.extend(vec![ctx.n.clone(); singles.len()]);
    sys.push("mass", None, mass_coeffs, Relation::Eq, mass);

    // Cluster rows: pairs only. Base variant ranges over subsets of S (full
    // S included); the others range over subsets of all points.
    let cluster_ground = match variant {
        WeakVariant::Base => ctx.spec.s_mask(),
        _ => ctx.spec.all_mask(),
    };
    for j in subsets_of(cluster_ground) {
        if j.intersect(ctx.theta).len() < 2 {
            continue;
        }
        let mut coeffs = pair_indicator(&pairs, j.intersect(ctx.theta));
        coeffs.extend(vec![Rat::zero(); singles.len()]);
        let rhs = (ctx.size_rat(j) - Rat::from_integer(1.into())) * &ctx.n
            - ctx.alpha_sum(j, moved);
        sys.push(format!("cluster J={j}"), Some(j), coeffs, Relation::Lt, rhs);
    }

    // Load rows: pairs plus n * singles, over proper subsets meeting the
    // support. Base variant: proper subsets of S; others: proper subsets of
    // all points. The origin split drops the fold point's own load term.
    let load_ground = match variant {
        WeakVariant::Base => ctx.spec.s_mask(),
        _ => ctx.spec.all_mask(),
    };
    let drop_last = matches!(variant, WeakVariant::OriginSplit);
    for j in subsets_of(load_ground) {
        if j == load_ground || j.intersect(ctx.theta).is_empty() {
            continue;
        }
        let mut coeffs = pair_indicator(&pairs, j.intersect(ctx.theta));
        for &i in &singles {
            coeffs.push(if j.contains(i) {
                ctx.n.clone()
            } else {
                Rat::zero()
            });
        }
        let rhs = ctx.size_rat(j) * &ctx.n - ctx.alpha_sum(j, moved) - ctx.load_sum(j, drop_last);
        sys.push(format!("load J={j}"), Some(j), coeffs, Relation::Lt, rhs);
    }
    Ok(sys)
}

/// Endpoint single-weight system on `S`: per-point floors and caps plus slot
/// rows; the target receives one extra unit of cap room.
fn build_endpoint_singles(ctx: &Ctx, target: usize) -> Result<LinSystem, KernelError> {
    let s = ctx.spec.s_mask();
    let singles: Vec<usize> = s.indices().collect();
    let profile = ctx.profile.expect("endpoint system requires a profile");
    let mut sys = LinSystem::new(singles.iter().map(|&i| single_label(i)).collect());
    let k = singles.len();

    for (v, &i) in singles.iter().enumerate() {
        let mut coeffs = vec![Rat::zero(); k];
        coeffs[v] = -Rat::from_integer(1.into());
        sys.push(
            format!("floor {}", single_label(i)),
            Some(SubsetMask::singleton(i)),
            coeffs,
            Relation::Le,
            -profile.r(i).clone(),
        );
    }
    for (v, &i) in singles.iter().enumerate() {
        let mut coeffs = vec![Rat::zero(); k];
        coeffs[v] = Rat::from_integer(1.into());
        let coupling = ctx.spec.alpha(i, ctx.last);
        if coupling.is_zero() {
            sys.push(
                format!("cap {}", single_label(i)),
                Some(SubsetMask::singleton(i)),
                coeffs,
                Relation::Le,
                profile.r(i).clone(),
            );
        } else {
            let bonus = if i == target {
                Rat::from_integer(1.into())
            } else {
                Rat::zero()
            };
            let rhs = profile.r(i) + (coupling + bonus) / &ctx.n;
            sys.push(
                format!("cap {}", single_label(i)),
                Some(SubsetMask::singleton(i)),
                coeffs,
                Relation::Lt,
                rhs,
            );
        }
    }
    let mass_rhs =
        Rat::from_integer((k as i64).into()) - ctx.tables.alpha_sum(s) / &ctx.n;
    sys.push(
        "mass",
        Some(s),
        vec![Rat::from_integer(1.into()); k],
        Relation::Eq,
        mass_rhs,
    );
    for j in subsets_of(s) {
        if j.is_empty() || j == s {
            continue;
        }
        let coeffs: Vec<Rat> = singles
            .iter()
            .map(|&i| {
                if j.contains(i) {
                    Rat::from_integer(1.into())
                } else {
                    Rat::zero()
                }
            })
            .collect();
        let rhs = ctx.size_rat(j) - ctx.tables.alpha_sum(j) / &ctx.n;
        sys.push(format!("slots J={j}"), Some(j), coeffs, Relation::Lt, rhs);
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rat, rat_int, LebesgueProfile};
    use crate::linsys::{solve, FeasibilityOutcome};

    /// n = 1, three points, couplings (1,3) and (2,3) of 3/4 each.
    fn tri_spec() -> KernelSpec {
        KernelSpec::from_pairs(1, 3, &[((0, 2), rat(3, 4)), ((1, 2), rat(3, 4))]).unwrap()
    }

    #[test]
    fn pair_redistribution_rows_by_hand() {
        // Support {1,2}, one pair variable. Mass = 3/4 + 3/4 - 1 = 1/2; the
        // single cluster row at J = {1,2} reads d < (2-1)*1 - alpha_12 = 1.
        let sys = build_system(SystemKind::PairRedistribution, &tri_spec(), None).unwrap();
        assert_eq!(sys.vars, vec!["d[1,2]"]);
        assert_eq!(sys.rows.len(), 3);
        assert_eq!(sys.rows[0].rel, Relation::Le); // nonneg
        assert_eq!(sys.rows[1].rel, Relation::Eq);
        assert_eq!(sys.rows[1].rhs, rat(1, 2));
        assert_eq!(sys.rows[2].rel, Relation::Lt);
        assert_eq!(sys.rows[2].rhs, rat_int(1));
        assert!(solve(&sys).unwrap().is_feasible());
    }

    #[test]
    fn pair_relocation_zeroes_moved_entry() {
        // Relocate alpha(1,3) = 3/4. Capacity subsets range over all three
        // points; at J = {1,2,3} the right side is 2*1 - (alpha_12 +
        // alpha_23 + alpha_13 with (1,3) zeroed) = 2 - 3/4 = 5/4.
        let sys = build_system(
            SystemKind::PairRelocation { target: 0 },
            &tri_spec(),
            None,
        )
        .unwrap();
        assert_eq!(sys.rows[1].rhs, rat(3, 4)); // mass = moved coupling
        let full = sys
            .rows
            .iter()
            .find(|r| r.subset == Some(SubsetMask::full(3)))
            .unwrap();
        assert_eq!(full.rhs, rat(5, 4));
        // J = {1,2}: rhs = 1 - alpha_12 = 1 (no moved entry inside).
        let s_row = sys
            .rows
            .iter()
            .find(|r| r.subset == Some(SubsetMask::from_one_based(&[1, 2])))
            .unwrap();
        assert_eq!(s_row.rhs, rat_int(1));
    }

    #[test]
    fn profile_pair_spread_emits_min_pairs_and_full_set_nonstrict() {
        let spec = tri_spec();
        let profile =
            LebesgueProfile::new(vec![rat(1, 2), rat(1, 2), rat(0, 1)]).unwrap();
        let sys =
            build_system(SystemKind::ProfilePairRedistribution, &spec, Some(&profile)).unwrap();
        // One subset (J = S = {1,2}) qualifies; it is the ground set, so both
        // its rows are non-strict.
        let s_mask = SubsetMask::from_one_based(&[1, 2]);
        let rows: Vec<_> = sys
            .rows
            .iter()
            .filter(|r| r.subset == Some(s_mask))
            .collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.rel == Relation::Le));
        // cluster: (2-1)*1 - 0 = 1; load: 2*1 - 0 - 1*(1/2 + 1/2) = 1.
        assert_eq!(rows[0].rhs, rat_int(1));
        assert_eq!(rows[1].rhs, rat_int(1));
    }

    #[test]
    fn single_weights_admits_interior_profile() {
        // n = 1, two points, alpha = 1/2: mass row e1 + e2 = 2 - 1/2, slot
        // rows e_i < 1.
        let spec = KernelSpec::from_pairs(1, 2, &[((0, 1), rat(1, 2))]).unwrap();
        let sys = build_system(SystemKind::SingleWeights, &spec, None).unwrap();
        assert_eq!(sys.rows.len(), 6); // 2 pos + mass + 2 slots + total
        let mass = sys.rows.iter().find(|r| r.label == "mass").unwrap();
        assert_eq!(mass.rhs, rat(3, 2));
        match solve(&sys).unwrap() {
            FeasibilityOutcome::Feasible { witness, .. } => {
                assert!(sys.is_satisfied_by(&witness));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn weak_pair_singles_shape() {
        // n = 1, m = 3, r = (1/2, 1/2, 3/4), couplings to the fold point
        // 3/4 each, alpha_12 = 0. Support = {1,2}: one pair var + two
        // singles. Mass = 3/2 + 3/4 - 1 = 5/4.
        let spec = tri_spec();
        let profile =
            LebesgueProfile::new(vec![rat(1, 2), rat(1, 2), rat(3, 4)]).unwrap();
        let sys = build_system(SystemKind::WeakPairSingles, &spec, Some(&profile)).unwrap();
        assert_eq!(sys.vars, vec!["d[1,2]", "e[1]", "e[2]"]);
        let mass = sys.rows.iter().find(|r| r.label == "mass").unwrap();
        assert_eq!(mass.rhs, rat(5, 4));
        assert_eq!(mass.coeffs, vec![rat_int(1), rat_int(1), rat_int(1)]); // n = 1
        // Cluster rows include J = S; load rows exclude it.
        let s_mask = SubsetMask::from_one_based(&[1, 2]);
        assert!(sys
            .rows
            .iter()
            .any(|r| r.label.starts_with("cluster") && r.subset == Some(s_mask)));
        assert!(!sys
            .rows
            .iter()
            .any(|r| r.label.starts_with("load") && r.subset == Some(s_mask)));
        // Load row at J = {1}: 1*1 - 0 - 1*(1/2) = 1/2, coeffs pick e[1].
        let j1 = sys
            .rows
            .iter()
            .find(|r| r.label.starts_with("load") && r.subset == Some(SubsetMask::singleton(0)))
            .unwrap();
        assert_eq!(j1.rhs, rat(1, 2));
        assert_eq!(j1.coeffs, vec![rat_int(0), rat_int(1), rat_int(0)]);
    }

    #[test]
    fn weak_origin_split_drops_fold_load() {
        let spec = tri_spec();
        let profile =
            LebesgueProfile::new(vec![rat(1, 2), rat(1, 2), rat(3, 4)]).unwrap();
        let sys = build_system(SystemKind::WeakOriginSplit, &spec, Some(&profile)).unwrap();
        let mass = sys.rows.iter().find(|r| r.label == "mass").unwrap();
        assert_eq!(mass.rhs, rat(3, 4)); // n * r_last
        // Load row at J = {1,3}: rhs = 2 - alpha_13 - n*(r_1) since the fold
        // point's load is dropped: 2 - 3/4 - 1/2 = 3/4.
        let j = SubsetMask::from_one_based(&[1, 3]);
        let row = sys
            .rows
            .iter()
            .find(|r| r.label.starts_with("load") && r.subset == Some(j))
            .unwrap();
        assert_eq!(row.rhs, rat(3, 4));
    }

    #[test]
    fn endpoint_singles_by_hand() {
        // n = 1, m = 3, alpha_13 = alpha_23 = 1/2, alpha_12 = 1/4,
        // r = (1/4, 1/2, 1), target 1. Caps: e1 < 1/4 + (1/2 + 1)/1 = 7/4,
        // e2 < 1/2 + 1/2 = 1. Mass: e1 + e2 = 2 - 1/4 = 7/4.
        let spec = KernelSpec::from_pairs(
            1,
            3,
            &[((0, 2), rat(1, 2)), ((1, 2), rat(1, 2)), ((0, 1), rat(1, 4))],
        )
        .unwrap();
        let profile = LebesgueProfile::new(vec![rat(1, 4), rat(1, 2), rat_int(1)]).unwrap();
        let sys = build_system(
            SystemKind::EndpointSingles { target: 0 },
            &spec,
            Some(&profile),
        )
        .unwrap();
        let cap1 = sys.rows.iter().find(|r| r.label == "cap e[1]").unwrap();
        assert_eq!(cap1.rhs, rat(7, 4));
        assert_eq!(cap1.rel, Relation::Lt);
        let cap2 = sys.rows.iter().find(|r| r.label == "cap e[2]").unwrap();
        assert_eq!(cap2.rhs, rat_int(1));
        let mass = sys.rows.iter().find(|r| r.label == "mass").unwrap();
        assert_eq!(mass.rhs, rat(7, 4));
        assert!(solve(&sys).unwrap().is_feasible());
    }

    #[test]
    fn uncoupled_point_gets_pinned_in_endpoint_system() {
        // alpha(2,3) = 0 forces floor and cap to pin e2 = r_2 exactly.
        let spec =
            KernelSpec::from_pairs(1, 3, &[((0, 2), rat(1, 2)), ((0, 1), rat(1, 4))]).unwrap();
        let profile = LebesgueProfile::new(vec![rat(1, 4), rat(1, 2), rat_int(1)]).unwrap();
        let sys = build_system(
            SystemKind::EndpointSingles { target: 0 },
            &spec,
            Some(&profile),
        )
        .unwrap();
        let cap2 = sys.rows.iter().find(|r| r.label == "cap e[2]").unwrap();
        assert_eq!(cap2.rel, Relation::Le);
        assert_eq!(cap2.rhs, rat(1, 2));
        if let FeasibilityOutcome::Feasible { witness, .. } = solve(&sys).unwrap() {
            assert_eq!(witness[1], rat(1, 2));
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let spec = tri_spec();
        assert!(matches!(
            build_system(SystemKind::ProfilePairRedistribution, &spec, None),
            Err(KernelError::ProfileRequired)
        ));
        assert!(matches!(
            build_system(SystemKind::PairRelocation { target: 2 }, &spec, None),
            Err(KernelError::TargetNotInSupport(2))
        ));
        // Only one coupled point: pair systems refuse.
        let thin = KernelSpec::from_pairs(1, 3, &[((0, 2), rat(1, 2))]).unwrap();
        assert!(matches!(
            build_system(SystemKind::PairRedistribution, &thin, None),
            Err(KernelError::SupportTooSmall { need: 2, got: 1 })
        ));
    }
}
