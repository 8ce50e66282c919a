//! Weighted set families and the merge rearrangement they support.
//!
//! A [`MeasureState`] holds nonnegative rational weights `mu_J` on a family
//! of subsets of a ground set, together with a support set `theta` and a
//! scalar `drive`. The derived pair excess `lambda_ij = sum_{J contains i,j}
//! mu_J - drive` must stay nonnegative for every pair inside `theta`; merge
//! steps preserve that automatically.
//!
//! One merge step takes two support sets, moves the smaller of their weights
//! onto their union, and onto their intersection when the family keeps it.
//! Repeated merging concentrates weight onto large sets; the quantity of
//! interest is `omega`, the weight sitting on supersets of `theta`. A state
//! is *stable* when every two support sets are nested or disjoint, and
//! `omega` can still grow exactly when the support sets that miss `theta`
//! contain a chain of pairwise-linked sets whose union covers `theta`
//! ([`MeasureState::omega_stability_criterion`]).
//!
//! [`greedy_maximize_omega`] drives merges along such covering chains with
//! deterministic tie-breaks. Whether merging always reaches a stable state
//! in finitely many steps is an open question, so the driver takes a step
//! cap and reports honestly whether it stabilized.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use crate::kernel::{
    format_rat, rat_int, subsets_of, KernelSpec, LebesgueProfile, Rat, SubsetMap, SubsetMask,
};

/// Errors from state validation, merging, and objective evaluation.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SetFamilyError {
    #[error("support set {0} is not contained in the ground set {1}")]
    ThetaOutsideGround(SubsetMask, SubsetMask),
    #[error("set {0} lies outside the declared family")]
    SetOutsideFamily(SubsetMask),
    #[error("set {0} carries a negative weight")]
    NegativeWeight(SubsetMask),
    #[error("derived pair excess at {0} is negative")]
    NegativeLambda(SubsetMask),
    #[error("merging requires positive weight on {0}")]
    ZeroWeight(SubsetMask),
    #[error("this family kind only merges intersecting sets")]
    DisjointMerge,
    #[error("greedy concentration needs unit drive, found {0}")]
    DriveNotUnit(String),
    #[error("greedy concentration needs at least two points in {0}")]
    ThetaTooSmall(SubsetMask),
    #[error("no objective coefficient for support set {0}")]
    MissingCoefficient(SubsetMask),
    #[error("ground set {0} does not fit a kernel with {1} points")]
    GroundMismatch(SubsetMask, usize),
}

/// Which subsets of the ground set may carry weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// Subsets of the reduced ground set meeting `theta` in two points or
    /// more.
    Fm,
    /// Same membership test over the ground set extended by the fold point.
    FmBar,
    /// Every nonempty subset of the ground set; intersections survive a
    /// merge whenever they are nonempty.
    AllNonempty,
}

impl FamilyKind {
    /// Membership test relative to `theta` (the ground-set containment is
    /// checked separately).
    pub fn admits(self, j: SubsetMask, theta: SubsetMask) -> bool {
        match self {
            FamilyKind::Fm | FamilyKind::FmBar => j.intersect(theta).len() >= 2,
            FamilyKind::AllNonempty => !j.is_empty(),
        }
    }
}

/// Nonnegative weights on a subset family, with the derived pair excesses
/// kept consistent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasureState {
    ground: SubsetMask,
    theta: SubsetMask,
    family_kind: FamilyKind,
    mu: SubsetMap<Rat>,
    drive: Rat,
}

impl MeasureState {
    /// Validate and build a state. Zero weights are dropped, duplicate sets
    /// are summed, negative weights and out-of-family sets are rejected, and
    /// every pair inside `theta` must satisfy `lambda_ij >= 0`.
    pub fn new(
        ground: SubsetMask,
        theta: SubsetMask,
        family_kind: FamilyKind,
        weights: impl IntoIterator<Item = (SubsetMask, Rat)>,
        drive: Rat,
    ) -> Result<Self, SetFamilyError> {
        if !theta.is_subset_of(ground) {
            return Err(SetFamilyError::ThetaOutsideGround(theta, ground));
        }
        let mut mu: SubsetMap<Rat> = SubsetMap::new();
        for (j, w) in weights {
            if w.is_negative() {
                return Err(SetFamilyError::NegativeWeight(j));
            }
            if w.is_zero() {
                continue;
            }
            if !j.is_subset_of(ground) || !family_kind.admits(j, theta) {
                return Err(SetFamilyError::SetOutsideFamily(j));
            }
            *mu.entry(j).or_insert_with(Rat::zero) += w;
        }
        let state = MeasureState {
            ground,
            theta,
            family_kind,
            mu,
            drive,
        };
        for (i, j) in theta.pairs() {
            if state.lambda(i, j).is_negative() {
                return Err(SetFamilyError::NegativeLambda(SubsetMask::from_indices([
                    i, j,
                ])));
            }
        }
        Ok(state)
    }

    pub fn ground(&self) -> SubsetMask {
        self.ground
    }

    pub fn theta(&self) -> SubsetMask {
        self.theta
    }

    pub fn family_kind(&self) -> FamilyKind {
        self.family_kind
    }

    pub fn drive(&self) -> &Rat {
        &self.drive
    }

    /// Weight of one set (zero when absent from the support).
    pub fn weight(&self, j: SubsetMask) -> Rat {
        self.mu.get(&j).cloned().unwrap_or_else(Rat::zero)
    }

    /// The positively weighted sets, in mask order.
    pub fn support(&self) -> impl Iterator<Item = SubsetMask> + '_ {
        self.mu.keys().copied()
    }

    pub fn weights(&self) -> &SubsetMap<Rat> {
        &self.mu
    }

    pub fn total_mass(&self) -> Rat {
        self.mu.values().sum()
    }

    /// Weight of all support sets containing point `i`.
    pub fn point_mass(&self, i: usize) -> Rat {
        self.mu
            .iter()
            .filter(|(j, _)| j.contains(i))
            .map(|(_, w)| w)
            .sum()
    }

    /// Weight of all support sets containing both `i` and `j`.
    pub fn pair_mass(&self, i: usize, j: usize) -> Rat {
        self.mu
            .iter()
            .filter(|(s, _)| s.contains(i) && s.contains(j))
            .map(|(_, w)| w)
            .sum()
    }

    /// Derived pair excess `pair_mass(i, j) - drive`; nonnegative on pairs
    /// inside `theta` by construction.
    pub fn lambda(&self, i: usize, j: usize) -> Rat {
        self.pair_mass(i, j) - &self.drive
    }

    /// Smallest pair excess over the pairs of `theta`; `None` when `theta`
    /// has fewer than two points.
    pub fn min_lambda(&self) -> Option<Rat> {
        self.theta.pairs().map(|(i, j)| self.lambda(i, j)).min()
    }

    fn in_family(&self, j: SubsetMask) -> bool {
        j.is_subset_of(self.ground) && self.family_kind.admits(j, self.theta)
    }

    /// One merge step: move `w = min(mu_J1, mu_J2)` off both sets, onto
    /// their union, and onto their intersection when the family keeps it.
    /// Nested arguments are a no-op. `Fm`/`FmBar` refuse disjoint pairs.
    pub fn merge_step(
        &self,
        j1: SubsetMask,
        j2: SubsetMask,
    ) -> Result<MeasureState, SetFamilyError> {
        let w1 = self.weight(j1);
        if !w1.is_positive() {
            return Err(SetFamilyError::ZeroWeight(j1));
        }
        let w2 = self.weight(j2);
        if !w2.is_positive() {
            return Err(SetFamilyError::ZeroWeight(j2));
        }
        let inter = j1.intersect(j2);
        if inter.is_empty() && self.family_kind != FamilyKind::AllNonempty {
            return Err(SetFamilyError::DisjointMerge);
        }
        if j1.is_subset_of(j2) || j2.is_subset_of(j1) {
            return Ok(self.clone());
        }
        let w = if w1 <= w2 { w1 } else { w2 };
        let mut mu = self.mu.clone();
        for j in [j1, j2] {
            let entry = mu.get_mut(&j).expect("positive weight present");
            *entry -= &w;
            if entry.is_zero() {
                mu.remove(&j);
            }
        }
        let union = j1.union(j2);
        debug_assert!(self.in_family(union));
        *mu.entry(union).or_insert_with(Rat::zero) += &w;
        if !inter.is_empty() && self.in_family(inter) {
            *mu.entry(inter).or_insert_with(Rat::zero) += &w;
        }
        Ok(MeasureState {
            mu,
            ..self.clone()
        })
    }

    /// True when every two support sets are nested or disjoint.
    pub fn is_stable(&self) -> bool {
        let support: Vec<SubsetMask> = self.support().collect();
        for (a, j1) in support.iter().enumerate() {
            for j2 in &support[a + 1..] {
                let inter = j1.intersect(*j2);
                if !inter.is_empty() && inter != *j1 && inter != *j2 {
                    return false;
                }
            }
        }
        true
    }

    /// Weight concentrated on supersets of `theta`.
    pub fn omega(&self) -> Rat {
        self.mu
            .iter()
            .filter(|(j, _)| self.theta.is_subset_of(**j))
            .map(|(_, w)| w)
            .sum()
    }

    /// True when no merge sequence of intersecting support sets can grow
    /// `omega`: the support sets missing `theta` admit no covering chain.
    pub fn omega_stability_criterion(&self) -> bool {
        let missing: Vec<SubsetMask> = self
            .support()
            .filter(|j| !self.theta.is_subset_of(*j))
            .collect();
        !covering_chain_exists(&missing, self.theta)
    }
}

/// True when some chain of pairwise-linked sets in `sets` has a union
/// covering `theta`. Any connected subcollection of the pairwise
/// intersection graph orders into such a chain, so this checks whether some
/// connected component's union contains `theta`.
pub fn covering_chain_exists(sets: &[SubsetMask], theta: SubsetMask) -> bool {
    covering_components(sets).iter().any(|&root| {
        let mut union = SubsetMask::EMPTY;
        for (idx, &s) in sets.iter().enumerate() {
            if component_root(&intersection_forest(sets), idx) == root {
                union = union.union(s);
            }
        }
        theta.is_subset_of(union)
    })
}

/// Union-find parents over the pairwise intersection graph.
fn intersection_forest(sets: &[SubsetMask]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..sets.len()).collect();
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            if !sets[i].intersect(sets[j]).is_empty() {
                let (ri, rj) = (component_root(&parent, i), component_root(&parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    parent
}

fn component_root(parent: &[usize], mut i: usize) -> usize {
    while parent[i] != i {
        i = parent[i];
    }
    i
}

/// Roots of all components (deduplicated).
fn covering_components(sets: &[SubsetMask]) -> Vec<usize> {
    let parent = intersection_forest(sets);
    let mut roots: Vec<usize> = (0..sets.len())
        .map(|i| component_root(&parent, i))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots
}

/// Result of the greedy concentration driver.
#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    pub final_state: MeasureState,
    pub omega_value: Rat,
    /// Whether the final state is stable (nested-or-disjoint support).
    pub reached_stable: bool,
    pub steps_taken: usize,
    /// Closed-form lower bound `drive + min pair excess` of the initial
    /// state; the reached `omega_value` should meet or exceed it.
    pub ceiling: Rat,
}

/// Suggested step budget for a ground set: `10 * 2^|ground|`.
pub fn default_step_cap(ground: SubsetMask) -> usize {
    10usize << ground.len().min(20)
}

/// Concentrate weight onto supersets of `theta` by merging along covering
/// chains until `omega` can no longer grow, a step cap intervenes, or the
/// state stabilizes.
///
/// Step selection is deterministic: among crossing pairs inside a covering
/// component, take the smallest combined set size, then the lexicographically
/// smallest masks. Requires unit drive and at least two points in `theta`.
pub fn greedy_maximize_omega(
    state: &MeasureState,
    max_steps: usize,
) -> Result<GreedyOutcome, SetFamilyError> {
    if *state.drive() != rat_int(1) {
        return Err(SetFamilyError::DriveNotUnit(format_rat(state.drive())));
    }
    if state.theta().len() < 2 {
        return Err(SetFamilyError::ThetaTooSmall(state.theta()));
    }
    let ceiling = rat_int(1) + state.min_lambda().expect("theta has a pair");
    let mut current = state.clone();
    let mut steps_taken = 0;
    while steps_taken < max_steps {
        let Some((j1, j2)) = best_covering_merge(&current) else {
            break;
        };
        current = current.merge_step(j1, j2)?;
        steps_taken += 1;
    }
    Ok(GreedyOutcome {
        omega_value: current.omega(),
        reached_stable: current.is_stable(),
        steps_taken,
        ceiling,
        final_state: current,
    })
}

/// The next merge on a covering chain, if `omega` can still grow.
fn best_covering_merge(state: &MeasureState) -> Option<(SubsetMask, SubsetMask)> {
    let missing: Vec<SubsetMask> = state
        .support()
        .filter(|j| !state.theta().is_subset_of(*j))
        .collect();
    let parent = intersection_forest(&missing);
    // Component roots whose union covers theta.
    let mut covering: BTreeSet<usize> = BTreeSet::new();
    for root in covering_components(&missing) {
        let mut union = SubsetMask::EMPTY;
        for (idx, &s) in missing.iter().enumerate() {
            if component_root(&parent, idx) == root {
                union = union.union(s);
            }
        }
        if state.theta().is_subset_of(union) {
            covering.insert(root);
        }
    }
    if covering.is_empty() {
        return None;
    }
    let mut best: Option<(usize, SubsetMask, SubsetMask)> = None;
    for i in 0..missing.len() {
        if !covering.contains(&component_root(&parent, i)) {
            continue;
        }
        for j in (i + 1)..missing.len() {
            if component_root(&parent, j) != component_root(&parent, i) {
                continue;
            }
            let (a, b) = if missing[i].0 <= missing[j].0 {
                (missing[i], missing[j])
            } else {
                (missing[j], missing[i])
            };
            let inter = a.intersect(b);
            if inter.is_empty() || inter == a || inter == b {
                continue;
            }
            let key = (a.len() + b.len(), a.0, b.0);
            if best
                .as_ref()
                .is_none_or(|(k, x, y)| key < (*k, x.0, y.0))
            {
                best = Some((key.0, a, b));
            }
        }
    }
    best.map(|(_, a, b)| (a, b))
}

/// Immutable per-subset coefficients for the objective functional
/// `drive * c0 - sum mu_J * c_J`.
#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    c0: Rat,
    coefficients: SubsetMap<Rat>,
}

impl ObjectiveSpec {
    pub fn new(c0: Rat, coefficients: SubsetMap<Rat>) -> Self {
        ObjectiveSpec { c0, coefficients }
    }

    pub fn c0(&self) -> &Rat {
        &self.c0
    }

    pub fn coefficient(&self, j: SubsetMask) -> Option<&Rat> {
        self.coefficients.get(&j)
    }

    /// Cluster-capacity coefficients `c_J = (|J|-1) n - alpha(J)` with drive
    /// coefficient `c0 = ` coupling mass of the fold point over `theta`
    /// minus `n`, snapshotted from a kernel.
    pub fn cluster_form(
        spec: &KernelSpec,
        ground: SubsetMask,
        theta: SubsetMask,
        kind: FamilyKind,
    ) -> Result<Self, SetFamilyError> {
        if !ground.is_subset_of(spec.all_mask()) {
            return Err(SetFamilyError::GroundMismatch(ground, spec.m()));
        }
        let n = spec.n_rat();
        let c0 = spec.cross_sum(spec.last(), theta) - &n;
        let mut coefficients = SubsetMap::new();
        for j in subsets_of(ground) {
            if kind.admits(j, theta) {
                let c = rat_int(j.len() as i64 - 1) * &n - spec.subset_alpha_sum(j);
                coefficients.insert(j, c);
            }
        }
        Ok(ObjectiveSpec { c0, coefficients })
    }

    /// Like [`ObjectiveSpec::cluster_form`], but each coefficient is the
    /// minimum of the cluster capacity and the load capacity
    /// `|J| n - alpha(J) - n * r(J)`.
    pub fn min_form(
        spec: &KernelSpec,
        profile: &LebesgueProfile,
        ground: SubsetMask,
        theta: SubsetMask,
        kind: FamilyKind,
    ) -> Result<Self, SetFamilyError> {
        if !ground.is_subset_of(spec.all_mask()) {
            return Err(SetFamilyError::GroundMismatch(ground, spec.m()));
        }
        let n = spec.n_rat();
        let c0 = spec.cross_sum(spec.last(), theta) - &n;
        let mut coefficients = SubsetMap::new();
        for j in subsets_of(ground) {
            if kind.admits(j, theta) {
                let cluster = rat_int(j.len() as i64 - 1) * &n - spec.subset_alpha_sum(j);
                let load = rat_int(j.len() as i64) * &n
                    - spec.subset_alpha_sum(j)
                    - &n * profile.recip_sum(j);
                coefficients.insert(j, if cluster <= load { cluster } else { load });
            }
        }
        Ok(ObjectiveSpec { c0, coefficients })
    }
}

/// Exact value of `drive * c0 - sum mu_J * c_J`.
pub fn objective_value(
    state: &MeasureState,
    obj: &ObjectiveSpec,
) -> Result<Rat, SetFamilyError> {
    let mut value = state.drive() * &obj.c0;
    for (j, w) in state.weights() {
        let c = obj
            .coefficients
            .get(j)
            .ok_or(SetFamilyError::MissingCoefficient(*j))?;
        value -= w * c;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rat;

    fn mask(indices: &[usize]) -> SubsetMask {
        SubsetMask::from_indices(indices.iter().copied())
    }

    /// Three pairwise couplings of unit weight on a three-point theta.
    fn triangle() -> MeasureState {
        let g = mask(&[0, 1, 2]);
        MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [
                (mask(&[0, 1]), rat_int(1)),
                (mask(&[0, 2]), rat_int(1)),
                (mask(&[1, 2]), rat_int(1)),
            ],
            rat_int(1),
        )
        .unwrap()
    }

    #[test]
    fn merge_moves_weight_to_union_and_drops_thin_intersection() {
        let state = triangle();
        let next = state.merge_step(mask(&[0, 1]), mask(&[1, 2])).unwrap();
        assert_eq!(next.weight(mask(&[0, 1])), rat_int(0));
        assert_eq!(next.weight(mask(&[1, 2])), rat_int(0));
        assert_eq!(next.weight(mask(&[0, 2])), rat_int(1));
        assert_eq!(next.weight(mask(&[0, 1, 2])), rat_int(1));
        // The surviving pair now sits under two sets: excess 1.
        assert_eq!(next.lambda(0, 2), rat_int(1));
        assert_eq!(next.lambda(0, 1), rat_int(0));
        assert_eq!(next.lambda(1, 2), rat_int(0));
    }

    #[test]
    fn merge_of_nested_sets_is_a_no_op() {
        let g = mask(&[0, 1, 2]);
        let state = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [
                (mask(&[0, 1]), rat_int(1)),
                (mask(&[0, 1, 2]), rat_int(2)),
            ],
            Rat::zero(),
        )
        .unwrap();
        let next = state.merge_step(mask(&[0, 1]), mask(&[0, 1, 2])).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn merge_of_disjoint_sets_feeds_only_the_union() {
        let g = mask(&[0, 1, 2, 3]);
        let state = MeasureState::new(
            g,
            mask(&[0]),
            FamilyKind::AllNonempty,
            [(mask(&[0]), rat_int(1)), (mask(&[1]), rat_int(2))],
            Rat::zero(),
        )
        .unwrap();
        let next = state.merge_step(mask(&[0]), mask(&[1])).unwrap();
        assert_eq!(next.weight(mask(&[0])), rat_int(0));
        assert_eq!(next.weight(mask(&[1])), rat_int(1));
        assert_eq!(next.weight(mask(&[0, 1])), rat_int(1));
        assert_eq!(next.total_mass(), rat_int(2));
    }

    #[test]
    fn disjoint_merge_is_refused_outside_all_nonempty() {
        let g = mask(&[0, 1, 2, 3]);
        let state = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [
                (mask(&[0, 1]), rat_int(2)),
                (mask(&[2, 3]), rat_int(2)),
                (mask(&[0, 1, 2, 3]), rat_int(1)),
            ],
            rat_int(1),
        )
        .unwrap();
        let err = state.merge_step(mask(&[0, 1]), mask(&[2, 3])).unwrap_err();
        assert_eq!(err, SetFamilyError::DisjointMerge);
    }

    #[test]
    fn stability_is_the_three_relation_test() {
        let g = mask(&[0, 1, 2]);
        let nested = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [
                (mask(&[0, 2]), rat_int(1)),
                (mask(&[0, 1, 2]), rat_int(1)),
            ],
            Rat::zero(),
        )
        .unwrap();
        assert!(nested.is_stable());

        let crossing = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [
                (mask(&[0, 1]), rat_int(1)),
                (mask(&[1, 2]), rat_int(1)),
            ],
            Rat::zero(),
        )
        .unwrap();
        assert!(!crossing.is_stable());

        let empty =
            MeasureState::new(g, g, FamilyKind::Fm, [], Rat::zero()).unwrap();
        assert!(empty.is_stable());
    }

    #[test]
    fn covering_chain_detection() {
        let theta = mask(&[0, 1, 2]);
        assert!(covering_chain_exists(
            &[mask(&[0, 1]), mask(&[1, 2])],
            theta
        ));
        assert!(!covering_chain_exists(
            &[mask(&[0, 1]), mask(&[2, 3])],
            theta
        ));
        assert!(!covering_chain_exists(&[], theta));
    }

    #[test]
    fn omega_counts_supersets_of_theta() {
        let state = triangle();
        assert_eq!(state.omega(), rat_int(0));
        let next = state.merge_step(mask(&[0, 1]), mask(&[1, 2])).unwrap();
        assert_eq!(next.omega(), rat_int(1));

        let g = mask(&[0, 1, 2]);
        let top = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(g, rat_int(1))],
            rat_int(1),
        )
        .unwrap();
        assert_eq!(top.omega(), rat_int(1));

        let off = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(mask(&[0, 1]), rat_int(1))],
            Rat::zero(),
        )
        .unwrap();
        assert_eq!(off.omega(), rat_int(0));
    }

    #[test]
    fn omega_stability_matches_covering_chains() {
        let g = mask(&[0, 1, 2]);
        let unstable = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [
                (mask(&[0, 1]), rat_int(1)),
                (mask(&[1, 2]), rat_int(1)),
            ],
            Rat::zero(),
        )
        .unwrap();
        assert!(!unstable.omega_stability_criterion());

        let settled = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(g, rat_int(1))],
            rat_int(1),
        )
        .unwrap();
        assert!(settled.omega_stability_criterion());

        let mixed = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(mask(&[0, 1]), rat_int(1)), (g, rat_int(1))],
            rat_int(1),
        )
        .unwrap();
        assert!(mixed.omega_stability_criterion());
    }

    #[test]
    fn greedy_concentrates_the_triangle() {
        let outcome = greedy_maximize_omega(&triangle(), 100).unwrap();
        assert_eq!(outcome.omega_value, rat_int(1));
        assert_eq!(outcome.ceiling, rat_int(1));
        assert!(outcome.reached_stable);
        assert!(outcome.omega_value >= outcome.ceiling);
    }

    #[test]
    fn greedy_stops_immediately_on_concentrated_weight() {
        let g = mask(&[0, 1, 2]);
        let state = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(g, rat_int(1))],
            rat_int(1),
        )
        .unwrap();
        let outcome = greedy_maximize_omega(&state, 100).unwrap();
        assert_eq!(outcome.steps_taken, 0);
        assert_eq!(outcome.omega_value, rat_int(1));
        assert!(outcome.reached_stable);
    }

    #[test]
    fn greedy_meets_the_lower_bound_on_the_six_pair_square() {
        let g = mask(&[0, 1, 2, 3]);
        let weights: Vec<(SubsetMask, Rat)> = g.pairs()
            .map(|(i, j)| (mask(&[i, j]), rat_int(1)))
            .collect();
        let state =
            MeasureState::new(g, g, FamilyKind::Fm, weights, rat_int(1)).unwrap();
        let outcome = greedy_maximize_omega(&state, default_step_cap(g)).unwrap();
        assert!(outcome.omega_value >= outcome.ceiling);
        assert!(outcome.reached_stable);
    }

    #[test]
    fn objective_vanishes_on_pure_ground_weight() {
        let g = mask(&[0, 1, 2]);
        let state = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(g, rat(5, 2))],
            rat(5, 2),
        )
        .unwrap();
        let mut coefficients = SubsetMap::new();
        coefficients.insert(g, rat(7, 3));
        let obj = ObjectiveSpec::new(rat(7, 3), coefficients);
        assert_eq!(objective_value(&state, &obj).unwrap(), Rat::zero());
    }

    #[test]
    fn objective_reduces_to_drive_term_under_zero_coefficients() {
        let g = mask(&[0, 1, 2]);
        let state = MeasureState::new(
            g,
            g,
            FamilyKind::Fm,
            [(g, rat_int(1))],
            rat_int(1),
        )
        .unwrap();
        let mut coefficients = SubsetMap::new();
        coefficients.insert(g, Rat::zero());
        let obj = ObjectiveSpec::new(rat(-3, 4), coefficients);
        assert_eq!(objective_value(&state, &obj).unwrap(), rat(-3, 4));
    }

    #[test]
    fn cluster_objective_does_not_decrease_across_the_worked_merge() {
        // Kernel snapshot: the fold point couples to all of theta with 1/2
        // each; the remaining pairs carry 1/10.
        let spec = KernelSpec::from_pairs(
            1,
            4,
            &[
                ((0, 3), rat(1, 2)),
                ((1, 3), rat(1, 2)),
                ((2, 3), rat(1, 2)),
                ((0, 1), rat(1, 10)),
                ((0, 2), rat(1, 10)),
                ((1, 2), rat(1, 10)),
            ],
        )
        .unwrap();
        let theta = mask(&[0, 1, 2]);
        let obj =
            ObjectiveSpec::cluster_form(&spec, theta, theta, FamilyKind::Fm).unwrap();
        let state = triangle();
        let before = objective_value(&state, &obj).unwrap();
        let next = state.merge_step(mask(&[0, 1]), mask(&[1, 2])).unwrap();
        let after = objective_value(&next, &obj).unwrap();
        assert!(after >= before);
    }

    #[test]
    fn validation_rejects_bad_states() {
        let g = mask(&[0, 1, 2]);
        assert_eq!(
            MeasureState::new(
                g,
                mask(&[0, 3]),
                FamilyKind::Fm,
                [],
                Rat::zero()
            )
            .unwrap_err(),
            SetFamilyError::ThetaOutsideGround(mask(&[0, 3]), g)
        );
        assert_eq!(
            MeasureState::new(
                g,
                g,
                FamilyKind::Fm,
                [(mask(&[0]), rat_int(1))],
                Rat::zero()
            )
            .unwrap_err(),
            SetFamilyError::SetOutsideFamily(mask(&[0]))
        );
        assert_eq!(
            MeasureState::new(
                g,
                g,
                FamilyKind::Fm,
                [(mask(&[0, 1]), rat(-1, 2))],
                Rat::zero()
            )
            .unwrap_err(),
            SetFamilyError::NegativeWeight(mask(&[0, 1]))
        );
        // Unit drive with no weight on pair {1,3}: excess -1.
        assert_eq!(
            MeasureState::new(
                g,
                g,
                FamilyKind::Fm,
                [(mask(&[0, 1]), rat_int(1))],
                rat_int(1)
            )
            .unwrap_err(),
            SetFamilyError::NegativeLambda(mask(&[0, 2]))
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use std::collections::HashSet;

        /// Deterministic small state from raw seeds: ground of `m` points,
        /// theta of size >= 2, weights in quarter steps, and drive chosen as
        /// the smallest pair mass so every excess is nonnegative.
        fn build_state(
            m: usize,
            kind: FamilyKind,
            theta_seed: u32,
            set_seeds: &[u32],
            weight_seeds: &[u32],
        ) -> Option<MeasureState> {
            let ground = SubsetMask::full(m);
            let mut theta = SubsetMask(theta_seed % (1u32 << m)).intersect(ground);
            if theta.len() < 2 {
                theta = mask(&[0, 1]);
            }
            let family: Vec<SubsetMask> = subsets_of(ground)
                .filter(|j| kind.admits(*j, theta))
                .collect();
            if family.is_empty() {
                return None;
            }
            let weights: Vec<(SubsetMask, Rat)> = set_seeds
                .iter()
                .zip(weight_seeds)
                .map(|(s, w)| {
                    (
                        family[*s as usize % family.len()],
                        rat(i64::from(w % 4) + 1, 4),
                    )
                })
                .collect();
            let probe = MeasureState::new(
                ground,
                theta,
                kind,
                weights.clone(),
                Rat::zero(),
            )
            .unwrap();
            let drive = theta
                .pairs()
                .map(|(i, j)| probe.pair_mass(i, j))
                .min()
                .unwrap_or_else(Rat::zero);
            Some(MeasureState::new(ground, theta, kind, weights, drive).unwrap())
        }

        fn kind_from(seed: u32) -> FamilyKind {
            match seed % 3 {
                0 => FamilyKind::Fm,
                1 => FamilyKind::FmBar,
                _ => FamilyKind::AllNonempty,
            }
        }

        /// All merges currently allowed on the state, nested no-ops skipped.
        fn admissible_merges(state: &MeasureState) -> Vec<(SubsetMask, SubsetMask)> {
            let support: Vec<SubsetMask> = state.support().collect();
            let mut out = Vec::new();
            for (a, j1) in support.iter().enumerate() {
                for j2 in &support[a + 1..] {
                    let inter = j1.intersect(*j2);
                    if inter == *j1 || inter == *j2 {
                        continue;
                    }
                    if inter.is_empty()
                        && state.family_kind() != FamilyKind::AllNonempty
                    {
                        continue;
                    }
                    out.push((*j1, *j2));
                }
            }
            out
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(96))]

            #[test]
            fn merge_respects_all_monotonicity_claims(
                m in 3usize..=4,
                kind_seed in 0u32..3,
                theta_seed in 0u32..16,
                set_seeds in prop::collection::vec(0u32..64, 4),
                weight_seeds in prop::collection::vec(0u32..4, 4),
            ) {
                let kind = kind_from(kind_seed);
                let Some(state) = build_state(m, kind, theta_seed, &set_seeds, &weight_seeds) else {
                    return Ok(());
                };
                for (j1, j2) in admissible_merges(&state) {
                    let next = state.merge_step(j1, j2).unwrap();
                    let inter = j1.intersect(j2);
                    let kept = !inter.is_empty() && kind.admits(inter, state.theta());
                    let w = state.weight(j1).min(state.weight(j2));

                    // Total mass: conserved when the intersection survives,
                    // otherwise down by exactly the moved weight.
                    let expected = if kept {
                        state.total_mass()
                    } else {
                        state.total_mass() - &w
                    };
                    prop_assert_eq!(next.total_mass(), expected);

                    // Per-point mass never grows; it drops exactly for the
                    // points of a dropped intersection.
                    for i in 0..m {
                        let before = state.point_mass(i);
                        let after = next.point_mass(i);
                        prop_assert!(after <= before);
                        let drops = !kept && inter.contains(i);
                        prop_assert_eq!(after < before, drops);
                    }

                    // Pair excesses inside theta never decrease.
                    for (i, j) in state.theta().pairs() {
                        prop_assert!(next.lambda(i, j) >= state.lambda(i, j));
                    }

                    // Weight on theta-supersets never decreases.
                    prop_assert!(next.omega() >= state.omega());
                }
            }

            #[test]
            fn objective_is_monotone_when_coefficients_are_submodular(
                m in 3usize..=4,
                kind_seed in 0u32..2,
                theta_seed in 0u32..16,
                set_seeds in prop::collection::vec(0u32..64, 4),
                weight_seeds in prop::collection::vec(0u32..4, 4),
                alpha_seeds in prop::collection::vec(0u32..4, 10),
                min_form in proptest::bool::ANY,
            ) {
                let kind = kind_from(kind_seed);
                let Some(state) = build_state(m, kind, theta_seed, &set_seeds, &weight_seeds) else {
                    return Ok(());
                };
                // A kernel over m+1 points whose clusters all stay strictly
                // integrable: exponents at most 1/4 on each pair keep every
                // cluster sum below (|J|-1)n.
                let big = m + 1;
                let mut alpha = vec![vec![Rat::zero(); big]; big];
                let mut it = alpha_seeds.iter();
                for i in 0..big {
                    for j in (i + 1)..big {
                        let v = rat(i64::from(it.next().unwrap() % 4), 16);
                        alpha[i][j] = v.clone();
                        alpha[j][i] = v;
                    }
                }
                let spec = KernelSpec::new(1, alpha).unwrap();
                let profile = LebesgueProfile::new(vec![rat(1, 2); big]).unwrap();
                let obj = if min_form {
                    ObjectiveSpec::min_form(&spec, &profile, state.ground(), state.theta(), kind).unwrap()
                } else {
                    ObjectiveSpec::cluster_form(&spec, state.ground(), state.theta(), kind).unwrap()
                };
                for (j1, j2) in admissible_merges(&state) {
                    let inter = j1.intersect(j2);
                    let kept = !inter.is_empty() && kind.admits(inter, state.theta());
                    let c1 = obj.coefficient(j1).unwrap().clone();
                    let c2 = obj.coefficient(j2).unwrap().clone();
                    let mut rhs = obj.coefficient(j1.union(j2)).unwrap().clone();
                    if kept {
                        rhs += obj.coefficient(inter).unwrap();
                    }
                    // The coefficient family is submodular on these kernels…
                    prop_assert!(c1 + c2 >= rhs);
                    // …and therefore the objective cannot decrease.
                    let next = state.merge_step(j1, j2).unwrap();
                    let before = objective_value(&state, &obj).unwrap();
                    let after = objective_value(&next, &obj).unwrap();
                    prop_assert!(after >= before);
                }
            }
        }

        /// Exhaustive check that some merge sequence changes omega, up to
        /// the given depth, memoizing visited states.
        fn omega_can_grow(state: &MeasureState, depth: usize) -> bool {
            fn explore(
                state: &MeasureState,
                base: &Rat,
                depth: usize,
                seen: &mut HashSet<MeasureState>,
            ) -> bool {
                if state.omega() != *base {
                    return true;
                }
                if depth == 0 {
                    return false;
                }
                for (j1, j2) in admissible_merges(state) {
                    let next = state.merge_step(j1, j2).unwrap();
                    if seen.insert(next.clone())
                        && explore(&next, base, depth - 1, seen)
                    {
                        return true;
                    }
                }
                false
            }
            let mut seen = HashSet::new();
            explore(state, &state.omega(), depth, &mut seen)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn stability_criterion_matches_exhaustive_search(
                m in 3usize..=4,
                kind_seed in 0u32..2,
                theta_seed in 0u32..16,
                set_seeds in prop::collection::vec(0u32..64, 4),
                weight_seeds in prop::collection::vec(0u32..4, 4),
            ) {
                // Intersecting merges only (the chain lemma's setting), so
                // the family kinds with that precondition are exercised.
                let kind = kind_from(kind_seed);
                let Some(state) = build_state(m, kind, theta_seed, &set_seeds, &weight_seeds) else {
                    return Ok(());
                };
                let criterion = state.omega_stability_criterion();
                let observed = omega_can_grow(&state, 8);
                prop_assert_eq!(criterion, !observed);
            }
        }
    }
}
