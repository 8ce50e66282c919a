//! Exact-rational data model: kernel exponent matrices, Lebesgue exponent
//! profiles, bitmask subsets, and the memoized subset-sum tables shared by the
//! decision procedures.
//!
//! Conventions: a kernel on `m` points is the symmetric matrix of pairwise
//! exponents `alpha[i][j]`. Indices are 0-based internally; every rendered
//! report is 1-based. The final point (index `m-1`) is the one eliminated by
//! the fold engines, and `S` denotes the first `m-1` indices.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Exact rational scalar used throughout the crate.
pub type Rat = BigRational;

/// Subset enumeration is refused above this point count by default.
pub const DEFAULT_SUBSET_CAP: usize = 16;
/// Hard ceiling on the number of points a kernel may have.
pub const HARD_SUBSET_CAP: usize = 24;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("dimension n must be positive")]
    ZeroDimension,
    #[error("a kernel needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("a kernel may have at most {HARD_SUBSET_CAP} points, got {0}")]
    TooManyPoints(usize),
    #[error("subset enumeration over {m} points exceeds the cap of {cap}")]
    SubsetCapExceeded { m: usize, cap: usize },
    #[error("exponent matrix row {0} has length {1}, expected {2}")]
    RaggedMatrix(usize, usize, usize),
    #[error("exponent matrix must have zero diagonal at index {0}")]
    NonzeroDiagonal(usize),
    #[error("exponent matrix must be symmetric; entries ({0},{1}) and ({1},{0}) differ")]
    Asymmetric(usize, usize),
    #[error("exponent ({0},{1}) must be nonnegative")]
    NegativeExponent(usize, usize),
    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),
    #[error("Lebesgue exponent {0} out of range: reciprocal must lie in [0,1]")]
    ExponentOutOfRange(usize),
    #[error("profile has {0} entries but the kernel has {1} points")]
    ProfileSizeMismatch(usize, usize),
    #[error("restriction must keep at least 2 points")]
    RestrictionTooSmall,
    #[error("system requires at least {need} points coupled to the fold point, got {got}")]
    SupportTooSmall { need: usize, got: usize },
    #[error("target index {0} is not coupled to the fold point")]
    TargetNotInSupport(usize),
    #[error("this system requires a Lebesgue exponent profile")]
    ProfileRequired,
    #[error("endpoint check requires exactly one boundary exponent, found {0}")]
    EndpointCount(usize),
    #[error("subset must sit exactly on the equality boundary for this reduction")]
    NotOnEqualityBoundary,
    #[error("kernel violates the cluster integrability condition required here")]
    IntegrabilityPrecondition,
    #[error("point {0} has dimension {1}, expected {2}")]
    PointDimensionMismatch(usize, usize, usize),
    #[error("point coordinates must be finite")]
    NonFinitePoint,
}

/// Build a rational from an integer numerator and denominator.
///
/// Panics on a zero denominator; intended for literals in code and tests.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Build a rational from an integer.
pub fn rat_int(v: i64) -> Rat {
    BigRational::from_integer(BigInt::from(v))
}

/// Parse `"a/b"` or `"a"` into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat, KernelError> {
    let bad = || KernelError::ParseRational(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(bad());
    }
    let (num_s, den_s) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (t, "1"),
    };
    let num: BigInt = num_s.parse().map_err(|_| bad())?;
    let den: BigInt = den_s.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(num, den))
}

/// Render a rational as `"a/b"`, or `"a"` when the denominator is 1.
pub fn format_rat(r: &Rat) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Best-effort conversion to `f64` (used only on the numeric side).
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Total bit size of a rational, used for resource budgeting.
pub fn rat_bits(r: &Rat) -> u64 {
    r.numer().bits() + r.denom().bits()
}

/// A subset of point indices packed into a bitmask (bit `i` = point `i`,
/// 0-based).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// The full set on `m` points.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= 32);
        if m == 32 {
            SubsetMask(u32::MAX)
        } else {
            SubsetMask((1u32 << m) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        SubsetMask(1u32 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut bits = 0u32;
        for i in iter {
            bits |= 1 << i;
        }
        SubsetMask(bits)
    }

    /// Build from 1-based indices as they appear in reports.
    pub fn from_one_based(indices: &[usize]) -> Self {
        Self::from_indices(indices.iter().map(|&i| i - 1))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn intersect(self, other: Self) -> Self {
        SubsetMask(self.0 & other.0)
    }

    pub fn minus(self, other: Self) -> Self {
        SubsetMask(self.0 & !other.0)
    }

    pub fn insert(self, i: usize) -> Self {
        SubsetMask(self.0 | 1 << i)
    }

    pub fn remove(self, i: usize) -> Self {
        SubsetMask(self.0 & !(1 << i))
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn complement_in(self, ground: Self) -> Self {
        SubsetMask(ground.0 & !self.0)
    }

    /// Iterate member indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// Member indices converted to the 1-based report convention.
    pub fn one_based(self) -> Vec<usize> {
        self.indices().map(|i| i + 1).collect()
    }

    /// All ordered pairs (i, j) with i < j, both members.
    pub fn pairs(self) -> impl Iterator<Item = (usize, usize)> {
        let idx: Vec<usize> = self.indices().collect();
        let mut a = 0usize;
        let mut b = 1usize;
        std::iter::from_fn(move || {
            if a + 1 >= idx.len() {
                return None;
            }
            let out = (idx[a], idx[b]);
            b += 1;
            if b >= idx.len() {
                a += 1;
                b = a + 1;
            }
            if out.0 < out.1 {
                Some(out)
            } else {
                None
            }
        })
    }

    pub fn smallest(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.indices().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Enumerate every subset of `ground`, including the empty set and `ground`
/// itself, in increasing mask order.
pub fn subsets_of(ground: SubsetMask) -> impl Iterator<Item = SubsetMask> {
    let g = ground.0;
    let mut cur: u32 = 0;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = SubsetMask(cur);
        if cur == g {
            done = true;
        } else {
            cur = (cur.wrapping_sub(g)) & g;
        }
        Some(out)
    })
}

/// Nonempty proper subsets of the full set on `m` points.
pub fn nonempty_proper_subsets(m: usize) -> impl Iterator<Item = SubsetMask> {
    let full = SubsetMask::full(m);
    subsets_of(full).filter(move |j| !j.is_empty() && *j != full)
}

fn check_cap(m: usize) -> Result<(), KernelError> {
    if m > DEFAULT_SUBSET_CAP {
        Err(KernelError::SubsetCapExceeded {
            m,
            cap: DEFAULT_SUBSET_CAP,
        })
    } else {
        Ok(())
    }
}

/// A correlation kernel: dimension `n` and the symmetric nonnegative matrix of
/// pairwise exponents on `m` points.
#[derive(Clone, PartialEq, Eq)]
pub struct KernelSpec {
    n: u32,
    alpha: Vec<Vec<Rat>>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KernelSpec(n={}, m={})", self.n, self.m())
    }
}

impl KernelSpec {
    pub fn new(n: u32, alpha: Vec<Vec<Rat>>) -> Result<Self, KernelError> {
        if n == 0 {
            return Err(KernelError::ZeroDimension);
        }
        let m = alpha.len();
        if m < 2 {
            return Err(KernelError::TooFewPoints(m));
        }
        if m > HARD_SUBSET_CAP {
            return Err(KernelError::TooManyPoints(m));
        }
        for (i, row) in alpha.iter().enumerate() {
            if row.len() != m {
                return Err(KernelError::RaggedMatrix(i, row.len(), m));
            }
        }
        for i in 0..m {
            if !alpha[i][i].is_zero() {
                return Err(KernelError::NonzeroDiagonal(i));
            }
            for j in i + 1..m {
                if alpha[i][j] != alpha[j][i] {
                    return Err(KernelError::Asymmetric(i, j));
                }
                if alpha[i][j].is_negative() {
                    return Err(KernelError::NegativeExponent(i, j));
                }
            }
        }
        Ok(KernelSpec { n, alpha })
    }

    /// Convenience constructor from upper-triangle entries given as
    /// `((i, j), value)` with 0-based `i < j`; unlisted pairs are zero.
    pub fn from_pairs(
        n: u32,
        m: usize,
        entries: &[((usize, usize), Rat)],
    ) -> Result<Self, KernelError> {
        let mut alpha = vec![vec![Rat::zero(); m]; m];
        for ((i, j), v) in entries {
            alpha[*i][*j] = v.clone();
            alpha[*j][*i] = v.clone();
        }
        KernelSpec::new(n, alpha)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn n_rat(&self) -> Rat {
        rat_int(self.n as i64)
    }

    /// Number of points.
    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    /// Number of retained points after one fold (`m - 1`).
    pub fn k(&self) -> usize {
        self.m() - 1
    }

    /// Index of the fold variable (the last point).
    pub fn last(&self) -> usize {
        self.m() - 1
    }

    /// All points.
    pub fn all_mask(&self) -> SubsetMask {
        SubsetMask::full(self.m())
    }

    /// All points except the fold variable.
    pub fn s_mask(&self) -> SubsetMask {
        self.all_mask().remove(self.last())
    }

    pub fn alpha(&self, i: usize, j: usize) -> &Rat {
        &self.alpha[i][j]
    }

    pub fn alpha_matrix(&self) -> &Vec<Vec<Rat>> {
        &self.alpha
    }

    /// Sum of exponents over all pairs inside `j`.
    pub fn subset_alpha_sum(&self, j: SubsetMask) -> Rat {
        let mut total = Rat::zero();
        for (a, b) in j.pairs() {
            total += &self.alpha[a][b];
        }
        total
    }

    /// Sum of exponents linking point `i` to each member of `j` (excluding
    /// `i` itself).
    pub fn cross_sum(&self, i: usize, j: SubsetMask) -> Rat {
        let mut total = Rat::zero();
        for u in j.indices() {
            if u != i {
                total += &self.alpha[i][u];
            }
        }
        total
    }

    pub fn total_alpha(&self) -> Rat {
        self.subset_alpha_sum(self.all_mask())
    }

    /// Points in `S` coupled to the fold variable by a positive exponent.
    pub fn fold_support(&self) -> SubsetMask {
        let last = self.last();
        SubsetMask::from_indices(
            self.s_mask()
                .indices()
                .filter(|&i| self.alpha[i][last].is_positive()),
        )
    }

    /// Connected components of the positivity graph, each sorted by smallest
    /// member; singletons are points coupled to nothing.
    pub fn decompose_blocks(&self) -> Vec<SubsetMask> {
        let m = self.m();
        let mut seen = SubsetMask::EMPTY;
        let mut blocks = Vec::new();
        for start in 0..m {
            if seen.contains(start) {
                continue;
            }
            let mut block = SubsetMask::singleton(start);
            let mut frontier = vec![start];
            while let Some(i) = frontier.pop() {
                for j in 0..m {
                    if !block.contains(j) && self.alpha[i][j].is_positive() {
                        block = block.insert(j);
                        frontier.push(j);
                    }
                }
            }
            seen = seen.union(block);
            blocks.push(block);
        }
        blocks
    }

    pub fn is_irreducible(&self) -> bool {
        self.decompose_blocks().len() == 1
    }

    /// Restriction of the kernel to the points in `keep`, preserving index
    /// order.
    pub fn restrict(&self, keep: SubsetMask) -> Result<KernelSpec, KernelError> {
        let idx: Vec<usize> = keep.indices().filter(|&i| i < self.m()).collect();
        if idx.len() < 2 {
            return Err(KernelError::RestrictionTooSmall);
        }
        let mut alpha = vec![vec![Rat::zero(); idx.len()]; idx.len()];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                alpha[a][b] = self.alpha[i][j].clone();
            }
        }
        KernelSpec::new(self.n, alpha)
    }

    /// Copy of the kernel with one symmetric entry replaced.
    pub fn with_alpha(&self, i: usize, j: usize, v: Rat) -> Result<KernelSpec, KernelError> {
        let mut alpha = self.alpha.clone();
        alpha[i][j] = v.clone();
        alpha[j][i] = v;
        KernelSpec::new(self.n, alpha)
    }

    /// Largest numerator/denominator bit width in the matrix.
    pub fn max_bits(&self) -> u64 {
        self.alpha
            .iter()
            .flatten()
            .map(rat_bits)
            .max()
            .unwrap_or(0)
    }
}

/// Memoized table of `subset_alpha_sum` over every subset of the kernel's
/// points, plus optionally the reciprocal-exponent sums of a profile.
pub struct SubsetTables {
    m: usize,
    alpha_sum: Vec<Rat>,
    recip_sum: Option<Vec<Rat>>,
}

impl SubsetTables {
    pub fn build(
        spec: &KernelSpec,
        profile: Option<&LebesgueProfile>,
    ) -> Result<SubsetTables, KernelError> {
        let m = spec.m();
        check_cap(m)?;
        if let Some(p) = profile {
            if p.m() != m {
                return Err(KernelError::ProfileSizeMismatch(p.m(), m));
            }
        }
        let size = 1usize << m;
        let mut alpha_sum = vec![Rat::zero(); size];
        for mask in 1..size {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            alpha_sum[mask] =
                &alpha_sum[rest] + spec.cross_sum(low, SubsetMask(rest as u32));
        }
        let recip_sum = profile.map(|p| {
            let mut table = vec![Rat::zero(); size];
            for mask in 1..size {
                let low = mask.trailing_zeros() as usize;
                let rest = mask & (mask - 1);
                table[mask] = &table[rest] + p.r(low);
            }
            table
        });
        Ok(SubsetTables {
            m,
            alpha_sum,
            recip_sum,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha_sum(&self, j: SubsetMask) -> &Rat {
        &self.alpha_sum[j.0 as usize]
    }

    /// Reciprocal-exponent sum; panics if the table was built without a
    /// profile.
    pub fn recip_sum(&self, j: SubsetMask) -> &Rat {
        &self.recip_sum.as_ref().expect("profile table")[j.0 as usize]
    }
}

/// Which endpoint a boundary Lebesgue exponent sits at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    /// `p = infinity`, reciprocal 0.
    Infinity,
    /// `p = 1`, reciprocal 1.
    One,
}

/// A tuple of Lebesgue exponents stored as exact reciprocals `r_i = 1/p_i`,
/// each in `[0, 1]`.
#[derive(Clone, PartialEq, Eq)]
pub struct LebesgueProfile {
    r: Vec<Rat>,
}

impl fmt::Debug for LebesgueProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.r.iter().map(format_rat).collect();
        write!(f, "LebesgueProfile[{}]", parts.join(", "))
    }
}

impl LebesgueProfile {
    pub fn new(r: Vec<Rat>) -> Result<Self, KernelError> {
        for (i, v) in r.iter().enumerate() {
            if v.is_negative() || v > &rat_int(1) {
                return Err(KernelError::ExponentOutOfRange(i));
            }
        }
        Ok(LebesgueProfile { r })
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Reciprocal exponent of point `i`.
    pub fn r(&self, i: usize) -> &Rat {
        &self.r[i]
    }

    pub fn reciprocals(&self) -> &[Rat] {
        &self.r
    }

    pub fn recip_sum(&self, j: SubsetMask) -> Rat {
        let mut total = Rat::zero();
        for i in j.indices() {
            total += &self.r[i];
        }
        total
    }

    pub fn endpoint(&self, i: usize) -> Option<Endpoint> {
        if self.r[i].is_zero() {
            Some(Endpoint::Infinity)
        } else if self.r[i] == rat_int(1) {
            Some(Endpoint::One)
        } else {
            None
        }
    }

    /// Indices whose exponent sits at either endpoint.
    pub fn endpoints(&self) -> Vec<(usize, Endpoint)> {
        (0..self.m())
            .filter_map(|i| self.endpoint(i).map(|e| (i, e)))
            .collect()
    }

    pub fn is_interior(&self) -> bool {
        self.endpoints().is_empty()
    }

    pub fn restrict(&self, keep: SubsetMask) -> LebesgueProfile {
        LebesgueProfile {
            r: keep
                .indices()
                .filter(|&i| i < self.m())
                .map(|i| self.r[i].clone())
                .collect(),
        }
    }

    pub fn with_r(&self, i: usize, v: Rat) -> Result<LebesgueProfile, KernelError> {
        let mut r = self.r.clone();
        r[i] = v;
        LebesgueProfile::new(r)
    }
}

/// A concrete tuple of points in `R^n`, used by the numeric module.
#[derive(Clone, Debug)]
pub struct PointConfig {
    n: usize,
    points: Vec<Vec<f64>>,
}

impl PointConfig {
    pub fn new(n: usize, points: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(KernelError::PointDimensionMismatch(i, p.len(), n));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(KernelError::NonFinitePoint);
            }
        }
        Ok(PointConfig { n, points })
    }

    /// 1-D convenience constructor.
    pub fn on_line(xs: &[f64]) -> Result<Self, KernelError> {
        PointConfig::new(1, xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        dist(&self.points[i], &self.points[j])
    }

    /// Sum of pairwise distances inside the subset (zero when fewer than two
    /// members).
    pub fn pairwise_sum(&self, j: SubsetMask) -> f64 {
        j.pairs().map(|(a, b)| self.dist(a, b)).sum()
    }

    /// Sum of pairwise distances plus distances to the origin, the base
    /// quantity of the weighted envelope.
    pub fn pairwise_and_origin_sum(&self, j: SubsetMask) -> f64 {
        let origins: f64 = j
            .indices()
            .map(|i| self.points[i].iter().map(|c| c * c).sum::<f64>().sqrt())
            .sum();
        self.pairwise_sum(j) + origins
    }

    pub fn min_gap(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(self.dist(i, j));
            }
        }
        best
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Stable map keyed by subset mask, used wherever reports enumerate subsets.
pub type SubsetMap<V> = BTreeMap<SubsetMask, V>;
