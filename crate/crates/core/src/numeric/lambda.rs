//! Monte Carlo evaluation of the full multilinear functional against
//! concrete witness functions, together with the witnesses' Lebesgue norms,
//! so that the ratio `Lambda(f) / prod_i ||f_i||_{p_i}` can be tracked.

use num_rational::BigRational as Rat;
use num_traits::{One, Signed, Zero};
use rand_chacha::ChaCha8Rng;

use super::quad::upper_tail_power_product;
use super::sampling::{run_batches, sphere_area, vol_ball, Mixture, RadialComponent};
use super::selberg::float_pairs;
use super::{
    McEstimate, McMethod, NumericError, LOG_TAIL_DEFAULT_TRUNCATION, LOG_TAIL_INNER_RADIUS,
};
use crate::kernel::{rat_to_f64, KernelSpec};

/// Radial witness shapes used to probe the functional. All are centered at
/// the origin; products of these across the coordinates recover the standard
/// extremizing and counterexample families.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionDescriptor {
    /// `1` on the ball of the given radius.
    IndicatorBall { radius: f64 },
    /// `|y|^{-exponent}` on the ball of the given radius.
    PowerCutoff { exponent: f64, radius: f64 },
    /// `|y|^{-exponent} (log |y|)^{-log_power}` outside radius 2.
    LogTail { exponent: f64, log_power: f64 },
    /// `|y|^{-exponent}` on all of space; scale-invariant, so every
    /// Lebesgue norm is infinite.
    PurePower { exponent: f64 },
}

impl FunctionDescriptor {
    fn validate(&self) -> Result<(), NumericError> {
        let ok = match self {
            Self::IndicatorBall { radius } => radius.is_finite() && *radius > 0.0,
            Self::PowerCutoff { exponent, radius } => {
                exponent.is_finite() && *exponent > 0.0 && radius.is_finite() && *radius > 0.0
            }
            Self::LogTail {
                exponent,
                log_power,
            } => exponent.is_finite() && *exponent > 0.0 && log_power.is_finite() && *log_power > 0.0,
            Self::PurePower { exponent } => exponent.is_finite() && *exponent > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(NumericError::BadInput(format!("bad witness {self:?}")))
        }
    }

    /// `ln f(y)` at `|y| = r`, or `None` where `f` vanishes. Log tails are
    /// cut off at the given truncation radius.
    fn log_value(&self, r: f64, truncation: f64) -> Option<f64> {
        match self {
            Self::IndicatorBall { radius } => (r <= *radius).then_some(0.0),
            Self::PowerCutoff { exponent, radius } => {
                (r <= *radius).then(|| -exponent * r.ln())
            }
            Self::LogTail {
                exponent,
                log_power,
            } => (r > LOG_TAIL_INNER_RADIUS && r <= truncation)
                .then(|| -exponent * r.ln() - log_power * r.ln().ln()),
            Self::PurePower { exponent } => Some(-exponent * r.ln()),
        }
    }

    /// Outer radius of the (truncated) support.
    fn support_outer(&self, truncation: f64) -> f64 {
        match self {
            Self::IndicatorBall { radius } | Self::PowerCutoff { radius, .. } => *radius,
            Self::LogTail { .. } => truncation,
            Self::PurePower { .. } => f64::INFINITY,
        }
    }

    /// Importance proposal matching the witness shape on its support.
    fn natural_component(&self, n: usize, truncation: f64) -> Result<RadialComponent, NumericError> {
        match self {
            Self::IndicatorBall { radius } => {
                RadialComponent::new(n, vec![0.0; n], 0.0, 0.0, *radius)
            }
            Self::PowerCutoff { exponent, radius } => {
                RadialComponent::new(n, vec![0.0; n], *exponent, 0.0, *radius)
            }
            Self::LogTail { exponent, .. } => RadialComponent::new(
                n,
                vec![0.0; n],
                *exponent,
                LOG_TAIL_INNER_RADIUS,
                truncation,
            ),
            Self::PurePower { .. } => Err(NumericError::InfiniteNorm {
                index: 0,
                detail: "a scale-invariant power witness cannot be sampled".into(),
            }),
        }
    }

    /// `||f||_{L^p(R^n)}`, with `p = +inf` for the sup norm; `None` when the
    /// norm is infinite. Log tails are measured in full, without truncation.
    pub fn lp_norm(&self, n: usize, p: f64) -> Option<f64> {
        let nf = n as f64;
        if p.is_infinite() {
            return match self {
                Self::IndicatorBall { .. } => Some(1.0),
                Self::PowerCutoff { .. } | Self::PurePower { .. } => None,
                Self::LogTail {
                    exponent,
                    log_power,
                } => Some(
                    LOG_TAIL_INNER_RADIUS.powf(-exponent)
                        * LOG_TAIL_INNER_RADIUS.ln().powf(-log_power),
                ),
            };
        }
        match self {
            Self::IndicatorBall { radius } => {
                Some((vol_ball(n) * radius.powi(n as i32)).powf(1.0 / p))
            }
            Self::PowerCutoff { exponent, radius } => {
                let a = exponent * p;
                (a < nf).then(|| {
                    (sphere_area(n) * radius.powf(nf - a) / (nf - a)).powf(1.0 / p)
                })
            }
            Self::LogTail {
                exponent,
                log_power,
            } => {
                let a = exponent * p;
                let lp = log_power * p;
                let l2 = LOG_TAIL_INNER_RADIUS.ln();
                if (a - nf).abs() <= 1e-12 * nf {
                    // Radial integrand r^{-1} (log r)^{-lp}: finite only
                    // when the log power exceeds one.
                    (lp > 1.0)
                        .then(|| (sphere_area(n) * l2.powf(1.0 - lp) / (lp - 1.0)).powf(1.0 / p))
                } else if a > nf {
                    let q = upper_tail_power_product(
                        &[0.0],
                        &[a - nf + 1.0],
                        LOG_TAIL_INNER_RADIUS,
                        1e-11,
                        &|t| t.ln().powf(-lp),
                    )
                    .ok()?;
                    Some((sphere_area(n) * q.value).powf(1.0 / p))
                } else {
                    None
                }
            }
            Self::PurePower { .. } => None,
        }
    }
}

/// Outcome of a witness evaluation: the functional estimate, the witness
/// norms, and their quotient.
#[derive(Clone, Debug)]
pub struct LambdaReport {
    pub estimate: McEstimate,
    pub norms: Vec<f64>,
    pub ratio: f64,
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn profile_to_p(profile: &[Rat]) -> Result<Vec<f64>, NumericError> {
    profile
        .iter()
        .map(|r| {
            if r.is_negative() || r > &Rat::one() {
                return Err(NumericError::BadInput(format!(
                    "exponent reciprocal {r} outside [0, 1]"
                )));
            }
            Ok(if r.is_zero() {
                f64::INFINITY
            } else {
                1.0 / rat_to_f64(r)
            })
        })
        .collect()
}

/// Estimate the multilinear functional on the given witnesses with log
/// tails truncated at the default radius, and report the norm ratio.
pub fn lambda_estimate(
    spec: &KernelSpec,
    profile: &[Rat],
    descriptors: &[FunctionDescriptor],
    n_samples: u64,
    seed: u64,
) -> Result<LambdaReport, NumericError> {
    lambda_estimate_truncated(
        spec,
        profile,
        descriptors,
        LOG_TAIL_DEFAULT_TRUNCATION,
        n_samples,
        seed,
    )
}

/// [`lambda_estimate`] with an explicit log-tail truncation radius, for
/// sweeps that track the functional's growth as the truncation recedes.
/// Norms are always the full (untruncated) norms, so on a divergent
/// instance the reported ratio grows without bound along the sweep.
pub fn lambda_estimate_truncated(
    spec: &KernelSpec,
    profile: &[Rat],
    descriptors: &[FunctionDescriptor],
    truncation: f64,
    n_samples: u64,
    seed: u64,
) -> Result<LambdaReport, NumericError> {
    let n = spec.n_rat().to_integer().try_into().unwrap_or(0usize);
    let m = spec.m();
    if profile.len() != m || descriptors.len() != m {
        return Err(NumericError::BadInput(format!(
            "{} witnesses and {} exponents for {m} coordinates",
            descriptors.len(),
            profile.len()
        )));
    }
    if !(truncation.is_finite() && truncation > LOG_TAIL_INNER_RADIUS) {
        return Err(NumericError::BadInput(format!(
            "truncation radius {truncation} must exceed {LOG_TAIL_INNER_RADIUS}"
        )));
    }
    for d in descriptors {
        d.validate()?;
    }
    let ps = profile_to_p(profile)?;
    let mut norms = Vec::with_capacity(m);
    for (i, (d, p)) in descriptors.iter().zip(&ps).enumerate() {
        match d.lp_norm(n, *p) {
            Some(v) => norms.push(v),
            None => {
                return Err(NumericError::InfiniteNorm {
                    index: i,
                    detail: format!("{d:?} has infinite L^{p} norm"),
                })
            }
        }
    }
    let pairs = float_pairs(spec);
    if let Some((i, j, a)) = pairs.iter().find(|(_, _, a)| *a >= n as f64) {
        return Err(NumericError::Divergent(format!(
            "pair exponent a[{i}][{j}] = {a} is not locally integrable in R^{n}"
        )));
    }
    let naturals: Vec<RadialComponent> = descriptors
        .iter()
        .map(|d| d.natural_component(n, truncation))
        .collect::<Result<_, _>>()?;
    let outers: Vec<f64> = descriptors
        .iter()
        .map(|d| d.support_outer(truncation))
        .collect();
    // Peers of coordinate i among the earlier coordinates, with the pair
    // exponent; these get concentrating proposal components.
    let peers: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            pairs
                .iter()
                .filter(|(a, b, _)| *b == i && *a < i)
                .map(|(a, _, al)| (*a, *al))
                .collect()
        })
        .collect();

    // Draws that round exactly onto a singularity (a pair coincidence or
    // the origin under a singular witness) are scored zero, never redrawn:
    // the true mass of a float rounding cell is negligible, while a redraw
    // would replace near-zero-weight samples with typical ones and bias
    // the mean upward.
    let sample = move |rng: &mut ChaCha8Rng| -> (f64, u64) {
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut ln_g = 0.0f64;
        for i in 0..m {
            let mut parts: Vec<(f64, RadialComponent)> = Vec::with_capacity(peers[i].len() + 1);
            let natural_weight = if peers[i].is_empty() { 1.0 } else { 0.5 };
            parts.push((natural_weight, naturals[i].clone()));
            for &(j, alpha) in &peers[i] {
                let reach = outers[i] + euclid(&pts[j]) + 1.0;
                // Exponents below n were checked above, so construction
                // cannot fail on a bounded positive shell.
                let comp = RadialComponent::new(
                    n,
                    pts[j].clone(),
                    (n as f64 + alpha) / 2.0,
                    0.0,
                    reach,
                )
                .expect("pair proposal on a bounded shell");
                parts.push((0.5 / peers[i].len() as f64, comp));
            }
            let mix = Mixture::new(parts);
            let x = mix.sample(rng);
            ln_g += mix.density(&x).ln();
            pts.push(x);
        }
        let mut ln_f = 0.0f64;
        for (i, d) in descriptors.iter().enumerate() {
            let r = euclid(&pts[i]);
            if r == 0.0 && !matches!(d, FunctionDescriptor::IndicatorBall { .. }) {
                return (0.0, 0);
            }
            match d.log_value(r, truncation) {
                Some(lv) => ln_f += lv,
                None => return (0.0, 0),
            }
        }
        for &(i, j, alpha) in &pairs {
            let d = crate::kernel::dist(&pts[i], &pts[j]);
            if d == 0.0 {
                return (0.0, 0);
            }
            ln_f -= alpha * d.ln();
        }
        ((ln_f - ln_g).exp(), 0)
    };
    let run = run_batches(seed, n_samples, &sample);
    let norm_product: f64 = norms.iter().product();
    Ok(LambdaReport {
        estimate: McEstimate {
            mean: run.mean,
            stderr: run.stderr,
            n_samples: run.n,
            seed,
            method: McMethod::Importance,
        },
        ratio: run.mean / norm_product,
        norms,
    })
}
