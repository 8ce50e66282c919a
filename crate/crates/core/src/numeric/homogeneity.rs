//! Scaling diagnostic: pin the first coordinate at radius `t`, integrate
//! the kernel against pure-power weights in the remaining coordinates, and
//! fit the decay of the result in `t`. When the exponent balance holds the
//! fitted slope matches `-n (1 - r_1)`; any mismatch measures the scaling
//! defect, and truncation sweeps expose outright divergence.

use num_rational::BigRational as Rat;
use num_traits::{One, Signed};
use rand_chacha::ChaCha8Rng;

use super::sampling::{run_batches, Mixture, RadialComponent};
use super::selberg::{float_pairs, linear_fit};
use super::{McEstimate, McMethod, NumericError};
use crate::kernel::{dist, rat_to_f64, KernelSpec};

/// Truncation levels per base radius: pair/origin exclusions shrink by a
/// factor of ten per level while the outer cap grows by a factor of
/// sixteen, so valid regions are nested and the level estimates are
/// monotone. The cap factor is large because a convergent integral with
/// decay margin `b` at infinity still carries `T^{-b}` mass beyond the
/// cap: the margin can be as thin as the exponents allow, and the sweep
/// must let that residual die out before its last levels.
const LEVELS: usize = 6;
const DELTA_START: f64 = 1e-2;
const DELTA_FACTOR: f64 = 0.1;
const CAP_FACTOR: f64 = 16.0;

/// One pinned radius: the sweep of truncated estimates (coarsest first),
/// the finest estimate when the sweep stabilized, and the divergence flag
/// when it kept growing.
#[derive(Clone, Debug)]
pub struct HomogeneityPoint {
    pub base_norm: f64,
    pub estimate: Option<McEstimate>,
    pub divergent: bool,
    pub sweep: Vec<f64>,
}

/// Fitted decay of the pinned-coordinate integral against the prediction
/// from the exponent balance.
#[derive(Clone, Debug)]
pub struct HomogeneityReport {
    pub points: Vec<HomogeneityPoint>,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub predicted_slope: f64,
}

/// Exponents at or above the dimension make a proposal component invalid;
/// clip just below so sampling stays well defined while the truncation
/// sweep reports the divergence.
fn clip_below(n: usize, w: f64) -> f64 {
    w.min(n as f64 * (1.0 - 1e-3))
}

/// Estimate `F(t) = int prod_{i<j} |x_i - x_j|^{-a_ij} prod_{i>=2}
/// |x_i|^{-n r_i} dx_2 .. dx_m` with `x_1 = t e_1` for each given `t`, and
/// fit `log F` against `log t`.
///
/// Each radius runs a coupled truncation sweep (same seed at every level)
/// whose monotone growth or stabilization classifies the integral as
/// divergent or convergent; only convergent radii enter the slope fit.
pub fn homogeneity_ratio_test(
    spec: &KernelSpec,
    profile: &[Rat],
    base_point_norms: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<HomogeneityReport, NumericError> {
    let n = spec.n_rat().to_integer().try_into().unwrap_or(0usize);
    let nf = n as f64;
    let m = spec.m();
    if profile.len() != m {
        return Err(NumericError::BadInput(format!(
            "{} exponent reciprocals for {m} coordinates",
            profile.len()
        )));
    }
    if profile
        .iter()
        .any(|r| r.is_negative() || r > &Rat::one())
    {
        return Err(NumericError::BadInput(
            "exponent reciprocals must lie in [0, 1]".into(),
        ));
    }
    if base_point_norms.is_empty()
        || base_point_norms.iter().any(|t| !(t.is_finite() && *t > 0.0))
    {
        return Err(NumericError::BadInput(
            "base radii must be positive and finite".into(),
        ));
    }
    let rs: Vec<f64> = profile.iter().map(rat_to_f64).collect();
    let pairs = float_pairs(spec);
    // Total decay available to coordinate i at infinity: its own weight
    // plus every kernel exponent tying it to the rest.
    let decay: Vec<f64> = (1..m)
        .map(|i| {
            nf * rs[i]
                + pairs
                    .iter()
                    .filter(|(a, b, _)| *a == i || *b == i)
                    .map(|(_, _, al)| al)
                    .sum::<f64>()
        })
        .collect();

    let mut points = Vec::with_capacity(base_point_norms.len());
    for (t_idx, &t) in base_point_norms.iter().enumerate() {
        let s = 2.0 * t + 2.0;
        let cap_max = s * CAP_FACTOR.powi(LEVELS as i32 - 1);
        let mut base = vec![0.0; n];
        base[0] = t;
        let point_seed = seed.wrapping_add(1000 * (t_idx as u64 + 1));

        let mut level_estimates: Vec<McEstimate> = Vec::with_capacity(LEVELS);
        for level in 0..LEVELS {
            let delta = s * DELTA_START * DELTA_FACTOR.powi(level as i32);
            let cap = s * CAP_FACTOR.powi(level as i32);
            let base = base.clone();
            let rs = rs.clone();
            let pairs = pairs.clone();
            let decay = decay.clone();
            let sample = move |rng: &mut ChaCha8Rng| -> (f64, u64) {
                let mut pts: Vec<Vec<f64>> = Vec::with_capacity(m);
                pts.push(base.clone());
                let mut ln_g = 0.0f64;
                for i in 1..m {
                    let mut parts: Vec<(f64, RadialComponent)> = Vec::new();
                    // Flat coverage of the core and of the full truncated
                    // range: correctness of the weights needs these two.
                    parts.push((
                        0.25,
                        RadialComponent::new(n, vec![0.0; n], 0.0, 0.0, s)
                            .expect("ball proposal"),
                    ));
                    let mut tail_expo = (nf + clip_below(n, decay[i - 1])) / 2.0;
                    if (tail_expo - nf).abs() < 1e-9 {
                        tail_expo = nf;
                    }
                    parts.push((
                        0.2,
                        RadialComponent::new(n, vec![0.0; n], tail_expo, s, cap_max)
                            .expect("tail proposal on a bounded annulus"),
                    ));
                    // Concentration at the origin weight and at every
                    // earlier coordinate this one is tied to.
                    if rs[i] > 0.0 {
                        parts.push((
                            0.25,
                            RadialComponent::new(
                                n,
                                vec![0.0; n],
                                (nf + clip_below(n, nf * rs[i])) / 2.0,
                                0.0,
                                s,
                            )
                            .expect("origin proposal"),
                        ));
                    }
                    let peers: Vec<(usize, f64)> = pairs
                        .iter()
                        .filter(|(a, b, _)| *b == i && *a < i)
                        .map(|(a, _, al)| (*a, *al))
                        .collect();
                    for &(j, alpha) in &peers {
                        let reach = pts[j].iter().map(|c| c * c).sum::<f64>().sqrt() + s;
                        parts.push((
                            0.3 / peers.len() as f64,
                            RadialComponent::new(
                                n,
                                pts[j].clone(),
                                (nf + clip_below(n, alpha)) / 2.0,
                                0.0,
                                reach,
                            )
                            .expect("pair proposal"),
                        ));
                    }
                    let mix = Mixture::new(parts);
                    let x = mix.sample(rng);
                    ln_g += mix.density(&x).ln();
                    pts.push(x);
                }
                // Truncation indicators first: outside the level's valid
                // region the sample contributes zero without touching the
                // possibly enormous integrand.
                for i in 1..m {
                    let r = pts[i].iter().map(|c| c * c).sum::<f64>().sqrt();
                    if r > cap || (rs[i] > 0.0 && r < delta) {
                        return (0.0, 0);
                    }
                }
                for &(i, j, _) in &pairs {
                    if dist(&pts[i], &pts[j]) < delta {
                        return (0.0, 0);
                    }
                }
                let mut ln_f = 0.0f64;
                for i in 1..m {
                    if rs[i] > 0.0 {
                        let r = pts[i].iter().map(|c| c * c).sum::<f64>().sqrt();
                        ln_f -= nf * rs[i] * r.ln();
                    }
                }
                for &(i, j, alpha) in &pairs {
                    ln_f -= alpha * dist(&pts[i], &pts[j]).ln();
                }
                ((ln_f - ln_g).exp(), 0)
            };
            let run = run_batches(point_seed, n_samples, &sample);
            level_estimates.push(McEstimate {
                mean: run.mean,
                stderr: run.stderr,
                n_samples: run.n,
                seed: point_seed,
                method: McMethod::Importance,
            });
        }

        let first = &level_estimates[0];
        let last = &level_estimates[LEVELS - 1];
        let grew = last.mean - first.mean;
        let significant = grew > 3.0 * (first.stderr + last.stderr);
        let tail_rel = if last.mean > 0.0 {
            (last.mean - level_estimates[LEVELS - 3].mean) / last.mean
        } else {
            0.0
        };
        let divergent = significant && tail_rel > 0.05;
        let sweep = level_estimates.iter().map(|e| e.mean).collect();
        points.push(HomogeneityPoint {
            base_norm: t,
            estimate: if divergent {
                None
            } else {
                Some(level_estimates[LEVELS - 1].clone())
            },
            divergent,
            sweep,
        });
    }

    let fit_input: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            p.estimate
                .as_ref()
                .filter(|e| e.mean > 0.0)
                .map(|e| (p.base_norm.ln(), e.mean.ln()))
        })
        .collect();
    let (slope, r_squared) = if fit_input.len() >= 2 {
        let xs: Vec<f64> = fit_input.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit_input.iter().map(|p| p.1).collect();
        let (sl, _, r2) = linear_fit(&xs, &ys);
        (Some(sl), Some(r2))
    } else {
        (None, None)
    };
    Ok(HomogeneityReport {
        points,
        slope,
        r_squared,
        predicted_slope: -nf * (1.0 - rs[0]),
    })
}
