//! Monte Carlo estimation of the correlation-kernel integral over a product
//! of balls, and the truncation diagnostic that distinguishes convergent
//! from divergent instances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sampling::{run_batches, unit_vector, vol_ball};
use super::{McEstimate, McMethod, NumericError, COINCIDENCE_FACTOR};
use crate::conditions::check_integrability;
use crate::kernel::{rat_to_f64, KernelSpec};

/// Kernel exponents as floats, pairs with zero exponent dropped.
pub(crate) fn float_pairs(spec: &KernelSpec) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..spec.m() {
        for j in (i + 1)..spec.m() {
            let a = rat_to_f64(spec.alpha(i, j));
            if a != 0.0 {
                out.push((i, j, a));
            }
        }
    }
    out
}

pub(crate) fn kernel_value(points: &[Vec<f64>], pairs: &[(usize, usize, f64)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j, a)| crate::kernel::dist(&points[i], &points[j]).powf(-a))
        .product()
}

/// Uniform-sampling estimate of the kernel integral over `(B_radius(0))^m`.
/// Draws with a pair closer than the coincidence guard are redrawn and
/// counted; a redraw rate above one percent aborts the run.
pub fn mc_selberg_ball_radius(
    spec: &KernelSpec,
    radius: f64,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, NumericError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(NumericError::BadInput(format!("ball radius {radius}")));
    }
    let violations = check_integrability(spec)?;
    if let Some(first) = violations.first() {
        return Err(NumericError::Divergent(format!(
            "cluster {first} is overloaded; use the divergence diagnostic"
        )));
    }
    let n = spec.n() as usize;
    let m = spec.m();
    let pairs = float_pairs(spec);
    let scale = vol_ball(n).powi(m as i32) * radius.powi((n * m) as i32);
    let guard = COINCIDENCE_FACTOR * 2.0 * radius;

    let sample = |rng: &mut ChaCha8Rng| -> (f64, u64) {
        let mut redraws = 0u64;
        loop {
            let points: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
                    unit_vector(rng, n).into_iter().map(|d| d * r).collect()
                })
                .collect();
            let coincident = pairs
                .iter()
                .any(|&(i, j, _)| crate::kernel::dist(&points[i], &points[j]) < guard);
            if coincident {
                redraws += 1;
                continue;
            }
            return (kernel_value(&points, &pairs) * scale, redraws);
        }
    };
    let run = run_batches(seed, n_samples, &sample);
    if run.resampled * 100 > run.n {
        return Err(NumericError::CoincidenceRate {
            resampled: run.resampled,
            total: run.n,
        });
    }
    Ok(McEstimate {
        mean: run.mean,
        stderr: run.stderr,
        n_samples: run.n,
        seed,
        method: McMethod::Uniform,
    })
}

/// The unit-ball case of [`mc_selberg_ball_radius`].
pub fn mc_selberg_ball(
    spec: &KernelSpec,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, NumericError> {
    mc_selberg_ball_radius(spec, 1.0, n_samples, seed)
}

/// Shape of a fitted truncation-growth curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthKind {
    /// Estimates grow like `log(1/rho)`: the worst overloaded cluster is
    /// exactly critical.
    Logarithmic,
    /// Estimates grow like `rho^{-e}`: some cluster is strictly overloaded.
    PowerLaw,
}

/// Least-squares fit of the truncation growth, in the space matching its
/// kind (estimate vs `log(1/rho)` for logarithmic, log-log for power law).
#[derive(Clone, Copy, Debug)]
pub struct GrowthFit {
    pub kind: GrowthKind,
    /// Fitted slope: the log coefficient, or the power-law exponent.
    pub rate: f64,
    pub r_squared: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceVerdict {
    Diverges,
    Converges,
    /// The sequence is neither stabilizing nor cleanly growing; reported
    /// honestly instead of guessed.
    Inconclusive,
}

/// Output of [`divergence_diagnostic`].
#[derive(Clone, Debug)]
pub struct DivergenceReport {
    pub verdict: DivergenceVerdict,
    /// `(rho, estimate)` per exclusion radius, in the input order.
    pub estimates: Vec<(f64, McEstimate)>,
    pub fit: Option<GrowthFit>,
    /// Growth shape the exact layer predicts (`None` when every cluster is
    /// strictly integrable).
    pub predicted: Option<GrowthKind>,
    /// Predicted power-law exponent: the largest cluster overload.
    pub predicted_exponent: Option<f64>,
}

pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Estimate the unit-ball kernel integral with all pair distances truncated
/// below by each `rho` in turn, then classify the growth of the estimates.
///
/// The same seed (hence the same sample points) serves every radius, so the
/// nested indicators make the estimate sequence monotone by construction and
/// the noise between levels is strongly correlated.
///
/// A `Diverges` verdict requires monotone growth over at least four decades
/// of `rho` with a regression fit of `R^2 > 0.99` in the predicted shape;
/// stabilizing estimates yield `Converges`; everything else is
/// `Inconclusive`.
pub fn divergence_diagnostic(
    spec: &KernelSpec,
    exclusion_radii: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<DivergenceReport, NumericError> {
    if exclusion_radii.len() < 2 {
        return Err(NumericError::BadInput(
            "need at least two exclusion radii".into(),
        ));
    }
    if exclusion_radii
        .windows(2)
        .any(|w| !(w[0] > w[1] && w[1] > 0.0))
    {
        return Err(NumericError::BadInput(
            "exclusion radii must be positive and strictly decreasing".into(),
        ));
    }
    let n = spec.n() as usize;
    let m = spec.m();
    let pairs = float_pairs(spec);
    let scale = vol_ball(n).powi(m as i32);

    let estimates: Vec<(f64, McEstimate)> = exclusion_radii
        .iter()
        .map(|&rho| {
            let sample = |rng: &mut ChaCha8Rng| -> (f64, u64) {
                let points: Vec<Vec<f64>> = (0..m)
                    .map(|_| {
                        let r = rng.gen::<f64>().powf(1.0 / n as f64);
                        unit_vector(rng, n).into_iter().map(|d| d * r).collect()
                    })
                    .collect();
                let excluded = (0..m).any(|i| {
                    ((i + 1)..m)
                        .any(|j| crate::kernel::dist(&points[i], &points[j]) <= rho)
                });
                if excluded {
                    (0.0, 0)
                } else {
                    (kernel_value(&points, &pairs) * scale, 0)
                }
            };
            let run = run_batches(seed, n_samples, &sample);
            (
                rho,
                McEstimate {
                    mean: run.mean,
                    stderr: run.stderr,
                    n_samples: run.n,
                    seed,
                    method: McMethod::Uniform,
                },
            )
        })
        .collect();

    // Exact-layer prediction: the largest cluster overload sets the rate.
    let violations = check_integrability(spec)?;
    let worst: Option<f64> = violations
        .iter()
        .map(|&j| {
            rat_to_f64(&spec.subset_alpha_sum(j))
                - ((j.len() - 1) as f64) * spec.n() as f64
        })
        .max_by(f64::total_cmp);
    let predicted = worst.map(|e| {
        if e == 0.0 {
            GrowthKind::Logarithmic
        } else {
            GrowthKind::PowerLaw
        }
    });
    let predicted_exponent = worst.filter(|e| *e > 0.0);

    let values: Vec<f64> = estimates.iter().map(|(_, e)| e.mean).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let first = &estimates[0].1;
    let last = &estimates[estimates.len() - 1].1;
    let growth_sigma = 3.0 * (first.stderr + last.stderr);
    let grew = last.mean - first.mean > growth_sigma;
    // Converging sweeps still pick up most of their near-singular mass
    // early on, so total growth proves nothing; the discriminator is the
    // final increment, which must vanish both against the noise and
    // against the level itself.
    let tail_stable = estimates
        .windows(2)
        .next_back()
        .map(|w| {
            let inc = (w[1].1.mean - w[0].1.mean).abs();
            inc <= 3.0 * (w[0].1.stderr + w[1].1.stderr)
                && inc <= 0.02 * w[1].1.mean.max(1.0)
        })
        .unwrap_or(false);
    let decades = (exclusion_radii[0] / exclusion_radii[exclusion_radii.len() - 1]).log10();

    let xs: Vec<f64> = exclusion_radii.iter().map(|r| (1.0 / r).ln()).collect();
    let fit_for = |kind: GrowthKind| -> Option<GrowthFit> {
        let ys: Vec<f64> = match kind {
            GrowthKind::Logarithmic => values.clone(),
            GrowthKind::PowerLaw => {
                if values.iter().any(|v| *v <= 0.0) {
                    return None;
                }
                values.iter().map(|v| v.ln()).collect()
            }
        };
        let (slope, _, r2) = linear_fit(&xs, &ys);
        Some(GrowthFit {
            kind,
            rate: slope,
            r_squared: r2,
        })
    };

    let (verdict, fit) = if tail_stable {
        (DivergenceVerdict::Converges, None)
    } else if monotone && grew && decades >= 4.0 {
        let fit = match predicted {
            Some(kind) => fit_for(kind),
            // No exact prediction available: report the better-shaped fit.
            None => match (fit_for(GrowthKind::Logarithmic), fit_for(GrowthKind::PowerLaw)) {
                (Some(a), Some(b)) => Some(if a.r_squared >= b.r_squared { a } else { b }),
                (a, b) => a.or(b),
            },
        };
        match &fit {
            Some(f) if f.r_squared > 0.99 => (DivergenceVerdict::Diverges, fit),
            _ => (DivergenceVerdict::Inconclusive, fit),
        }
    } else {
        (DivergenceVerdict::Inconclusive, None)
    };

    Ok(DivergenceReport {
        verdict,
        estimates,
        fit,
        predicted,
        predicted_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::super::quad::interval_power_product_with;
    use super::*;
    use crate::kernel::{rat, KernelSpec};

    fn pair_spec(alpha_num: i64, alpha_den: i64) -> KernelSpec {
        KernelSpec::from_pairs(1, 2, &[((0, 1), rat(alpha_num, alpha_den))]).unwrap()
    }

    /// Exact value of the two-point unit-interval integral with the pair
    /// distance truncated below by `rho`:
    /// `int int_{[-1,1]^2, |x-y|>rho} |x-y|^{-a} = 2 int_rho^2 (2-t) t^{-a} dt`.
    fn truncated_pair_oracle(a: f64, rho: f64) -> f64 {
        2.0 * interval_power_product_with(&[0.0], &[a], rho, 2.0, 1e-10, &|t| 2.0 - t)
            .unwrap()
            .value
    }

    #[test]
    fn zero_exponents_reproduce_the_cube_volume_exactly() {
        let spec = KernelSpec::new(1, vec![vec![crate::kernel::rat_int(0); 3]; 3]).unwrap();
        let est = mc_selberg_ball(&spec, 2_000, 5).unwrap();
        assert_eq!(est.mean, 8.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn two_point_estimate_matches_the_quadrature_oracle() {
        // Closed form of the untruncated integral: 2 int_0^2 (2-t) t^{-1/2}
        // = 16 sqrt(2) / 3. The quadrature handles the endpoint singularity
        // without any truncation.
        let exact = 16.0 * 2f64.sqrt() / 3.0;
        let oracle = truncated_pair_oracle(0.5, 0.0);
        assert!((oracle - exact).abs() < 1e-6, "oracle {oracle} vs {exact}");
        let est = mc_selberg_ball(&pair_spec(1, 2), 400_000, 9).unwrap();
        assert!(
            (est.mean - exact).abs() < 3.0 * est.stderr,
            "mc {} +- {} vs exact {exact}",
            est.mean,
            est.stderr
        );
        assert!(est.stderr / est.mean < 0.02);
    }

    #[test]
    fn estimates_are_bit_reproducible() {
        let spec = pair_spec(1, 2);
        let a = mc_selberg_ball(&spec, 50_000, 123).unwrap();
        let b = mc_selberg_ball(&spec, 50_000, 123).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn radius_scaling_follows_the_exact_exponent() {
        // Three points, all pairs 2/5: the integral over radius-R balls is
        // R^{mn - sum alpha} times the unit value.
        let spec = KernelSpec::from_pairs(
            1,
            3,
            &[
                ((0, 1), rat(2, 5)),
                ((0, 2), rat(2, 5)),
                ((1, 2), rat(2, 5)),
            ],
        )
        .unwrap();
        let unit = mc_selberg_ball(&spec, 300_000, 21).unwrap();
        let double = mc_selberg_ball_radius(&spec, 2.0, 300_000, 22).unwrap();
        let predicted = unit.mean * 2f64.powf(3.0 - 1.2);
        let sigma = 2f64.powf(3.0 - 1.2) * unit.stderr + double.stderr;
        assert!(
            (double.mean - predicted).abs() < 3.0 * sigma,
            "scaled {} vs predicted {predicted} (sigma {sigma})",
            double.mean
        );
    }

    #[test]
    fn overloaded_cluster_is_rejected_up_front() {
        assert!(matches!(
            mc_selberg_ball(&pair_spec(3, 2), 1_000, 1),
            Err(NumericError::Divergent(_))
        ));
    }

    const DIAG_RADII: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

    #[test]
    fn critical_pair_diverges_logarithmically() {
        let report =
            divergence_diagnostic(&pair_spec(1, 1), &DIAG_RADII, 1_500_000, 31).unwrap();
        assert_eq!(report.verdict, DivergenceVerdict::Diverges);
        assert_eq!(report.predicted, Some(GrowthKind::Logarithmic));
        let fit = report.fit.unwrap();
        assert_eq!(fit.kind, GrowthKind::Logarithmic);
        assert!(fit.r_squared > 0.99, "r2 = {}", fit.r_squared);
        // Every estimate agrees with the exact truncated integral.
        for (rho, est) in &report.estimates {
            let exact = truncated_pair_oracle(1.0, *rho);
            assert!(
                (est.mean - exact).abs() < 3.0 * est.stderr,
                "rho={rho}: {} +- {} vs exact {exact}",
                est.mean,
                est.stderr
            );
        }
    }

    #[test]
    fn overloaded_pair_diverges_with_the_predicted_power() {
        let report =
            divergence_diagnostic(&pair_spec(3, 2), &DIAG_RADII, 1_500_000, 37).unwrap();
        assert_eq!(report.verdict, DivergenceVerdict::Diverges);
        assert_eq!(report.predicted, Some(GrowthKind::PowerLaw));
        assert_eq!(report.predicted_exponent, Some(0.5));
        let fit = report.fit.unwrap();
        assert_eq!(fit.kind, GrowthKind::PowerLaw);
        assert!(fit.r_squared > 0.99, "r2 = {}", fit.r_squared);
        assert!(
            (fit.rate - 0.5).abs() < 0.075,
            "fitted exponent {}",
            fit.rate
        );
    }

    #[test]
    fn integrable_pair_converges() {
        let report =
            divergence_diagnostic(&pair_spec(1, 2), &DIAG_RADII, 400_000, 41).unwrap();
        assert_eq!(report.verdict, DivergenceVerdict::Converges);
        assert!(report.predicted.is_none());
        assert!(report.fit.is_none());
    }
}
