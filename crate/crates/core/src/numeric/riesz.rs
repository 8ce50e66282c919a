//! The composition integral `int prod_i |t - x_i|^{-a_i} dt` over `R^n`,
//! its ball-restricted critical variant, and the closed-form envelope
//! functions that bound it.

use rand_chacha::ChaCha8Rng;

use super::quad::line_power_product;
use super::sampling::{run_batches, Mixture, RadialComponent};
use super::{McEstimate, McMethod, NumericError, COINCIDENCE_FACTOR};
use crate::kernel::{dist, PointConfig, SubsetMask};

fn validate_composition(
    n: usize,
    alphas: &[f64],
    config: &PointConfig,
) -> Result<(), NumericError> {
    if config.n() != n {
        return Err(NumericError::BadInput(format!(
            "config lives in R^{} but n = {n}",
            config.n()
        )));
    }
    if config.len() != alphas.len() {
        return Err(NumericError::BadInput(format!(
            "{} exponents for {} points",
            alphas.len(),
            config.len()
        )));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && *a < n as f64)) {
        return Err(NumericError::Divergent(format!(
            "every exponent must lie in (0, {n}) for local integrability"
        )));
    }
    Ok(())
}

/// Merged exponent mass per group of (numerically) coincident points; the
/// composition integral is finite only when every merged mass stays below
/// `n`.
fn coincident_overload(n: usize, alphas: &[f64], config: &PointConfig) -> Option<f64> {
    let scale = spread_scale(config);
    let mut group_mass: Vec<f64> = Vec::new();
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..config.len() {
        match reps
            .iter()
            .position(|&r| config.dist(r, i) < COINCIDENCE_FACTOR * scale)
        {
            Some(g) => group_mass[g] += alphas[i],
            None => {
                reps.push(i);
                group_mass.push(alphas[i]);
            }
        }
    }
    group_mass.into_iter().find(|m| *m >= n as f64)
}

fn spread_scale(config: &PointConfig) -> f64 {
    let mut scale = 1.0f64;
    for p in config.points() {
        for c in p {
            scale = scale.max(c.abs());
        }
    }
    scale
}

fn centroid(config: &PointConfig) -> Vec<f64> {
    let n = config.n();
    let mut c = vec![0.0; n];
    for p in config.points() {
        for (acc, x) in c.iter_mut().zip(p) {
            *acc += x;
        }
    }
    for acc in &mut c {
        *acc /= config.len() as f64;
    }
    c
}

/// Estimate `int_{R^n} prod_i |t - x_i|^{-a_i} dt`.
///
/// Requires `sum a_i > n` (decay at infinity) and every coincident group of
/// centers carrying total exponent `< n` (local integrability). The
/// importance sampler mixes per-center concentrating power laws, a covering
/// ball, and a Pareto tail; in one dimension the adaptive-quadrature oracle
/// is available instead.
pub fn riesz_composition(
    n: usize,
    alphas: &[f64],
    config: &PointConfig,
    method: McMethod,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, NumericError> {
    validate_composition(n, alphas, config)?;
    let total: f64 = alphas.iter().sum();
    if total <= n as f64 {
        return Err(NumericError::Divergent(format!(
            "total exponent {total} does not decay at infinity in R^{n}"
        )));
    }
    if let Some(mass) = coincident_overload(n, alphas, config) {
        return Err(NumericError::Divergent(format!(
            "coincident centers carry merged exponent {mass} >= {n}"
        )));
    }
    match method {
        McMethod::Quadrature1d => {
            if n != 1 {
                return Err(NumericError::UnsupportedMethod {
                    method,
                    detail: format!("the quadrature oracle is one-dimensional, n = {n}"),
                });
            }
            let centers: Vec<f64> = config.points().iter().map(|p| p[0]).collect();
            let q = line_power_product(&centers, alphas, 1e-10)?;
            Ok(McEstimate {
                mean: q.value,
                stderr: q.error,
                n_samples: q.evals as u64,
                seed,
                method,
            })
        }
        McMethod::Importance => {
            let c = centroid(config);
            let reach = config
                .points()
                .iter()
                .map(|p| dist(p, &c))
                .fold(0.0f64, f64::max);
            let s = 2.0 * reach + 2.0;
            let k = config.len();
            let mut parts = Vec::with_capacity(k + 2);
            for (p, a) in config.points().iter().zip(alphas) {
                parts.push((
                    0.5 / k as f64,
                    RadialComponent::new(n, p.clone(), (n as f64 + a) / 2.0, 0.0, s)?,
                ));
            }
            parts.push((0.3, RadialComponent::new(n, c.clone(), 0.0, 0.0, s)?));
            parts.push((
                0.2,
                RadialComponent::new(
                    n,
                    c,
                    (n as f64 + total) / 2.0,
                    s,
                    f64::INFINITY,
                )?,
            ));
            let mix = Mixture::new(parts);
            // The proposal concentrates near the centers on purpose and the
            // weight f/g vanishes there, so near-coincidences are welcome.
            // A draw that rounds onto a center exactly is scored zero, never
            // redrawn: for far-out centers the float grid makes exact hits
            // common enough that redrawing them (replacing near-zero-weight
            // samples by typical ones) visibly biases the mean upward,
            // while the true mass of the rounding cell is negligible. The
            // weight is assembled in log space to dodge overflow.
            let sample = |rng: &mut ChaCha8Rng| -> (f64, u64) {
                let t = mix.sample(rng);
                if config.points().iter().any(|p| dist(&t, p) == 0.0) {
                    return (0.0, 0);
                }
                let ln_f: f64 = config
                    .points()
                    .iter()
                    .zip(alphas)
                    .map(|(p, a)| -a * dist(&t, p).ln())
                    .sum();
                ((ln_f - mix.density(&t).ln()).exp(), 0)
            };
            let run = run_batches(seed, n_samples, &sample);
            Ok(McEstimate {
                mean: run.mean,
                stderr: run.stderr,
                n_samples: run.n,
                seed,
                method,
            })
        }
        McMethod::Uniform => Err(NumericError::UnsupportedMethod {
            method,
            detail: "the composition integral has unbounded domain".into(),
        }),
    }
}

/// Estimate the composition integral restricted to the ball `|t| <= outer`
/// (the critical-total-exponent object: finite for points in the unit ball
/// even when `sum a_i = n`).
pub fn ball_composition(
    n: usize,
    alphas: &[f64],
    config: &PointConfig,
    outer: f64,
    method: McMethod,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, NumericError> {
    validate_composition(n, alphas, config)?;
    if !(outer.is_finite() && outer > 0.0) {
        return Err(NumericError::BadInput(format!("outer radius {outer}")));
    }
    if let Some(mass) = coincident_overload(n, alphas, config) {
        return Err(NumericError::Divergent(format!(
            "coincident centers carry merged exponent {mass} >= {n}"
        )));
    }
    match method {
        McMethod::Quadrature1d => {
            if n != 1 {
                return Err(NumericError::UnsupportedMethod {
                    method,
                    detail: format!("the quadrature oracle is one-dimensional, n = {n}"),
                });
            }
            let centers: Vec<f64> = config.points().iter().map(|p| p[0]).collect();
            let q = super::quad::interval_power_product(
                &centers, alphas, -outer, outer, 1e-10,
            )?;
            Ok(McEstimate {
                mean: q.value,
                stderr: q.error,
                n_samples: q.evals as u64,
                seed,
                method,
            })
        }
        McMethod::Importance => {
            let k = config.len();
            let mut parts = Vec::with_capacity(k + 1);
            for (p, a) in config.points().iter().zip(alphas) {
                parts.push((
                    0.5 / k as f64,
                    RadialComponent::new(
                        n,
                        p.clone(),
                        (n as f64 + a) / 2.0,
                        0.0,
                        2.0 * outer,
                    )?,
                ));
            }
            parts.push((
                0.5,
                RadialComponent::new(n, vec![0.0; n], 0.0, 0.0, outer)?,
            ));
            let mix = Mixture::new(parts);
            // Exact center hits are scored zero, not redrawn; see the
            // unbounded-domain sampler above.
            let sample = |rng: &mut ChaCha8Rng| -> (f64, u64) {
                let t = mix.sample(rng);
                if t.iter().map(|c| c * c).sum::<f64>().sqrt() > outer {
                    return (0.0, 0);
                }
                if config.points().iter().any(|p| dist(&t, p) == 0.0) {
                    return (0.0, 0);
                }
                let ln_f: f64 = config
                    .points()
                    .iter()
                    .zip(alphas)
                    .map(|(p, a)| -a * dist(&t, p).ln())
                    .sum();
                ((ln_f - mix.density(&t).ln()).exp(), 0)
            };
            let run = run_batches(seed, n_samples, &sample);
            Ok(McEstimate {
                mean: run.mean,
                stderr: run.stderr,
                n_samples: run.n,
                seed,
                method,
            })
        }
        McMethod::Uniform => Err(NumericError::UnsupportedMethod {
            method,
            detail: "use the importance sampler for ball restrictions".into(),
        }),
    }
}

/// The closed-form envelopes dominating the composition integral, one per
/// center: with `d_I` the sum of pairwise distances inside `I` and `S` the
/// full index set,
///
/// * light rest (`sum_{S-u} a < n`): `d_S^{n - sum a}`;
/// * critical rest (`= n`): `d_S^{n - sum a} log(2 d_S / d_{S-u})`,
///   `+inf` when the other centers coincide;
/// * heavy rest (`> n`): `d_S^{-a_u}` times the composition integral of the
///   remaining centers (computed by quadrature in one dimension, importance
///   sampling otherwise).
///
/// Degenerate configurations yield `+inf` sentinels rather than errors.
pub fn envelope_l(
    n: usize,
    alphas: &[f64],
    config: &PointConfig,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<f64>, NumericError> {
    validate_composition(n, alphas, config)?;
    let k = config.len();
    if k < 2 {
        return Err(NumericError::BadInput(
            "the envelope needs at least two centers".into(),
        ));
    }
    let total: f64 = alphas.iter().sum();
    if total <= n as f64 {
        return Err(NumericError::Divergent(format!(
            "total exponent {total} does not decay at infinity in R^{n}"
        )));
    }
    let full = SubsetMask::full(k);
    let d_s = config.pairwise_sum(full);
    if d_s == 0.0 {
        return Ok(vec![f64::INFINITY; k]);
    }
    let crit_tol = 1e-12 * n as f64;
    let mut out = Vec::with_capacity(k);
    for u in 0..k {
        let rest: f64 = total - alphas[u];
        let value = if (rest - n as f64).abs() <= crit_tol {
            let d_rest = config.pairwise_sum(full.remove(u));
            if d_rest == 0.0 {
                f64::INFINITY
            } else {
                d_s.powf(n as f64 - total) * (2.0 * d_s / d_rest).ln()
            }
        } else if rest < n as f64 {
            d_s.powf(n as f64 - total)
        } else {
            let keep: Vec<usize> = (0..k).filter(|&i| i != u).collect();
            let sub_alphas: Vec<f64> = keep.iter().map(|&i| alphas[i]).collect();
            let sub_points: Vec<Vec<f64>> =
                keep.iter().map(|&i| config.point(i).to_vec()).collect();
            let sub_config = PointConfig::new(n, sub_points)?;
            let method = if n == 1 {
                McMethod::Quadrature1d
            } else {
                McMethod::Importance
            };
            let sub = riesz_composition(
                n,
                &sub_alphas,
                &sub_config,
                method,
                n_samples,
                seed.wrapping_add(u as u64 + 1),
            );
            match sub {
                Ok(est) => d_s.powf(-alphas[u]) * est.mean,
                Err(NumericError::Divergent(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            }
        };
        out.push(value);
    }
    Ok(out)
}
