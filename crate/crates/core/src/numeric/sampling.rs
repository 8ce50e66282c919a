//! Deterministic batched Monte Carlo plumbing: seed-and-stream RNG batches,
//! streaming mean/variance merges, and radial proposal distributions.
//!
//! Reproducibility contract: batch `b` of a run draws from a fresh
//! `ChaCha8` generator with the run's seed on stream `b + 1`, batches have a
//! fixed size, and per-batch accumulators merge in batch order. Thread count
//! therefore cannot change a single output bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NumericError;

/// Samples per RNG stream.
pub(crate) const BATCH_SIZE: u64 = 4096;

/// Exact unit-ball volume by the two-step recursion
/// `V_n = 2 pi V_{n-2} / n`, `V_0 = 1`, `V_1 = 2`.
pub fn vol_ball(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => vol_ball(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// Surface measure of the unit sphere in `R^n`.
pub(crate) fn sphere_area(n: usize) -> f64 {
    n as f64 * vol_ball(n)
}

/// Result of a batched run: mean and standard error of the per-sample
/// values, plus the total number of guarded redraws reported by the
/// sampler.
pub(crate) struct McRun {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub resampled: u64,
}

#[derive(Clone, Copy, Default)]
struct BatchStats {
    count: u64,
    mean: f64,
    m2: f64,
    resampled: u64,
}

impl BatchStats {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: BatchStats) -> BatchStats {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        BatchStats {
            count,
            mean: self.mean + delta * other.count as f64 / count as f64,
            m2: self.m2
                + other.m2
                + delta * delta * (self.count as f64) * (other.count as f64)
                    / count as f64,
            resampled: self.resampled + other.resampled,
        }
    }
}

/// Run `n_samples` draws of `sample` (which returns a value plus how many
/// guarded redraws it needed), batched and merged deterministically.
pub(crate) fn run_batches(
    seed: u64,
    n_samples: u64,
    sample: &(dyn Fn(&mut ChaCha8Rng) -> (f64, u64) + Sync),
) -> McRun {
    assert!(n_samples > 0, "estimators need at least one sample");
    let n_batches = n_samples.div_ceil(BATCH_SIZE);
    let run_batch = |b: u64| -> BatchStats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b + 1);
        let take = BATCH_SIZE.min(n_samples - b * BATCH_SIZE);
        let mut stats = BatchStats::default();
        for _ in 0..take {
            let (v, redraws) = sample(&mut rng);
            stats.push(v);
            stats.resampled += redraws;
        }
        stats
    };

    let threads = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(8)
        .min(n_batches as usize)
        .max(1);
    let mut per_batch: Vec<BatchStats> = vec![BatchStats::default(); n_batches as usize];
    if threads <= 1 {
        for (b, slot) in per_batch.iter_mut().enumerate() {
            *slot = run_batch(b as u64);
        }
    } else {
        let chunk = per_batch.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (t, slots) in per_batch.chunks_mut(chunk).enumerate() {
                let run_batch = &run_batch;
                scope.spawn(move || {
                    for (off, slot) in slots.iter_mut().enumerate() {
                        *slot = run_batch((t * chunk + off) as u64);
                    }
                });
            }
        });
    }
    // Merge in batch order: the reduction tree is fixed, so parallel and
    // serial runs agree bit for bit.
    let total = per_batch
        .into_iter()
        .fold(BatchStats::default(), BatchStats::merge);
    let stderr = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        f64::INFINITY
    };
    McRun {
        mean: total.mean,
        stderr,
        n: total.count,
        resampled: total.resampled,
    }
}

/// A uniform direction on the unit sphere of `R^n`.
pub(crate) fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        // Box-Muller pairs; resample the (probability-zero) degenerate draw.
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            v.push(r * c);
            if v.len() < n {
                v.push(r * s);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// A radially symmetric proposal `g(x) ∝ |x - center|^{-expo}` supported on
/// the shell `inner <= |x - center| <= outer`. Covers uniform balls
/// (`expo = 0`), concentrating power laws (`expo < n`, `inner = 0`),
/// annulus power laws, and Pareto tails (`expo > n`, `outer = inf`).
#[derive(Clone, Debug)]
pub(crate) struct RadialComponent {
    n: usize,
    center: Vec<f64>,
    expo: f64,
    inner: f64,
    outer: f64,
    /// Radial mass `int_inner^outer r^{n-1-expo} dr`.
    radial_mass: f64,
}

impl RadialComponent {
    pub fn new(
        n: usize,
        center: Vec<f64>,
        expo: f64,
        inner: f64,
        outer: f64,
    ) -> Result<Self, NumericError> {
        if center.len() != n {
            return Err(NumericError::BadInput(format!(
                "proposal center has dimension {} in R^{n}",
                center.len()
            )));
        }
        if !(0.0..=f64::INFINITY).contains(&inner) || outer <= inner {
            return Err(NumericError::BadInput(format!(
                "bad proposal shell [{inner}, {outer}]"
            )));
        }
        let p = n as f64 - expo;
        let radial_mass = if expo == n as f64 {
            if inner == 0.0 || !outer.is_finite() {
                return Err(NumericError::BadInput(
                    "critical-exponent proposal needs a bounded shell".into(),
                ));
            }
            (outer / inner).ln()
        } else {
            let hi = if outer.is_finite() {
                outer.powf(p)
            } else if p < 0.0 {
                0.0
            } else {
                return Err(NumericError::BadInput(format!(
                    "proposal exponent {expo} cannot reach infinity in R^{n}"
                )));
            };
            let lo = if inner == 0.0 {
                if p <= 0.0 {
                    return Err(NumericError::BadInput(format!(
                        "proposal exponent {expo} is not integrable at the center in R^{n}"
                    )));
                }
                0.0
            } else {
                inner.powf(p)
            };
            (hi - lo) / p
        };
        Ok(RadialComponent {
            n,
            center,
            expo,
            inner,
            outer,
            radial_mass,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u: f64 = rng.gen();
        let p = self.n as f64 - self.expo;
        let r = if self.expo == self.n as f64 {
            self.inner * (self.outer / self.inner).powf(u)
        } else {
            let lo = if self.inner == 0.0 { 0.0 } else { self.inner.powf(p) };
            let hi = if self.outer.is_finite() {
                self.outer.powf(p)
            } else {
                0.0
            };
            (lo + u * (hi - lo)).powf(1.0 / p)
        };
        let dir = unit_vector(rng, self.n);
        dir.iter()
            .zip(&self.center)
            .map(|(d, c)| c + r * d)
            .collect()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let r = crate::kernel::dist(x, &self.center);
        if r < self.inner || r > self.outer || r == 0.0 {
            return 0.0;
        }
        r.powf(-self.expo) / (sphere_area(self.n) * self.radial_mass)
    }
}

/// A finite mixture of radial components with normalized weights.
pub(crate) struct Mixture {
    parts: Vec<(f64, RadialComponent)>,
}

impl Mixture {
    pub fn new(parts: Vec<(f64, RadialComponent)>) -> Self {
        debug_assert!(!parts.is_empty());
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        Mixture {
            parts: parts.into_iter().map(|(w, c)| (w / total, c)).collect(),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut u: f64 = rng.gen();
        for (w, comp) in &self.parts {
            if u < *w {
                return comp.sample(rng);
            }
            u -= w;
        }
        self.parts.last().unwrap().1.sample(rng)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|(w, c)| w * c.density(x)).sum()
    }
}
