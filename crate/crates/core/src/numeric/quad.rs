//! One-dimensional adaptive quadrature with exact removal of power-law
//! endpoint singularities.
//!
//! This is the trusted oracle the sampling estimators are checked against.
//! Every integrand here has the shape `prod_i |t - c_i|^{-o_i} * extra(t)`;
//! a segment whose endpoint carries a singular center is transformed by
//! `u = (t - a)^{1 - o}`, under which the singular factor cancels the
//! Jacobian *algebraically*, so the rule never evaluates near a pole.
//! Unbounded tails are folded onto `[0, 1]` by `t = lo + (1 - w)/w`, which
//! turns decay at infinity into a power-law endpoint at `w = 0` handled the
//! same way.

use super::NumericError;

/// A quadrature value with its accumulated error estimate and the number of
/// integrand evaluations spent.
#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl Quad {
    const ZERO: Quad = Quad {
        value: 0.0,
        error: 0.0,
        evals: 0,
    };

    fn add(self, other: Quad) -> Quad {
        Quad {
            value: self.value + other.value,
            error: self.error + other.error,
            evals: self.evals + other.evals,
        }
    }
}

/// Hard ceiling on integrand evaluations for one top-level integral.
const EVAL_CAP: usize = 4_000_000;

/// Recursion depth for the adaptive rule; beyond it the local error estimate
/// is accepted and accumulated instead of refined.
const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson integration of a finite-valued function on `[a, b]`.
/// The tolerance is treated as a relative target against the first coarse
/// pass.
fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Quad, NumericError> {
    let mut evals = 0usize;
    let eval = |t: f64, evals: &mut usize| -> Result<f64, NumericError> {
        *evals += 1;
        if *evals > EVAL_CAP {
            return Err(NumericError::Quadrature(
                "evaluation budget exhausted".into(),
            ));
        }
        let v = f(t);
        if !v.is_finite() {
            return Err(NumericError::Quadrature(format!(
                "non-finite integrand sample at t = {t}"
            )));
        }
        Ok(v)
    };
    let m = 0.5 * (a + b);
    let fa = eval(a, &mut evals)?;
    let fb = eval(b, &mut evals)?;
    let fm = eval(m, &mut evals)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let budget = tol * whole.abs().max(1e-12);

    // Explicit stack of (a, fa, m, fm, b, fb, whole, tol, depth).
    struct Frame {
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let mut stack = vec![Frame {
        a,
        fa,
        m,
        fm,
        b,
        fb,
        whole,
        tol: budget,
        depth: 0,
    }];
    let mut total = 0.0f64;
    let mut err = 0.0f64;
    while let Some(fr) = stack.pop() {
        let lm = 0.5 * (fr.a + fr.m);
        let rm = 0.5 * (fr.m + fr.b);
        let flm = eval(lm, &mut evals)?;
        let frm = eval(rm, &mut evals)?;
        let left = (fr.m - fr.a) / 6.0 * (fr.fa + 4.0 * flm + fr.fm);
        let right = (fr.b - fr.m) / 6.0 * (fr.fm + 4.0 * frm + fr.fb);
        let delta = left + right - fr.whole;
        if delta.abs() <= 15.0 * fr.tol || fr.depth >= MAX_DEPTH {
            total += left + right + delta / 15.0;
            err += delta.abs() / 15.0;
        } else {
            stack.push(Frame {
                a: fr.a,
                fa: fr.fa,
                m: lm,
                fm: flm,
                b: fr.m,
                fb: fr.fm,
                whole: left,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
            stack.push(Frame {
                a: fr.m,
                fa: fr.fm,
                m: rm,
                fm: frm,
                b: fr.b,
                fb: fr.fb,
                whole: right,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
        }
    }
    Ok(Quad {
        value: total,
        error: err,
        evals,
    })
}

/// Merge coinciding centers, summing their orders, and drop zero orders.
/// Returns pairs sorted by center.
pub(crate) fn merge_centers(centers: &[f64], orders: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = centers
        .iter()
        .copied()
        .zip(orders.iter().copied())
        .filter(|(_, o)| *o != 0.0)
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = pairs
        .iter()
        .map(|(c, _)| c.abs())
        .fold(1.0f64, f64::max);
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (c, o) in pairs {
        match merged.last_mut() {
            Some((c0, o0)) if (c - *c0).abs() <= 1e-14 * scale => *o0 += o,
            _ => merged.push((c, o)),
        }
    }
    merged
}

/// Power product times `extra` on a segment whose interior contains no
/// center. Centers equal to an endpoint are removed by substitution; when
/// both endpoints are singular the segment is split at its midpoint.
fn power_segment(
    merged: &[(f64, f64)],
    extra: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Quad, NumericError> {
    if a == b {
        return Ok(Quad::ZERO);
    }
    debug_assert!(a < b);
    let order_at = |p: f64| -> f64 {
        merged
            .iter()
            .filter(|(c, _)| *c == p)
            .map(|(_, o)| *o)
            .sum()
    };
    let oa = order_at(a);
    let ob = order_at(b);
    if oa > 0.0 && ob > 0.0 {
        let mid = 0.5 * (a + b);
        let left = power_segment(merged, extra, a, mid, tol)?;
        let right = power_segment(merged, extra, mid, b, tol)?;
        return Ok(left.add(right));
    }
    // Factors never evaluated through a pole: the factor anchored at the
    // singular endpoint cancels against the Jacobian, the rest are bounded.
    let rest = |t: f64, skip: f64| -> f64 {
        merged
            .iter()
            .filter(|(c, _)| *c != skip)
            .map(|(c, o)| (t - c).abs().powf(-o))
            .product::<f64>()
            * extra(t)
    };
    if oa > 0.0 {
        if oa >= 1.0 {
            return Err(NumericError::Divergent(format!(
                "non-integrable singularity of order {oa} at t = {a}"
            )));
        }
        let q = 1.0 - oa;
        let span = (b - a).powf(q);
        let g = |u: f64| rest(a + u.powf(1.0 / q), a) / q;
        return adaptive_simpson(&g, 0.0, span, tol);
    }
    if ob > 0.0 {
        if ob >= 1.0 {
            return Err(NumericError::Divergent(format!(
                "non-integrable singularity of order {ob} at t = {b}"
            )));
        }
        let q = 1.0 - ob;
        let span = (b - a).powf(q);
        let g = |u: f64| rest(b - u.powf(1.0 / q), b) / q;
        return adaptive_simpson(&g, 0.0, span, tol);
    }
    adaptive_simpson(&|t| rest(t, f64::NAN), a, b, tol)
}

/// `int_lo^hi prod_i |t - c_i|^{-o_i} extra(t) dt` on a bounded interval.
/// Centers inside the interval must have merged order `< 1`.
pub fn interval_power_product_with(
    centers: &[f64],
    orders: &[f64],
    lo: f64,
    hi: f64,
    tol: f64,
    extra: &dyn Fn(f64) -> f64,
) -> Result<Quad, NumericError> {
    debug_assert!(lo <= hi);
    let merged = merge_centers(centers, orders);
    for (c, o) in &merged {
        if *c >= lo && *c <= hi && *o >= 1.0 {
            return Err(NumericError::Divergent(format!(
                "singularity of order {o} at t = {c} inside the domain"
            )));
        }
    }
    // Segment at the interior centers so every piece is singular only at
    // its endpoints.
    let mut cuts = vec![lo];
    cuts.extend(
        merged
            .iter()
            .map(|(c, _)| *c)
            .filter(|c| *c > lo && *c < hi),
    );
    cuts.push(hi);
    let mut acc = Quad::ZERO;
    for pair in cuts.windows(2) {
        acc = acc.add(power_segment(&merged, extra, pair[0], pair[1], tol)?);
    }
    Ok(acc)
}

/// Bounded power-product integral with unit `extra`.
pub fn interval_power_product(
    centers: &[f64],
    orders: &[f64],
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Quad, NumericError> {
    interval_power_product_with(centers, orders, lo, hi, tol, &|_| 1.0)
}

/// `int_lo^inf prod_i |t - c_i|^{-o_i} extra(t) dt` where every center lies
/// at or below `lo`. Requires total order `> 1` for convergence, and
/// `extra` bounded on the tail (it is evaluated at `t = +inf` once).
pub fn upper_tail_power_product(
    centers: &[f64],
    orders: &[f64],
    lo: f64,
    tol: f64,
    extra: &dyn Fn(f64) -> f64,
) -> Result<Quad, NumericError> {
    let merged = merge_centers(centers, orders);
    let total: f64 = merged.iter().map(|(_, o)| o).sum();
    if total <= 1.0 {
        return Err(NumericError::Divergent(format!(
            "tail decay order {total} is not integrable"
        )));
    }
    if let Some((c, o)) = merged.iter().find(|(c, _)| *c > lo) {
        return Err(NumericError::Quadrature(format!(
            "tail cut {lo} lies below the center {c} (order {o})"
        )));
    }
    let o_lo: f64 = merged.iter().filter(|(c, _)| *c == lo).map(|(_, o)| o).sum();
    if o_lo >= 1.0 {
        return Err(NumericError::Divergent(format!(
            "non-integrable singularity of order {o_lo} at the tail cut {lo}"
        )));
    }
    // Fold onto w in (0, 1] via t = lo + (1 - w)/w:
    //   |t - c_i| = (w (lo - c_i) + 1 - w) / w,   dt = dw / w^2,
    // so the integrand splits into w^{total - 2} (a power anchored at w = 0),
    // |1 - w|^{-o_lo} from centers equal to the cut, and a smooth rest.
    let smooth: Vec<(f64, f64)> = merged
        .iter()
        .filter(|(c, _)| *c < lo)
        .map(|(c, o)| (lo - c, *o))
        .collect();
    let extra_w = move |w: f64| -> f64 {
        let t = if w == 0.0 { f64::INFINITY } else { lo + (1.0 - w) / w };
        let rest: f64 = smooth
            .iter()
            .map(|(gap, o)| (1.0 + w * (gap - 1.0)).powf(-o))
            .product();
        let head = if total >= 2.0 { w.powf(total - 2.0) } else { 1.0 };
        head * rest * extra(t)
    };
    let mut centers_w = vec![1.0];
    let mut orders_w = vec![o_lo];
    if total < 2.0 {
        centers_w.push(0.0);
        orders_w.push(2.0 - total);
    }
    interval_power_product_with(&centers_w, &orders_w, 0.0, 1.0, tol, &extra_w)
}

/// Mirror image of [`upper_tail_power_product`] on `(-inf, hi]`.
pub fn lower_tail_power_product(
    centers: &[f64],
    orders: &[f64],
    hi: f64,
    tol: f64,
    extra: &dyn Fn(f64) -> f64,
) -> Result<Quad, NumericError> {
    let reflected: Vec<f64> = centers.iter().map(|c| -c).collect();
    upper_tail_power_product(&reflected, orders, -hi, tol, &|t| extra(-t))
}

/// `int_R prod_i |t - c_i|^{-o_i} dt` over the whole line. Requires every
/// merged order `< 1` and total order `> 1`.
pub fn line_power_product(
    centers: &[f64],
    orders: &[f64],
    tol: f64,
) -> Result<Quad, NumericError> {
    let merged = merge_centers(centers, orders);
    if merged.is_empty() {
        return Err(NumericError::Divergent(
            "a constant has no integral over the line".into(),
        ));
    }
    for (c, o) in &merged {
        if *o >= 1.0 {
            return Err(NumericError::Divergent(format!(
                "non-integrable singularity of order {o} at t = {c}"
            )));
        }
    }
    let (cs, os): (Vec<f64>, Vec<f64>) = merged.iter().copied().unzip();
    let lo = cs[0];
    let hi = cs[cs.len() - 1];
    let mut acc = lower_tail_power_product(&cs, &os, lo, tol, &|_| 1.0)?;
    if hi > lo {
        acc = acc.add(interval_power_product(&cs, &os, lo, hi, tol)?);
    }
    acc = acc.add(upper_tail_power_product(&cs, &os, hi, tol, &|_| 1.0)?);
    Ok(acc)
}
