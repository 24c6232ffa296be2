//! Periodic points, exact cycles and their multipliers, and the `Per_n(w)`
//! potential
//!
//! ```text
//! l_{n,w}(c,a) = sum over exact n-cycles of log|w - multiplier|
//! ```
//!
//! which has the same zero locus as the Milnor–Silverman polynomial
//! `p_n(c,a,w)` and differs from `log|p_n|` by a pluriharmonic term whose
//! `d^{-n}` scaling vanishes.
//!
//! The roots of `P^n(z) - z` are computed on the composed map: the Newton
//! correction is obtained by iterating the orbit, never by expanding `P^n`.
//! Cold solves use Aberth–Ehrlich from a circle; sweeps over parameter grids
//! continue the previous cell's roots with Newton and repair collisions with
//! Aberth iterations that hold the good roots fixed.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::family::{Family, FamilySpec, Parameter};
use crate::roots::{aberth, circle_guesses, newton, poly_roots, AberthOptions};
use crate::grid::{Field, SliceSpec};
use crate::scalar::{cone, is_finite, Real, C};
use num_complex::Complex64;
use rayon::prelude::*;

/// Largest `d^n` the cycle solvers accept.
pub const DESK_CAP: u128 = 20_000;

const NEWTON_TRACK_ITER: usize = 30;
const NEWTON_ACCEPT: f64 = 1e-9;

/// Checks `d^n <= DESK_CAP` and returns `d^n`.
pub fn checked_count(spec: FamilySpec, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("n", "period must be at least 1"));
    }
    let total = (spec.d() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > DESK_CAP {
        return Err(Error::TooLarge {
            what: "number of periodic points d^n",
            size: total,
            cap: DESK_CAP,
        });
    }
    Ok(total as usize)
}

/// Newton correction of `f(z) = P^n(z) - z`. Orbits that blow up are handled
/// with the asymptotic ratio `P(u)/P'(u) ~ u/d`.
pub fn newton_correction<T: Real>(fam: &Family<T>, n: usize, z: C<T>) -> Option<C<T>> {
    // One more step raises moduli to the power d, so the squared modulus is
    // capped at max^(1/d) to keep both the orbit and its derivative finite.
    let d = T::of_usize(fam.degree());
    let big = T::max_value().powf(d.recip());
    let mut u = z;
    let mut deriv = cone::<T>();
    for k in 0..n {
        deriv = deriv * fam.derivative(u);
        u = fam.eval(u);
        if u.norm_sqr() > big || deriv.norm_sqr() > big {
            let scale = deriv.norm();
            let ratio = (u.unscale(scale) / deriv.unscale(scale)).unscale(d.powi((n - k - 1) as i32));
            return is_finite(ratio).then_some(ratio);
        }
    }
    let ratio = (u - z) / (deriv - cone());
    is_finite(ratio).then_some(ratio)
}

/// Multiplier `(P^n)'(z)` accumulated along the orbit.
pub fn orbit_multiplier<T: Real>(fam: &Family<T>, n: usize, z: C<T>) -> C<T> {
    let mut u = z;
    let mut m = cone::<T>();
    for _ in 0..n {
        m = m * fam.derivative(u);
        u = fam.eval(u);
    }
    m
}

/// Merge tolerance `1e-7 (1 + max |root|)`.
pub fn merge_tolerance<T: Real>(roots: &[C<T>]) -> T {
    let scale = roots.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    T::lit(1e-7) * (T::one() + scale)
}

/// Roots of `P^n(z) = z` with multiplicity. Roots that did not converge or
/// collided with another root are kept in `unresolved`.
#[derive(Clone, Debug)]
pub struct PeriodicPoints<T: Real> {
    pub period: usize,
    pub roots: Vec<C<T>>,
    pub unresolved: Vec<C<T>>,
}

impl<T: Real> PeriodicPoints<T> {
    pub fn defect(&self) -> usize {
        self.unresolved.len()
    }

    /// All points, resolved first, in the order used for continuation.
    pub fn all_points(&self) -> Vec<C<T>> {
        let mut v = self.roots.clone();
        v.extend_from_slice(&self.unresolved);
        v
    }
}

fn lex_cmp<T: Real>(a: &C<T>, b: &C<T>) -> Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

/// Indices of points that lie within `tol` of an earlier point (in the
/// lexicographic order).
fn duplicates<T: Real>(points: &[C<T>], tol: T) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    let mut dup = vec![false; points.len()];
    for (pos, &i) in order.iter().enumerate() {
        if dup[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if points[j].re - points[i].re > tol {
                break;
            }
            if !dup[j] && (points[j] - points[i]).norm() <= tol {
                dup[j] = true;
            }
        }
    }
    dup
}

/// Splits candidates into distinct converged roots and the rest.
fn classify<T: Real>(candidates: Vec<(C<T>, bool)>, tol: T) -> (Vec<C<T>>, Vec<C<T>>) {
    let points: Vec<C<T>> = candidates.iter().map(|c| c.0).collect();
    // Non-converged points must not shadow converged ones.
    let mut good_idx: Vec<usize> = (0..points.len()).filter(|&i| candidates[i].1).collect();
    let good_points: Vec<C<T>> = good_idx.iter().map(|&i| points[i]).collect();
    let dup = duplicates(&good_points, tol);
    let mut good = Vec::with_capacity(points.len());
    let mut bad = Vec::new();
    let mut is_good = vec![false; points.len()];
    for (k, &i) in good_idx.iter().enumerate() {
        if !dup[k] {
            is_good[i] = true;
        }
    }
    good_idx.clear();
    for (i, &p) in points.iter().enumerate() {
        if is_good[i] {
            good.push(p);
        } else {
            bad.push(p);
        }
    }
    (good, bad)
}

fn polish<T: Real>(fam: &Family<T>, n: usize, z: C<T>) -> (C<T>, bool) {
    newton(|u| newton_correction(fam, n, u), z, NEWTON_TRACK_ITER, T::lit(NEWTON_ACCEPT))
}

/// Repairs a partial root set: Aberth on `seeds` with `good` held fixed.
fn repair<T: Real>(fam: &Family<T>, n: usize, good: &mut Vec<C<T>>, seeds: &[C<T>]) -> Vec<C<T>> {
    if seeds.is_empty() {
        return Vec::new();
    }
    let tol = merge_tolerance(good);
    // Nudge seeds apart so they do not start on top of a good root.
    let mut free: Vec<C<T>> = seeds
        .iter()
        .enumerate()
        .map(|(k, &s)| s + C::from_polar(tol * T::lit(1e3), T::lit(0.7) + T::of_usize(k)))
        .collect();
    let opts = AberthOptions {
        max_iter: 300,
        tol: T::epsilon() * T::lit(64.0),
    };
    aberth(|u| newton_correction(fam, n, u), &mut free, good, opts);
    let polished: Vec<(C<T>, bool)> = free.into_iter().map(|z| polish(fam, n, z)).collect();
    let mut combined: Vec<(C<T>, bool)> = good.iter().map(|&z| (z, true)).collect();
    let base = combined.len();
    combined.extend(polished);
    let (g, b) = classify(combined, tol);
    // `classify` keeps order, so the first `base` good roots are the old ones.
    debug_assert!(g.len() >= base.min(g.len()));
    *good = g;
    b
}

/// The `d^n` preimages under `P^n` of a point on the escape circle. They
/// accumulate on the Julia set like the repelling periodic points do, which
/// makes them far better Aberth seeds than a circle around `K` once `d^n` is
/// in the thousands.
fn backward_seeds<T: Real>(fam: &Family<T>, n: usize) -> Vec<C<T>> {
    let mut points = circle_guesses(1, fam.escape_radius());
    let coeffs = fam.coefficients();
    for _ in 0..n {
        points = points
            .iter()
            .flat_map(|&y| {
                let mut shifted = coeffs.to_vec();
                shifted[0] = shifted[0] - y;
                poly_roots(&shifted)
            })
            .collect();
    }
    points
}

/// Cold solve of `P^n(z) = z`: Aberth from the backward orbit of a point
/// outside `K`, Newton polish, repair.
pub fn periodic_points<T: Real>(fam: &Family<T>, n: usize) -> Result<PeriodicPoints<T>> {
    let count = checked_count(fam.spec(), n)?;
    let mut roots = backward_seeds(fam, n);
    if roots.len() != count || !roots.iter().all(|&z| is_finite(z)) {
        roots = circle_guesses(count, fam.escape_radius());
    }
    let opts = AberthOptions {
        max_iter: 2000,
        tol: T::epsilon() * T::lit(64.0),
    };
    aberth(|u| newton_correction(fam, n, u), &mut roots, &[], opts);
    Ok(finish(fam, n, roots))
}

fn finish<T: Real>(fam: &Family<T>, n: usize, candidates: Vec<C<T>>) -> PeriodicPoints<T> {
    let polished: Vec<(C<T>, bool)> = candidates.iter().map(|&z| polish(fam, n, z)).collect();
    let tol = merge_tolerance(&candidates);
    let (mut good, bad) = classify(polished, tol);
    let mut unresolved = bad;
    for _ in 0..2 {
        if unresolved.is_empty() {
            break;
        }
        unresolved = repair(fam, n, &mut good, &unresolved);
    }
    PeriodicPoints {
        period: n,
        roots: good,
        unresolved,
    }
}

/// Continues the periodic points of a nearby parameter to `fam`.
pub fn track<T: Real>(fam: &Family<T>, n: usize, previous: &[C<T>]) -> PeriodicPoints<T> {
    let polished: Vec<(C<T>, bool)> = previous.iter().map(|&z| polish(fam, n, z)).collect();
    let tol = merge_tolerance(previous);
    let (mut good, bad) = classify(polished, tol);
    if bad.is_empty() {
        return PeriodicPoints {
            period: n,
            roots: good,
            unresolved: bad,
        };
    }
    // Seed the repair with the previous positions that were lost.
    let mut seeds = Vec::with_capacity(bad.len());
    let mut taken = vec![false; previous.len()];
    for b in &bad {
        let mut best = None;
        let mut best_d = T::infinity();
        for (i, p) in previous.iter().enumerate() {
            if taken[i] {
                continue;
            }
            if good.iter().any(|g| (*g - *p).norm() <= tol) {
                continue;
            }
            let dist = (*p - *b).norm();
            if dist < best_d {
                best_d = dist;
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                taken[i] = true;
                seeds.push(previous[i]);
            }
            None => seeds.push(*b),
        }
    }
    let mut unresolved = repair(fam, n, &mut good, &seeds);
    if !unresolved.is_empty() {
        // Full simultaneous solve seeded by the previous roots.
        let mut all = previous.to_vec();
        let opts = AberthOptions {
            max_iter: 500,
            tol: T::epsilon() * T::lit(64.0),
        };
        aberth(|u| newton_correction(fam, n, u), &mut all, &[], opts);
        let full = finish(fam, n, all);
        if full.defect() < unresolved.len() {
            return full;
        }
        unresolved = repair(fam, n, &mut good, &unresolved);
    }
    PeriodicPoints {
        period: n,
        roots: good,
        unresolved,
    }
}

/// Distance from each point to its nearest neighbour.
fn separations<T: Real>(points: &[C<T>]) -> Vec<T> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    let mut sep = vec![T::infinity(); points.len()];
    for (pos, &i) in order.iter().enumerate() {
        let mut best = T::infinity();
        for &j in &order[pos + 1..] {
            if points[j].re - points[i].re >= best {
                break;
            }
            best = best.min((points[j] - points[i]).norm());
        }
        for &j in order[..pos].iter().rev() {
            if points[i].re - points[j].re >= best {
                break;
            }
            best = best.min((points[j] - points[i]).norm());
        }
        sep[i] = best;
    }
    sep
}

/// Newton step of `P^n(z) - z` and the tangent `dz/ds` of the root along a
/// parameter path whose coefficient derivative is `dcoeffs`.
fn newton_and_tangent<T: Real>(fam: &Family<T>, dcoeffs: &[C<T>], n: usize, z: C<T>) -> Option<(C<T>, C<T>)> {
    let (mut u, mut deriv, mut dpar) = (z, cone::<T>(), C::new(T::zero(), T::zero()));
    for _ in 0..n {
        let dp = fam.derivative(u);
        let q = dcoeffs.iter().rev().fold(C::new(T::zero(), T::zero()), |acc, &k| acc * u + k);
        dpar = dp * dpar + q;
        deriv = deriv * dp;
        u = fam.eval(u);
    }
    let fz = deriv - cone();
    let step = (u - z) / fz;
    let tangent = -dpar / fz;
    (is_finite(step) && is_finite(tangent)).then_some((step, tangent))
}

/// Newton corrector that gives up unless the iteration contracts and stays
/// within `limit` of the predictor `z`.
fn corrector<T: Real>(fam: &Family<T>, n: usize, z: C<T>, limit: T) -> Option<C<T>> {
    let mut x = z;
    let mut prev = T::infinity();
    let tight = T::lit(1e-11);
    let floor = T::lit(1e-8);
    for _ in 0..12 {
        let step = newton_correction(fam, n, x)?;
        let size = step.norm();
        x = x - step;
        if (x - z).norm() > limit {
            return None;
        }
        let scale = T::one() + x.norm();
        if size <= tight * scale {
            return Some(x);
        }
        if size > T::lit(0.5) * prev {
            // No contraction: accept only at the rounding floor.
            return (size <= floor * scale).then_some(x);
        }
        prev = size;
    }
    None
}

/// Follows one root from parameter `from` to `to` by predictor–corrector
/// continuation with adaptive steps. The corrector must stay within `0.45 sep`
/// of the tangent prediction.
#[allow(clippy::too_many_arguments)]
fn track_root<T: Real>(
    spec: FamilySpec,
    from: &Parameter<T>,
    to: &Parameter<T>,
    dir: &Parameter<T>,
    n: usize,
    z0: C<T>,
    sep: T,
    h0: T,
    hmin: T,
) -> Option<C<T>> {
    let limit = if sep.is_finite() { sep * T::lit(0.45) } else { T::max_value() };
    let (mut s, mut h, mut z) = (T::zero(), h0, z0);
    let mut here = Family::new(spec, from.clone()).ok()?;
    while s < T::one() {
        let dcoeffs = here.coefficient_derivative(dir);
        let (_, tangent) = newton_and_tangent(&here, &dcoeffs, n, z)?;
        let s1 = (s + h).min(T::one());
        let next = Family::new(spec, lerp_param(from, to, s1)).ok()?;
        match corrector(&next, n, z + tangent.scale(s1 - s), limit) {
            Some(x) => {
                z = x;
                s = s1;
                here = next;
                h = (h + h).min(h0);
            }
            None => {
                h = h * T::lit(0.5);
                if h < hmin {
                    return None;
                }
            }
        }
    }
    Some(z)
}

/// Marks every member of a cluster of points closer than `tol`.
fn clustered<T: Real>(points: &[C<T>], tol: T) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    let mut hit = vec![false; points.len()];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if points[j].re - points[i].re > tol {
                break;
            }
            if (points[j] - points[i]).norm() <= tol {
                hit[i] = true;
                hit[j] = true;
            }
        }
    }
    hit
}

/// Continues periodic points from parameter `from` to `to` along the straight
/// segment. Each root is followed with adaptive substeps that keep the Newton
/// corrector inside half the distance to its nearest neighbour. Roots that
/// fail or collide are followed again with finer steps, then repaired by
/// Aberth iterations, and as a last resort the target is solved cold.
pub fn track_between<T: Real>(
    spec: FamilySpec,
    from: &Parameter<T>,
    points: &PeriodicPoints<T>,
    to: &Parameter<T>,
) -> Result<PeriodicPoints<T>> {
    let n = points.period;
    let target = Family::new(spec, to.clone())?;
    let start = points.all_points();
    let tol = merge_tolerance(&start);
    let sep = separations(&start);
    let dir = Parameter {
        c: to.c.iter().zip(&from.c).map(|(&b, &a)| b - a).collect(),
        a: to.a - from.a,
    };
    let mut end: Vec<Option<C<T>>> = start
        .iter()
        .zip(&sep)
        .map(|(&z, &s)| track_root(spec, from, to, &dir, n, z, s, T::one(), T::lit(1.0 / 64.0)))
        .collect();

    for pass in 0..2 {
        let landed: Vec<C<T>> = end.iter().zip(&start).map(|(e, &z)| e.unwrap_or(z)).collect();
        let hit = clustered(&landed, tol);
        let retry: Vec<usize> = (0..start.len()).filter(|&i| end[i].is_none() || hit[i]).collect();
        if retry.is_empty() {
            return Ok(PeriodicPoints {
                period: n,
                roots: landed,
                unresolved: Vec::new(),
            });
        }
        let (h0, hmin) = if pass == 0 { (1.0 / 16.0, 1.0 / 4096.0) } else { (1.0 / 256.0, 1.0 / 65536.0) };
        for i in retry {
            end[i] = track_root(spec, from, to, &dir, n, start[i], sep[i] * T::lit(0.5), T::lit(h0), T::lit(hmin));
        }
    }

    let landed: Vec<C<T>> = end.iter().zip(&start).map(|(e, &z)| e.unwrap_or(z)).collect();
    let hit = clustered(&landed, tol);
    let mut good = Vec::with_capacity(start.len());
    let mut seeds = Vec::new();
    for i in 0..start.len() {
        if end[i].is_some() && !hit[i] {
            good.push(landed[i]);
        } else {
            seeds.push(landed[i]);
        }
    }
    let unresolved = repair(&target, n, &mut good, &seeds);
    let best = PeriodicPoints {
        period: n,
        roots: good,
        unresolved,
    };
    if best.defect() > 0 {
        let cold = periodic_points(&target, n)?;
        if cold.defect() < best.defect() {
            return Ok(cold);
        }
    }
    Ok(best)
}

fn lerp_param<T: Real>(from: &Parameter<T>, to: &Parameter<T>, t: T) -> Parameter<T> {
    let mix = |a: C<T>, b: C<T>| a + (b - a).scale(t);
    Parameter {
        c: from.c.iter().zip(&to.c).map(|(&a, &b)| mix(a, b)).collect(),
        a: mix(from.a, to.a),
    }
}

/// A cycle of exact period `period`.
#[derive(Clone, Debug)]
pub struct Cycle<T: Real> {
    /// Orbit in dynamical order, `points[i+1] = P(points[i])`.
    pub points: Vec<C<T>>,
    pub period: usize,
    /// Product of `P'` over the orbit.
    pub multiplier: C<T>,
}

/// All exact-period-`n` cycles of one parameter.
#[derive(Clone, Debug)]
pub struct CycleSet<T: Real> {
    pub parameter: Parameter<T>,
    pub period: usize,
    pub cycles: Vec<Cycle<T>>,
    /// Roots of `P^n(z) = z` that could not be resolved or grouped.
    pub defect: usize,
    /// `(m, number of roots of P^n(z) = z with exact period m)` for `m | n`.
    pub period_counts: Vec<(usize, usize)>,
}

impl<T: Real> CycleSet<T> {
    pub fn multipliers(&self) -> Vec<C<T>> {
        self.cycles.iter().map(|c| c.multiplier).collect()
    }

    /// `l_{n,w} = sum_cycles log|w - multiplier|`; `-inf` when some
    /// multiplier equals `w`.
    pub fn pern_potential(&self, w: C<T>) -> T {
        self.cycles.iter().map(|c| (w - c.multiplier).norm().ln()).sum()
    }

    /// `prod_cycles (w - multiplier)`, the analytic function whose zeros in
    /// parameter space form `Per_n(w)`.
    pub fn pern_product(&self, w: C<T>) -> C<T> {
        self.cycles.iter().fold(cone(), |acc, c| acc * (w - c.multiplier))
    }

    /// One row per orbit point, in dynamical order within each cycle.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("cycle,period,point,re,im,multiplier_re,multiplier_im,defect\n");
        for (k, cyc) in self.cycles.iter().enumerate() {
            for (i, z) in cyc.points.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{k},{},{i},{},{},{},{},{}",
                    cyc.period,
                    z.re.to_f64_lossy(),
                    z.im.to_f64_lossy(),
                    cyc.multiplier.re.to_f64_lossy(),
                    cyc.multiplier.im.to_f64_lossy(),
                    self.defect
                );
            }
        }
        s
    }
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|k| n % k == 0).collect()
}

/// First return time of `z` among the divisors of `n`.
fn exact_period<T: Real>(fam: &Family<T>, n: usize, z: C<T>, tol: T) -> usize {
    let mut u = z;
    let mut steps = 0;
    for k in divisors(n) {
        if k == n {
            return n;
        }
        while steps < k {
            u = fam.eval(u);
            steps += 1;
        }
        if (u - z).norm() <= tol {
            return k;
        }
    }
    n
}

/// Sorted lookup of points by real part.
struct PointIndex<T: Real> {
    order: Vec<usize>,
    keys: Vec<T>,
}

impl<T: Real> PointIndex<T> {
    fn new(points: &[C<T>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
        let keys = order.iter().map(|&i| points[i].re).collect();
        Self { order, keys }
    }

    /// Indices of points within `tol` of `z`, nearest first.
    fn near(&self, points: &[C<T>], z: C<T>, tol: T) -> Vec<usize> {
        let lo = self.keys.partition_point(|&k| k < z.re - tol);
        let mut hits: Vec<(T, usize)> = Vec::new();
        for pos in lo..self.keys.len() {
            if self.keys[pos] > z.re + tol {
                break;
            }
            let i = self.order[pos];
            let dist = (points[i] - z).norm();
            if dist <= tol {
                hits.push((dist, i));
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        hits.into_iter().map(|h| h.1).collect()
    }
}

/// Groups resolved periodic points into exact-period-`n` cycles.
pub fn cycles_from_points<T: Real>(fam: &Family<T>, points: &PeriodicPoints<T>) -> CycleSet<T> {
    let n = points.period;
    let tol = merge_tolerance(&points.roots);
    let periods: Vec<usize> = points.roots.iter().map(|&z| exact_period(fam, n, z, tol)).collect();
    let mut period_counts: Vec<(usize, usize)> = divisors(n).into_iter().map(|m| (m, 0)).collect();
    for &p in &periods {
        if let Some(e) = period_counts.iter_mut().find(|e| e.0 == p) {
            e.1 += 1;
        }
    }
    let exact: Vec<C<T>> = points
        .roots
        .iter()
        .zip(&periods)
        .filter(|(_, &p)| p == n)
        .map(|(&z, _)| z)
        .collect();

    let mut defect = points.defect();
    let index = PointIndex::new(&exact);
    let mut assigned = vec![false; exact.len()];
    let mut cycles = Vec::new();
    // Match images with a tolerance that allows for the error growth of one step.
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&exact[a], &exact[b]));
    for &start in &order {
        if assigned[start] {
            continue;
        }
        let mut orbit = vec![exact[start]];
        let mut members = vec![start];
        let mut multiplier = cone::<T>();
        let mut current = start;
        let mut broken = false;
        for step in 0..n {
            let z = exact[current];
            let dz = fam.derivative(z);
            multiplier = multiplier * dz;
            let image = fam.eval(z);
            let image_tol = tol * (T::one() + dz.norm());
            if step + 1 == n {
                // The orbit must close on its first point.
                broken = (image - exact[start]).norm() > image_tol;
                break;
            }
            let hits: Vec<usize> = index
                .near(&exact, image, image_tol)
                .into_iter()
                .filter(|&h| !assigned[h] && !members.contains(&h))
                .collect();
            // On thin Cantor sets distinct points can sit closer than the
            // lookup tolerance. The nearest hit is accepted when it is far
            // closer than the runner-up, which polished roots always are.
            let unambiguous = match hits.as_slice() {
                [_] => true,
                [first, second, ..] => {
                    let floor = T::epsilon() * T::lit(1e3) * (T::one() + image.norm());
                    (exact[*second] - image).norm() > T::lit(1e3) * ((exact[*first] - image).norm() + floor)
                }
                [] => false,
            };
            if !unambiguous {
                broken = true;
                break;
            }
            members.push(hits[0]);
            orbit.push(exact[hits[0]]);
            current = hits[0];
        }
        for &m in &members {
            assigned[m] = true;
        }
        if broken {
            defect += members.len();
            continue;
        }
        cycles.push(Cycle {
            points: orbit,
            period: n,
            multiplier,
        });
    }
    CycleSet {
        parameter: fam.parameter().clone(),
        period: n,
        cycles,
        defect,
        period_counts,
    }
}

/// Exact-period-`n` cycles of `P_{c,a}` with multipliers.
pub fn exact_cycles<T: Real>(fam: &Family<T>, n: usize) -> Result<CycleSet<T>> {
    let points = periodic_points(fam, n)?;
    Ok(cycles_from_points(fam, &points))
}

/// `l_{n,w}(c,a)`; requires a defect-free cycle solve.
pub fn pern_potential<T: Real>(fam: &Family<T>, n: usize, w: C<T>) -> Result<T> {
    let set = exact_cycles(fam, n)?;
    if set.defect > 0 {
        return Err(Error::Domain(format!(
            "cycle solve at period {n} left {} unresolved roots",
            set.defect
        )));
    }
    Ok(set.pern_potential(w))
}

/// Exact-period-`n` multipliers at every cell of a slice, `None` where the
/// cycle solve left a defect. Roots are continued along lines of the last
/// real axis; line starts are continued from one another.
pub fn multiplier_sweep(spec: FamilySpec, slice: &SliceSpec, n: usize) -> Result<Vec<Option<Vec<Complex64>>>> {
    checked_count(spec, n)?;
    let shape = slice.shape();
    let line_len = *shape.last().expect("slices have axes");
    let lines = slice.len() / line_len;
    let param = |flat: usize| slice.parameter(&slice.unravel(flat));

    // Line starts are tracked in order, each from the previous one.
    let mut starts: Vec<PeriodicPoints<f64>> = Vec::with_capacity(lines);
    let first = Family::new(spec, param(0))?;
    starts.push(periodic_points(&first, n)?);
    for l in 1..lines {
        let prev = &starts[l - 1];
        let next = track_between(spec, &param((l - 1) * line_len), prev, &param(l * line_len))?;
        starts.push(next);
    }

    let per_line: Vec<Result<Vec<Option<Vec<Complex64>>>>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(l, start)| {
            let mut out = Vec::with_capacity(line_len);
            let mut current = start;
            for k in 0..line_len {
                let flat = l * line_len + k;
                if k > 0 {
                    current = track_between(spec, &param(flat - 1), &current, &param(flat))?;
                }
                let fam = Family::new(spec, param(flat))?;
                let mut set = cycles_from_points(&fam, &current);
                if set.defect > 0 {
                    // A cold solve often succeeds where continuation lost roots.
                    let cold = periodic_points(&fam, n)?;
                    let retry = cycles_from_points(&fam, &cold);
                    if retry.defect == 0 {
                        set = retry;
                        current = cold;
                    }
                }
                out.push((set.defect == 0).then(|| set.multipliers()));
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(slice.len());
    for line in per_line {
        all.extend(line?);
    }
    Ok(all)
}

/// `l_{n,w}` sampled on a slice from precomputed multipliers; cells with a
/// defect or an exact hit of `w` are flagged.
pub fn pern_field(slice: &SliceSpec, multipliers: &[Option<Vec<Complex64>>], w: Complex64, label: &str) -> Result<Field> {
    let values = multipliers
        .iter()
        .map(|m| match m {
            Some(ms) => ms.iter().map(|l| (w - l).norm().ln()).sum(),
            None => f64::NEG_INFINITY,
        })
        .collect();
    Field::new(slice.clone(), values, label)
}

/// `prod (w - multiplier)` at a parameter, continuing `seed` roots.
fn pern_product_at(spec: FamilySpec, n: usize, w: Complex64, p: &Parameter<f64>, seed: &[Complex64]) -> Option<(Complex64, Vec<Complex64>)> {
    let fam = Family::new(spec, p.clone()).ok()?;
    let mut pts = track(&fam, n, seed);
    if pts.defect() > 0 {
        pts = periodic_points(&fam, n).ok()?;
    }
    let set = cycles_from_points(&fam, &pts);
    (set.defect == 0).then(|| (set.pern_product(w), pts.roots))
}

/// Points of `Per_n(w)` on a one-dimensional slice, as slice coordinates.
///
/// Cells where `l_{n,w}` is a local minimum over their 8 neighbours seed
/// Newton's method on `t -> prod (w - multiplier(t))`, whose derivative is
/// taken by central differences. Each seed cell is tried from
/// `seeds_per_cell` starting points spread over the cell. The step is scaled
/// by an estimate of the root multiplicity, which restores fast convergence at
/// double roots such as `a = 0` for `n = 1`, `w = 0`. Roots are accepted when
/// `|prod| < 1e-8`, merged within `1e-6` and kept if they lie in the box.
pub fn pern_locus_1d(spec: FamilySpec, slice: &SliceSpec, n: usize, w: Complex64, seeds_per_cell: usize) -> Result<Vec<Complex64>> {
    if slice.m() != 1 {
        return Err(Error::invalid("slice", "pern_locus_1d needs a slice of complex dimension 1"));
    }
    let mults = multiplier_sweep(spec, slice, n)?;
    let field = pern_field(slice, &mults, w, "pern")?;
    let shape = slice.shape();
    let (nx, ny) = (shape[0], shape[1]);
    let v = field.values();
    let mut seeds = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let c = i * ny + j;
            if mults[c].is_none() {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    if v[a as usize * ny + b as usize] < v[c] {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push([i, j]);
            }
        }
    }

    let ax = &slice.axes()[0];
    let cell = Complex64::new(ax.step_re(), ax.step_im());
    let at = |t: Complex64| Parameter::from_coords(&slice.embed(&[t]));
    let mut found: Vec<Complex64> = Vec::new();
    for idx in seeds {
        let center = slice.local_coords(&idx)[0];
        let fam = Family::new(spec, at(center))?;
        let seed_roots = periodic_points(&fam, n)?;
        if seed_roots.defect() > 0 {
            continue;
        }
        for s in 0..seeds_per_cell.max(1) {
            let start = if s == 0 {
                center
            } else {
                let angle = std::f64::consts::TAU * s as f64 / seeds_per_cell as f64;
                center + Complex64::new(0.3 * cell.re * angle.cos(), 0.3 * cell.im * angle.sin())
            };
            if let Some(root) = polish_locus(spec, n, w, start, &seed_roots.roots, &at) {
                let inside = root.re >= ax.re.0 && root.re <= ax.re.1 && root.im >= ax.im.0 && root.im <= ax.im.1;
                if inside && !found.iter().any(|f| (f - root).norm() < 1e-6) {
                    found.push(root);
                }
                break;
            }
        }
    }
    found.sort_by(|a, b| lex_cmp(a, b));
    Ok(found)
}

fn polish_locus(
    spec: FamilySpec,
    n: usize,
    w: Complex64,
    start: Complex64,
    seed: &[Complex64],
    at: &dyn Fn(Complex64) -> Parameter<f64>,
) -> Option<Complex64> {
    let mut t = start;
    let mut roots = seed.to_vec();
    let mut last_step: Option<f64> = None;
    let mut multiplicity = 1.0;
    for _ in 0..80 {
        let (f, r) = pern_product_at(spec, n, w, &at(t), &roots)?;
        roots = r;
        if f.norm() < 1e-8 {
            return Some(t);
        }
        let delta = 1e-6 * (1.0 + t.norm());
        let (fp, _) = pern_product_at(spec, n, w, &at(t + delta), &roots)?;
        let (fm, _) = pern_product_at(spec, n, w, &at(t - delta), &roots)?;
        let df = (fp - fm) / (2.0 * delta);
        let step = f / df;
        if !is_finite(step) {
            return None;
        }
        // Linear convergence with ratio (m-1)/m reveals a root of multiplicity m.
        if let Some(prev) = last_step {
            let ratio = step.norm() / prev;
            if ratio > 0.3 && ratio < 0.95 {
                multiplicity = (1.0 / (1.0 - ratio)).round().max(1.0);
            }
        }
        last_step = Some(step.norm());
        t -= step * multiplicity;
        if t.norm() > 1e6 {
            return None;
        }
    }
    None
}
