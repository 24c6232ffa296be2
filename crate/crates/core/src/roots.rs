//! Simultaneous root finding (Aberth–Ehrlich) and Newton polishing.
//!
//! The solvers only need the Newton correction `f(z)/f'(z)`, so they work
//! equally on expanded coefficient vectors and on maps given by composition,
//! such as `P^n(z) - z`.

use crate::scalar::{cplx, czero, is_finite, Real, C};

#[derive(Clone, Copy, Debug)]
pub struct AberthOptions<T> {
    pub max_iter: usize,
    /// Relative step size `|dz| <= tol (1 + |z|)` at which a root is frozen.
    pub tol: T,
}

impl<T: Real> Default for AberthOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: T::epsilon() * T::lit(64.0),
        }
    }
}

/// Why the simultaneous iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged(usize),
    MaxIteration(usize),
    /// A NaN or infinity appeared.
    Failed(usize),
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::Converged(_))
    }
}

/// Points evenly spread on a circle, rotated off the real axis.
pub fn circle_guesses<T: Real>(n: usize, radius: T) -> Vec<C<T>> {
    let offset = T::lit(0.4);
    (0..n)
        .map(|k| {
            let t = T::TAU() * T::of_usize(k) / T::of_usize(n) + offset;
            C::from_polar(radius, t)
        })
        .collect()
}

/// Aberth–Ehrlich iteration. `newton(z)` returns `f(z)/f'(z)`, or `None` when
/// it is not finite. Roots in `fixed` are known and only repel the others.
/// Updates are applied in place as they are computed.
pub fn aberth<T, F>(newton: F, roots: &mut [C<T>], fixed: &[C<T>], opts: AberthOptions<T>) -> StopReason
where
    T: Real,
    F: Fn(C<T>) -> Option<C<T>>,
{
    let n = roots.len();
    let mut done = vec![false; n];
    for iter in 0..opts.max_iter {
        let mut active = 0usize;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = roots[i];
            let ratio = match newton(zi) {
                Some(r) => r,
                None => return StopReason::Failed(iter),
            };
            let mut s = czero::<T>();
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    s = s + (zi - zj).inv();
                }
            }
            for &zf in fixed {
                s = s + (zi - zf).inv();
            }
            let denom = C::new(T::one(), T::zero()) - ratio * s;
            let step = if denom.norm() > T::zero() && is_finite(denom) {
                ratio / denom
            } else {
                ratio
            };
            if !is_finite(step) {
                return StopReason::Failed(iter);
            }
            roots[i] = zi - step;
            if step.norm() <= opts.tol * (T::one() + roots[i].norm()) {
                done[i] = true;
            } else {
                active += 1;
            }
        }
        if active == 0 {
            return StopReason::Converged(iter + 1);
        }
    }
    StopReason::MaxIteration(opts.max_iter)
}

/// Newton's method from `z`. Returns the final iterate and whether the last
/// step fell below `accept * (1 + |z|)`.
pub fn newton<T, F>(newton: F, mut z: C<T>, max_iter: usize, accept: T) -> (C<T>, bool)
where
    T: Real,
    F: Fn(C<T>) -> Option<C<T>>,
{
    let stop = T::epsilon() * T::lit(16.0);
    let mut last = T::infinity();
    for _ in 0..max_iter {
        let Some(step) = newton(z) else {
            return (z, false);
        };
        z = z - step;
        last = step.norm();
        if last <= stop * (T::one() + z.norm()) {
            break;
        }
    }
    (z, last <= accept * (T::one() + z.norm()))
}

/// Value and derivative of an ascending coefficient polynomial by Horner.
pub fn horner<T: Real>(coeffs: &[C<T>], z: C<T>) -> (C<T>, C<T>) {
    let mut p = czero::<T>();
    let mut dp = czero::<T>();
    for &k in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + k;
    }
    (p, dp)
}

/// All roots of an ascending coefficient polynomial with nonzero leading term.
pub fn poly_roots<T: Real>(coeffs: &[C<T>]) -> Vec<C<T>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() == T::zero()) {
        coeffs.pop();
    }
    let deg = coeffs.len().saturating_sub(1);
    match deg {
        0 => return Vec::new(),
        1 => return vec![-coeffs[0] / coeffs[1]],
        2 => return quadratic_roots(coeffs[2], coeffs[1], coeffs[0]),
        _ => {}
    }
    let lead = coeffs[deg].norm();
    // Fujiwara-type bound on the root moduli.
    let bound = (0..deg)
        .map(|k| (coeffs[k].norm() / lead).powf(T::one() / T::of_usize(deg - k)))
        .fold(T::zero(), T::max)
        * T::lit(2.0);
    let radius = bound.max(T::lit(1e-3)) * T::lit(0.5);
    let mut roots = circle_guesses(deg, radius);
    let step = |z: C<T>| {
        let (p, dp) = horner(&coeffs, z);
        let r = p / dp;
        is_finite(r).then_some(r)
    };
    aberth(step, &mut roots, &[], AberthOptions::default());
    roots
        .into_iter()
        .map(|z| newton(step, z, 4, T::one()).0)
        .collect()
}

/// Roots of `a z^2 + b z + c`, cancellation-free.
pub fn quadratic_roots<T: Real>(a: C<T>, b: C<T>, c: C<T>) -> Vec<C<T>> {
    let disc = (b * b - a * c * T::lit(4.0)).sqrt();
    // Pick the sign that avoids cancellation in -b -/+ sqrt(disc).
    let q = if (b.conj() * disc).re >= T::zero() {
        (b + disc) * T::lit(-0.5)
    } else {
        (b - disc) * T::lit(-0.5)
    };
    if q.norm() == T::zero() {
        return vec![cplx(T::zero(), T::zero()); 2];
    }
    vec![q / a, c / q]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn cubic_roots_of_unity() {
        // z^3 - 8
        let roots = sorted(poly_roots(&[c(-8., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]));
        let w = Complex64::from_polar(2.0, std::f64::consts::TAU / 3.0);
        let expected = sorted(vec![c(2., 0.), w, w.conj()]);
        for (r, e) in roots.iter().zip(&expected) {
            assert!((r - e).norm() < 1e-12, "{r} vs {e}");
        }
    }

    #[test]
    fn quadratic_without_cancellation() {
        let r = quadratic_roots(c(1., 0.), c(-1e8, 0.), c(1., 0.));
        let small = r.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!((small - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn implicit_map_with_fixed_roots() {
        // f(z) = z^5 - 1 with two roots already known.
        let step = |z: Complex64| Some((z.powu(5) - 1.0) / (z.powu(4) * 5.0));
        let all: Vec<_> = (0..5).map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 5.0)).collect();
        let fixed = &all[..2];
        let mut free = vec![c(-0.5, 0.5), c(-0.5, -0.5), c(0.8, -0.9)];
        let stop = aberth(step, &mut free, fixed, AberthOptions::default());
        assert!(stop.converged());
        for e in &all[2..] {
            assert!(free.iter().any(|z| (z - e).norm() < 1e-12));
        }
    }

    #[test]
    fn newton_reports_failure() {
        let step = |_z: Complex64| None;
        assert!(!newton(step, c(1., 0.), 10, 1e-9).1);
    }
}
