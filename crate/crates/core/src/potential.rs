//! Escape-rate potentials: the Green function `g_{c,a}`, the maxima `G` and
//! `G_I` over critical values, the Lyapunov exponent and the Böttcher
//! coordinate near infinity.
//!
//! Once an orbit leaves the escape disk, `P(w) = (w^d/d)(1 + eps(w))` with
//! `|eps(w)| <= d S / |w|` (`S` the lower coefficient mass), so that
//!
//! ```text
//! g(z) = d^{-n} (log|z_n| - log(d)/(d-1)) + d^{-n} sum_{m>=0} d^{-m-1} log|1 + eps(z_{n+m})|
//! ```
//!
//! and the tail is bounded by `4 S d^{-n} / |z_n|`. Iteration continues
//! until that bound drops below the requested tolerance.

use crate::error::{Error, Result};
use crate::family::Family;
use crate::scalar::{Real, C};

/// Iterations after which a non-escaping orbit is declared bounded.
pub const DEFAULT_MAX_ITER: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenResult<T> {
    /// Green function value in nats, `>= 0`.
    pub value: T,
    /// Iterations performed.
    pub iterations: usize,
    pub escaped: bool,
}

/// A nonempty strictly increasing set of critical indices `I = (i_1 < .. < i_k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalIndexSet {
    indices: Vec<usize>,
}

impl CriticalIndexSet {
    pub fn new(indices: Vec<usize>, degree: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("indices", "critical index set must be nonempty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("indices", "critical indices must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last + 2 > degree {
                return Err(Error::invalid(
                    "indices",
                    format!("index {last} out of range 0..={}", degree - 2),
                ));
            }
        }
        Ok(Self { indices })
    }

    /// `{0, .., d-2}`.
    pub fn all(degree: usize) -> Self {
        Self {
            indices: (0..degree - 1).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Green function evaluator for one member of the family.
#[derive(Clone, Debug)]
pub struct Potential<'a, T: Real> {
    family: &'a Family<T>,
    max_iter: usize,
}

impl<'a, T: Real> Potential<'a, T> {
    pub fn new(family: &'a Family<T>) -> Self {
        Self {
            family,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn family(&self) -> &Family<T> {
        self.family
    }

    /// `g_{c,a}(z)` to absolute tolerance `tol` (nats).
    pub fn green(&self, z: C<T>, tol: T) -> GreenResult<T> {
        let fam = self.family;
        let r = fam.escape_radius();
        let mut w = z;
        let mut n = 0usize;
        while w.norm() < r {
            if n >= self.max_iter {
                return GreenResult {
                    value: T::zero(),
                    iterations: n,
                    escaped: false,
                };
            }
            w = fam.eval(w);
            n += 1;
        }
        let (value, iterations) = self.escaped_tail(w, n, tol);
        GreenResult {
            value,
            iterations,
            escaped: true,
        }
    }

    /// Continues an orbit that already left the escape disk at step `n`.
    fn escaped_tail(&self, mut w: C<T>, mut n: usize, tol: T) -> (T, usize) {
        let fam = self.family;
        let d = T::of_usize(fam.degree());
        let shift = d.ln() / (d - T::one());
        let s = fam.lower_coefficient_mass();
        let four = T::lit(4.0);
        // d^{-n} can underflow for f32 long before the orbit becomes large.
        let mut scale = d.powi(-(n as i32));
        loop {
            let modulus = w.norm();
            let bound = four * s * scale / modulus;
            let next = fam.eval(w);
            if bound <= tol || !next.norm().is_finite() || scale == T::zero() {
                let value = scale * (modulus.ln() - shift);
                return (value.max(T::zero()), n);
            }
            w = next;
            n += 1;
            scale = scale / d;
        }
    }

    /// `G = max_i g(c_i)`.
    #[allow(non_snake_case)]
    pub fn G(&self, tol: T) -> T {
        self.family
            .critical_points()
            .into_iter()
            .map(|c| self.green(c, tol).value)
            .fold(T::zero(), T::max)
    }

    /// `G_I = max_{i in I} g(c_i)`.
    #[allow(non_snake_case)]
    pub fn G_I(&self, set: &CriticalIndexSet, tol: T) -> T {
        let crit = self.family.critical_points();
        set.indices()
            .iter()
            .map(|&i| self.green(crit[i], tol).value)
            .fold(T::zero(), T::max)
    }

    /// Green values at all critical points, index order.
    pub fn critical_greens(&self, tol: T) -> Vec<T> {
        self.family
            .critical_points()
            .into_iter()
            .map(|c| self.green(c, tol).value)
            .collect()
    }

    /// `L = log d + sum_i g(c_i)`, each term to `tol / (d - 1)`.
    pub fn lyapunov(&self, tol: T) -> T {
        let d = self.family.degree();
        let each = tol / T::of_usize(d - 1);
        let sum: T = self.critical_greens(each).into_iter().sum();
        T::of_usize(d).ln() + sum
    }

    /// Böttcher coordinate `psi` with `psi(P(z)) = psi(z)^d` and `log|psi| = g`,
    /// normalized by `psi(z) ~ d^{-1/(d-1)} z` at infinity.
    ///
    /// The d-th root at each backward step is the one closest in argument to
    /// `d^{-1/(d-1)} z_k`, which is the correct branch wherever that leading
    /// term predicts the argument to within `pi/d`.
    pub fn bottcher(&self, z: C<T>, tol: T) -> Result<C<T>> {
        let fam = self.family;
        let g_crit = self.G(tol);
        let gz = self.green(z, tol);
        if !gz.escaped || gz.value <= g_crit {
            return Err(Error::Domain(format!(
                "Böttcher coordinate needs g(z) > G; got g = {:?}, G = {:?}",
                gz.value, g_crit
            )));
        }
        let d = fam.degree();
        let dd = T::of_usize(d);
        let shift = dd.ln() / (dd - T::one());
        let s = fam.lower_coefficient_mass();
        let r = fam.escape_radius();
        let four = T::lit(4.0);

        let mut orbit = vec![z];
        let mut w = z;
        let mut scale = T::one();
        loop {
            let modulus = w.norm();
            let next = fam.eval(w);
            if modulus >= r && (four * s * scale / modulus <= tol || !next.norm().is_finite()) {
                break;
            }
            w = next;
            orbit.push(w);
            scale = scale / dd;
        }
        // log psi(z_N) ~ log(kappa z_N) with kappa = d^{-1/(d-1)}.
        let last = *orbit.last().expect("orbit is nonempty");
        let mut log_mod = last.norm().ln() - shift;
        let mut arg = last.arg();
        let two_pi = T::TAU();
        for &zk in orbit.iter().rev().skip(1) {
            log_mod = log_mod / dd;
            let target = zk.arg();
            let base = arg / dd;
            let mut best = base;
            let mut best_gap = T::infinity();
            for j in 0..d {
                let cand = base + two_pi * T::of_usize(j) / dd;
                let gap = angle_gap(cand, target);
                if gap < best_gap {
                    best_gap = gap;
                    best = cand;
                }
            }
            arg = best;
        }
        Ok(C::from_polar(log_mod.exp(), arg))
    }
}

fn angle_gap<T: Real>(a: T, b: T) -> T {
    let two_pi = T::TAU();
    let mut x = (a - b) % two_pi;
    if x < T::zero() {
        x = x + two_pi;
    }
    x.min(two_pi - x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{FamilySpec, Parameter};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fam(d: u32, cs: &[Complex64], a: Complex64) -> Family<f64> {
        Family::new(FamilySpec::new(d).unwrap(), Parameter::new(cs.to_vec(), a)).unwrap()
    }

    /// Escape-rate limit `d^{-n} log|z_n|` from the definition, n = 200. Large
    /// iterates are carried as `exp(l) u` with `|u| = 1`, so nothing overflows.
    fn brute_green(f: &Family<f64>, z: Complex64) -> f64 {
        let d = f.degree();
        let df = d as f64;
        let coeffs = f.coefficients();
        let mut w = z;
        let mut n = 0;
        while n < 200 && w.norm() < 1e30 {
            w = f.eval(w);
            n += 1;
        }
        if n == 200 {
            return 0.0;
        }
        // log|z_n| / d^n, advanced in log-polar form.
        let mut l = w.norm().ln();
        let mut u = w / w.norm();
        let mut scaled = l / df.powi(n);
        for m in n..200 {
            // P(w) = w^d (c_d + sum_{j<d} c_j w^{j-d})
            let mut factor = coeffs[d];
            for (j, &cj) in coeffs[..d].iter().enumerate() {
                let k = (d - j) as i32;
                factor += cj * (-(k as f64) * l).exp() * u.powi(-k);
            }
            let next_l = df * l + factor.norm().ln();
            u = u.powu(d as u32) * factor / factor.norm();
            scaled += (next_l - df * l) / df.powi(m as i32 + 1);
            l = next_l;
        }
        scaled
    }

    #[test]
    fn green_closed_form_quadratic() {
        let f = fam(2, &[], c(0., 0.));
        let p = Potential::new(&f);
        let g4 = p.green(c(4., 0.), 1e-10);
        assert!(g4.escaped);
        assert!((g4.value - 2f64.ln()).abs() < 1e-10);
        assert!((p.green(c(10., 0.), 1e-10).value - 5f64.ln()).abs() < 1e-10);
        let inside = p.green(c(1., 0.), 1e-10);
        assert!(!inside.escaped);
        assert_eq!(inside.value, 0.0);
    }

    #[test]
    fn big_g_examples() {
        assert_eq!(Potential::new(&fam(2, &[], c(0., 0.))).G(1e-10), 0.0);

        let f = fam(3, &[c(4., 0.)], c(0., 0.));
        let p = Potential::new(&f);
        let g4 = p.green(c(4., 0.), 1e-12).value;
        assert!(g4 > 0.0);
        assert!((g4 - brute_green(&f, c(4., 0.))).abs() < 1e-9);
        assert_eq!(p.green(c(0., 0.), 1e-12).value, 0.0);
        assert_eq!(p.G(1e-12), g4);

        let all = CriticalIndexSet::all(3);
        assert_eq!(p.G_I(&all, 1e-12), p.G(1e-12));
        assert_eq!(p.G_I(&CriticalIndexSet::new(vec![0], 3).unwrap(), 1e-12), 0.0);
        assert_eq!(p.G_I(&CriticalIndexSet::new(vec![1], 3).unwrap(), 1e-12), g4);

        let f = fam(2, &[], c(2., 0.));
        assert!(Potential::new(&f).G(1e-12) > 0.0);
    }

    #[test]
    fn lyapunov_examples() {
        let l = Potential::new(&fam(2, &[], c(0., 0.))).lyapunov(1e-10);
        assert!((l - 2f64.ln()).abs() < 1e-14);
        let l = Potential::new(&fam(3, &[c(0., 0.)], c(0., 0.))).lyapunov(1e-10);
        assert!((l - 3f64.ln()).abs() < 1e-14);
        let f = fam(2, &[], c(2., 0.));
        let l = Potential::new(&f).lyapunov(1e-12);
        let oracle = 2f64.ln() + brute_green(&f, c(0., 0.));
        assert!((l - oracle).abs() < 1e-10, "{l} vs {oracle}");
    }

    #[test]
    fn critical_index_set_validation() {
        assert!(CriticalIndexSet::new(vec![], 3).is_err());
        assert!(CriticalIndexSet::new(vec![1, 0], 3).is_err());
        assert!(CriticalIndexSet::new(vec![0, 2], 3).is_err());
        assert!(CriticalIndexSet::new(vec![0, 1], 3).is_ok());
    }

    #[test]
    fn bottcher_quadratic() {
        let f = fam(2, &[], c(0., 0.));
        let p = Potential::new(&f);
        let psi = p.bottcher(c(10., 0.), 1e-12).unwrap();
        assert!((psi - c(5., 0.)).norm() < 1e-10);
        let psi = p.bottcher(c(-3., 4.), 1e-12).unwrap();
        assert!((psi - c(-1.5, 2.)).norm() < 1e-10);
        assert!(p.bottcher(c(1., 0.), 1e-12).is_err());
    }

    #[test]
    fn bottcher_contract_cubic() {
        let f = fam(3, &[c(1., 0.5)], c(0.3, -0.2));
        let p = Potential::new(&f);
        let tol = 1e-10;
        for z in [c(12., 3.), c(-9., 7.), c(0., -15.), c(20., 0.1)] {
            let psi = p.bottcher(z, tol).unwrap();
            let psi_next = p.bottcher(f.eval(z), tol).unwrap();
            let lhs = (psi_next - psi.powu(3)).norm();
            assert!(lhs < tol * (1.0 + psi.norm().powi(3)) * 10.0, "{lhs}");
            assert!((psi.norm().ln() - p.green(z, tol).value).abs() < tol);
        }
    }

    #[test]
    fn bounded_orbit_flag_consistency() {
        let f = fam(3, &[c(0.4, 0.2)], c(0.5, 0.1));
        let p = Potential::new(&f).with_max_iter(200);
        let r = f.escape_radius();
        for i in 0..40 {
            for j in 0..40 {
                let z = c(-3.0 + 6.0 * i as f64 / 39.0, -3.0 + 6.0 * j as f64 / 39.0);
                let mut w = z;
                let mut stays = true;
                for _ in 0..200 {
                    if w.norm() >= r {
                        stays = false;
                        break;
                    }
                    w = f.eval(w);
                }
                let g = p.green(z, 1e-9);
                assert_eq!(g.value == 0.0 && !g.escaped, stays);
            }
        }
    }

    #[test]
    fn single_precision_green() {
        let spec = FamilySpec::new(2).unwrap();
        let f = Family::new(spec, Parameter::<f32>::quadratic(num_complex::Complex32::new(0., 0.))).unwrap();
        let g = Potential::new(&f).green(num_complex::Complex32::new(4., 0.), 1e-5);
        assert!((g.value - 2f32.ln()).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn functional_equation(zr in -30.0f64..30.0, zi in -30.0f64..30.0,
                               cr in -1.5f64..1.5, ci in -1.5f64..1.5,
                               ar in -1.0f64..1.0, ai in -1.0f64..1.0) {
            let f = fam(3, &[c(cr, ci)], c(ar, ai));
            let p = Potential::new(&f);
            let z = c(zr, zi);
            let tol = 1e-10;
            let gz = p.green(z, tol);
            prop_assume!(gz.escaped);
            let gp = p.green(f.eval(z), tol);
            prop_assert!((gp.value - 3.0 * gz.value).abs() <= 2.0 * tol);
        }

        #[test]
        fn lyapunov_at_least_log_d(cr in -3.0f64..3.0, ci in -3.0f64..3.0,
                                   ar in -2.0f64..2.0, ai in -2.0f64..2.0) {
            let f = fam(3, &[c(cr, ci)], c(ar, ai));
            prop_assert!(Potential::new(&f).lyapunov(1e-9) >= 3f64.ln());
        }
    }
}
