//! The critically marked polynomial family
//!
//! ```text
//! P_{c,a}(z) = z^d/d + sum_{j=2}^{d-1} (-1)^{d-j} e_{d-j}(c) z^j/j + a^d
//! ```
//!
//! where `e_k` is the elementary symmetric polynomial of degree `k` in the
//! marked critical points `c_1..c_{d-2}`. The critical points are exactly
//! `0, c_1, .., c_{d-2}` since `P'(z) = z * prod_i (z - c_i)`.

use crate::error::{Error, Result};
use crate::scalar::{cone, czero, Real, C};

/// Degree of the family, `d >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FamilySpec {
    degree: u32,
}

impl FamilySpec {
    pub fn new(degree: u32) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidDegree(degree));
        }
        Ok(Self { degree })
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.degree as usize
    }

    /// Complex dimension of the parameter space, `d - 1`.
    #[inline]
    pub fn parameter_dim(&self) -> usize {
        self.d() - 1
    }

    /// Number of marked free critical points `c_1..c_{d-2}`.
    #[inline]
    pub fn marked_len(&self) -> usize {
        self.d() - 2
    }
}

/// A point `(c_1, .., c_{d-2}, a)` of the parameter space `C^{d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T: Real> {
    pub c: Vec<C<T>>,
    pub a: C<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(c: Vec<C<T>>, a: C<T>) -> Self {
        Self { c, a }
    }

    /// Parameter of the quadratic family, which has no free critical point.
    pub fn quadratic(a: C<T>) -> Self {
        Self { c: Vec::new(), a }
    }

    /// Reads a parameter from coordinates `(c_1, .., c_{d-2}, a)`.
    pub fn from_coords(coords: &[C<T>]) -> Self {
        let (a, c) = coords.split_last().expect("parameter coordinates are nonempty");
        Self { c: c.to_vec(), a: *a }
    }

    /// Coordinates `(c_1, .., c_{d-2}, a)`.
    pub fn coords(&self) -> Vec<C<T>> {
        let mut v = self.c.clone();
        v.push(self.a);
        v
    }
}

/// `P_{c,a}` for a fixed parameter, with its coefficients expanded once.
#[derive(Clone, Debug)]
pub struct Family<T: Real> {
    spec: FamilySpec,
    param: Parameter<T>,
    /// Ascending coefficients, length `d + 1`.
    coeffs: Vec<C<T>>,
    escape_radius: T,
}

/// Elementary symmetric polynomials `e_0..e_n` of `xs`.
pub fn elementary_symmetric<T: Real>(xs: &[C<T>]) -> Vec<C<T>> {
    let mut e = vec![czero::<T>(); xs.len() + 1];
    e[0] = cone();
    for (i, &x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            let prev = e[k - 1];
            e[k] = e[k] + prev * x;
        }
    }
    e
}

impl<T: Real> Family<T> {
    pub fn new(spec: FamilySpec, param: Parameter<T>) -> Result<Self> {
        if param.c.len() != spec.marked_len() {
            return Err(Error::ParameterLength {
                degree: spec.degree(),
                expected: spec.marked_len(),
                got: param.c.len(),
            });
        }
        let d = spec.d();
        let sigma = elementary_symmetric(&param.c);
        let mut coeffs = vec![czero::<T>(); d + 1];
        coeffs[d] = cone::<T>().unscale(T::of_usize(d));
        for j in 2..d {
            let sign = if (d - j) % 2 == 0 { T::one() } else { -T::one() };
            coeffs[j] = sigma[d - j].scale(sign / T::of_usize(j));
        }
        coeffs[0] = param.a.powu(spec.degree());
        let escape_radius = escape_radius_for(d, &coeffs);
        Ok(Self {
            spec,
            param,
            coeffs,
            escape_radius,
        })
    }

    #[inline]
    pub fn spec(&self) -> FamilySpec {
        self.spec
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.spec.d()
    }

    #[inline]
    pub fn parameter(&self) -> &Parameter<T> {
        &self.param
    }

    /// Ascending coefficients of `P_{c,a}`.
    #[inline]
    pub fn coefficients(&self) -> &[C<T>] {
        &self.coeffs
    }

    #[inline]
    pub fn eval(&self, z: C<T>) -> C<T> {
        self.coeffs.iter().rev().fold(czero(), |acc, &k| acc * z + k)
    }

    /// `P'(z) = z * prod_i (z - c_i)`.
    #[inline]
    pub fn derivative(&self, z: C<T>) -> C<T> {
        self.param.c.iter().fold(z, |acc, &ci| acc * (z - ci))
    }

    #[inline]
    pub fn eval_with_derivative(&self, z: C<T>) -> (C<T>, C<T>) {
        (self.eval(z), self.derivative(z))
    }

    /// `(0, c_1, .., c_{d-2})`, index 0 first.
    pub fn critical_points(&self) -> Vec<C<T>> {
        std::iter::once(czero()).chain(self.param.c.iter().copied()).collect()
    }

    /// Radius beyond which every orbit at least doubles in modulus at each step.
    #[inline]
    pub fn escape_radius(&self) -> T {
        self.escape_radius
    }

    /// Derivative of the ascending coefficients along the parameter direction
    /// `dir`, exact.
    pub fn coefficient_derivative(&self, dir: &Parameter<T>) -> Vec<C<T>> {
        let d = self.degree();
        let mut out = vec![czero::<T>(); d + 1];
        out[0] = self.param.a.powu(self.spec.degree() - 1).scale(T::of_usize(d)) * dir.a;
        for (i, &dc) in dir.c.iter().enumerate() {
            if dc == czero() {
                continue;
            }
            // d e_k / d c_i = e_{k-1} of the other marked points.
            let others: Vec<C<T>> = self.param.c.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, &x)| x).collect();
            let e = elementary_symmetric(&others);
            for j in 2..d {
                let k = d - j;
                let sign = if k % 2 == 0 { T::one() } else { -T::one() };
                out[j] = out[j] + e[k - 1].scale(sign / T::of_usize(j)) * dc;
            }
        }
        out
    }

    /// `sum_{k<d} |coeff_k|`, the lower order mass used by tail bounds.
    pub fn lower_coefficient_mass(&self) -> T {
        self.coeffs[..self.degree()].iter().map(|c| c.norm()).sum()
    }
}

/// `max(4 d^{1/(d-1)}, 4 (1 + sum_k |coeff_k|))`, enlarged until the doubling
/// bound `|P(z)| >= |z|^{d-1} (|z|/d - S) >= 2|z|` holds for `|z| >= R`.
fn escape_radius_for<T: Real>(d: usize, coeffs: &[C<T>]) -> T {
    let dd = T::of_usize(d);
    let four = T::lit(4.0);
    let total: T = coeffs.iter().map(|c| c.norm()).sum();
    let lower: T = coeffs[..d].iter().map(|c| c.norm()).sum();
    let floor = four * dd.powf(T::one() / (dd - T::one()));
    let mut r = floor.max(four * (T::one() + total));
    // r >= 4 > 1, so |P(z)| >= |z|^d/d - S |z|^{d-1} for |z| >= r.
    let two = T::lit(2.0);
    let holds = |r: T| r.powi(d as i32 - 2) * (r / dd - lower) >= two;
    while !holds(r) {
        r = r * T::lit(1.5);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn fam(d: u32, c: &[Complex64], a: Complex64) -> Family<f64> {
        Family::new(FamilySpec::new(d).unwrap(), Parameter::new(c.to_vec(), a)).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(fam(2, &[], c(0., 0.)).eval(c(2., 0.)), c(2., 0.));
        assert!((fam(3, &[c(0., 0.)], c(0., 0.)).eval(c(3., 0.)) - c(9., 0.)).norm() < 1e-12);
        let v = fam(3, &[c(4., 0.)], c(0., 0.)).eval(c(4., 0.));
        assert!((v - c(-32. / 3., 0.)).norm() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let z0 = c(0.3, -1.7);
        assert_eq!(fam(2, &[], c(5., 1.)).derivative(z0), z0);
        let f = fam(3, &[c(4., 0.)], c(0., 0.));
        assert_eq!(f.derivative(c(0., 0.)), c(0., 0.));
        assert_eq!(f.derivative(c(1., 0.)), c(-3., 0.));
    }

    #[test]
    fn critical_point_order() {
        assert_eq!(fam(2, &[], c(7., 0.)).critical_points(), vec![c(0., 0.)]);
        assert_eq!(fam(3, &[c(4., 0.)], c(0., 0.)).critical_points(), vec![c(0., 0.), c(4., 0.)]);
        let cs = [c(1., 0.), c(0., 1.), c(-2., 0.)];
        let f = fam(5, &cs, c(0.5, 0.));
        assert_eq!(f.critical_points(), vec![c(0., 0.), cs[0], cs[1], cs[2]]);
    }

    #[test]
    fn escape_radius_examples() {
        let f = fam(2, &[], c(0., 0.));
        let r = f.escape_radius();
        assert!(r >= 4.0);
        assert!(f.eval(c(r, 0.)).norm() >= 2.0 * r);

        let f = fam(3, &[c(0., 0.)], c(0., 0.));
        let r = f.escape_radius();
        assert!(r >= 6f64.sqrt() && r >= 4.0 * 3f64.sqrt());
        assert!(f.eval(c(r, 0.)).norm() >= 2.0 * r);
    }

    #[test]
    fn escape_radius_holds_for_high_degree() {
        // The plain coefficient bound is too small here; the doubling loop fixes it.
        let cs = vec![c(1., 0.); 8];
        let f = fam(10, &cs, c(1., 1.));
        let r = f.escape_radius();
        for k in 0..64 {
            let t = k as f64 / 64.0 * std::f64::consts::TAU;
            let z = Complex64::from_polar(r, t);
            assert!(f.eval(z).norm() >= 2.0 * r);
        }
    }

    #[test]
    fn coefficient_derivative_matches_differences() {
        let spec = FamilySpec::new(4).unwrap();
        let p = Parameter::new(vec![c(0.3, -0.2), c(-1.1, 0.4)], c(0.7, 0.5));
        let dir = Parameter::new(vec![c(0.2, 0.1), c(-0.3, 0.6)], c(1.0, -0.4));
        let h = 1e-6;
        let shifted = Parameter::new(p.c.iter().zip(&dir.c).map(|(x, v)| x + v * h).collect(), p.a + dir.a * h);
        let f0 = Family::new(spec, p.clone()).unwrap();
        let f1 = Family::new(spec, shifted).unwrap();
        let exact = f0.coefficient_derivative(&dir);
        for k in 0..=4 {
            let fd = (f1.coefficients()[k] - f0.coefficients()[k]) / h;
            assert!((fd - exact[k]).norm() < 1e-5, "k={k}: {fd} vs {}", exact[k]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FamilySpec::new(1).is_err());
        let spec = FamilySpec::new(3).unwrap();
        assert!(Family::new(spec, Parameter::<f64>::quadratic(c(0., 0.))).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let spec = FamilySpec::new(3).unwrap();
        let f = Family::new(spec, Parameter::new(vec![num_complex::Complex32::new(4., 0.)], num_complex::Complex32::new(0., 0.))).unwrap();
        let v = f.eval(num_complex::Complex32::new(4., 0.));
        assert!((v.re + 32. / 3.).abs() < 1e-5);
    }
}
