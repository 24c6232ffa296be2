//! Sampled fields on complex slices of parameter space and the discrete
//! currents built from them.
//!
//! A slice of complex dimension `m` (1 or 2) is the affine image
//! `origin + t_1 b_1 + .. + t_m b_m` of a box in `C^m`. Each complex
//! coordinate contributes a real and an imaginary axis; values are stored
//! row-major over `(t_1.re, t_1.im, .., t_m.re, t_m.im)`, last axis fastest,
//! and sampled at cell centers.
//!
//! Masses follow the convention `dd^c log|z - z0| = delta_{z0}`, that is
//! `dd^c = (i/pi) d d-bar`.

mod io;
pub(crate) mod ops;

pub use io::{export_bin, export_csv, export_png, import_bin, PngOptions, PngPalette, PngScale};
pub use ops::{
    boundary_cells, boundary_mass_fraction, components, ddc_1d, dilate, mass, mass_equality_check, mixed_wedge, mollify, monge_ampere_2d,
    Labeling,
};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::Parameter;

/// Smallest number of samples accepted along a real axis.
pub const MIN_RESOLUTION: usize = 8;

/// Box of one complex slice coordinate and its sample counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub res_re: usize,
    pub res_im: usize,
}

impl Axis {
    pub fn new(re: (f64, f64), im: (f64, f64), res_re: usize, res_im: usize) -> Self {
        Self { re, im, res_re, res_im }
    }

    /// Square box `[lo, hi]^2` with `res` samples per real axis.
    pub fn square(lo: f64, hi: f64, res: usize) -> Self {
        Self::new((lo, hi), (lo, hi), res, res)
    }

    pub fn step_re(&self) -> f64 {
        (self.re.1 - self.re.0) / self.res_re as f64
    }

    pub fn step_im(&self) -> f64 {
        (self.im.1 - self.im.0) / self.res_im as f64
    }

    /// Cell center for indices `(i, j)` along the real and imaginary axes.
    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.re.0 + (i as f64 + 0.5) * self.step_re(),
            self.im.0 + (j as f64 + 0.5) * self.step_im(),
        )
    }
}

/// An `m`-complex-dimensional affine slice of `C^{d-1}` with a sampling box.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceSpec {
    origin: Vec<Complex64>,
    basis: Vec<Vec<Complex64>>,
    axes: Vec<Axis>,
}

impl SliceSpec {
    pub fn new(origin: Vec<Complex64>, basis: Vec<Vec<Complex64>>, axes: Vec<Axis>) -> Result<Self> {
        let m = axes.len();
        if !(1..=2).contains(&m) {
            return Err(Error::invalid("m", format!("slice dimension must be 1 or 2, got {m}")));
        }
        if basis.len() != m {
            return Err(Error::invalid("basis", format!("expected {m} direction vectors, got {}", basis.len())));
        }
        let dim = origin.len();
        if dim == 0 {
            return Err(Error::invalid("origin", "parameter space has positive dimension"));
        }
        if basis.iter().any(|b| b.len() != dim) {
            return Err(Error::invalid("basis", format!("direction vectors must have length {dim}")));
        }
        if !independent(&basis) {
            return Err(Error::invalid("basis", "direction vectors are linearly dependent"));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.res_re < MIN_RESOLUTION || ax.res_im < MIN_RESOLUTION {
                return Err(Error::invalid(
                    "resolution",
                    format!("axis {k} has {}x{} samples, each real axis needs at least {MIN_RESOLUTION}", ax.res_re, ax.res_im),
                ));
            }
            let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
            if !ok(ax.re) || !ok(ax.im) {
                return Err(Error::invalid("bounds", format!("axis {k} needs finite bounds with min < max")));
            }
        }
        Ok(Self { origin, basis, axes })
    }

    /// Slice along the parameter coordinates `coords` (indices into
    /// `(c_1, .., c_{d-2}, a)`) through the origin of `C^dim`.
    pub fn coordinate(dim: usize, coords: &[usize], axes: Vec<Axis>) -> Result<Self> {
        let basis = coords
            .iter()
            .map(|&k| {
                if k >= dim {
                    return Err(Error::invalid("basis", format!("coordinate {k} out of range for dimension {dim}")));
                }
                let mut v = vec![Complex64::new(0.0, 0.0); dim];
                v[k] = Complex64::new(1.0, 0.0);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vec![Complex64::new(0.0, 0.0); dim], basis, axes)
    }

    pub fn m(&self) -> usize {
        self.axes.len()
    }

    pub fn origin(&self) -> &[Complex64] {
        &self.origin
    }

    pub fn basis(&self) -> &[Vec<Complex64>] {
        &self.basis
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Sample counts of the `2m` real axes.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().flat_map(|a| [a.res_re, a.res_im]).collect()
    }

    /// Grid spacings of the `2m` real axes.
    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().flat_map(|a| [a.step_re(), a.step_im()]).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.steps().iter().product()
    }

    /// Multi-index of a flat cell index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        self.shape().iter().zip(idx).fold(0, |acc, (&n, &i)| acc * n + i)
    }

    /// Slice coordinates `t` of the cell center.
    pub fn local_coords(&self, idx: &[usize]) -> Vec<Complex64> {
        self.axes.iter().enumerate().map(|(k, ax)| ax.center(idx[2 * k], idx[2 * k + 1])).collect()
    }

    /// Point `origin + sum t_k b_k` of `C^{d-1}`.
    pub fn embed(&self, t: &[Complex64]) -> Vec<Complex64> {
        let mut p = self.origin.clone();
        for (tk, b) in t.iter().zip(&self.basis) {
            for (pj, bj) in p.iter_mut().zip(b) {
                *pj += tk * bj;
            }
        }
        p
    }

    /// Parameter at the center of a cell.
    pub fn parameter(&self, idx: &[usize]) -> Parameter<f64> {
        Parameter::from_coords(&self.embed(&self.local_coords(idx)))
    }

    /// Same sampling box, as needed by cellwise operations on two fields.
    pub fn same_grid(&self, other: &SliceSpec) -> bool {
        self == other
    }
}

fn independent(basis: &[Vec<Complex64>]) -> bool {
    let norm2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    match basis {
        [b] => norm2(b) > 0.0,
        [b1, b2] => {
            // Gram determinant |b1|^2 |b2|^2 - |<b1,b2>|^2 relative to its scale.
            let inner: Complex64 = b1.iter().zip(b2).map(|(x, y)| x.conj() * y).sum();
            let (n1, n2) = (norm2(b1), norm2(b2));
            n1 > 0.0 && n2 > 0.0 && n1 * n2 - inner.norm_sqr() > 1e-12 * n1 * n2
        }
        _ => false,
    }
}

/// Real values sampled on a slice; `-inf` marks flagged cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    slice: SliceSpec,
    values: Vec<f64>,
    label: String,
}

impl Field {
    /// NaN values are read as flags and stored as `-inf`.
    pub fn new(slice: SliceSpec, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != slice.len() {
            return Err(Error::invalid("values", format!("expected {} values, got {}", slice.len(), values.len())));
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if v.is_nan() {
                *v = f64::NEG_INFINITY;
            } else if *v == f64::INFINITY {
                return Err(Error::Cell {
                    index: slice.unravel(i),
                    reason: "value is +inf".into(),
                });
            }
        }
        Ok(Self {
            slice,
            values,
            label: label.into(),
        })
    }

    pub fn slice(&self) -> &SliceSpec {
        &self.slice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_flagged(&self, flat: usize) -> bool {
        self.values[flat] == f64::NEG_INFINITY
    }

    pub fn flagged_count(&self) -> usize {
        self.values.iter().filter(|v| **v == f64::NEG_INFINITY).count()
    }

    /// Cellwise `f(self, other)` on a shared slice.
    pub fn zip_with(&self, other: &Field, label: &str, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if !self.slice.same_grid(&other.slice) {
            return Err(Error::invalid("field", "fields live on different slices"));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field::new(self.slice.clone(), values, label)
    }

    pub fn map(&self, label: &str, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.slice.clone(), self.values.iter().map(|&v| f(v)).collect(), label)
    }
}

/// Cell masses of a discrete current or measure on a slice.
///
/// `raw` holds the signed masses produced by the operator; `density` is the
/// same array with negative cells clipped to zero, whose total clipped part is
/// `negative_mass` (a nonnegative number).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureGrid {
    slice: SliceSpec,
    raw: Vec<f64>,
    density: Vec<f64>,
    negative_mass: f64,
    flagged: usize,
}

impl MeasureGrid {
    pub(crate) fn from_raw(slice: SliceSpec, raw: Vec<f64>, flagged: usize) -> Self {
        let negative_mass = raw.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
        let density = raw.iter().map(|&v| v.max(0.0)).collect();
        Self {
            slice,
            raw,
            density,
            negative_mass,
            flagged,
        }
    }

    pub fn slice(&self) -> &SliceSpec {
        &self.slice
    }

    /// Clipped, nonnegative cell masses.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Signed cell masses before clipping.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn negative_mass(&self) -> f64 {
        self.negative_mass
    }

    /// Cells whose stencil touched a flagged value; their mass is zero.
    pub fn flagged_cells(&self) -> usize {
        self.flagged
    }

    /// Total clipped mass.
    pub fn total(&self) -> f64 {
        self.density.iter().sum()
    }

    /// Total signed mass.
    pub fn signed_total(&self) -> f64 {
        self.raw.iter().sum()
    }

    /// Total variation of the signed masses.
    pub fn abs_total(&self) -> f64 {
        self.raw.iter().map(|v| v.abs()).sum()
    }

    /// `sum_cells raw * chi(cell center)`, the pairing with a test function.
    pub fn pair(&self, chi: impl Fn(&[Complex64]) -> f64) -> f64 {
        (0..self.raw.len())
            .map(|i| {
                let t = self.slice.local_coords(&self.slice.unravel(i));
                self.raw[i] * chi(&t)
            })
            .sum()
    }

    /// Clipped masses as a field, for export.
    pub fn to_field(&self, label: impl Into<String>) -> Field {
        Field {
            slice: self.slice.clone(),
            values: self.density.clone(),
            label: label.into(),
        }
    }
}

/// Samples `f` at every cell center of `slice`; `f` receives the slice
/// coordinates `t`. Errors carry the first failing cell in index order.
pub fn sample_local<F>(slice: &SliceSpec, f: F, parallel: bool, label: &str) -> Result<Field>
where
    F: Fn(&[Complex64]) -> Result<f64> + Sync,
{
    let eval = |i: usize| {
        let idx = slice.unravel(i);
        f(&slice.local_coords(&idx)).map_err(|e| Error::Cell {
            index: idx,
            reason: e.to_string(),
        })
    };
    let results: Vec<Result<f64>> = if parallel {
        (0..slice.len()).into_par_iter().map(eval).collect()
    } else {
        (0..slice.len()).map(eval).collect()
    };
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Field::new(slice.clone(), values, label)
}

/// Samples a function of the parameter at every cell center.
pub fn sample<F>(slice: &SliceSpec, f: F, parallel: bool, label: &str) -> Result<Field>
where
    F: Fn(&Parameter<f64>) -> Result<f64> + Sync,
{
    sample_local(slice, |t| f(&Parameter::from_coords(&slice.embed(t))), parallel, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Family, FamilySpec};
    use crate::potential::Potential;

    fn unit_square(res: usize) -> SliceSpec {
        SliceSpec::coordinate(1, &[0], vec![Axis::square(0.0, 1.0, res)]).unwrap()
    }

    #[test]
    fn constant_sample() {
        let f = sample_local(&unit_square(8), |_| Ok(1.0), false, "one").unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn real_part_ramp() {
        let s = unit_square(8);
        let f = sample(&s, |p| Ok(p.a.re), true, "re").unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(f.values()[i * 8 + j], (i as f64 + 0.5) / 8.0);
            }
        }
    }

    #[test]
    fn lyapunov_field_is_bounded_below() {
        let spec = FamilySpec::new(2).unwrap();
        let s = SliceSpec::coordinate(1, &[0], vec![Axis::square(-3.0, 3.0, 16)]).unwrap();
        let f = sample(
            &s,
            |p| {
                let fam = Family::new(spec, p.clone())?;
                Ok(Potential::new(&fam).lyapunov(1e-10))
            },
            true,
            "L",
        )
        .unwrap();
        assert!(f.values().iter().all(|&v| v >= 2f64.ln() - 1e-12));
    }

    #[test]
    fn rejects_coarse_and_degenerate_slices() {
        assert!(SliceSpec::coordinate(1, &[0], vec![Axis::square(0.0, 1.0, 4)]).is_err());
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        let dependent = SliceSpec::new(
            vec![Complex64::new(0.0, 0.0); 2],
            vec![b.clone(), b.iter().map(|z| z * Complex64::new(0.0, 3.0)).collect()],
            vec![Axis::square(0.0, 1.0, 8), Axis::square(0.0, 1.0, 8)],
        );
        assert!(dependent.is_err());
    }

    #[test]
    fn errors_name_the_cell() {
        let err = sample_local(&unit_square(8), |t| if t[0].re > 0.9 { Err(Error::Domain("x".into())) } else { Ok(0.0) }, true, "e");
        match err {
            Err(Error::Cell { index, .. }) => assert_eq!(index, vec![7, 0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ravel_round_trip() {
        let s = SliceSpec::coordinate(2, &[0, 1], vec![Axis::new((0., 1.), (0., 1.), 8, 9), Axis::new((0., 1.), (0., 1.), 10, 11)]).unwrap();
        for flat in [0, 1, 77, 5000, s.len() - 1] {
            assert_eq!(s.ravel(&s.unravel(flat)), flat);
        }
    }
}
