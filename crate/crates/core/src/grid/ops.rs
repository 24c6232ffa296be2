//! Discrete `dd^c`, Monge–Ampère and mixed wedge operators, masses, and
//! connected components.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Field, MeasureGrid};
use crate::error::{Error, Result};

/// `(dd^c u)^2 = (8/pi^2) det[u_{j k-bar}] dV` on `C^2`.
const MA_CONSTANT: f64 = 8.0 / (PI * PI);

fn require_m(field: &Field, m: usize, op: &'static str) -> Result<()> {
    if field.slice().m() != m {
        return Err(Error::invalid(op, format!("needs a slice of complex dimension {m}, got {}", field.slice().m())));
    }
    Ok(())
}

/// Row-major strides of a shape.
fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn interior(idx: &[usize], shape: &[usize]) -> bool {
    idx.iter().zip(shape).all(|(&i, &n)| i >= 1 && i + 1 < n)
}

/// `dd^c u` on a one-dimensional slice: the 5-point Laplacian times
/// `hx hy / (2 pi)`. Boundary cells carry no mass; cells whose stencil
/// touches a flagged value get mass zero and are counted.
pub fn ddc_1d(field: &Field) -> Result<MeasureGrid> {
    require_m(field, 1, "ddc_1d")?;
    let slice = field.slice();
    let shape = slice.shape();
    let (nx, ny) = (shape[0], shape[1]);
    let steps = slice.steps();
    let (hx, hy) = (steps[0], steps[1]);
    let u = field.values();
    let mut raw = vec![0.0; u.len()];
    let mut flagged = 0;
    let scale = hx * hy / (2.0 * PI);
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let c = i * ny + j;
            let stencil = [u[c], u[c - ny], u[c + ny], u[c - 1], u[c + 1]];
            if stencil.iter().any(|v| !v.is_finite()) {
                flagged += 1;
                continue;
            }
            let lap = (u[c + ny] - 2.0 * u[c] + u[c - ny]) / (hx * hx) + (u[c + 1] - 2.0 * u[c] + u[c - 1]) / (hy * hy);
            raw[c] = lap * scale;
        }
    }
    Ok(MeasureGrid::from_raw(slice.clone(), raw, flagged))
}

fn gaussian_kernel(sigma_cells: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_cells).ceil() as isize;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma_cells * sigma_cells)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Value at `k` on a line of length `n`, extended past the ends by odd
/// reflection `u(-k) = 2u(0) - u(k)`, which preserves affine functions.
fn reflected(line: &[f64], k: isize) -> f64 {
    let n = line.len() as isize;
    if k < 0 {
        let m = (-k).min(n - 1) as usize;
        2.0 * line[0] - line[m]
    } else if k >= n {
        let m = (2 * (n - 1) - k).max(0) as usize;
        2.0 * line[(n - 1) as usize] - line[m]
    } else {
        line[k as usize]
    }
}

fn convolve_axis(values: &mut [f64], shape: &[usize], axis: usize, kernel: &[f64]) {
    let st = strides(shape);
    let n = shape[axis];
    let stride = st[axis];
    let radius = (kernel.len() / 2) as isize;
    let total = values.len();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for start in 0..total {
        // Visit each line once, from its first element.
        if (start / stride) % n != 0 {
            continue;
        }
        for (k, slot) in line.iter_mut().enumerate() {
            *slot = values[start + k * stride];
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o = kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * reflected(&line, k as isize + j as isize - radius))
                .sum();
        }
        for (k, &o) in out.iter().enumerate() {
            values[start + k * stride] = o;
        }
    }
}

/// Gaussian mollification with standard deviation `h` (in slice coordinate
/// units), truncated at `3h`, separable over the real axes.
pub fn mollify(field: &Field, h: f64) -> Result<Field> {
    let steps = field.slice().steps();
    let coarsest = steps.iter().cloned().fold(0.0, f64::max);
    if !(h.is_finite() && h >= coarsest * (1.0 - 1e-12)) {
        return Err(Error::invalid("mollify_h", format!("must be at least the grid spacing {coarsest}, got {h}")));
    }
    let shape = field.slice().shape();
    let mut values = field.values().to_vec();
    for (axis, &step) in steps.iter().enumerate() {
        let kernel = gaussian_kernel(h / step);
        convolve_axis(&mut values, &shape, axis, &kernel);
    }
    Field::new(field.slice().clone(), values, format!("{} (mollified)", field.label()))
}

/// Complex Hessian `(H11, H22, H12)` at an interior cell of a 4-axis array.
fn complex_hessian(u: &[f64], c: usize, st: &[usize], h: &[f64]) -> Option<(f64, f64, Complex64)> {
    let at = |offsets: &[(usize, isize)]| {
        let mut idx = c as isize;
        for &(axis, s) in offsets {
            idx += s * st[axis] as isize;
        }
        u[idx as usize]
    };
    let pure = |a: usize| (at(&[(a, 1)]) - 2.0 * u[c] + at(&[(a, -1)])) / (h[a] * h[a]);
    let mixed = |a: usize, b: usize| {
        (at(&[(a, 1), (b, 1)]) - at(&[(a, 1), (b, -1)]) - at(&[(a, -1), (b, 1)]) + at(&[(a, -1), (b, -1)]))
            / (4.0 * h[a] * h[b])
    };
    // Axes: 0 = x1, 1 = y1, 2 = x2, 3 = y2.
    let h11 = 0.25 * (pure(0) + pure(1));
    let h22 = 0.25 * (pure(2) + pure(3));
    let h12 = Complex64::new(0.25 * (mixed(0, 2) + mixed(1, 3)), 0.25 * (mixed(0, 3) - mixed(1, 2)));
    (h11.is_finite() && h22.is_finite() && h12.re.is_finite() && h12.im.is_finite()).then_some((h11, h22, h12))
}

/// Cellwise polarized Monge–Ampère masses of two already mollified fields.
fn ma_raw(u: &Field, v: &Field) -> (Vec<f64>, usize) {
    let slice = u.slice();
    let shape = slice.shape();
    let st = strides(&shape);
    let h = slice.steps();
    let scale = MA_CONSTANT * slice.cell_volume();
    let same = std::ptr::eq(u, v);
    let mut raw = vec![0.0; u.values().len()];
    let mut flagged = 0;
    for (c, r) in raw.iter_mut().enumerate() {
        if !interior(&slice.unravel(c), &shape) {
            continue;
        }
        let hu = complex_hessian(u.values(), c, &st, &h);
        let hv = if same { hu } else { complex_hessian(v.values(), c, &st, &h) };
        match (hu, hv) {
            (Some((a11, a22, a12)), Some((b11, b22, b12))) => {
                let det = 0.5 * (a11 * b22 + b11 * a22) - (a12 * b12.conj()).re;
                *r = scale * det;
            }
            _ => flagged += 1,
        }
    }
    (raw, flagged)
}

/// `(dd^c u)^2` on a two-dimensional slice after Gaussian mollification at
/// scale `mollify_h`; negative cells are clipped and reported.
pub fn monge_ampere_2d(field: &Field, mollify_h: f64) -> Result<MeasureGrid> {
    require_m(field, 2, "monge_ampere_2d")?;
    let smooth = mollify(field, mollify_h)?;
    let (raw, flagged) = ma_raw(&smooth, &smooth);
    Ok(MeasureGrid::from_raw(field.slice().clone(), raw, flagged))
}

/// `dd^c u ^ dd^c v = [MA(u+v) - MA(u) - MA(v)] / 2`, evaluated as the
/// polarized Hessian determinant and clipped like `monge_ampere_2d`.
pub fn mixed_wedge(u: &Field, v: &Field, mollify_h: f64) -> Result<MeasureGrid> {
    require_m(u, 2, "mixed_wedge")?;
    if !u.slice().same_grid(v.slice()) {
        return Err(Error::invalid("mixed_wedge", "fields live on different slices"));
    }
    let su = mollify(u, mollify_h)?;
    let sv = mollify(v, mollify_h)?;
    let (raw, flagged) = ma_raw(&su, &sv);
    Ok(MeasureGrid::from_raw(u.slice().clone(), raw, flagged))
}

/// Clipped mass of the cells selected by `region(index, slice coordinates)`.
pub fn mass(mg: &MeasureGrid, region: impl Fn(&[usize], &[Complex64]) -> bool) -> f64 {
    let slice = mg.slice();
    mg.density()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let idx = slice.unravel(*i);
            region(&idx, &slice.local_coords(&idx))
        })
        .map(|(_, v)| v)
        .sum()
}

/// Connected components of a cell predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    /// Component id per cell, `None` where the predicate fails.
    pub labels: Vec<Option<u32>>,
    pub count: usize,
}

/// 4-connected components of `{predicate(value)}` on a one-dimensional slice.
/// Ids follow the raster order of each component's first cell.
pub fn components(field: &Field, predicate: impl Fn(f64) -> bool) -> Result<Labeling> {
    require_m(field, 1, "components")?;
    let shape = field.slice().shape();
    let inside: Vec<bool> = field.values().iter().map(|&v| predicate(v)).collect();
    Ok(label_mask(&inside, shape[0], shape[1]))
}

/// 4-connected labeling of a boolean raster of `rows x cols`, row-major.
pub(crate) fn label_mask(inside: &[bool], rows: usize, cols: usize) -> Labeling {
    let mut labels = vec![None; inside.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..inside.len() {
        if !inside[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(count);
        stack.push(start);
        while let Some(c) = stack.pop() {
            let (i, j) = (c / cols, c % cols);
            let mut visit = |n: usize| {
                if inside[n] && labels[n].is_none() {
                    labels[n] = Some(count);
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(c - cols);
            }
            if i + 1 < rows {
                visit(c + cols);
            }
            if j > 0 {
                visit(c - 1);
            }
            if j + 1 < cols {
                visit(c + 1);
            }
        }
        count += 1;
    }
    Labeling {
        labels,
        count: count as usize,
    }
}

/// Total `dd^c` masses of `u` and `v` over the slice, for fields that agree
/// outside the cells selected by `k` and on a two-cell collar along the
/// boundary. Since the discrete Laplacian sums to a boundary flux, the two
/// totals agree up to rounding.
pub fn mass_equality_check(u: &Field, v: &Field, k: impl Fn(&[usize]) -> bool) -> Result<(f64, f64)> {
    require_m(u, 1, "mass_equality_check")?;
    if !u.slice().same_grid(v.slice()) {
        return Err(Error::invalid("mass_equality_check", "fields live on different slices"));
    }
    let slice = u.slice();
    let shape = slice.shape();
    for c in 0..u.values().len() {
        let idx = slice.unravel(c);
        let collar = idx.iter().zip(&shape).any(|(&i, &n)| i < 2 || i + 2 >= n);
        if (collar || !k(&idx)) && u.values()[c].to_bits() != v.values()[c].to_bits() {
            return Err(Error::invalid(
                "mass_equality_check",
                format!("u and v differ at cell {idx:?}, outside K or in the boundary collar"),
            ));
        }
    }
    Ok((ddc_1d(u)?.signed_total(), ddc_1d(v)?.signed_total()))
}

/// Cells of `inside` with an axis neighbour of the other kind: the discrete
/// boundary of the set, taken from both sides.
pub fn boundary_cells(slice: &super::SliceSpec, inside: &[bool]) -> Vec<bool> {
    let shape = slice.shape();
    let strides = strides(&shape);
    (0..inside.len())
        .map(|c| {
            let idx = slice.unravel(c);
            (0..shape.len()).any(|k| {
                (idx[k] > 0 && inside[c - strides[k]] != inside[c]) || (idx[k] + 1 < shape[k] && inside[c + strides[k]] != inside[c])
            })
        })
        .collect()
}

/// Cells within Chebyshev index distance `radius` of a marked cell. The ball
/// is a product of intervals, so the dilation runs one axis at a time.
pub fn dilate(slice: &super::SliceSpec, marked: &[bool], radius: usize) -> Vec<bool> {
    let shape = slice.shape();
    let strides = strides(&shape);
    let mut cur = marked.to_vec();
    for k in 0..shape.len() {
        let next: Vec<bool> = (0..cur.len())
            .map(|c| {
                let i = (c / strides[k]) % shape[k];
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(shape[k] - 1);
                (lo..=hi).any(|j| cur[c - i * strides[k] + j * strides[k]])
            })
            .collect();
        cur = next;
    }
    cur
}

/// Fraction of the positive mass of `mg` carried by the cells within
/// `radius` cells of the discrete boundary of `inside`.
pub fn boundary_mass_fraction(mg: &MeasureGrid, inside: &[bool], radius: usize) -> f64 {
    let near = dilate(mg.slice(), &boundary_cells(mg.slice(), inside), radius);
    let total = mg.total();
    if total <= 0.0 {
        return 0.0;
    }
    mg.density().iter().zip(&near).filter(|(_, &n)| n).map(|(&v, _)| v).sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::super::{sample_local, Axis, SliceSpec};
    use super::*;

    fn plane(lo: f64, hi: f64, res: usize) -> SliceSpec {
        SliceSpec::coordinate(1, &[0], vec![Axis::square(lo, hi, res)]).unwrap()
    }

    fn space(lo: f64, hi: f64, res: usize) -> SliceSpec {
        SliceSpec::coordinate(2, &[0, 1], vec![Axis::square(lo, hi, res), Axis::square(lo, hi, res)]).unwrap()
    }

    fn field(s: &SliceSpec, f: impl Fn(&[Complex64]) -> f64 + Sync) -> Field {
        sample_local(s, |t| Ok(f(t)), false, "u").unwrap()
    }

    #[test]
    fn log_modulus_has_unit_mass() {
        let s = plane(-1.0, 1.0, 256);
        let z0 = Complex64::new(0.1, -0.05);
        let mg = ddc_1d(&field(&s, |t| (t[0] - z0).norm().ln())).unwrap();
        assert!((mg.signed_total() - 1.0).abs() < 0.02, "{}", mg.signed_total());
    }

    #[test]
    fn harmonic_field_has_no_mass() {
        let s = plane(-1.0, 1.0, 64);
        let mg = ddc_1d(&field(&s, |t| t[0].re)).unwrap();
        assert!(mg.abs_total() < 1e-8);
        let mg = ddc_1d(&field(&s, |t| (t[0] * t[0]).re)).unwrap();
        assert!(mg.abs_total() < 1e-8);
    }

    #[test]
    fn ddc_is_linear_cellwise() {
        let s = plane(-1.0, 1.0, 32);
        let u = field(&s, |t| t[0].norm_sqr().sqrt());
        let v = field(&s, |t| (t[0] - 0.3).norm().max(0.2).ln());
        let w = u.zip_with(&v, "w", |a, b| 2.0 * a - 3.0 * b).unwrap();
        let (du, dv, dw) = (ddc_1d(&u).unwrap(), ddc_1d(&v).unwrap(), ddc_1d(&w).unwrap());
        for i in 0..s.len() {
            assert!((dw.raw()[i] - (2.0 * du.raw()[i] - 3.0 * dv.raw()[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_regions() {
        let s = plane(-1.0, 1.0, 64);
        let mg = ddc_1d(&field(&s, |t| t[0].norm_sqr())).unwrap();
        let all = mass(&mg, |_, _| true);
        assert!((all - mg.total()).abs() < 1e-12);
        assert_eq!(mass(&mg, |_, _| false), 0.0);
        let left = mass(&mg, |_, t| t[0].re < 0.0);
        assert!((left - all / 2.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_density_matches_analytic_hessian() {
        // u = |z1|^2 + |z2|^2 has complex Hessian the identity. Away from the
        // boundary the mollifier only adds a constant to a quadratic.
        let s = space(-1.0, 1.0, 16);
        let u = field(&s, |t| t[0].norm_sqr() + t[1].norm_sqr());
        let h = s.steps()[0];
        let mg = monge_ampere_2d(&u, h).unwrap();
        let expected = MA_CONSTANT * s.cell_volume();
        let deep = |idx: &[usize]| idx.iter().all(|&i| (4..12).contains(&i));
        let mut checked = 0;
        for (c, &v) in mg.raw().iter().enumerate() {
            if deep(&s.unravel(c)) {
                assert!((v - expected).abs() < 1e-9 * expected, "{v} vs {expected}");
                checked += 1;
            }
        }
        assert_eq!(checked, 8usize.pow(4));
        assert!(mg.negative_mass() == 0.0);
    }

    #[test]
    fn pluriharmonic_fields_carry_no_ma_mass() {
        let s = space(-1.0, 1.0, 10);
        let u = field(&s, |t| t[0].re + t[1].im);
        let mg = monge_ampere_2d(&u, s.steps()[0]).unwrap();
        assert!(mg.abs_total() < 1e-8);
        let v = field(&s, |t| (t[0] * t[0]).norm());
        assert!(mixed_wedge(&u, &v, s.steps()[0]).unwrap().abs_total() < 1e-6);
    }

    #[test]
    fn torus_measure_from_the_bidisk_green_function() {
        // (dd^c max(log+|z1|, log+|z2|))^2 is the normalized Haar measure of
        // the unit torus.
        let s = space(-1.6, 1.6, 24);
        let u = field(&s, |t| t[0].norm().ln().max(t[1].norm().ln()).max(0.0));
        let h = s.steps()[0];
        let mg = monge_ampere_2d(&u, h).unwrap();
        let total = mg.total();
        assert!((total - 1.0).abs() < 0.1, "total {total}");
        let near = mass(&mg, |_, t| (t[0].norm() - 1.0).abs() < 3.0 * h && (t[1].norm() - 1.0).abs() < 3.0 * h);
        assert!(near >= 0.9 * total, "near {near} of {total}");
    }

    #[test]
    fn mixed_wedge_polarizes() {
        let s = space(-1.0, 1.0, 10);
        let u = field(&s, |t| (t[0].norm_sqr() + 1.0).ln() + t[1].norm_sqr() * t[0].re.cos());
        let h = s.steps()[0];
        let a = mixed_wedge(&u, &u, h).unwrap();
        let b = monge_ampere_2d(&u, h).unwrap();
        for (x, y) in a.raw().iter().zip(b.raw()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn component_examples() {
        let s = plane(-1.0, 1.0, 64);
        let all = components(&field(&s, |_| 1.0), |v| v > 0.0).unwrap();
        assert_eq!(all.count, 1);
        let disks = field(&s, |t| {
            let d1 = (t[0] - Complex64::new(-0.5, 0.0)).norm();
            let d2 = (t[0] - Complex64::new(0.5, 0.0)).norm();
            if d1 < 0.3 || d2 < 0.3 { 1.0 } else { 0.0 }
        });
        let lab = components(&disks, |v| v > 0.5).unwrap();
        assert_eq!(lab.count, 2);
        // The left disk is met first in raster order.
        let left = s.ravel(&[16, 32]);
        assert_eq!(lab.labels[left], Some(0));
    }

    #[test]
    fn mass_equality_examples() {
        let s = plane(-1.0, 1.0, 128);
        let r: f64 = 0.3;
        let v = field(&s, |t| t[0].norm().ln());
        let u = field(&s, |t| t[0].norm().ln().max(r.ln()));
        let inside = |idx: &[usize]| s.local_coords(idx)[0].norm() < r + 0.05;
        let (mu, mv) = mass_equality_check(&u, &v, inside).unwrap();
        assert!((mu - 1.0).abs() < 0.02 && (mv - 1.0).abs() < 0.02);
        assert!((mu - mv).abs() < 1e-10);
        let (a, b) = mass_equality_check(&v, &v, |_| false).unwrap();
        assert_eq!(a, b);
        assert!(mass_equality_check(&u, &v, |_| false).is_err());
    }

    #[test]
    fn mollifier_preserves_affine_fields() {
        let s = plane(-1.0, 1.0, 16);
        let u = field(&s, |t| 3.0 * t[0].re - 2.0 * t[0].im + 1.0);
        let m = mollify(&u, 2.0 * s.steps()[0]).unwrap();
        for (a, b) in u.values().iter().zip(m.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(mollify(&u, 0.5 * s.steps()[0]).is_err());
    }

    #[test]
    fn boundary_and_dilation_of_a_disk() {
        let sl = plane(-1.0, 1.0, 16);
        let inside: Vec<bool> = (0..sl.len()).map(|c| sl.local_coords(&sl.unravel(c))[0].norm() < 0.5).collect();
        let b = boundary_cells(&sl, &inside);
        // Every boundary cell is next to the circle of radius 1/2.
        for c in (0..sl.len()).filter(|&c| b[c]) {
            let r = sl.local_coords(&sl.unravel(c))[0].norm();
            assert!((r - 0.5).abs() < 0.2, "{r}");
        }
        let one = vec![false; 255].into_iter().chain([true]).collect::<Vec<_>>();
        assert_eq!(dilate(&sl, &one, 2).iter().filter(|&&x| x).count(), 9);
        let mut mid = vec![false; 256];
        mid[8 * 16 + 8] = true;
        assert_eq!(dilate(&sl, &mid, 1).iter().filter(|&&x| x).count(), 9);
    }
}
