//! Equidistribution of `d^{-n} [Per_n(w)]` towards the bifurcation current,
//! measured on slices at the level of potentials (`L^1` distance between
//! `d^{-n} l_{n,w}` and the Lyapunov exponent `L`) and of measures (pairings of
//! their discrete `dd^c` against smooth bumps).
//!
//! `l_{n,w}` and `log|p_n|` differ by a pluriharmonic term, which shows up as
//! a per-`n` offset of the normalized potential. It is removed by subtracting
//! the median of `d^{-n} l_{n,w} - L` over cells deep in the escape locus,
//! where the limit potential equals `L`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cycles::{checked_count, exact_cycles, multiplier_sweep, pern_field};
use crate::error::{Error, Result};
use crate::family::{Family, FamilySpec, Parameter};
use crate::grid::{ddc_1d, Field, SliceSpec};
use crate::potential::Potential;

/// Lower tail quantile at which `d^{-n} l - L` is winsorized.
pub const WINSOR_QUANTILE: f64 = 0.001;

/// Cells count as deep in the escape locus when the smallest critical Green
/// value reaches this fraction of its maximum over the slice.
pub const DEEP_ESCAPE_FRACTION: f64 = 0.5;

/// Smooth bump `exp(1 - 1/(1 - r^2/R^2))` supported in a disk of the slice
/// coordinate, with peak value 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: Complex64,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn eval(&self, t: Complex64) -> f64 {
        let s = (t - self.center).norm_sqr() / (self.radius * self.radius);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s)).exp()
        }
    }
}

/// Three bumps at fixed positions relative to the box of a one-dimensional
/// slice: a wide one at the center and two narrower ones on the real
/// midline, a quarter of the width to each side.
pub fn default_bumps(slice: &SliceSpec) -> Vec<Bump> {
    let ax = &slice.axes()[0];
    let center = Complex64::new(0.5 * (ax.re.0 + ax.re.1), 0.5 * (ax.im.0 + ax.im.1));
    let width = (ax.re.1 - ax.re.0).min(ax.im.1 - ax.im.0);
    let shift = Complex64::new(0.25 * (ax.re.1 - ax.re.0), 0.0);
    vec![
        Bump::new(center, 0.35 * width),
        Bump::new(center - shift, 0.2 * width),
        Bump::new(center + shift, 0.2 * width),
    ]
}

/// The Lyapunov exponent and the escape depth `min_i g(c_i)` on a slice.
#[derive(Clone, Debug)]
pub struct EscapeFields {
    pub lyapunov: Field,
    pub depth: Field,
}

pub fn escape_fields(spec: FamilySpec, slice: &SliceSpec, tol: f64) -> Result<EscapeFields> {
    let pairs: Vec<Result<(f64, f64)>> = (0..slice.len())
        .into_par_iter()
        .map(|i| {
            let fam = Family::new(spec, slice.parameter(&slice.unravel(i)))?;
            let pot = Potential::new(&fam);
            let greens = pot.critical_greens(tol / spec.parameter_dim() as f64);
            let depth = greens.iter().cloned().fold(f64::INFINITY, f64::min);
            let l = (spec.d() as f64).ln() + greens.iter().sum::<f64>();
            Ok((l, depth))
        })
        .collect();
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EscapeFields {
        lyapunov: Field::new(slice.clone(), pairs.iter().map(|p| p.0).collect(), "lyapunov")?,
        depth: Field::new(slice.clone(), pairs.iter().map(|p| p.1).collect(), "escape depth")?,
    })
}

/// Outcome of one `L^1` comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Error {
    pub error: f64,
    /// Flagged plus winsorized cells over all cells.
    pub clipped_fraction: f64,
    /// Median offset subtracted before measuring.
    pub calibration: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// `d^{-n} l` as a field.
fn normalized(pern: &Field, spec: FamilySpec, n: usize) -> Result<Field> {
    let scale = (spec.d() as f64).powi(-(n as i32));
    pern.map("normalized pern potential", |v| v * scale)
}

/// Calibrated, winsorized mean of `|phi - L|` over unflagged cells.
pub fn l1_from_fields(phi: &Field, fields: &EscapeFields) -> Result<L1Error> {
    let l = &fields.lyapunov;
    let total = phi.values().len();
    let depth = fields.depth.values();
    let max_depth = depth.iter().cloned().fold(0.0, f64::max);
    let diffs: Vec<Option<f64>> = phi
        .values()
        .iter()
        .zip(l.values())
        .map(|(&p, &q)| p.is_finite().then_some(p - q))
        .collect();
    let calibration = if max_depth > 0.0 {
        median(
            diffs
                .iter()
                .zip(depth)
                .filter(|(_, &g)| g >= DEEP_ESCAPE_FRACTION * max_depth)
                .filter_map(|(d, _)| *d)
                .collect(),
        )
    } else {
        0.0
    };
    let mut kept: Vec<f64> = diffs.iter().filter_map(|d| d.map(|x| x - calibration)).collect();
    let flagged = total - kept.len();
    if kept.is_empty() {
        return Err(Error::Domain("every cell of the potential field is flagged".into()));
    }
    let mut sorted = kept.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[((WINSOR_QUANTILE * sorted.len() as f64).floor() as usize).min(sorted.len() - 1)];
    let mut winsorized = 0;
    for x in kept.iter_mut() {
        if *x < floor {
            *x = floor;
            winsorized += 1;
        }
    }
    let error = kept.iter().map(|x| x.abs()).sum::<f64>() / kept.len() as f64;
    Ok(L1Error {
        error,
        clipped_fraction: (flagged + winsorized) as f64 / total as f64,
        calibration,
    })
}

/// `max_chi |<dd^c phi - dd^c L, chi>|` on a one-dimensional slice.
pub fn weak_error_from_fields(phi: &Field, lyapunov: &Field, testfns: &[Bump]) -> Result<f64> {
    let a = ddc_1d(phi)?;
    let b = ddc_1d(lyapunov)?;
    Ok(testfns
        .iter()
        .map(|chi| {
            let f = |t: &[Complex64]| chi.eval(t[0]);
            (a.pair(f) - b.pair(f)).abs()
        })
        .fold(0.0, f64::max))
}

/// `L^1` distance between `d^{-n} l_{n,w}` and `L` on the slice.
pub fn potential_l1(spec: FamilySpec, slice: &SliceSpec, n: usize, w: Complex64, tol: f64) -> Result<L1Error> {
    checked_count(spec, n)?;
    let fields = escape_fields(spec, slice, tol)?;
    let mults = multiplier_sweep(spec, slice, n)?;
    let phi = normalized(&pern_field(slice, &mults, w, "pern")?, spec, n)?;
    l1_from_fields(&phi, &fields)
}

/// Largest pairing error of `dd^c d^{-n} l_{n,w}` against `dd^c L` over the
/// test functions.
pub fn measure_weak_error(spec: FamilySpec, slice: &SliceSpec, n: usize, w: Complex64, testfns: &[Bump], tol: f64) -> Result<f64> {
    if slice.m() != 1 {
        return Err(Error::invalid("slice", "measure_weak_error needs a slice of complex dimension 1"));
    }
    checked_count(spec, n)?;
    if testfns.is_empty() {
        return Ok(0.0);
    }
    let fields = escape_fields(spec, slice, tol)?;
    let mults = multiplier_sweep(spec, slice, n)?;
    let phi = normalized(&pern_field(slice, &mults, w, "pern")?, spec, n)?;
    weak_error_from_fields(&phi, &fields.lyapunov, testfns)
}

/// Fraction of parameters where `d^{-n} l_{n,w} <= L + 0.2 log d d^{-n/2}`.
/// Parameters whose cycle solve leaves a defect count as not dominated.
pub fn pointwise_dominance(spec: FamilySpec, params: &[Parameter<f64>], n: usize, w: Complex64, tol: f64) -> Result<f64> {
    checked_count(spec, n)?;
    if params.is_empty() {
        return Err(Error::invalid("params", "need at least one sample point"));
    }
    let d = spec.d() as f64;
    let slack = 0.2 * d.ln() * d.powf(-(n as f64) / 2.0);
    let flags: Vec<Result<bool>> = params
        .par_iter()
        .map(|p| {
            let fam = Family::new(spec, p.clone())?;
            let set = exact_cycles(&fam, n)?;
            if set.defect > 0 {
                return Ok(false);
            }
            let phi = set.pern_potential(w) * d.powi(-(n as i32));
            Ok(phi <= Potential::new(&fam).lyapunov(tol) + slack)
        })
        .collect();
    let flags = flags.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

/// Header of [`ConvergenceReport::csv_rows`].
pub const REPORT_CSV_HEADER: &str = "w_re,w_im,n,l1_error,measure_error,clipped_fraction";

/// Convergence of the normalized `Per_n(w)` potentials over a range of periods.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub w: Complex64,
    pub periods: Vec<usize>,
    pub l1_errors: Vec<f64>,
    /// `NaN` on two-dimensional slices, where no weak error is computed.
    pub measure_errors: Vec<f64>,
    pub clipped_fractions: Vec<f64>,
    /// Largest clipped fraction over the periods.
    pub clipped_fraction: f64,
}

impl ConvergenceReport {
    /// Whether `e_{n+2} < e_n` for every `n >= 4` with both periods present.
    pub fn step_two_decreasing(&self) -> bool {
        self.pairs_two_apart().all(|(a, b)| b < a)
    }

    fn pairs_two_apart(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.periods.iter().enumerate().filter(|(_, &n)| n >= 4).filter_map(move |(i, &n)| {
            let j = self.periods.iter().position(|&m| m == n + 2)?;
            Some((self.l1_errors[i], self.l1_errors[j]))
        })
    }

    /// Data rows, one per period, in the layout of [`REPORT_CSV_HEADER`].
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for i in 0..self.periods.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.w.re, self.w.im, self.periods[i], self.l1_errors[i], self.measure_errors[i], self.clipped_fractions[i]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let out = format!("{REPORT_CSV_HEADER}\n{}", self.csv_rows());
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("w = {}{:+}i\n", self.w.re, self.w.im);
        for i in 0..self.periods.len() {
            let _ = writeln!(
                s,
                "  n = {:2}  e_n = {:.6e}  weak = {:.6e}  clipped = {:.4}",
                self.periods[i], self.l1_errors[i], self.measure_errors[i], self.clipped_fractions[i]
            );
        }
        let verdict = if self.step_two_decreasing() { "decreasing" } else { "not decreasing" };
        let _ = writeln!(s, "  e_(n+2) < e_n for n >= 4: {verdict}; max clipped fraction {:.4}", self.clipped_fraction);
        s
    }
}

/// Convergence reports for several `w` sharing one cycle solve per period.
pub fn convergence_reports(
    spec: FamilySpec,
    slice: &SliceSpec,
    periods: &[usize],
    ws: &[Complex64],
    testfns: &[Bump],
    tol: f64,
) -> Result<Vec<ConvergenceReport>> {
    for &n in periods {
        checked_count(spec, n)?;
    }
    let fields = escape_fields(spec, slice, tol)?;
    let mut reports: Vec<ConvergenceReport> = ws
        .iter()
        .map(|&w| ConvergenceReport {
            w,
            periods: periods.to_vec(),
            l1_errors: Vec::new(),
            measure_errors: Vec::new(),
            clipped_fractions: Vec::new(),
            clipped_fraction: 0.0,
        })
        .collect();
    for &n in periods {
        let mults = multiplier_sweep(spec, slice, n)?;
        for report in reports.iter_mut() {
            let phi = normalized(&pern_field(slice, &mults, report.w, "pern")?, spec, n)?;
            let l1 = l1_from_fields(&phi, &fields)?;
            let weak = if slice.m() == 1 && !testfns.is_empty() {
                weak_error_from_fields(&phi, &fields.lyapunov, testfns)?
            } else {
                f64::NAN
            };
            report.l1_errors.push(l1.error);
            report.measure_errors.push(weak);
            report.clipped_fractions.push(l1.clipped_fraction);
            report.clipped_fraction = report.clipped_fraction.max(l1.clipped_fraction);
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn a_slice(re: (f64, f64), im: (f64, f64), res: usize) -> SliceSpec {
        SliceSpec::coordinate(1, &[0], vec![Axis::new(re, im, res, res)]).unwrap()
    }

    #[test]
    fn bump_is_smooth_and_supported() {
        let b = Bump::new(c(1.0, 0.0), 0.5);
        assert_eq!(b.eval(c(1.0, 0.0)), 1.0);
        assert_eq!(b.eval(c(1.6, 0.0)), 0.0);
        assert!(b.eval(c(1.4999, 0.0)) < 1e-100);
    }

    #[test]
    fn escape_slice_matches_lyapunov() {
        let spec = FamilySpec::new(2).unwrap();
        let s = a_slice((3.0, 4.0), (0.0, 1.0), 12);
        let e = potential_l1(spec, &s, 6, c(0.0, 0.0), 1e-10).unwrap();
        assert!(e.error < 0.05 * 2f64.ln(), "{e:?}");
    }

    #[test]
    fn refuses_beyond_cap() {
        let spec = FamilySpec::new(2).unwrap();
        let s = a_slice((3.0, 4.0), (0.0, 1.0), 8);
        assert!(matches!(potential_l1(spec, &s, 15, c(0.0, 0.0), 1e-10), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn zero_test_function_pairs_to_zero() {
        let spec = FamilySpec::new(2).unwrap();
        let s = a_slice((-3.0, 3.0), (-3.0, 3.0), 8);
        assert_eq!(measure_weak_error(spec, &s, 3, c(0.0, 0.0), &[], 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn weak_error_vanishes_far_in_the_escape_locus() {
        let spec = FamilySpec::new(2).unwrap();
        let s = a_slice((2.5, 4.5), (-1.0, 1.0), 24);
        let chi = [Bump::new(c(3.5, 0.0), 0.5)];
        let e = measure_weak_error(spec, &s, 6, c(0.0, 0.0), &chi, 1e-10).unwrap();
        assert!(e < 1e-3, "{e}");
    }

    #[test]
    fn dominance_examples() {
        let spec = FamilySpec::new(2).unwrap();
        let escaping: Vec<_> = [c(3.0, 0.5), c(-3.2, 1.0), c(0.0, 3.5)].into_iter().map(Parameter::quadratic).collect();
        assert_eq!(pointwise_dominance(spec, &escaping, 8, c(0.0, 0.0), 1e-10).unwrap(), 1.0);
        let flagged = [Parameter::quadratic(c(0.0, 0.0))];
        assert_eq!(pointwise_dominance(spec, &flagged, 1, c(0.0, 0.0), 1e-10).unwrap(), 1.0);
    }

    #[test]
    fn median_and_winsorizing() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
