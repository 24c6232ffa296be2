//! Branched-cover decomposition of the dynamical plane at escaping
//! parameters, the `d`-measure on symbol space, and pullback clouds of the
//! maximal entropy measure.
//!
//! For `G = max_i g(c_i) > 0`, set `U_0 = {g < dG}` and `U_1 = P^{-1}(U_0) =
//! {g < G}`. The components `V_1..V_ell` of `U_1` are topological disks mapped
//! onto `U_0` with degrees `d_i`, `sum d_i = d`. The measure
//! `d^{-n} (P^n)^* delta_z` splits over words `eps` of length `n` as
//! `sum_eps nu(eps) mu_eps`, where `mu_eps` is the normalized pullback along
//! the branches `V_{eps_0}, .., V_{eps_{n-1}}` and `nu(eps) = prod d_{eps_i} / d^n`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{Family, FamilySpec, Parameter};
use crate::grid::ops::label_mask;
use crate::potential::Potential;
use crate::roots::{newton, poly_roots};

/// Default raster size of the dynamical plane.
pub const DEFAULT_DYN_RESOLUTION: usize = 1024;

/// Largest cloud the pullback routines build.
pub const CLOUD_CAP: u128 = 100_000;

const GREEN_TOL: f64 = 1e-12;
const TEST_POINT_ATTEMPTS: usize = 10;
/// Radius, in pixels, of the disk cut out of `U_1` around the critical points
/// lying on `{g = G}`, where the components of `U_1` touch.
const PINCH_CUT: f64 = 2.0;
/// Search radius, in pixels, when a point falls on an unlabeled pixel.
const LOOKUP_RADIUS: i64 = 3;

/// Square raster of the dynamical plane centred at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub half_width: f64,
    pub resolution: usize,
}

impl Raster {
    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    /// Center of pixel `(i, j)`, `i` along the real axis.
    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        let px = self.pixel_size();
        Complex64::new(-self.half_width + (i as f64 + 0.5) * px, -self.half_width + (j as f64 + 0.5) * px)
    }

    /// Pixel containing `z`, if inside the raster.
    pub fn pixel(&self, z: Complex64) -> Option<(usize, usize)> {
        let px = self.pixel_size();
        let i = ((z.re + self.half_width) / px).floor();
        let j = ((z.im + self.half_width) / px).floor();
        let n = self.resolution as f64;
        (i >= 0.0 && j >= 0.0 && i < n && j < n).then_some((i as usize, j as usize))
    }
}

/// One component `V_i` of `U_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Inclusive pixel bounds `(i_min, i_max, j_min, j_max)`.
    pub bbox: (usize, usize, usize, usize),
    /// Row-major mask over the bounding box, `i` outer.
    pub mask: Vec<bool>,
    pub degree: usize,
}

impl Component {
    pub fn width(&self) -> usize {
        self.bbox.1 - self.bbox.0 + 1
    }

    pub fn height(&self) -> usize {
        self.bbox.3 - self.bbox.2 + 1
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (i0, i1, j0, j1) = self.bbox;
        (i0..=i1).contains(&i) && (j0..=j1).contains(&j) && self.mask[(i - i0) * self.height() + (j - j0)]
    }

    pub fn pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// `U_1 = V_1 u .. u V_ell` with branch degrees, at one escaping parameter.
#[derive(Clone, Debug)]
pub struct BranchDecomposition {
    pub parameter: Parameter<f64>,
    pub degree: usize,
    pub g_value: f64,
    pub ell: usize,
    pub components: Vec<Component>,
    /// Critical points in `U_1`, with multiplicity.
    pub q: usize,
    pub raster: Raster,
    /// Component index per pixel, `i` outer.
    labels: Vec<Option<u32>>,
    u0: Vec<bool>,
}

impl BranchDecomposition {
    pub fn degrees(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.degree).collect()
    }

    /// Pixel mask of `U_0`, `i` outer.
    pub fn u0_mask(&self) -> &[bool] {
        &self.u0
    }

    /// Component label per pixel, `i` outer.
    pub fn labels(&self) -> &[Option<u32>] {
        &self.labels
    }

    /// Component containing `z`: its own pixel label, or else the unique label
    /// nearest to it within a few pixels.
    pub fn component_of(&self, z: Complex64) -> Option<usize> {
        let n = self.raster.resolution as i64;
        let px = self.raster.pixel_size();
        let fi = (z.re + self.raster.half_width) / px - 0.5;
        let fj = (z.im + self.raster.half_width) / px - 0.5;
        let (ci, cj) = (fi.round() as i64, fj.round() as i64);
        let mut best: Option<(f64, u32)> = None;
        let mut tie = false;
        if let Some((i, j)) = self.raster.pixel(z) {
            if let Some(l) = self.labels[i * self.raster.resolution + j] {
                return Some(l as usize);
            }
        }
        for di in -LOOKUP_RADIUS..=LOOKUP_RADIUS {
            for dj in -LOOKUP_RADIUS..=LOOKUP_RADIUS {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= n || j >= n {
                    continue;
                }
                let Some(l) = self.labels[(i * n + j) as usize] else { continue };
                let dist = ((i as f64 - fi).powi(2) + (j as f64 - fj).powi(2)).sqrt();
                if dist > LOOKUP_RADIUS as f64 {
                    continue;
                }
                match best {
                    Some((bd, bl)) if (dist - bd).abs() < 1e-9 && bl != l => tie = true,
                    Some((bd, _)) if dist < bd - 1e-9 => {
                        best = Some((dist, l));
                        tie = false;
                    }
                    None => best = Some((dist, l)),
                    _ => {}
                }
            }
        }
        if tie {
            return None;
        }
        best.map(|b| b.1 as usize)
    }

    /// Label image: 0 outside `U_0`, 1 in `U_0 \ U_1`, `2 + i` in `V_i`.
    pub fn label_image(&self) -> Vec<u8> {
        self.labels
            .iter()
            .zip(&self.u0)
            .map(|(l, &u)| match (l, u) {
                (Some(k), _) => (2 + *k).min(255) as u8,
                (None, true) => 1,
                (None, false) => 0,
            })
            .collect()
    }

    /// Writes the label image as an 8-bit grayscale PNG, imaginary axis up.
    pub fn export_png(&self, path: &Path) -> Result<()> {
        let n = self.raster.resolution;
        let img = self.label_image();
        let levels = (self.ell + 2) as f64;
        let mut pixels = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = img[i * n + j] as f64;
                pixels[(n - 1 - j) * n + i] = (255.0 * v / (levels - 1.0)).round() as u8;
            }
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), n as u32, n as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
        w.write_image_data(&pixels).map_err(|e| Error::Png(e.to_string()))?;
        w.finish().map_err(|e| Error::Png(e.to_string()))
    }

    /// Metadata table, one row per component.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("component,degree,pixels,i_min,i_max,j_min,j_max\n");
        for (k, c) in self.components.iter().enumerate() {
            let (a, b, e, f) = c.bbox;
            let _ = writeln!(s, "{},{},{},{a},{b},{e},{f}", k + 1, c.degree, c.pixel_count());
        }
        s
    }
}

/// Roots of `P(z) = y`, Newton-polished on `P`.
pub fn preimages(fam: &Family<f64>, y: Complex64) -> Vec<Complex64> {
    let mut coeffs = fam.coefficients().to_vec();
    coeffs[0] -= y;
    poly_roots(&coeffs)
        .into_iter()
        .map(|z| {
            newton(
                |u| {
                    let r = (fam.eval(u) - y) / fam.derivative(u);
                    (r.re.is_finite() && r.im.is_finite()).then_some(r)
                },
                z,
                8,
                1.0,
            )
            .0
        })
        .collect()
}

/// Seed of the test-point draw used by [`decompose`].
pub const DEFAULT_DECOMPOSE_SEED: u64 = 0x5eed;

/// Decomposes `U_1` at an escaping parameter with the default test-point seed.
pub fn decompose(spec: FamilySpec, p: &Parameter<f64>, dyn_resolution: usize) -> Result<BranchDecomposition> {
    decompose_seeded(spec, p, dyn_resolution, DEFAULT_DECOMPOSE_SEED)
}

/// Decomposes `U_1` at an escaping parameter. The seed drives the choice of
/// test points for the degree count.
pub fn decompose_seeded(spec: FamilySpec, p: &Parameter<f64>, dyn_resolution: usize, seed: u64) -> Result<BranchDecomposition> {
    if dyn_resolution < 16 {
        return Err(Error::invalid("dyn_resolution", "needs at least 16 pixels per side"));
    }
    let fam = Family::new(spec, p.clone())?;
    let pot = Potential::new(&fam);
    let d = spec.d();
    let crit = fam.critical_points();
    let greens = pot.critical_greens(GREEN_TOL);
    let big_g = greens.iter().cloned().fold(0.0, f64::max);
    if big_g <= 1e-9 {
        return Err(Error::Decomposition(format!("G = {big_g:e}: the parameter is in the connectedness locus")));
    }
    for (k, &g) in greens.iter().enumerate() {
        if g < big_g && big_g - g < 1e-6 * big_g {
            return Err(Error::Decomposition(format!(
                "critical point {k} lies on the level g = G to within 1e-6; classification unstable"
            )));
        }
    }

    let raster = Raster {
        half_width: 1.2 * fam.escape_radius(),
        resolution: dyn_resolution,
    };
    let n = dyn_resolution;
    let g: Vec<f64> = (0..n * n).into_par_iter().map(|k| pot.green(raster.center(k / n, k % n), GREEN_TOL).value).collect();
    let u0: Vec<bool> = g.iter().map(|&v| v < d as f64 * big_g).collect();
    let mut u1: Vec<bool> = g.iter().map(|&v| v < big_g).collect();

    // Cut the pinch points, where the closures of the components meet.
    let px = raster.pixel_size();
    for (k, &c) in crit.iter().enumerate() {
        if greens[k] < big_g {
            continue;
        }
        let r = (PINCH_CUT * px).max(0.0);
        let reach = PINCH_CUT.ceil() as i64 + 1;
        if let Some((ci, cj)) = raster.pixel(c) {
            for di in -reach..=reach {
                for dj in -reach..=reach {
                    let (i, j) = (ci as i64 + di, cj as i64 + dj);
                    if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
                        continue;
                    }
                    if (raster.center(i as usize, j as usize) - c).norm() <= r {
                        u1[i as usize * n + j as usize] = false;
                    }
                }
            }
        }
    }

    let lab = label_mask(&u1, n, n);
    let mut components: Vec<Component> = (0..lab.count)
        .map(|_| Component {
            bbox: (usize::MAX, 0, usize::MAX, 0),
            mask: Vec::new(),
            degree: 0,
        })
        .collect();
    for (k, l) in lab.labels.iter().enumerate() {
        if let Some(l) = l {
            let c = &mut components[*l as usize];
            let (i, j) = (k / n, k % n);
            c.bbox = (c.bbox.0.min(i), c.bbox.1.max(i), c.bbox.2.min(j), c.bbox.3.max(j));
        }
    }
    for (idx, c) in components.iter_mut().enumerate() {
        let (i0, i1, j0, j1) = c.bbox;
        let h = j1 - j0 + 1;
        c.mask = vec![false; (i1 - i0 + 1) * h];
        for i in i0..=i1 {
            for j in j0..=j1 {
                c.mask[(i - i0) * h + (j - j0)] = lab.labels[i * n + j] == Some(idx as u32);
            }
        }
    }

    // One count per marked critical point, so coincident entries carry their
    // multiplicity.
    let q = greens.iter().filter(|&&gc| gc < big_g).count();

    let mut decomp = BranchDecomposition {
        parameter: p.clone(),
        degree: d,
        g_value: big_g,
        ell: components.len(),
        components,
        q,
        raster,
        labels: lab.labels,
        u0,
    };

    // Degrees from the preimages of a generic test point of U_0 \ U_1.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<usize> = (0..n * n).filter(|&k| g[k] > 1.2 * big_g && g[k] < 0.8 * d as f64 * big_g).collect();
    if candidates.is_empty() {
        return Err(Error::Decomposition("no test point available in U_0 \\ U_1 at this resolution".into()));
    }
    let mut last_reason = String::new();
    for _ in 0..TEST_POINT_ATTEMPTS {
        let k = candidates[rng.gen_range(0..candidates.len())];
        let y = decomp.raster.center(k / n, k % n);
        let mut degrees = vec![0usize; decomp.ell];
        let mut ok = true;
        for z in preimages(&fam, y) {
            match decomp.component_of(z) {
                Some(l) => degrees[l] += 1,
                None => {
                    ok = false;
                    last_reason = format!("preimage {z} of test point {y} is not inside a single component");
                    break;
                }
            }
        }
        if ok && degrees.iter().all(|&k| k >= 1) {
            for (c, k) in decomp.components.iter_mut().zip(&degrees) {
                c.degree = *k;
            }
            return Ok(decomp);
        }
        if ok {
            last_reason = format!("component degrees {degrees:?} include an empty component");
        }
    }
    Err(Error::Decomposition(format!("no generic test point after {TEST_POINT_ATTEMPTS} attempts: {last_reason}")))
}

/// Finite word over `{1..ell}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolWord {
    pub symbols: Vec<usize>,
}

impl SymbolWord {
    pub fn new(symbols: Vec<usize>, ell: usize) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s == 0 || s > ell) {
            return Err(Error::invalid("word", format!("symbol {s} outside 1..={ell}")));
        }
        Ok(Self { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The shift: drops the first symbol.
    pub fn shifted(&self) -> Self {
        Self {
            symbols: self.symbols.iter().skip(1).copied().collect(),
        }
    }
}

/// `prod d_{eps_i} / d^n`.
pub fn nu_weight(decomp: &BranchDecomposition, word: &SymbolWord) -> Result<f64> {
    let d = decomp.degree as f64;
    word.symbols.iter().try_fold(1.0, |acc, &s| {
        let c = decomp
            .components
            .get(s.wrapping_sub(1))
            .ok_or_else(|| Error::invalid("word", format!("symbol {s} outside 1..={}", decomp.ell)))?;
        Ok(acc * c.degree as f64 / d)
    })
}

/// A word of i.i.d. symbols with `P(i) = d_i / d`.
pub fn sample_nu(decomp: &BranchDecomposition, length: usize, seed: u64) -> SymbolWord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_nu_with(decomp, length, &mut rng)
}

fn sample_nu_with(decomp: &BranchDecomposition, length: usize, rng: &mut impl Rng) -> SymbolWord {
    let dist = WeightedIndex::new(decomp.degrees()).expect("degrees are positive");
    SymbolWord {
        symbols: (0..length).map(|_| dist.sample(rng) + 1).collect(),
    }
}

/// Word whose cylinder contains `u in [0, 1)` when `[0, 1)` is split
/// recursively in proportions `d_i / d`.
fn decode_word(degrees: &[usize], d: usize, mut u: f64, length: usize) -> SymbolWord {
    let mut symbols = Vec::with_capacity(length);
    for _ in 0..length {
        let mut lo = 0.0;
        let mut chosen = degrees.len();
        for (k, &dk) in degrees.iter().enumerate() {
            let p = dk as f64 / d as f64;
            if u < lo + p || k + 1 == degrees.len() {
                u = ((u - lo) / p).clamp(0.0, 1.0 - f64::EPSILON);
                chosen = k + 1;
                break;
            }
            lo += p;
        }
        symbols.push(chosen);
    }
    SymbolWord { symbols }
}

/// Probability cloud: points with nonnegative weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedCloud {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl WeightedCloud {
    pub fn dirac(z: Complex64) -> Self {
        Self {
            points: vec![z],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,weight\n");
        for (z, w) in self.points.iter().zip(&self.weights) {
            let _ = writeln!(s, "{},{},{}", z.re, z.im, w);
        }
        s
    }
}

/// `(d_{eps_0} .. d_{eps_{n-1}})^{-1} P^*_{eps_0} .. P^*_{eps_{n-1}} delta_{z0}`:
/// the last symbol acts first. Each step replaces every point by its
/// preimages in the component of the current symbol.
pub fn mu_epsilon_cloud(spec: FamilySpec, p: &Parameter<f64>, decomp: &BranchDecomposition, word: &SymbolWord, z0: Complex64) -> Result<WeightedCloud> {
    let fam = Family::new(spec, p.clone())?;
    let size: u128 = word.symbols.iter().map(|&s| decomp.components.get(s.wrapping_sub(1)).map_or(0, |c| c.degree as u128)).product();
    if size > CLOUD_CAP {
        return Err(Error::TooLarge {
            what: "cloud size prod d_eps",
            size,
            cap: CLOUD_CAP,
        });
    }
    nu_weight(decomp, word)?;
    let g0 = Potential::new(&fam).green(z0, GREEN_TOL).value;
    if !(g0 > 0.0 && g0 < decomp.degree as f64 * decomp.g_value) {
        return Err(Error::invalid("z0", format!("needs 0 < g(z0) < dG, got g = {g0}")));
    }
    let mut points = vec![z0];
    for (step, &s) in word.symbols.iter().enumerate().rev() {
        let target = s - 1;
        let want = decomp.components[target].degree;
        let mut next = Vec::with_capacity(points.len() * want);
        for &y in &points {
            let mut found = 0;
            for z in preimages(&fam, y) {
                match decomp.component_of(z) {
                    Some(l) if l == target => {
                        next.push(z);
                        found += 1;
                    }
                    Some(_) => {}
                    None => {
                        return Err(Error::Pullback {
                            step,
                            reason: format!("preimage {z} of {y} lies outside every component mask"),
                        })
                    }
                }
            }
            if found != want {
                return Err(Error::Pullback {
                    step,
                    reason: format!("found {found} preimages of {y} in V_{s}, expected {want}"),
                });
            }
        }
        points = next;
    }
    let w = 1.0 / points.len() as f64;
    Ok(WeightedCloud {
        weights: vec![w; points.len()],
        points,
    })
}

/// All `d^n` preimages of `z0` under `P^n` with weights `d^{-n}`.
pub fn brolin_cloud(spec: FamilySpec, p: &Parameter<f64>, n: usize, z0: Complex64) -> Result<WeightedCloud> {
    let size = (spec.d() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > CLOUD_CAP {
        return Err(Error::TooLarge {
            what: "cloud size d^n",
            size,
            cap: CLOUD_CAP,
        });
    }
    let fam = Family::new(spec, p.clone())?;
    let g0 = Potential::new(&fam).green(z0, GREEN_TOL).value;
    if g0 <= 0.0 {
        return Err(Error::invalid("z0", "needs g(z0) > 0"));
    }
    let mut points = vec![z0];
    for _ in 0..n {
        points = points.iter().flat_map(|&y| preimages(&fam, y)).collect();
    }
    let w = 1.0 / points.len() as f64;
    Ok(WeightedCloud {
        weights: vec![w; points.len()],
        points,
    })
}

/// A base point with `g(z0) = 1.5 G`, found by bisection on the segment from a
/// fixed point (where `g = 0`) outwards along the positive real direction.
pub fn base_point(spec: FamilySpec, p: &Parameter<f64>) -> Result<Complex64> {
    let fam = Family::new(spec, p.clone())?;
    let pot = Potential::new(&fam);
    let target = 1.5 * pot.G(GREEN_TOL);
    if target <= 0.0 {
        return Err(Error::Decomposition("G = 0: no base point outside K".into()));
    }
    let mut coeffs = fam.coefficients().to_vec();
    coeffs[1] -= Complex64::new(1.0, 0.0);
    let fixed = poly_roots(&coeffs)
        .into_iter()
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("P(z) = z has roots");
    let g = |z: Complex64| pot.green(z, GREEN_TOL).value;
    let mut lo = fixed;
    let mut hi = fixed + Complex64::new(fam.escape_radius(), 0.0);
    while g(hi) < target {
        hi = fixed + (hi - fixed) * 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).norm() < 1e-13 * (1.0 + hi.norm()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Test function for cloud integrals.
pub type CloudTest<'a> = &'a (dyn Fn(Complex64) -> f64 + Sync);

/// `max_f |E_nu[int f d mu_eps] - int f d(d^{-n} (P^n)^* delta_{z0})|` at
/// matched depth `n = word_length`.
///
/// Words are drawn by stratified sampling of `nu`: word `k` is the cylinder
/// containing `(k + U_k) / num_words` for uniform `U_k`. Every word is still
/// distributed as `nu`, but the first symbols are balanced exactly, which
/// removes most of the sampling variance.
pub fn decomposition_check_with(
    spec: FamilySpec,
    decomp: &BranchDecomposition,
    testfns: &[CloudTest<'_>],
    word_length: usize,
    num_words: usize,
    seed: u64,
) -> Result<f64> {
    if num_words == 0 {
        return Err(Error::invalid("num_words", "must be positive"));
    }
    let p = &decomp.parameter;
    let z0 = base_point(spec, p)?;
    let brolin = brolin_cloud(spec, p, word_length, z0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degrees = decomp.degrees();
    let words: Vec<SymbolWord> = (0..num_words)
        .map(|k| decode_word(&degrees, decomp.degree, (k as f64 + rng.gen::<f64>()) / num_words as f64, word_length))
        .collect();
    let clouds: Vec<Result<WeightedCloud>> = words.par_iter().map(|w| mu_epsilon_cloud(spec, p, decomp, w, z0)).collect();
    let clouds = clouds.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(testfns
        .iter()
        .map(|f| {
            let mean = clouds.iter().map(|c| c.integrate(f)).sum::<f64>() / num_words as f64;
            (mean - brolin.integrate(f)).abs()
        })
        .fold(0.0, f64::max))
}

/// [`decomposition_check_with`] on a fresh decomposition at the default raster.
pub fn decomposition_check(
    spec: FamilySpec,
    p: &Parameter<f64>,
    testfns: &[CloudTest<'_>],
    word_length: usize,
    num_words: usize,
    seed: u64,
) -> Result<f64> {
    let decomp = decompose_seeded(spec, p, DEFAULT_DYN_RESOLUTION, seed)?;
    decomposition_check_with(spec, &decomp, testfns, word_length, num_words, seed)
}
