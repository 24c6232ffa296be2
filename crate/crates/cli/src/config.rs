//! Experiment configuration: a TOML file with one section per concern.
//!
//! Complex numbers are written as `[re, im]`. A manifest written by a run is
//! itself a configuration; its `[manifest]` table is informational and
//! ignored on input.

use std::fmt;
use std::path::{Path, PathBuf};

use bifcurrents::grid::{Axis, SliceSpec, MIN_RESOLUTION};
use bifcurrents::{Complex64, FamilySpec, Parameter};
use serde::{Deserialize, Serialize};

pub type Cplx = [f64; 2];

pub fn cplx(z: Cplx) -> Complex64 {
    Complex64::new(z[0], z[1])
}

/// Validation failure that names the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub family: FamilySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<MassSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pern: Option<PernSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equidist: Option<EquidistSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ma: Option<MaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<ConnectivitySection>,
    #[serde(default, skip_serializing)]
    pub manifest: Option<toml::Table>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub degree: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Subcommand this config was written for; checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            operation: None,
            seed: 0,
            tolerance: default_tolerance(),
            out: None,
        }
    }
}

fn default_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SliceSection {
    /// Parameter coordinates `(c_1, .., c_{d-2}, a)` spanned by the axes;
    /// shorthand for unit basis vectors through the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<Cplx>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<Cplx>>>,
    pub axes: Vec<AxisSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub re: [f64; 2],
    pub im: [f64; 2],
    /// Samples per real axis; `res_re` and `res_im` override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res_re: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res_im: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// `g(c_i)` for one marked critical point.
    G,
    /// `G = max_i g(c_i)`.
    Max,
    /// Lyapunov exponent.
    Lyapunov,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    #[serde(default = "default_quantity")]
    pub quantity: Quantity,
    #[serde(default)]
    pub critical: usize,
    #[serde(default)]
    pub log_scale: bool,
}

fn default_quantity() -> Quantity {
    Quantity::G
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MassSection {
    /// Marked critical points to report; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PernSection {
    pub n: usize,
    #[serde(default)]
    pub w: Cplx,
    #[serde(default = "yes")]
    pub locus: bool,
    #[serde(default = "default_seeds")]
    pub seeds_per_cell: usize,
}

fn yes() -> bool {
    true
}

fn default_seeds() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EquidistSection {
    pub periods: Vec<usize>,
    #[serde(default = "default_ws")]
    pub ws: Vec<Cplx>,
}

fn default_ws() -> Vec<Cplx> {
    vec![[0.0, 0.0]]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaSection {
    /// Mollifier width in cells of the coarsest axis.
    #[serde(default = "default_mollify_cells")]
    pub mollify_cells: f64,
    /// Marked critical points whose currents are wedged.
    #[serde(default = "default_pair")]
    pub pair: [usize; 2],
    /// Threshold defining the set `{G < tol_g}` for the support check.
    #[serde(default = "default_tol_g")]
    pub tol_g: f64,
    #[serde(default = "default_support_cells")]
    pub support_cells: usize,
}

fn default_mollify_cells() -> f64 {
    2.0
}

fn default_pair() -> [usize; 2] {
    [0, 1]
}

fn default_tol_g() -> f64 {
    1e-3
}

fn default_support_cells() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    /// Parameter coordinates `(c_1, .., c_{d-2}, a)`.
    pub parameter: Vec<Cplx>,
    #[serde(default = "default_dyn_resolution")]
    pub dyn_resolution: usize,
    #[serde(default = "default_word_length")]
    pub word_length: usize,
    #[serde(default = "default_num_words")]
    pub num_words: usize,
}

fn default_dyn_resolution() -> usize {
    bifcurrents::shift::DEFAULT_DYN_RESOLUTION
}

fn default_word_length() -> usize {
    8
}

fn default_num_words() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConnectivitySection {
    #[serde(default)]
    pub critical: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    1e-6
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| locate(text, s.start)).unwrap_or_else(|| "<file>".into());
            ConfigError::new(field, e.message().trim())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn family_spec(&self) -> Result<FamilySpec, ConfigError> {
        FamilySpec::new(self.family.degree).map_err(|e| ConfigError::new("family.degree", e.to_string()))
    }

    /// Builds and validates the slice.
    pub fn slice_spec(&self) -> Result<SliceSpec, ConfigError> {
        let spec = self.family_spec()?;
        let dim = spec.parameter_dim();
        let s = self.slice.as_ref().ok_or_else(|| ConfigError::new("slice", "this subcommand needs a [slice] section"))?;
        let mut axes = Vec::with_capacity(s.axes.len());
        for (k, a) in s.axes.iter().enumerate() {
            let res_re = a.res_re.or(a.resolution);
            let res_im = a.res_im.or(a.resolution);
            let (Some(rr), Some(ri)) = (res_re, res_im) else {
                return Err(ConfigError::new(format!("slice.axes[{k}].resolution"), "missing sample count"));
            };
            for (name, r) in [("res_re", rr), ("res_im", ri)] {
                if r < MIN_RESOLUTION {
                    let field = if a.resolution.is_some() && a.res_re.is_none() && a.res_im.is_none() { "resolution" } else { name };
                    return Err(ConfigError::new(
                        format!("slice.axes[{k}].{field}"),
                        format!("got {r}, every real axis needs resolution >= {MIN_RESOLUTION}"),
                    ));
                }
            }
            for (name, (lo, hi)) in [("re", (a.re[0], a.re[1])), ("im", (a.im[0], a.im[1]))] {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(ConfigError::new(format!("slice.axes[{k}].{name}"), "bounds must be finite with min < max"));
                }
            }
            axes.push(Axis::new((a.re[0], a.re[1]), (a.im[0], a.im[1]), rr, ri));
        }
        let result = match (&s.coordinates, &s.basis) {
            (Some(_), Some(_)) => return Err(ConfigError::new("slice.basis", "give either `coordinates` or `basis`, not both")),
            (Some(coords), None) => {
                if let Some(&bad) = coords.iter().find(|&&c| c >= dim) {
                    return Err(ConfigError::new("slice.coordinates", format!("index {bad} out of range, parameter space has dimension {dim}")));
                }
                let base = SliceSpec::coordinate(dim, coords, axes)?;
                let origin = match &s.origin {
                    Some(o) => origin_vec(o, dim)?,
                    None => base.origin().to_vec(),
                };
                SliceSpec::new(origin, base.basis().to_vec(), base.axes().to_vec())
            }
            (None, Some(basis)) => {
                let origin = match &s.origin {
                    Some(o) => origin_vec(o, dim)?,
                    None => vec![Complex64::new(0.0, 0.0); dim],
                };
                let basis = basis.iter().map(|b| b.iter().copied().map(cplx).collect()).collect();
                SliceSpec::new(origin, basis, axes)
            }
            (None, None) => return Err(ConfigError::new("slice.coordinates", "give `coordinates` or `basis`")),
        };
        result.map_err(|e| map_core(e, "slice"))
    }

    pub fn decompose_parameter(&self) -> Result<Parameter<f64>, ConfigError> {
        let spec = self.family_spec()?;
        let sec = self.decompose.as_ref().ok_or_else(|| ConfigError::new("decompose", "missing [decompose] section"))?;
        if sec.parameter.len() != spec.parameter_dim() {
            return Err(ConfigError::new(
                "decompose.parameter",
                format!("expected {} coordinates (c_1..c_{{d-2}}, a), got {}", spec.parameter_dim(), sec.parameter.len()),
            ));
        }
        let coords: Vec<Complex64> = sec.parameter.iter().copied().map(cplx).collect();
        Ok(Parameter::from_coords(&coords))
    }
}

fn origin_vec(o: &[Cplx], dim: usize) -> Result<Vec<Complex64>, ConfigError> {
    if o.len() != dim {
        return Err(ConfigError::new("slice.origin", format!("expected {dim} coordinates, got {}", o.len())));
    }
    Ok(o.iter().copied().map(cplx).collect())
}

impl From<bifcurrents::Error> for ConfigError {
    fn from(e: bifcurrents::Error) -> Self {
        map_core(e, "config")
    }
}

/// Maps a core validation error onto a config field under `section`.
pub fn map_core(e: bifcurrents::Error, section: &str) -> ConfigError {
    match e {
        bifcurrents::Error::InvalidArgument { name, reason } => ConfigError::new(format!("{section}.{name}"), reason),
        other => ConfigError::new(section, other.to_string()),
    }
}

/// Dotted path of the innermost table or key at byte `offset`.
fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let table = before
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            (l.starts_with('[') && l.ends_with(']')).then(|| l.trim_matches(|c| c == '[' || c == ']').to_string())
        })
        .last();
    let line = text[offset.min(text.len())..].lines().next().unwrap_or("");
    let key = before.lines().last().unwrap_or("").to_string() + line;
    let key = key.split('=').next().map(str::trim).filter(|k| !k.is_empty() && !k.starts_with('['));
    match (table, key) {
        (Some(t), Some(k)) => format!("{t}.{k}"),
        (Some(t), None) => t,
        (None, Some(k)) => k.to_string(),
        (None, None) => "<file>".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[family]
degree = 2

[slice]
coordinates = [0]
axes = [{ re = [-3.0, 3.0], im = [-3.0, 3.0], resolution = 16 }]
"#;

    #[test]
    fn parses_and_builds_slice() {
        let c = Config::parse(BASE).unwrap();
        let s = c.slice_spec().unwrap();
        assert_eq!(s.shape(), vec![16, 16]);
        assert_eq!(c.run.tolerance, 1e-10);
    }

    #[test]
    fn low_resolution_names_the_field() {
        let c = Config::parse(&BASE.replace("resolution = 16", "resolution = 4")).unwrap();
        let e = c.slice_spec().unwrap_err();
        assert_eq!(e.field, "slice.axes[0].resolution");
        assert!(e.reason.contains(">= 8"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let e = Config::parse(&format!("{BASE}\n[pern]\nn = 2\nbogus = 1\n")).unwrap_err();
        assert!(e.field.starts_with("pern"), "{e}");
    }

    #[test]
    fn serialization_round_trips() {
        let mut c = Config::parse(BASE).unwrap();
        c.pern = Some(PernSection {
            n: 3,
            w: [0.5, -0.25],
            locus: false,
            seeds_per_cell: 2,
        });
        let back = Config::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
