//! Subcommand implementations. Each returns the files it wrote, relative to
//! the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bifcurrents::cycles::{multiplier_sweep, pern_field, pern_locus_1d};
use bifcurrents::equidist::{convergence_reports, default_bumps, REPORT_CSV_HEADER};
use bifcurrents::grid::{
    boundary_mass_fraction, components, ddc_1d, export_bin, export_csv, export_png, mixed_wedge, monge_ampere_2d, sample,
    Field, MeasureGrid, PngOptions, PngPalette, PngScale, SliceSpec,
};
use bifcurrents::potential::Potential;
use bifcurrents::shift::{base_point, decompose_seeded, decomposition_check_with, mu_epsilon_cloud, sample_nu, CloudTest};
use bifcurrents::{Complex64, Family64, FamilySpec};

use crate::config::{cplx, Config, ConfigError, Quantity};

/// What went wrong while running a validated config.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Compute {
        context: &'static str,
        #[source]
        source: bifcurrents::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

trait Context<T> {
    fn ctx(self, context: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for bifcurrents::Result<T> {
    fn ctx(self, context: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Compute { context, source })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Green,
    Mass,
    Pern,
    Equidist,
    Ma,
    Decompose,
    Connectivity,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Green => "green",
            Self::Mass => "mass",
            Self::Pern => "pern",
            Self::Equidist => "equidist",
            Self::Ma => "ma",
            Self::Decompose => "decompose",
            Self::Connectivity => "connectivity",
        }
    }
}

/// Checks everything the subcommand needs before any compute.
pub fn validate(cmd: Subcommand, cfg: &Config) -> Result<(), ConfigError> {
    let spec = cfg.family_spec()?;
    if let Some(op) = &cfg.run.operation {
        if op != cmd.name() {
            return Err(ConfigError::new("run.operation", format!("config was written for `{op}`, not `{}`", cmd.name())));
        }
    }
    if !(cfg.run.tolerance > 0.0 && cfg.run.tolerance < 1.0) {
        return Err(ConfigError::new("run.tolerance", "must lie in (0, 1)"));
    }
    let marked = spec.d() - 1;
    let check_critical = |field: &str, i: usize| {
        if i >= marked {
            Err(ConfigError::new(field, format!("critical index {i} out of range, degree {} has {marked} critical points", spec.d())))
        } else {
            Ok(())
        }
    };
    match cmd {
        Subcommand::Green => {
            let sec = cfg.green.clone().unwrap_or(default_green());
            check_critical("green.critical", sec.critical)?;
            cfg.slice_spec()?;
        }
        Subcommand::Mass => {
            need_m(&cfg.slice_spec()?, 1, "mass")?;
            if let Some(list) = cfg.mass.as_ref().and_then(|m| m.critical.as_ref()) {
                for &i in list {
                    check_critical("mass.critical", i)?;
                }
            }
        }
        Subcommand::Pern => {
            let sec = cfg.pern.as_ref().ok_or_else(|| ConfigError::new("pern", "missing [pern] section"))?;
            if sec.n == 0 {
                return Err(ConfigError::new("pern.n", "period must be at least 1"));
            }
            bifcurrents::cycles::checked_count(spec, sec.n).map_err(|e| ConfigError::new("pern.n", e.to_string()))?;
            if sec.seeds_per_cell == 0 {
                return Err(ConfigError::new("pern.seeds_per_cell", "must be positive"));
            }
            cfg.slice_spec()?;
        }
        Subcommand::Equidist => {
            let sec = cfg.equidist.as_ref().ok_or_else(|| ConfigError::new("equidist", "missing [equidist] section"))?;
            if sec.periods.is_empty() || sec.ws.is_empty() {
                return Err(ConfigError::new("equidist.periods", "periods and ws must be nonempty"));
            }
            for &n in &sec.periods {
                if n == 0 {
                    return Err(ConfigError::new("equidist.periods", "periods must be at least 1"));
                }
                bifcurrents::cycles::checked_count(spec, n).map_err(|e| ConfigError::new("equidist.periods", e.to_string()))?;
            }
            cfg.slice_spec()?;
        }
        Subcommand::Ma => {
            let slice = cfg.slice_spec()?;
            need_m(&slice, 2, "ma")?;
            let sec = cfg.ma.clone().unwrap_or(default_ma());
            check_critical("ma.pair", sec.pair[0])?;
            check_critical("ma.pair", sec.pair[1])?;
            if !(sec.mollify_cells >= 1.0) {
                return Err(ConfigError::new("ma.mollify_cells", "must be at least 1 cell"));
            }
            if !(sec.tol_g > 0.0) {
                return Err(ConfigError::new("ma.tol_g", "must be positive"));
            }
        }
        Subcommand::Decompose => {
            let p = cfg.decompose_parameter()?;
            let sec = cfg.decompose.as_ref().expect("checked by decompose_parameter");
            if sec.dyn_resolution < 16 {
                return Err(ConfigError::new("decompose.dyn_resolution", "needs at least 16 pixels per side"));
            }
            if sec.num_words == 0 {
                return Err(ConfigError::new("decompose.num_words", "must be positive"));
            }
            let g = Family64::new(spec, p).map(|f| Potential::new(&f).G(cfg.run.tolerance))?;
            if g <= 0.0 {
                return Err(ConfigError::new("decompose.parameter", "G = 0: the parameter lies in the connectedness locus"));
            }
        }
        Subcommand::Connectivity => {
            let slice = cfg.slice_spec()?;
            need_m(&slice, 1, "connectivity")?;
            let sec = cfg.connectivity.clone().unwrap_or(default_connectivity());
            check_critical("connectivity.critical", sec.critical)?;
        }
    }
    Ok(())
}

fn need_m(slice: &SliceSpec, m: usize, op: &str) -> Result<(), ConfigError> {
    if slice.m() != m {
        return Err(ConfigError::new("slice.axes", format!("`{op}` needs a slice of complex dimension {m}, got {}", slice.m())));
    }
    Ok(())
}

fn default_green() -> crate::config::GreenSection {
    toml::from_str("").expect("defaults")
}

fn default_ma() -> crate::config::MaSection {
    toml::from_str("").expect("defaults")
}

fn default_connectivity() -> crate::config::ConnectivitySection {
    toml::from_str("").expect("defaults")
}

/// Writes into the output directory and remembers the file names.
pub struct Sink {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(|source| RunError::Io { path, source })
    }

    /// `<stem>.bifg`, `<stem>.csv` and `<stem>.png`.
    fn field(&mut self, stem: &str, field: &Field, scale: PngScale) -> Result<(), RunError> {
        export_bin(field, &self.path(&format!("{stem}.bifg"))).ctx("binary export")?;
        export_csv(field, &self.path(&format!("{stem}.csv"))).ctx("csv export")?;
        let opts = PngOptions {
            palette: PngPalette::Viridis,
            scale,
        };
        export_png(field, &self.path(&format!("{stem}.png")), opts).ctx("png export")
    }

    fn measure(&mut self, stem: &str, mg: &MeasureGrid) -> Result<(), RunError> {
        self.field(stem, &mg.to_field(stem), PngScale::Linear)
    }
}

fn critical_field(spec: FamilySpec, slice: &SliceSpec, q: Quantity, i: usize, tol: f64) -> Result<Field, RunError> {
    let label = match q {
        Quantity::G => format!("g(c_{i})"),
        Quantity::Max => "G".into(),
        Quantity::Lyapunov => "L".into(),
    };
    sample(
        slice,
        |p| {
            let fam = Family64::new(spec, p.clone())?;
            let pot = Potential::new(&fam);
            Ok(match q {
                Quantity::G => pot.green(fam.critical_points()[i], tol).value,
                Quantity::Max => pot.G(tol),
                Quantity::Lyapunov => pot.lyapunov(tol),
            })
        },
        true,
        &label,
    )
    .ctx("sampling the slice")
}

/// Runs a validated config; returns a one-paragraph summary for stdout.
pub fn execute(cmd: Subcommand, cfg: &Config, sink: &mut Sink) -> Result<String, RunError> {
    let spec = cfg.family_spec()?;
    let tol = cfg.run.tolerance;
    let mut summary = String::new();
    match cmd {
        Subcommand::Green => {
            let sec = cfg.green.clone().unwrap_or(default_green());
            let slice = cfg.slice_spec()?;
            let field = critical_field(spec, &slice, sec.quantity, sec.critical, tol)?;
            let scale = if sec.log_scale { PngScale::Log } else { PngScale::Linear };
            sink.field("green", &field, scale)?;
            let max = field.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(summary, "{}: {} cells, max {max:.6}", field.label(), field.values().len());
        }
        Subcommand::Mass => {
            let slice = cfg.slice_spec()?;
            let list = cfg.mass.as_ref().and_then(|m| m.critical.clone()).unwrap_or_else(|| (0..spec.d() - 1).collect());
            let mut table = String::from("critical,mass,signed_mass,negative_mass,flagged_cells\n");
            for i in list {
                let field = critical_field(spec, &slice, Quantity::G, i, tol)?;
                let mg = ddc_1d(&field).ctx("ddc_1d")?;
                let _ = writeln!(table, "{i},{},{},{},{}", mg.total(), mg.signed_total(), mg.negative_mass(), mg.flagged_cells());
                let _ = writeln!(summary, "T_{i}: mass {:.6}", mg.total());
                sink.measure(&format!("current_{i}"), &mg)?;
            }
            sink.text("mass.csv", &table)?;
        }
        Subcommand::Pern => {
            let sec = cfg.pern.as_ref().expect("validated");
            let slice = cfg.slice_spec()?;
            let w = cplx(sec.w);
            let mults = multiplier_sweep(spec, &slice, sec.n).ctx("multiplier sweep")?;
            let field = pern_field(&slice, &mults, w, &format!("l_{}", sec.n)).ctx("pern field")?;
            let flagged = field.flagged_count();
            sink.field("pern", &field, PngScale::Linear)?;
            let _ = writeln!(summary, "l_{{{},w}}: {} cells, {flagged} flagged", sec.n, field.values().len());
            if sec.locus && slice.m() == 1 {
                let pts = pern_locus_1d(spec, &slice, sec.n, w, sec.seeds_per_cell).ctx("locus search")?;
                let mut csv = String::from("t_re,t_im\n");
                for t in &pts {
                    let _ = writeln!(csv, "{},{}", t.re, t.im);
                }
                sink.text("pern_locus.csv", &csv)?;
                let _ = writeln!(summary, "Per_{}(w): {} points in the box", sec.n, pts.len());
            }
        }
        Subcommand::Equidist => {
            let sec = cfg.equidist.as_ref().expect("validated");
            let slice = cfg.slice_spec()?;
            let ws: Vec<Complex64> = sec.ws.iter().copied().map(cplx).collect();
            let bumps = if slice.m() == 1 { default_bumps(&slice) } else { Vec::new() };
            let reports = convergence_reports(spec, &slice, &sec.periods, &ws, &bumps, tol).ctx("convergence report")?;
            let mut csv = format!("{REPORT_CSV_HEADER}\n");
            for r in &reports {
                csv.push_str(&r.csv_rows());
                summary.push_str(&r.summary());
            }
            sink.text("equidist.csv", &csv)?;
            sink.text("summary.txt", &summary)?;
        }
        Subcommand::Ma => {
            let sec = cfg.ma.clone().unwrap_or(default_ma());
            let slice = cfg.slice_spec()?;
            let h = sec.mollify_cells * slice.steps().iter().cloned().fold(0.0, f64::max);
            let [i, j] = sec.pair;
            let gi = critical_field(spec, &slice, Quantity::G, i, tol)?;
            let gj = critical_field(spec, &slice, Quantity::G, j, tol)?;
            let big = gi.zip_with(&gj, "G", f64::max).ctx("G field")?;
            // With more than two critical points G is the max over all of them.
            let big = if spec.d() > 3 { critical_field(spec, &slice, Quantity::Max, 0, tol)? } else { big };
            let ma = monge_ampere_2d(&big, h).ctx("Monge-Ampere")?;
            let wedge = mixed_wedge(&gi, &gj, h).ctx("mixed wedge")?;
            let inside: Vec<bool> = big.values().iter().map(|&v| v < sec.tol_g).collect();
            let support = boundary_mass_fraction(&ma, &inside, sec.support_cells);
            let mut table = String::from("quantity,total,negative_mass,flagged_cells\n");
            let _ = writeln!(table, "ma_G,{},{},{}", ma.total(), ma.negative_mass(), ma.flagged_cells());
            let _ = writeln!(table, "wedge_{i}_{j},{},{},{}", wedge.total(), wedge.negative_mass(), wedge.flagged_cells());
            let _ = writeln!(table, "boundary_fraction,{support},,");
            sink.text("ma.csv", &table)?;
            sink.measure("ma_G", &ma)?;
            sink.measure(&format!("wedge_{i}_{j}"), &wedge)?;
            let _ = writeln!(
                summary,
                "MA(G) mass {:.6}, T_{i} ^ T_{j} mass {:.6}, ratio to MA/2 {:.4}, boundary fraction {support:.4}",
                ma.total(),
                wedge.total(),
                wedge.total() / (0.5 * ma.total())
            );
        }
        Subcommand::Decompose => {
            let sec = cfg.decompose.as_ref().expect("validated");
            let p = cfg.decompose_parameter()?;
            let seed = cfg.run.seed;
            let dec = decompose_seeded(spec, &p, sec.dyn_resolution, seed).ctx("decompose")?;
            sink.text("decompose.csv", &dec.to_csv())?;
            dec.export_png(&sink.path("decompose.png")).ctx("png export")?;
            let re = |z: Complex64| z.re;
            let im = |z: Complex64| z.im;
            let sq = |z: Complex64| z.norm_sqr();
            let tests: [CloudTest<'_>; 3] = [&re, &im, &sq];
            let err = decomposition_check_with(spec, &dec, &tests, sec.word_length, sec.num_words, seed).ctx("decomposition check")?;
            let z0 = base_point(spec, &p).ctx("base point")?;
            let word = sample_nu(&dec, sec.word_length, seed);
            let cloud = mu_epsilon_cloud(spec, &p, &dec, &word, z0).ctx("pullback cloud")?;
            sink.text("cloud.csv", &cloud.to_csv())?;
            let mut check = String::from("word_length,num_words,seed,error\n");
            let _ = writeln!(check, "{},{},{seed},{err}", sec.word_length, sec.num_words);
            sink.text("decompose_check.csv", &check)?;
            let _ = writeln!(
                summary,
                "ell = {}, q = {}, degrees {:?}, G = {:.6}; decomposition error {err:.3e}",
                dec.ell,
                dec.q,
                dec.degrees(),
                dec.g_value
            );
        }
        Subcommand::Connectivity => {
            let sec = cfg.connectivity.clone().unwrap_or(default_connectivity());
            let slice = cfg.slice_spec()?;
            let field = critical_field(spec, &slice, Quantity::G, sec.critical, tol)?;
            let lab = components(&field, |v| v > sec.threshold).ctx("components")?;
            let cells = lab.labels.iter().filter(|l| l.is_some()).count();
            let mut csv = String::from("critical,threshold,components,cells\n");
            let _ = writeln!(csv, "{},{},{},{cells}", sec.critical, sec.threshold, lab.count);
            sink.text("connectivity.csv", &csv)?;
            let ids: Vec<f64> = lab.labels.iter().map(|l| l.map_or(-1.0, |k| k as f64)).collect();
            let ids = Field::new(slice, ids, "component").ctx("labels")?;
            sink.field("components", &ids, PngScale::Linear)?;
            let _ = writeln!(summary, "{{g(c_{}) > {}}}: {} component(s), {cells} cells", sec.critical, sec.threshold, lab.count);
        }
    }
    Ok(summary)
}
