//! Plain-text run configuration: one `key = value` pair per line, `#`
//! starts a comment. A `preset` key pulls in a stored document (and
//! possibly a sweep); keys given alongside it override the preset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use tubeot_core::solver::default_dt;
use tubeot_core::{
    AnalyticSolution, CostKind, CostModel, GammaSchedule, MixedHessianForm, SolverConfig, Surface, SurfaceDensity,
};

use crate::error::CliError;
use crate::presets::{self, Preset};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "name of a stored experiment; other keys override it"),
    ("name", "run name, used for the output subdirectory of sweeps"),
    ("surface", "sphere | hemisphere | torus"),
    ("torus_minor", "tube radius a of the torus (default 0.65)"),
    ("torus_major", "center-line radius c of the torus (default 1.3)"),
    ("cost", "sq_geodesic | log_reflector | euclidean"),
    ("sigma", "normal penalty (default 8)"),
    ("mixed_hessian", "exact | reduced: radial scaling of the sphere mixed Hessian (default exact)"),
    ("source", "source density preset"),
    ("target", "target density preset"),
    ("a0", "parameter of exact_axisymmetric, hemisphere_linear and torus_linear densities"),
    ("h", "grid spacing (default 0.05)"),
    ("epsilon", "band half-width, must exceed sqrt(3)*h (default 0.2)"),
    ("dt", "pseudo-time step or 'auto' (default auto)"),
    ("tol", "tolerance on the residual spread (default 1e-4)"),
    ("max_iters", "iteration cap (default 200000)"),
    ("gamma", "default | off | n0 >= 10 for n/(n+n0); default is (n+1)/(n+15)"),
    ("initial_value", "constant initial potential (default 1)"),
    ("outputs", "comma list of potential, mapping, residuals, error_metrics, reflector, cloud, pushforward"),
    ("output_dir", "directory for the run's files (default 'output')"),
    ("error_every", "iterations between L-infinity error samples when an exact solution is known (default 100)"),
    ("cloud_resolution", "anchor mesh size as ROWSxCOLS (default 24x48 on spheres, 32x64 on the torus)"),
];

pub const DENSITIES: &[(&str, &str)] = &[
    ("uniform", "constant density 1/area"),
    ("polar_gaussian_north", "Gaussian ring near the north pole"),
    ("polar_gaussian_south", "Gaussian ring near the south pole"),
    ("gaussian_cap_x", "Gaussian bump around +x"),
    ("discontinuous_cap", "half-sphere step density with tilted normal (0.2, 0.2, 1)"),
    ("headlight_peanut", "two Gaussian headlight spots"),
    ("hemisphere_linear", "(1 + 10 theta)/(2 pi (1 + a0)) on the hemisphere, a0 = 10 normalizes"),
    ("torus_linear", "(z + a + a0)/(4 pi^2 a c (a + a0)) on the torus (default a0 = 0.5)"),
    ("exact_axisymmetric", "axisymmetric source whose transport to uniform has potential z/a0 (default a0 = 3)"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensitySpec {
    Uniform,
    PolarGaussianNorth,
    PolarGaussianSouth,
    GaussianCapX,
    DiscontinuousCap,
    HeadlightPeanut,
    HemisphereLinear,
    TorusLinear,
    ExactAxisymmetric,
}

impl DensitySpec {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uniform" => DensitySpec::Uniform,
            "polar_gaussian_north" => DensitySpec::PolarGaussianNorth,
            "polar_gaussian_south" => DensitySpec::PolarGaussianSouth,
            "gaussian_cap_x" => DensitySpec::GaussianCapX,
            "discontinuous_cap" => DensitySpec::DiscontinuousCap,
            "headlight_peanut" => DensitySpec::HeadlightPeanut,
            "hemisphere_linear" => DensitySpec::HemisphereLinear,
            "torus_linear" => DensitySpec::TorusLinear,
            "exact_axisymmetric" => DensitySpec::ExactAxisymmetric,
            _ => return None,
        })
    }

    fn default_a0(self) -> Option<f64> {
        match self {
            DensitySpec::HemisphereLinear => Some(10.0),
            DensitySpec::TorusLinear => Some(0.5),
            DensitySpec::ExactAxisymmetric => Some(3.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Output {
    Potential,
    Mapping,
    Residuals,
    ErrorMetrics,
    Reflector,
    Cloud,
    Pushforward,
}

impl Output {
    const ALL: [(Output, &'static str); 7] = [
        (Output::Potential, "potential"),
        (Output::Mapping, "mapping"),
        (Output::Residuals, "residuals"),
        (Output::ErrorMetrics, "error_metrics"),
        (Output::Reflector, "reflector"),
        (Output::Cloud, "cloud"),
        (Output::Pushforward, "pushforward"),
    ];

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(_, n)| *n == s).map(|(o, _)| *o)
    }

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(o, _)| *o == self).map(|(_, n)| *n).unwrap_or_default()
    }
}

/// A fully validated single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub surface: Surface,
    pub cost: CostKind,
    pub sigma: f64,
    pub mixed_hessian: MixedHessianForm,
    pub source: DensitySpec,
    pub target: DensitySpec,
    pub source_a0: Option<f64>,
    pub target_a0: Option<f64>,
    pub h: f64,
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub outputs: BTreeSet<Output>,
    pub output_dir: PathBuf,
    pub error_every: usize,
    pub cloud_resolution: (usize, usize),
    /// Resolved `key = value` pairs, echoed into the run metadata.
    pub echo: Vec<(String, String)>,
}

impl RunConfig {
    pub fn cost_model(&self) -> CostModel {
        CostModel::new(self.cost, self.sigma, self.surface)
            .expect("validated at parse time")
            .with_form(self.mixed_hessian)
    }

    pub fn source_density(&self) -> SurfaceDensity {
        self.density(self.source, self.source_a0)
    }

    pub fn target_density(&self) -> SurfaceDensity {
        self.density(self.target, self.target_a0)
    }

    fn density(&self, spec: DensitySpec, a0: Option<f64>) -> SurfaceDensity {
        let a0 = a0.unwrap_or(f64::NAN);
        match spec {
            DensitySpec::Uniform => SurfaceDensity::uniform(&self.surface),
            DensitySpec::PolarGaussianNorth => SurfaceDensity::polar_gaussian_north(),
            DensitySpec::PolarGaussianSouth => SurfaceDensity::polar_gaussian_south(),
            DensitySpec::GaussianCapX => SurfaceDensity::gaussian_cap_x(),
            DensitySpec::DiscontinuousCap => SurfaceDensity::discontinuous_cap(),
            DensitySpec::HeadlightPeanut => SurfaceDensity::headlight_peanut(),
            DensitySpec::HemisphereLinear => SurfaceDensity::hemisphere_linear(a0),
            DensitySpec::TorusLinear => SurfaceDensity::torus_linear(a0, &self.surface).expect("validated at parse time"),
            DensitySpec::ExactAxisymmetric => AnalyticSolution::new(self.cost, a0).expect("validated at parse time").source(),
        }
    }

    /// Exact solution, when the source is an exact axisymmetric density and the
    /// target is uniform on the full sphere.
    pub fn analytic(&self) -> Option<AnalyticSolution> {
        (self.source == DensitySpec::ExactAxisymmetric && self.target == DensitySpec::Uniform && self.surface == Surface::UnitSphere)
            .then(|| AnalyticSolution::new(self.cost, self.source_a0?).ok())
            .flatten()
    }
}

/// The runs requested by one configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub preset: Option<String>,
    pub output_dir: PathBuf,
    pub runs: Vec<RunConfig>,
}

impl RunPlan {
    pub fn is_sweep(&self) -> bool {
        self.runs.len() > 1
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: Option<usize>,
}

type Document = BTreeMap<&'static str, Entry>;

fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(k, _)| *k)
}

/// Parses a document; `numbered` controls whether errors cite line numbers.
fn read_document(text: &str, numbered: bool) -> Result<Document, CliError> {
    let mut doc = Document::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = numbered.then_some(idx + 1);
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::config(line, format!("expected 'key = value', found '{content}'")));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(key) = canonical_key(key) else {
            return Err(CliError::config(line, format!("unknown key '{key}'")));
        };
        if value.is_empty() {
            return Err(CliError::config(line, format!("key '{key}' has an empty value")));
        }
        if doc.insert(key, Entry { value: value.to_string(), line }).is_some() {
            return Err(CliError::config(line, format!("key '{key}' is set twice")));
        }
    }
    Ok(doc)
}

pub fn parse_config(text: &str) -> Result<RunPlan, CliError> {
    parse_with_overrides(text, &[])
}

/// Parses `text`, then applies `overrides` (`key=value` strings) on top.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunPlan, CliError> {
    let mut user = read_document(text, true)?;
    for o in overrides {
        for (k, e) in read_document(o, false)? {
            user.insert(k, e);
        }
    }
    let preset = match user.get("preset") {
        Some(e) => Some(
            presets::find(&e.value).ok_or_else(|| CliError::config(e.line, format!("unknown preset '{}'", e.value)))?,
        ),
        None => None,
    };
    let mut base = match preset {
        Some(p) => read_document(p.base, false).expect("stored presets parse"),
        None => Document::new(),
    };
    let name = user.get("name").map(|e| e.value.clone()).or_else(|| preset.map(|p| p.name.to_string()));
    base.extend(user);
    let output_dir = PathBuf::from(base.get("output_dir").map_or("output", |e| e.value.as_str()));

    let runs = match preset.filter(|p| !p.sweep.is_empty()) {
        Some(Preset { sweep, .. }) => sweep
            .iter()
            .map(|(suffix, overrides)| {
                let mut doc = base.clone();
                doc.extend(read_document(overrides, false).expect("stored presets parse"));
                let mut run = build_run(&doc)?;
                run.name = suffix.to_string();
                run.output_dir = output_dir.join(suffix);
                Ok(run)
            })
            .collect::<Result<Vec<_>, CliError>>()?,
        None => {
            let mut run = build_run(&base)?;
            run.name = name.unwrap_or_else(|| "run".into());
            vec![run]
        }
    };
    Ok(RunPlan { preset: preset.map(|p| p.name.to_string()), output_dir, runs })
}

struct Reader<'a> {
    doc: &'a Document,
    echo: BTreeMap<&'static str, String>,
}

impl<'a> Reader<'a> {
    fn line(&self, key: &str) -> Option<usize> {
        self.doc.get(key).and_then(|e| e.line)
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        let v = self.doc.get(key).map(|e| e.value.as_str());
        if let Some(v) = v {
            self.echo.insert(key, v.to_string());
        }
        v
    }

    fn required(&mut self, key: &'static str) -> Result<&'a str, CliError> {
        self.raw(key).ok_or_else(|| CliError::config(None, format!("missing required key '{key}'")))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &'static str, default: T, kind: &str) -> Result<T, CliError>
    where
        T: fmt::Display,
    {
        match self.raw(key) {
            Some(v) => v.parse().map_err(|_| CliError::config(self.line(key), format!("key '{key}' expects {kind}, got '{v}'"))),
            None => {
                self.echo.insert(key, default.to_string());
                Ok(default)
            }
        }
    }

    fn positive(&mut self, key: &'static str, default: f64) -> Result<f64, CliError> {
        let v = self.parsed(key, default, "a number")?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::config(self.line(key), format!("key '{key}' must be positive, got {v}")));
        }
        Ok(v)
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::config(self.line(key), message)
    }
}

fn build_run(doc: &Document) -> Result<RunConfig, CliError> {
    let mut r = Reader { doc, echo: BTreeMap::new() };
    if let Some(p) = r.raw("preset") {
        r.echo.insert("preset", p.to_string());
    }

    let surface = match r.required("surface")? {
        "sphere" => Surface::UnitSphere,
        "hemisphere" => Surface::NorthernHemisphere,
        "torus" => {
            let minor = r.positive("torus_minor", 0.65)?;
            let major = r.positive("torus_major", 1.3)?;
            Surface::torus(minor, major).map_err(|e| r.fail("torus_minor", e.to_string()))?
        }
        other => return Err(r.fail("surface", format!("unknown surface '{other}'"))),
    };
    let default_cost = if matches!(surface, Surface::Torus { .. }) { "euclidean" } else { "sq_geodesic" };
    let cost_name = r.raw("cost").unwrap_or(default_cost);
    r.echo.insert("cost", cost_name.to_string());
    let cost = match cost_name {
        "sq_geodesic" => CostKind::SqGeodesicSphere,
        "log_reflector" => CostKind::LogReflectorSphere,
        "euclidean" => CostKind::EuclideanSurface,
        other => return Err(r.fail("cost", format!("unknown cost '{other}'"))),
    };
    let sigma = r.positive("sigma", 8.0)?;
    CostModel::new(cost, sigma, surface).map_err(|e| r.fail("cost", e.to_string()))?;
    let mixed_hessian = match r.raw("mixed_hessian").unwrap_or("exact") {
        "exact" => MixedHessianForm::Exact,
        "reduced" => MixedHessianForm::Reduced,
        other => return Err(r.fail("mixed_hessian", format!("mixed_hessian must be 'exact' or 'reduced', got '{other}'"))),
    };
    r.echo.insert("mixed_hessian", format!("{mixed_hessian:?}").to_lowercase());

    let mut density = |key: &'static str| -> Result<(DensitySpec, Option<f64>), CliError> {
        let name = r.required(key)?;
        let spec = DensitySpec::parse(name).ok_or_else(|| r.fail(key, format!("unknown density '{name}'")))?;
        let a0 = match spec.default_a0() {
            Some(d) => Some(r.parsed("a0", d, "a number")?),
            None => None,
        };
        let ok = match spec {
            DensitySpec::Uniform => true,
            DensitySpec::HemisphereLinear => surface == Surface::NorthernHemisphere,
            DensitySpec::TorusLinear => matches!(surface, Surface::Torus { .. }),
            DensitySpec::ExactAxisymmetric => surface == Surface::UnitSphere && cost != CostKind::EuclideanSurface,
            _ => surface == Surface::UnitSphere,
        };
        if !ok {
            return Err(r.fail(key, format!("density '{name}' is not defined for this surface and cost")));
        }
        if spec == DensitySpec::ExactAxisymmetric {
            AnalyticSolution::new(cost, a0.unwrap_or_default()).map_err(|e| r.fail("a0", e.to_string()))?;
        }
        if spec == DensitySpec::TorusLinear && !(a0.unwrap_or_default() > 0.0) {
            return Err(r.fail("a0", "torus_linear needs a0 > 0 to stay positive"));
        }
        Ok((spec, a0))
    };
    let (source, source_a0) = density("source")?;
    let (target, target_a0) = density("target")?;

    let h = r.positive("h", 0.05)?;
    let epsilon = r.positive("epsilon", 0.2)?;
    if epsilon <= 3f64.sqrt() * h {
        return Err(r.fail(
            "epsilon",
            format!("epsilon must exceed sqrt(3)*h (epsilon = {epsilon}, sqrt(3)*h = {:.6})", 3f64.sqrt() * h),
        ));
    }
    if epsilon >= surface.reach() {
        return Err(r.fail("epsilon", format!("epsilon = {epsilon} must stay below the reach {} of the surface", surface.reach())));
    }

    let dt = match r.raw("dt") {
        None | Some("auto") => default_dt(sigma, h),
        Some(v) => v.parse::<f64>().ok().filter(|d| *d > 0.0 && d.is_finite()).ok_or_else(|| {
            r.fail("dt", format!("key 'dt' expects a positive number or 'auto', got '{v}'"))
        })?,
    };
    r.echo.insert("dt", format!("{dt:e}"));
    let tol = r.positive("tol", 1e-4)?;
    let max_iters = r.parsed("max_iters", 200_000usize, "a positive integer")?;
    if max_iters == 0 {
        return Err(r.fail("max_iters", "max_iters must be at least 1"));
    }
    let gamma = match r.raw("gamma").unwrap_or("default") {
        "default" => GammaSchedule::Default,
        "off" => GammaSchedule::Disabled,
        v => match v.parse::<u32>() {
            Ok(n0) if n0 >= 10 => GammaSchedule::Offset(n0),
            _ => return Err(r.fail("gamma", format!("gamma must be 'default', 'off' or an integer n0 >= 10, got '{v}'"))),
        },
    };
    r.echo.entry("gamma").or_insert_with(|| "default".into());
    let initial_value = r.parsed("initial_value", 1.0f64, "a number")?;
    let solver = SolverConfig { dt, tol, max_iters, gamma, initial_value, ..SolverConfig::default() };

    let outputs_raw = r.raw("outputs").unwrap_or("potential,mapping,residuals,error_metrics");
    let mut outputs = BTreeSet::new();
    for item in outputs_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        outputs.insert(Output::parse(item).ok_or_else(|| r.fail("outputs", format!("unknown output '{item}'")))?);
    }
    r.echo.insert("outputs", outputs.iter().map(|o| o.name()).collect::<Vec<_>>().join(","));
    let spherical_full = surface == Surface::UnitSphere;
    if outputs.contains(&Output::Reflector) && !matches!(surface, Surface::UnitSphere | Surface::NorthernHemisphere) {
        return Err(r.fail("outputs", "reflector output needs a sphere or hemisphere surface"));
    }
    if outputs.contains(&Output::Cloud) && surface == Surface::NorthernHemisphere {
        return Err(r.fail("outputs", "cloud output is available on the sphere and the torus only"));
    }
    if outputs.contains(&Output::Pushforward) && !(spherical_full && source == DensitySpec::ExactAxisymmetric) {
        return Err(r.fail("outputs", "pushforward output needs an exact_axisymmetric source on the sphere"));
    }

    let error_every = r.parsed("error_every", 100usize, "a non-negative integer")?;
    let default_cloud = if matches!(surface, Surface::Torus { .. }) { "32x64" } else { "24x48" };
    let cloud_raw = r.raw("cloud_resolution").unwrap_or(default_cloud);
    let cloud_resolution = cloud_raw
        .split_once('x')
        .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
        .filter(|&(a, b)| a >= 3 && b >= 3)
        .ok_or_else(|| r.fail("cloud_resolution", format!("cloud_resolution expects ROWSxCOLS with both >= 3, got '{cloud_raw}'")))?;
    r.echo.insert("cloud_resolution", format!("{}x{}", cloud_resolution.0, cloud_resolution.1));
    let output_dir = PathBuf::from(r.raw("output_dir").unwrap_or("output"));
    r.echo.remove("output_dir");
    r.echo.remove("name");

    Ok(RunConfig {
        name: String::new(),
        surface,
        cost,
        sigma,
        mixed_hessian,
        source,
        target,
        source_a0,
        target_a0,
        h,
        epsilon,
        solver,
        outputs,
        output_dir,
        error_every,
        cloud_resolution,
        echo: r.echo.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let plan = parse_config("surface = sphere\nsource = exact_axisymmetric\ntarget = uniform\n").unwrap();
        let run = &plan.runs[0];
        assert_eq!((run.sigma, run.h, run.epsilon), (8.0, 0.05, 0.2));
        assert_eq!(run.cost, CostKind::SqGeodesicSphere);
        assert_eq!(run.source_a0, Some(3.0));
        assert!(run.analytic().is_some());
    }

    #[test]
    fn narrow_band_is_rejected() {
        let err = parse_config("surface = sphere\nsource = uniform\ntarget = uniform\nepsilon = 0.05\nh = 0.05\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(4), .. }), "{err}");
        assert!(err.to_string().contains("sqrt(3)*h"));
    }

    #[test]
    fn unknown_key_cites_line() {
        let err = parse_config("# comment\nsurface = sphere\nsigmaa = 3\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(3), .. }), "{err}");
    }

    #[test]
    fn missing_and_mistyped_keys() {
        let err = parse_config("surface = sphere\nsource = uniform\n").unwrap_err();
        assert!(err.to_string().contains("'target'"));
        let err = parse_config("surface = sphere\nsource = uniform\ntarget = uniform\nmax_iters = lots\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(4), .. }), "{err}");
    }

    #[test]
    fn incompatible_densities_are_rejected() {
        assert!(parse_config("surface = torus\nsource = headlight_peanut\ntarget = uniform\n").is_err());
        assert!(parse_config("surface = sphere\ncost = euclidean\nsource = exact_axisymmetric\ntarget = uniform\n").is_err());
        assert!(parse_config("surface = torus\ncost = log_reflector\nsource = uniform\ntarget = uniform\n").is_err());
    }

    #[test]
    fn sigma_sweep_uses_table_pairs() {
        let plan = parse_config("preset = table3_sigma_sweep\n").unwrap();
        let pairs: Vec<(f64, f64)> = plan.runs.iter().map(|r| (r.sigma, r.solver.dt)).collect();
        assert_eq!(pairs, vec![(0.25, 1e-4), (2.0, 2.5e-5), (8.0, 2.5e-5), (16.0, 1e-5), (64.0, 2.5e-6)]);
        assert!(plan.is_sweep());
        assert_eq!(plan.runs[2].output_dir, PathBuf::from("output/sigma_8"));
    }

    #[test]
    fn user_keys_override_presets() {
        let plan = parse_config("preset = identity\nmax_iters = 7\noutput_dir = elsewhere\n").unwrap();
        assert_eq!(plan.runs[0].solver.max_iters, 7);
        assert_eq!(plan.runs[0].name, "identity");
        assert_eq!(plan.output_dir, PathBuf::from("elsewhere"));
        let plan = parse_with_overrides("preset = identity\n", &["h = 0.08".into()]).unwrap();
        assert_eq!(plan.runs[0].h, 0.08);
    }

    #[test]
    fn every_preset_parses() {
        for p in presets::PRESETS {
            let plan = parse_config(&format!("preset = {}\n", p.name)).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(!plan.runs.is_empty());
        }
    }

    #[test]
    fn dt_defaults_follow_the_table() {
        let plan = parse_config("surface = sphere\nsource = uniform\ntarget = uniform\nsigma = 16\n").unwrap();
        assert_eq!(plan.runs[0].solver.dt, 1e-5);
        let plan = parse_config("surface = sphere\nsource = uniform\ntarget = uniform\ndt = 3e-5\n").unwrap();
        assert_eq!(plan.runs[0].solver.dt, 3e-5);
    }
}
