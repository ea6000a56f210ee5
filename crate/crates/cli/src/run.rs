//! Executes a run and writes its files.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tubeot_core::density::polar_angle;
use tubeot_core::solver::{solve_with_monitor, Monitor};
use tubeot_core::validate::{
    band_mass, inverted_triangles, lat_long_samples, level_set_defect, linf_error, neumann_defect, normal_constancy,
    pushforward_cap_check, reflector_shape, transport_cloud, SurfaceMesh, TransportedCloud,
};
use tubeot_core::{ExtendedDensity, GridFunction, NarrowbandGrid, ResidualOperator, Surface, SolverReport, Vec3};

use crate::config::{Output, RunConfig, RunPlan};
use crate::error::{exit, CliError};

/// Files written by one run, with their SHA-256 digests.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub name: String,
    pub dir: PathBuf,
    /// `(file name, hex digest)` in write order. The manifest itself is not listed.
    pub files: Vec<(String, String)>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub linf_error: Option<f64>,
    pub wall_time: f64,
    pub nodes: usize,
}

impl OutputBundle {
    pub fn exit_code(&self) -> i32 {
        if self.diverged {
            exit::DIVERGED
        } else if !self.converged {
            exit::NOT_CONVERGED
        } else {
            exit::OK
        }
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.files.push((name.to_string(), hex::encode(Sha256::digest(contents.as_bytes()))));
        Ok(())
    }

    fn finish(self) -> Result<Vec<(String, String)>, CliError> {
        let mut manifest = String::new();
        for (name, digest) in &self.files {
            let _ = writeln!(manifest, "{digest}  {name}");
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, manifest).map_err(|source| CliError::Io { path, source })?;
        Ok(self.files)
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn vec_row(p: &Vec3) -> String {
    format!("{},{},{}", num(p.x), num(p.y), num(p.z))
}

/// Interior nodes in lexicographic lattice order.
fn sorted_interior(grid: &NarrowbandGrid) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..grid.n_interior()).collect();
    ids.sort_by_key(|&i| grid.lattice(i));
    ids
}

/// Runs every entry of the plan. Sweeps also get a `summary.csv` in the
/// plan's output directory.
pub fn run_plan(plan: &RunPlan, mut progress: impl FnMut(&OutputBundle)) -> Result<Vec<OutputBundle>, CliError> {
    let mut bundles = Vec::new();
    for config in &plan.runs {
        let bundle = run(config)?;
        progress(&bundle);
        bundles.push(bundle);
    }
    if plan.is_sweep() {
        let mut s = String::from("run,h,epsilon,sigma,dt,nodes,iterations,converged,linf_error\n");
        for (c, b) in plan.runs.iter().zip(&bundles) {
            let err = b.linf_error.map(num).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{},{},{},{}",
                b.name, c.h, c.epsilon, c.sigma, c.solver.dt, b.nodes, b.iterations, b.converged, err
            );
        }
        let path = plan.output_dir.join("summary.csv");
        fs::write(&path, s).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(bundles)
}

pub fn run(config: &RunConfig) -> Result<OutputBundle, CliError> {
    let grid = NarrowbandGrid::build(config.surface, config.h, config.epsilon).map_err(CliError::Grid)?;
    let cost = config.cost_model();
    let source = ExtendedDensity::new(config.source_density(), config.surface, config.epsilon, grid.jacobian_step());
    let target = ExtendedDensity::new(config.target_density(), config.surface, config.epsilon, grid.jacobian_step());
    let analytic = config.analytic();

    let monitor = match analytic {
        Some(exact) if config.error_every > 0 => {
            let g = &grid;
            Some(Monitor {
                every: config.error_every,
                f: Box::new(move |v: &GridFunction| linf_error(v, g, &exact).unwrap_or(f64::NAN)),
            })
        }
        _ => None,
    };
    let report = solve_with_monitor(&grid, &cost, &source, &target, &config.solver, monitor).map_err(CliError::Solver)?;
    let v = &report.final_potential;

    let mut out = Writer::new(&config.output_dir)?;
    let outputs = &config.outputs;
    let order = sorted_interior(&grid);
    let mut metrics: Vec<(&str, String)> = Vec::new();
    let mut linf = None;

    if outputs.contains(&Output::Potential) {
        let mut s = String::from("x,y,z,phi,v\n");
        for &i in &order {
            let _ = writeln!(s, "{},{},{}", vec_row(&grid.position(i)), num(grid.data(i).phi), num(v[i]));
        }
        out.write("potential.csv", &s)?;
    }
    if outputs.contains(&Output::Residuals) {
        out.write("residuals.csv", &residual_table(&report, analytic.is_some()))?;
        let mut s = String::from("iter,spread\n");
        for (n, r) in &report.spread_history {
            let _ = writeln!(s, "{n},{}", num(*r));
        }
        out.write("residual_spread.csv", &s)?;
    }

    // Post-processing needs a finite potential.
    if !report.diverged {
        let op = ResidualOperator::new(&grid, cost, &source, &target).map_err(CliError::Solver)?;
        let mappings = op.mappings(v).map_err(CliError::Validate)?;
        if outputs.contains(&Output::Mapping) {
            let mut s = String::from("x,y,z,mx,my,mz\n");
            for &i in &order {
                let _ = writeln!(s, "{},{}", vec_row(&grid.position(i)), vec_row(&mappings[i].target));
            }
            out.write("mapping.csv", &s)?;
        }
        if let Some(exact) = analytic {
            let e = linf_error(v, &grid, &exact).map_err(CliError::Validate)?;
            linf = Some(e);
            metrics.push(("linf_error", num(e)));
        }
        metrics.push(("normal_constancy", num(normal_constancy(v, &grid))));
        metrics.push(("level_set_defect", num(level_set_defect(&grid, &mappings))));
        if config.surface == Surface::NorthernHemisphere {
            metrics.push(("neumann_defect", num(neumann_defect(v, &grid))));
        }
        let target_values: Vec<f64> =
            (0..grid.n_interior()).map(|i| target.eval(&grid.position(i)).unwrap_or(f64::NAN)).collect();
        metrics.push(("source_band_mass", num(band_mass(&grid, op.source_values()))));
        metrics.push(("target_band_mass", num(band_mass(&grid, &target_values))));

        if outputs.contains(&Output::Pushforward) {
            let band = 2.0 * grid.h();
            metrics.push(("pushforward_band", num(band)));
            let mut s = String::from("theta0,source_mass,target_mass\n");
            for k in 1..8 {
                let theta0 = k as f64 * PI / 8.0;
                let (fm, gm) = pushforward_cap_check(
                    &grid,
                    &mappings,
                    source.base(),
                    target.base(),
                    theta0,
                    band,
                )
                .map_err(CliError::Validate)?;
                let _ = writeln!(s, "{},{},{}", num(theta0), num(fm), num(gm));
            }
            out.write("pushforward.csv", &s)?;
        }
        if outputs.contains(&Output::Reflector) {
            let mut dirs = lat_long_samples(90, 180, 0.0);
            if config.surface == Surface::NorthernHemisphere {
                dirs.retain(|d| polar_angle(d) <= PI / 2.0);
            }
            let shape = reflector_shape(v, &grid, &dirs).map_err(CliError::Validate)?;
            let mut s = String::from("dx,dy,dz,rho\n");
            for (d, rho) in shape {
                let _ = writeln!(s, "{},{}", vec_row(&d), num(rho));
            }
            out.write("reflector.csv", &s)?;
        }
        if outputs.contains(&Output::Cloud) {
            let (rows, cols) = config.cloud_resolution;
            let mesh = match config.surface {
                Surface::Torus { .. } => SurfaceMesh::torus(&config.surface, rows, cols).map_err(CliError::Validate)?,
                _ => SurfaceMesh::sphere(rows, cols),
            };
            let cloud = transport_cloud(v, &grid, op.cost(), &mesh).map_err(CliError::Validate)?;
            write_cloud(&mut out, &cloud)?;
            if matches!(config.surface, Surface::Torus { .. }) {
                metrics.push(("inverted_triangles", inverted_triangles(&config.surface, &cloud).to_string()));
            }
        }
        if outputs.contains(&Output::ErrorMetrics) {
            let mut s = String::new();
            for (k, val) in &metrics {
                let _ = writeln!(s, "{k}={val}");
            }
            out.write("error_metrics.txt", &s)?;
        }
    }

    out.write("metadata.txt", &metadata(config, &grid, &report))?;
    let files = out.finish()?;
    Ok(OutputBundle {
        name: config.name.clone(),
        dir: config.output_dir.clone(),
        files,
        iterations: report.iterations,
        converged: report.converged,
        diverged: report.diverged,
        linf_error: linf,
        wall_time: report.wall_time,
        nodes: grid.n_interior(),
    })
}

fn residual_table(report: &SolverReport, with_error: bool) -> String {
    let errors: HashMap<usize, f64> = report.monitor_history.iter().copied().collect();
    let mut s = String::from(if with_error { "iter,max_residual,linf_error\n" } else { "iter,max_residual\n" });
    for (n, r) in &report.residual_history {
        if with_error {
            let e = errors.get(n).map(|e| num(*e)).unwrap_or_default();
            let _ = writeln!(s, "{n},{},{e}", num(*r));
        } else {
            let _ = writeln!(s, "{n},{}", num(*r));
        }
    }
    s
}

fn write_cloud(out: &mut Writer, cloud: &TransportedCloud) -> Result<(), CliError> {
    let table = |points: &[Vec3]| {
        let mut s = String::from("id,x,y,z\n");
        for (k, p) in points.iter().enumerate() {
            let _ = writeln!(s, "{k},{}", vec_row(p));
        }
        s
    };
    out.write("cloud_before.csv", &table(&cloud.mesh.points))?;
    out.write("cloud_after.csv", &table(&cloud.images))?;
    let mut s = String::from("id_a,id_b\n");
    for (a, b) in &cloud.mesh.edges {
        let _ = writeln!(s, "{a},{b}");
    }
    out.write("cloud_edges.csv", &s)
}

/// Config echo and run statistics. `wall_time` is always the last line.
fn metadata(config: &RunConfig, grid: &NarrowbandGrid, report: &SolverReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "name={}", config.name);
    for (k, v) in &config.echo {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "nodes_interior={}", grid.n_interior());
    let _ = writeln!(s, "nodes_boundary={}", grid.n_boundary());
    let _ = writeln!(s, "nodes_ghost={}", grid.n_ghost());
    let _ = writeln!(s, "iterations={}", report.iterations);
    let _ = writeln!(s, "converged={}", report.converged);
    let _ = writeln!(s, "diverged={}", report.diverged);
    if let Some(f) = &report.failure {
        let _ = writeln!(s, "failure={f}");
    }
    let _ = writeln!(s, "final_residual={}", num(report.final_residual()));
    let _ = writeln!(s, "final_spread={}", num(report.final_spread()));
    let _ = writeln!(s, "clamp_events={}", report.clamp_events);
    let _ = writeln!(s, "wall_time={:.3}", report.wall_time);
    s
}
