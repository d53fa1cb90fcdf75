//! Command implementations behind the `frontweave` binary: full example
//! runs, convergence sweeps, oracle-cloud generation and the self test.

use crate::engine::{self, EngineConfig};
use crate::grid::SurfacePoint;
use crate::io::{self, ConvergenceRow};
use crate::oracle::{self, OracleCloud, Region};
use crate::registry::{get_example, ExampleSpec};
use crate::sideways::{
    solve_patch_watched, DtPolicy, Representation, SidewaysPatch, SpeedField,
};
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// Everything a run needs beyond the example itself. CLI flags override
/// config-file values which override the example defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub s_fraction: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub r1_skew: Option<f64>,
    pub r2_skew: Option<f64>,
    pub sign_test_samples: Option<usize>,
    pub record_sideways: Option<bool>,
    pub exact_normals: Option<bool>,
    pub t_final: Option<f64>,
}

impl Overrides {
    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut o = Overrides::default();
        for (key, value) in io::parse_config(&text)? {
            let bad = |e: String| Error::Config(format!("key `{key}`: {e}"));
            let f = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
            let b = || value.parse::<bool>().map_err(|e| bad(e.to_string()));
            match key.as_str() {
                "s_fraction" => o.s_fraction = Some(f()?),
                "r1" => o.r1 = Some(f()?),
                "r2" => o.r2 = Some(f()?),
                "r1_skew" => o.r1_skew = Some(f()?),
                "r2_skew" => o.r2_skew = Some(f()?),
                "sign_test_samples" => {
                    o.sign_test_samples =
                        Some(value.parse().map_err(|_| bad("expected integer".into()))?)
                }
                "record_sideways" => o.record_sideways = Some(b()?),
                "exact_normals" => o.exact_normals = Some(b()?),
                "T" | "t_final" => o.t_final = Some(f()?),
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(o)
    }

    /// Later overrides win field by field.
    pub fn merged_with(mut self, later: &Overrides) -> Overrides {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if later.$field.is_some() { self.$field = later.$field.clone(); })*
            };
        }
        take!(
            s_fraction,
            r1,
            r2,
            r1_skew,
            r2_skew,
            sign_test_samples,
            record_sideways,
            exact_normals,
            t_final
        );
        self
    }

    pub fn apply(&self, ex: &mut ExampleSpec, cfg: &mut EngineConfig) {
        if let Some(t) = self.t_final {
            ex.t_final = t;
            cfg.grid.t_max = t;
        }
        if let Some(v) = self.s_fraction {
            cfg.s_fraction = v;
        }
        if let Some(v) = self.r1 {
            cfg.r_axis.0 = v;
        }
        if let Some(v) = self.r2 {
            cfg.r_axis.1 = v;
        }
        if let Some(v) = self.r1_skew {
            cfg.r_skew.0 = v;
        }
        if let Some(v) = self.r2_skew {
            cfg.r_skew.1 = v;
        }
        if let Some(v) = self.sign_test_samples {
            cfg.sign_test_samples = v;
        }
        if let Some(v) = self.record_sideways {
            cfg.record_sideways = v;
        }
        if let Some(v) = self.exact_normals {
            cfg.exact_normals = v;
        }
    }
}

/// Runs one example and writes the accepted cloud (plus recorded sideways
/// samples and failure markers) as CSV.
pub fn cmd_run(
    example: &str,
    cells: usize,
    out: &Path,
    overrides: &Overrides,
    classical: bool,
) -> Result<()> {
    let mut ex = get_example(example)?;
    let mut cfg = EngineConfig::for_example(&ex, cells)?;
    overrides.apply(&mut ex, &mut cfg);
    let speed = ex.speed();
    let output = if classical {
        engine::run_classical(&ex, &speed, &cfg)?
    } else {
        engine::run(&ex, &speed, &cfg)?
    };
    let mut rows = output.accepted;
    rows.extend(output.recorded);
    rows.extend(output.failures);
    io::write_cloud(out, &rows)?;
    Ok(())
}

fn thread_cap() -> usize {
    std::env::var("FRONTWEAVE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |v| v.get()))
}

/// Per-grid region errors of a full run.
pub fn run_region_errors(
    ex: &ExampleSpec,
    cells: usize,
    overrides: &Overrides,
    region: Region,
    cloud: Option<&OracleCloud>,
) -> Result<(f64, Vec<(SurfacePoint, f64)>)> {
    let mut ex = ex.clone();
    let mut cfg = EngineConfig::for_example(&ex, cells)?;
    overrides.apply(&mut ex, &mut cfg);
    let speed = ex.speed();
    let output = engine::run(&ex, &speed, &cfg)?;
    let mut errors = Vec::new();
    for p in output.accepted {
        if !p.psi.is_finite() {
            continue;
        }
        let reg = oracle::region_of(&p, ex.t_star);
        if region != Region::Global && reg != region {
            continue;
        }
        let e = match cloud {
            Some(c) => oracle::error_method2(&p, c),
            None => match oracle::error_method1(&p, &ex) {
                Ok(e) => e,
                Err(_) => continue, // outside the exact form's validity
            },
        };
        errors.push((p, e));
    }
    Ok((cfg.grid.h, errors))
}

/// Which point set a convergence sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergeRegion {
    /// A region of the full-scheme accepted cloud.
    Full(Region),
    /// The standalone sideways scheme on the example's convergence domain.
    Patch,
}

impl ConvergeRegion {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "patch" {
            return Some(ConvergeRegion::Patch);
        }
        Region::parse(s).map(ConvergeRegion::Full)
    }
}

/// Convergence sweep over a list of grid sizes.
///
/// Method 1 measures against the closed-form solution, method 2 against an
/// oracle cloud (loaded from `oracle_path` or generated at four times the
/// finest grid). Writes `n,h,L1,Linf,slope` rows plus one per-point
/// relative-error file per grid for shading plots. The `patch` region runs
/// the standalone sideways study instead.
#[allow(clippy::too_many_arguments)]
pub fn cmd_converge(
    example: &str,
    grids: &[usize],
    method: u8,
    region: ConvergeRegion,
    out: &Path,
    overrides: &Overrides,
    oracle_path: Option<&Path>,
) -> Result<()> {
    let ex = get_example(example)?;
    if grids.is_empty() {
        return Err(Error::Config("no grid sizes given".into()));
    }

    let region = match region {
        ConvergeRegion::Patch => return converge_patch(&ex, grids, out),
        ConvergeRegion::Full(r) => r,
    };

    let cloud = match method {
        1 => None,
        2 => {
            let points = match oracle_path {
                Some(p) if p.exists() => io::read_oracle(p)?,
                _ => {
                    let n_fine = grids.iter().copied().max().unwrap() * 4;
                    let points = generate_oracle(&ex, n_fine)?;
                    if let Some(p) = oracle_path {
                        io::write_oracle(p, &points)?;
                    }
                    points
                }
            };
            Some(OracleCloud::new(points))
        }
        other => return Err(Error::Config(format!("method must be 1 or 2, got {other}"))),
    };

    // grids run in parallel, capped by FRONTWEAVE_THREADS
    let cap = thread_cap().max(1);
    let mut results: Vec<Option<Result<(f64, Vec<(SurfacePoint, f64)>)>>> =
        (0..grids.len()).map(|_| None).collect();
    let mut start = 0;
    for sizes in grids.chunks(cap) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = sizes
                .iter()
                .map(|&cells| {
                    let ex = &ex;
                    let cloud = cloud.as_ref();
                    let overrides = &overrides;
                    scope.spawn(move || run_region_errors(ex, cells, overrides, region, cloud))
                })
                .collect();
            for (k, handle) in handles.into_iter().enumerate() {
                results[start + k] = Some(handle.join().expect("sweep thread panicked"));
            }
        });
        start += sizes.len();
    }

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (&cells, result) in grids.iter().zip(results) {
        let (h, errors) = result.expect("all grids scheduled")?;
        let values: Vec<f64> = errors.iter().map(|(_, e)| *e).collect();
        let dim = region.dim();
        let (l1, linf, rel) = oracle::aggregate(&values, dim, h)?;
        pairs.push((h, l1));
        rows.push(ConvergenceRow { n: cells, h, l1, linf, slope: io::loglog_slope(&pairs) });
        let points: Vec<(f64, f64, f64, f64)> = errors
            .iter()
            .zip(&rel)
            .map(|((p, _), &r)| (p.x, p.y, p.psi, r))
            .collect();
        io::write_relative_errors(&sibling(out, &format!("points_n{cells}")), &points)?;
    }
    io::write_convergence(out, &rows)?;
    Ok(())
}

fn sibling(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_{tag}.{ext}"))
}

fn converge_patch(ex: &ExampleSpec, grids: &[usize], out: &Path) -> Result<()> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for &cells in grids {
        let (h, l1, linf) = sideways_patch_study(ex, cells, 0.5)?;
        pairs.push((h, l1));
        rows.push(ConvergenceRow { n: cells, h, l1, linf, slope: io::loglog_slope(&pairs) });
    }
    io::write_convergence(out, &rows)
}

/// The exact right-going sheet `x = psi(y, t)` of the circle-family
/// examples, used to seed and measure standalone patch studies.
pub fn exact_sheet_x(ex: &ExampleSpec, y: f64, t: f64) -> Option<f64> {
    use crate::registry::ExampleKind::*;
    let (cx, r) = match ex.kind {
        Motivation | Ex1 | Unit => (0.0, ex.radius(t)),
        Ex2 => (crate::registry::R0 * t.sinh(), ex.radius(t)),
        Ex3 => {
            let g = (10.0f64 * (t - 0.5)).atan() + std::f64::consts::FRAC_PI_2;
            (g * t, ex.radius(t))
        }
        Ex4 => (0.3, ex.radius(t)),
        Almond => return None,
    };
    if r <= 0.0 || y.abs() > r {
        return None;
    }
    Some(cx + (r * r - y * y).sqrt())
}

/// Standalone convergence study of the sideways scheme: the yt-patch of the
/// example's documented convergence domain, seeded with exact data and
/// marched at `dt = dt_frac * h`. Returns `(h, L1, Linf)` of the error
/// against the exact sheet over all computed nodes.
pub fn sideways_patch_study(
    ex: &ExampleSpec,
    cells: usize,
    dt_frac: f64,
) -> Result<(f64, f64, f64)> {
    let (z_lo, z_hi, t_lo, t_hi) = ex
        .conv_domain
        .ok_or_else(|| Error::Config(format!("{} has no convergence domain", ex.name)))?;
    let h = (z_hi - z_lo) / cells as f64;
    let z_vals: Vec<f64> = (0..=cells).map(|l| z_lo + l as f64 * h).collect();
    let row0: Vec<f64> = z_vals
        .iter()
        .map(|&y| exact_sheet_x(ex, y, t_lo).unwrap_or(f64::INFINITY))
        .collect();
    // right-going sheet: the front function's w-component points along +x
    let mut patch = SidewaysPatch::from_initial_row(
        Representation::Yt,
        -1.0,
        z_vals,
        t_lo,
        h,
        cells / 2,
        row0,
    );
    let speed = ex.speed();
    let steps = ((t_hi - t_lo) / (dt_frac * h)).ceil() as usize;
    let policy = DtPolicy { fixed_dt: Some(dt_frac * h), ..DtPolicy::default() };
    solve_patch_watched(&mut patch, &speed, steps, policy, &[]);
    let mut errors = Vec::new();
    for r in 0..patch.rows() {
        let t = patch.row_times[r];
        if t > t_hi + 1e-12 {
            break;
        }
        for l in 0..patch.cols() {
            let chi = patch.chi[r][l];
            if !chi.is_finite() {
                continue;
            }
            if let Some(exact) = exact_sheet_x(ex, patch.z_vals[l], t) {
                errors.push((chi - exact).abs());
            }
        }
    }
    let (l1, linf, _) = oracle::aggregate(&errors, 2, h)?;
    Ok((h, l1, linf))
}

/// Generates the oracle cloud: the level-set reference on `n_fine` cells,
/// zero contour sampled at every step.
pub fn generate_oracle(ex: &ExampleSpec, n_fine: usize) -> Result<Vec<[f64; 3]>> {
    let spec = crate::grid::GridSpec::from_domain(ex.domain.0, ex.domain.1, n_fine, ex.t_final)?;
    let speed = ex.speed();
    let mut max_f: f64 = 1e-9;
    for k in 0..=100 {
        let t = ex.t_final * k as f64 / 100.0;
        max_f = max_f.max(speed.local_bound([0.0, 0.0, t], (ex.domain.1 - ex.domain.0) / 2.0));
    }
    let dt = 0.25 * spec.h / max_f;
    let mut points = Vec::new();
    let ex_phi0 = |x: f64, y: f64| ex.exact_phi(x, y, 0.0).expect("t=0 valid");
    oracle::lsm_solve(&speed, ex_phi0, spec, ex.t_final, dt, |phi, t| {
        points.extend(oracle::contour_points(phi, &spec, t, spec.h));
    })?;
    Ok(points)
}

pub fn cmd_oracle(example: &str, n_fine: usize, out: &Path) -> Result<()> {
    let ex = get_example(example)?;
    let points = generate_oracle(&ex, n_fine)?;
    io::write_oracle(out, &points)
}

/// Fast built-in checks: quadrant minimization against a scan oracle,
/// scheme monotonicity under the CFL bound, and rotation round trips.
/// Returns the number of failed checks.
pub fn cmd_selftest() -> usize {
    use crate::eikonal::{quadrant_minimize, QuadrantData};
    use crate::sideways::{scheme_update, skew_map, skew_unmap};
    use rand::{Rng, SeedableRng};

    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {}", name, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_240_817);

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let q = QuadrantData {
            psi_v: rng.gen_range(0.0..1.0),
            psi_u: rng.gen_range(0.0..1.0),
            tau_v: rng.gen_range(1e-3..1.0),
            tau_u: rng.gen_range(1e-3..1.0),
        };
        let m = quadrant_minimize(&q).expect("finite data");
        let scan = crate::eikonal::scan_oracle(&q, 20_000);
        worst = worst.max((m.value - scan).abs());
    }
    check("quadrant minimization vs scan (200 cases)", worst <= 1e-6);

    let mut violations = 0;
    for _ in 0..10_000 {
        let h = rng.gen_range(0.01..0.1);
        let p = rng.gen_range(3.0..10.0);
        let c = rng.gen_range(-1.0..1.0);
        let b = c - h * rng.gen_range(-0.95 * p..0.95 * p);
        let d = c + h * rng.gen_range(-0.95 * p..0.95 * p);
        let f: f64 = rng.gen_range(-2.0..2.0);
        let a = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let dt = 0.999 * h / (2.0 * p * f.abs().max(1e-9));
        let eps = 1e-7 * h;
        let g0 = scheme_update(b, c, d, h, a, f, dt);
        let ok = scheme_update(b + eps, c, d, h, a, f, dt) >= g0 - 1e-10
            && scheme_update(b, c + eps, d, h, a, f, dt) >= g0 - 1e-10
            && scheme_update(b, c, d + eps, h, a, f, dt) >= g0 - 1e-10;
        if !ok {
            violations += 1;
        }
    }
    check("scheme monotonicity under CFL (10^4 samples)", violations == 0);

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let theta = rng.gen_range(-7.0..7.0);
        let (w, z) = skew_map(x, y, theta);
        let (xb, yb) = skew_unmap(w, z, theta);
        worst = worst.max((x - xb).abs().max((y - yb).abs()));
    }
    check("skew rotation round trip (10^3 samples)", worst <= 1e-14);

    failures
}
