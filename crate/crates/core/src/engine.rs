//! The marching engine.
//!
//! The main loop is the fast-marching skeleton: accept the band minimum,
//! refill the pile with admissible neighbours, give every pile coordinate a
//! tentative value. What makes it able to cross zero-speed regions is the
//! validation step: each tentative value is sign-tested against the
//! neighbours that produced it, and on failure the point is handed to the
//! sideways rescue, which tries up to three local representations before
//! declaring the point unreached.

use crate::eikonal::{self, AxisDir, EikNeighbors, SPEED_CUTOFF};
use crate::grid::{orient_of, GridSpec, MarchState, PointSource, SurfacePoint};
use crate::sideways::{solve_patch_watched, DtPolicy, Representation, SpeedField, WatchPoint};
use crate::weaving::{
    self, convert_to_sideways, extract_crossing_after, normal_from_fmm, segment_samples,
    sign_test_segment, Verdict,
};
use crate::{Error, Result};

/// Exact data for seeding (and optionally re-normalising) the march.
pub trait InitialData {
    /// Level value at `t = 0`; its zero set is the initial curve.
    fn phi0(&self, x: f64, y: f64) -> f64;
    /// First time in `(0, t_max]` the front traverses `(x, y)`, if any.
    fn first_crossing(&self, x: f64, y: f64, t_max: f64) -> Option<f64>;
    /// Exact space-time normal at `(x, y, t)` where available.
    fn normal(&self, x: f64, y: f64, t: f64) -> Option<[f64; 3]>;
}

impl InitialData for crate::registry::ExampleSpec {
    fn phi0(&self, x: f64, y: f64) -> f64 {
        self.exact_phi(x, y, 0.0).expect("t = 0 is always inside the exact range")
    }

    fn first_crossing(&self, x: f64, y: f64, t_max: f64) -> Option<f64> {
        crate::registry::ExampleSpec::first_crossing(self, x, y, t_max)
    }

    fn normal(&self, x: f64, y: f64, t: f64) -> Option<[f64; 3]> {
        self.exact_normal(x, y, t).ok()
    }
}

/// Engine parameters.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub grid: GridSpec,
    /// Local-grid half-width as a fraction of the cell count:
    /// `s = floor(s_fraction * N)`.
    pub s_fraction: f64,
    /// `(r1, r2)` time-step multipliers for the axis representations.
    pub r_axis: (f64, f64),
    /// `(r1, r2)` for the skewed representation.
    pub r_skew: (f64, f64),
    /// Sign-test samples per cell-length of segment.
    pub sign_test_samples: usize,
    /// Also record the interior sideways patch samples of successful rescues.
    pub record_sideways: bool,
    /// Replace computed normals with exact ones at acceptance.
    pub exact_normals: bool,
    /// Engine-level validation beyond the paper's algorithm: the arrival
    /// horizon cap, the update self-consistency check and the
    /// first-traversal orientation guard. Disabling reproduces the plain
    /// algorithm, including its documented failure modes.
    pub extra_validation: bool,
}

impl EngineConfig {
    pub fn new(grid: GridSpec) -> Self {
        EngineConfig {
            grid,
            s_fraction: 1.0 / 3.0,
            r_axis: (1.0 / 3.0, 2.0),
            r_skew: (1.0, 1.0),
            sign_test_samples: 16,
            record_sideways: false,
            exact_normals: false,
            extra_validation: true,
        }
    }

    /// Configuration for a registered example at `cells` cells per axis.
    pub fn for_example(ex: &crate::registry::ExampleSpec, cells: usize) -> Result<Self> {
        let grid = GridSpec::from_domain(ex.domain.0, ex.domain.1, cells, ex.t_final)?;
        let mut cfg = EngineConfig::new(grid);
        cfg.r_axis = ex.r_axis;
        cfg.r_skew = ex.r_skew;
        cfg.exact_normals = ex.exact_normals;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_fraction > 0.0 && self.s_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "s_fraction = {} outside (0, 1/2]",
                self.s_fraction
            )));
        }
        for (r1, r2) in [self.r_axis, self.r_skew] {
            if !(r1 > 0.0 && r2 > 0.0 && r1 <= r2) {
                return Err(Error::Config(format!("dt multipliers ({r1}, {r2}) invalid")));
            }
        }
        if self.sign_test_samples < 2 {
            return Err(Error::Config("sign_test_samples < 2".into()));
        }
        Ok(())
    }

    /// Half-width of the sideways local grid.
    pub fn patch_halfwidth(&self) -> usize {
        ((self.s_fraction * (self.grid.n - 1) as f64).floor() as usize).max(2)
    }

    /// Latest admissible arrival time: values beyond one maximal time step
    /// past the horizon are "not reached before T" and never enter the band.
    pub fn psi_cap(&self) -> f64 {
        self.grid.t_max + self.r_axis.1.max(self.r_skew.1) * self.grid.h
    }
}

/// What a rescue attempt produced.
#[derive(Debug, Clone)]
pub enum RescueOutcome {
    /// The pile point itself was reached.
    AssignedTarget(SurfacePoint),
    /// The seed point was traversed again instead.
    AssignedOrigin(SurfacePoint),
    /// Three representations exhausted; the point is not reached before `T`.
    Failed { attempts: u8 },
}

/// Everything a finished run produced.
#[derive(Debug, Default)]
pub struct RunOutput {
    /// Accepted surface samples, in acceptance order.
    pub accepted: Vec<SurfacePoint>,
    /// Interior sideways samples (only with `record_sideways`).
    pub recorded: Vec<SurfacePoint>,
    /// Rescue failures: the unreached coordinates, `psi = +inf`,
    /// `attempts = 3`.
    pub failures: Vec<SurfacePoint>,
}

/// Seeds the narrow band with exact data on every grid point within one cell
/// of the initial curve that the front traverses before `T`.
pub fn initialize(
    init: &dyn InitialData,
    speed: &dyn SpeedField,
    config: &EngineConfig,
) -> Result<MarchState> {
    config.validate()?;
    let spec = config.grid;
    let mut state = MarchState::new(spec);
    let source = if speed.time_dependent() { PointSource::Tfmm } else { PointSource::Fmm };
    for i in 0..spec.n {
        for j in 0..spec.n {
            let (x, y) = (spec.x(i), spec.y(j));
            let sd = init.phi0(x, y);
            state.set_initial_side(i, j, if sd > 0.0 { 1 } else if sd < 0.0 { -1 } else { 0 });
            if sd.abs() > spec.h {
                continue;
            }
            let Some(psi) = init.first_crossing(x, y, spec.t_max) else {
                continue;
            };
            let Some(n3) = init.normal(x, y, psi) else {
                continue;
            };
            state.band_insert(SurfacePoint::new(i, j, x, y, psi, n3, source));
        }
    }
    if state.band_is_empty() {
        return Err(Error::CurveOffGrid);
    }
    Ok(state)
}

/// Admits the 4-neighbours of a freshly accepted point into the pile.
///
/// A neighbour is admitted when it lies on the side the front is moving
/// toward (`sign(v . n2) = sign(F)`, zeros passing), and it is either not yet
/// finalised or was last traversed with the opposite orientation.
pub fn update_pile(state: &mut MarchState, p_ab: &SurfacePoint, speed: &dyn SpeedField) {
    let f = speed.eval(p_ab.x, p_ab.y, p_ab.psi);
    let spec = state.spec;
    for (a, b) in spec.neighbors(p_ab.i, p_ab.j).collect::<Vec<_>>() {
        let v = (spec.x(a) - p_ab.x, spec.y(b) - p_ab.y);
        let dot = v.0 * p_ab.normal2[0] + v.1 * p_ab.normal2[1];
        if !(dot == 0.0 || f == 0.0 || dot.signum() == f.signum()) {
            continue;
        }
        if state.times_traversed(a, b) > 0 {
            let q = state.latest_accepted(a, b).expect("traversed");
            if q.orient != p_ab.orient {
                state.pile.push((a, b));
            }
        } else {
            // far or still tentative: always worth a recompute
            state.pile.push((a, b));
        }
    }
}

/// An eikonal update must satisfy its own PDE: the implied slope times the
/// speed at the arrival point is 1. Updates violating this by more than
/// `SLOPE_CONSISTENCY` freeze the slowness on the wrong side of a stall and
/// are routed to the sideways rescue instead.
const SLOPE_CONSISTENCY: f64 = 3.0;

fn update_is_consistent(
    psi: f64,
    used: &[(AxisDir, f64)],
    h: f64,
    x: f64,
    y: f64,
    speed: &dyn SpeedField,
) -> bool {
    let slope2: f64 = used.iter().map(|&(_, v)| ((psi - v) / h).powi(2)).sum();
    let f = speed.eval(x, y, psi).abs();
    slope2.sqrt() * f <= SLOPE_CONSISTENCY
}

/// A one-sided update determines only one slope component; zeroing the other
/// one yields tangent-dominated normals at stall rings, whose pile admissions
/// cascade junk outward. The sheet direction is known from the reference
/// point, so 1D updates inherit its spatial direction instead.
fn directed_1d_normal(
    psi: f64,
    used: &[(AxisDir, f64)],
    h: f64,
    reference: &SurfacePoint,
    orient: i8,
) -> Option<[f64; 3]> {
    if used.len() != 1 {
        return None;
    }
    let dir = reference.normal2;
    if dir[0] == 0.0 && dir[1] == 0.0 {
        return None;
    }
    let slope = ((psi - used[0].1) / h).abs();
    Some(crate::grid::normalize3([
        slope * dir[0],
        slope * dir[1],
        -(orient as f64),
    ]))
}

fn fmm_tentative(
    state: &MarchState,
    i: usize,
    j: usize,
    neigh: &[(AxisDir, &SurfacePoint)],
    speed: &dyn SpeedField,
    reference: &SurfacePoint,
    orient: i8,
) -> Result<(f64, [f64; 3], Vec<(AxisDir, f64)>)> {
    let spec = &state.spec;
    let h = spec.h;
    let (x, y) = (spec.x(i), spec.y(j));
    let f = speed.eval(x, y, 0.0);
    if f.abs() < SPEED_CUTOFF {
        return Err(Error::ZeroSpeed);
    }
    let value = |dir| {
        neigh
            .iter()
            .find(|(d, _)| *d == dir)
            .map(|(_, p)| p.psi)
            .unwrap_or(f64::INFINITY)
    };
    let (um, up) = (value(AxisDir::XMinus), value(AxisDir::XPlus));
    let (vm, vp) = (value(AxisDir::YMinus), value(AxisDir::YPlus));
    let (u, u_dir) = if um <= up { (um, AxisDir::XMinus) } else { (up, AxisDir::XPlus) };
    let (v, v_dir) = if vm <= vp { (vm, AxisDir::YMinus) } else { (vp, AxisDir::YPlus) };
    let psi = eikonal::fmm_update(u, v, h, f)?;
    let tau = h / f.abs();
    let mut used: Vec<(AxisDir, f64)> = Vec::new();
    if u.is_finite() && v.is_finite() && (u - v).abs() < tau {
        used.push((u_dir, u));
        used.push((v_dir, v));
    } else if u <= v {
        used.push((u_dir, u));
    } else {
        used.push((v_dir, v));
    }
    let n3 = directed_1d_normal(psi, &used, h, reference, orient)
        .unwrap_or_else(|| normal_from_fmm(psi, &used, h, orient));
    Ok((psi, n3, used))
}

/// Gives every pile coordinate a tentative value, sign-testing each one and
/// invoking the sideways rescue on failure. Returns the rescue failures.
pub fn update_narrow_band(
    state: &mut MarchState,
    p_ab: &SurfacePoint,
    speed: &dyn SpeedField,
    config: &EngineConfig,
    recorded: &mut Vec<SurfacePoint>,
) -> Result<Vec<SurfacePoint>> {
    let mut failures = Vec::new();
    let pile = std::mem::take(&mut state.pile);
    for (i, j) in pile {
        let neigh = weaving::neigh_eik(state, i, j, p_ab);
        if neigh.is_empty() {
            continue;
        }
        let spec = state.spec;
        let (x, y) = (spec.x(i), spec.y(j));

        let tentative: Option<(f64, [f64; 3], Vec<(AxisDir, f64)>)> = if speed.time_dependent() {
            let mut nb = EikNeighbors::none();
            for (dir, p) in &neigh {
                match dir {
                    AxisDir::XMinus => nb.u_minus = p.psi,
                    AxisDir::XPlus => nb.u_plus = p.psi,
                    AxisDir::YMinus => nb.v_minus = p.psi,
                    AxisDir::YPlus => nb.v_plus = p.psi,
                }
            }
            let r = eikonal::tfmm_update(x, y, spec.h, &nb, speed, p_ab.orient);
            if r.psi.is_finite() {
                let used: Vec<_> = r.used.iter().flatten().copied().collect();
                let n3 = directed_1d_normal(r.psi, &used, spec.h, p_ab, p_ab.orient)
                    .unwrap_or(r.normal3);
                Some((r.psi, n3, used))
            } else {
                None
            }
        } else {
            match fmm_tentative(state, i, j, &neigh, speed, p_ab, p_ab.orient) {
                Ok((psi, n3, used)) if psi.is_finite() => Some((psi, n3, used)),
                _ => None,
            }
        };

        // validate against every contributing neighbour
        let mut failed = tentative.is_none();
        if let Some((psi, _, used)) = &tentative {
            if config.extra_validation
                && speed.time_dependent()
                && !update_is_consistent(*psi, used, spec.h, x, y, speed)
            {
                failed = true;
            }
        }
        if let Some((psi, _, _)) = tentative {
            for (_, p) in &neigh {
                let seg_samples = segment_samples(
                    [x, y, psi],
                    [p.x, p.y, p.psi],
                    spec.h,
                    config.sign_test_samples,
                );
                let r = sign_test_segment([x, y, psi], [p.x, p.y, p.psi], speed, seg_samples);
                match r.verdict {
                    Verdict::Pass => {}
                    Verdict::Fail => failed = true,
                    Verdict::Refine => {
                        return Err(Error::RefineNeeded {
                            count: r.d,
                            x0: x,
                            y0: y,
                            t0: psi,
                            x1: p.x,
                            y1: p.y,
                            t1: p.psi,
                        })
                    }
                }
            }
        }

        if !failed {
            let (psi, n3, _) = tentative.as_ref().expect("checked above");
            // a first traversal must cross from the cell's initial side;
            // anything else is geometric nonsense and goes to the rescue
            let orient_ok = !config.extra_validation
                || state
                    .required_first_orient(i, j)
                    .map_or(true, |req| orient_of(*n3) == req);
            if orient_ok {
                if !config.extra_validation || *psi <= config.psi_cap() {
                    let source =
                        if speed.time_dependent() { PointSource::Tfmm } else { PointSource::Fmm };
                    state.band_insert_min(SurfacePoint::new(i, j, x, y, *psi, *n3, source));
                }
                continue;
            }
        }

        match rescue(state, p_ab, (i, j), speed, config, recorded) {
            RescueOutcome::AssignedTarget(p) | RescueOutcome::AssignedOrigin(p) => {
                state.band_insert_min(p);
            }
            RescueOutcome::Failed { attempts } => {
                let mut marker = SurfacePoint::new(
                    i,
                    j,
                    x,
                    y,
                    f64::INFINITY,
                    [0.0, 0.0, -1.0],
                    PointSource::SidewaysSkew,
                );
                marker.attempts = attempts;
                failures.push(marker);
            }
        }
    }
    Ok(failures)
}

fn rep_source(rep: Representation) -> PointSource {
    match rep {
        Representation::Yt => PointSource::SidewaysYt,
        Representation::Xt => PointSource::SidewaysXt,
        Representation::Skew(_) => PointSource::SidewaysSkew,
    }
}

/// The three-attempt sideways rescue for a sign-test failure at `target`.
///
/// The first representation follows the dominant component of the seed's
/// spatial normal, the second is the other axis, the third is skewed to the
/// seed's polar angle. Each attempt converts the accepted data, marches the
/// patch (watching both coordinates so the loop can exit early), and asks
/// first for the target, then for the seed coordinate itself.
pub fn rescue(
    state: &MarchState,
    p_ab: &SurfacePoint,
    target: (usize, usize),
    speed: &dyn SpeedField,
    config: &EngineConfig,
    recorded: &mut Vec<SurfacePoint>,
) -> RescueOutcome {
    let spec = state.spec;
    let (ti, tj) = target;
    let target_xy = (spec.x(ti), spec.y(tj));
    let origin_xy = (p_ab.x, p_ab.y);
    let s = config.patch_halfwidth();

    let first = if p_ab.normal3[0].abs() > p_ab.normal3[1].abs() {
        Representation::Yt
    } else {
        Representation::Xt
    };
    let second =
        if first == Representation::Yt { Representation::Xt } else { Representation::Yt };
    let third = Representation::Skew(p_ab.y.atan2(p_ab.x));

    for (attempt, rep) in [first, second, third].into_iter().enumerate() {
        let attempt_no = (attempt + 1) as u8;
        let Ok(mut patch) = convert_to_sideways(state, p_ab, rep, s, speed) else {
            continue;
        };
        if patch.a == 0.0 {
            continue;
        }
        let (r1, r2) = match rep {
            Representation::Skew(_) => config.r_skew,
            _ => config.r_axis,
        };
        let start_switched = patch.data_switched(speed);
        let policy = DtPolicy { r1, r2, delta: 1.0, start_switched, fixed_dt: None };

        let mut watch = Vec::new();
        let (wt, zt) = rep.to_wz(target_xy.0, target_xy.1);
        if let Some(col) = nearest_col(&patch.z_vals, patch.h, zt) {
            watch.push(WatchPoint { col, w: wt, t_after: f64::NEG_INFINITY });
        }
        let (wo, zo) = rep.to_wz(origin_xy.0, origin_xy.1);
        if let Some(col) = nearest_col(&patch.z_vals, patch.h, zo) {
            watch.push(WatchPoint { col, w: wo, t_after: p_ab.psi });
        }

        let r_max = 3 * s;
        solve_patch_watched(&mut patch, speed, r_max, policy, &watch);

        let cap = if config.extra_validation { config.psi_cap() } else { f64::INFINITY };
        let hit_target = extract_crossing_after(&patch, target_xy, f64::NEG_INFINITY)
            .filter(|(psi, _)| *psi <= cap)
            .filter(|(_, n3)| {
                !config.extra_validation
                    || state
                        .required_first_orient(ti, tj)
                        .map_or(true, |req| orient_of(*n3) == req)
            });
        let hit_origin = extract_crossing_after(&patch, origin_xy, p_ab.psi)
            .filter(|(psi, _)| *psi <= cap);

        if config.record_sideways && (hit_target.is_some() || hit_origin.is_some()) {
            record_patch(&patch, spec, attempt_no, recorded);
        }

        if let Some((psi, n3)) = hit_target {
            let mut p =
                SurfacePoint::new(ti, tj, target_xy.0, target_xy.1, psi, n3, rep_source(rep));
            p.attempts = attempt_no;
            return RescueOutcome::AssignedTarget(p);
        }
        if let Some((psi, n3)) = hit_origin {
            let mut p = SurfacePoint::new(
                p_ab.i,
                p_ab.j,
                origin_xy.0,
                origin_xy.1,
                psi,
                n3,
                rep_source(rep),
            );
            p.attempts = attempt_no;
            return RescueOutcome::AssignedOrigin(p);
        }
    }
    RescueOutcome::Failed { attempts: 3 }
}

fn nearest_col(z_vals: &[f64], h: f64, z: f64) -> Option<usize> {
    if z_vals.is_empty() {
        return None;
    }
    let rel = (z - z_vals[0]) / h;
    if rel < -0.5 || rel > z_vals.len() as f64 - 0.5 {
        return None;
    }
    Some((rel.round().max(0.0) as usize).min(z_vals.len() - 1))
}

/// Appends the interior patch samples (rows past the converted data) to
/// the recorded list.
fn record_patch(
    patch: &crate::sideways::SidewaysPatch,
    spec: GridSpec,
    attempts: u8,
    recorded: &mut Vec<SurfacePoint>,
) {
    for r in 1..patch.rows() {
        let t = patch.row_times[r];
        for l in 1..patch.cols().saturating_sub(1) {
            if !patch.chi[r][l].is_finite() {
                continue;
            }
            let dt = patch.row_times[r] - patch.row_times[r - 1];
            let Ok(n3) = weaving::normal_from_sideways(patch, l, r, patch.h, dt) else {
                continue;
            };
            let (x, y) = patch.node_xy(l, r);
            let i = ((x - spec.x_min) / spec.h).round();
            let j = ((y - spec.y_min) / spec.h).round();
            if i < 0.0 || j < 0.0 || i >= spec.n as f64 || j >= spec.n as f64 {
                continue;
            }
            let mut p =
                SurfacePoint::new(i as usize, j as usize, x, y, t, n3, rep_source(patch.rep));
            p.attempts = attempts;
            recorded.push(p);
        }
    }
}

/// Runs the full march: accept, update pile, update band, until the narrow
/// band empties. The `T` horizon guard guarantees termination.
pub fn run(
    init: &dyn InitialData,
    speed: &dyn SpeedField,
    config: &EngineConfig,
) -> Result<RunOutput> {
    let mut state = initialize(init, speed, config)?;
    let mut out = RunOutput::default();
    let cap = 32 * state.spec.n * state.spec.n;
    while !state.band_is_empty() {
        if out.accepted.len() > cap {
            return Err(Error::Config(
                "march did not terminate within the acceptance cap".into(),
            ));
        }
        let mut p = state.nb_extract_min()?;
        if config.exact_normals {
            if let Some(n3) = init.normal(p.x, p.y, p.psi) {
                p.normal3 = n3;
                p.normal2 = crate::grid::planar_normal(n3);
                p.orient = orient_of(n3);
            }
        }
        let p = state.accept(p).clone();
        out.accepted.push(p.clone());
        if p.psi < state.spec.t_max {
            update_pile(&mut state, &p, speed);
        }
        let mut failures = update_narrow_band(&mut state, &p, speed, config, &mut out.recorded)?;
        out.failures.append(&mut failures);
    }
    Ok(out)
}

/// The classical fast-marching reference: the same loop with the sign-test
/// and rescue layers disabled. With a speed bounded away from zero and no
/// time dependence, [`run`] must reproduce this bit for bit.
pub fn run_classical(
    init: &dyn InitialData,
    speed: &dyn SpeedField,
    config: &EngineConfig,
) -> Result<RunOutput> {
    let mut state = initialize(init, speed, config)?;
    let mut out = RunOutput::default();
    while !state.band_is_empty() {
        let p = state.nb_extract_min()?;
        let p = state.accept(p).clone();
        out.accepted.push(p.clone());
        if p.psi < state.spec.t_max {
            update_pile(&mut state, &p, speed);
        }
        let pile = std::mem::take(&mut state.pile);
        for (i, j) in pile {
            let neigh = weaving::neigh_eik(&state, i, j, &p);
            if neigh.is_empty() {
                continue;
            }
            if let Ok((psi, n3, _)) = fmm_tentative(&state, i, j, &neigh, speed, &p, p.orient) {
                if psi.is_finite() && psi <= config.psi_cap() {
                    let (x, y) = (state.spec.x(i), state.spec.y(j));
                    state.band_insert_min(SurfacePoint::new(i, j, x, y, psi, n3, PointSource::Fmm));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::get_example;

    fn unit_config(cells: usize) -> (crate::registry::ExampleSpec, EngineConfig) {
        let ex = get_example("unit").unwrap();
        let cfg = EngineConfig::for_example(&ex, cells).unwrap();
        (ex, cfg)
    }

    #[test]
    fn config_validation() {
        let (_, mut cfg) = unit_config(40);
        cfg.s_fraction = 0.7;
        assert!(cfg.validate().is_err());
        cfg.s_fraction = 1.0 / 3.0;
        cfg.r_axis = (2.0, 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn initialize_forms_band_annulus() {
        let ex = get_example("ex1").unwrap();
        let cfg = EngineConfig::for_example(&ex, 80).unwrap();
        let state = initialize(&ex, &ex.speed(), &cfg).unwrap();
        // every seed lies within one cell of the initial circle
        assert!(state.band_len() > 40);
        // both sides of the circle are represented (inside seeds are crossed
        // during the contraction phase, outside during expansion)
        let spec = cfg.grid;
        let mut inside = 0;
        let mut outside = 0;
        for i in 0..spec.n {
            for j in 0..spec.n {
                if let Some(p) = state.band_entry(i, j) {
                    let sd = ex.phi0(p.x, p.y);
                    assert!(sd.abs() <= spec.h);
                    if sd < 0.0 {
                        inside += 1;
                    } else {
                        outside += 1;
                    }
                }
            }
        }
        assert!(inside > 0 && outside > 0, "inside {inside}, outside {outside}");
    }

    #[test]
    fn initialize_two_circles_two_annuli() {
        let ex = get_example("ex4").unwrap();
        let cfg = EngineConfig::for_example(&ex, 80).unwrap();
        let state = initialize(&ex, &ex.speed(), &cfg).unwrap();
        let spec = cfg.grid;
        let (mut left, mut right) = (0, 0);
        for i in 0..spec.n {
            for j in 0..spec.n {
                if state.band_entry(i, j).is_some() {
                    if spec.x(i) < 0.0 {
                        left += 1;
                    } else {
                        right += 1;
                    }
                }
            }
        }
        assert!(left > 10 && right > 10);
    }

    #[test]
    fn initialize_rejects_curve_off_grid() {
        struct OffGrid;
        impl InitialData for OffGrid {
            fn phi0(&self, _: f64, _: f64) -> f64 {
                1.0 // never within a cell of zero
            }
            fn first_crossing(&self, _: f64, _: f64, _: f64) -> Option<f64> {
                None
            }
            fn normal(&self, _: f64, _: f64, _: f64) -> Option<[f64; 3]> {
                None
            }
        }
        let (_, cfg) = unit_config(20);
        assert!(matches!(
            initialize(&OffGrid, &get_example("unit").unwrap().speed(), &cfg),
            Err(Error::CurveOffGrid)
        ));
    }

    #[test]
    fn pile_admission_rules() {
        let (ex, cfg) = unit_config(20);
        let speed = ex.speed();
        let spec = cfg.grid;
        let mut state = MarchState::new(spec);
        // accepted point moving outward along +x (F > 0, orient +1)
        let (i, j) = (12, 10);
        let p = SurfacePoint::new(
            i,
            j,
            spec.x(i),
            spec.y(j),
            0.05,
            [1.0, 0.0, -0.7],
            PointSource::Fmm,
        );
        let p = state.accept(p).clone();
        update_pile(&mut state, &p, &speed);
        // the strictly inside neighbour (v . n2 < 0) must not be piled
        assert!(!state.pile.contains(&(i - 1, j)));
        // the outward far neighbour is piled
        assert!(state.pile.contains(&(i + 1, j)));

        // a neighbour already traversed with the same orientation is skipped
        state.pile.clear();
        let q = SurfacePoint::new(
            i + 1,
            j,
            spec.x(i + 1),
            spec.y(j),
            0.02,
            [1.0, 0.0, -0.7],
            PointSource::Fmm,
        );
        state.accept(q);
        update_pile(&mut state, &p, &speed);
        assert!(!state.pile.contains(&(i + 1, j)));

        // flip its orientation and it becomes admissible again
        let mut q2 = SurfacePoint::new(
            i + 1,
            j,
            spec.x(i + 1),
            spec.y(j),
            0.08,
            [1.0, 0.0, 0.7],
            PointSource::Fmm,
        );
        q2.orient = -1;
        state.accept(q2);
        state.pile.clear();
        update_pile(&mut state, &p, &speed);
        assert!(state.pile.contains(&(i + 1, j)));
    }

    #[test]
    fn unit_speed_march_matches_distance() {
        let (ex, cfg) = unit_config(80);
        let out = run(&ex, &ex.speed(), &cfg).unwrap();
        assert!(out.failures.is_empty());
        let h = cfg.grid.h;
        for p in &out.accepted {
            let exact = p.x.hypot(p.y) - 0.25;
            assert!(
                (p.psi - exact).abs() <= 2.0 * h,
                "({}, {}): psi {} vs exact {}",
                p.x,
                p.y,
                p.psi,
                exact
            );
        }
        // nothing inside the circle is ever reached under F = 1
        for p in &out.accepted {
            assert!(p.x.hypot(p.y) >= 0.25 - 2.0 * h);
        }
    }

    #[test]
    fn augmented_run_is_bitwise_classical_for_unit_speed() {
        let (ex, cfg) = unit_config(60);
        let speed = ex.speed();
        let a = run(&ex, &speed, &cfg).unwrap();
        let b = run_classical(&ex, &speed, &cfg).unwrap();
        assert_eq!(a.accepted.len(), b.accepted.len());
        for (p, q) in a.accepted.iter().zip(&b.accepted) {
            assert_eq!((p.i, p.j), (q.i, q.j));
            assert_eq!(p.psi.to_bits(), q.psi.to_bits());
        }
    }

    #[test]
    fn acceptance_normals_are_unit_and_oriented() {
        let ex = get_example("ex1").unwrap();
        let cfg = EngineConfig::for_example(&ex, 40).unwrap();
        let out = run(&ex, &ex.speed(), &cfg).unwrap();
        for p in &out.accepted {
            let len =
                (p.normal3[0].powi(2) + p.normal3[1].powi(2) + p.normal3[2].powi(2)).sqrt();
            assert!((len - 1.0).abs() < 1e-9);
            assert!(p.orient == 1 || p.orient == -1);
            assert!(p.psi <= cfg.psi_cap(), "psi {} beyond cap", p.psi);
        }
    }

    #[test]
    fn ex1_march_traverses_points_twice() {
        let ex = get_example("ex1").unwrap();
        let cfg = EngineConfig::for_example(&ex, 60).unwrap();
        let out = run(&ex, &ex.speed(), &cfg).unwrap();
        use std::collections::HashMap;
        let mut per_cell: HashMap<(usize, usize), Vec<&SurfacePoint>> = HashMap::new();
        for p in &out.accepted {
            per_cell.entry((p.i, p.j)).or_default().push(p);
        }
        let twice = per_cell.values().filter(|v| v.len() >= 2).count();
        assert!(twice > 0, "no re-traversals found");
        for pts in per_cell.values() {
            assert!(pts.len() <= 2, "more than two traversals at a cell");
            if pts.len() == 2 {
                assert_ne!(pts[0].orient, pts[1].orient);
                assert!(pts[0].psi <= pts[1].psi);
            }
        }
    }
}
