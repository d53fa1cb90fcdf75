//! Local sideways initial value problems.
//!
//! Near points where the speed vanishes, the arrival-time picture breaks down
//! and the surface is described instead as the graph of a function of one
//! spatial coordinate and time: `x = ψ(y, t)`, `y = ψ(x, t)`, or a rotated
//! (skewed) variant. Each such function satisfies
//!
//! ψ_t + a F √(1 + ψ_z²) = 0
//!
//! with `a ∈ {-1, +1}` fixed by the local orientation. The discretization is
//! a first-order monotone scheme: the slope term is assembled from one-sided
//! differences selected Godunov-style by the switch `α = sign(aF)`, and the
//! time step obeys the CFL and stability bounds below. Columns whose stencil
//! touches an unknown (`+inf`) value cannot be updated, so the computed
//! domain shrinks from its ends as the march proceeds.

use crate::{Error, Result};

/// An evaluatable speed `F(x, y, t)` with the Lipschitz constant and the
/// local bound query used by the CFL logic.
pub trait SpeedField: Sync {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64;

    /// Lipschitz constant of `F` over the run's domain of interest.
    fn lipschitz(&self) -> f64;

    /// Lipschitz constant restricted to a time window; the stability bound
    /// only needs the constant on the patch being marched. Defaults to the
    /// global constant.
    fn lipschitz_window(&self, _t_lo: f64, _t_hi: f64) -> f64 {
        self.lipschitz()
    }

    /// `M = sup |F|` over the ball of radius `rho` around `p = (x, y, t)`.
    /// Must dominate `|F(p)|`.
    fn local_bound(&self, p: [f64; 3], rho: f64) -> f64;

    /// Whether `F` genuinely depends on `t`; selects the marching update.
    fn time_dependent(&self) -> bool;
}

/// Speed field defined by closures; the local bound is taken by sampling the
/// ball and padding with `K * rho`.
pub struct FnSpeed<F: Fn(f64, f64, f64) -> f64 + Sync> {
    pub f: F,
    pub k: f64,
    pub time_dep: bool,
}

impl<F: Fn(f64, f64, f64) -> f64 + Sync> SpeedField for FnSpeed<F> {
    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.f)(x, y, t)
    }

    fn lipschitz(&self) -> f64 {
        self.k
    }

    fn local_bound(&self, p: [f64; 3], rho: f64) -> f64 {
        let mut m = (self.f)(p[0], p[1], p[2]).abs();
        for &(dx, dy, dt) in &[
            (rho, 0.0, 0.0),
            (-rho, 0.0, 0.0),
            (0.0, rho, 0.0),
            (0.0, -rho, 0.0),
            (0.0, 0.0, rho),
            (0.0, 0.0, -rho),
        ] {
            let t = (p[2] + dt).max(0.0);
            m = m.max((self.f)(p[0] + dx, p[1] + dy, t).abs());
        }
        m + self.k * rho
    }

    fn time_dependent(&self) -> bool {
        self.time_dep
    }
}

/// Which graph describes the surface locally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Representation {
    /// `x = ψ(y, t)`; patch columns run along `y`.
    Yt,
    /// `y = ψ(x, t)`; patch columns run along `x`.
    Xt,
    /// Rotated frame `w = ψ(z, t)` where `w` is the direction at polar angle
    /// `theta`.
    Skew(f64),
}

impl Representation {
    /// Rotation angle identifying this representation: `Yt` is `θ = 0`, `Xt`
    /// is `θ = π/2`.
    pub fn theta(&self) -> f64 {
        match self {
            Representation::Yt => 0.0,
            Representation::Xt => std::f64::consts::FRAC_PI_2,
            Representation::Skew(theta) => *theta,
        }
    }

    /// `(x, y)` to patch coordinates `(w, z)`.
    pub fn to_wz(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Representation::Yt => (x, y),
            Representation::Xt => (y, -x),
            Representation::Skew(theta) => skew_map(x, y, *theta),
        }
    }

    /// Patch coordinates `(w, z)` back to `(x, y)`.
    pub fn to_xy(&self, w: f64, z: f64) -> (f64, f64) {
        match self {
            Representation::Yt => (w, z),
            Representation::Xt => (-z, w),
            Representation::Skew(theta) => skew_unmap(w, z, *theta),
        }
    }
}

/// Rigid rotation taking the direction at polar angle `theta` onto the first
/// axis: `w = x cosθ + y sinθ`, `z = -x sinθ + y cosθ`.
pub fn skew_map(x: f64, y: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (x * c + y * s, -x * s + y * c)
}

/// Inverse of [`skew_map`].
pub fn skew_unmap(w: f64, z: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (w * c - z * s, w * s + z * c)
}

/// Godunov upwind selection of the squared slope, switched by `alpha`.
///
/// `D±` are the one-sided differences at `l`; the caller guarantees that
/// `chi_row[l-1..=l+1]` are finite.
pub fn upw(chi_row: &[f64], l: usize, h: f64, alpha: i8) -> f64 {
    let dp = (chi_row[l + 1] - chi_row[l]) / h;
    let dm = (chi_row[l] - chi_row[l - 1]) / h;
    let a = alpha as f64;
    a.max(0.0) * (dp.min(0.0).powi(2) + dm.max(0.0).powi(2))
        - a.min(0.0) * (dp.max(0.0).powi(2) + dm.min(0.0).powi(2))
}

/// One node of the monotone scheme: the value at the next time level given
/// the three-point stencil `(b, c, d) = (χ_{l-1}, χ_l, χ_{l+1})` and the
/// speed `f` frozen at the stencil point.
pub fn scheme_update(b: f64, c: f64, d: f64, h: f64, a: f64, f: f64, dt: f64) -> f64 {
    let alpha = if a * f > 0.0 {
        1
    } else if a * f < 0.0 {
        -1
    } else {
        0
    };
    let row = [b, c, d];
    c - a * dt * f * (1.0 + upw(&row, 1, h, alpha)).sqrt()
}

/// Largest stable time step for slope bound `p`, local speed bound `m`,
/// Lipschitz constant `k` and contraction parameter `delta`, with a 0.9
/// safety factor. The advection bound drops out when `m = 0`, as does the
/// Lipschitz bound when `k = 0`.
pub fn cfl_dt(p: f64, m: f64, k: f64, delta: f64, h: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::InvalidP(p));
    }
    let advection = if m > 0.0 { h / (2.0 * p * m) } else { f64::INFINITY };
    let lipschitz = if k > 0.0 {
        (p - 2.0) / (k * p * (1.0 + 2.0 * p * p).sqrt())
    } else {
        f64::INFINITY
    };
    let contraction = if delta > 0.0 { 2.0 / (p * delta) } else { f64::INFINITY };
    Ok(0.9 * advection.min(lipschitz).min(contraction))
}

/// Time-step multipliers: `dt = min(cfl, r1 * h)` until `a F` changes sign
/// locally, `min(cfl, r2 * h)` afterwards.
#[derive(Debug, Clone, Copy)]
pub struct DtPolicy {
    pub r1: f64,
    pub r2: f64,
    pub delta: f64,
    /// Start directly in the `r2` regime (the speed already changed sign
    /// before the patch's first row).
    pub start_switched: bool,
    /// March with exactly this step, ignoring the regime logic (used by the
    /// standalone convergence studies).
    pub fixed_dt: Option<f64>,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy { r1: 1.0 / 3.0, r2: 2.0, delta: 1.0, start_switched: false, fixed_dt: None }
    }
}

/// A local `(z, t)` patch holding the discrete front function `χ`.
#[derive(Debug, Clone)]
pub struct SidewaysPatch {
    pub rep: Representation,
    /// Orientation sign of the representation.
    pub a: f64,
    /// Column positions, spaced `h`.
    pub z_vals: Vec<f64>,
    pub t0: f64,
    pub h: f64,
    /// Half-width of the local grid; `z_vals.len() <= 2s + 1`.
    pub s: usize,
    /// `chi[r][l]`, row 0 at `t0`.
    pub chi: Vec<Vec<f64>>,
    /// `row_times[r]` is the time of row `r`.
    pub row_times: Vec<f64>,
    pub dt_schedule: Vec<f64>,
    /// Per-column boundary samples `(t, w)` from the converted data, sorted
    /// by `t`; consulted for fresh boundary values during the march.
    pub boundary: Vec<Vec<(f64, f64)>>,
}

impl SidewaysPatch {
    /// A patch seeded with an explicit initial row (used directly by the
    /// standalone convergence studies).
    pub fn from_initial_row(
        rep: Representation,
        a: f64,
        z_vals: Vec<f64>,
        t0: f64,
        h: f64,
        s: usize,
        row0: Vec<f64>,
    ) -> Self {
        assert_eq!(z_vals.len(), row0.len());
        let cols = z_vals.len();
        SidewaysPatch {
            rep,
            a,
            z_vals,
            t0,
            h,
            s,
            chi: vec![row0],
            row_times: vec![t0],
            dt_schedule: Vec::new(),
            boundary: vec![Vec::new(); cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.z_vals.len()
    }

    pub fn rows(&self) -> usize {
        self.chi.len()
    }

    /// Spatial point of node `(l, r)`.
    pub fn node_xy(&self, l: usize, r: usize) -> (f64, f64) {
        self.rep.to_xy(self.chi[r][l], self.z_vals[l])
    }

    fn eval_speed(&self, speed: &dyn SpeedField, w: f64, l: usize, t: f64) -> f64 {
        let (x, y) = self.rep.to_xy(w, self.z_vals[l]);
        speed.eval(x, y, t)
    }

    /// Fresh boundary value at column `l`, time `t`: linear interpolation
    /// between bracketing samples only.
    pub fn boundary_value(&self, l: usize, t: f64) -> Option<f64> {
        let samples = &self.boundary[l];
        if samples.is_empty() {
            return None;
        }
        let after = samples.partition_point(|&(ts, _)| ts < t);
        if after == 0 {
            // before all data; exact hit on the first sample still counts
            let (t0, w0) = samples[0];
            return (t0 == t).then_some(w0);
        }
        if after == samples.len() {
            let (t1, w1) = samples[after - 1];
            return (t1 == t).then_some(w1);
        }
        let (ta, wa) = samples[after - 1];
        let (tb, wb) = samples[after];
        if tb == ta {
            return Some(wa);
        }
        Some(wa + (wb - wa) * (t - ta) / (tb - ta))
    }

    /// Slope bound for the CFL logic: the largest finite one-sided slope of
    /// the row, clamped to `[3, 2/h]`.
    pub fn slope_bound(&self, row: &[f64]) -> f64 {
        let mut p: f64 = 0.0;
        for l in 1..row.len() {
            if row[l].is_finite() && row[l - 1].is_finite() {
                p = p.max(((row[l] - row[l - 1]) / self.h).abs());
            }
        }
        p.clamp(3.0, (2.0 / self.h).max(3.0))
    }

    /// Largest local speed bound over the finite nodes of the row.
    pub fn speed_bound(&self, speed: &dyn SpeedField, row: &[f64], t: f64) -> f64 {
        let mut m: f64 = 0.0;
        for (l, &w) in row.iter().enumerate() {
            if w.is_finite() {
                let (x, y) = self.rep.to_xy(w, self.z_vals[l]);
                m = m.max(speed.local_bound([x, y, t], 2.0 * self.h));
            }
        }
        m
    }

    /// Whether the speed changes sign across the time span of the converted
    /// boundary data (the patch then starts in the post-switch regime).
    pub fn data_switched(&self, speed: &dyn SpeedField) -> bool {
        let center = self.cols() / 2;
        let mut order: Vec<usize> = (0..self.cols()).collect();
        order.sort_by_key(|&l| (l as isize - center as isize).unsigned_abs());
        for l in order {
            let samples = &self.boundary[l];
            if samples.len() < 2 {
                continue;
            }
            let (t0, w0) = samples[0];
            let (t1, w1) = samples[samples.len() - 1];
            let (x0, y0) = self.rep.to_xy(w0, self.z_vals[l]);
            let (x1, y1) = self.rep.to_xy(w1, self.z_vals[l]);
            let f0 = speed.eval(x0, y0, t0);
            let f1 = speed.eval(x1, y1, t1);
            if f0 != 0.0 || f1 != 0.0 {
                return f0 * f1 < 0.0;
            }
        }
        false
    }

    /// Sign of `a F` at the innermost finite node of the row, used to detect
    /// the local sign change that switches the dt regime.
    fn drive_sign(&self, speed: &dyn SpeedField, row: &[f64], t: f64) -> Option<f64> {
        let center = self.cols() / 2;
        let mut order: Vec<usize> = (0..self.cols()).collect();
        order.sort_by_key(|&l| (l as isize - center as isize).unsigned_abs());
        for l in order {
            if row[l].is_finite() {
                let f = self.eval_speed(speed, row[l], l, t);
                if f != 0.0 {
                    return Some((self.a * f).signum());
                }
            }
        }
        None
    }
}

/// Advances row `r` of the patch by `dt`: interior columns with a fully
/// finite stencil get the monotone update, every other column gets `+inf`.
pub fn sideways_step(patch: &SidewaysPatch, speed: &dyn SpeedField, r: usize, dt: f64) -> Vec<f64> {
    let row = &patch.chi[r];
    let t = patch.row_times[r];
    let cols = patch.cols();
    let mut next = vec![f64::INFINITY; cols];
    for l in 1..cols.saturating_sub(1) {
        if row[l - 1].is_finite() && row[l].is_finite() && row[l + 1].is_finite() {
            let f = patch.eval_speed(speed, row[l], l, t);
            next[l] = scheme_update(row[l - 1], row[l], row[l + 1], patch.h, patch.a, f, dt);
        }
    }
    next
}

/// Where a marched column crossed a watched transverse value.
#[derive(Debug, Clone, Copy)]
pub struct Crossing {
    pub watch: usize,
    /// Row index `r` such that the crossing lies between rows `r` and `r+1`.
    pub row: usize,
    pub psi: f64,
}

/// A transverse value to watch for during the march, at a fixed column.
#[derive(Debug, Clone, Copy)]
pub struct WatchPoint {
    pub col: usize,
    pub w: f64,
    /// Crossings at or before this time are ignored (guards against
    /// rediscovering the seed point itself).
    pub t_after: f64,
}

/// Crossing of value `w` between two consecutive rows of one column, by
/// linear interpolation in `t`.
pub fn bracket_crossing(c0: f64, c1: f64, t_lo: f64, t_hi: f64, w: f64) -> Option<f64> {
    if !c0.is_finite() || !c1.is_finite() {
        return None;
    }
    let (d0, d1) = (c0 - w, c1 - w);
    if d0 == 0.0 && d1 == 0.0 {
        return None; // flat on the watch value: no traversal event
    }
    if d0 * d1 > 0.0 {
        return None;
    }
    if d1 == d0 {
        return None;
    }
    Some(t_lo + (t_hi - t_lo) * (d0 / (d0 - d1)))
}

/// Runs the marching loop: up to `r_max` new rows, stopping early when every
/// interior entry is `+inf` or a watched value is crossed. Returns the first
/// crossing found, scanning the watch list in order after each step.
pub fn solve_patch_watched(
    patch: &mut SidewaysPatch,
    speed: &dyn SpeedField,
    r_max: usize,
    policy: DtPolicy,
    watch: &[WatchPoint],
) -> Option<Crossing> {
    let mut switched = policy.start_switched;
    let mut sign0 = patch.drive_sign(speed, &patch.chi[0], patch.t0);
    for _ in 0..r_max {
        let r = patch.rows() - 1;
        let t = patch.row_times[r];
        let row = &patch.chi[r];
        if !row.iter().any(|v| v.is_finite()) {
            break;
        }
        match (sign0, patch.drive_sign(speed, row, t)) {
            (Some(s0), Some(s)) if s != s0 => switched = true,
            (None, Some(s)) => sign0 = Some(s),
            _ => {}
        }
        // accuracy regime: small CFL-capped steps while the local speed has
        // not changed sign; race regime afterwards: the full r2 step, so the
        // returning front is caught before the domain shrinks away
        let dt = match policy.fixed_dt {
            Some(dt) => dt,
            None if switched => policy.r2 * patch.h,
            None => {
                let p = patch.slope_bound(row);
                let m = patch.speed_bound(speed, row, t);
                let k = speed.lipschitz_window(patch.t0, t + policy.r1 * patch.h);
                let cfl = cfl_dt(p, m, k, policy.delta, patch.h).unwrap_or(f64::INFINITY);
                cfl.min(policy.r1 * patch.h)
            }
        };
        if !(dt > 0.0) || !dt.is_finite() {
            break;
        }
        let mut next = sideways_step(patch, speed, r, dt);
        let t_next = t + dt;
        // fresh boundary data where the scheme could not assign a value
        for l in 0..patch.cols() {
            if !next[l].is_finite() {
                if let Some(w) = patch.boundary_value(l, t_next) {
                    next[l] = w;
                }
            }
        }
        patch.dt_schedule.push(dt);
        patch.row_times.push(t_next);
        patch.chi.push(next);
        let r1 = patch.rows() - 1;
        for (widx, wp) in watch.iter().enumerate() {
            if let Some(psi) = bracket_crossing(
                patch.chi[r1 - 1][wp.col],
                patch.chi[r1][wp.col],
                patch.row_times[r1 - 1],
                patch.row_times[r1],
                wp.w,
            ) {
                if psi > wp.t_after {
                    return Some(Crossing { watch: widx, row: r1 - 1, psi });
                }
            }
        }
    }
    None
}

/// Marches the patch until exhaustion or `r_max` rows.
pub fn solve_patch(
    patch: &mut SidewaysPatch,
    speed: &dyn SpeedField,
    r_max: usize,
    policy: DtPolicy,
) {
    solve_patch_watched(patch, speed, r_max, policy, &[]);
}
