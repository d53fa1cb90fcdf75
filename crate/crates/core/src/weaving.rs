//! Glue between the arrival-time and sideways pictures.
//!
//! The Sign Test decides when an eikonal update is trustworthy, the
//! Orientation Test keeps traversals of the same sheet together, the normal
//! constructors turn one-sided differences into 3D normals, and the
//! conversion/extraction pair moves data into a sideways patch and crossing
//! times back out of it.

use crate::grid::{MarchState, SurfacePoint};
use crate::sideways::{bracket_crossing, Representation, SidewaysPatch, SpeedField};
use crate::{Error, Result};

/// Outcome of a sign test: `d` sign changes of `F` along a space-time
/// segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignTestResult {
    pub d: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Refine,
}

impl SignTestResult {
    fn from_count(d: usize) -> Self {
        let verdict = match d {
            0 => Verdict::Pass,
            1 => Verdict::Fail,
            _ => Verdict::Refine,
        };
        SignTestResult { d, verdict }
    }
}

/// Counts sign alternations of `F` at `samples` equispaced points on the
/// segment `p -> q` in `(x, y, t)`. Zero samples are dropped, so a grazing
/// zero does not count as a change.
pub fn sign_test_segment(
    p: [f64; 3],
    q: [f64; 3],
    speed: &dyn SpeedField,
    samples: usize,
) -> SignTestResult {
    debug_assert!(samples >= 2);
    let mut d = 0usize;
    let mut prev = 0i8;
    for k in 0..samples {
        let s = k as f64 / (samples - 1) as f64;
        let x = p[0] + s * (q[0] - p[0]);
        let y = p[1] + s * (q[1] - p[1]);
        let t = p[2] + s * (q[2] - p[2]);
        let f = speed.eval(x, y, t);
        let sig = if f > 0.0 {
            1
        } else if f < 0.0 {
            -1
        } else {
            0
        };
        if sig != 0 {
            if prev != 0 && sig != prev {
                d += 1;
            }
            prev = sig;
        }
    }
    SignTestResult::from_count(d)
}

/// Sign test on a pair of surface points.
pub fn sign_test(
    p: &SurfacePoint,
    q: &SurfacePoint,
    speed: &dyn SpeedField,
    samples: usize,
) -> SignTestResult {
    sign_test_segment([p.x, p.y, p.psi], [q.x, q.y, q.psi], speed, samples)
}

/// Two points pass when their sheets have the same orientation.
pub fn orientation_test(p: &SurfacePoint, q: &SurfacePoint) -> bool {
    p.orient == q.orient
}

/// Axis neighbours that fed an eikonal update, with their arrival values.
pub type UsedNeighbor = (crate::eikonal::AxisDir, f64);

/// One-sided-difference normal at an eikonal-updated point.
///
/// Each used neighbour contributes the slope estimate along its axis with
/// the sign of its quadrant. The graph normal `(grad psi, -1)` points
/// outward only on sheets where arrival time grows outward; the `orient`
/// factor flips it on contracting sheets so the spatial part is always the
/// outer normal.
pub fn normal_from_fmm(psi: f64, used: &[UsedNeighbor], h: f64, orient: i8) -> [f64; 3] {
    use crate::eikonal::AxisDir::*;
    let o = orient as f64;
    let mut v = [0.0, 0.0, -o];
    for &(dir, val) in used {
        match dir {
            XMinus => v[0] = o * (psi - val) / h,
            XPlus => v[0] = o * (val - psi) / h,
            YMinus => v[1] = o * (psi - val) / h,
            YPlus => v[1] = o * (val - psi) / h,
        }
    }
    crate::grid::normalize3(v)
}

/// Normal at patch node `(l, r)` from the sideways stencil: central
/// difference across the column at the previous row and a one-sided
/// difference in time, rotated back to `(x, y, t)` components.
pub fn normal_from_sideways(
    patch: &SidewaysPatch,
    l: usize,
    r: usize,
    h: f64,
    dt: f64,
) -> Result<[f64; 3]> {
    if r == 0 || l == 0 || l + 1 >= patch.cols() {
        return Err(Error::MissingNeighbor { col: l, row: r });
    }
    let cur = patch.chi[r][l];
    let prev = &patch.chi[r - 1];
    if !(cur.is_finite() && prev[l].is_finite() && prev[l - 1].is_finite() && prev[l + 1].is_finite())
    {
        return Err(Error::MissingNeighbor { col: l, row: r });
    }
    let a = patch.a;
    let vw = -a;
    let vz = a * (prev[l + 1] - prev[l - 1]) / (2.0 * h);
    let vt = a * (cur - prev[l]) / dt;
    let (vx, vy) = patch.rep.to_xy(vw, vz); // rotation, so vectors map alike
    Ok(crate::grid::normalize3([vx, vy, vt]))
}

/// Best-effort normal for a crossing between rows `r` and `r + 1` of column
/// `l`: the strict stencil when available, otherwise a flat-column fallback
/// that still carries the correct motion direction and time sign.
pub fn crossing_normal(patch: &SidewaysPatch, l: usize, r: usize) -> [f64; 3] {
    let dt = patch.row_times[r + 1] - patch.row_times[r];
    if let Ok(n) = normal_from_sideways(patch, l, r + 1, patch.h, dt) {
        return n;
    }
    let a = patch.a;
    let vt = if patch.chi[r + 1][l].is_finite() && patch.chi[r][l].is_finite() {
        a * (patch.chi[r + 1][l] - patch.chi[r][l]) / dt
    } else {
        0.0
    };
    let (vx, vy) = patch.rep.to_xy(-a, 0.0);
    crate::grid::normalize3([vx, vy, vt])
}

/// The orientation sign of a representation at a point: `-sign` of the
/// normal component along the patch's `w` axis.
pub fn rep_orientation_sign(rep: Representation, p: &SurfacePoint) -> f64 {
    let eta = match rep {
        Representation::Yt => p.normal3[0],
        Representation::Xt => p.normal3[1],
        Representation::Skew(theta) => {
            theta.cos() * p.normal3[0] + theta.sin() * p.normal3[1]
        }
    };
    if eta > 0.0 {
        -1.0
    } else if eta < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Accepted points around `p_ab` whose orientation is compatible with the
/// chosen representation (Table-style neighbourhood for the conversion).
fn neigh_side<'a>(
    state: &'a MarchState,
    p_ab: &SurfacePoint,
    rep: Representation,
    s: usize,
) -> Vec<&'a SurfacePoint> {
    let spec = &state.spec;
    let eta_ref = rep_orientation_sign(rep, p_ab);
    let mut out = Vec::new();
    let (i0, j0) = (p_ab.i as isize, p_ab.j as isize);
    for i in (i0 - s as isize).max(0)..=(i0 + s as isize).min(spec.n as isize - 1) {
        for j in (j0 - s as isize).max(0)..=(j0 + s as isize).min(spec.n as isize - 1) {
            for p in state.accepted_here(i as usize, j as usize) {
                if rep_orientation_sign(rep, p) == eta_ref {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Converts accepted data around `p_ab` into a sideways patch.
///
/// The `(z, t)` grid is aligned so `p_ab` sits exactly on the node
/// `(centre column, row 0)`; row 0 is filled column by column with 1D linear
/// interpolation in `t` over the compatible accepted samples. A column whose
/// samples stop short of `t0` is extended with its last value only while the
/// front could not have moved a full cell (`M * gap <= 2h`); all other nodes
/// start at `+inf`.
pub fn convert_to_sideways(
    state: &MarchState,
    p_ab: &SurfacePoint,
    rep: Representation,
    s: usize,
    speed: &dyn SpeedField,
) -> Result<SidewaysPatch> {
    let spec = &state.spec;
    let h = spec.h;
    let a = rep_orientation_sign(rep, p_ab);
    let (w_ab, z_ab) = rep.to_wz(p_ab.x, p_ab.y);

    // column layout: grid lines for the axis representations, an
    // h-spaced ladder centred on p_ab for the skewed one
    let z_vals: Vec<f64> = match rep {
        Representation::Yt => {
            let lo = p_ab.j.saturating_sub(s);
            let hi = (p_ab.j + s).min(spec.n - 1);
            (lo..=hi).map(|j| spec.y(j)).collect()
        }
        Representation::Xt => {
            // z = -x, so increasing z walks the x index downwards
            let lo = p_ab.i.saturating_sub(s);
            let hi = (p_ab.i + s).min(spec.n - 1);
            (lo..=hi).rev().map(|i| -spec.x(i)).collect()
        }
        Representation::Skew(_) => {
            (-(s as isize)..=s as isize).map(|v| z_ab + v as f64 * h).collect()
        }
    };
    let cols = z_vals.len();
    let col_of = |z: f64| -> Option<usize> {
        let rel = (z - z_vals[0]) / h;
        let l = rel.round();
        if (rel - l).abs() <= 0.25 && l >= 0.0 && (l as usize) < cols {
            Some(l as usize)
        } else {
            None
        }
    };

    let neighbors = neigh_side(state, p_ab, rep, s);
    if neighbors.is_empty() {
        return Err(Error::InsufficientData(0));
    }
    let mut boundary: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cols];
    for p in neighbors {
        let (w, z) = rep.to_wz(p.x, p.y);
        if let Some(l) = col_of(z) {
            boundary[l].push((p.psi, w));
        }
    }
    for samples in &mut boundary {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        samples.dedup_by(|a, b| a.0 == b.0);
    }

    let t0 = p_ab.psi;
    let mut row0 = vec![f64::INFINITY; cols];
    for l in 0..cols {
        let samples = &boundary[l];
        if samples.is_empty() {
            continue;
        }
        let after = samples.partition_point(|&(ts, _)| ts < t0);
        if after > 0 && after < samples.len() {
            let (ta, wa) = samples[after - 1];
            let (tb, wb) = samples[after];
            row0[l] = if tb == ta { wa } else { wa + (wb - wa) * (t0 - ta) / (tb - ta) };
        } else if after == samples.len() {
            let (t_last, w_last) = samples[samples.len() - 1];
            if t_last == t0 {
                row0[l] = w_last;
            } else {
                // stale column: keep the last value only while the front
                // cannot have crossed a new grid line since
                let (x, y) = rep.to_xy(w_last, z_vals[l]);
                let m = speed.local_bound([x, y, t_last], 2.0 * h);
                if m * (t0 - t_last) <= 2.0 * h {
                    row0[l] = w_last;
                }
            }
        }
        // after == 0 with no exact hit: data begins later; stays +inf and
        // may enter through the fresh-boundary path during the march
    }

    // the seed point must land exactly on its node
    if let Some(lc) = col_of(z_ab) {
        row0[lc] = w_ab;
    }

    let finite = row0.iter().filter(|v| v.is_finite()).count();
    if finite < 3 {
        return Err(Error::InsufficientData(finite));
    }

    Ok(SidewaysPatch {
        rep,
        a,
        z_vals,
        t0,
        h,
        s,
        chi: vec![row0],
        row_times: vec![t0],
        dt_schedule: Vec::new(),
        boundary,
    })
}

/// Earliest crossing of the target's transverse coordinate in one column,
/// strictly after `after` (so a seed node is never rediscovered).
fn column_crossing(patch: &SidewaysPatch, l: usize, w: f64, after: f64) -> Option<(usize, f64)> {
    for r in 0..patch.rows().saturating_sub(1) {
        if let Some(psi) = bracket_crossing(
            patch.chi[r][l],
            patch.chi[r + 1][l],
            patch.row_times[r],
            patch.row_times[r + 1],
            w,
        ) {
            if psi > after {
                return Some((r, psi));
            }
        }
    }
    None
}

/// Scans the solved patch for the time at which the front traverses the
/// spatial point `target`, returning the interpolated crossing time and a
/// normal there, or `None` when the column never brackets the target.
pub fn extract_crossing(patch: &SidewaysPatch, target: (f64, f64)) -> Option<(f64, [f64; 3])> {
    extract_crossing_after(patch, target, f64::NEG_INFINITY)
}

/// Like [`extract_crossing`] but ignoring crossings at or before `after`
/// (used to avoid rediscovering the seed point itself).
pub fn extract_crossing_after(
    patch: &SidewaysPatch,
    target: (f64, f64),
    after: f64,
) -> Option<(f64, [f64; 3])> {
    let (w_t, z_t) = patch.rep.to_wz(target.0, target.1);
    let rel = (z_t - patch.z_vals[0]) / patch.h;
    if rel < -1e-9 || rel > (patch.cols() - 1) as f64 + 1e-9 {
        return None;
    }
    let l_near = rel.round().max(0.0) as usize;
    let on_node = (rel - l_near as f64).abs() <= 1e-6;
    if on_node {
        let l = l_near.min(patch.cols() - 1);
        let (r, psi) = column_crossing(patch, l, w_t, after)?;
        return Some((psi, crossing_normal(patch, l, r)));
    }
    // off-lattice target (skewed representation): crossing time interpolated
    // in z between the two bracketing columns
    let l0 = rel.floor() as usize;
    let l1 = l0 + 1;
    if l1 >= patch.cols() {
        return None;
    }
    let (r0, psi0) = column_crossing(patch, l0, w_t, after)?;
    let (_, psi1) = column_crossing(patch, l1, w_t, after)?;
    let frac = rel - l0 as f64;
    let psi = psi0 + (psi1 - psi0) * frac;
    Some((psi, crossing_normal(patch, l0, r0)))
}

/// Number of sign-test samples for a segment: `per_cell` per cell-length,
/// never fewer than two.
pub fn segment_samples(p: [f64; 3], q: [f64; 3], h: f64, per_cell: usize) -> usize {
    let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt();
    ((per_cell as f64 * len / h).ceil() as usize).clamp(2, 100_000)
}

/// The orientation-compatible eikonal neighbourhood of `(i, j)`: accepted,
/// grid-current, and matching the orientation of the reference point.
pub fn neigh_eik<'a>(
    state: &'a MarchState,
    i: usize,
    j: usize,
    reference: &SurfacePoint,
) -> Vec<(crate::eikonal::AxisDir, &'a SurfacePoint)> {
    use crate::eikonal::AxisDir::*;
    let spec = &state.spec;
    let mut out = Vec::new();
    for (dir, di, dj) in [(XMinus, -1, 0), (XPlus, 1, 0), (YMinus, 0, -1), (YPlus, 0, 1)] {
        let (a, b) = (i as isize + di, j as isize + dj);
        if !spec.contains(a, b) {
            continue;
        }
        let (a, b) = (a as usize, b as usize);
        if let Some(p) = state.latest_accepted(a, b) {
            // grid-current by construction of latest_accepted
            if p.psi == state.grid_value(a, b) && orientation_test(p, reference) {
                out.push((dir, p));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PointSource;
    use crate::sideways::{FnSpeed, Representation};
    use approx::assert_relative_eq;

    fn speed_const(v: f64) -> FnSpeed<impl Fn(f64, f64, f64) -> f64 + Sync> {
        FnSpeed { f: move |_, _, _| v, k: 0.0, time_dep: false }
    }

    fn sp(x: f64, y: f64, psi: f64) -> SurfacePoint {
        SurfacePoint::new(0, 0, x, y, psi, [1.0, 0.0, -0.5], PointSource::Fmm)
    }

    #[test]
    fn sign_test_positive_speed_passes() {
        let r = sign_test(&sp(0.0, 0.0, 0.0), &sp(0.1, 0.0, 0.1), &speed_const(1.0), 16);
        assert_eq!(r.d, 0);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn sign_test_linear_speed_single_crossing() {
        let f = FnSpeed { f: |x: f64, _, _| x, k: 1.0, time_dep: false };
        let r = sign_test(&sp(-0.1, 0.0, 0.2), &sp(0.1, 0.0, 0.25), &f, 64);
        assert_eq!(r.d, 1);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn sign_test_example_speed_crosses_at_tenth() {
        let f = FnSpeed {
            f: |_, _, t: f64| 1.0 - (10.0 * t - 1.0).exp(),
            k: 80.0,
            time_dep: true,
        };
        let r = sign_test(&sp(0.0, 0.0, 0.05), &sp(0.0, 0.1, 0.15), &f, 32);
        assert_eq!(r.d, 1);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn sign_test_grazing_zero_is_even() {
        // F = t^2 - touches zero at t = 0 without changing sign
        let f = FnSpeed { f: |_, _, t: f64| t * t, k: 1.0, time_dep: true };
        let r = sign_test(&sp(0.0, 0.0, -0.5), &sp(0.0, 0.0, 0.5), &f, 101);
        assert_eq!(r.d, 0);
    }

    #[test]
    fn sign_test_symmetric_in_endpoints() {
        let f = FnSpeed { f: |x: f64, _, t: f64| x - t, k: 2.0, time_dep: true };
        let p = sp(-0.3, 0.0, 0.1);
        let q = sp(0.4, 0.1, 0.3);
        let a = sign_test(&p, &q, &f, 33);
        let b = sign_test(&q, &p, &f, 33);
        assert_eq!(a.d, b.d);
    }

    #[test]
    fn orientation_test_matches_signs() {
        let mut p = sp(0.0, 0.0, 0.1);
        let mut q = sp(0.1, 0.0, 0.1);
        p.orient = 1;
        q.orient = 1;
        assert!(orientation_test(&p, &q));
        q.orient = -1;
        assert!(!orientation_test(&p, &q));
        p.orient = -1;
        assert!(orientation_test(&p, &q));
    }

    #[test]
    fn fmm_normal_quadrant_three() {
        use crate::eikonal::AxisDir::*;
        let n = normal_from_fmm(0.1, &[(XMinus, 0.0), (YMinus, 0.0)], 0.1, 1);
        let e = 1.0 / 3.0_f64.sqrt();
        assert_relative_eq!(n[0], e, epsilon = 1e-12);
        assert_relative_eq!(n[1], e, epsilon = 1e-12);
        assert_relative_eq!(n[2], -e, epsilon = 1e-12);
    }

    #[test]
    fn fmm_normal_one_dimensional_flat() {
        use crate::eikonal::AxisDir::*;
        let n = normal_from_fmm(0.3, &[(XMinus, 0.3)], 0.1, 1);
        assert_eq!(n, [0.0, 0.0, -1.0]);
    }

    #[test]
    fn fmm_normal_reflection_flips_component() {
        use crate::eikonal::AxisDir::*;
        let a = normal_from_fmm(0.1, &[(XMinus, 0.0)], 0.1, 1);
        let b = normal_from_fmm(0.1, &[(XPlus, 0.0)], 0.1, 1);
        assert_relative_eq!(a[0], -b[0], epsilon = 1e-15);
        assert_relative_eq!(a[2], b[2], epsilon = 1e-15);
    }

    fn flat_patch(a: f64, rows: usize, drift: f64) -> SidewaysPatch {
        let z: Vec<f64> = (0..5).map(|l| l as f64 * 0.1).collect();
        let mut patch = SidewaysPatch::from_initial_row(
            Representation::Yt,
            a,
            z,
            0.0,
            0.1,
            2,
            vec![0.5; 5],
        );
        for r in 1..rows {
            let dt = 0.01;
            patch.row_times.push(r as f64 * dt);
            patch.dt_schedule.push(dt);
            patch.chi.push(vec![0.5 + drift * r as f64 * dt; 5]);
        }
        patch
    }

    #[test]
    fn sideways_normal_static_flat() {
        let patch = flat_patch(-1.0, 3, 0.0);
        let n = normal_from_sideways(&patch, 2, 2, 0.1, 0.01).unwrap();
        assert_eq!(n, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn sideways_normal_unit_speed_drift() {
        // chi advances by +dt per step
        let patch = flat_patch(-1.0, 3, 1.0);
        let n = normal_from_sideways(&patch, 2, 2, 0.1, 0.01).unwrap();
        let e = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(n[0], e, epsilon = 1e-12);
        assert_relative_eq!(n[2], -e, epsilon = 1e-12);
    }

    #[test]
    fn sideways_normal_linear_column_slope() {
        let z: Vec<f64> = (0..5).map(|l| l as f64 * 0.1).collect();
        let sigma = 0.7;
        let row: Vec<f64> = z.iter().map(|&zv| sigma * zv).collect();
        let mut patch = SidewaysPatch::from_initial_row(
            Representation::Yt,
            -1.0,
            z,
            0.0,
            0.1,
            2,
            row.clone(),
        );
        patch.row_times.push(0.01);
        patch.dt_schedule.push(0.01);
        patch.chi.push(row);
        let n = normal_from_sideways(&patch, 2, 1, 0.1, 0.01).unwrap();
        let expect = crate::grid::normalize3([1.0, -sigma, 0.0]);
        for k in 0..3 {
            assert_relative_eq!(n[k], expect[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn sideways_normal_requires_full_stencil() {
        let mut patch = flat_patch(-1.0, 3, 0.0);
        patch.chi[1][0] = f64::INFINITY; // outside the stencil of l = 2
        assert!(normal_from_sideways(&patch, 2, 2, 0.1, 0.01).is_ok());
        patch.chi[1][3] = f64::INFINITY; // chi^{r-1}_{l+1} now missing
        assert!(matches!(
            normal_from_sideways(&patch, 2, 2, 0.1, 0.01),
            Err(Error::MissingNeighbor { .. })
        ));
    }

    #[test]
    fn sideways_normal_time_sign_tracks_speed() {
        // moving front: sign(n_t) must equal -sign(F) regardless of a
        for &a in &[-1.0, 1.0] {
            for &f in &[0.8, -0.8] {
                let drift = -a * f; // chi_t = -a F sqrt(1 + 0)
                let patch = flat_patch(a, 3, drift);
                let n = normal_from_sideways(&patch, 2, 2, 0.1, 0.01).unwrap();
                assert_eq!(n[2].signum(), -f.signum(), "a = {a}, F = {f}");
            }
        }
    }

    #[test]
    fn extract_crossing_linear_interpolation() {
        let z: Vec<f64> = (0..5).map(|l| l as f64 * 0.1).collect();
        let mut patch = SidewaysPatch::from_initial_row(
            Representation::Yt,
            -1.0,
            z,
            0.30,
            0.1,
            2,
            vec![0.095; 5],
        );
        patch.row_times.push(0.31);
        patch.dt_schedule.push(0.01);
        patch.chi.push(vec![0.105; 5]);
        let (psi, _) = extract_crossing(&patch, (0.1, 0.2)).unwrap();
        assert_relative_eq!(psi, 0.305, epsilon = 1e-12);
    }

    #[test]
    fn extract_crossing_monotone_away_is_none() {
        let patch = flat_patch(-1.0, 4, 1.0); // chi runs from 0.5 upward
        assert!(extract_crossing(&patch, (0.4, 0.2)).is_none());
    }

    #[test]
    fn segment_sample_count_scales_with_length() {
        let n = segment_samples([0.0; 3], [0.1, 0.0, 0.0], 0.1, 16);
        assert_eq!(n, 16);
        let n = segment_samples([0.0; 3], [0.0, 0.0, 0.0], 0.1, 16);
        assert_eq!(n, 2);
    }
}
