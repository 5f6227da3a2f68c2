//! Contact-order classification of curve/surface intersections in adapted
//! coordinates, and codimension of tangent-space configurations.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::patch::ManifoldPatch;
use crate::tolerances::Tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactOrder {
    Transverse,
    Quadratic,
    Degenerate,
}

/// Classification of one intersection between a curve and a surface.
#[derive(Debug, Clone)]
pub struct TangencyReport {
    pub location: Vector3<f64>,
    pub order: ContactOrder,
    pub codim: usize,
    /// Height acceleration z''(0) in the adapted frame (sign depends on the
    /// surface normal orientation).
    pub second_derivative: f64,
    /// Columns: surface tangent pair, surface normal at the contact.
    pub adapted_frame: Matrix3<f64>,
    /// Arclength parameter of the contact along the curve.
    pub curve_parameter: f64,
}

/// Quadratic least-squares fit of the surface over the 5x5 sample stencil
/// around a grid node, in that node's frame. Returns the coefficients
/// `[c, cx, cy, cxx, cxy, cyy]` of the height function.
fn surface_quadratic_fit(surface: &ManifoldPatch, node: usize) -> Result<[f64; 6]> {
    let iu0 = node / surface.nv;
    let iv0 = node % surface.nv;
    let radius = 2usize;
    let lo_u = iu0.saturating_sub(radius).min(surface.nu.saturating_sub(5));
    let lo_v = iv0.saturating_sub(radius).min(surface.nv.saturating_sub(5));
    let hi_u = (lo_u + 5).min(surface.nu);
    let hi_v = (lo_v + 5).min(surface.nv);
    let frame = surface.samples[node].frame;
    let origin = surface.samples[node].point;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for iu in lo_u..hi_u {
        for iv in lo_v..hi_v {
            let rel = surface.sample(iu, iv).point - origin;
            let x = frame.column(0).dot(&rel);
            let y = frame.column(1).dot(&rel);
            let z = frame.column(2).dot(&rel);
            rows.push([1.0, x, y, x * x, x * y, y * y]);
            rhs.push(z);
        }
    }
    if rows.len() < 6 {
        return Err(Error::MeshTooCoarse(
            "fewer than 6 stencil samples for the quadratic surface fit".into(),
        ));
    }
    let a = DMatrix::from_fn(rows.len(), 6, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    Ok([sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]])
}

/// Height of a point above the fitted surface, in the fit's frame.
fn height_above_fit(
    p: &Vector3<f64>,
    origin: &Vector3<f64>,
    frame: &Matrix3<f64>,
    coeff: &[f64; 6],
) -> f64 {
    let rel = p - origin;
    let x = frame.column(0).dot(&rel);
    let y = frame.column(1).dot(&rel);
    let z = frame.column(2).dot(&rel);
    z - (coeff[0]
        + coeff[1] * x
        + coeff[2] * y
        + coeff[3] * x * x
        + coeff[4] * x * y
        + coeff[5] * y * y)
}

/// Least-squares polynomial fit `sum_k c_k t^k` of degree `deg`. The
/// parameter is normalized to unit scale internally, so narrow windows stay
/// well conditioned.
pub(crate) fn poly_fit(ts: &[f64], values: &[f64], deg: usize) -> Result<Vec<f64>> {
    let scale = ts.iter().fold(0.0f64, |m, &t| m.max(t.abs())).max(1e-300);
    let a = DMatrix::from_fn(ts.len(), deg + 1, |r, c| (ts[r] / scale).powi(c as i32));
    let b = DVector::from_column_slice(values);
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if min_sv <= 0.0 || max_sv / min_sv > 1e12 {
        return Err(Error::IllConditioned {
            cond: if min_sv > 0.0 {
                max_sv / min_sv
            } else {
                f64::INFINITY
            },
        });
    }
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(sol
        .iter()
        .enumerate()
        .map(|(k, &c)| c / scale.powi(k as i32))
        .collect())
}

pub(crate) fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
}

pub(crate) fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| k as f64 * ck)
        .collect()
}

/// All roots of a real polynomial via the companion matrix, after trimming
/// negligible leading coefficients.
pub(crate) fn polynomial_roots(c: &[f64]) -> Vec<num_complex::Complex64> {
    let scale = c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = c.len() - 1;
    while deg > 0 && c[deg].abs() <= 1e-13 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        companion[(0, k)] = -c[deg - 1 - k] / lead;
    }
    for k in 1..deg {
        companion[(k, k - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Classify the contact between a curve patch and a surface patch near a
/// hint point.
///
/// Builds an adapted frame with its z-axis normal to a local quadratic fit
/// of the surface, fits the curve's height above the fit as z(t) in
/// arclength, and classifies by (|z'|, |z''|) against the tolerance pair.
pub fn tangency_order(
    curve: &ManifoldPatch,
    surface: &ManifoldPatch,
    near: &Vector3<f64>,
    tol: &Tolerances,
) -> Result<TangencyReport> {
    assert_eq!(curve.dim, 1, "first patch must be a curve");
    assert_eq!(surface.dim, 2, "second patch must be a surface");
    if curve.samples.len() < 4 || surface.samples.len() < 4 {
        return Err(Error::MeshTooCoarse(
            "patch has fewer than 4 samples".into(),
        ));
    }

    let params = curve.arclength_params();
    let in_window: Vec<usize> = (0..curve.nu)
        .filter(|&i| (curve.samples[i].point - near).norm() <= tol.capture_radius)
        .collect();
    if in_window.is_empty() {
        return Err(Error::NoIntersection);
    }

    let window_mid = curve.samples[in_window[in_window.len() / 2]].point;
    let (anchor, _) = surface.nearest_sample(&window_mid);
    let coeff = surface_quadratic_fit(surface, anchor)?;
    let s_origin = surface.samples[anchor].point;
    let s_frame = surface.samples[anchor].frame;

    let height: Vec<f64> = in_window
        .iter()
        .map(|&i| height_above_fit(&curve.samples[i].point, &s_origin, &s_frame, &coeff))
        .collect();

    // candidate events: sign changes and near-zero local minima of |h|
    let mut events: Vec<usize> = Vec::new();
    for k in 0..in_window.len() {
        let is_sign_change = k + 1 < in_window.len() && height[k] * height[k + 1] <= 0.0;
        let is_touch_min = height[k].abs() <= tol.tol_meet * 10.0
            && (k == 0 || height[k].abs() <= height[k - 1].abs())
            && (k + 1 == in_window.len() || height[k].abs() < height[k + 1].abs());
        if is_sign_change || is_touch_min {
            events.push(k);
        }
    }
    if events.is_empty() {
        return Err(Error::NoIntersection);
    }
    let merge_radius = 4.0 * curve.h_mesh;
    let mut merged: Vec<usize> = vec![events[0]];
    for &e in &events[1..] {
        let t_prev = params[in_window[*merged.last().unwrap()]];
        if params[in_window[e]] - t_prev > merge_radius {
            merged.push(e);
        }
    }
    if merged.len() > 1 {
        return Err(Error::AmbiguousIntersection {
            t0: params[in_window[merged[0]]],
            t1: params[in_window[merged[1]]],
        });
    }
    let event = merged[0];

    // Local quartic fit of the height around the event. The fit parameter is
    // the in-plane arclength of the projected curve, so that polynomial
    // graphs over the surface are fitted exactly.
    let center_idx = in_window[event];
    let t_center = params[center_idx];
    let fit_lo = center_idx.saturating_sub(7);
    let fit_hi = (center_idx + 8).min(curve.nu);
    let in_plane = |i: usize| -> (f64, f64) {
        let rel = curve.samples[i].point - s_origin;
        (s_frame.column(0).dot(&rel), s_frame.column(1).dot(&rel))
    };
    let mut ts: Vec<f64> = Vec::with_capacity(fit_hi - fit_lo);
    let mut acc = 0.0;
    let mut prev = in_plane(fit_lo);
    ts.push(0.0);
    for i in (fit_lo + 1)..fit_hi {
        let cur = in_plane(i);
        acc += (cur.0 - prev.0).hypot(cur.1 - prev.1);
        ts.push(acc);
        prev = cur;
    }
    let center_offset = ts[center_idx - fit_lo];
    for t in &mut ts {
        *t -= center_offset;
    }
    let hs: Vec<f64> = (fit_lo..fit_hi)
        .map(|i| height_above_fit(&curve.samples[i].point, &s_origin, &s_frame, &coeff))
        .collect();
    let deg = 4.min(ts.len() - 1);
    let z_poly = poly_fit(&ts, &hs, deg)?;
    let dz = poly_deriv(&z_poly);
    let ddz = poly_deriv(&dz);

    // Contact parameter: centroid of the root cluster of the fitted height
    // near the event. The centroid is first-order accurate in the fit noise,
    // unlike any individual root of a multiple contact.
    let window = (*ts.first().unwrap(), *ts.last().unwrap());
    let cluster_radius = 0.25 * (window.1 - window.0);
    let roots = polynomial_roots(&z_poly);
    let cluster: Vec<f64> = roots
        .iter()
        .filter(|z| z.im.abs() <= cluster_radius && z.re.abs() <= cluster_radius)
        .map(|z| z.re)
        .collect();
    let t_star = if cluster.is_empty() {
        0.0
    } else {
        cluster.iter().sum::<f64>() / cluster.len() as f64
    };
    let z_at = poly_eval(&z_poly, t_star);
    if z_at.abs() > tol.tol_meet {
        return Err(Error::NoIntersection);
    }

    let z_prime = poly_eval(&dz, t_star);
    let z_second = poly_eval(&ddz, t_star);
    let order = if z_prime.abs() >= tol.tol_first {
        ContactOrder::Transverse
    } else if z_second.abs() > tol.tol_second {
        ContactOrder::Quadratic
    } else {
        ContactOrder::Degenerate
    };

    // location from per-coordinate quartic fits at t*
    let mut location = Vector3::zeros();
    for axis in 0..3 {
        let vals: Vec<f64> = (fit_lo..fit_hi)
            .map(|i| curve.samples[i].point[axis])
            .collect();
        let c = poly_fit(&ts, &vals, deg)?;
        location[axis] = poly_eval(&c, t_star);
    }

    // adapted frame: normal of the fitted surface at the contact foot
    let rel = location - s_origin;
    let xf = s_frame.column(0).dot(&rel);
    let yf = s_frame.column(1).dot(&rel);
    let grad = Vector3::new(
        -(coeff[1] + 2.0 * coeff[3] * xf + coeff[4] * yf),
        -(coeff[2] + coeff[4] * xf + 2.0 * coeff[5] * yf),
        1.0,
    );
    let normal_world = (s_frame * grad).normalize();
    let t1 = {
        let helper = if normal_world.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        normal_world.cross(&helper).normalize()
    };
    let t2 = normal_world.cross(&t1);
    let adapted_frame = Matrix3::from_columns(&[t1, t2, normal_world]);

    let codim = match order {
        ContactOrder::Transverse => 0,
        _ => 1,
    };

    Ok(TangencyReport {
        location,
        order,
        codim,
        second_derivative: z_second,
        adapted_frame,
        curve_parameter: t_center + t_star,
    })
}

const RANK_SV_THRESHOLD: f64 = 1e-8;

/// Rank of a set of 3-vectors by singular values of the stacked matrix.
pub fn stacked_rank(columns: &[Vector3<f64>]) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(3, columns.len(), |r, c| columns[c][r]);
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_SV_THRESHOLD)
        .count()
}

/// Codimension of the intersection of two patches at `x`:
/// `3 - (dim A + dim B - dim(T_A ∩ T_B))`, with the tangent intersection
/// dimension from the rank of the stacked tangent bases.
pub fn codimension_at(
    a: &ManifoldPatch,
    b: &ManifoldPatch,
    x: &Vector3<f64>,
    tol: &Tolerances,
) -> Result<usize> {
    let (ia, da) = a.nearest_sample(x);
    let (ib, db) = b.nearest_sample(x);
    if da > tol.tol_meet || db > tol.tol_meet {
        return Err(Error::NoIntersection);
    }
    let mut cols: Vec<Vector3<f64>> = Vec::new();
    for k in 0..a.dim {
        cols.push(a.samples[ia].frame.column(k).into_owned());
    }
    for k in 0..b.dim {
        cols.push(b.samples[ib].frame.column(k).into_owned());
    }
    let rank = stacked_rank(&cols);
    let dim_int = a.dim + b.dim - rank;
    Ok(3 - (a.dim + b.dim - dim_int))
}
