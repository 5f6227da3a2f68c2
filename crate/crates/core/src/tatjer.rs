//! Checker for the three-part generalized-tangency condition: a quadratic
//! homoclinic tangency off the strong unstable manifold, tangent to a
//! strong-unstable leaf, with the central-stable plane transverse to the
//! returning unstable manifold.

use nalgebra::{DMatrix, Vector3};

use crate::map::{eigenvalues3, SmoothMap3};
use crate::numeric::angle_between;
use crate::patch::{ManifoldPatch, PatchKind};
use crate::tangency::{tangency_order, ContactOrder, TangencyReport};
use crate::tolerances::Tolerances;
use crate::{Error, Result};

/// Verdict with the measured evidence for each condition.
#[derive(Debug, Clone)]
pub struct TatjerVerdict {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub witness: TangencyReport,
    /// Central-stable plane at the forward image of the tangency.
    pub plane_s: ManifoldPatch,
    /// Distance of the tangency from the strong unstable manifold.
    pub off_wuu_distance: f64,
    /// Angle between the returning stable tangent and the leaf tangent.
    pub leaf_angle: f64,
    /// Smallest stacked singular value of the plane pair at the image point.
    pub transversality_margin: f64,
}

/// Distance from a point to a polyline patch.
fn distance_to_curve(p: &Vector3<f64>, curve: &ManifoldPatch) -> f64 {
    let (j, d) = curve.nearest_sample(p);
    let mut best = d;
    for seg in [j.wrapping_sub(1), j] {
        if seg >= curve.nu - 1 {
            continue;
        }
        let p0 = curve.samples[seg].point;
        let p1 = curve.samples[seg + 1].point;
        let dvec = p1 - p0;
        let len2 = dvec.norm_squared();
        if len2 == 0.0 {
            continue;
        }
        let t = ((p - p0).dot(&dvec) / len2).clamp(0.0, 1.0);
        best = best.min((p - (p0 + dvec * t)).norm());
    }
    best
}

/// Check the three-part condition for a returning stable curve against the
/// local unstable surface, its strong-unstable structure and a designated
/// leaf.
///
/// The central-stable plane is spanned by the eigendirections of the weakest
/// expanding and the contracting eigenvalue of `forward_map` at the `n0`-th
/// forward image of the tangency; the returning unstable tangent plane is the
/// pushforward of the surface tangent at the tangency.
pub fn check_tatjer(
    ws_return: &ManifoldPatch,
    wu_loc: &ManifoldPatch,
    leaf: &ManifoldPatch,
    wuu: &ManifoldPatch,
    forward_map: &SmoothMap3,
    n0: u32,
    tol: &Tolerances,
) -> Result<TatjerVerdict> {
    // tangency candidate: closest approach of the curve to the surface
    let mut near = ws_return.samples[0].point;
    let mut best = f64::INFINITY;
    for s in &ws_return.samples {
        let (_, d) = wu_loc.nearest_sample(&s.point);
        if d < best {
            best = d;
            near = s.point;
        }
    }
    if best > tol.capture_radius {
        return Err(Error::NoTangencyCandidate);
    }
    let witness = match tangency_order(ws_return, wu_loc, &near, tol) {
        Ok(w) => w,
        Err(Error::NoIntersection) => return Err(Error::NoTangencyCandidate),
        Err(e) => return Err(e),
    };

    // C1: quadratic contact away from the strong unstable manifold
    let off_wuu_distance = distance_to_curve(&witness.location, wuu);
    let c1 = witness.order == ContactOrder::Quadratic && off_wuu_distance > tol.tol_off;

    // C2: returning stable tangent parallel to the leaf tangent
    let (ci, _) = ws_return.nearest_sample(&witness.location);
    let curve_tangent = ws_return.tangent1(ci);
    let (li, _) = leaf.nearest_sample(&witness.location);
    let leaf_tangent = leaf.tangent1(li);
    let raw = angle_between(&curve_tangent, &leaf_tangent);
    let leaf_angle = raw.min(std::f64::consts::PI - raw);
    let c2 = leaf_angle < tol.tol_first;

    // central-stable plane at the forward image of the tangency
    let image = forward_map.power(&witness.location, n0 as usize);
    let jac_at_image = forward_map.jacobian(&image);
    let eigs = eigenvalues3(&jac_at_image);
    if eigs.iter().any(|z| z.im != 0.0) {
        return Err(Error::SpectralGapMissing(
            "central-stable plane needs a real spectrum".into(),
        ));
    }
    let contracting: Vec<f64> = eigs.iter().filter(|z| z.norm() < 1.0).map(|z| z.re).collect();
    let expanding: Vec<f64> = eigs.iter().filter(|z| z.norm() > 1.0).map(|z| z.re).collect();
    if contracting.len() != 1 || expanding.len() != 2 {
        return Err(Error::SpectralGapMissing(format!(
            "expected one contracting and two expanding eigenvalues, got {} / {}",
            contracting.len(),
            expanding.len()
        )));
    }
    let weak_expanding = expanding
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap();
    let dir_s = smallest_singular_direction(&jac_at_image, contracting[0]);
    let dir_cu = smallest_singular_direction(&jac_at_image, weak_expanding);
    let plane_s = ManifoldPatch::plane(
        image,
        dir_cu,
        dir_s,
        0.1,
        0.1,
        9,
        9,
        PatchKind::CentralStablePlane,
    );

    // C3: pushforward of the unstable tangent plane vs the plane S
    let (si, _) = wu_loc.nearest_sample(&witness.location);
    let jn = forward_map.power_jacobian(&witness.location, n0 as usize);
    let mut u1 = jn * wu_loc.tangent1(si);
    let mut u2 = jn * wu_loc.tangent2(si);
    u1.normalize_mut();
    u2 -= u1 * u1.dot(&u2);
    u2.normalize_mut();
    let cols = [dir_cu, dir_s, u1, u2];
    let stacked = DMatrix::from_fn(3, 4, |r, c| cols[c][r]);
    let sv = stacked.svd(false, false).singular_values;
    let transversality_margin = sv.min();
    let c3 = transversality_margin > tol.tol_trans;

    Ok(TatjerVerdict {
        c1,
        c2,
        c3,
        witness,
        plane_s,
        off_wuu_distance,
        leaf_angle,
        transversality_margin,
    })
}

fn smallest_singular_direction(
    j: &nalgebra::Matrix3<f64>,
    lambda: f64,
) -> Vector3<f64> {
    let m = j - nalgebra::Matrix3::identity() * lambda;
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("svd of 3x3");
    vt.row(2).transpose().normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Domain;
    use nalgebra::Matrix3;

    fn real_saddle_map() -> SmoothMap3 {
        SmoothMap3::linear(
            Matrix3::from_diagonal(&Vector3::new(1.5, 3.0, 0.4)),
            Domain::AllSpace,
            "tatjer-saddle",
        )
    }

    struct Witness {
        ws_return: ManifoldPatch,
        wu_loc: ManifoldPatch,
        leaf: ManifoldPatch,
        wuu: ManifoldPatch,
    }

    /// Canonical satisfying witness: unstable plane z = 0, strong unstable
    /// y-axis, leaf through (0.3, 0, 0) in the y-direction, returning curve
    /// (0.3, s, s^2).
    fn satisfying_witness() -> Witness {
        Witness {
            ws_return: ManifoldPatch::curve_from_fn(
                |s| Vector3::new(0.3, s, s * s),
                (-0.4, 0.4),
                161,
                PatchKind::Stable,
            ),
            wu_loc: ManifoldPatch::plane(
                Vector3::zeros(),
                Vector3::x(),
                Vector3::y(),
                1.0,
                1.0,
                41,
                41,
                PatchKind::Unstable,
            ),
            leaf: ManifoldPatch::line_segment(
                Vector3::new(0.3, 0.0, 0.0),
                Vector3::y(),
                0.5,
                41,
                PatchKind::StrongUnstableLeaf,
            ),
            wuu: ManifoldPatch::line_segment(
                Vector3::zeros(),
                Vector3::y(),
                1.0,
                41,
                PatchKind::StrongUnstableLeaf,
            ),
        }
    }

    #[test]
    fn satisfying_witness_passes_all_three() {
        let w = satisfying_witness();
        let verdict = check_tatjer(
            &w.ws_return,
            &w.wu_loc,
            &w.leaf,
            &w.wuu,
            &real_saddle_map(),
            1,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(verdict.c1, "off-distance {}", verdict.off_wuu_distance);
        assert!(verdict.c2, "leaf angle {}", verdict.leaf_angle);
        assert!(verdict.c3, "margin {}", verdict.transversality_margin);
    }

    #[test]
    fn tangency_on_the_strong_unstable_manifold_fails_c1_only() {
        let mut w = satisfying_witness();
        w.ws_return = ManifoldPatch::curve_from_fn(
            |s| Vector3::new(0.0, s, s * s),
            (-0.4, 0.4),
            161,
            PatchKind::Stable,
        );
        w.leaf = ManifoldPatch::line_segment(
            Vector3::zeros(),
            Vector3::y(),
            0.5,
            41,
            PatchKind::StrongUnstableLeaf,
        );
        let verdict = check_tatjer(
            &w.ws_return,
            &w.wu_loc,
            &w.leaf,
            &w.wuu,
            &real_saddle_map(),
            1,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(!verdict.c1);
        assert!(verdict.c2);
        assert!(verdict.c3);
    }

    #[test]
    fn rotated_tangent_fails_c2_only() {
        let mut w = satisfying_witness();
        // tangent along x instead of along the leaf direction y
        w.ws_return = ManifoldPatch::curve_from_fn(
            |s| Vector3::new(0.3 + s, 0.0, s * s),
            (-0.4, 0.4),
            161,
            PatchKind::Stable,
        );
        let verdict = check_tatjer(
            &w.ws_return,
            &w.wu_loc,
            &w.leaf,
            &w.wuu,
            &real_saddle_map(),
            1,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(verdict.c1);
        assert!(!verdict.c2);
        assert!(verdict.c3);
    }

    #[test]
    fn returning_plane_degenerate_with_s_fails_c3_only() {
        // unstable surface {y = 0} has tangent span(x, z) which pushes onto
        // the central-stable plane itself
        let w = Witness {
            ws_return: ManifoldPatch::curve_from_fn(
                |s| Vector3::new(0.3, s * s, s),
                (-0.4, 0.4),
                161,
                PatchKind::Stable,
            ),
            wu_loc: ManifoldPatch::plane(
                Vector3::new(0.3, 0.0, 0.0),
                Vector3::x(),
                Vector3::z(),
                1.0,
                1.0,
                41,
                41,
                PatchKind::Unstable,
            ),
            leaf: ManifoldPatch::line_segment(
                Vector3::new(0.3, 0.0, 0.0),
                Vector3::z(),
                0.5,
                41,
                PatchKind::StrongUnstableLeaf,
            ),
            wuu: ManifoldPatch::line_segment(
                Vector3::zeros(),
                Vector3::y(),
                1.0,
                41,
                PatchKind::StrongUnstableLeaf,
            ),
        };
        let verdict = check_tatjer(
            &w.ws_return,
            &w.wu_loc,
            &w.leaf,
            &w.wuu,
            &real_saddle_map(),
            1,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(verdict.c1, "off {}", verdict.off_wuu_distance);
        assert!(verdict.c2, "angle {}", verdict.leaf_angle);
        assert!(!verdict.c3, "margin {}", verdict.transversality_margin);
    }

    #[test]
    fn far_curve_has_no_candidate() {
        let w = satisfying_witness();
        let far = ManifoldPatch::curve_from_fn(
            |s| Vector3::new(0.3, s, 2.0 + s * s),
            (-0.4, 0.4),
            161,
            PatchKind::Stable,
        );
        assert!(matches!(
            check_tatjer(
                &far,
                &w.wu_loc,
                &w.leaf,
                &w.wuu,
                &real_saddle_map(),
                1,
                &Tolerances::default()
            ),
            Err(Error::NoTangencyCandidate)
        ));
    }
}
