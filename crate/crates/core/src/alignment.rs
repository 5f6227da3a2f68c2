//! Rotation-driven alignment of tangent directions along an orbit: the
//! smallest iterate at which a marker's pushed tangent vector aligns with a
//! target direction.

use nalgebra::Vector3;

use crate::map::{Point3, SmoothMap3};
use crate::numeric::{angle_between, certify_irrational};
use crate::patch::ManifoldPatch;
use crate::{Error, Result};

/// Source of the rotating tangent sequence: a marker point on a patch whose
/// tangent direction is pushed forward along the orbit of `map`. `rotation`
/// is the rotation number of the map's focus block, used only for the
/// irrationality precondition.
pub struct AlignmentProblem<'a> {
    pub map: &'a SmoothMap3,
    pub patch: &'a ManifoldPatch,
    pub marker: Point3,
    pub rotation: f64,
}

/// Result of an alignment search.
#[derive(Debug, Clone, Copy)]
pub struct Alignment {
    /// Smallest iterate count achieving the angle bound.
    pub n: usize,
    /// Achieved angle at that iterate, in radians.
    pub angle: f64,
    /// Location of the marker's n-th iterate.
    pub location: Point3,
    /// Unit tangent there.
    pub direction: Vector3<f64>,
}

/// Find the smallest return time `n` with `angle(v_n, target) < eps`, where
/// `v_n` is the marker's patch tangent pushed through `n` steps of the map.
///
/// Angles are measured between vectors (not lines), in `[0, pi]`. The search
/// runs over `1 <= n <= horizon`; a vacuous bound `eps >= pi` is satisfied
/// without iterating (`n = 0`). Requires an irrational rotation number
/// certificate; returns the horizon and the best angle achieved when no
/// iterate qualifies.
pub fn rotation_alignment_search(
    problem: &AlignmentProblem<'_>,
    target_direction: &Vector3<f64>,
    eps: f64,
    horizon: usize,
) -> Result<Alignment> {
    certify_irrational(problem.rotation, 20)?;
    let target = target_direction.normalize();
    let (idx, dist) = problem.patch.nearest_sample(&problem.marker);
    if dist > 1e-6 {
        return Err(Error::Precondition(format!(
            "marker is {dist:.3e} away from the patch"
        )));
    }
    let mut x = problem.patch.samples[idx].point;
    let mut v = problem.patch.tangent1(idx);
    if eps >= std::f64::consts::PI {
        return Ok(Alignment {
            n: 0,
            angle: angle_between(&v, &target),
            location: x,
            direction: v,
        });
    }
    let mut best = (0usize, f64::INFINITY);
    for n in 1..=horizon {
        v = (problem.map.jacobian(&x) * v).normalize();
        x = problem.map.eval(&x);
        let angle = angle_between(&v, &target);
        if angle < best.1 {
            best = (n, angle);
        }
        if angle < eps {
            return Ok(Alignment {
                n,
                angle,
                location: x,
                direction: v,
            });
        }
    }
    Err(Error::HorizonExhausted {
        horizon,
        best_n: best.0,
        best_angle: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Domain;
    use crate::models::{make_saddle_focus, FocusBlock, SaddleFocusParams};
    use crate::patch::PatchKind;

    fn golden() -> f64 {
        (5.0f64.sqrt() - 1.0) / 2.0
    }

    fn rigid_rotation_problem<'a>(
        map: &'a SmoothMap3,
        patch: &'a ManifoldPatch,
    ) -> AlignmentProblem<'a> {
        AlignmentProblem {
            map,
            patch,
            marker: Vector3::new(0.5, 0.0, 0.0),
            rotation: golden(),
        }
    }

    fn golden_focus_map() -> SmoothMap3 {
        // pure rotation in xy realized as a saddle focus with moduli ~1
        make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.999_999_9,
                expanding_modulus: 2.0,
                rotation: golden(),
                focus_block: FocusBlock::StableXy,
            },
            Domain::AllSpace,
        )
        .unwrap()
    }

    fn marker_patch() -> ManifoldPatch {
        ManifoldPatch::line_segment(
            Vector3::new(0.5, 0.0, 0.0),
            Vector3::x(),
            0.1,
            11,
            PatchKind::Generic,
        )
    }

    /// Brute-force oracle over the pushed tangent sequence (return times).
    fn exhaustive_min_n(
        map: &SmoothMap3,
        start: &Point3,
        v0: &Vector3<f64>,
        target: &Vector3<f64>,
        eps: f64,
        horizon: usize,
    ) -> Option<(usize, f64)> {
        let mut x = *start;
        let mut v = *v0;
        for n in 1..=horizon {
            v = (map.jacobian(&x) * v).normalize();
            x = map.eval(&x);
            let angle = angle_between(&v, target);
            if angle < eps {
                return Some((n, angle));
            }
        }
        None
    }

    #[test]
    fn golden_rotation_aligns_at_a_convergent_denominator() {
        let map = golden_focus_map();
        let patch = marker_patch();
        let problem = rigid_rotation_problem(&map, &patch);
        let result =
            rotation_alignment_search(&problem, &Vector3::x(), 0.05, 200).unwrap();
        assert!(result.angle < 0.05);
        // denominators of golden-mean convergents are Fibonacci numbers
        let fib = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144];
        assert!(fib.contains(&result.n), "n = {} not a Fibonacci number", result.n);
        // minimality against the exhaustive scan
        let (n_oracle, _) = exhaustive_min_n(
            &map,
            &problem.marker,
            &Vector3::x(),
            &Vector3::x(),
            0.05,
            200,
        )
        .unwrap();
        assert_eq!(result.n, n_oracle);
    }

    #[test]
    fn rational_rotation_is_rejected() {
        let map = make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.999_999_9,
                expanding_modulus: 2.0,
                rotation: 0.0,
                focus_block: FocusBlock::StableXy,
            },
            Domain::AllSpace,
        )
        .unwrap();
        let patch = marker_patch();
        let problem = AlignmentProblem {
            map: &map,
            patch: &patch,
            marker: Vector3::new(0.5, 0.0, 0.0),
            rotation: 0.0,
        };
        assert!(matches!(
            rotation_alignment_search(&problem, &Vector3::y(), 0.05, 100),
            Err(Error::NotIrrational { .. })
        ));
    }

    #[test]
    fn trivial_bound_is_met_at_n_zero() {
        let map = golden_focus_map();
        let patch = marker_patch();
        let problem = rigid_rotation_problem(&map, &patch);
        let result = rotation_alignment_search(
            &problem,
            &Vector3::y(),
            std::f64::consts::PI,
            100,
        )
        .unwrap();
        assert_eq!(result.n, 0);
    }

    #[test]
    fn exhausted_horizon_reports_best_angle() {
        let map = golden_focus_map();
        let patch = marker_patch();
        let problem = rigid_rotation_problem(&map, &patch);
        match rotation_alignment_search(&problem, &Vector3::x(), 1e-6, 50) {
            Err(Error::HorizonExhausted {
                horizon,
                best_angle,
                ..
            }) => {
                assert_eq!(horizon, 50);
                assert!(best_angle > 1e-6);
            }
            other => panic!("expected HorizonExhausted, got {other:?}"),
        }
    }
}
