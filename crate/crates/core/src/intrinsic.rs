//! Intrinsic tangency detection: scan the trace of an unstable surface in a
//! foliated invariant plane for a quadratic tangency with a foliation leaf.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::map::Point3;
use crate::patch::ManifoldPatch;
use crate::tangency::{poly_deriv, poly_eval, poly_fit, ContactOrder, TangencyReport};
use crate::tolerances::Tolerances;
use crate::{Error, Result};

/// Axis-aligned search region.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub min: Point3,
    pub max: Point3,
}

impl Region {
    pub fn cube(center: Point3, half: f64) -> Self {
        Region {
            min: center - Vector3::repeat(half),
            max: center + Vector3::repeat(half),
        }
    }

    fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// A found intrinsic tangency: which leaf, and the contact classification
/// restricted to the common invariant plane.
#[derive(Debug, Clone)]
pub struct IntrinsicTangency {
    pub leaf_index: usize,
    pub report: TangencyReport,
}

struct CommonPlane {
    origin: Point3,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    normal: Vector3<f64>,
}

/// Plane through all leaf samples by centroid + principal axes; errors when
/// the leaves are not coplanar at mesh accuracy.
fn common_plane(leaves: &[ManifoldPatch]) -> Result<CommonPlane> {
    let mut centroid = Vector3::zeros();
    let mut count = 0usize;
    for leaf in leaves {
        for p in leaf.points() {
            centroid += p;
            count += 1;
        }
    }
    if count < 4 {
        return Err(Error::MeshTooCoarse("too few leaf samples".into()));
    }
    centroid /= count as f64;
    let mut cov = Matrix3::zeros();
    for leaf in leaves {
        for p in leaf.points() {
            let d = p - centroid;
            cov += d * d.transpose();
        }
    }
    let eig = cov.symmetric_eigen();
    // smallest-eigenvalue axis is the plane normal
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let e1: Vector3<f64> = eig.eigenvectors.column(order[2]).into_owned();
    let e2 = normal.cross(&e1);
    let scale = leaves
        .iter()
        .flat_map(|l| l.points())
        .map(|p| (p - centroid).norm())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let coplanarity = leaves
        .iter()
        .flat_map(|l| l.points())
        .map(|p| normal.dot(&(p - centroid)).abs())
        .fold(0.0f64, f64::max);
    if coplanarity > 1e-8 * scale.max(1.0) {
        return Err(Error::MeshTooCoarse(format!(
            "foliation leaves deviate from a common plane by {coplanarity:.3e}"
        )));
    }
    Ok(CommonPlane {
        origin: centroid,
        e1,
        e2,
        normal,
    })
}

/// Extract the trace of a surface in a plane: zero crossings of the signed
/// plane distance along grid edges, chained into a polyline.
fn trace_curve(
    surface: &ManifoldPatch,
    plane: &CommonPlane,
    region: &Region,
) -> Result<Vec<Point3>> {
    let dist = |p: &Point3| plane.normal.dot(&(p - plane.origin));
    let mut crossings: Vec<Point3> = Vec::new();
    let mut edge = |a: &Point3, b: &Point3| {
        let da = dist(a);
        let db = dist(b);
        if da == 0.0 {
            crossings.push(*a);
        } else if da * db < 0.0 {
            let f = da / (da - db);
            crossings.push(a + (b - a) * f);
        }
    };
    for iu in 0..surface.nu {
        for iv in 0..surface.nv {
            let p = surface.sample(iu, iv).point;
            if iu + 1 < surface.nu {
                edge(&p, &surface.sample(iu + 1, iv).point);
            }
            if iv + 1 < surface.nv {
                edge(&p, &surface.sample(iu, iv + 1).point);
            }
        }
    }
    let mut crossings: Vec<Point3> = crossings
        .into_iter()
        .filter(|p| region.contains(p))
        .collect();
    if crossings.len() < 4 {
        return Err(Error::MeshTooCoarse(format!(
            "trace extraction found only {} points",
            crossings.len()
        )));
    }
    // chain by greedy nearest neighbor from an extremal point
    let start = (0..crossings.len())
        .max_by(|&i, &j| {
            let pi = plane.e1.dot(&(crossings[i] - plane.origin));
            let pj = plane.e1.dot(&(crossings[j] - plane.origin));
            pi.total_cmp(&pj)
        })
        .unwrap();
    let mut chain = vec![crossings.swap_remove(start)];
    while !crossings.is_empty() {
        let last = *chain.last().unwrap();
        let (next, _) = crossings
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - last).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        chain.push(crossings.swap_remove(next));
    }
    // drop duplicate points from nodes lying exactly in the plane
    chain.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
    Ok(chain)
}

/// Scan the trace of `wu` in the leaves' common plane for the first
/// quadratic tangency with a leaf.
///
/// Scan order is leaf list order, then arclength along the trace. Angles and
/// contacts are evaluated inside the plane: a tangency means the trace is
/// tangent to the leaf line at a meeting point.
pub fn detect_intrinsic_tangency(
    wu: &ManifoldPatch,
    leaves: &[ManifoldPatch],
    region: &Region,
    tol: &Tolerances,
) -> Result<IntrinsicTangency> {
    if wu.samples.len() < 4 {
        return Err(Error::MeshTooCoarse("unstable patch undersampled".into()));
    }
    let plane = common_plane(leaves)?;
    let chain = trace_curve(wu, &plane, region)?;

    // in-plane coordinates of the trace, with cumulative arclength
    let to_plane = |p: &Point3| {
        Vector2::new(
            plane.e1.dot(&(p - plane.origin)),
            plane.e2.dot(&(p - plane.origin)),
        )
    };
    let trace2: Vec<Vector2<f64>> = chain.iter().map(|p| to_plane(p)).collect();
    let mut arcs = vec![0.0];
    for i in 1..trace2.len() {
        arcs.push(arcs[i - 1] + (trace2[i] - trace2[i - 1]).norm());
    }

    for (leaf_index, leaf) in leaves.iter().enumerate() {
        if leaf.samples.len() < 4 {
            return Err(Error::MeshTooCoarse(format!(
                "leaf {leaf_index} undersampled"
            )));
        }
        // least-squares leaf line in the plane
        let pts: Vec<Vector2<f64>> = leaf.points().map(|p| to_plane(p)).collect();
        let mean = pts.iter().sum::<Vector2<f64>>() / pts.len() as f64;
        let mut cov = nalgebra::Matrix2::<f64>::zeros();
        for p in &pts {
            let d = p - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let dir_idx = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let dir: Vector2<f64> = eig.eigenvectors.column(dir_idx).into_owned().normalize();
        let leaf_normal = Vector2::new(-dir.y, dir.x);

        // height of the trace above the leaf line
        let height: Vec<f64> = trace2.iter().map(|p| leaf_normal.dot(&(p - mean))).collect();

        // events along the trace in arclength order
        for k in 0..height.len() {
            let sign_change = k + 1 < height.len() && height[k] * height[k + 1] <= 0.0;
            let touch = height[k].abs() <= tol.tol_meet * 10.0
                && (k == 0 || height[k].abs() <= height[k - 1].abs())
                && (k + 1 == height.len() || height[k].abs() < height[k + 1].abs());
            if !(sign_change || touch) {
                continue;
            }
            let lo = k.saturating_sub(7);
            let hi = (k + 8).min(height.len());
            if hi - lo < 5 {
                continue;
            }
            let ts: Vec<f64> = (lo..hi).map(|i| arcs[i] - arcs[k]).collect();
            let hs: Vec<f64> = (lo..hi).map(|i| height[i]).collect();
            let deg = 4.min(ts.len() - 1);
            let Ok(z_poly) = poly_fit(&ts, &hs, deg) else {
                continue;
            };
            let dz = poly_deriv(&z_poly);
            let ddz = poly_deriv(&dz);
            let mut t_star = 0.0;
            for _ in 0..60 {
                let f = poly_eval(&z_poly, t_star) * poly_eval(&dz, t_star);
                let df = poly_eval(&dz, t_star).powi(2)
                    + poly_eval(&z_poly, t_star) * poly_eval(&ddz, t_star);
                if df.abs() < 1e-300 {
                    break;
                }
                let step = f / df;
                t_star -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            if poly_eval(&z_poly, t_star).abs() > tol.tol_meet {
                continue;
            }
            let z_prime = poly_eval(&dz, t_star);
            let z_second = poly_eval(&ddz, t_star);
            if z_prime.abs() < tol.tol_first && z_second.abs() > tol.tol_second {
                // 3D location from per-coordinate fits along the chain
                let mut location = Vector3::zeros();
                for axis in 0..3 {
                    let vals: Vec<f64> = (lo..hi).map(|i| chain[i][axis]).collect();
                    let c = poly_fit(&ts, &vals, deg)?;
                    location[axis] = poly_eval(&c, t_star);
                }
                let leaf_dir_3d = plane.e1 * dir.x + plane.e2 * dir.y;
                let in_plane_normal = plane.e1 * leaf_normal.x + plane.e2 * leaf_normal.y;
                let frame =
                    Matrix3::from_columns(&[leaf_dir_3d, in_plane_normal, plane.normal]);
                return Ok(IntrinsicTangency {
                    leaf_index,
                    report: TangencyReport {
                        location,
                        order: ContactOrder::Quadratic,
                        // tangency between two curves inside the plane
                        codim: 2,
                        second_derivative: z_second,
                        adapted_frame: frame,
                        curve_parameter: arcs[k] + t_star,
                    },
                });
            }
        }
    }
    Err(Error::NoTangency)
}
