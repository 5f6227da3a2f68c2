//! Constructors for explicit local dynamics: saddle-focus linear models,
//! compactly supported bump perturbations, and piecewise linear/affine cycle
//! models with labeled saddles and verified intersection markers.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::map::{Domain, PeriodicPoint, Point3, SmoothMap3};
use crate::numeric::{flat_top, flat_top_deriv, standard_profile_sup_deriv, STANDARD_PLATEAU};
use crate::{Error, Result};

/// Which 2D block carries the rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocusBlock {
    /// Rotation in the contracting xy-plane, expansion along z.
    StableXy,
    /// Rotation in the expanding xy-plane, contraction along z.
    UnstableXy,
}

/// Parameters of a linear saddle-focus model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleFocusParams {
    pub contracting_modulus: f64,
    pub expanding_modulus: f64,
    /// Rotation as a fraction of a full turn, in `[0, 1)`.
    pub rotation: f64,
    pub focus_block: FocusBlock,
}

impl SaddleFocusParams {
    pub fn validate(&self) -> Result<()> {
        let c = self.contracting_modulus.abs();
        let e = self.expanding_modulus.abs();
        if !(c > 0.0 && c < 1.0 && e > 1.0) {
            return Err(Error::Precondition(format!(
                "saddle-focus moduli must satisfy 0 < |contracting| < 1 < |expanding| (got {c}, {e})"
            )));
        }
        Ok(())
    }

    /// The linear map of the model as a matrix.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (planar, axial) = match self.focus_block {
            FocusBlock::StableXy => (self.contracting_modulus, self.expanding_modulus),
            FocusBlock::UnstableXy => (self.expanding_modulus, self.contracting_modulus),
        };
        let r = rotation_matrix(planar, self.rotation);
        let mut m = Matrix3::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&r);
        m[(2, 2)] = axial;
        m
    }

    /// Parameters of the exact inverse model (also a saddle focus).
    pub fn inverse(&self) -> SaddleFocusParams {
        SaddleFocusParams {
            contracting_modulus: 1.0 / self.expanding_modulus,
            expanding_modulus: 1.0 / self.contracting_modulus,
            rotation: if self.rotation == 0.0 {
                0.0
            } else {
                1.0 - self.rotation
            },
            focus_block: match self.focus_block {
                FocusBlock::StableXy => FocusBlock::UnstableXy,
                FocusBlock::UnstableXy => FocusBlock::StableXy,
            },
        }
    }
}

/// Scaled 2D rotation `modulus * R(2 pi theta)`.
pub fn rotation_matrix(modulus: f64, theta: f64) -> Matrix2<f64> {
    let a = 2.0 * std::f64::consts::PI * theta;
    Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos()) * modulus
}

/// Linear saddle-focus model on the given domain, fixed point at the origin.
pub fn make_saddle_focus(params: &SaddleFocusParams, domain: Domain) -> Result<SmoothMap3> {
    params.validate()?;
    let label = match params.focus_block {
        FocusBlock::StableXy => "saddle-focus/stable-xy",
        FocusBlock::UnstableXy => "saddle-focus/unstable-xy",
    };
    Ok(SmoothMap3::linear(params.matrix(), domain, label))
}

/// Localized action of a bump perturbation.
#[derive(Debug, Clone)]
pub enum BumpAction {
    /// Displace by `d`, scaled by the bump weight.
    Translate(Vector3<f64>),
    /// Rotate about the axis line through `axis_point` with direction
    /// `axis_dir`, by an angle scaled by the bump weight.
    Rotate {
        axis_point: Point3,
        axis_dir: Vector3<f64>,
        angle: f64,
    },
}

/// A compactly supported perturbation: identity outside the ball of radius
/// `support_radius` about `center`, blended with the standard flat-top
/// profile inside.
#[derive(Debug, Clone)]
pub struct BumpPerturbation {
    pub center: Point3,
    pub support_radius: f64,
    pub action: BumpAction,
}

impl BumpPerturbation {
    /// Diffeomorphism margin `1 - (perturbation size) * sup|profile'| / rho`;
    /// the perturbation map is invertible whenever this is positive.
    pub fn diffeo_margin(&self) -> f64 {
        let sup = standard_profile_sup_deriv();
        match &self.action {
            BumpAction::Translate(d) => 1.0 - d.norm() * sup / self.support_radius,
            BumpAction::Rotate {
                axis_point, angle, ..
            } => {
                let reach = 1.0 + (axis_point - self.center).norm() / self.support_radius;
                1.0 - angle.abs() * sup * reach
            }
        }
    }

    fn weight(&self, p: &Point3) -> f64 {
        flat_top((p - self.center).norm() / self.support_radius, STANDARD_PLATEAU)
    }

    fn weight_gradient(&self, p: &Point3) -> Vector3<f64> {
        let offset = p - self.center;
        let dist = offset.norm();
        if dist == 0.0 {
            return Vector3::zeros();
        }
        let s = dist / self.support_radius;
        let db = flat_top_deriv(s, STANDARD_PLATEAU);
        if db == 0.0 {
            Vector3::zeros()
        } else {
            offset * (db / (self.support_radius * dist))
        }
    }

    /// The perturbation map itself.
    pub fn apply(&self, p: &Point3) -> Point3 {
        let w = self.weight(p);
        match &self.action {
            BumpAction::Translate(d) => p + w * d,
            BumpAction::Rotate {
                axis_point,
                axis_dir,
                angle,
            } => {
                if w == 0.0 {
                    return *p;
                }
                let rot = nalgebra::Rotation3::from_axis_angle(
                    &nalgebra::Unit::new_normalize(*axis_dir),
                    angle * w,
                );
                axis_point + rot * (p - axis_point)
            }
        }
    }

    /// Jacobian of the perturbation map.
    pub fn apply_jacobian(&self, p: &Point3) -> Matrix3<f64> {
        let w = self.weight(p);
        let grad = self.weight_gradient(p);
        match &self.action {
            BumpAction::Translate(d) => Matrix3::identity() + d * grad.transpose(),
            BumpAction::Rotate {
                axis_point,
                axis_dir,
                angle,
            } => {
                if w == 0.0 && grad == Vector3::zeros() {
                    return Matrix3::identity();
                }
                let axis = nalgebra::Unit::new_normalize(*axis_dir);
                let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle * w);
                let r = rot.matrix().into_owned();
                let v = p - axis_point;
                // d/dtheta of the rotation applied to v is axis x (R v)
                let dtheta = axis.cross(&(r * v));
                r + dtheta * (*angle * grad).transpose()
            }
        }
    }
}

const BUMP_DISTANCE_SAMPLES: usize = 24;

/// Compose `base` with a compactly supported perturbation on the source side.
///
/// The result equals `base` exactly (bitwise) outside the support ball. The
/// achieved C0/C1 distances to `base` and the diffeomorphism margin are
/// attached as metadata (`c0_distance`, `c1_distance`, `diffeo_margin`),
/// measured on a deterministic sample of the support.
pub fn apply_bump(base: &SmoothMap3, pert: &BumpPerturbation) -> Result<SmoothMap3> {
    let margin = pert.diffeo_margin();
    if margin <= 0.0 {
        return Err(Error::NotDiffeomorphism { margin });
    }

    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    let n = BUMP_DISTANCE_SAMPLES;
    for i in 0..n {
        for j in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let v = (j as f64 + 0.5) / n as f64;
            let r = pert.support_radius * u;
            let phi = 2.0 * std::f64::consts::PI * v;
            let q = pert.center
                + Vector3::new(
                    r * phi.cos(),
                    r * phi.sin(),
                    pert.support_radius * (2.0 * u - 1.0) * v,
                );
            let moved = pert.apply(&q);
            c0 = c0.max((base.eval(&moved) - base.eval(&q)).norm());
            let jac_diff =
                base.jacobian(&moved) * pert.apply_jacobian(&q) - base.jacobian(&q);
            c1 = c1.max(jac_diff.amax());
        }
    }

    let base_eval = base.clone();
    let base_jac = base.clone();
    let pert_eval = pert.clone();
    let pert_jac = pert.clone();
    let label = format!("{}+bump", base.label);
    Ok(SmoothMap3::new(
        move |p| base_eval.eval(&pert_eval.apply(p)),
        move |p| base_jac.jacobian(&pert_jac.apply(p)) * pert_jac.apply_jacobian(p),
        base.domain,
        label,
    )
    .with_metadata("diffeo_margin", margin)
    .with_metadata("c0_distance", c0)
    .with_metadata("c1_distance", c1))
}

/// Local dynamics inside a saddle box.
#[derive(Debug, Clone, Copy)]
pub enum SaddleLocal {
    Focus(SaddleFocusParams),
    /// Independent real moduli on the coordinate axes.
    Diagonal(Vector3<f64>),
}

impl SaddleLocal {
    pub fn matrix(&self) -> Matrix3<f64> {
        match self {
            SaddleLocal::Focus(p) => p.matrix(),
            SaddleLocal::Diagonal(d) => Matrix3::from_diagonal(d),
        }
    }

    /// Indices of contracting coordinate directions (for residual checks the
    /// focus block counts as a single plane).
    fn stable_axes(&self) -> Vec<usize> {
        match self {
            SaddleLocal::Focus(p) => match p.focus_block {
                FocusBlock::StableXy => vec![0, 1],
                FocusBlock::UnstableXy => vec![2],
            },
            SaddleLocal::Diagonal(d) => {
                (0..3).filter(|&k| d[k].abs() < 1.0).collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSpec {
    pub name: String,
    pub center: Point3,
    pub half_extent: f64,
    pub local: SaddleLocal,
}

/// Affine transition on a corridor box.
#[derive(Debug, Clone)]
pub struct TransitionSpec {
    pub name: String,
    pub linear: Matrix3<f64>,
    pub offset: Vector3<f64>,
    pub region_center: Point3,
    pub region_half: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerKind {
    Transverse,
    QuasiTransverse,
}

/// A declared intersection of invariant manifolds, to be verified against
/// the assembled model.
#[derive(Debug, Clone)]
pub struct MarkerSpec {
    pub name: String,
    pub kind: MarkerKind,
    pub location: Point3,
    /// Tangent basis of the unstable manifold at the marker.
    pub tangent_u: Vec<Vector3<f64>>,
    /// Tangent basis of the stable manifold at the marker.
    pub tangent_s: Vec<Vector3<f64>>,
    /// Saddle whose stable manifold the forward orbit must reach.
    pub forward_saddle: String,
    /// Saddle whose unstable manifold the backward orbit must reach.
    pub backward_saddle: String,
}

#[derive(Debug, Clone, Default)]
pub struct CycleSpec {
    pub saddles: Vec<SaddleSpec>,
    pub transitions: Vec<TransitionSpec>,
    pub markers: Vec<MarkerSpec>,
}

/// Verification record for one marker.
#[derive(Debug, Clone)]
pub struct MarkerReport {
    pub name: String,
    pub kind: MarkerKind,
    pub location: Point3,
    pub forward_residual: f64,
    pub backward_residual: f64,
    /// Codimension of the declared tangent configuration.
    pub codim: usize,
}

/// An assembled cycle model with its labeled saddles and verified markers.
#[derive(Debug, Clone)]
pub struct CycleModel {
    pub map: SmoothMap3,
    pub saddles: Vec<(String, PeriodicPoint)>,
    pub markers: Vec<MarkerReport>,
}

const CORE_FRACTION: f64 = 0.9;
const MARKER_RESIDUAL: f64 = 1e-10;
const ROUTE_DEPTH: usize = 100;
const RANK_THRESHOLD: f64 = 1e-8;

struct Region {
    linear: Matrix3<f64>,
    offset: Vector3<f64>,
    center: Point3,
    half: Vector3<f64>,
}

impl Region {
    fn eval(&self, p: &Point3) -> Point3 {
        self.linear * p + self.offset
    }

    /// Per-axis flat-top weight: exactly 1 on the inner 90% of the box.
    fn weight(&self, p: &Point3) -> f64 {
        let mut w = 1.0;
        for k in 0..3 {
            w *= flat_top((p[k] - self.center[k]).abs() / self.half[k], CORE_FRACTION);
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }

    fn weight_gradient(&self, p: &Point3) -> Vector3<f64> {
        let b: Vec<f64> = (0..3)
            .map(|k| flat_top((p[k] - self.center[k]).abs() / self.half[k], CORE_FRACTION))
            .collect();
        Vector3::from_fn(|m, _| {
            let rel = p[m] - self.center[m];
            let db = flat_top_deriv(rel.abs() / self.half[m], CORE_FRACTION) * rel.signum()
                / self.half[m];
            db * (0..3).filter(|&k| k != m).map(|k| b[k]).product::<f64>()
        })
    }

    fn in_core(&self, p: &Point3) -> bool {
        (0..3).all(|k| (p[k] - self.center[k]).abs() <= CORE_FRACTION * self.half[k])
    }


    fn invert(&self, x: &Point3) -> Option<Point3> {
        self.linear.lu().solve(&(x - self.offset))
    }
}

fn boxes_disjoint(c1: &Point3, h1: &Vector3<f64>, c2: &Point3, h2: &Vector3<f64>) -> bool {
    (0..3).any(|k| (c1[k] - c2[k]).abs() > h1[k] + h2[k])
}

fn build_regions(spec: &CycleSpec) -> Result<Vec<Region>> {
    let mut regions = Vec::new();
    for s in &spec.saddles {
        let m = s.local.matrix();
        regions.push(Region {
            linear: m,
            offset: s.center - m * s.center,
            center: s.center,
            half: Vector3::repeat(s.half_extent),
        });
    }
    for t in &spec.transitions {
        regions.push(Region {
            linear: t.linear,
            offset: t.offset,
            center: t.region_center,
            half: t.region_half,
        });
    }
    // cores must be pairwise disjoint; collars may blend
    let names: Vec<&str> = spec
        .saddles
        .iter()
        .map(|s| s.name.as_str())
        .chain(spec.transitions.iter().map(|t| t.name.as_str()))
        .collect();
    for i in 0..regions.len() {
        for j in (i + 1)..regions.len() {
            let (a, b) = (&regions[i], &regions[j]);
            if !boxes_disjoint(
                &a.center,
                &(CORE_FRACTION * a.half),
                &b.center,
                &(CORE_FRACTION * b.half),
            ) {
                return Err(Error::Overlap(format!(
                    "cores of '{}' and '{}' intersect",
                    names[i], names[j]
                )));
            }
        }
    }
    Ok(regions)
}

fn composite_map(regions: Arc<Vec<Region>>, label: &str) -> SmoothMap3 {
    let mut min = Vector3::repeat(f64::INFINITY);
    let mut max = Vector3::repeat(f64::NEG_INFINITY);
    for r in regions.iter() {
        for k in 0..3 {
            min[k] = min[k].min(r.center[k] - r.half[k]);
            max[k] = max[k].max(r.center[k] + r.half[k]);
        }
    }
    let eval_regions = Arc::clone(&regions);
    let jac_regions = Arc::clone(&regions);
    SmoothMap3::new(
        move |p| {
            let mut num = Vector3::zeros();
            let mut den = 0.0;
            let mut bg = 1.0;
            for r in eval_regions.iter() {
                let w = r.weight(p);
                if w > 0.0 {
                    num += w * r.eval(p);
                    den += w;
                }
                bg *= 1.0 - w;
            }
            // identity background keeps the map smooth and total where no
            // region claims the point
            (num + bg * p) / (den + bg)
        },
        move |p| {
            let m = jac_regions.len();
            let weights: Vec<f64> = jac_regions.iter().map(|r| r.weight(p)).collect();
            let grads: Vec<Vector3<f64>> =
                jac_regions.iter().map(|r| r.weight_gradient(p)).collect();
            let bg: f64 = weights.iter().map(|w| 1.0 - w).product();
            let mut grad_bg = Vector3::zeros();
            for i in 0..m {
                let others: f64 = (0..m).filter(|&j| j != i).map(|j| 1.0 - weights[j]).product();
                grad_bg -= others * grads[i];
            }
            let mut num = bg * p;
            let mut den = bg;
            let mut jac_num = Matrix3::identity() * bg + p * grad_bg.transpose();
            let mut grad_den = grad_bg;
            for (i, r) in jac_regions.iter().enumerate() {
                let w = weights[i];
                num += w * r.eval(p);
                den += w;
                jac_num += w * r.linear + r.eval(p) * grads[i].transpose();
                grad_den += grads[i];
            }
            let value = num / den;
            (jac_num - value * grad_den.transpose()) / den
        },
        Domain::Box { min, max },
        label,
    )
}

fn stacked_rank(u: &[Vector3<f64>], s: &[Vector3<f64>]) -> usize {
    let cols: Vec<Vector3<f64>> = u.iter().chain(s.iter()).cloned().collect();
    let mat = nalgebra::DMatrix::from_fn(3, cols.len(), |r, c| cols[c][r]);
    mat.svd(false, false)
        .singular_values
        .iter()
        .filter(|&&sv| sv > RANK_THRESHOLD)
        .count()
}

fn residual_to_stable_manifold(spec: &SaddleSpec, p: &Point3) -> f64 {
    let rel = p - spec.center;
    let stable = spec.local.stable_axes();
    (0..3)
        .filter(|k| !stable.contains(k))
        .map(|k| rel[k] * rel[k])
        .sum::<f64>()
        .sqrt()
}

fn residual_to_unstable_manifold(spec: &SaddleSpec, p: &Point3) -> f64 {
    let rel = p - spec.center;
    spec.local
        .stable_axes()
        .iter()
        .map(|&k| rel[k] * rel[k])
        .sum::<f64>()
        .sqrt()
}

fn saddle_box_contains(spec: &SaddleSpec, p: &Point3) -> bool {
    (0..3).all(|k| (p[k] - spec.center[k]).abs() <= spec.half_extent)
}

/// Forward orbit residual: iterate until the orbit enters the target saddle
/// box, then measure the distance to its local stable manifold.
fn verify_forward(map: &SmoothMap3, spec: &SaddleSpec, start: &Point3) -> Option<f64> {
    let mut x = *start;
    for _ in 0..ROUTE_DEPTH {
        if saddle_box_contains(spec, &x) {
            return Some(residual_to_stable_manifold(spec, &x));
        }
        x = map.eval(&x);
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Backward route search: breadth-first over exact region-wise preimages
/// (a preimage candidate is accepted when it lies in the core of the region
/// that produced it, so the composite maps it back exactly).
fn verify_backward(regions: &[Region], spec: &SaddleSpec, start: &Point3) -> Option<f64> {
    let mut frontier = vec![*start];
    for _ in 0..ROUTE_DEPTH {
        let mut next = Vec::new();
        for x in &frontier {
            for r in regions {
                if let Some(y) = r.invert(x) {
                    if r.in_core(&y) {
                        if saddle_box_contains(spec, &y) {
                            let res = residual_to_unstable_manifold(spec, &y);
                            if res < MARKER_RESIDUAL {
                                return Some(res);
                            }
                        }
                        next.push(y);
                    }
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        next.truncate(64);
        frontier = next;
    }
    None
}

/// Assemble a piecewise cycle model: linear in saddle boxes, affine in
/// corridors, blended on collars, identity background elsewhere in the
/// bounding box. Labeled saddles are solved to `newton_tol` residual and
/// every declared marker is verified (orbit residuals below 1e-10 and tangent
/// configuration matching its kind).
pub fn assemble_cycle_model(spec: &CycleSpec) -> Result<CycleModel> {
    if spec.saddles.is_empty() {
        return Err(Error::Precondition(
            "cycle spec needs at least one saddle".into(),
        ));
    }
    let regions = Arc::new(build_regions(spec)?);
    let map = composite_map(Arc::clone(&regions), "cycle-model");

    let mut saddles = Vec::new();
    for s in &spec.saddles {
        let fixed = PeriodicPoint::from_location(&map, s.center, 1);
        let residual = (map.eval(&s.center) - s.center).norm();
        if residual > MARKER_RESIDUAL {
            return Err(Error::MarkerMismatch {
                name: s.name.clone(),
                residual,
            });
        }
        saddles.push((s.name.clone(), fixed));
    }

    let saddle_by_name = |name: &str| -> Result<&SaddleSpec> {
        spec.saddles
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Precondition(format!("unknown saddle '{name}'")))
    };

    let mut markers = Vec::new();
    for m in &spec.markers {
        let forward = saddle_by_name(&m.forward_saddle)?;
        let backward = saddle_by_name(&m.backward_saddle)?;
        let forward_residual = verify_forward(&map, forward, &m.location).ok_or_else(|| {
            Error::MarkerMismatch {
                name: m.name.clone(),
                residual: f64::INFINITY,
            }
        })?;
        let backward_residual =
            verify_backward(&regions, backward, &m.location).ok_or_else(|| {
                Error::MarkerMismatch {
                    name: m.name.clone(),
                    residual: f64::INFINITY,
                }
            })?;
        if forward_residual > MARKER_RESIDUAL || backward_residual > MARKER_RESIDUAL {
            return Err(Error::MarkerMismatch {
                name: m.name.clone(),
                residual: forward_residual.max(backward_residual),
            });
        }
        let rank = stacked_rank(&m.tangent_u, &m.tangent_s);
        let dim_sum = m.tangent_u.len() + m.tangent_s.len();
        let kind_ok = match m.kind {
            MarkerKind::Transverse => rank == 3,
            // direct sum of the tangent spaces, deficient in the ambient space
            MarkerKind::QuasiTransverse => rank == dim_sum && rank < 3,
        };
        if !kind_ok {
            return Err(Error::MarkerMismatch {
                name: m.name.clone(),
                residual: rank as f64,
            });
        }
        markers.push(MarkerReport {
            name: m.name.clone(),
            kind: m.kind,
            location: m.location,
            forward_residual,
            backward_residual,
            codim: 3 - rank,
        });
    }

    Ok(CycleModel {
        map,
        saddles,
        markers,
    })
}

impl CycleSpec {
    /// Two homoclinically related index-2 saddles: a focus with irrational
    /// rotation and a real-spectrum saddle, with an affine corridor carrying
    /// a piece of the real saddle's unstable plane transversally onto the
    /// focus saddle's local stable axis.
    pub fn reference_equidimensional() -> CycleSpec {
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        let p_prime_center = Vector3::new(6.0, 0.0, 0.0);
        // exit point of the unstable plane of p_prime, two steps out of the box
        let corridor_anchor = Vector3::new(6.675, 1.8, 0.0);
        let marker = Vector3::new(0.0, 0.0, 0.5);
        let linear = Matrix3::from_diagonal_element(0.25);
        CycleSpec {
            saddles: vec![
                SaddleSpec {
                    name: "p".into(),
                    center: Vector3::zeros(),
                    half_extent: 1.0,
                    local: SaddleLocal::Focus(SaddleFocusParams {
                        contracting_modulus: 0.5,
                        expanding_modulus: 2.0,
                        rotation: golden,
                        focus_block: FocusBlock::UnstableXy,
                    }),
                },
                SaddleSpec {
                    name: "p_prime".into(),
                    center: p_prime_center,
                    half_extent: 1.0,
                    local: SaddleLocal::Diagonal(Vector3::new(1.5, 3.0, 0.4)),
                },
            ],
            transitions: vec![TransitionSpec {
                name: "t1".into(),
                linear,
                offset: marker - linear * corridor_anchor,
                region_center: corridor_anchor,
                region_half: Vector3::new(0.4, 0.45, 0.4),
            }],
            markers: vec![MarkerSpec {
                name: "wu_pprime_meets_ws_p".into(),
                kind: MarkerKind::Transverse,
                location: marker,
                tangent_u: vec![Vector3::x(), Vector3::y()],
                tangent_s: vec![Vector3::z()],
                forward_saddle: "p".into(),
                backward_saddle: "p_prime".into(),
            }],
        }
    }

    /// A heterodimensional cycle: an index-2 real saddle and an index-1 real
    /// saddle whose one-dimensional invariant manifolds meet quasi-
    /// transversally (tangent spaces sum directly to a plane).
    pub fn reference_heterodimensional() -> CycleSpec {
        let mut spec = CycleSpec::reference_equidimensional();
        let q_prime_center = Vector3::new(0.0, 6.0, 0.0);
        spec.saddles.push(SaddleSpec {
            name: "q_prime".into(),
            center: q_prime_center,
            half_extent: 1.0,
            local: SaddleLocal::Diagonal(Vector3::new(2.5, 0.3, 0.4)),
        });
        // exit point of the unstable axis of q_prime
        let exit = Vector3::new(2.0, 6.0, 0.0);
        let marker = Vector3::new(6.0, 0.0, -0.5);
        let linear = Matrix3::from_diagonal_element(0.2);
        spec.transitions.push(TransitionSpec {
            name: "t2".into(),
            linear,
            offset: marker - linear * exit,
            region_center: exit,
            region_half: Vector3::new(0.9, 0.5, 0.5),
        });
        spec.markers.push(MarkerSpec {
            name: "quasi_transverse_x_prime".into(),
            kind: MarkerKind::QuasiTransverse,
            location: marker,
            tangent_u: vec![Vector3::x()],
            tangent_s: vec![Vector3::z()],
            forward_saddle: "p_prime".into(),
            backward_saddle: "q_prime".into(),
        });
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{classify_saddle, Domain};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_matrix_quarter_turn() {
        let r = rotation_matrix(1.0, 0.25);
        assert_relative_eq!(r, Matrix2::new(0.0, -1.0, 1.0, 0.0), epsilon = 1e-15);
        let r = rotation_matrix(0.5, 0.0);
        assert_relative_eq!(r, Matrix2::new(0.5, 0.0, 0.0, 0.5), epsilon = 1e-15);
        let r = rotation_matrix(2.0, 1.0 / 3.0);
        let s3 = 3.0f64.sqrt();
        assert_relative_eq!(r, Matrix2::new(-1.0, -s3, s3, -1.0), epsilon = 1e-14);
        assert_relative_eq!(r.determinant(), 4.0, epsilon = 1e-13);
    }

    #[test]
    fn saddle_focus_models_match_hand_arithmetic() {
        let stable = make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.5,
                expanding_modulus: 2.0,
                rotation: 0.25,
                focus_block: FocusBlock::StableXy,
            },
            Domain::AllSpace,
        )
        .unwrap();
        assert_relative_eq!(
            stable.eval(&Vector3::new(1.0, 0.0, 1.0)),
            Vector3::new(0.0, 0.5, 2.0),
            epsilon = 1e-15
        );

        let unstable = make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.5,
                expanding_modulus: 2.0,
                rotation: 0.25,
                focus_block: FocusBlock::UnstableXy,
            },
            Domain::AllSpace,
        )
        .unwrap();
        assert_relative_eq!(
            unstable.eval(&Vector3::new(1.0, 0.0, 1.0)),
            Vector3::new(0.0, 2.0, 0.5),
            epsilon = 1e-15
        );
        assert_eq!(unstable.eval(&Vector3::zeros()), Vector3::zeros());
    }

    #[test]
    fn saddle_focus_multiplier_moduli() {
        for (block, expected_u_ind) in [(FocusBlock::StableXy, 1), (FocusBlock::UnstableXy, 2)] {
            let params = SaddleFocusParams {
                contracting_modulus: 0.5,
                expanding_modulus: 2.0,
                rotation: 0.37,
                focus_block: block,
            };
            let map = make_saddle_focus(&params, Domain::AllSpace).unwrap();
            let p = PeriodicPoint::from_location(&map, Vector3::zeros(), 1);
            let class = classify_saddle(&p).unwrap();
            assert_eq!(class.u_ind, expected_u_ind);
            let mut moduli: Vec<f64> = p.multipliers.iter().map(|z| z.norm()).collect();
            moduli.sort_by(f64::total_cmp);
            match block {
                FocusBlock::StableXy => {
                    assert_relative_eq!(moduli[0], 0.5, epsilon = 1e-12);
                    assert_relative_eq!(moduli[1], 0.5, epsilon = 1e-12);
                    assert_relative_eq!(moduli[2], 2.0, epsilon = 1e-12);
                    assert!(class.stable_nonreal && !class.unstable_nonreal);
                }
                FocusBlock::UnstableXy => {
                    assert_relative_eq!(moduli[0], 0.5, epsilon = 1e-12);
                    assert_relative_eq!(moduli[1], 2.0, epsilon = 1e-12);
                    assert_relative_eq!(moduli[2], 2.0, epsilon = 1e-12);
                    assert!(!class.stable_nonreal && class.unstable_nonreal);
                }
            }
        }
    }

    #[test]
    fn inverse_params_invert_the_model() {
        let params = SaddleFocusParams {
            contracting_modulus: 0.5,
            expanding_modulus: 2.0,
            rotation: 0.31,
            focus_block: FocusBlock::UnstableXy,
        };
        let m = params.matrix() * params.inverse().matrix();
        assert_relative_eq!(m, Matrix3::identity(), epsilon = 1e-14);
    }

    #[test]
    fn zero_translation_is_the_base_map() {
        let base = SmoothMap3::identity();
        let pert = BumpPerturbation {
            center: Vector3::new(0.2, 0.0, 0.0),
            support_radius: 0.5,
            action: BumpAction::Translate(Vector3::zeros()),
        };
        let bumped = apply_bump(&base, &pert).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            assert_eq!(bumped.eval(&p), base.eval(&p));
        }
    }

    #[test]
    fn translation_bump_moves_the_center_and_nothing_outside() {
        let base = SmoothMap3::identity();
        let center = Vector3::new(0.3, -0.1, 0.2);
        let d = Vector3::new(0.0, 0.0, -0.01);
        let pert = BumpPerturbation {
            center,
            support_radius: 0.1,
            action: BumpAction::Translate(d),
        };
        let bumped = apply_bump(&base, &pert).unwrap();
        assert_relative_eq!(bumped.eval(&center), center + d, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            let p = center + dir * rng.random_range(0.1..2.0f64);
            if (p - center).norm() >= 0.1 {
                assert_eq!(bumped.eval(&p), base.eval(&p), "bitwise outside support");
            }
        }
        assert!(bumped.metadata("c0_distance").unwrap() <= d.norm() + 1e-15);
        assert!(bumped.metadata("diffeo_margin").unwrap() > 0.0);
    }

    #[test]
    fn oversized_translation_fails_the_guard() {
        let pert = BumpPerturbation {
            center: Vector3::zeros(),
            support_radius: 0.1,
            action: BumpAction::Translate(Vector3::new(0.2, 0.0, 0.0)),
        };
        assert!(matches!(
            apply_bump(&SmoothMap3::identity(), &pert),
            Err(Error::NotDiffeomorphism { .. })
        ));
    }

    #[test]
    fn disjoint_bumps_commute() {
        let base = SmoothMap3::identity();
        let p1 = BumpPerturbation {
            center: Vector3::new(1.0, 0.0, 0.0),
            support_radius: 0.2,
            action: BumpAction::Translate(Vector3::new(0.0, 0.01, 0.0)),
        };
        let p2 = BumpPerturbation {
            center: Vector3::new(-1.0, 0.0, 0.0),
            support_radius: 0.2,
            action: BumpAction::Rotate {
                axis_point: Vector3::new(-1.0, 0.0, 0.0),
                axis_dir: Vector3::z(),
                angle: 0.05,
            },
        };
        let a = apply_bump(&apply_bump(&base, &p1).unwrap(), &p2).unwrap();
        let b = apply_bump(&apply_bump(&base, &p2).unwrap(), &p1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
            assert!((a.eval(&p) - b.eval(&p)).norm() < 1e-15);
        }
    }

    #[test]
    fn bump_jacobians_are_consistent() {
        let base = make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.5,
                expanding_modulus: 2.0,
                rotation: 0.1,
                focus_block: FocusBlock::StableXy,
            },
            Domain::cube(Vector3::zeros(), 1.5),
        )
        .unwrap();
        let pert = BumpPerturbation {
            center: Vector3::new(0.4, 0.2, 0.0),
            support_radius: 0.3,
            action: BumpAction::Rotate {
                axis_point: Vector3::new(0.4, 0.2, 0.0),
                axis_dir: Vector3::new(0.0, 0.3, 1.0),
                angle: 0.2,
            },
        };
        let bumped = apply_bump(&base, &pert).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(bumped.jacobian_consistency(500, &mut rng) < 1e-5);
    }

    #[test]
    fn equidimensional_cycle_assembles_and_verifies_marker() {
        let spec = CycleSpec::reference_equidimensional();
        let model = assemble_cycle_model(&spec).unwrap();
        assert_eq!(model.saddles.len(), 2);
        let (_, p) = &model.saddles[0];
        assert_eq!(p.u_ind, 2);
        assert!(p.unstable_nonreal);
        let (_, pp) = &model.saddles[1];
        assert_eq!(pp.u_ind, 2);
        assert!(!pp.unstable_nonreal);

        assert_eq!(model.markers.len(), 1);
        let m = &model.markers[0];
        assert!(m.forward_residual < 1e-10);
        assert!(m.backward_residual < 1e-10);
        assert_eq!(m.codim, 0);
    }

    #[test]
    fn heterodimensional_cycle_reports_quasi_transverse_codimension_one() {
        let spec = CycleSpec::reference_heterodimensional();
        let model = assemble_cycle_model(&spec).unwrap();
        let quasi = model
            .markers
            .iter()
            .find(|m| m.kind == MarkerKind::QuasiTransverse)
            .unwrap();
        assert_eq!(quasi.codim, 1);
    }

    #[test]
    fn single_saddle_spec_is_the_linear_map_with_no_markers() {
        let spec = CycleSpec {
            saddles: vec![SaddleSpec {
                name: "p".into(),
                center: Vector3::zeros(),
                half_extent: 1.0,
                local: SaddleLocal::Diagonal(Vector3::new(0.5, 2.0, 3.0)),
            }],
            transitions: vec![],
            markers: vec![],
        };
        let model = assemble_cycle_model(&spec).unwrap();
        assert!(model.markers.is_empty());
        let x = Vector3::new(0.2, 0.1, -0.3);
        assert_relative_eq!(
            model.map.eval(&x),
            Vector3::new(0.1, 0.2, -0.9),
            epsilon = 1e-14
        );
    }

    #[test]
    fn overlapping_cores_are_rejected() {
        let mut spec = CycleSpec::reference_equidimensional();
        spec.saddles[1].center = Vector3::new(1.5, 0.0, 0.0);
        assert!(matches!(
            assemble_cycle_model(&spec),
            Err(Error::Overlap(_))
        ));
    }

    #[test]
    fn displaced_marker_fails_verification() {
        let mut spec = CycleSpec::reference_equidimensional();
        spec.markers[0].location = Vector3::new(0.05, 0.0, 0.5);
        assert!(matches!(
            assemble_cycle_model(&spec),
            Err(Error::MarkerMismatch { .. })
        ));
    }

    #[test]
    fn cycle_model_jacobian_is_consistent() {
        let model = assemble_cycle_model(&CycleSpec::reference_equidimensional()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(model.map.jacobian_consistency(500, &mut rng) < 1e-5);
    }
}
