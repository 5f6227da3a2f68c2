//! Local invariant manifolds by graph transform, and patch globalization by
//! iteration with adaptive resampling.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use num_complex::Complex64;

use crate::map::{newton_invert, PeriodicPoint, Point3, SmoothMap3};
use crate::patch::{
    frame_from_tangent, frame_from_tangent_plane, ManifoldPatch, PatchKind, PatchSample,
};
use crate::{Error, Result};

/// Which invariant manifold of a periodic point to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldSide {
    Stable,
    Unstable,
    StrongStable,
    StrongUnstable,
}

const SPECTRAL_GAP: f64 = 1.0 + 1e-6;
const GRAPH_DEFECT_TOL: f64 = 1e-8;
const GRAPH_MAX_SWEEPS: usize = 200;

/// Unit eigendirection for a real simple eigenvalue: smallest right singular
/// vector of `J - lambda I`.
fn real_eigendirection(j: &Matrix3<f64>, lambda: f64) -> Vector3<f64> {
    let m = j - Matrix3::identity() * lambda;
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("svd of 3x3");
    vt.row(2).transpose().normalize()
}

/// Orthonormal basis of the invariant plane of a complex-conjugate pair:
/// null space of the real quadratic factor `J^2 - 2 Re(l) J + |l|^2 I`.
fn pair_plane(j: &Matrix3<f64>, lambda: Complex64) -> [Vector3<f64>; 2] {
    let m = j * j - j * (2.0 * lambda.re) + Matrix3::identity() * lambda.norm_sqr();
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("svd of 3x3");
    let b1: Vector3<f64> = vt.row(2).transpose().normalize();
    let mut b2: Vector3<f64> = vt.row(1).transpose().into_owned();
    b2 -= b1 * b1.dot(&b2);
    [b1, b2.normalize()]
}

struct SelectedSubspace {
    basis: Vec<Vector3<f64>>,
    /// True when the subspace expands under the forward map.
    expanding: bool,
}

fn select_subspace(
    p: &PeriodicPoint,
    j: &Matrix3<f64>,
    side: ManifoldSide,
) -> Result<SelectedSubspace> {
    let stable: Vec<Complex64> = p
        .multipliers
        .iter()
        .copied()
        .filter(|z| z.norm() < 1.0)
        .collect();
    let unstable: Vec<Complex64> = p
        .multipliers
        .iter()
        .copied()
        .filter(|z| z.norm() > 1.0)
        .collect();

    let block_basis = |block: &[Complex64], jac: &Matrix3<f64>| -> Vec<Vector3<f64>> {
        if block.len() == 2 && block[0].im != 0.0 {
            pair_plane(jac, block[0]).to_vec()
        } else {
            block
                .iter()
                .map(|z| real_eigendirection(jac, z.re))
                .collect()
        }
    };

    let strong_of = |block: &[Complex64], outermost: bool| -> Result<Complex64> {
        if block.len() < 2 {
            return Err(Error::SpectralGapMissing(
                "block has no dominated direction".into(),
            ));
        }
        if block.iter().any(|z| z.im != 0.0) {
            return Err(Error::SpectralGapMissing(
                "no dominated splitting inside a complex pair".into(),
            ));
        }
        let mut mods: Vec<f64> = block.iter().map(|z| z.norm()).collect();
        mods.sort_by(f64::total_cmp);
        let (strong, weak) = if outermost {
            (mods[mods.len() - 1], mods[mods.len() - 2])
        } else {
            (mods[0], mods[1])
        };
        let ratio = if outermost { strong / weak } else { weak / strong };
        if ratio < SPECTRAL_GAP {
            return Err(Error::SpectralGapMissing(format!(
                "modulus gap ratio {ratio} below {SPECTRAL_GAP}"
            )));
        }
        Ok(*block
            .iter()
            .find(|z| (z.norm() - strong).abs() < 1e-14)
            .expect("strong member present"))
    };

    match side {
        ManifoldSide::Stable => {
            if stable.is_empty() {
                return Err(Error::SpectralGapMissing(
                    "no contracting multipliers".into(),
                ));
            }
            Ok(SelectedSubspace {
                basis: block_basis(&stable, j),
                expanding: false,
            })
        }
        ManifoldSide::Unstable => {
            if unstable.is_empty() {
                return Err(Error::SpectralGapMissing("no expanding multipliers".into()));
            }
            Ok(SelectedSubspace {
                basis: block_basis(&unstable, j),
                expanding: true,
            })
        }
        ManifoldSide::StrongStable => {
            let lambda = strong_of(&stable, false)?;
            Ok(SelectedSubspace {
                basis: vec![real_eigendirection(j, lambda.re)],
                expanding: false,
            })
        }
        ManifoldSide::StrongUnstable => {
            let lambda = strong_of(&unstable, true)?;
            Ok(SelectedSubspace {
                basis: vec![real_eigendirection(j, lambda.re)],
                expanding: true,
            })
        }
    }
}

/// Grid over the base subspace with values in the complement directions.
struct Graph {
    base: Vec<Vector3<f64>>,
    complement: Vec<Vector3<f64>>,
    origin: Point3,
    size: f64,
    n: usize,
    values: Vec<Vec<f64>>,
    dim: usize,
}

impl Graph {
    fn node_param(&self, idx: usize) -> Vector2<f64> {
        let step = 2.0 * self.size / (self.n - 1) as f64;
        if self.dim == 1 {
            Vector2::new(-self.size + idx as f64 * step, 0.0)
        } else {
            let iu = idx / self.n;
            let iv = idx % self.n;
            Vector2::new(
                -self.size + iu as f64 * step,
                -self.size + iv as f64 * step,
            )
        }
    }

    fn node_count(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    fn point_at(&self, xi: Vector2<f64>, h: &[f64]) -> Point3 {
        let mut p = self.origin + self.base[0] * xi.x;
        if self.dim == 2 {
            p += self.base[1] * xi.y;
        }
        for (c, dir) in self.complement.iter().enumerate() {
            p += dir * h[c];
        }
        p
    }

    /// Cubic (4-point Lagrange) interpolation of stored values per axis;
    /// exact on quadratic graphs, O(h^4) in general.
    fn interpolate(&self, xi: Vector2<f64>) -> Option<Vec<f64>> {
        let step = 2.0 * self.size / (self.n - 1) as f64;
        // stencil start index and the four Lagrange weights at this axis
        let locate = |x: f64| -> Option<(usize, [f64; 4])> {
            let s = (x + self.size) / step;
            if !(-(1e-9)..=(self.n - 1) as f64 + 1e-9).contains(&s) {
                return None;
            }
            let cell = (s.floor().max(0.0) as usize).min(self.n - 2);
            let start = cell.saturating_sub(1).min(self.n - 4);
            let t = s - start as f64;
            let mut w = [0.0; 4];
            for (k, wk) in w.iter_mut().enumerate() {
                let mut prod = 1.0;
                for m in 0..4 {
                    if m != k {
                        prod *= (t - m as f64) / (k as f64 - m as f64);
                    }
                }
                *wk = prod;
            }
            Some((start, w))
        };
        let (su, wu) = locate(xi.x)?;
        let n_components = self.values[0].len();
        if self.dim == 1 {
            let mut out = vec![0.0; n_components];
            for k in 0..4 {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += wu[k] * self.values[su + k][c];
                }
            }
            Some(out)
        } else {
            let (sv, wv) = locate(xi.y)?;
            let idx = |u: usize, v: usize| u * self.n + v;
            let mut out = vec![0.0; n_components];
            for ku in 0..4 {
                for kv in 0..4 {
                    let w = wu[ku] * wv[kv];
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += w * self.values[idx(su + ku, sv + kv)][c];
                    }
                }
            }
            Some(out)
        }
    }
}

/// Local invariant manifold of a periodic point as a graph over the selected
/// eigenspace, refined by the graph transform until the invariance defect
/// over the samples drops below 1e-8.
pub fn local_manifold(
    map: &SmoothMap3,
    p: &PeriodicPoint,
    side: ManifoldSide,
    size: f64,
    h_mesh: f64,
) -> Result<ManifoldPatch> {
    let period = p.period as usize;
    let j = map.power_jacobian(&p.location, period);
    let selected = select_subspace(p, &j, side)?;
    let dim = selected.basis.len();

    let mut base = selected.basis.clone();
    if dim == 2 {
        let b0 = base[0];
        let proj = b0.dot(&base[1]);
        base[1] -= b0 * proj;
        base[1] = base[1].normalize();
    }
    let complement: Vec<Vector3<f64>> = match dim {
        1 => {
            let f = frame_from_tangent(&base[0]);
            vec![f.column(1).into_owned(), f.column(2).into_owned()]
        }
        2 => vec![base[0].cross(&base[1]).normalize()],
        _ => unreachable!(),
    };

    let n = ((2.0 * size / h_mesh).ceil() as usize + 1).max(5);
    let mut graph = Graph {
        base,
        complement,
        origin: p.location,
        size,
        n,
        values: Vec::new(),
        dim,
    };
    graph.values = vec![vec![0.0; graph.complement.len()]; graph.node_count()];

    // forward map for expanding subspaces, Newton inverse for contracting
    let forward = |x: &Point3| -> Result<Point3> {
        if selected.expanding {
            Ok(map.power(x, period))
        } else {
            let mut y = *x;
            for _ in 0..period {
                y = newton_invert(map, &y, &y)?;
            }
            Ok(y)
        }
    };
    let forward_jac = |x: &Point3| -> Result<Matrix3<f64>> {
        if selected.expanding {
            Ok(map.power_jacobian(x, period))
        } else {
            let y = forward(x)?;
            map.power_jacobian(&y, period)
                .try_inverse()
                .ok_or(Error::SingularJacobian {
                    cond: f64::INFINITY,
                })
        }
    };

    // expansion estimate for seeding the base-parameter Newton solve
    let base_rate = {
        let jb = if selected.expanding {
            j
        } else {
            j.try_inverse().ok_or(Error::SingularJacobian {
                cond: f64::INFINITY,
            })?
        };
        let mut rate: f64 = 1.0 + 1e-9;
        for b in &graph.base {
            rate = rate.max((jb * b).norm());
        }
        rate
    };

    let project_base = |v: &Vector3<f64>, g: &Graph| -> Vector2<f64> {
        Vector2::new(
            g.base[0].dot(v),
            if g.dim == 2 { g.base[1].dot(v) } else { 0.0 },
        )
    };

    // slope of the stored graph at a parameter, by central differences
    let graph_tangent = |g: &Graph, xi: Vector2<f64>, axis: usize| -> Vector3<f64> {
        let step = 2.0 * g.size / (g.n - 1) as f64;
        let e = if axis == 0 {
            Vector2::new(step * 0.5, 0.0)
        } else {
            Vector2::new(0.0, step * 0.5)
        };
        let mut t = g.base[axis];
        if let (Some(hp), Some(hm)) = (g.interpolate(xi + e), g.interpolate(xi - e)) {
            for (c, dir) in g.complement.iter().enumerate() {
                t += dir * ((hp[c] - hm[c]) / (2.0 * e.norm()));
            }
        }
        t
    };

    for _sweep in 0..GRAPH_MAX_SWEEPS {
        let mut new_values = graph.values.clone();
        let mut max_update: f64 = 0.0;
        for idx in 0..graph.node_count() {
            let xi = graph.node_param(idx);
            // solve proj_base(F(x(xi')) - origin) = xi for the preimage xi'
            let mut xi_pre = xi / base_rate;
            let mut converged = false;
            for _ in 0..60 {
                let h_pre = graph
                    .interpolate(xi_pre)
                    .unwrap_or_else(|| graph.values[idx].clone());
                let x_pre = graph.point_at(xi_pre, &h_pre);
                let image = forward(&x_pre)?;
                let res = project_base(&(image - graph.origin), &graph) - xi;
                if res.norm() < 1e-13 * (1.0 + size) + 1e-15 {
                    converged = true;
                    break;
                }
                let jac_full = forward_jac(&x_pre)?;
                let d0 = jac_full * graph_tangent(&graph, xi_pre, 0);
                if graph.dim == 1 {
                    let slope = graph.base[0].dot(&d0);
                    if slope.abs() < 1e-14 {
                        break;
                    }
                    xi_pre.x -= res.x / slope;
                } else {
                    let d1 = jac_full * graph_tangent(&graph, xi_pre, 1);
                    let m = nalgebra::Matrix2::new(
                        graph.base[0].dot(&d0),
                        graph.base[0].dot(&d1),
                        graph.base[1].dot(&d0),
                        graph.base[1].dot(&d1),
                    );
                    match m.try_inverse() {
                        Some(mi) => xi_pre -= mi * res,
                        None => break,
                    }
                }
            }
            if !converged {
                return Err(Error::NoConvergence {
                    iterations: 60,
                    residual: f64::NAN,
                });
            }
            let h_pre = graph
                .interpolate(xi_pre)
                .unwrap_or_else(|| graph.values[idx].clone());
            let image = forward(&graph.point_at(xi_pre, &h_pre))?;
            let rel = image - graph.origin;
            for (c, dir) in graph.complement.iter().enumerate() {
                let v = dir.dot(&rel);
                max_update = max_update.max((v - graph.values[idx][c]).abs());
                new_values[idx][c] = v;
            }
        }
        graph.values = new_values;
        if max_update < GRAPH_DEFECT_TOL * 0.1 {
            break;
        }
    }

    // invariance defect over the samples, fundamental-domain sense: images
    // that land back over the base grid must lie on the graph
    let mut defect: f64 = 0.0;
    for idx in 0..graph.node_count() {
        let xi = graph.node_param(idx);
        let x = graph.point_at(xi, &graph.values[idx]);
        let image = forward(&x)?;
        let xi_img = project_base(&(image - graph.origin), &graph);
        if let Some(h_img) = graph.interpolate(xi_img) {
            let expected = graph.point_at(xi_img, &h_img);
            defect = defect.max((image - expected).norm());
        }
    }
    if defect > GRAPH_DEFECT_TOL {
        return Err(Error::NoConvergence {
            iterations: GRAPH_MAX_SWEEPS,
            residual: defect,
        });
    }

    let kind = match side {
        ManifoldSide::Stable => PatchKind::Stable,
        ManifoldSide::Unstable => PatchKind::Unstable,
        ManifoldSide::StrongStable => PatchKind::StrongStableLeaf,
        ManifoldSide::StrongUnstable => PatchKind::StrongUnstableLeaf,
    };
    let mut samples = Vec::with_capacity(graph.node_count());
    for idx in 0..graph.node_count() {
        let xi = graph.node_param(idx);
        let point = graph.point_at(xi, &graph.values[idx]);
        let frame = if dim == 1 {
            frame_from_tangent(&graph_tangent(&graph, xi, 0))
        } else {
            frame_from_tangent_plane(
                &graph_tangent(&graph, xi, 0),
                &graph_tangent(&graph, xi, 1),
            )
        };
        samples.push(PatchSample { point, frame });
    }
    let (nu, nv) = if dim == 1 { (n, 1) } else { (n, n) };
    let mut patch = ManifoldPatch {
        dim,
        kind,
        nu,
        nv,
        samples,
        owner: Some(p.clone()),
        h_mesh,
    };
    patch.h_mesh = patch.max_spacing().max(h_mesh);
    Ok(patch)
}

const DEFAULT_SAMPLE_BUDGET: usize = 200_000;

/// Image of a patch under `map^n` with adaptive resampling: curves keep their
/// image spacing at or below `h_mesh` by midpoint insertion against the
/// source polyline, surfaces refine by whole-grid doubling.
pub fn globalize(
    map: &SmoothMap3,
    patch: &ManifoldPatch,
    n: u32,
    h_mesh: f64,
    budget: Option<usize>,
) -> Result<ManifoldPatch> {
    let budget = budget.unwrap_or(DEFAULT_SAMPLE_BUDGET);
    if n == 0 {
        return Ok(patch.clone());
    }
    let steps = n as usize;
    let advance = |x: &Point3| -> Result<(Point3, Matrix3<f64>)> {
        let mut y = *x;
        let mut jac = Matrix3::identity();
        for k in 0..steps {
            if !map.domain.contains(&y) {
                return Err(Error::DomainEscape { step: k as i64 });
            }
            jac = map.jacobian(&y) * jac;
            y = map.eval(&y);
        }
        if !map.domain.contains(&y) {
            return Err(Error::DomainEscape { step: steps as i64 });
        }
        Ok((y, jac))
    };

    if patch.dim == 1 {
        let params = patch.arclength_params();
        let total = *params.last().unwrap();
        let source_at = |t: f64| -> (Point3, Vector3<f64>) {
            let t = t.clamp(0.0, total);
            let seg = match params.binary_search_by(|q| q.total_cmp(&t)) {
                Ok(i) => i.min(patch.nu - 2),
                Err(i) => i.saturating_sub(1).min(patch.nu - 2),
            };
            let t0 = params[seg];
            let t1 = params[seg + 1];
            let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            let p0 = patch.samples[seg].point;
            let p1 = patch.samples[seg + 1].point;
            let tangent = patch.tangent1(seg) * (1.0 - f) + patch.tangent1(seg + 1) * f;
            (p0 + (p1 - p0) * f, tangent)
        };

        let mut ts: Vec<f64> = params.clone();
        let mut images: Vec<(Point3, Vector3<f64>)> = Vec::with_capacity(ts.len());
        for &t in &ts {
            let (src, tan) = source_at(t);
            let (img, jac) = advance(&src)?;
            images.push((img, (jac * tan).normalize()));
        }
        loop {
            let mut inserted = false;
            let mut i = 0;
            while i + 1 < ts.len() {
                let spacing = (images[i + 1].0 - images[i].0).norm();
                if spacing > h_mesh {
                    if ts.len() >= budget {
                        return Err(Error::MeshBlowup { budget });
                    }
                    let tm = 0.5 * (ts[i] + ts[i + 1]);
                    let (src, tan) = source_at(tm);
                    let (img, jac) = advance(&src)?;
                    ts.insert(i + 1, tm);
                    images.insert(i + 1, (img, (jac * tan).normalize()));
                    inserted = true;
                }
                i += 1;
            }
            if !inserted {
                break;
            }
        }
        let samples: Vec<PatchSample> = images
            .iter()
            .map(|(p, t)| PatchSample {
                point: *p,
                frame: frame_from_tangent(t),
            })
            .collect();
        let mut out = ManifoldPatch {
            dim: 1,
            kind: patch.kind,
            nu: samples.len(),
            nv: 1,
            samples,
            owner: patch.owner.clone(),
            h_mesh,
        };
        out.h_mesh = out.max_spacing().max(h_mesh);
        return Ok(out);
    }

    let mut nu = patch.nu;
    let mut nv = patch.nv;
    loop {
        if nu * nv > budget {
            return Err(Error::MeshBlowup { budget });
        }
        let bilinear = |u: f64, v: f64| -> (Point3, Vector3<f64>, Vector3<f64>) {
            let su = u * (patch.nu - 1) as f64;
            let sv = v * (patch.nv - 1) as f64;
            let iu = (su.floor() as usize).min(patch.nu - 2);
            let iv = (sv.floor() as usize).min(patch.nv - 2);
            let fu = su - iu as f64;
            let fv = sv - iv as f64;
            let p = |a: usize, b: usize| patch.sample(a, b).point;
            let point = p(iu, iv) * (1.0 - fu) * (1.0 - fv)
                + p(iu, iv + 1) * (1.0 - fu) * fv
                + p(iu + 1, iv) * fu * (1.0 - fv)
                + p(iu + 1, iv + 1) * fu * fv;
            let du = (p(iu + 1, iv) - p(iu, iv)) * (1.0 - fv)
                + (p(iu + 1, iv + 1) - p(iu, iv + 1)) * fv;
            let dv = (p(iu, iv + 1) - p(iu, iv)) * (1.0 - fu)
                + (p(iu + 1, iv + 1) - p(iu + 1, iv)) * fu;
            (point, du, dv)
        };
        let mut samples = Vec::with_capacity(nu * nv);
        let mut max_spacing: f64 = 0.0;
        let mut prev_row: Vec<Point3> = Vec::new();
        let mut escaped: Option<Error> = None;
        'rows: for iu in 0..nu {
            let mut row: Vec<Point3> = Vec::with_capacity(nv);
            for iv in 0..nv {
                let u = iu as f64 / (nu - 1) as f64;
                let v = iv as f64 / (nv - 1) as f64;
                let (src, du, dv) = bilinear(u, v);
                let (img, jac) = match advance(&src) {
                    Ok(x) => x,
                    Err(e) => {
                        escaped = Some(e);
                        break 'rows;
                    }
                };
                samples.push(PatchSample {
                    point: img,
                    frame: frame_from_tangent_plane(&(jac * du), &(jac * dv)),
                });
                if iv > 0 {
                    max_spacing = max_spacing.max((img - row[iv - 1]).norm());
                }
                if iu > 0 {
                    max_spacing = max_spacing.max((img - prev_row[iv]).norm());
                }
                row.push(img);
            }
            prev_row = row;
        }
        if let Some(e) = escaped {
            return Err(e);
        }
        if max_spacing <= h_mesh {
            let mut out = ManifoldPatch {
                dim: 2,
                kind: patch.kind,
                nu,
                nv,
                samples,
                owner: patch.owner.clone(),
                h_mesh,
            };
            out.h_mesh = out.max_spacing().max(h_mesh);
            return Ok(out);
        }
        if (nu * 2 - 1) * (nv * 2 - 1) > budget {
            return Err(Error::MeshBlowup { budget });
        }
        nu = nu * 2 - 1;
        nv = nv * 2 - 1;
    }
}

/// C1 distance from `a` to `b`: sup over the samples of `a` that project into
/// the footprint of `b` of point distance to `b` plus the largest principal
/// angle between the tangent spans there. Samples overhanging the ends or
/// rim of `b` are excluded (the comparison is over `b`'s own extent).
/// `None` when no sample of `a` projects onto `b`.
pub fn c1_distance(a: &ManifoldPatch, b: &ManifoldPatch) -> Option<f64> {
    let mut sup: Option<f64> = None;
    for (i, s) in a.samples.iter().enumerate() {
        let (j, node_dist) = b.nearest_sample(&s.point);
        let dist = if b.dim == 1 {
            // distance to the polyline, excluding end overhang
            let mut best: Option<f64> = None;
            for seg in [j.wrapping_sub(1), j] {
                if seg >= b.nu - 1 {
                    continue;
                }
                let p0 = b.samples[seg].point;
                let p1 = b.samples[seg + 1].point;
                let d = p1 - p0;
                let len2 = d.norm_squared();
                if len2 == 0.0 {
                    continue;
                }
                let t = (s.point - p0).dot(&d) / len2;
                if !(0.0..=1.0).contains(&t) {
                    continue;
                }
                let dd = (s.point - (p0 + d * t)).norm();
                best = Some(best.map_or(dd, |x: f64| x.min(dd)));
            }
            match best {
                Some(d) => d,
                None => continue, // overhangs both adjacent segments
            }
        } else {
            // exclude rim overhang for surface references
            let iu = j / b.nv;
            let iv = j % b.nv;
            let on_rim = iu == 0 || iv == 0 || iu == b.nu - 1 || iv == b.nv - 1;
            if on_rim {
                let normal = b.normal(j);
                let offset = s.point - b.samples[j].point;
                let tangential = (offset - normal * normal.dot(&offset)).norm();
                if tangential > 0.75 * b.h_mesh {
                    continue;
                }
            }
            node_dist
        };
        let k = a.dim.min(b.dim);
        let ua = DMatrix::from_fn(3, a.dim, |r, c| a.samples[i].frame[(r, c)]);
        let ub = DMatrix::from_fn(3, b.dim, |r, c| b.samples[j].frame[(r, c)]);
        let overlap = ua.transpose() * ub;
        let sv = overlap.svd(false, false).singular_values;
        let mut svs: Vec<f64> = sv.iter().copied().collect();
        svs.sort_by(f64::total_cmp);
        let cos = svs[svs.len() - k].clamp(-1.0, 1.0);
        let total = dist + cos.acos();
        sup = Some(sup.map_or(total, |s: f64| s.max(total)));
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{find_periodic_orbit, Domain};
    use crate::models::{make_saddle_focus, FocusBlock, SaddleFocusParams};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn unstable_focus_map() -> SmoothMap3 {
        make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.5,
                expanding_modulus: 2.0,
                rotation: (5.0f64.sqrt() - 1.0) / 2.0,
                focus_block: FocusBlock::UnstableXy,
            },
            Domain::AllSpace,
        )
        .unwrap()
    }

    #[test]
    fn linear_unstable_manifold_is_the_xy_plane() {
        let map = unstable_focus_map();
        let p = find_periodic_orbit(&map, &Vector3::new(0.1, 0.1, 0.1), 1, 1e-12, 50).unwrap();
        let patch = local_manifold(&map, &p, ManifoldSide::Unstable, 0.5, 0.05).unwrap();
        assert_eq!(patch.dim, 2);
        for s in &patch.samples {
            assert!(s.point.z.abs() < 1e-10);
        }
        patch.validate().unwrap();
    }

    #[test]
    fn linear_stable_manifold_is_the_z_axis() {
        let map = unstable_focus_map();
        let p = find_periodic_orbit(&map, &Vector3::new(0.1, 0.1, 0.1), 1, 1e-12, 50).unwrap();
        let patch = local_manifold(&map, &p, ManifoldSide::Stable, 0.5, 0.05).unwrap();
        assert_eq!(patch.dim, 1);
        for s in &patch.samples {
            assert!(s.point.x.abs() < 1e-10 && s.point.y.abs() < 1e-10);
        }
    }

    #[test]
    fn strong_unstable_of_diagonal_model_is_dominant_axis() {
        let map = SmoothMap3::linear(
            Matrix3::from_diagonal(&Vector3::new(2.0, 3.0, 0.5)),
            Domain::AllSpace,
            "diag",
        );
        let p = find_periodic_orbit(&map, &Vector3::new(0.1, 0.1, 0.1), 1, 1e-12, 50).unwrap();
        let patch = local_manifold(&map, &p, ManifoldSide::StrongUnstable, 0.5, 0.05).unwrap();
        for s in &patch.samples {
            assert!(s.point.x.abs() < 1e-10 && s.point.z.abs() < 1e-10);
        }
    }

    #[test]
    fn focus_block_has_no_strong_stable_direction() {
        let map = make_saddle_focus(
            &SaddleFocusParams {
                contracting_modulus: 0.5,
                expanding_modulus: 2.0,
                rotation: 0.25,
                focus_block: FocusBlock::StableXy,
            },
            Domain::AllSpace,
        )
        .unwrap();
        let p = find_periodic_orbit(&map, &Vector3::new(0.1, 0.1, 0.1), 1, 1e-12, 50).unwrap();
        assert!(matches!(
            local_manifold(&map, &p, ManifoldSide::StrongStable, 0.5, 0.05),
            Err(Error::SpectralGapMissing(_))
        ));
    }

    #[test]
    fn curved_unstable_manifold_matches_closed_form() {
        // (x, y, z) -> (2x, 3y, z/2 + x^2): unstable graph z = (2/7) x^2
        let map = SmoothMap3::new(
            |p| Vector3::new(2.0 * p.x, 3.0 * p.y, 0.5 * p.z + p.x * p.x),
            |p| Matrix3::new(2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 2.0 * p.x, 0.0, 0.5),
            Domain::AllSpace,
            "curved-unstable",
        );
        let p = find_periodic_orbit(&map, &Vector3::new(0.01, 0.01, 0.01), 1, 1e-12, 50).unwrap();
        let patch = local_manifold(&map, &p, ManifoldSide::Unstable, 0.4, 0.04).unwrap();
        for s in &patch.samples {
            assert_relative_eq!(
                s.point.z,
                2.0 / 7.0 * s.point.x * s.point.x,
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn curved_stable_manifold_matches_closed_form() {
        // (x, y, z) -> (x/2, 2y/5, 2z + x^2): stable graph z = -(4/7) x^2
        let map = SmoothMap3::new(
            |p| Vector3::new(0.5 * p.x, 0.4 * p.y, 2.0 * p.z + p.x * p.x),
            |p| Matrix3::new(0.5, 0.0, 0.0, 0.0, 0.4, 0.0, 2.0 * p.x, 0.0, 2.0),
            Domain::AllSpace,
            "curved-stable",
        );
        let p = find_periodic_orbit(&map, &Vector3::new(0.01, 0.01, 0.01), 1, 1e-12, 50).unwrap();
        let patch = local_manifold(&map, &p, ManifoldSide::Stable, 0.3, 0.03).unwrap();
        for s in &patch.samples {
            assert_relative_eq!(
                s.point.z,
                -(4.0 / 7.0) * s.point.x * s.point.x,
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn globalize_scales_segments_by_the_expanding_modulus() {
        let map = unstable_focus_map();
        let seg = ManifoldPatch::line_segment(
            Vector3::zeros(),
            Vector3::x(),
            0.1,
            21,
            PatchKind::Unstable,
        );
        let image = globalize(&map, &seg, 3, 0.2, None).unwrap();
        let half_len = image.points().map(|p| p.norm()).fold(0.0f64, f64::max);
        assert_relative_eq!(half_len, 0.1 * 8.0, epsilon = 1e-10);
    }

    #[test]
    fn globalize_zero_steps_is_identity() {
        let map = unstable_focus_map();
        let seg = ManifoldPatch::line_segment(
            Vector3::zeros(),
            Vector3::x(),
            0.1,
            11,
            PatchKind::Generic,
        );
        let image = globalize(&map, &seg, 0, 0.05, None).unwrap();
        assert_eq!(image.nu, seg.nu);
        for (a, b) in image.points().zip(seg.points()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn backward_images_approach_the_strong_stable_axis() {
        // Backward iteration realized through the exact inverse model.
        let params = SaddleFocusParams {
            contracting_modulus: 0.5,
            expanding_modulus: 2.0,
            rotation: (5.0f64.sqrt() - 1.0) / 2.0,
            focus_block: FocusBlock::UnstableXy,
        };
        let inverse = make_saddle_focus(&params.inverse(), Domain::AllSpace).unwrap();
        let seed = ManifoldPatch::curve_from_fn(
            |t| Vector3::new(0.05 + 0.3 * t, 0.1 * t, t),
            (-0.3, 0.3),
            41,
            PatchKind::Generic,
        );
        let reference = ManifoldPatch::line_segment(
            Vector3::zeros(),
            Vector3::z(),
            0.5,
            41,
            PatchKind::StrongStableLeaf,
        );
        let mut last = f64::INFINITY;
        for n in 1..=6 {
            let image = globalize(&inverse, &seed, n, 0.1, None).unwrap();
            let d = c1_distance(&image, &reference).unwrap();
            assert!(
                d < last,
                "C1 distance must decrease: step {n}: {d} !< {last}"
            );
            last = d;
        }
    }
}
