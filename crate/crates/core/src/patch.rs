//! Sampled invariant-manifold pieces: polylines (dim 1) and structured grid
//! meshes (dim 2) with per-sample orthonormal tangent frames.

use nalgebra::{Matrix3, Vector3};

use crate::map::{PeriodicPoint, Point3};
use crate::{Error, Result};

/// Role of a patch in the surrounding geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchKind {
    Stable,
    Unstable,
    StrongStableLeaf,
    StrongUnstableLeaf,
    CentralStablePlane,
    Generic,
}

/// One sample: a point with an orthonormal frame whose leading columns span
/// the tangent space (one column for curves, two for surfaces) and whose
/// trailing columns are normal.
#[derive(Debug, Clone, Copy)]
pub struct PatchSample {
    pub point: Point3,
    pub frame: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct ManifoldPatch {
    pub dim: usize,
    pub kind: PatchKind,
    /// Grid shape; `nv == 1` for curves. Samples are row-major in `(u, v)`.
    pub nu: usize,
    pub nv: usize,
    pub samples: Vec<PatchSample>,
    pub owner: Option<PeriodicPoint>,
    pub h_mesh: f64,
}

/// Orthonormal frame with `t` as first column.
pub fn frame_from_tangent(t: &Vector3<f64>) -> Matrix3<f64> {
    let t1 = t.normalize();
    let helper = if t1.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let n1 = t1.cross(&helper).normalize();
    let n2 = t1.cross(&n1);
    Matrix3::from_columns(&[t1, n1, n2])
}

/// Orthonormal frame spanning `t1, t2` in its first two columns.
pub fn frame_from_tangent_plane(t1: &Vector3<f64>, t2: &Vector3<f64>) -> Matrix3<f64> {
    let e1 = t1.normalize();
    let n = e1.cross(t2).normalize();
    let e2 = n.cross(&e1);
    Matrix3::from_columns(&[e1, e2, n])
}

impl ManifoldPatch {
    /// Sample a parametric curve; tangents from the analytic parametrization
    /// via central differences of the generator.
    pub fn curve_from_fn(
        f: impl Fn(f64) -> Point3,
        t_range: (f64, f64),
        n: usize,
        kind: PatchKind,
    ) -> ManifoldPatch {
        assert!(n >= 2);
        let (t0, t1) = t_range;
        let dt = (t1 - t0) / (n - 1) as f64;
        let samples = (0..n)
            .map(|i| {
                let t = t0 + i as f64 * dt;
                let h = dt * 1e-3;
                let tangent = (f(t + h) - f(t - h)) / (2.0 * h);
                PatchSample {
                    point: f(t),
                    frame: frame_from_tangent(&tangent),
                }
            })
            .collect();
        let mut patch = ManifoldPatch {
            dim: 1,
            kind,
            nu: n,
            nv: 1,
            samples,
            owner: None,
            h_mesh: 0.0,
        };
        patch.h_mesh = patch.max_spacing();
        patch
    }

    /// Sample a parametric surface on a structured grid.
    pub fn surface_from_fn(
        f: impl Fn(f64, f64) -> Point3,
        u_range: (f64, f64),
        v_range: (f64, f64),
        nu: usize,
        nv: usize,
        kind: PatchKind,
    ) -> ManifoldPatch {
        assert!(nu >= 2 && nv >= 2);
        let du = (u_range.1 - u_range.0) / (nu - 1) as f64;
        let dv = (v_range.1 - v_range.0) / (nv - 1) as f64;
        let mut samples = Vec::with_capacity(nu * nv);
        for iu in 0..nu {
            for iv in 0..nv {
                let u = u_range.0 + iu as f64 * du;
                let v = v_range.0 + iv as f64 * dv;
                let hu = du * 1e-3;
                let hv = dv * 1e-3;
                let tu = (f(u + hu, v) - f(u - hu, v)) / (2.0 * hu);
                let tv = (f(u, v + hv) - f(u, v - hv)) / (2.0 * hv);
                samples.push(PatchSample {
                    point: f(u, v),
                    frame: frame_from_tangent_plane(&tu, &tv),
                });
            }
        }
        let mut patch = ManifoldPatch {
            dim: 2,
            kind,
            nu,
            nv,
            samples,
            owner: None,
            h_mesh: 0.0,
        };
        patch.h_mesh = patch.max_spacing();
        patch
    }

    /// Straight segment through `center` along `direction`.
    pub fn line_segment(
        center: Point3,
        direction: Vector3<f64>,
        half_length: f64,
        n: usize,
        kind: PatchKind,
    ) -> ManifoldPatch {
        let d = direction.normalize();
        ManifoldPatch::curve_from_fn(
            |t| center + t * d,
            (-half_length, half_length),
            n,
            kind,
        )
    }

    /// Planar rectangle spanned by `e1, e2` about `center`.
    pub fn plane(
        center: Point3,
        e1: Vector3<f64>,
        e2: Vector3<f64>,
        half_u: f64,
        half_v: f64,
        nu: usize,
        nv: usize,
        kind: PatchKind,
    ) -> ManifoldPatch {
        let b1 = e1.normalize();
        let b2 = e2.normalize();
        ManifoldPatch::surface_from_fn(
            |u, v| center + u * b1 + v * b2,
            (-half_u, half_u),
            (-half_v, half_v),
            nu,
            nv,
            kind,
        )
    }

    pub fn sample(&self, iu: usize, iv: usize) -> &PatchSample {
        &self.samples[iu * self.nv + iv]
    }

    pub fn points(&self) -> impl Iterator<Item = &Point3> {
        self.samples.iter().map(|s| &s.point)
    }

    /// First tangent column at a sample.
    pub fn tangent1(&self, idx: usize) -> Vector3<f64> {
        self.samples[idx].frame.column(0).into_owned()
    }

    pub fn tangent2(&self, idx: usize) -> Vector3<f64> {
        self.samples[idx].frame.column(1).into_owned()
    }

    /// Surface normal (dim-2 patches).
    pub fn normal(&self, idx: usize) -> Vector3<f64> {
        self.samples[idx].frame.column(2).into_owned()
    }

    pub fn nearest_sample(&self, p: &Point3) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, s) in self.samples.iter().enumerate() {
            let d = (s.point - p).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Largest distance between grid-adjacent samples.
    pub fn max_spacing(&self) -> f64 {
        let mut m: f64 = 0.0;
        for iu in 0..self.nu {
            for iv in 0..self.nv {
                let p = self.sample(iu, iv).point;
                if iu + 1 < self.nu {
                    m = m.max((self.sample(iu + 1, iv).point - p).norm());
                }
                if iv + 1 < self.nv {
                    m = m.max((self.sample(iu, iv + 1).point - p).norm());
                }
            }
        }
        m
    }

    /// Cumulative arclength parameters for a curve patch.
    pub fn arclength_params(&self) -> Vec<f64> {
        assert_eq!(self.dim, 1);
        let mut acc = 0.0;
        let mut params = Vec::with_capacity(self.nu);
        params.push(0.0);
        for i in 1..self.nu {
            acc += (self.samples[i].point - self.samples[i - 1].point).norm();
            params.push(acc);
        }
        params
    }

    /// Check frame orthonormality, mesh resolution, and agreement of frames
    /// with finite differences of the samples.
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 4 {
            return Err(Error::MeshTooCoarse(format!(
                "patch has only {} samples",
                self.samples.len()
            )));
        }
        for s in &self.samples {
            let g = s.frame.transpose() * s.frame;
            if (g - Matrix3::identity()).amax() > 1e-9 {
                return Err(Error::Precondition("patch frame not orthonormal".into()));
            }
        }
        if self.max_spacing() > self.h_mesh * (1.0 + 1e-9) {
            return Err(Error::MeshTooCoarse(format!(
                "mesh spacing {} exceeds declared resolution {}",
                self.max_spacing(),
                self.h_mesh
            )));
        }
        // Chord directions between adjacent samples must agree with the
        // averaged tangent spans to second order (midpoint rule).
        let chord_residual = |a: usize, b: usize| -> f64 {
            let chord = self.samples[b].point - self.samples[a].point;
            if chord.norm() == 0.0 {
                return 0.0;
            }
            let t = chord.normalize();
            let fa = &self.samples[a].frame;
            let fb = &self.samples[b].frame;
            // averaged tangent span between the two samples
            let mut c0 = fa.column(0) + fb.column(0);
            if c0.norm() == 0.0 {
                return 0.0;
            }
            c0.normalize_mut();
            if self.dim == 1 {
                (t - c0 * c0.dot(&t)).norm()
            } else {
                let mut c1 = fa.column(1) + fb.column(1);
                c1 -= c0 * c0.dot(&c1);
                if c1.norm() == 0.0 {
                    return (t - c0 * c0.dot(&t)).norm();
                }
                c1.normalize_mut();
                (t - c0 * c0.dot(&t) - c1 * c1.dot(&t)).norm()
            }
        };
        for iu in 0..self.nu {
            for iv in 0..self.nv {
                let idx = iu * self.nv + iv;
                let mut residual: f64 = 0.0;
                if iu + 1 < self.nu {
                    residual = residual.max(chord_residual(idx, (iu + 1) * self.nv + iv));
                }
                if iv + 1 < self.nv {
                    residual = residual.max(chord_residual(idx, iu * self.nv + iv + 1));
                }
                if residual > 1e-4 {
                    return Err(Error::Precondition(format!(
                        "frame inconsistent with sample differences (residual {residual:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply a rigid motion to all samples and frames.
    pub fn transformed(&self, rot: &nalgebra::Rotation3<f64>, shift: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.point = rot * s.point + shift;
            s.frame = rot.matrix() * s.frame;
        }
        out
    }

    /// CSV export: `u,[v,]x,y,z,t1x,t1y,t1z[,t2x,t2y,t2z]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str("u,x,y,z,t1x,t1y,t1z\n");
        } else {
            out.push_str("u,v,x,y,z,t1x,t1y,t1z,t2x,t2y,t2z\n");
        }
        for iu in 0..self.nu {
            for iv in 0..self.nv {
                let s = self.sample(iu, iv);
                let p = s.point;
                let t1 = s.frame.column(0);
                if self.dim == 1 {
                    out.push_str(&format!(
                        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                        iu, p.x, p.y, p.z, t1.x, t1.y, t1.z
                    ));
                } else {
                    let t2 = s.frame.column(1);
                    out.push_str(&format!(
                        "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                        iu, iv, p.x, p.y, p.z, t1.x, t1.y, t1.z, t2.x, t2.y, t2.z
                    ));
                }
            }
        }
        out
    }
}
