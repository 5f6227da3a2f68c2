//! The cubic normal-form family in cylindrical coordinates, its attracting
//! invariant circle, a unit-modulus crossing scan for the multiplier pair,
//! and least-squares estimation of the cubic coefficient from radial return
//! data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::map::{eigenvalues3, find_periodic_orbit, Domain, Point3, SmoothMap3};
use crate::{Error, Result};

type RadialFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Optional smooth remainder terms: a radial term expected to be O(r^4) and
/// an angular term expected to be O(r^2), each supplied with its exact
/// r-derivative so the map's jacobian stays analytic.
#[derive(Clone)]
pub struct HopfRemainder {
    pub radial: Arc<RadialFn>,
    pub radial_dr: Arc<RadialFn>,
    pub angular: Arc<RadialFn>,
    pub angular_dr: Arc<RadialFn>,
}

impl std::fmt::Debug for HopfRemainder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HopfRemainder")
    }
}

impl HopfRemainder {
    /// Polynomial remainder `c4 r^4` radially and `c2 r^2` angularly.
    pub fn polynomial(c4: f64, c2: f64) -> Self {
        HopfRemainder {
            radial: Arc::new(move |r, _mu| c4 * r.powi(4)),
            radial_dr: Arc::new(move |r, _mu| 4.0 * c4 * r.powi(3)),
            angular: Arc::new(move |r, _mu| c2 * r * r),
            angular_dr: Arc::new(move |r, _mu| 2.0 * c2 * r),
        }
    }
}

/// Parameters of the normal-form family. Without a remainder the map is the
/// exact truncated cubic form.
#[derive(Debug, Clone)]
pub struct HopfFamilyParams {
    pub mu: f64,
    /// Cubic coefficient, positive at the bifurcation.
    pub a: f64,
    /// Rotation per period, in radians.
    pub beta: f64,
    /// Normal contraction factor, `0 < |gamma| < 1`.
    pub gamma: f64,
    pub period: u32,
    pub remainder: Option<HopfRemainder>,
}

impl HopfFamilyParams {
    pub fn truncated(mu: f64, a: f64, beta: f64, gamma: f64) -> Self {
        HopfFamilyParams {
            mu,
            a,
            beta,
            gamma,
            period: 1,
            remainder: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a <= 0.0 {
            return Err(Error::Precondition(format!(
                "cubic coefficient must be positive (got {})",
                self.a
            )));
        }
        if !(self.gamma.abs() > 0.0 && self.gamma.abs() < 1.0) {
            return Err(Error::Precondition(format!(
                "normal factor must satisfy 0 < |gamma| < 1 (got {})",
                self.gamma
            )));
        }
        Ok(())
    }

    fn radial_image(&self, r: f64) -> f64 {
        let mut out = (1.0 + self.mu) * r - self.a * r * r * r;
        if let Some(rem) = &self.remainder {
            out += (rem.radial)(r, self.mu);
        }
        out
    }

    fn radial_image_dr(&self, r: f64) -> f64 {
        let mut out = (1.0 + self.mu) - 3.0 * self.a * r * r;
        if let Some(rem) = &self.remainder {
            out += (rem.radial_dr)(r, self.mu);
        }
        out
    }
}

const TINY_RADIUS: f64 = 1e-150;

/// The normal-form map in Cartesian `(x, y, t)` coordinates. The polar
/// singularity at the axis is removable: the linear part there is the scaled
/// rotation block plus the normal factor.
pub fn hopf_map(params: &HopfFamilyParams) -> Result<SmoothMap3> {
    params.validate()?;
    let half = if params.mu > 0.0 {
        2.0 * (params.mu / params.a).sqrt()
    } else {
        1.5 * 0.2
    };
    let domain = Domain::Box {
        min: Vector3::new(-half, -half, -1.0),
        max: Vector3::new(half, half, 1.0),
    };

    let p_eval = params.clone();
    let p_jac = params.clone();

    let eval = move |p: &Point3| -> Point3 {
        let r = p.x.hypot(p.y);
        // radial multiplier against r, with the O(r^4)/r term vanishing at 0
        let factor = if r < TINY_RADIUS {
            1.0 + p_eval.mu
        } else {
            p_eval.radial_image(r) / r
        };
        let mut angle = p_eval.beta;
        if let Some(rem) = &p_eval.remainder {
            angle += (rem.angular)(r, p_eval.mu);
        }
        let (s, c) = angle.sin_cos();
        Vector3::new(
            factor * (c * p.x - s * p.y),
            factor * (s * p.x + c * p.y),
            p_eval.gamma * p.z,
        )
    };

    let jacobian = move |p: &Point3| -> Matrix3<f64> {
        let r = p.x.hypot(p.y);
        let mu = p_jac.mu;
        let (factor, dfactor) = if r < TINY_RADIUS {
            (1.0 + mu, 0.0)
        } else {
            let q = p_jac
                .remainder
                .as_ref()
                .map_or(0.0, |rem| (rem.radial)(r, mu) / r);
            let dq = p_jac.remainder.as_ref().map_or(0.0, |rem| {
                ((rem.radial_dr)(r, mu) * r - (rem.radial)(r, mu)) / (r * r)
            });
            (
                (1.0 + mu) - p_jac.a * r * r + q,
                -2.0 * p_jac.a * r + dq,
            )
        };
        let mut angle = p_jac.beta;
        let mut dangle = 0.0;
        if let Some(rem) = &p_jac.remainder {
            angle += (rem.angular)(r, mu);
            dangle = (rem.angular_dr)(r, mu);
        }
        let (s, c) = angle.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let drot = Matrix2::new(-s, -c, c, -s);
        let v = nalgebra::Vector2::new(p.x, p.y);
        let mut planar = rot * factor;
        if r >= TINY_RADIUS {
            let radial_dir = v / r;
            let col = rot * v * dfactor + drot * v * (factor * dangle);
            planar += col * radial_dir.transpose();
        }
        let mut out = Matrix3::zeros();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&planar);
        out[(2, 2)] = p_jac.gamma;
        out
    };

    Ok(SmoothMap3::new(eval, jacobian, domain, "hopf-normal-form"))
}

/// The invariant circle of the normal form and its transversal rates.
#[derive(Debug, Clone, Copy)]
pub struct InvariantCircle {
    pub radius: f64,
    pub radial_multiplier: f64,
    pub normal_multiplier: f64,
    pub attracting: bool,
}

/// Radius and transversal multipliers of the invariant circle for `mu > 0`.
///
/// The truncated family has the exact root `sqrt(mu/a)`; with a remainder the
/// radial fixed-point equation is solved by Newton seeded there.
pub fn invariant_circle(params: &HopfFamilyParams) -> Result<InvariantCircle> {
    params.validate()?;
    if params.mu <= 0.0 {
        return Err(Error::NotBorn { mu: params.mu });
    }
    let seed = (params.mu / params.a).sqrt();
    let radius = if params.remainder.is_none() {
        seed
    } else {
        let mut r = seed;
        let mut converged = false;
        for _ in 0..80 {
            let g = params.radial_image(r) - r;
            let dg = params.radial_image_dr(r) - 1.0;
            if dg.abs() < 1e-300 {
                break;
            }
            let step = g / dg;
            r -= step;
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::NewtonDivergence);
            }
            if step.abs() < 1e-15 * (1.0 + r) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonDivergence);
        }
        r
    };
    let radial_multiplier = params.radial_image_dr(radius);
    Ok(InvariantCircle {
        radius,
        radial_multiplier,
        normal_multiplier: params.gamma,
        attracting: radial_multiplier.abs() < 1.0 && params.gamma.abs() < 1.0,
    })
}

/// One row of the multiplier path emitted by [`ns_scan`].
#[derive(Debug, Clone, Copy)]
pub struct MultiplierSample {
    pub mu: f64,
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

/// Result of a unit-modulus crossing scan.
#[derive(Debug, Clone)]
pub struct NsScan {
    pub mu_star: f64,
    pub pair: Complex64,
    pub modulus_slope: f64,
    pub strong_resonance: bool,
    pub path: Vec<MultiplierSample>,
}

const NS_GRID: usize = 41;
const NS_BISECT_TOL: f64 = 1e-10;
const RESONANCE_WINDOW: f64 = 1e-3;

fn pair_modulus_at(
    family: &dyn Fn(f64) -> SmoothMap3,
    mu: f64,
    period: u32,
    seed: &mut Point3,
) -> Result<Complex64> {
    let map = family(mu);
    let orbit = find_periodic_orbit(&map, seed, period, 1e-12, 50)?;
    *seed = orbit.location;
    orbit
        .multipliers
        .iter()
        .find(|z| z.im > 0.0)
        .copied()
        .ok_or_else(|| Error::Precondition("no non-real multiplier pair".into()))
}

/// Locate the parameter at which the complex multiplier pair of the family's
/// periodic point crosses the unit circle, by grid scan and bisection.
///
/// Nondegeneracy is reported alongside: the modulus slope in `mu` and a
/// strong-resonance flag when the crossing angle is within 1e-3 of a k-th
/// root of unity for k <= 4.
pub fn ns_scan(
    family: &dyn Fn(f64) -> SmoothMap3,
    mu_range: (f64, f64),
    period: u32,
    seed: Point3,
) -> Result<NsScan> {
    let (lo, hi) = mu_range;
    let mut tracked_seed = seed;
    let mut path = Vec::with_capacity(NS_GRID);
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..NS_GRID {
        let mu = lo + (hi - lo) * k as f64 / (NS_GRID - 1) as f64;
        let pair = pair_modulus_at(family, mu, period, &mut tracked_seed)?;
        let m = pair.norm();
        path.push(MultiplierSample {
            mu,
            re: pair.re,
            im: pair.im,
            modulus: m,
        });
        if let Some((mu_prev, m_prev)) = prev {
            if (m_prev - 1.0) * (m - 1.0) <= 0.0 && bracket.is_none() {
                bracket = Some((mu_prev, mu));
            }
        }
        prev = Some((mu, m));
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoCrossing { lo, hi })?;

    let mut bisect_seed = seed;
    let f = |mu: f64, s: &mut Point3| -> Result<f64> {
        Ok(pair_modulus_at(family, mu, period, s)?.norm() - 1.0)
    };
    let mut fa = f(a, &mut bisect_seed)?;
    while b - a > NS_BISECT_TOL {
        let mid = 0.5 * (a + b);
        let fm = f(mid, &mut bisect_seed)?;
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let mu_star = 0.5 * (a + b);
    let mut s = seed;
    let pair = pair_modulus_at(family, mu_star, period, &mut s)?;

    // modulus slope by central difference across the crossing
    let h = ((hi - lo) * 1e-4).max(1e-7);
    let mut s1 = seed;
    let mut s2 = seed;
    let m_plus = pair_modulus_at(family, mu_star + h, period, &mut s1)?.norm();
    let m_minus = pair_modulus_at(family, mu_star - h, period, &mut s2)?.norm();
    let modulus_slope = (m_plus - m_minus) / (2.0 * h);

    let beta0 = pair.arg();
    let tau = 2.0 * std::f64::consts::PI;
    let strong_resonance = (1..=4).any(|k| {
        let d = (k as f64 * beta0).rem_euclid(tau);
        d.min(tau - d) <= RESONANCE_WINDOW
    });

    Ok(NsScan {
        mu_star,
        pair,
        modulus_slope,
        strong_resonance,
        path,
    })
}

/// Cubic-coefficient fit from radial return data.
#[derive(Debug, Clone, Copy)]
pub struct CubicFit {
    pub a: f64,
    pub mu: f64,
    pub residual: f64,
    pub condition: f64,
}

const FIT_COND_LIMIT: f64 = 1e10;

/// Fit `r' = (1 + mu) r - a r^3` to the radial return of `map` about a fixed
/// point with a rotating multiplier pair, over logarithmically spaced radii
/// in `[1e-3, r_max]`.
pub fn estimate_cubic_coeff(
    map: &SmoothMap3,
    center: &Point3,
    samples: usize,
    r_max: f64,
) -> Result<CubicFit> {
    let fp_residual = (map.eval(center) - center).norm();
    if fp_residual > 1e-9 {
        return Err(Error::Precondition(format!(
            "center is not a fixed point (residual {fp_residual:.3e})"
        )));
    }
    let eigs = eigenvalues3(&map.jacobian(center));
    if !eigs.iter().any(|z| z.im != 0.0) {
        return Err(Error::Precondition(
            "center has no rotating multiplier pair".into(),
        ));
    }
    let samples = samples.max(8);
    let r_min: f64 = 1e-3;
    let mut rows = Vec::with_capacity(samples);
    let mut rhs = Vec::with_capacity(samples);
    for k in 0..samples {
        let f = k as f64 / (samples - 1) as f64;
        let r = r_min * (r_max / r_min).powf(f);
        let p = center + Vector3::new(r, 0.0, 0.0);
        let image = map.eval(&p);
        let r_next = (image.x - center.x).hypot(image.y - center.y);
        rows.push([r, r * r * r]);
        rhs.push(r_next);
    }
    let a_mat = DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c]);
    let b_vec = DVector::from_vec(rhs.clone());
    let svd = a_mat.clone().svd(true, true);
    let condition = svd.singular_values.max() / svd.singular_values.min();
    if !condition.is_finite() || condition > FIT_COND_LIMIT {
        return Err(Error::IllConditioned { cond: condition });
    }
    let sol = svd
        .solve(&b_vec, 1e-14)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let residual = (a_mat * &sol - b_vec).norm() / (rows.len() as f64).sqrt();
    Ok(CubicFit {
        a: -sol[1],
        mu: sol[0] - 1.0,
        residual,
        condition,
    })
}
