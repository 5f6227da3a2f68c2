//! Representation, iteration and spectral analysis of 3D smooth maps, plus a
//! damped Newton solver for periodic orbits.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;

use crate::numeric::cubic_roots;
use crate::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Region on which a map is considered valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    AllSpace,
    Box { min: Point3, max: Point3 },
}

impl Domain {
    pub fn cube(center: Point3, half_extent: f64) -> Self {
        let h = Vector3::repeat(half_extent);
        Domain::Box {
            min: center - h,
            max: center + h,
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Domain::AllSpace => true,
            Domain::Box { min, max } => (0..3).all(|k| p[k] >= min[k] && p[k] <= max[k]),
        }
    }

    /// Uniform sample; all-space domains are sampled from `[-1, 1]^3`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point3 {
        let (min, max) = match self {
            Domain::AllSpace => (-Vector3::repeat(1.0), Vector3::repeat(1.0)),
            Domain::Box { min, max } => (*min, *max),
        };
        Vector3::from_fn(|k, _| rng.random_range(min[k]..=max[k]))
    }
}

type EvalFn = dyn Fn(&Point3) -> Point3 + Send + Sync;
type JacFn = dyn Fn(&Point3) -> Matrix3<f64> + Send + Sync;

/// A 3D map with exact evaluation and an analytic jacobian.
///
/// Evaluation and jacobian are pure; maps are freely shareable across
/// threads. The jacobian is supplied with the map, never differenced.
#[derive(Clone)]
pub struct SmoothMap3 {
    eval: Arc<EvalFn>,
    jacobian: Arc<JacFn>,
    pub domain: Domain,
    pub label: String,
    /// Free-form numeric annotations (e.g. perturbation distance reports).
    pub metadata: Vec<(String, f64)>,
}

impl fmt::Debug for SmoothMap3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap3")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish()
    }
}

impl SmoothMap3 {
    pub fn new(
        eval: impl Fn(&Point3) -> Point3 + Send + Sync + 'static,
        jacobian: impl Fn(&Point3) -> Matrix3<f64> + Send + Sync + 'static,
        domain: Domain,
        label: impl Into<String>,
    ) -> Self {
        SmoothMap3 {
            eval: Arc::new(eval),
            jacobian: Arc::new(jacobian),
            domain,
            label: label.into(),
            metadata: Vec::new(),
        }
    }

    pub fn identity() -> Self {
        SmoothMap3::new(|p| *p, |_| Matrix3::identity(), Domain::AllSpace, "identity")
    }

    /// Linear map `x -> m x`.
    pub fn linear(m: Matrix3<f64>, domain: Domain, label: impl Into<String>) -> Self {
        SmoothMap3::new(move |p| m * p, move |_| m, domain, label)
    }

    /// Affine map `x -> m x + b`.
    pub fn affine(m: Matrix3<f64>, b: Point3, domain: Domain, label: impl Into<String>) -> Self {
        SmoothMap3::new(move |p| m * p + b, move |_| m, domain, label)
    }

    pub fn eval(&self, p: &Point3) -> Point3 {
        (self.eval)(p)
    }

    pub fn jacobian(&self, p: &Point3) -> Matrix3<f64> {
        (self.jacobian)(p)
    }

    pub fn with_metadata(mut self, key: &str, value: f64) -> Self {
        self.metadata.push((key.to_string(), value));
        self
    }

    pub fn metadata(&self, key: &str) -> Option<f64> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }

    /// `n`-fold composition applied to `p` without recording the orbit.
    pub fn power(&self, p: &Point3, n: usize) -> Point3 {
        let mut x = *p;
        for _ in 0..n {
            x = self.eval(&x);
        }
        x
    }

    /// Jacobian of the `n`-fold composition at `p` (product along the orbit).
    pub fn power_jacobian(&self, p: &Point3, n: usize) -> Matrix3<f64> {
        let mut x = *p;
        let mut j = Matrix3::identity();
        for _ in 0..n {
            j = self.jacobian(&x) * j;
            x = self.eval(&x);
        }
        j
    }

    /// Maximum relative disagreement between the analytic jacobian and
    /// central finite differences of `eval` over `n_points` random domain
    /// points, with step `1e-6 * (1 + |x|)`.
    pub fn jacobian_consistency<R: Rng + ?Sized>(&self, n_points: usize, rng: &mut R) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..n_points {
            let x = self.domain.sample(rng);
            let h = 1e-6 * (1.0 + x.norm());
            let jac = self.jacobian(&x);
            let mut fd = Matrix3::zeros();
            for k in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let df = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
                fd.set_column(k, &df);
            }
            let scale = jac.amax().max(1.0);
            worst = worst.max((fd - jac).amax() / scale);
        }
        worst
    }
}

/// Eigenvalues of a real 3x3 matrix via its characteristic cubic solved in
/// closed form; non-real values occur in exact conjugate pairs. Sorted by
/// modulus, then by imaginary part.
pub fn eigenvalues3(m: &Matrix3<f64>) -> [Complex64; 3] {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let det = m.determinant();
    let mut roots = cubic_roots(-tr, minors, -det);
    roots.sort_by(|a, b| {
        a.norm()
            .total_cmp(&b.norm())
            .then(a.im.total_cmp(&b.im))
    });
    roots
}

/// A located periodic point with the spectrum of its period map.
#[derive(Debug, Clone)]
pub struct PeriodicPoint {
    pub location: Point3,
    pub period: u32,
    /// Eigenvalues of the period-map jacobian, sorted by modulus.
    pub multipliers: [Complex64; 3],
    /// Number of multipliers of modulus > 1.
    pub u_ind: usize,
    /// The contracting block contains a non-real pair.
    pub stable_nonreal: bool,
    /// The expanding block contains a non-real pair.
    pub unstable_nonreal: bool,
}

impl PeriodicPoint {
    pub fn from_location(map: &SmoothMap3, location: Point3, period: u32) -> Self {
        let j = map.power_jacobian(&location, period as usize);
        let multipliers = eigenvalues3(&j);
        let u_ind = multipliers.iter().filter(|z| z.norm() > 1.0).count();
        PeriodicPoint {
            location,
            period,
            multipliers,
            u_ind,
            stable_nonreal: multipliers.iter().any(|z| z.norm() < 1.0 && z.im != 0.0),
            unstable_nonreal: multipliers.iter().any(|z| z.norm() > 1.0 && z.im != 0.0),
        }
    }
}

/// Saddle classification derived from the multiplier spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralClass {
    pub u_ind: usize,
    pub stable_nonreal: bool,
    pub unstable_nonreal: bool,
    /// The multiplier nearest the unit circle on at least one side (weakest
    /// contracting or weakest expanding) is real with multiplicity one.
    pub real_central: bool,
}

const UNIT_CIRCLE_TOL: f64 = 1e-9;

/// Classify a hyperbolic periodic point by its multipliers.
pub fn classify_saddle(p: &PeriodicPoint) -> Result<SpectralClass> {
    for z in &p.multipliers {
        if (z.norm() - 1.0).abs() <= UNIT_CIRCLE_TOL {
            return Err(Error::NonHyperbolic { modulus: z.norm() });
        }
    }
    let is_simple_real = |z: &Complex64| {
        z.im == 0.0
            && p.multipliers
                .iter()
                .filter(|w| (*w - z).norm() <= UNIT_CIRCLE_TOL)
                .count()
                == 1
    };
    let weakest_contracting = p
        .multipliers
        .iter()
        .filter(|z| z.norm() < 1.0)
        .max_by(|a, b| a.norm().total_cmp(&b.norm()));
    let weakest_expanding = p
        .multipliers
        .iter()
        .filter(|z| z.norm() > 1.0)
        .min_by(|a, b| a.norm().total_cmp(&b.norm()));
    let real_central = weakest_contracting.is_some_and(is_simple_real)
        || weakest_expanding.is_some_and(is_simple_real);
    Ok(SpectralClass {
        u_ind: p.u_ind,
        stable_nonreal: p.stable_nonreal,
        unstable_nonreal: p.unstable_nonreal,
        real_central,
    })
}

const INVERSION_RESIDUAL: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;
const SINGULAR_COND: f64 = 1e14;

fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Newton solve of `map(y) = target`, seeded at `seed`, with step halving.
pub fn newton_invert(map: &SmoothMap3, target: &Point3, seed: &Point3) -> Result<Point3> {
    let mut y = *seed;
    let mut residual = (map.eval(&y) - target).norm();
    for _ in 0..50 {
        if residual < INVERSION_RESIDUAL {
            return Ok(y);
        }
        let j = map.jacobian(&y);
        let rhs = target - map.eval(&y);
        let step = j
            .lu()
            .solve(&rhs)
            .ok_or(Error::InverseDivergence { residual })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = y + scale * step;
            let r = (map.eval(&candidate) - target).norm();
            if r < residual {
                y = candidate;
                residual = r;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::InverseDivergence { residual });
        }
    }
    if residual < INVERSION_RESIDUAL {
        Ok(y)
    } else {
        Err(Error::InverseDivergence { residual })
    }
}

/// Orbit of `x` under `map` (or its Newton inverse for negative `n`).
///
/// Returns `|n| + 1` points starting at `x`; errors with the offending step
/// if an iterate leaves the domain.
pub fn iterate(map: &SmoothMap3, x: &Point3, n: i64) -> Result<Vec<Point3>> {
    if !map.domain.contains(x) {
        return Err(Error::DomainEscape { step: 0 });
    }
    let mut orbit = Vec::with_capacity(n.unsigned_abs() as usize + 1);
    orbit.push(*x);
    let mut current = *x;
    for k in 1..=n.abs() {
        current = if n > 0 {
            map.eval(&current)
        } else {
            newton_invert(map, &current, &current)?
        };
        if !map.domain.contains(&current) {
            return Err(Error::DomainEscape {
                step: if n > 0 { k } else { -k },
            });
        }
        orbit.push(current);
    }
    Ok(orbit)
}

/// Damped Newton search for a periodic orbit of the given period.
///
/// The Newton matrix is the exact jacobian product along the trial orbit
/// minus the identity; steps are halved (up to 30 times) whenever the
/// residual fails to decrease.
pub fn find_periodic_orbit(
    map: &SmoothMap3,
    seed: &Point3,
    period: u32,
    newton_tol: f64,
    max_iter: usize,
) -> Result<PeriodicPoint> {
    assert!(period >= 1, "period must be positive");
    let residual_of = |x: &Point3| (map.power(x, period as usize) - x).norm();
    let mut x = *seed;
    let mut residual = residual_of(&x);
    for _ in 0..max_iter {
        if residual < newton_tol {
            return Ok(PeriodicPoint::from_location(map, x, period));
        }
        if !residual.is_finite() {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                residual,
            });
        }
        let newton_matrix = map.power_jacobian(&x, period as usize) - Matrix3::identity();
        let cond = condition_number(&newton_matrix);
        if cond > SINGULAR_COND {
            return Err(Error::SingularJacobian { cond });
        }
        let rhs = x - map.power(&x, period as usize);
        let step = newton_matrix
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularJacobian { cond })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = x + scale * step;
            let r = residual_of(&candidate);
            if r < residual {
                x = candidate;
                residual = r;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                residual,
            });
        }
    }
    if residual < newton_tol {
        Ok(PeriodicPoint::from_location(map, x, period))
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual,
        })
    }
}
