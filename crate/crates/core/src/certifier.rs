//! Skew-product wandering-domain model over a wandering circle map, tubular
//! neighborhoods over its wandering arcs, and a sampling-based certificate of
//! the wandering-domain properties.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::denjoy::{min_periodic_displacement, circle_lyapunov, DenjoyMap};
use crate::hopf::{invariant_circle, HopfFamilyParams};
use crate::map::{Domain, Point3, SmoothMap3};
use crate::numeric::frac;
use crate::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Skew product over the circle map: the cubic radial dynamics and the
/// normal contraction of the family, with the angular coordinate driven by
/// the circle map. The restriction to the invariant circle is exactly the
/// circle map.
pub fn assemble_wandering_model(
    params: &HopfFamilyParams,
    circle_map: &DenjoyMap,
) -> Result<SmoothMap3> {
    params.validate()?;
    let circle = invariant_circle(params)?;
    let r_star = circle.radius;
    let half = 2.0 * r_star;
    let domain = Domain::Box {
        min: Vector3::new(-half, -half, -1.0),
        max: Vector3::new(half, half, 1.0),
    };
    let p_eval = params.clone();
    let d_eval = circle_map.clone();
    let p_jac = params.clone();
    let d_jac = circle_map.clone();
    let radial = move |p: &HopfFamilyParams, r: f64| -> f64 {
        let mut out = (1.0 + p.mu) * r - p.a * r * r * r;
        if let Some(rem) = &p.remainder {
            out += (rem.radial)(r, p.mu);
        }
        out
    };
    let radial_dr = move |p: &HopfFamilyParams, r: f64| -> f64 {
        let mut out = (1.0 + p.mu) - 3.0 * p.a * r * r;
        if let Some(rem) = &p.remainder {
            out += (rem.radial_dr)(r, p.mu);
        }
        out
    };
    let eval = move |p: &Point3| -> Point3 {
        let r = p.x.hypot(p.y);
        let s = frac(p.y.atan2(p.x) / TAU);
        let r_new = radial(&p_eval, r);
        let theta_new = TAU * d_eval.eval(s);
        Vector3::new(
            r_new * theta_new.cos(),
            r_new * theta_new.sin(),
            p_eval.gamma * p.z,
        )
    };
    let jacobian = move |p: &Point3| -> Matrix3<f64> {
        let r = p.x.hypot(p.y).max(1e-300);
        let s = frac(p.y.atan2(p.x) / TAU);
        let r_new = radial(&p_jac, r);
        let dr_new = radial_dr(&p_jac, r);
        let g_prime = d_jac.derivative(s);
        let theta_new = TAU * d_jac.eval(s);
        let (sin_t, cos_t) = theta_new.sin_cos();
        // dF/d(x,y) via the polar chain rule of the skew product
        let df_dr = Vector3::new(dr_new * cos_t, dr_new * sin_t, 0.0);
        let df_dtheta = Vector3::new(-r_new * sin_t * g_prime, r_new * cos_t * g_prime, 0.0);
        let dr_dxy = Vector3::new(p.x / r, p.y / r, 0.0);
        let dtheta_dxy = Vector3::new(-p.y / (r * r), p.x / (r * r), 0.0);
        let mut out = df_dr * dr_dxy.transpose() + df_dtheta * dtheta_dxy.transpose();
        out[(2, 2)] = p_jac.gamma;
        out
    };
    Ok(
        SmoothMap3::new(eval, jacobian, domain, "wandering-skew-product")
            .with_metadata("r_star", r_star)
            .with_metadata("radial_multiplier", circle.radial_multiplier)
            .with_metadata("normal_multiplier", params.gamma),
    )
}

/// Normal tubular neighborhood over one wandering arc of the embedded
/// circle: the union of normal disks of radius `delta` over the arc.
#[derive(Debug, Clone, Copy)]
pub struct Tube {
    pub index: i64,
    /// Arc endpoints in circle parameter units.
    pub arc: (f64, f64),
    /// Embedding radius of the circle.
    pub radius: f64,
    pub delta: f64,
}

/// Embedded point of the circle at parameter `s`.
pub fn embed_circle(radius: f64, s: f64) -> Point3 {
    let a = TAU * s;
    Vector3::new(radius * a.cos(), radius * a.sin(), 0.0)
}

impl Tube {
    /// Boundary grid: interior angular stations times disk-boundary angles.
    fn boundary_samples(&self, n_angular: usize, n_disk: usize) -> Vec<Point3> {
        let (u, v) = self.arc;
        let len = v - u;
        let mut out = Vec::with_capacity(n_angular * n_disk);
        for j in 0..n_angular {
            let s = u + len * (j as f64 + 0.5) / n_angular as f64;
            let a = TAU * s;
            let radial_dir = Vector3::new(a.cos(), a.sin(), 0.0);
            let center = self.radius * radial_dir;
            for k in 0..n_disk {
                let phi = TAU * k as f64 / n_disk as f64;
                out.push(
                    center
                        + self.delta * phi.cos() * radial_dir
                        + Vector3::new(0.0, 0.0, self.delta * phi.sin()),
                );
            }
        }
        out
    }

    /// Fiberwise containment margin of a point: positive when the point lies
    /// in the tube, measured inside the normal disk at its angular station;
    /// negative when the angular station escapes the arc (scaled to the
    /// embedded circle).
    fn fiber_margin(&self, p: &Point3) -> f64 {
        let s = frac(p.y.atan2(p.x) / TAU);
        let (u, v) = self.arc;
        // circle-position distance into the arc (allowing exact endpoints)
        let inside = {
            let su = frac(s - u);
            su <= (v - u) + 1e-12
        };
        if !inside {
            let to_u = frac(u - s).min(frac(s - u));
            let to_v = frac(v - s).min(frac(s - v));
            return -TAU * self.radius * to_u.min(to_v);
        }
        let dr = p.x.hypot(p.y) - self.radius;
        let dt = p.z;
        self.delta - dr.hypot(dt)
    }
}

/// Build `count` tubes over the arcs `I_0 .. I_{count-1}` at the embedding
/// radius. The admissible radius is half the smallest embedded distance
/// between consecutive arcs (capped at half the circle radius); a larger
/// `delta` is rejected with the admissible maximum reported.
pub fn make_tubes(
    circle_map: &DenjoyMap,
    r_star: f64,
    delta: f64,
    count: usize,
) -> Result<Vec<Tube>> {
    if count == 0 {
        return Err(Error::Precondition("tube count must be positive".into()));
    }
    let max_delta = admissible_delta(circle_map, r_star, count)?;
    if delta >= max_delta {
        return Err(Error::DeltaTooLarge { delta, max_delta });
    }
    let mut tubes = Vec::with_capacity(count);
    for i in 0..count as i64 {
        let (u, v, _) = circle_map.gap(i).ok_or(Error::HorizonBeyondTable {
            horizon: count,
            i_max: circle_map.i_max,
        })?;
        tubes.push(Tube {
            index: i,
            arc: (u, v),
            radius: r_star,
            delta,
        });
    }
    Ok(tubes)
}

/// Half the minimal embedded arc-gap distance over the arcs `I_0 .. I_{count-1}`.
pub fn admissible_delta(circle_map: &DenjoyMap, r_star: f64, count: usize) -> Result<f64> {
    let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(count);
    for i in 0..count as i64 {
        let (u, v, _) = circle_map.gap(i).ok_or(Error::HorizonBeyondTable {
            horizon: count,
            i_max: circle_map.i_max,
        })?;
        arcs.push((u, v));
    }
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut min_gap = f64::INFINITY;
    for k in 0..arcs.len() {
        let (_, v) = arcs[k];
        let u_next = if k + 1 < arcs.len() {
            arcs[k + 1].0
        } else {
            arcs[0].0 + 1.0
        };
        min_gap = min_gap.min(u_next - v);
    }
    if min_gap <= 0.0 {
        return Err(Error::Precondition("arcs are not disjoint".into()));
    }
    let chord = 2.0 * r_star * (std::f64::consts::PI * min_gap.min(0.5)).sin();
    Ok((chord / 2.0).min(0.5 * r_star))
}

/// A containment margin with its refinement status.
#[derive(Debug, Clone, Copy)]
pub struct Margin {
    pub value: f64,
    pub stabilized: bool,
}

const BASE_ANGULAR: usize = 64;
const BASE_DISK: usize = 32;
const MAX_REFINEMENTS: usize = 4;

/// Minimal fiber margin of `map^steps(D_i)` inside `D_{i+1}`, for each
/// consecutive tube pair, with boundary sampling refined (doubled) until the
/// estimate stabilizes within 10%. A margin that never stabilizes is
/// reported as such and must be treated as inconclusive, never as a pass.
pub fn check_containment(map: &SmoothMap3, tubes: &[Tube], steps: usize) -> Vec<Margin> {
    let mut out = Vec::with_capacity(tubes.len().saturating_sub(1));
    for pair in tubes.windows(2) {
        let (src, dst) = (&pair[0], &pair[1]);
        let mut n_ang = BASE_ANGULAR;
        let mut n_disk = BASE_DISK;
        let mut prev: Option<f64> = None;
        let mut margin = Margin {
            value: f64::NAN,
            stabilized: false,
        };
        for _ in 0..=MAX_REFINEMENTS {
            let mut min_margin = f64::INFINITY;
            for p in src.boundary_samples(n_ang, n_disk) {
                let mut q = p;
                for _ in 0..steps {
                    q = map.eval(&q);
                }
                min_margin = min_margin.min(dst.fiber_margin(&q));
            }
            if let Some(prev_value) = prev {
                let scale = min_margin.abs().max(1e-300);
                if (min_margin - prev_value).abs() <= 0.1 * scale {
                    margin = Margin {
                        value: min_margin,
                        stabilized: true,
                    };
                    break;
                }
            }
            margin = Margin {
                value: min_margin,
                stabilized: false,
            };
            prev = Some(min_margin);
            n_ang *= 2;
            n_disk *= 2;
        }
        out.push(margin);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl ClauseVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClauseVerdict::Pass => "pass",
            ClauseVerdict::Fail => "fail",
            ClauseVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Per-clause verdicts of the certificate.
#[derive(Debug, Clone, Copy)]
pub struct CertificateClauses {
    pub containment: ClauseVerdict,
    pub disjointness: ClauseVerdict,
    pub contraction: ClauseVerdict,
    pub omega_limit: ClauseVerdict,
    pub zero_exponent: ClauseVerdict,
    pub no_short_periods: ClauseVerdict,
}

/// The full certificate: every clause verdict is re-derivable from the
/// stored margins, endpoints, diameters and distances.
#[derive(Debug, Clone)]
pub struct WanderingCertificate {
    pub horizon: usize,
    pub margins: Vec<Margin>,
    pub disjoint: bool,
    pub max_overlap: f64,
    /// Sampled diameters of the iterated images of the first tube.
    pub diameters: Vec<f64>,
    /// First index from which the diameter sequence decreases strictly.
    pub decreasing_from: Option<usize>,
    pub terminal_diameter: f64,
    pub diameter_tolerance: f64,
    /// Rows `(seed, k, distance)` of late-iterate proximity to the sampled
    /// minimal set.
    pub omega_distances: Vec<(usize, usize, f64)>,
    pub omega_max_distance: f64,
    pub omega_threshold: f64,
    pub lyapunov: f64,
    pub lyapunov_bound: f64,
    pub min_displacement: Vec<f64>,
    pub clauses: CertificateClauses,
    pub verdict: ClauseVerdict,
}

/// Knobs for [`certify`]; the defaults match the reference scenario.
#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Applications of the model per tube step.
    pub steps_per_map: usize,
    pub diameter_tolerance: f64,
    pub omega_seeds: usize,
    pub omega_k_min: usize,
    pub omega_k_max: usize,
    pub omega_checkpoints: usize,
    pub minimal_set_resolution: f64,
    pub lyapunov_iterates: usize,
    pub lyapunov_bound: f64,
    pub max_period: usize,
    pub rng_seed: u64,
    /// Boundary subsample used for the diameter sequence.
    pub diameter_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            steps_per_map: 1,
            diameter_tolerance: 1e-6,
            omega_seeds: 20,
            omega_k_min: 10_000,
            omega_k_max: 100_000,
            omega_checkpoints: 10,
            minimal_set_resolution: 1e-3,
            lyapunov_iterates: 100_000,
            lyapunov_bound: 1e-2,
            max_period: 50,
            rng_seed: 0,
            diameter_samples: 256,
        }
    }
}

fn sampled_diameter(points: &[Point3]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max((points[i] - points[j]).norm_squared());
        }
    }
    best.sqrt()
}

/// Run every certificate clause and aggregate the verdict.
///
/// Containment margins that fail to stabilize make the certificate
/// inconclusive rather than passing; every clause's raw evidence is stored.
pub fn certify(
    map: &SmoothMap3,
    tubes: &[Tube],
    circle_map: &DenjoyMap,
    opts: &CertifyOptions,
) -> Result<WanderingCertificate> {
    if tubes.len() < 2 {
        return Err(Error::Precondition("need at least two tubes".into()));
    }
    let horizon = tubes.len() - 1;
    if horizon > circle_map.i_max {
        return Err(Error::HorizonBeyondTable {
            horizon,
            i_max: circle_map.i_max,
        });
    }
    if opts.omega_k_max > circle_map.i_max {
        return Err(Error::HorizonBeyondTable {
            horizon: opts.omega_k_max,
            i_max: circle_map.i_max,
        });
    }

    // 1. containment margins
    let margins = check_containment(map, tubes, opts.steps_per_map);
    let containment = if margins
        .iter()
        .any(|m| m.stabilized && m.value <= 0.0)
    {
        ClauseVerdict::Fail
    } else if margins.iter().any(|m| !m.stabilized) {
        ClauseVerdict::Inconclusive
    } else {
        ClauseVerdict::Pass
    };

    // 2. exact pairwise disjointness of the base arcs
    let mut arcs: Vec<(f64, f64, i64)> =
        tubes.iter().map(|t| (t.arc.0, t.arc.1, t.index)).collect();
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut max_overlap: f64 = 0.0;
    for w in arcs.windows(2) {
        max_overlap = max_overlap.max(w[0].1 - w[1].0);
    }
    if arcs.len() > 1 {
        max_overlap = max_overlap.max(arcs[arcs.len() - 1].1 - (arcs[0].0 + 1.0));
    }
    let disjoint = max_overlap <= 0.0;
    let disjointness = if disjoint {
        ClauseVerdict::Pass
    } else {
        ClauseVerdict::Fail
    };

    // 3. diameter sequence of the iterated first tube
    let boundary = tubes[0].boundary_samples(
        (opts.diameter_samples / 8).max(8),
        8,
    );
    let mut points = boundary;
    let mut diameters = Vec::with_capacity(horizon + 1);
    diameters.push(sampled_diameter(&points));
    for _ in 1..=horizon {
        for p in &mut points {
            let mut q = *p;
            for _ in 0..opts.steps_per_map {
                q = map.eval(&q);
            }
            *p = q;
        }
        diameters.push(sampled_diameter(&points));
    }
    let mut decreasing_from = None;
    for k0 in 0..diameters.len() {
        if diameters[k0..].windows(2).all(|w| w[1] < w[0]) {
            decreasing_from = Some(k0);
            break;
        }
    }
    let terminal_diameter = *diameters.last().unwrap();
    let contraction = if decreasing_from.is_some() && terminal_diameter < opts.diameter_tolerance
    {
        ClauseVerdict::Pass
    } else {
        ClauseVerdict::Fail
    };

    // 4. omega-limit proximity of random seeds in the first tube
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let r_star = tubes[0].radius;
    let (u0, v0) = tubes[0].arc;
    let mut omega_distances = Vec::new();
    let mut omega_max: f64 = 0.0;
    let omega_threshold = circle_map.tail_deficit + opts.minimal_set_resolution;
    let checkpoints: Vec<usize> = (0..opts.omega_checkpoints)
        .map(|j| {
            opts.omega_k_min
                + (opts.omega_k_max - opts.omega_k_min) * j / (opts.omega_checkpoints - 1).max(1)
        })
        .collect();
    for seed_idx in 0..opts.omega_seeds {
        let s = rng.random_range(u0..v0);
        let rho = r_star + tubes[0].delta * 0.9 * rng.random_range(-1.0..1.0);
        let t = tubes[0].delta * 0.9 * rng.random_range(-1.0..1.0);
        let a = TAU * s;
        let mut p = Vector3::new(rho * a.cos(), rho * a.sin(), t);
        let mut k = 0usize;
        for &kc in &checkpoints {
            while k < kc {
                for _ in 0..opts.steps_per_map {
                    p = map.eval(&p);
                }
                k += 1;
            }
            let s_img = frac(p.y.atan2(p.x) / TAU);
            let angular = circle_map.distance_to_minimal_set(s_img);
            let dist = angular
                .max((p.x.hypot(p.y) - r_star).abs())
                .max(p.z.abs());
            omega_distances.push((seed_idx, kc, dist));
            omega_max = omega_max.max(dist);
        }
    }
    let omega_limit = if omega_max < omega_threshold {
        ClauseVerdict::Pass
    } else {
        ClauseVerdict::Fail
    };

    // 5. zero exponent on the circle, with contracting transversal rates
    let lyap = circle_lyapunov(circle_map, 0.37, opts.lyapunov_iterates);
    let radial_mult = map.metadata("radial_multiplier").unwrap_or(f64::NAN);
    let normal_mult = map.metadata("normal_multiplier").unwrap_or(f64::NAN);
    let zero_exponent = if lyap.lambda.abs() < opts.lyapunov_bound
        && radial_mult.abs() < 1.0
        && normal_mult.abs() < 1.0
    {
        ClauseVerdict::Pass
    } else {
        ClauseVerdict::Fail
    };

    // 6. no periodic points up to the period bound
    let displacement = min_periodic_displacement(circle_map, opts.max_period, 64);
    let no_short_periods = if displacement.iter().all(|&d| d > 0.0) {
        ClauseVerdict::Pass
    } else {
        ClauseVerdict::Fail
    };

    let clauses = CertificateClauses {
        containment,
        disjointness,
        contraction,
        omega_limit,
        zero_exponent,
        no_short_periods,
    };
    let all = [
        containment,
        disjointness,
        contraction,
        omega_limit,
        zero_exponent,
        no_short_periods,
    ];
    let verdict = if all.contains(&ClauseVerdict::Fail) {
        ClauseVerdict::Fail
    } else if all.contains(&ClauseVerdict::Inconclusive) {
        ClauseVerdict::Inconclusive
    } else {
        ClauseVerdict::Pass
    };

    Ok(WanderingCertificate {
        horizon,
        margins,
        disjoint,
        max_overlap,
        diameters,
        decreasing_from,
        terminal_diameter,
        diameter_tolerance: opts.diameter_tolerance,
        omega_distances,
        omega_max_distance: omega_max,
        omega_threshold,
        lyapunov: lyap.lambda,
        lyapunov_bound: opts.lyapunov_bound,
        min_displacement: displacement,
        clauses,
        verdict,
    })
}

impl WanderingCertificate {
    /// Persist the certificate as a CSV bundle plus a verdict file.
    pub fn write_bundle(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut margins = String::from("i,m_i,stabilized\n");
        for (i, m) in self.margins.iter().enumerate() {
            margins.push_str(&format!("{},{:.16e},{}\n", i, m.value, m.stabilized));
        }
        std::fs::write(dir.join("margins.csv"), margins)?;

        let mut diameters = String::from("k,diam\n");
        for (k, d) in self.diameters.iter().enumerate() {
            diameters.push_str(&format!("{},{:.16e}\n", k, d));
        }
        std::fs::write(dir.join("diameters.csv"), diameters)?;

        let mut omega = String::from("seed,k,dist\n");
        for (seed, k, dist) in &self.omega_distances {
            omega.push_str(&format!("{},{},{:.16e}\n", seed, k, dist));
        }
        std::fs::write(dir.join("omega.csv"), omega)?;

        let verdict = format!(
            "containment: {}\ndisjointness: {}\ncontraction: {}\nomega_limit: {}\nzero_exponent: {}\nno_short_periods: {}\ncertificate: {}\n",
            self.clauses.containment.as_str(),
            self.clauses.disjointness.as_str(),
            self.clauses.contraction.as_str(),
            self.clauses.omega_limit.as_str(),
            self.clauses.zero_exponent.as_str(),
            self.clauses.no_short_periods.as_str(),
            self.verdict.as_str(),
        );
        std::fs::write(dir.join("verdict.txt"), verdict)?;
        Ok(())
    }
}
