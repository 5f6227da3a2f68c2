//! Subcommand implementations: each builds its stage of the pipeline from
//! the scenario, writes plot-ready CSV artifacts, and reports a verdict.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use wanderlab_core::alignment::{rotation_alignment_search, AlignmentProblem};
use wanderlab_core::certifier::{
    admissible_delta, assemble_wandering_model, certify, make_tubes, CertifyOptions, ClauseVerdict,
};
use wanderlab_core::denjoy::{
    build_denjoy, circle_lyapunov, min_periodic_displacement, rotation_number, verify_wandering,
    DenjoyMap, GapLaw,
};
use wanderlab_core::hopf::{
    estimate_cubic_coeff, hopf_map, invariant_circle, ns_scan, HopfFamilyParams, HopfRemainder,
};
use wanderlab_core::intrinsic::{detect_intrinsic_tangency, IntrinsicTangency, Region};
use wanderlab_core::map::{classify_saddle, SmoothMap3};
use wanderlab_core::models::{
    assemble_cycle_model, make_saddle_focus, CycleModel, CycleSpec, FocusBlock, SaddleFocusParams,
    SaddleLocal, SaddleSpec,
};
use wanderlab_core::patch::{ManifoldPatch, PatchKind};
use wanderlab_core::tatjer::check_tatjer;
use wanderlab_core::tolerances::Tolerances;
use wanderlab_core::Result;
use wanderlab_core::map::Domain;

use crate::scenario::{CycleKind, Scenario};

/// Verdict-driven process exit codes (3 = usage/config error, set by main).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 2,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Cycle spec selected by the `[cycle]` section: the shipped constructions
/// with the focus saddle's parameters taken from the config.
pub fn cycle_spec_from(scenario: &Scenario) -> CycleSpec {
    let params = SaddleFocusParams {
        contracting_modulus: scenario.cycle.contracting,
        expanding_modulus: scenario.cycle.expanding,
        rotation: scenario.cycle.rotation,
        focus_block: FocusBlock::UnstableXy,
    };
    match scenario.cycle.kind {
        CycleKind::Single => CycleSpec {
            saddles: vec![SaddleSpec {
                name: "p".into(),
                center: Vector3::zeros(),
                half_extent: 1.0,
                local: SaddleLocal::Focus(params),
            }],
            transitions: vec![],
            markers: vec![],
        },
        CycleKind::Equidimensional => {
            let mut spec = CycleSpec::reference_equidimensional();
            spec.saddles[0].local = SaddleLocal::Focus(params);
            spec
        }
        CycleKind::Heterodimensional => {
            let mut spec = CycleSpec::reference_heterodimensional();
            spec.saddles[0].local = SaddleLocal::Focus(params);
            spec
        }
    }
}

fn saddle_report(model: &CycleModel) -> String {
    let mut csv = String::from("name,x,y,z,u_ind,stable_nonreal,unstable_nonreal,real_central,m1,m2,m3\n");
    for (name, p) in &model.saddles {
        let class = classify_saddle(p);
        let (sn, un, rc) = match class {
            Ok(c) => (c.stable_nonreal, c.unstable_nonreal, c.real_central),
            Err(_) => (false, false, false),
        };
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e}",
            name,
            p.location.x,
            p.location.y,
            p.location.z,
            p.u_ind,
            sn,
            un,
            rc,
            p.multipliers[0].norm(),
            p.multipliers[1].norm(),
            p.multipliers[2].norm(),
        );
    }
    csv
}

fn marker_report(model: &CycleModel) -> String {
    let mut csv = String::from("name,kind,x,y,z,codim,forward_residual,backward_residual\n");
    for m in &model.markers {
        let _ = writeln!(
            csv,
            "{},{:?},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            m.name,
            m.kind,
            m.location.x,
            m.location.y,
            m.location.z,
            m.codim,
            m.forward_residual,
            m.backward_residual,
        );
    }
    csv
}

/// `model`: assemble the cycle model and dump the saddle/marker report.
pub fn run_model(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let spec = cycle_spec_from(scenario);
    let model = assemble_cycle_model(&spec)?;
    write_file(out, "saddles.csv", &saddle_report(&model))?;
    write_file(out, "markers.csv", &marker_report(&model))?;
    Ok(Outcome::Pass)
}

/// Result of the rotating-arc intrinsic-tangency search.
pub struct RotatingArcResult {
    /// Iterate at which the arc develops a vertical-tangent point.
    pub iterate: usize,
    pub found: IntrinsicTangency,
    /// Brute-force angle-minimization location along the arc.
    pub oracle_location: Vector3<f64>,
}

/// Iterate a parabolic arc under a contracting focus model until its tangent
/// cone crosses the vertical leaf direction, then detect the intrinsic
/// tangency against the leaf through the turning point and cross-check the
/// location by dense angle minimization along the arc.
pub fn rotating_arc_intrinsic_search(
    contracting: f64,
    rotation: f64,
    tol: &Tolerances,
) -> Result<RotatingArcResult> {
    let params = SaddleFocusParams {
        contracting_modulus: contracting,
        expanding_modulus: 2.0,
        rotation,
        focus_block: FocusBlock::StableXy,
    };
    let map = make_saddle_focus(&params, Domain::AllSpace)?;
    let block = map.jacobian(&Vector3::zeros());
    // base arc: a parabola graph in the invariant plane, tangents never
    // vertical before rotation
    let kappa = 0.8;
    let base = |t: f64| Vector3::new(0.5 + t, 0.1 + kappa * t * t, 0.0);
    let base_tangent = |t: f64| Vector3::new(1.0, 2.0 * kappa * t, 0.0);
    let t_range = 0.25;

    for n in 1..=24usize {
        let mut power = nalgebra::Matrix3::identity();
        for _ in 0..n {
            power = block * power;
        }
        let arc = move |t: f64| power * base(t);
        let tangent = move |t: f64| power * base_tangent(t);
        // vertical-tangent point: sign change of the tangent x-component
        let samples = 2001;
        let mut crossing: Option<(f64, f64)> = None;
        for k in 0..samples - 1 {
            let t0 = -t_range + 2.0 * t_range * k as f64 / (samples - 1) as f64;
            let t1 = -t_range + 2.0 * t_range * (k + 1) as f64 / (samples - 1) as f64;
            if tangent(t0).x * tangent(t1).x <= 0.0 {
                crossing = Some((t0, t1));
                break;
            }
        }
        let Some((mut lo, mut hi)) = crossing else {
            continue;
        };
        // bisect the turning parameter to full precision
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tangent(lo).x * tangent(mid).x <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let t_star = 0.5 * (lo + hi);
        let oracle_location = arc(t_star);

        // unstable surface sweeping the arc in the normal direction, leaves
        // through and flanking the turning point
        let wu = ManifoldPatch::surface_from_fn(
            move |t, v| arc(t) + Vector3::new(0.0, 0.0, v),
            (-t_range, t_range),
            (-0.05, 0.05),
            1601,
            5,
            PatchKind::Unstable,
        );
        let scale = (arc(t_range) - arc(-t_range)).norm().max(1e-6);
        let leaves: Vec<ManifoldPatch> = [-0.2 * scale, 0.0, 0.2 * scale]
            .iter()
            .map(|dx| {
                ManifoldPatch::line_segment(
                    Vector3::new(oracle_location.x + dx, oracle_location.y, 0.0),
                    Vector3::y(),
                    scale.max(0.2),
                    201,
                    PatchKind::StrongStableLeaf,
                )
            })
            .collect();
        let region = Region::cube(Vector3::zeros(), 4.0);
        match detect_intrinsic_tangency(&wu, &leaves, &region, tol) {
            Ok(found) => {
                return Ok(RotatingArcResult {
                    iterate: n,
                    found,
                    oracle_location,
                })
            }
            Err(_) => continue,
        }
    }
    Err(wanderlab_core::Error::NoTangency)
}

/// Canonical generalized-tangency witness patches used by the `tangency`
/// subcommand and its spoiler diagnostics.
pub struct TatjerWitness {
    pub ws_return: ManifoldPatch,
    pub wu_loc: ManifoldPatch,
    pub leaf: ManifoldPatch,
    pub wuu: ManifoldPatch,
    pub map: SmoothMap3,
}

pub fn canonical_tatjer_witness() -> TatjerWitness {
    TatjerWitness {
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
        map: SmoothMap3::linear(
            nalgebra::Matrix3::from_diagonal(&Vector3::new(1.5, 3.0, 0.4)),
            Domain::AllSpace,
            "tatjer-saddle",
        ),
    }
}

/// `tangency`: rotating-arc intrinsic tangency plus the generalized-tangency
/// checker on the canonical witness.
pub fn run_tangency(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let tol = scenario.to_tolerances();
    let arc = rotating_arc_intrinsic_search(
        scenario.cycle.contracting,
        scenario.cycle.rotation,
        &tol,
    )?;
    let mut csv = String::from("case,order,x,y,z,second_derivative,codim,leaf_index,iterate\n");
    let r = &arc.found.report;
    let _ = writeln!(
        csv,
        "intrinsic,{:?},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
        r.order,
        r.location.x,
        r.location.y,
        r.location.z,
        r.second_derivative,
        r.codim,
        arc.found.leaf_index,
        arc.iterate,
    );
    write_file(out, "tangency.csv", &csv)?;

    let w = canonical_tatjer_witness();
    let verdict = check_tatjer(&w.ws_return, &w.wu_loc, &w.leaf, &w.wuu, &w.map, 1, &tol)?;
    let mut tatjer = String::from(
        "c1,c2,c3,off_wuu_distance,leaf_angle,transversality_margin,tangency_x,tangency_y,tangency_z\n",
    );
    let _ = writeln!(
        tatjer,
        "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        verdict.c1,
        verdict.c2,
        verdict.c3,
        verdict.off_wuu_distance,
        verdict.leaf_angle,
        verdict.transversality_margin,
        verdict.witness.location.x,
        verdict.witness.location.y,
        verdict.witness.location.z,
    );
    write_file(out, "tatjer.csv", &tatjer)?;

    let oracle_gap = (arc.found.report.location - arc.oracle_location).norm();
    if verdict.c1 && verdict.c2 && verdict.c3 && oracle_gap < 1e-6 {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail)
    }
}

fn hopf_params_from(scenario: &Scenario) -> HopfFamilyParams {
    let remainder = if scenario.hopf.radial_r4 != 0.0 || scenario.hopf.angular_r2 != 0.0 {
        Some(HopfRemainder::polynomial(
            scenario.hopf.radial_r4,
            scenario.hopf.angular_r2,
        ))
    } else {
        None
    };
    HopfFamilyParams {
        mu: scenario.hopf.mu,
        a: scenario.hopf.a,
        beta: scenario.hopf.beta,
        gamma: scenario.hopf.gamma,
        period: scenario.hopf.period,
        remainder,
    }
}

/// `hopf-scan`: unit-modulus crossing scan of the multiplier pair over the
/// configured parameter window.
pub fn run_hopf_scan(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let base = hopf_params_from(scenario);
    let family = |mu: f64| {
        let mut p = base.clone();
        p.mu = mu;
        hopf_map(&p).expect("valid family parameters")
    };
    let scan = ns_scan(
        &family,
        (scenario.hopf.scan_min, scenario.hopf.scan_max),
        scenario.hopf.period,
        Vector3::zeros(),
    )?;
    let mut csv = String::from("mu,re_mult,im_mult,modulus\n");
    for row in &scan.path {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            row.mu, row.re, row.im, row.modulus
        );
    }
    write_file(out, "ns_scan.csv", &csv)?;
    let summary = format!(
        "mu_star = {:.16e}\nmodulus_slope = {:.16e}\nstrong_resonance = {}\npair_re = {:.16e}\npair_im = {:.16e}\n",
        scan.mu_star, scan.modulus_slope, scan.strong_resonance, scan.pair.re, scan.pair.im
    );
    write_file(out, "ns_summary.txt", &summary)?;
    Ok(Outcome::Pass)
}

fn denjoy_from(scenario: &Scenario) -> Result<DenjoyMap> {
    build_denjoy(
        scenario.denjoy.alpha,
        GapLaw::power(scenario.denjoy.mass, scenario.denjoy.exponent),
        scenario.denjoy.i_max,
    )
}

/// `denjoy`: build the circle map, verify the wandering family, and run the
/// rotation-number and Lyapunov diagnostics.
pub fn run_denjoy(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let d = denjoy_from(scenario)?;
    write_file(out, "endpoints.csv", &d.endpoints_csv())?;

    let n = scenario.denjoy.verify_n.min(d.i_max);
    let report = verify_wandering(&d, n)?;
    let lift = |x: f64| d.lift(x);
    let x0 = d.project_to_minimal_set(0.123_456_789);
    let rho = rotation_number(&lift, x0, scenario.denjoy.rotation_iterates)?;
    let lyap = circle_lyapunov(&d, 0.37, scenario.certify.lyapunov_iterates);
    let displacement = min_periodic_displacement(&d, scenario.certify.max_period, 64);
    let min_disp = displacement.iter().copied().fold(f64::INFINITY, f64::min);

    let rotation_ok = (rho.value - scenario.denjoy.alpha).abs() < rho.error_bound + 1e-9;
    let lyapunov_ok = lyap.lambda.abs() < scenario.certify.lyapunov_bound;
    let ok = report.disjoint && rotation_ok && lyapunov_ok && min_disp > 0.0;

    let mut summary = String::new();
    let _ = writeln!(summary, "disjoint = {}", report.disjoint);
    let _ = writeln!(summary, "max_overlap = {:.16e}", report.max_overlap);
    let _ = writeln!(summary, "rotation_number = {:.16e}", rho.value);
    let _ = writeln!(summary, "rotation_error_bound = {:.16e}", rho.error_bound);
    let _ = writeln!(summary, "lyapunov = {:.16e}", lyap.lambda);
    let _ = writeln!(summary, "min_periodic_displacement = {:.16e}", min_disp);
    let _ = writeln!(summary, "min_derivative = {:.16e}", d.min_derivative);
    let _ = writeln!(
        summary,
        "sup_derivative_deviation = {:.16e}",
        d.sup_derivative_deviation
    );
    let _ = writeln!(summary, "tail_deficit = {:.16e}", d.tail_deficit);
    let _ = writeln!(summary, "verdict = {}", if ok { "pass" } else { "fail" });
    write_file(out, "denjoy_report.txt", &summary)?;

    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

/// `certify`: the full pipeline, ending in the certificate bundle.
pub fn run_certify(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let params = hopf_params_from(scenario);
    let d = denjoy_from(scenario)?;
    let model = assemble_wandering_model(&params, &d)?;
    let r_star = invariant_circle(&params)?.radius;
    let count = scenario.tubes.count.min(scenario.certify.horizon + 1);
    let max_delta = admissible_delta(&d, r_star, count)?;
    let delta = scenario.tubes.delta_fraction * max_delta;
    let tubes = make_tubes(&d, r_star, delta, count)?;
    let opts = CertifyOptions {
        steps_per_map: 1,
        diameter_tolerance: scenario.certify.diameter_tolerance,
        omega_seeds: scenario.certify.omega_seeds,
        omega_k_min: scenario.certify.omega_k_min,
        omega_k_max: scenario.certify.omega_k_max,
        omega_checkpoints: scenario.certify.omega_checkpoints,
        minimal_set_resolution: scenario.certify.resolution,
        lyapunov_iterates: scenario.certify.lyapunov_iterates,
        lyapunov_bound: scenario.certify.lyapunov_bound,
        max_period: scenario.certify.max_period,
        rng_seed: scenario.seed,
        diameter_samples: 256,
    };
    let cert = certify(&model, &tubes, &d, &opts)?;
    cert.write_bundle(out)?;
    Ok(match cert.verdict {
        ClauseVerdict::Pass => Outcome::Pass,
        ClauseVerdict::Fail => Outcome::Fail,
        ClauseVerdict::Inconclusive => Outcome::Inconclusive,
    })
}

/// Extra diagnostics shared by tests: fit the cubic coefficient of the
/// configured family and run an alignment search on its rotation.
pub fn run_diagnostics(scenario: &Scenario, out: &Path) -> Result<Outcome> {
    let params = hopf_params_from(scenario);
    let map = hopf_map(&params)?;
    let fit = estimate_cubic_coeff(&map, &Vector3::zeros(), 40, 0.05)?;

    let focus = SaddleFocusParams {
        contracting_modulus: 0.999_999_9,
        expanding_modulus: 2.0,
        rotation: scenario.denjoy.alpha,
        focus_block: FocusBlock::StableXy,
    };
    let rot_map = make_saddle_focus(&focus, Domain::AllSpace)?;
    let patch = ManifoldPatch::line_segment(
        Vector3::new(0.5, 0.0, 0.0),
        Vector3::x(),
        0.1,
        11,
        PatchKind::Generic,
    );
    let problem = AlignmentProblem {
        map: &rot_map,
        patch: &patch,
        marker: Vector3::new(0.5, 0.0, 0.0),
        rotation: scenario.denjoy.alpha,
    };
    let alignment = rotation_alignment_search(&problem, &Vector3::x(), 0.05, 1000)?;

    let summary = format!(
        "cubic_a = {:.16e}\ncubic_mu = {:.16e}\nalignment_n = {}\nalignment_angle = {:.16e}\n",
        fit.a, fit.mu, alignment.n, alignment.angle
    );
    write_file(out, "diagnostics.txt", &summary)?;
    Ok(Outcome::Pass)
}
