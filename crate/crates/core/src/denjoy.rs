//! Constructive C1 circle diffeomorphism with prescribed irrational rotation
//! number and wandering intervals, plus rotation-number and Lyapunov
//! diagnostics on it.
//!
//! The construction inserts an interval of length `l_i` at each orbit point
//! `{i alpha}` of the rigid rotation, for `|i| <= I_max`, and transports gap
//! `i` onto gap `i+1` by an explicit derivative profile with endpoint slope
//! exactly 1. Off the retained gaps the map is the semiconjugated rotation.
//! The untruncated tail is accounted analytically in all mass reports; the
//! single extreme positive gap maps onto a virtual interval at the correct
//! semiconjugated position, and the resulting overlap defect (one tail gap
//! length) is reported, not hidden.

use crate::numeric::{certify_irrational, circle_distance, frac, gap_bump, gap_bump_integral, gap_bump_mean};
use crate::{Error, Result};

/// Two-sided gap-length law `l_i = C * w(i)` with `sum_i l_i = mass`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapSequence {
    /// `w(i) = (|i| + 2)^{-p}`, the classical summable choice with ratios
    /// tending to 1.
    PowerLaw { exponent: f64 },
    /// `w(i) = factor^{|i|}`; ratios stay away from 1, so this is only
    /// useful as an infeasibility witness.
    Geometric { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapLaw {
    pub mass: f64,
    pub sequence: GapSequence,
}

const NORMALIZER_TERMS: usize = 400_000;

impl GapLaw {
    pub fn power(mass: f64, exponent: f64) -> Self {
        GapLaw {
            mass,
            sequence: GapSequence::PowerLaw { exponent },
        }
    }

    pub fn geometric(mass: f64, factor: f64) -> Self {
        GapLaw {
            mass,
            sequence: GapSequence::Geometric { factor },
        }
    }

    /// Normalizer `C` with `sum_{i in Z} l_i = mass`, accurate to 1e-12.
    pub fn normalizer(&self) -> Result<f64> {
        if !(self.mass > 0.0 && self.mass < 1.0) {
            return Err(Error::MassOverflow { mass: self.mass });
        }
        let total = match self.sequence {
            GapSequence::PowerLaw { exponent: p } => {
                if p <= 1.0 {
                    return Err(Error::InfeasibleRatios(format!(
                        "power-law exponent {p} <= 1 is not summable"
                    )));
                }
                // sum_{i in Z} (|i|+2)^{-p} = 2^{-p} + 2 sum_{k >= 3} k^{-p},
                // with a midpoint-integral tail correction
                let k_max = NORMALIZER_TERMS;
                let mut side = 0.0;
                for k in (3..=k_max).rev() {
                    side += (k as f64).powf(-p);
                }
                side += (k_max as f64 + 0.5).powf(1.0 - p) / (p - 1.0);
                2.0f64.powf(-p) + 2.0 * side
            }
            GapSequence::Geometric { factor: f } => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::InfeasibleRatios(format!(
                        "geometric factor {f} outside (0, 1)"
                    )));
                }
                1.0 + 2.0 * f / (1.0 - f)
            }
        };
        Ok(self.mass / total)
    }

    fn weight(&self, i: i64) -> f64 {
        match self.sequence {
            GapSequence::PowerLaw { exponent: p } => ((i.abs() + 2) as f64).powf(-p),
            GapSequence::Geometric { factor: f } => f.powi(i.unsigned_abs() as i32),
        }
    }

    /// Gap length at index `i` given a precomputed normalizer.
    pub fn length_with(&self, normalizer: f64, i: i64) -> f64 {
        normalizer * self.weight(i)
    }

    /// Upper bound on the unretained mass `sum_{|i| > i_max} l_i`.
    pub fn tail_mass(&self, normalizer: f64, i_max: usize) -> f64 {
        match self.sequence {
            GapSequence::PowerLaw { exponent: p } => {
                // 2C sum_{k > i_max} (k+2)^{-p} <= 2C (i_max + 2)^{1-p} / (p-1)
                2.0 * normalizer * ((i_max as f64) + 2.0).powf(1.0 - p) / (p - 1.0)
            }
            GapSequence::Geometric { factor: f } => {
                2.0 * normalizer * f.powi(i_max as i32 + 1) / (1.0 - f)
            }
        }
    }

    /// Whether consecutive length ratios tend to 1, the C1 feasibility
    /// requirement for the derivative profiles.
    pub fn ratios_tend_to_one(&self) -> bool {
        matches!(self.sequence, GapSequence::PowerLaw { .. })
    }
}

/// One retained gap in circle order.
#[derive(Debug, Clone, Copy)]
struct GapEntry {
    /// Index `i` of the gap (the gap sits at the orbit point `{i alpha}`).
    index: i64,
    /// Insertion point on the base rotation circle.
    x: f64,
    /// Embedded endpoints `[u, v]` and length.
    u: f64,
    v: f64,
    length: f64,
    /// Profile amplitude `c_i` so the gap integral equals `l_{i+1}`.
    amplitude: f64,
}

/// The built circle map.
#[derive(Debug, Clone)]
pub struct DenjoyMap {
    pub alpha: f64,
    pub law: GapLaw,
    pub i_max: usize,
    /// Normalizer of the gap law.
    pub normalizer: f64,
    /// Measure of the retained complement (the embedded Cantor-set scale).
    pub cantor_scale: f64,
    /// Analytic bound on the unretained gap mass.
    pub tail_deficit: f64,
    /// Length of the first unretained gap: the injectivity defect of the
    /// truncated extreme-gap branch.
    pub truncation_overlap: f64,
    /// Smallest derivative over the retained gaps.
    pub min_derivative: f64,
    /// sup |g' - 1|, the C1-closeness surrogate to the rigid rotation.
    pub sup_derivative_deviation: f64,
    /// Gaps sorted by circle position, with prefix length sums.
    entries: Vec<GapEntry>,
    prefix: Vec<f64>,
    /// Sorted position of gap index `i` at `by_index[(i + i_max) as usize]`.
    by_index: Vec<u32>,
    /// Embedded start of the virtual gap `i_max + 1`.
    virtual_target_u: f64,
}

const DERIVATIVE_FLOOR: f64 = 1e-9;

/// Build the circle map. The rotation number must pass the irrationality
/// certificate; gap ratios must tend to 1 and keep every per-gap derivative
/// strictly positive.
pub fn build_denjoy(alpha: f64, law: GapLaw, i_max: usize) -> Result<DenjoyMap> {
    certify_irrational(alpha, 20)?;
    if law.mass == 0.0 {
        // degenerate construction: no gaps, the exact rigid rotation
        return Ok(DenjoyMap {
            alpha,
            law,
            i_max,
            normalizer: 0.0,
            cantor_scale: 1.0,
            tail_deficit: 0.0,
            truncation_overlap: 0.0,
            min_derivative: 1.0,
            sup_derivative_deviation: 0.0,
            entries: Vec::new(),
            prefix: vec![0.0],
            by_index: Vec::new(),
            virtual_target_u: 0.0,
        });
    }
    if !(law.mass > 0.0 && law.mass < 1.0) {
        return Err(Error::MassOverflow { mass: law.mass });
    }
    if !law.ratios_tend_to_one() {
        return Err(Error::InfeasibleRatios(
            "gap-length ratios do not tend to 1; the derivative profile cannot stay C1".into(),
        ));
    }
    let normalizer = law.normalizer()?;
    let mean_profile = gap_bump_mean();

    let count = 2 * i_max + 1;
    let mut order: Vec<(f64, i64)> = Vec::with_capacity(count);
    for i in -(i_max as i64)..=(i_max as i64) {
        order.push((frac(i as f64 * alpha), i));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut retained_mass = 0.0;
    for &(_, i) in &order {
        retained_mass += law.length_with(normalizer, i);
    }
    let cantor_scale = 1.0 - retained_mass;
    if cantor_scale <= 0.0 {
        return Err(Error::MassOverflow { mass: retained_mass });
    }

    let mut entries = Vec::with_capacity(count);
    let mut prefix = Vec::with_capacity(count + 1);
    let mut acc = 0.0;
    let mut min_derivative = f64::INFINITY;
    let mut sup_dev: f64 = 0.0;
    for &(x, i) in &order {
        let length = law.length_with(normalizer, i);
        let next_length = law.length_with(normalizer, i + 1);
        let amplitude = (next_length / length - 1.0) / mean_profile;
        if 1.0 + amplitude.min(0.0) < DERIVATIVE_FLOOR {
            return Err(Error::InfeasibleRatios(format!(
                "profile amplitude {amplitude} at index {i} drives the derivative to zero"
            )));
        }
        min_derivative = min_derivative.min(1.0 + amplitude.min(0.0));
        sup_dev = sup_dev.max(amplitude.abs());
        let u = cantor_scale * x + acc;
        entries.push(GapEntry {
            index: i,
            x,
            u,
            v: u + length,
            length,
            amplitude,
        });
        prefix.push(acc);
        acc += length;
    }
    prefix.push(acc);

    let mut by_index = vec![0u32; count];
    for (pos, e) in entries.iter().enumerate() {
        by_index[(e.index + i_max as i64) as usize] = pos as u32;
    }

    // embedded position of the first unretained gap (target of the extreme)
    let x_virtual = frac((i_max as f64 + 1.0) * alpha);
    let virtual_pos = entries.partition_point(|e| e.x < x_virtual);
    let virtual_target_u = cantor_scale * x_virtual + prefix[virtual_pos];

    let tail_deficit = law.tail_mass(normalizer, i_max);
    let truncation_overlap = law.length_with(normalizer, i_max as i64 + 1);

    let map = DenjoyMap {
        alpha,
        law,
        i_max,
        normalizer,
        cantor_scale,
        tail_deficit,
        truncation_overlap,
        min_derivative,
        sup_derivative_deviation: sup_dev,
        entries,
        prefix,
        by_index,
        virtual_target_u,
    };

    // build-time invariant check: endpoint images match the table
    for i in -(i_max as i64)..(i_max as i64) {
        let (u, v, _) = map.gap(i).expect("retained gap");
        let (u_next, v_next, _) = map.gap(i + 1).expect("retained gap");
        let eu = (map.eval(u) - u_next).abs();
        let ev = (map.eval(v) - v_next).abs();
        if eu > 1e-12 || ev > 1e-12 {
            return Err(Error::Precondition(format!(
                "endpoint image of gap {i} misses the table by {:.3e}",
                eu.max(ev)
            )));
        }
    }

    Ok(map)
}

enum Branch {
    InGap(usize),
    Cantor,
}

impl DenjoyMap {
    fn locate(&self, x: f64) -> Branch {
        let pos = self.entries.partition_point(|e| e.u <= x);
        if pos > 0 && x <= self.entries[pos - 1].v {
            Branch::InGap(pos - 1)
        } else {
            Branch::Cantor
        }
    }

    /// Retained-gap mass strictly left of a Cantor point.
    fn mass_before(&self, x: f64) -> f64 {
        let pos = self.entries.partition_point(|e| e.u < x);
        self.prefix[pos]
    }

    /// Embed a base-circle point into the gapped circle (Cantor part).
    fn embed(&self, y: f64) -> f64 {
        let pos = self.entries.partition_point(|e| e.x < y);
        self.cantor_scale * y + self.prefix[pos]
    }

    /// Endpoints and length of gap `i`.
    pub fn gap(&self, i: i64) -> Option<(f64, f64, f64)> {
        let offset = i + self.i_max as i64;
        if offset < 0 || offset >= self.by_index.len() as i64 {
            return None;
        }
        let e = &self.entries[self.by_index[offset as usize] as usize];
        Some((e.u, e.v, e.length))
    }

    /// The circle map on `[0, 1)`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = frac(x);
        match self.locate(x) {
            Branch::InGap(pos) => {
                let e = &self.entries[pos];
                let s = x - e.u;
                let transported =
                    s + e.amplitude * e.length * gap_bump_integral(s / e.length);
                let target_u = match self.gap(e.index + 1) {
                    Some((u_next, _, _)) => u_next,
                    // extreme retained gap: virtual target in the Cantor part
                    None => self.virtual_target_u,
                };
                frac(target_u + transported)
            }
            Branch::Cantor => {
                let h = (x - self.mass_before(x)) / self.cantor_scale;
                self.embed(frac(h + self.alpha))
            }
        }
    }

    /// Derivative of the circle map; exactly 1 on the Cantor part and at
    /// every gap endpoint.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = frac(x);
        match self.locate(x) {
            Branch::InGap(pos) => {
                let e = &self.entries[pos];
                1.0 + e.amplitude * gap_bump((x - e.u) / e.length)
            }
            Branch::Cantor => 1.0,
        }
    }

    /// Monotone lift of the circle map with `F(x + 1) = F(x) + 1`.
    pub fn lift(&self, x: f64) -> f64 {
        let base = x.floor();
        let fx = frac(x);
        let g0 = self.eval(0.0);
        let gx = self.eval(fx);
        base + if gx >= g0 { gx } else { gx + 1.0 }
    }

    /// Snap a point into the complement of the open retained gaps.
    pub fn project_to_minimal_set(&self, x: f64) -> f64 {
        let x = frac(x);
        match self.locate(x) {
            Branch::Cantor => x,
            Branch::InGap(pos) => {
                let e = &self.entries[pos];
                if x - e.u <= e.v - x {
                    e.u
                } else {
                    e.v
                }
            }
        }
    }

    /// Distance from a point to the sampled minimal set (the complement of
    /// the retained open gaps).
    pub fn distance_to_minimal_set(&self, x: f64) -> f64 {
        let x = frac(x);
        match self.locate(x) {
            Branch::Cantor => 0.0,
            Branch::InGap(pos) => {
                let e = &self.entries[pos];
                (x - e.u).min(e.v - x).max(0.0)
            }
        }
    }

    /// Iterator over retained gaps in circle order: `(index, u, v, length)`.
    pub fn gaps_in_circle_order(&self) -> impl Iterator<Item = (i64, f64, f64, f64)> + '_ {
        self.entries.iter().map(|e| (e.index, e.u, e.v, e.length))
    }

    /// Endpoint table as CSV: `i,u,v,l` in index order.
    pub fn endpoints_csv(&self) -> String {
        let mut out = String::from("i,u,v,l\n");
        for i in -(self.i_max as i64)..=(self.i_max as i64) {
            let (u, v, l) = self.gap(i).expect("retained");
            out.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", i, u, v, l));
        }
        out
    }
}

/// Disjointness report for the forward gap family `I_0 .. I_N`.
#[derive(Debug, Clone)]
pub struct WanderingReport {
    pub disjoint: bool,
    pub max_overlap: f64,
    pub overlapping_pair: Option<(i64, i64)>,
    pub lengths: Vec<f64>,
}

/// Check pairwise disjointness of the gaps `I_0 .. I_N` by exact endpoint
/// sorting. A false verdict is a valid output, with the offending pair and
/// the largest overlap reported.
pub fn verify_wandering(d: &DenjoyMap, n: usize) -> Result<WanderingReport> {
    if d.entries.is_empty() {
        return Ok(WanderingReport {
            disjoint: true,
            max_overlap: 0.0,
            overlapping_pair: None,
            lengths: Vec::new(),
        });
    }
    if n > d.i_max {
        return Err(Error::HorizonBeyondTable {
            horizon: n,
            i_max: d.i_max,
        });
    }
    let mut arcs: Vec<(f64, f64, i64)> = (0..=n as i64)
        .map(|i| {
            let (u, v, _) = d.gap(i).expect("retained");
            (u, v, i)
        })
        .collect();
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut max_overlap: f64 = 0.0;
    let mut pair = None;
    for w in arcs.windows(2) {
        let overlap = w[0].1 - w[1].0;
        if overlap > max_overlap {
            max_overlap = overlap;
            pair = Some((w[0].2, w[1].2));
        }
    }
    // circular wrap between the last and first arcs
    if arcs.len() > 1 {
        let last = arcs[arcs.len() - 1];
        let first = arcs[0];
        let overlap = last.1 - (first.0 + 1.0);
        if overlap > max_overlap {
            max_overlap = overlap;
            pair = Some((last.2, first.2));
        }
    }
    Ok(WanderingReport {
        disjoint: pair.is_none(),
        max_overlap,
        overlapping_pair: pair,
        lengths: (0..=n as i64)
            .map(|i| d.gap(i).expect("retained").2)
            .collect(),
    })
}

/// Fault-injection/replay variant: verify a raw endpoint table `(i, u, v)`
/// for indices `0..=n` without rebuilding the map.
pub fn verify_endpoint_table(rows: &[(i64, f64, f64)]) -> WanderingReport {
    let mut arcs: Vec<(f64, f64, i64)> = rows.iter().map(|&(i, u, v)| (u, v, i)).collect();
    let lengths = rows.iter().map(|&(_, u, v)| v - u).collect();
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut max_overlap: f64 = 0.0;
    let mut pair = None;
    for w in arcs.windows(2) {
        let overlap = w[0].1 - w[1].0;
        if overlap > max_overlap {
            max_overlap = overlap;
            pair = Some((w[0].2, w[1].2));
        }
    }
    if arcs.len() > 1 {
        let last = arcs[arcs.len() - 1];
        let first = arcs[0];
        let overlap = last.1 - (first.0 + 1.0);
        if overlap > max_overlap {
            max_overlap = overlap;
            pair = Some((last.2, first.2));
        }
    }
    WanderingReport {
        disjoint: pair.is_none(),
        max_overlap,
        overlapping_pair: pair,
        lengths,
    }
}

/// Parse an endpoint CSV produced by [`DenjoyMap::endpoints_csv`].
pub fn parse_endpoint_csv(text: &str) -> Result<Vec<(i64, f64, f64)>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            if !line.starts_with("i,") {
                return Err(Error::Parse("missing endpoint CSV header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Parse(format!("endpoint row {k} too short")));
        }
        let i = fields[0]
            .trim()
            .parse::<i64>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        let u = fields[1]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        let v = fields[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        rows.push((i, u, v));
    }
    Ok(rows)
}

/// Birkhoff rotation-number estimate with its monotone-lift error bound.
#[derive(Debug, Clone, Copy)]
pub struct RotationNumber {
    pub value: f64,
    pub error_bound: f64,
}

const MONOTONE_GRID: usize = 10_000;

/// Estimate the rotation number of a monotone circle lift by the Birkhoff
/// average of the displacement; the error bound is `1/iterates`.
pub fn rotation_number(
    lift: &dyn Fn(f64) -> f64,
    x0: f64,
    iterates: usize,
) -> Result<RotationNumber> {
    for k in 0..MONOTONE_GRID {
        let a = k as f64 / MONOTONE_GRID as f64;
        let b = (k + 1) as f64 / MONOTONE_GRID as f64;
        if lift(b) <= lift(a) {
            return Err(Error::NonMonotoneLift { x: a });
        }
    }
    let mut x = x0;
    for _ in 0..iterates {
        x = lift(x);
    }
    Ok(RotationNumber {
        value: (x - x0) / iterates as f64,
        error_bound: 1.0 / iterates as f64,
    })
}

/// Lyapunov estimate along an orbit of the circle map.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    /// Difference between the second-half average and the full average.
    pub tail: f64,
}

/// Average of `log g'` along the orbit of `x0`, projected to the sampled
/// minimal set first. Expected to vanish: the derivative is 1 off the gaps
/// and at every gap endpoint.
pub fn circle_lyapunov(d: &DenjoyMap, x0: f64, iterates: usize) -> LyapunovEstimate {
    let mut x = d.project_to_minimal_set(x0);
    let mut total = 0.0;
    let mut second_half = 0.0;
    for k in 0..iterates {
        let log_d = d.derivative(x).ln();
        total += log_d;
        if 2 * k >= iterates {
            second_half += log_d;
        }
        x = d.eval(x);
    }
    let lambda = total / iterates as f64;
    let half = (iterates - iterates / 2) as f64;
    LyapunovEstimate {
        lambda,
        tail: (second_half / half - lambda).abs(),
    }
}

/// Discretization of the minimal set: the circle minus the retained open
/// gaps, sampled at the given resolution.
#[derive(Debug, Clone)]
pub struct MinimalSetSample {
    pub points: Vec<f64>,
    /// Retained gap mass over the law's total mass.
    pub covered_gap_mass: f64,
    pub total_gap_mass: f64,
    /// Analytic bound on the unretained mass.
    pub tail_deficit: f64,
    /// Retained gaps narrower than the sampling resolution.
    pub unresolved_gaps: usize,
}

pub fn minimal_set_sample(d: &DenjoyMap, resolution: f64) -> MinimalSetSample {
    let mut points = Vec::new();
    let entries: Vec<(f64, f64)> = d.gaps_in_circle_order().map(|(_, u, v, _)| (u, v)).collect();
    let mut unresolved = 0;
    for (k, &(u, v)) in entries.iter().enumerate() {
        if v - u < resolution {
            unresolved += 1;
        }
        // complementary interval from this gap's end to the next gap's start
        let next_u = if k + 1 < entries.len() {
            entries[k + 1].0
        } else {
            entries[0].0 + 1.0
        };
        let len = next_u - v;
        if len <= 0.0 {
            continue;
        }
        let steps = (len / resolution).ceil() as usize;
        for s in 0..=steps {
            points.push(frac(v + len * s as f64 / steps as f64));
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let covered: f64 = entries.iter().map(|&(u, v)| v - u).sum();
    MinimalSetSample {
        points,
        covered_gap_mass: covered,
        total_gap_mass: d.law.mass,
        tail_deficit: d.tail_deficit,
        unresolved_gaps: unresolved,
    }
}

/// Smallest displacement `|g^p(x) - x|` over minimal-set samples, per period.
pub fn min_periodic_displacement(d: &DenjoyMap, max_period: usize, samples: usize) -> Vec<f64> {
    let starts: Vec<f64> = (0..samples)
        .map(|k| d.project_to_minimal_set(k as f64 / samples as f64))
        .collect();
    let mut out = vec![f64::INFINITY; max_period];
    for &x0 in &starts {
        let mut x = x0;
        for p in 1..=max_period {
            x = d.eval(x);
            let disp = circle_distance(x, x0);
            if disp < out[p - 1] {
                out[p - 1] = disp;
            }
        }
    }
    out
}
