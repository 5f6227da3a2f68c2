//! Shared numeric kernels: the flat-top bump profile and its integral,
//! continued-fraction irrationality certificates, closed-form cubic roots,
//! and small circle/vector helpers.

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::{Error, Result};

/// Flat-top bump profile on `[0, inf)` in units of the support radius.
///
/// Equals 1 exactly for `s <= plateau`, 0 exactly for `s >= 1`, and
/// `exp(1 - 1/(1 - u^2))` with `u = (s - plateau)/(1 - plateau)` in between.
/// The clamping to exact 0/1 makes "identity outside the support" bitwise
/// testable.
pub fn flat_top(s: f64, plateau: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&plateau));
    if s <= plateau {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let u = (s - plateau) / (1.0 - plateau);
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Derivative of [`flat_top`] with respect to `s`.
pub fn flat_top_deriv(s: f64, plateau: f64) -> f64 {
    if s <= plateau || s >= 1.0 {
        0.0
    } else {
        let u = (s - plateau) / (1.0 - plateau);
        let d = 1.0 - u * u;
        (1.0 - 1.0 / d).exp() * (-2.0 * u / (d * d)) / (1.0 - plateau)
    }
}

/// Standard profile used by bump perturbations: plateau at half the support.
pub const STANDARD_PLATEAU: f64 = 0.5;

/// Symmetric gap profile on `[0, 1]`: zero with zero slope at both endpoints,
/// exactly 1 on the middle half. Used for Denjoy derivative profiles.
pub fn gap_bump(u: f64) -> f64 {
    flat_top((2.0 * u - 1.0).abs(), STANDARD_PLATEAU)
}

fn gap_bump_table() -> &'static (Vec<f64>, f64) {
    static TABLE: OnceLock<(Vec<f64>, f64)> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Cumulative Simpson for the antiderivative of gap_bump on a fixed
        // fine grid; the integrand is C^1, so panel errors stay below 1e-13.
        let n = 1 << 14;
        let h = 1.0 / n as f64;
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let a = k as f64 * h;
            let m = a + 0.5 * h;
            let b = a + h;
            acc += h / 6.0 * (gap_bump(a) + 4.0 * gap_bump(m) + gap_bump(b));
            cumulative.push(acc);
        }
        let mean = acc;
        (cumulative, mean)
    })
}

/// Antiderivative `W(u) = \int_0^u gap_bump` evaluated from the cached table
/// plus one local Simpson panel; `W(0) = 0` and `W(1)` equal the cached mean
/// exactly.
pub fn gap_bump_integral(u: f64) -> f64 {
    let (table, mean) = gap_bump_table();
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return *mean;
    }
    let n = table.len() - 1;
    let pos = u * n as f64;
    let k = pos.floor() as usize;
    let a = k as f64 / n as f64;
    let h = u - a;
    let m = a + 0.5 * h;
    table[k] + h / 6.0 * (gap_bump(a) + 4.0 * gap_bump(m) + gap_bump(u))
}

/// Mean of the gap profile over `[0, 1]`.
pub fn gap_bump_mean() -> f64 {
    gap_bump_table().1
}

fn sup_flat_top_deriv() -> f64 {
    static SUP: OnceLock<f64> = OnceLock::new();
    *SUP.get_or_init(|| {
        let n = 200_000;
        let mut sup: f64 = 0.0;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            sup = sup.max(flat_top_deriv(s, STANDARD_PLATEAU).abs());
        }
        sup
    })
}

/// Supremum of |d/ds flat_top(s, 1/2)| over the support, used in
/// perturbation-size guards.
pub fn standard_profile_sup_deriv() -> f64 {
    sup_flat_top_deriv()
}

/// Continued-fraction expansion of `x`; stops when the remainder drops below
/// `1e-12` or `max_terms` partial quotients have been produced.
pub fn continued_fraction(x: f64, max_terms: usize) -> Vec<u64> {
    let mut terms = Vec::new();
    let mut r = x.abs();
    for _ in 0..max_terms {
        let a = r.floor();
        terms.push(a as u64);
        let frac = r - a;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    terms
}

/// Certificate that `x` behaves irrationally at double precision: its
/// continued fraction must carry at least `min_terms` partial quotients, all
/// below 1e6, before bottoming out. Exactly representable rationals
/// (`1/4`) terminate early; near-rationals (decimal literals like `0.1`)
/// expose a huge quotient.
pub fn certify_irrational(x: f64, min_terms: usize) -> Result<Vec<u64>> {
    let terms = continued_fraction(x, min_terms + 1);
    if terms.len() <= min_terms {
        return Err(Error::NotIrrational {
            value: x,
            reason: format!(
                "continued fraction terminates after {} terms",
                terms.len()
            ),
        });
    }
    if let Some(&big) = terms.iter().skip(1).find(|&&a| a > 1_000_000) {
        return Err(Error::NotIrrational {
            value: x,
            reason: format!("partial quotient {} exceeds 1e6", big),
        });
    }
    Ok(terms)
}

/// Roots of `x^3 + a2 x^2 + a1 x + a0` with real coefficients.
///
/// Uses the trigonometric method when all roots are real and Cardano plus
/// deflation otherwise, so a non-real pair is conjugate by construction.
pub fn cubic_roots(a2: f64, a1: f64, a0: f64) -> [Complex64; 3] {
    // depressed cubic t^3 + p t + q with x = t - a2/3
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + a0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;

    let poly = |x: f64| ((x + a2) * x + a1) * x + a0;
    let dpoly = |x: f64| (3.0 * x + 2.0 * a2) * x + a1;
    let polish = |mut x: f64| {
        for _ in 0..3 {
            let d = dpoly(x);
            if d.abs() > 1e-300 {
                x -= poly(x) / d;
            }
        }
        x
    };

    if disc >= 0.0 && p < 0.0 {
        // three real roots
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut roots = [0.0f64; 3];
        for (k, r) in roots.iter_mut().enumerate() {
            *r = polish(m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift);
        }
        roots.map(|r| Complex64::new(r, 0.0))
    } else if p == 0.0 && q == 0.0 {
        [Complex64::new(-shift, 0.0); 3]
    } else {
        // one real root by Cardano
        let half_q = q / 2.0;
        let inner = half_q * half_q + p * p * p / 27.0;
        let real_root = if inner >= 0.0 {
            let s = inner.sqrt();
            let u = (-half_q + s).cbrt();
            let v = (-half_q - s).cbrt();
            polish(u + v - shift)
        } else {
            // disc > 0 but p >= 0 cannot happen; fall back to trig branch guard
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            polish(m * (arg.acos() / 3.0).cos() - shift)
        };
        // deflate: x^3 + a2 x^2 + a1 x + a0 = (x - r)(x^2 + beta x + gamma)
        let beta = a2 + real_root;
        let gamma = a1 + real_root * beta;
        let half = -beta / 2.0;
        let rad = half * half - gamma;
        if rad >= 0.0 {
            let s = rad.sqrt();
            [
                Complex64::new(real_root, 0.0),
                Complex64::new(polish(half + s), 0.0),
                Complex64::new(polish(half - s), 0.0),
            ]
        } else {
            let im = (-rad).sqrt();
            [
                Complex64::new(real_root, 0.0),
                Complex64::new(half, im),
                Complex64::new(half, -im),
            ]
        }
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance between two circle points in `[0, 1)` parameter units.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = frac(a - b);
    d.min(1.0 - d)
}

/// Unoriented angle between two nonzero vectors, in `[0, pi]`.
pub fn angle_between(u: &nalgebra::Vector3<f64>, v: &nalgebra::Vector3<f64>) -> f64 {
    u.cross(v).norm().atan2(u.dot(v))
}

/// Adaptive Simpson quadrature, used as an independent cross-check oracle.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_top_is_clamped_and_continuous() {
        assert_eq!(flat_top(0.0, 0.5), 1.0);
        assert_eq!(flat_top(0.5, 0.5), 1.0);
        assert_eq!(flat_top(1.0, 0.5), 0.0);
        assert_eq!(flat_top(2.0, 0.5), 0.0);
        // continuity at the plateau junction
        assert_relative_eq!(flat_top(0.5 + 1e-9, 0.5), 1.0, epsilon = 1e-6);
        assert!(flat_top(0.999_999, 0.5) < 1e-6);
    }

    #[test]
    fn gap_bump_integral_matches_adaptive_simpson() {
        let oracle = adaptive_simpson(&|u| gap_bump(u), 0.0, 1.0, 1e-14);
        assert_relative_eq!(gap_bump_mean(), oracle, epsilon = 1e-12);
        for &u in &[0.1, 0.25, 0.3, 0.5, 0.75, 0.9] {
            let part = adaptive_simpson(&|v| gap_bump(v), 0.0, u, 1e-14);
            assert_relative_eq!(gap_bump_integral(u), part, epsilon = 1e-11);
        }
    }

    #[test]
    fn continued_fraction_of_golden_mean_is_all_ones() {
        let golden = (5.0f64.sqrt() - 1.0) / 2.0;
        let terms = continued_fraction(golden, 22);
        assert_eq!(terms[0], 0);
        assert!(terms[1..21].iter().all(|&a| a == 1));
        assert!(certify_irrational(golden, 20).is_ok());
    }

    #[test]
    fn irrationality_certificate_rejects_rationals() {
        assert!(certify_irrational(0.25, 20).is_err());
        assert!(certify_irrational(0.1, 20).is_err());
        assert!(certify_irrational(2.0f64.sqrt() - 1.0, 20).is_ok());
    }

    #[test]
    fn cubic_roots_cover_real_and_complex_cases() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let mut roots: Vec<f64> = cubic_roots(-6.0, 11.0, -6.0).iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        assert_relative_eq!(roots[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(roots[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(roots[2], 3.0, epsilon = 1e-12);

        // (x-2)(x^2+1): pair must be exactly conjugate
        let roots = cubic_roots(-2.0, 1.0, -2.0);
        let real = roots.iter().find(|z| z.im == 0.0).unwrap();
        assert_relative_eq!(real.re, 2.0, epsilon = 1e-12);
        let pair: Vec<_> = roots.iter().filter(|z| z.im != 0.0).collect();
        assert_eq!(pair.len(), 2);
        assert_eq!(pair[0].re, pair[1].re);
        assert_eq!(pair[0].im, -pair[1].im);
        assert_relative_eq!(pair[0].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_distance_wraps() {
        assert_relative_eq!(circle_distance(0.95, 0.05), 0.1, epsilon = 1e-15);
        assert_relative_eq!(circle_distance(0.2, 0.6), 0.4, epsilon = 1e-15);
    }
}
