//! Numeric thresholds used across the geometry and certification pipeline.
//!
//! The underlying mathematical conditions are open or equality conditions
//! with no intrinsic scale, so every threshold is explicit here and
//! overridable through the scenario configuration.

/// Thresholds for tangency classification, intersection capture, and
/// transversality margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// |z'(0)| below this counts as a vanishing first derivative.
    pub tol_first: f64,
    /// |z''(0)| above this counts as a nonzero second derivative.
    pub tol_second: f64,
    /// Maximum closest-pair distance for two patches to count as meeting.
    pub tol_meet: f64,
    /// Minimum distance of a tangency from the strong-unstable manifold.
    pub tol_off: f64,
    /// Minimum transversality margin (smallest stacked singular value).
    pub tol_trans: f64,
    /// Newton residual target for periodic orbits and inversion.
    pub newton_tol: f64,
    /// Newton iteration cap.
    pub newton_max_iter: usize,
    /// Target mesh spacing for manifold patches.
    pub h_mesh: f64,
    /// Radius around the `near` hint searched for intersection candidates.
    pub capture_radius: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_first: 1e-7,
            tol_second: 1e-7,
            tol_meet: 1e-6,
            tol_off: 1e-4,
            tol_trans: 1e-4,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            h_mesh: 1e-2,
            capture_radius: 0.1,
        }
    }
}
