//! Flat `key = value` scenario configuration with exact-round-trip parsing.
//!
//! Unknown sections or keys are rejected; emission is in a fixed canonical
//! order so identical scenarios serialize identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use wanderlab_core::{Error, Result};

/// Which shipped cycle construction the `[cycle]` section selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    Single,
    Equidimensional,
    Heterodimensional,
}

impl CycleKind {
    fn as_str(&self) -> &'static str {
        match self {
            CycleKind::Single => "single",
            CycleKind::Equidimensional => "equidimensional",
            CycleKind::Heterodimensional => "heterodimensional",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(CycleKind::Single),
            "equidimensional" => Ok(CycleKind::Equidimensional),
            "heterodimensional" => Ok(CycleKind::Heterodimensional),
            other => Err(Error::Parse(format!("unknown cycle kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleSection {
    pub kind: CycleKind,
    pub contracting: f64,
    pub expanding: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfSection {
    pub mu: f64,
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub period: u32,
    pub radial_r4: f64,
    pub angular_r2: f64,
    pub scan_min: f64,
    pub scan_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenjoySection {
    pub alpha: f64,
    pub mass: f64,
    pub exponent: f64,
    pub i_max: usize,
    pub verify_n: usize,
    pub rotation_iterates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubesSection {
    pub count: usize,
    pub delta_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifySection {
    pub horizon: usize,
    pub diameter_tolerance: f64,
    pub omega_seeds: usize,
    pub omega_k_min: usize,
    pub omega_k_max: usize,
    pub omega_checkpoints: usize,
    pub resolution: f64,
    pub lyapunov_iterates: usize,
    pub lyapunov_bound: f64,
    pub max_period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TolerancesSection {
    pub tol_first: f64,
    pub tol_second: f64,
    pub tol_meet: f64,
    pub tol_off: f64,
    pub tol_trans: f64,
    pub newton_tol: f64,
    pub h_mesh: f64,
    pub capture_radius: f64,
}

/// The full scenario: one flat table per pipeline stage, plus the RNG seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub cycle: CycleSection,
    pub hopf: HopfSection,
    pub denjoy: DenjoySection,
    pub tubes: TubesSection,
    pub certify: CertifySection,
    pub tolerances: TolerancesSection,
}

fn golden() -> f64 {
    (5.0f64.sqrt() - 1.0) / 2.0
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            cycle: CycleSection {
                kind: CycleKind::Equidimensional,
                contracting: 0.5,
                expanding: 2.0,
                rotation: golden(),
            },
            hopf: HopfSection {
                mu: 0.04,
                a: 1.0,
                beta: 2.0 * std::f64::consts::PI * golden(),
                gamma: 0.5,
                period: 1,
                radial_r4: 0.0,
                angular_r2: 0.0,
                scan_min: -0.05,
                scan_max: 0.05,
            },
            denjoy: DenjoySection {
                alpha: golden(),
                mass: 0.5,
                exponent: 2.0,
                i_max: 100_000,
                verify_n: 1000,
                rotation_iterates: 1_000_000,
            },
            tubes: TubesSection {
                count: 1001,
                delta_fraction: 0.4,
            },
            certify: CertifySection {
                horizon: 1000,
                diameter_tolerance: 1e-6,
                omega_seeds: 20,
                omega_k_min: 10_000,
                omega_k_max: 100_000,
                omega_checkpoints: 10,
                resolution: 1e-3,
                lyapunov_iterates: 100_000,
                lyapunov_bound: 1e-2,
                max_period: 50,
            },
            tolerances: TolerancesSection {
                tol_first: 1e-7,
                tol_second: 1e-7,
                tol_meet: 1e-6,
                tol_off: 1e-4,
                tol_trans: 1e-4,
                newton_tol: 1e-12,
                h_mesh: 1e-2,
                capture_radius: 0.1,
            },
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{:.17e}", x)
}

impl Scenario {
    /// Serialize in canonical section and key order, floats at 17 significant
    /// digits.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s);
        let _ = writeln!(s, "[cycle]");
        let _ = writeln!(s, "kind = {}", self.cycle.kind.as_str());
        let _ = writeln!(s, "contracting = {}", fmt_f64(self.cycle.contracting));
        let _ = writeln!(s, "expanding = {}", fmt_f64(self.cycle.expanding));
        let _ = writeln!(s, "rotation = {}", fmt_f64(self.cycle.rotation));
        let _ = writeln!(s);
        let _ = writeln!(s, "[hopf]");
        let _ = writeln!(s, "mu = {}", fmt_f64(self.hopf.mu));
        let _ = writeln!(s, "a = {}", fmt_f64(self.hopf.a));
        let _ = writeln!(s, "beta = {}", fmt_f64(self.hopf.beta));
        let _ = writeln!(s, "gamma = {}", fmt_f64(self.hopf.gamma));
        let _ = writeln!(s, "period = {}", self.hopf.period);
        let _ = writeln!(s, "radial_r4 = {}", fmt_f64(self.hopf.radial_r4));
        let _ = writeln!(s, "angular_r2 = {}", fmt_f64(self.hopf.angular_r2));
        let _ = writeln!(s, "scan_min = {}", fmt_f64(self.hopf.scan_min));
        let _ = writeln!(s, "scan_max = {}", fmt_f64(self.hopf.scan_max));
        let _ = writeln!(s);
        let _ = writeln!(s, "[denjoy]");
        let _ = writeln!(s, "alpha = {}", fmt_f64(self.denjoy.alpha));
        let _ = writeln!(s, "mass = {}", fmt_f64(self.denjoy.mass));
        let _ = writeln!(s, "exponent = {}", fmt_f64(self.denjoy.exponent));
        let _ = writeln!(s, "i_max = {}", self.denjoy.i_max);
        let _ = writeln!(s, "verify_n = {}", self.denjoy.verify_n);
        let _ = writeln!(s, "rotation_iterates = {}", self.denjoy.rotation_iterates);
        let _ = writeln!(s);
        let _ = writeln!(s, "[tubes]");
        let _ = writeln!(s, "count = {}", self.tubes.count);
        let _ = writeln!(s, "delta_fraction = {}", fmt_f64(self.tubes.delta_fraction));
        let _ = writeln!(s);
        let _ = writeln!(s, "[certify]");
        let _ = writeln!(s, "horizon = {}", self.certify.horizon);
        let _ = writeln!(
            s,
            "diameter_tolerance = {}",
            fmt_f64(self.certify.diameter_tolerance)
        );
        let _ = writeln!(s, "omega_seeds = {}", self.certify.omega_seeds);
        let _ = writeln!(s, "omega_k_min = {}", self.certify.omega_k_min);
        let _ = writeln!(s, "omega_k_max = {}", self.certify.omega_k_max);
        let _ = writeln!(s, "omega_checkpoints = {}", self.certify.omega_checkpoints);
        let _ = writeln!(s, "resolution = {}", fmt_f64(self.certify.resolution));
        let _ = writeln!(s, "lyapunov_iterates = {}", self.certify.lyapunov_iterates);
        let _ = writeln!(s, "lyapunov_bound = {}", fmt_f64(self.certify.lyapunov_bound));
        let _ = writeln!(s, "max_period = {}", self.certify.max_period);
        let _ = writeln!(s);
        let _ = writeln!(s, "[tolerances]");
        let _ = writeln!(s, "tol_first = {}", fmt_f64(self.tolerances.tol_first));
        let _ = writeln!(s, "tol_second = {}", fmt_f64(self.tolerances.tol_second));
        let _ = writeln!(s, "tol_meet = {}", fmt_f64(self.tolerances.tol_meet));
        let _ = writeln!(s, "tol_off = {}", fmt_f64(self.tolerances.tol_off));
        let _ = writeln!(s, "tol_trans = {}", fmt_f64(self.tolerances.tol_trans));
        let _ = writeln!(s, "newton_tol = {}", fmt_f64(self.tolerances.newton_tol));
        let _ = writeln!(s, "h_mesh = {}", fmt_f64(self.tolerances.h_mesh));
        let _ = writeln!(
            s,
            "capture_radius = {}",
            fmt_f64(self.tolerances.capture_radius)
        );
        s
    }

    /// Parse a scenario, starting from defaults; every key must be known and
    /// every tolerance positive.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut tables: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new(); // "" = top level
        tables.insert(String::new(), BTreeMap::new());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Parse(format!(
                        "line {}: malformed section header '{}'",
                        lineno + 1,
                        line
                    )));
                }
                current = line[1..line.len() - 1].trim().to_string();
                tables.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected 'key = value', got '{}'",
                    lineno + 1,
                    line
                )));
            };
            tables
                .get_mut(&current)
                .expect("section exists")
                .insert(key.trim().to_string(), value.trim().to_string());
        }

        let known_sections = ["", "cycle", "hopf", "denjoy", "tubes", "certify", "tolerances"];
        for section in tables.keys() {
            if !known_sections.contains(&section.as_str()) {
                return Err(Error::Parse(format!("unknown section '[{section}]'")));
            }
        }

        let mut scenario = Scenario::default();
        let get_f64 = |v: &str, key: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Parse(format!("key '{key}': invalid number '{v}'")))
        };
        let get_usize = |v: &str, key: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Parse(format!("key '{key}': invalid integer '{v}'")))
        };

        for (section, table) in &tables {
            for (key, value) in table {
                let qualified = if section.is_empty() {
                    key.clone()
                } else {
                    format!("{section}.{key}")
                };
                match qualified.as_str() {
                    "seed" => {
                        scenario.seed = value
                            .parse::<u64>()
                            .map_err(|_| Error::Parse(format!("invalid seed '{value}'")))?
                    }
                    "cycle.kind" => scenario.cycle.kind = CycleKind::parse(value)?,
                    "cycle.contracting" => scenario.cycle.contracting = get_f64(value, key)?,
                    "cycle.expanding" => scenario.cycle.expanding = get_f64(value, key)?,
                    "cycle.rotation" => scenario.cycle.rotation = get_f64(value, key)?,
                    "hopf.mu" => scenario.hopf.mu = get_f64(value, key)?,
                    "hopf.a" => scenario.hopf.a = get_f64(value, key)?,
                    "hopf.beta" => scenario.hopf.beta = get_f64(value, key)?,
                    "hopf.gamma" => scenario.hopf.gamma = get_f64(value, key)?,
                    "hopf.period" => scenario.hopf.period = get_usize(value, key)? as u32,
                    "hopf.radial_r4" => scenario.hopf.radial_r4 = get_f64(value, key)?,
                    "hopf.angular_r2" => scenario.hopf.angular_r2 = get_f64(value, key)?,
                    "hopf.scan_min" => scenario.hopf.scan_min = get_f64(value, key)?,
                    "hopf.scan_max" => scenario.hopf.scan_max = get_f64(value, key)?,
                    "denjoy.alpha" => scenario.denjoy.alpha = get_f64(value, key)?,
                    "denjoy.mass" => scenario.denjoy.mass = get_f64(value, key)?,
                    "denjoy.exponent" => scenario.denjoy.exponent = get_f64(value, key)?,
                    "denjoy.i_max" => scenario.denjoy.i_max = get_usize(value, key)?,
                    "denjoy.verify_n" => scenario.denjoy.verify_n = get_usize(value, key)?,
                    "denjoy.rotation_iterates" => {
                        scenario.denjoy.rotation_iterates = get_usize(value, key)?
                    }
                    "tubes.count" => scenario.tubes.count = get_usize(value, key)?,
                    "tubes.delta_fraction" => {
                        scenario.tubes.delta_fraction = get_f64(value, key)?
                    }
                    "certify.horizon" => scenario.certify.horizon = get_usize(value, key)?,
                    "certify.diameter_tolerance" => {
                        scenario.certify.diameter_tolerance = get_f64(value, key)?
                    }
                    "certify.omega_seeds" => {
                        scenario.certify.omega_seeds = get_usize(value, key)?
                    }
                    "certify.omega_k_min" => {
                        scenario.certify.omega_k_min = get_usize(value, key)?
                    }
                    "certify.omega_k_max" => {
                        scenario.certify.omega_k_max = get_usize(value, key)?
                    }
                    "certify.omega_checkpoints" => {
                        scenario.certify.omega_checkpoints = get_usize(value, key)?
                    }
                    "certify.resolution" => scenario.certify.resolution = get_f64(value, key)?,
                    "certify.lyapunov_iterates" => {
                        scenario.certify.lyapunov_iterates = get_usize(value, key)?
                    }
                    "certify.lyapunov_bound" => {
                        scenario.certify.lyapunov_bound = get_f64(value, key)?
                    }
                    "certify.max_period" => {
                        scenario.certify.max_period = get_usize(value, key)?
                    }
                    "tolerances.tol_first" => {
                        scenario.tolerances.tol_first = get_f64(value, key)?
                    }
                    "tolerances.tol_second" => {
                        scenario.tolerances.tol_second = get_f64(value, key)?
                    }
                    "tolerances.tol_meet" => scenario.tolerances.tol_meet = get_f64(value, key)?,
                    "tolerances.tol_off" => scenario.tolerances.tol_off = get_f64(value, key)?,
                    "tolerances.tol_trans" => {
                        scenario.tolerances.tol_trans = get_f64(value, key)?
                    }
                    "tolerances.newton_tol" => {
                        scenario.tolerances.newton_tol = get_f64(value, key)?
                    }
                    "tolerances.h_mesh" => scenario.tolerances.h_mesh = get_f64(value, key)?,
                    "tolerances.capture_radius" => {
                        scenario.tolerances.capture_radius = get_f64(value, key)?
                    }
                    other => {
                        return Err(Error::Parse(format!("unknown key '{other}'")));
                    }
                }
            }
        }

        let t = &scenario.tolerances;
        for (name, v) in [
            ("tol_first", t.tol_first),
            ("tol_second", t.tol_second),
            ("tol_meet", t.tol_meet),
            ("tol_off", t.tol_off),
            ("tol_trans", t.tol_trans),
            ("newton_tol", t.newton_tol),
            ("h_mesh", t.h_mesh),
            ("capture_radius", t.capture_radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::Parse(format!(
                    "tolerance '{name}' must be positive (got {v})"
                )));
            }
        }
        Ok(scenario)
    }

    pub fn to_tolerances(&self) -> wanderlab_core::tolerances::Tolerances {
        wanderlab_core::tolerances::Tolerances {
            tol_first: self.tolerances.tol_first,
            tol_second: self.tolerances.tol_second,
            tol_meet: self.tolerances.tol_meet,
            tol_off: self.tolerances.tol_off,
            tol_trans: self.tolerances.tol_trans,
            newton_tol: self.tolerances.newton_tol,
            newton_max_iter: 50,
            h_mesh: self.tolerances.h_mesh,
            capture_radius: self.tolerances.capture_radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_to_identical_values() {
        let default = Scenario::default();
        let emitted = default.emit();
        let parsed = Scenario::parse(&emitted).unwrap();
        assert_eq!(default, parsed);
        // emission is deterministic byte-for-byte
        assert_eq!(emitted, parsed.emit());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = "[hopf]\nmuu = 0.04\n";
        match Scenario::parse(text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("hopf.muu")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_sections_are_rejected() {
        assert!(Scenario::parse("[hopff]\nmu = 0.0\n").is_err());
    }

    #[test]
    fn nonpositive_tolerances_are_rejected() {
        let text = "[tolerances]\ntol_meet = 0.0\n";
        assert!(Scenario::parse(text).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# top comment\nseed = 7\n\n[hopf]\nmu = 0.01 # inline\n";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.hopf.mu, 0.01);
    }
}
