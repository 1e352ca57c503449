//! Flat `key = value` run configuration with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! experiment = compare
//! domain.kind = rectangle
//! domain.lower_left.x = -1
//! domain.lower_left.y = -1
//! domain.lx = 2
//! domain.ly = 2
//! epsilon = 0.03125
//! g = 0.5
//! vortices.u[0].x = 0.35
//! vortices.u[0].y = 0
//! vortices.u[0].degree = 1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridSpec};
use crate::harmonic_map::{Component, Vortex, VortexConfiguration};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Profile,
    Gamma,
    Reduced,
    Simulate,
    Compare,
    Track,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Profile,
        Experiment::Gamma,
        Experiment::Reduced,
        Experiment::Simulate,
        Experiment::Compare,
        Experiment::Track,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Profile => "profile",
            Experiment::Gamma => "gamma",
            Experiment::Reduced => "reduced",
            Experiment::Simulate => "simulate",
            Experiment::Compare => "compare",
            Experiment::Track => "track",
        }
    }

    /// Experiments that run the PDE on a rectangle.
    pub fn needs_pde(self) -> bool {
        matches!(
            self,
            Experiment::Simulate | Experiment::Compare | Experiment::Track
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub domain: Domain,
    pub grid: GridSpec,
    /// Whether `grid.*` was given; compare runs otherwise derive the grid from `ε`.
    pub grid_explicit: bool,
    pub epsilon: f64,
    pub g: f64,
    pub dt: f64,
    pub horizon: f64,
    pub vortices: VortexConfiguration,
    pub snapshot_stride: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub profile_radius: f64,
    pub profile_intervals: usize,
    pub gamma_radii: Vec<f64>,
    pub max_jump: Option<f64>,
    pub modulus_floor: Option<f64>,
    pub track_input: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults around a domain, `ε` and `g`: `dt = 0.25 ε²` and a 256² grid.
    pub fn new(domain: Domain, epsilon: f64, g: f64) -> Self {
        Self {
            experiment: None,
            domain,
            grid: GridSpec { nx: 256, ny: 256 },
            grid_explicit: false,
            epsilon,
            g,
            dt: 0.25 * epsilon * epsilon,
            horizon: 0.1,
            vortices: VortexConfiguration::default(),
            snapshot_stride: 20,
            output: None,
            seed: 0,
            profile_radius: 200.0,
            profile_intervals: crate::profile_gamma::DEFAULT_INTERVALS,
            gamma_radii: vec![200.0, 400.0, 800.0],
            max_jump: None,
            modulus_floor: None,
            track_input: None,
        }
    }

    /// Checks all physical parameters; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Error::Validation {
            key: key.into(),
            message,
        };
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(bad(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if !(self.g > 0.0 && self.g < 1.0) && self.g != 0.0 {
            return Err(bad(
                "g",
                format!(
                    "must lie in the open interval (0,1) (or equal 0 for the decoupled case), got {}",
                    self.g
                ),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(bad(
                "horizon",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(bad("snapshot_stride", "must be at least 1".into()));
        }
        self.grid
            .validate()
            .map_err(|e| bad("grid", e.to_string()))?;
        if !(self.profile_radius >= 50.0 && self.profile_radius.is_finite()) {
            return Err(bad(
                "profile.radius",
                format!("must be at least 50, got {}", self.profile_radius),
            ));
        }
        if self.profile_intervals < 512 {
            return Err(bad(
                "profile.intervals",
                format!("must be at least 512, got {}", self.profile_intervals),
            ));
        }
        if self.gamma_radii.is_empty()
            || self
                .gamma_radii
                .iter()
                .any(|r| !(*r >= 50.0 && r.is_finite()))
        {
            return Err(bad(
                "gamma.radii",
                "needs one or more radii, each at least 50".into(),
            ));
        }
        if let Some(j) = self.max_jump {
            if !(j > 0.0 && j.is_finite()) {
                return Err(bad(
                    "tracking.max_jump",
                    format!("must be positive, got {j}"),
                ));
            }
        }
        if let Some(f) = self.modulus_floor {
            let s = crate::profile_gamma::background(self.g);
            if !(f > 0.0 && f < s) {
                return Err(bad(
                    "tracking.modulus_floor",
                    format!("must lie in (0, {s}), got {f}"),
                ));
            }
        }
        if self.experiment.is_some_and(Experiment::needs_pde)
            && !matches!(self.domain, Domain::Rectangle { .. })
        {
            return Err(bad(
                "domain.kind",
                "PDE experiments need a rectangle".into(),
            ));
        }
        self.validate_vortices()
    }

    fn validate_vortices(&self) -> Result<()> {
        let all: Vec<(String, &Vortex)> = [Component::U, Component::V]
            .into_iter()
            .flat_map(|c| {
                self.vortices
                    .family(c)
                    .iter()
                    .enumerate()
                    .map(move |(k, v)| (format!("vortices.{}[{k}]", c.label()), v))
            })
            .collect();
        for (key, v) in &all {
            if !self.domain.contains_strictly(v.position) {
                return Err(Error::Validation {
                    key: key.clone(),
                    message: format!(
                        "position ({}, {}) is not strictly inside the domain",
                        v.position.x, v.position.y
                    ),
                });
            }
        }
        for (k, (ka, a)) in all.iter().enumerate() {
            for (kb, b) in &all[k + 1..] {
                if a.position == b.position {
                    return Err(Error::Validation {
                        key: kb.clone(),
                        message: format!("coincides with {ka}: min_separation is zero"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Grid used by compare runs: the configured grid, or `⌈4 L / ε⌉` cells
    /// per axis so that a core diameter spans at least 8 cells.
    pub fn compare_grid(&self) -> Result<GridSpec> {
        if self.grid_explicit {
            return Ok(self.grid);
        }
        let (_, lx, ly) = self.domain.bounding_box();
        let cells = |l: f64| ((4.0 * l / self.epsilon) - 1e-9).ceil().max(8.0) as usize;
        GridSpec::new(cells(lx), cells(ly))
    }

    /// Number of time steps covering the horizon.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct VortexDraft {
    x: Option<f64>,
    y: Option<f64>,
    degree: Option<i32>,
    line: usize,
}

const SCALAR_KEYS: &[&str] = &[
    "experiment",
    "domain.kind",
    "domain.center.x",
    "domain.center.y",
    "domain.radius",
    "domain.lower_left.x",
    "domain.lower_left.y",
    "domain.lx",
    "domain.ly",
    "grid.nx",
    "grid.ny",
    "epsilon",
    "g",
    "dt",
    "horizon",
    "snapshot_stride",
    "output",
    "seed",
    "profile.radius",
    "profile.intervals",
    "gamma.radii",
    "tracking.max_jump",
    "tracking.modulus_floor",
    "track.input",
];

/// `vortices.u[3].x` → `(U, 3, "x")`.
fn vortex_key(key: &str) -> Option<(Component, usize, &str)> {
    let rest = key.strip_prefix("vortices.")?;
    let (comp, rest) = rest.split_once('[')?;
    let (idx, field) = rest.split_once("].")?;
    let component = comp.parse().ok()?;
    if idx.is_empty()
        || !idx.bytes().all(|b| b.is_ascii_digit())
        || (idx.len() > 1 && idx.starts_with('0'))
    {
        return None;
    }
    let index = idx.parse().ok()?;
    matches!(field, "x" | "y" | "degree").then_some((component, index, field))
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Parse {
        line,
        message: format!("`{key}`: cannot parse `{value}`: {e}"),
    })
}

fn parse_real(line: usize, key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse_value(line, key, value)?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("`{key}`: value must be finite"),
        });
    }
    Ok(x)
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut drafts: [BTreeMap<usize, VortexDraft>; 2] = Default::default();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty key".into(),
            });
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("`{key}`: empty value"),
            });
        }
        if let Some(prev) = entries.get(key) {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` already set on line {}", prev.line),
            });
        }
        if let Some((c, index, field)) = vortex_key(key) {
            let slot = match c {
                Component::U => 0,
                Component::V => 1,
            };
            let d = drafts[slot].entry(index).or_default();
            if d.line == 0 {
                d.line = line;
            }
            match field {
                "x" => d.x = Some(parse_real(line, key, value)?),
                "y" => d.y = Some(parse_real(line, key, value)?),
                _ => d.degree = Some(parse_value(line, key, value)?),
            }
        } else if !SCALAR_KEYS.contains(&key) {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    build(&entries, drafts)
}

fn build(
    entries: &BTreeMap<String, Entry>,
    drafts: [BTreeMap<usize, VortexDraft>; 2],
) -> Result<RunConfig> {
    let real = |key: &str| -> Result<Option<f64>> {
        entries
            .get(key)
            .map(|e| parse_real(e.line, key, &e.value))
            .transpose()
    };
    let int = |key: &str| -> Result<Option<u64>> {
        entries
            .get(key)
            .map(|e| parse_value::<u64>(e.line, key, &e.value))
            .transpose()
    };
    let required = |key: &str| -> Result<f64> {
        real(key)?.ok_or_else(|| Error::Validation {
            key: key.into(),
            message: "required key is missing".into(),
        })
    };
    let invalid = |key: &str, message: String| {
        let line = entries.get(key).map_or(0, |e| e.line);
        Error::Validation {
            key: key.into(),
            message: if line > 0 {
                format!("line {line}: {message}")
            } else {
                message
            },
        }
    };

    let kind = entries
        .get("domain.kind")
        .ok_or_else(|| Error::Validation {
            key: "domain.kind".into(),
            message: "required key is missing (disk or rectangle)".into(),
        })?;
    let disk_keys = ["domain.center.x", "domain.center.y", "domain.radius"];
    let rect_keys = [
        "domain.lower_left.x",
        "domain.lower_left.y",
        "domain.lx",
        "domain.ly",
    ];
    let domain = match kind.value.as_str() {
        "disk" => {
            if let Some(k) = rect_keys.iter().find(|k| entries.contains_key(**k)) {
                return Err(invalid(k, "not a disk parameter".into()));
            }
            let center = Vec2::new(
                real("domain.center.x")?.unwrap_or(0.0),
                real("domain.center.y")?.unwrap_or(0.0),
            );
            let radius = real("domain.radius")?.unwrap_or(1.0);
            Domain::disk(center, radius).map_err(|e| invalid("domain.radius", e.to_string()))?
        }
        "rectangle" => {
            if let Some(k) = disk_keys.iter().find(|k| entries.contains_key(**k)) {
                return Err(invalid(k, "not a rectangle parameter".into()));
            }
            let ll = Vec2::new(
                real("domain.lower_left.x")?.unwrap_or(-1.0),
                real("domain.lower_left.y")?.unwrap_or(-1.0),
            );
            let lx = real("domain.lx")?.unwrap_or(2.0);
            let ly = real("domain.ly")?.unwrap_or(2.0);
            Domain::rectangle(ll, lx, ly).map_err(|e| invalid("domain.lx", e.to_string()))?
        }
        other => {
            return Err(invalid(
                "domain.kind",
                format!("expected disk or rectangle, got `{other}`"),
            ));
        }
    };

    let epsilon = required("epsilon")?;
    let g = required("g")?;
    let mut cfg = RunConfig::new(domain, epsilon, g);
    if let Some(e) = entries.get("experiment") {
        cfg.experiment = Some(
            e.value
                .parse()
                .map_err(|m: String| invalid("experiment", m))?,
        );
    }
    let nx = int("grid.nx")?;
    let ny = int("grid.ny")?;
    if nx.is_some() || ny.is_some() {
        cfg.grid_explicit = true;
        let n = nx.or(ny).unwrap_or(256) as usize;
        cfg.grid = GridSpec {
            nx: nx.map_or(n, |v| v as usize),
            ny: ny.map_or(n, |v| v as usize),
        };
    }
    if let Some(dt) = real("dt")? {
        cfg.dt = dt;
    } else if epsilon.is_nan() || epsilon <= 0.0 {
        cfg.dt = f64::NAN;
    }
    if let Some(h) = real("horizon")? {
        cfg.horizon = h;
    }
    if let Some(s) = int("snapshot_stride")? {
        cfg.snapshot_stride = s as usize;
    }
    if let Some(e) = entries.get("output") {
        cfg.output = Some(PathBuf::from(&e.value));
    }
    if let Some(e) = entries.get("track.input") {
        cfg.track_input = Some(PathBuf::from(&e.value));
    }
    if let Some(s) = int("seed")? {
        cfg.seed = s;
    }
    if let Some(r) = real("profile.radius")? {
        cfg.profile_radius = r;
    }
    if let Some(n) = int("profile.intervals")? {
        cfg.profile_intervals = n as usize;
    }
    if let Some(e) = entries.get("gamma.radii") {
        cfg.gamma_radii = e
            .value
            .split(',')
            .map(|s| parse_real(e.line, "gamma.radii", s.trim()))
            .collect::<Result<_>>()?;
    }
    cfg.max_jump = real("tracking.max_jump")?;
    cfg.modulus_floor = real("tracking.modulus_floor")?;

    let [du, dv] = drafts;
    cfg.vortices = VortexConfiguration::new(family(Component::U, du)?, family(Component::V, dv)?);

    cfg.validate().map_err(|e| match e {
        Error::Validation { key, message } => {
            let line = entries.get(&key).map(|e| e.line).or_else(|| {
                vortex_index(&key).and_then(|(c, i)| {
                    let k = format!("vortices.{}[{i}].x", c.label());
                    entries.get(&k).map(|e| e.line)
                })
            });
            match line {
                Some(l) => Error::Validation {
                    key,
                    message: format!("line {l}: {message}"),
                },
                None => Error::Validation { key, message },
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

fn vortex_index(key: &str) -> Option<(Component, usize)> {
    let rest = key.strip_prefix("vortices.")?;
    let (comp, rest) = rest.split_once('[')?;
    let idx = rest.strip_suffix(']')?;
    Some((comp.parse().ok()?, idx.parse().ok()?))
}

fn family(c: Component, drafts: BTreeMap<usize, VortexDraft>) -> Result<Vec<Vortex>> {
    let mut out = Vec::with_capacity(drafts.len());
    for (expected, (index, d)) in drafts.into_iter().enumerate() {
        let key = format!("vortices.{}[{index}]", c.label());
        if index != expected {
            return Err(Error::Validation {
                key: format!("vortices.{}[{expected}]", c.label()),
                message: format!(
                    "indices must be contiguous from 0; found {key} on line {}",
                    d.line
                ),
            });
        }
        let missing = |field: &str| Error::Validation {
            key: format!("{key}.{field}"),
            message: format!("line {}: required for every vortex", d.line),
        };
        let x = d.x.ok_or_else(|| missing("x"))?;
        let y = d.y.ok_or_else(|| missing("y"))?;
        let degree = d.degree.ok_or_else(|| missing("degree"))?;
        let v = Vortex::new(Vec2::new(x, y), degree).map_err(|_| Error::Validation {
            key: format!("{key}.degree"),
            message: format!("line {}: degree must be +1 or -1, got {degree}", d.line),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "domain.kind = rectangle\nepsilon = 0.03125\ng = 0.5\n\
        vortices.u[0].x = 0.1\nvortices.u[0].y = 0\nvortices.u[0].degree = 1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.grid, GridSpec { nx: 256, ny: 256 });
        assert_eq!(cfg.dt, 0.25 * 0.03125 * 0.03125);
        assert_eq!(cfg.vortices.u.len(), 1);
        assert!(cfg.vortices.v.is_empty());
        assert_eq!(cfg.domain, Domain::centered_square(1.0).unwrap());
    }

    #[test]
    fn coupling_outside_unit_interval() {
        let text = MINIMAL.replace("g = 0.5", "g = 1.2");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Validation { key, message } => {
                assert_eq!(key, "g");
                assert!(message.contains("(0,1)"), "{message}");
                assert!(message.contains("line 3"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn coincident_vortices() {
        let text = format!(
            "{MINIMAL}vortices.u[1].x = 0.1\nvortices.u[1].y = 0\nvortices.u[1].degree = -1\n"
        );
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, Error::Validation { key, message }
            if key == "vortices.u[1]" && message.contains("min_separation")),
            "{err}"
        );
    }

    #[test]
    fn unknown_and_malformed_lines() {
        let err = parse_config(&format!("{MINIMAL}domain.side = 3\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
        let err = parse_config("domain.kind rectangle\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_config(&format!("{MINIMAL}epsilon = 0.1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }));
        let err = parse_config(&MINIMAL.replace("g = 0.5", "g = half")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_config(&MINIMAL.replace("u[0].degree = 1", "u[0].degree = 2")).unwrap_err();
        assert!(matches!(err, Error::Validation { ref key, .. } if key == "vortices.u[0].degree"));
    }

    #[test]
    fn gaps_in_vortex_indices() {
        let text = "domain.kind = disk\nepsilon = 0.1\ng = 0.5\n\
            vortices.v[1].x = 0.1\nvortices.v[1].y = 0\nvortices.v[1].degree = 1\n";
        let err = parse_config(text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref key, .. } if key == "vortices.v[0]"));
    }

    #[test]
    fn compare_grid_scales_with_core() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.epsilon = 1.0 / 16.0;
        assert_eq!(cfg.compare_grid().unwrap(), GridSpec { nx: 128, ny: 128 });
        cfg.epsilon = 1.0 / 32.0;
        assert_eq!(cfg.compare_grid().unwrap(), GridSpec { nx: 256, ny: 256 });
    }
}
