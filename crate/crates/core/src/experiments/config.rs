//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Lists are comma separated. The `experiment` key picks the experiment, and
//! `density.kind` (where it applies) picks the density source. Together they
//! fix the set of accepted keys and their defaults. Any other key is
//! rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::solver::Boundary;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            line: None,
            message: message.into(),
        }
    }

    fn line(line: usize, message: impl Into<String>) -> Self {
        Self {
            key: None,
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "config line {l}, key `{k}`: {}", self.message),
            (Some(k), None) => write!(f, "config key `{k}`: {}", self.message),
            (None, Some(l)) => write!(f, "config line {l}: {}", self.message),
            (None, None) => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentKind {
    Fig2,
    Fig3,
    SwissRoll,
    VerifyPaths,
    Classify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Fig2,
        ExperimentKind::Fig3,
        ExperimentKind::SwissRoll,
        ExperimentKind::VerifyPaths,
        ExperimentKind::Classify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::SwissRoll => "swissroll",
            ExperimentKind::VerifyPaths => "verify-paths",
            ExperimentKind::Classify => "classify",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Piecewise,
    Spiral,
    Raster,
}

impl DensityKind {
    fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "piecewise" => Ok(DensityKind::Piecewise),
            "spiral" => Ok(DensityKind::Spiral),
            "raster" => Ok(DensityKind::Raster),
            _ => Err(ConfigError::at(
                "density.kind",
                format!("unknown density kind `{s}` (expected piecewise, spiral or raster)"),
            )),
        }
    }

    fn name(self) -> &'static str {
        match self {
            DensityKind::Piecewise => "piecewise",
            DensityKind::Spiral => "spiral",
            DensityKind::Raster => "raster",
        }
    }
}

type Defaults = &'static [(&'static str, &'static str)];

const PIECEWISE_TWO_REGION: Defaults = &[
    ("density.breakpoints", "-1, 0, 1"),
    ("density.values", "100, 1000"),
    ("solver.dx", "0.001"),
];

const SPIRAL: Defaults = &[
    ("density.cell_size", "0.05"),
    ("spiral.width", "90"),
    ("spiral.height", "110"),
    ("spiral.inner_radius", "6"),
    ("spiral.margin", "5"),
    ("spiral.turns", "1.25"),
    ("spiral.arm_width", "6"),
    ("spiral.rho_arm", "100000"),
    ("spiral.rho_background", "500"),
];

const RASTER: Defaults = &[
    ("density.cell_size", "0.05"),
    ("density.raster", ""),
    ("density.gray_a", "0"),
    ("density.rho_a", "500"),
    ("density.gray_b", "255"),
    ("density.rho_b", "100000"),
];

const LINE_WALK: Defaults = &[
    ("walk.p0", "0.2"),
    ("walk.delta", "80"),
    ("solver.dt", "0.1"),
    ("solver.boundary", "reflecting"),
    ("solver.renormalize", "false"),
];

const PLANE_WALK: Defaults = &[
    ("walk.p0", "0.4"),
    ("walk.delta", "0.1"),
    ("solver.dt", "0.1"),
    ("solver.boundary", "absorbing"),
    ("solver.renormalize", "false"),
];

const VERIFY: Defaults = &[
    ("verify.chain_sizes", "3, 5"),
    ("verify.max_steps", "6"),
    ("verify.p0", "0, 0.2, 0.5"),
    ("verify.mc_betas", "0.25, 0.5, 1"),
    ("verify.mc_horizons", "0.5, 1"),
    ("verify.mc_steps", "100"),
    ("verify.mc_samples", "100000"),
    ("verify.mc_runs", "3"),
    ("verify.mc_bins", "50"),
    ("verify.pde_diffusion", "1"),
    ("verify.pde_dx", "0.01"),
    ("verify.pde_dt", "0.00002"),
    ("verify.pde_time", "0.01"),
    ("verify.pde_half_width", "1"),
];

const CLASSIFY_LINE: Defaults = &[
    ("density.breakpoints", "-1, 1"),
    ("density.values", "10"),
    ("solver.dx", "0.01"),
    ("walk.p0", "0.2"),
    ("walk.delta", "0.4"),
    ("solver.dt", "0.004"),
    ("solver.boundary", "reflecting"),
    ("solver.renormalize", "false"),
    ("classify.time", "1"),
    ("classify.points", "A: -0.2; B: 0.2"),
    ("classify.queries", "-0.1; 0; 0.1"),
];

const CLASSIFY_PLANE: Defaults = &[
    ("classify.time", "3333"),
    ("classify.points", ""),
    ("classify.queries", ""),
    ("classify.labels_per_arm", "12"),
    ("classify.queries_per_arm", "10"),
];

/// Default key table for an experiment and density source, in output order.
fn defaults(kind: ExperimentKind, density: Option<DensityKind>) -> Vec<(&'static str, String)> {
    let mut out: Vec<(&'static str, String)> = Vec::new();
    let mut add = |table: &[(&'static str, &str)]| {
        for &(k, v) in table {
            out.retain(|(key, _)| *key != k);
            out.push((k, v.to_string()));
        }
    };
    match density {
        Some(DensityKind::Piecewise) => add(&[("density.kind", "piecewise")]),
        Some(DensityKind::Spiral) => add(&[("density.kind", "spiral")]),
        Some(DensityKind::Raster) => add(&[("density.kind", "raster")]),
        None => {}
    }
    match kind {
        ExperimentKind::Fig2 | ExperimentKind::Fig3 => {
            add(PIECEWISE_TWO_REGION);
            add(LINE_WALK);
            let impulse = if kind == ExperimentKind::Fig2 { "0" } else { "-0.1" };
            add(&[("schedule.impulse", impulse), ("schedule.discrete_steps", "500")]);
        }
        ExperimentKind::SwissRoll => {
            add(if density == Some(DensityKind::Raster) { RASTER } else { SPIRAL });
            add(PLANE_WALK);
            add(&[
                ("schedule.impulse", "auto"),
                ("schedule.times", "3333, 20000"),
                ("report.isotropy_radius", "2"),
            ]);
        }
        ExperimentKind::VerifyPaths => add(VERIFY),
        ExperimentKind::Classify => match density {
            Some(DensityKind::Piecewise) => add(CLASSIFY_LINE),
            other => {
                add(if other == Some(DensityKind::Raster) { RASTER } else { SPIRAL });
                add(PLANE_WALK);
                add(CLASSIFY_PLANE);
            }
        },
    }
    out
}

fn allowed_density_kinds(kind: ExperimentKind) -> &'static [DensityKind] {
    match kind {
        ExperimentKind::Fig2 | ExperimentKind::Fig3 => &[DensityKind::Piecewise],
        ExperimentKind::SwissRoll => &[DensityKind::Spiral, DensityKind::Raster],
        ExperimentKind::VerifyPaths => &[],
        ExperimentKind::Classify => &[DensityKind::Piecewise, DensityKind::Spiral, DensityKind::Raster],
    }
}

/// A parsed configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    kind: ExperimentKind,
    density: Option<DensityKind>,
    seed: u64,
    out_dir: PathBuf,
    base_dir: PathBuf,
    values: Vec<(&'static str, String)>,
}

impl ExperimentConfig {
    /// Parses config text. Relative file paths inside it resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut given: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::line(line_no, format!("expected `key = value`, found `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::line(line_no, "empty key"));
            }
            if given.insert(k.to_string(), (v.to_string(), line_no)).is_some() {
                return Err(ConfigError {
                    key: Some(k.to_string()),
                    line: Some(line_no),
                    message: "key given more than once".into(),
                });
            }
        }
        let kind: ExperimentKind = match given.remove("experiment") {
            Some((v, line)) => v.parse().map_err(|m| ConfigError {
                key: Some("experiment".into()),
                line: Some(line),
                message: m,
            })?,
            None => return Err(ConfigError::at("experiment", "missing")),
        };
        let allowed = allowed_density_kinds(kind);
        let density = match given.remove("density.kind") {
            Some((v, _)) => {
                let d = DensityKind::parse(&v)?;
                if !allowed.contains(&d) {
                    return Err(ConfigError::at(
                        "density.kind",
                        format!("`{}` is not supported by experiment {kind}", d.name()),
                    ));
                }
                Some(d)
            }
            None => allowed.first().copied(),
        };
        let seed = match given.remove("seed") {
            Some((v, line)) => v.parse::<u64>().map_err(|_| ConfigError {
                key: Some("seed".into()),
                line: Some(line),
                message: format!("`{v}` is not an unsigned integer"),
            })?,
            None => 0,
        };
        let out_dir = match given.remove("output.dir") {
            Some((v, _)) if !v.is_empty() => base_dir.join(v),
            _ => PathBuf::from("out").join(kind.name()),
        };
        let mut values = defaults(kind, density);
        for (k, (v, line)) in given {
            match values.iter_mut().find(|(key, _)| *key == k) {
                Some(slot) => slot.1 = v,
                None => {
                    return Err(ConfigError {
                        key: Some(k.clone()),
                        line: Some(line),
                        message: match density {
                            Some(d) => format!("not a setting of experiment {kind} with density.kind = {}", d.name()),
                            None => format!("not a setting of experiment {kind}"),
                        },
                    })
                }
            }
        }
        Ok(Self {
            kind,
            density,
            seed,
            out_dir,
            base_dir: base_dir.to_path_buf(),
            values,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at("--config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Every default for `kind` (and its first density source).
    pub fn default_for(kind: ExperimentKind) -> Self {
        Self::parse(&format!("experiment = {}", kind.name()), Path::new("."))
            .expect("defaults always parse")
    }

    /// Defaults for `kind` with some keys replaced.
    pub fn with_overrides(kind: ExperimentKind, overrides: &[(&str, &str)]) -> Result<Self, ConfigError> {
        let mut text = format!("experiment = {}\n", kind.name());
        for (k, v) in overrides {
            text.push_str(&format!("{k} = {v}\n"));
        }
        Self::parse(&text, Path::new("."))
    }

    pub fn kind(&self) -> ExperimentKind {
        self.kind
    }

    pub fn density_kind(&self) -> Option<DensityKind> {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn set_out_dir(&mut self, dir: impl Into<PathBuf>) {
        self.out_dir = dir.into();
    }

    /// Resolves a path-valued setting against the config file's directory.
    pub fn path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        let v = self.raw(key)?;
        if v.is_empty() {
            return Err(ConfigError::at(key, "a file path is required"));
        }
        Ok(self.base_dir.join(v))
    }

    pub fn raw(&self, key: &str) -> Result<&str, ConfigError> {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ConfigError::at(key, format!("not a setting of experiment {}", self.kind)))
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        parse_f64(key, self.raw(key)?)
    }

    pub fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::at(key, format!("{v} must be positive")))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| ConfigError::at(key, format!("`{v}` is not a non-negative integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key)? {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            v => Err(ConfigError::at(key, format!("`{v}` is not true or false"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.raw(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|s| parse_f64(key, s.trim())).collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.f64_list(key)?
            .into_iter()
            .map(|x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(ConfigError::at(key, format!("{x} is not a non-negative integer")))
                }
            })
            .collect()
    }

    pub fn boundary(&self, key: &str) -> Result<Boundary, ConfigError> {
        match self.raw(key)? {
            "reflecting" => Ok(Boundary::Reflecting),
            "absorbing" => Ok(Boundary::AbsorbingZero),
            v => Err(ConfigError::at(key, format!("`{v}` is not reflecting or absorbing"))),
        }
    }

    /// Points separated by `;`, coordinates by `,` or whitespace.
    pub fn points(&self, key: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
        let v = self.raw(key)?;
        v.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|p| parse_point(key, p))
            .collect()
    }

    /// Entries `label: coords` separated by `;`.
    pub fn labeled_points(&self, key: &str) -> Result<Vec<(String, Vec<f64>)>, ConfigError> {
        let v = self.raw(key)?;
        v.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|entry| {
                let (label, coords) = entry
                    .split_once(':')
                    .ok_or_else(|| ConfigError::at(key, format!("`{entry}` is not `label: coordinates`")))?;
                let label = label.trim();
                if label.is_empty() || label.contains(',') {
                    return Err(ConfigError::at(key, format!("bad label `{label}`")));
                }
                Ok((label.to_string(), parse_point(key, coords.trim())?))
            })
            .collect()
    }

    /// The resolved configuration as config text, all defaults expanded.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("experiment = {}\n", self.kind));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("output.dir = {}\n", self.out_dir.display()));
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConfigError::at(key, format!("`{s}` is not a finite number"))),
    }
}

fn parse_point(key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    let coords: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64(key, t))
        .collect::<Result<_, _>>()?;
    if coords.is_empty() {
        return Err(ConfigError::at(key, "empty point"));
    }
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, Path::new("/cfg"))
    }

    #[test]
    fn comments_blank_lines_and_overrides() {
        let c = parse("# header\nexperiment = fig3  # trailing\n\nwalk.p0 = 0.3\nseed=7\n").unwrap();
        assert_eq!(c.kind(), ExperimentKind::Fig3);
        assert_eq!(c.f64("walk.p0").unwrap(), 0.3);
        assert_eq!(c.f64("schedule.impulse").unwrap(), -0.1);
        assert_eq!(c.seed(), 7);
        assert_eq!(c.f64_list("density.values").unwrap(), vec![100.0, 1000.0]);
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse("experiment = fig2\nwalk.p00 = 1\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("walk.p00"), Some(2)));
        let e = parse("walk.p0 = 1\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("experiment"));
        let e = parse("experiment = fig9\n").unwrap_err();
        assert!(e.to_string().contains("fig9"));
        let e = parse("experiment = fig2\nwalk.p0 = abc\n").unwrap().f64("walk.p0").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("walk.p0"));
        let e = parse("experiment = fig2\nno equals sign\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("experiment = fig2\nseed = 1\nseed = 2\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("seed"));
        let e = parse("experiment = fig2\ndensity.kind = spiral\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("density.kind"));
        let e = parse("experiment = classify\nspiral.turns = 2\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("spiral.turns"));
    }

    #[test]
    fn density_kind_selects_key_set() {
        let c = parse("experiment = classify\ndensity.kind = spiral\nspiral.turns = 2\n").unwrap();
        assert_eq!(c.f64("spiral.turns").unwrap(), 2.0);
        assert_eq!(c.f64("walk.p0").unwrap(), 0.4);
        let c = parse("experiment = swissroll\ndensity.kind = raster\ndensity.raster = a.pgm\n").unwrap();
        assert_eq!(c.path("density.raster").unwrap(), PathBuf::from("/cfg/a.pgm"));
        assert!(parse("experiment = swissroll\ndensity.kind = raster\n")
            .unwrap()
            .path("density.raster")
            .is_err());
    }

    #[test]
    fn list_and_point_values() {
        let c = parse("experiment = classify\nclassify.points = A: -0.2; B: 0.2 ; C:1,2\n").unwrap();
        let pts = c.labeled_points("classify.points").unwrap();
        assert_eq!(pts[2], ("C".to_string(), vec![1.0, 2.0]));
        assert_eq!(c.points("classify.queries").unwrap().len(), 3);
        let c = parse("experiment = classify\nclassify.points = A -0.2\n").unwrap();
        assert!(c.labeled_points("classify.points").is_err());
        let c = parse("experiment = verify-paths\n").unwrap();
        assert_eq!(c.usize_list("verify.chain_sizes").unwrap(), vec![3, 5]);
        assert_eq!(c.density_kind(), None);
    }

    #[test]
    fn resolved_text_reparses_to_the_same_config() {
        for kind in ExperimentKind::ALL {
            let mut c = ExperimentConfig::default_for(kind);
            c.set_seed(42);
            c.set_out_dir("/tmp/x");
            let again = ExperimentConfig::parse(&c.to_text(), Path::new("/")).unwrap();
            assert_eq!(again.to_text(), c.to_text());
        }
    }
}
