//! Experiment configuration: `key = value` lines grouped under `[section]`
//! headers, `#` comments. `[layer]` may repeat; every other section and key
//! may appear once.
//!
//! ```text
//! experiment = sweep-z
//! z = 100, 200, 400, 800, 1600
//! grid = auto
//!
//! [pulse]
//! kind = gaussian
//! width = 1
//! omega0 = 2
//!
//! [medium]
//! kind = quadratic
//! a = 1
//! v = 1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use precursor_core::grid::{grid_for_delay, make_grid, TimeGrid};
use precursor_core::media::{Layer, MediumModel};
use precursor_core::signals::{PulseKind, PulseSpec};
use precursor_core::stochastic::EnsembleSpec;

use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Propagate,
    SweepZ,
    Stochastic,
    Chirp,
    Slab,
    Verify,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Propagate,
        Experiment::SweepZ,
        Experiment::Stochastic,
        Experiment::Chirp,
        Experiment::Slab,
        Experiment::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Propagate => "propagate",
            Experiment::SweepZ => "sweep-z",
            Experiment::Stochastic => "stochastic",
            Experiment::Chirp => "chirp",
            Experiment::Slab => "slab",
            Experiment::Verify => "verify",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            LabError::validation("experiment", format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    Auto,
    Explicit { n: usize, dt: f64, t0: f64 },
}

/// Where the input signal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseSource {
    Generated(PulseSpec),
    /// Two-column `t,f` CSV, resampled onto the grid.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid: GridChoice,
    pub pulse: Option<PulseSource>,
    pub medium: Option<MediumModel>,
    pub z: Vec<f64>,
    pub ensemble: Option<EnsembleSpec>,
    pub mc_samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

pub const DEFAULT_MC_SAMPLES: usize = 10_000;

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn new(name: &str, line: usize) -> Self {
        Self {
            name: name.to_string(),
            line,
            entries: BTreeMap::new(),
        }
    }

    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, LabError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                LabError::validation(self.qualified(key), format!("cannot parse `{v}` (line {line})"))
            }),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T, LabError> {
        self.get(key)?
            .ok_or_else(|| LabError::validation(self.qualified(key), format!("missing in [{}] (line {})", self.name, self.line)))
    }

    fn finish(&self) -> Result<(), LabError> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(LabError::validation(self.qualified(k), format!("unknown key (line {})", e.line))),
            None => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Section>, LabError> {
    let mut sections = vec![Section::new("", 0)];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'))
                .ok_or_else(|| LabError::parse(line, format!("malformed section header `{content}`")))?;
            if name != "layer" && sections.iter().any(|s| s.name == name) {
                return Err(LabError::parse(line, format!("section [{name}] appears twice")));
            }
            sections.push(Section::new(name, line));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| LabError::parse(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(LabError::parse(line, "empty key or value"));
        }
        let section = sections.last_mut().expect("root section always present");
        if section.entries.contains_key(key) {
            return Err(LabError::parse(line, format!("duplicate key `{key}`")));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
                used: false,
            },
        );
    }
    Ok(sections)
}

fn take(sections: &mut Vec<Section>, name: &str) -> Option<Section> {
    sections.iter().position(|s| s.name == name).map(|i| sections.remove(i))
}

fn core_err(key: &str, e: precursor_core::Error) -> LabError {
    LabError::validation(key, e.to_string())
}

fn parse_homogeneous(section: &mut Section, kind: &str) -> Result<MediumModel, LabError> {
    let key = section.qualified("kind");
    match kind {
        "quadratic" => {
            let ell_inv = section.get("ell-inv")?.unwrap_or(0.0);
            let a = section.get("a")?.unwrap_or(f64::INFINITY);
            let v = section.require("v")?;
            MediumModel::quadratic(ell_inv, a, v).map_err(|e| core_err(&key, e))
        }
        "exp-kernel" => {
            let k = section.require("k")?;
            let kp = section.require("k-prime")?;
            MediumModel::exp_kernel(k, kp).map_err(|e| core_err(&key, e))
        }
        "free-space" => Ok(MediumModel::free_space()),
        other => Err(LabError::validation(
            key,
            format!("unknown medium `{other}`; expected quadratic, exp-kernel, free-space or layered"),
        )),
    }
}

fn parse_medium(mut section: Section, layers: Vec<Section>) -> Result<MediumModel, LabError> {
    let kind: String = section.require("kind")?;
    let medium = if kind == "layered" {
        let tail = section.get("free-space-tail")?.unwrap_or(false);
        if layers.is_empty() {
            return Err(LabError::validation("layer", "layered medium needs at least one [layer] section"));
        }
        let mut parsed = Vec::with_capacity(layers.len());
        for mut l in layers {
            let thickness = l.require("thickness")?;
            let kind: String = l.require("kind")?;
            let medium = parse_homogeneous(&mut l, &kind)?;
            l.finish()?;
            parsed.push(Layer { thickness, medium });
        }
        MediumModel::layered(parsed, tail).map_err(|e| core_err("layer", e))?
    } else {
        if let Some(l) = layers.first() {
            return Err(LabError::validation("layer", format!("[layer] at line {} needs kind = layered", l.line)));
        }
        parse_homogeneous(&mut section, &kind)?
    };
    section.finish()?;
    Ok(medium)
}

fn parse_pulse(mut section: Section, base: &Path) -> Result<PulseSource, LabError> {
    if let Some(file) = section.get::<String>("file")? {
        section.finish()?;
        return Ok(PulseSource::File(base.join(file)));
    }
    let kind: PulseKind = section
        .require::<String>("kind")?
        .parse()
        .map_err(|e: precursor_core::Error| LabError::validation("pulse.kind", e.to_string()))?;
    let width = section.require("width")?;
    let omega0 = section.get("omega0")?.unwrap_or(0.0);
    let alpha = section.get("alpha")?.unwrap_or(0.0);
    section.finish()?;
    PulseSpec::new(kind, width, omega0, alpha)
        .map(PulseSource::Generated)
        .map_err(|e| core_err("pulse", e))
}

fn parse_z_list(value: &str, line: usize) -> Result<Vec<f64>, LabError> {
    let zs = value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| LabError::validation("z", format!("cannot parse `{}` (line {line})", s.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(bad) = zs.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
        return Err(LabError::validation("z", format!("depths must be positive, got {bad} (line {line})")));
    }
    Ok(zs)
}

/// Parses and validates a configuration. Relative paths (`output-dir`,
/// `pulse.file`) are taken relative to `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig, LabError> {
    let mut sections = tokenize(text)?;
    let mut root = sections.remove(0);

    let experiment: Experiment = root.require::<String>("experiment")?.parse()?;
    let z = match root.raw("z") {
        Some((v, line)) => parse_z_list(&v, line)?,
        None => Vec::new(),
    };
    let seed = root.get("seed")?.unwrap_or(0);
    let output_dir = base.join(root.get::<String>("output-dir")?.unwrap_or_else(|| "output".into()));
    let grid_key: Option<String> = root.get("grid")?;
    root.finish()?;

    let grid = match (grid_key.as_deref(), take(&mut sections, "grid")) {
        (Some("auto") | None, None) => GridChoice::Auto,
        (None, Some(mut g)) => {
            let choice = GridChoice::Explicit {
                n: g.require("n")?,
                dt: g.require("dt")?,
                t0: g.require("t0")?,
            };
            g.finish()?;
            if let GridChoice::Explicit { n, dt, t0 } = choice {
                make_grid(n, dt, t0).map_err(|e| core_err("grid", e))?;
            }
            choice
        }
        (Some("auto"), Some(g)) => {
            return Err(LabError::validation("grid", format!("`grid = auto` conflicts with [grid] at line {}", g.line)))
        }
        (Some(other), _) => return Err(LabError::validation("grid", format!("expected `auto`, got `{other}`"))),
    };

    let pulse = take(&mut sections, "pulse").map(|s| parse_pulse(s, base)).transpose()?;
    let layers: Vec<Section> = {
        let (l, rest): (Vec<_>, Vec<_>) = sections.drain(..).partition(|s| s.name == "layer");
        sections = rest;
        l
    };
    let medium = match take(&mut sections, "medium") {
        Some(s) => Some(parse_medium(s, layers)?),
        None if !layers.is_empty() => {
            return Err(LabError::validation("medium", "[layer] sections need a [medium] with kind = layered"))
        }
        None => None,
    };
    let (ensemble, mc_samples) = match take(&mut sections, "ensemble") {
        Some(mut s) => {
            let b = s.require("b")?;
            let m = s.require("m")?;
            let v = s.get("v")?.unwrap_or(1.0);
            let samples = s.get("mc-samples")?.unwrap_or(DEFAULT_MC_SAMPLES);
            s.finish()?;
            (Some(EnsembleSpec::new(b, m, v).map_err(|e| core_err("ensemble", e))?), samples)
        }
        None => (None, DEFAULT_MC_SAMPLES),
    };
    if let Some(s) = sections.first() {
        return Err(LabError::validation(s.name.clone(), format!("unknown section (line {})", s.line)));
    }

    let config = ExperimentConfig {
        experiment,
        grid,
        pulse,
        medium,
        z,
        ensemble,
        mc_samples,
        seed,
        output_dir,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Checks that the sections the experiment needs are present.
    pub fn validate(&self) -> Result<(), LabError> {
        let need_z = |min: usize| {
            if self.z.len() < min {
                Err(LabError::validation("z", format!("{} needs at least {min} depth(s)", self.experiment)))
            } else {
                Ok(())
            }
        };
        let need_pulse = || self.pulse.as_ref().ok_or_else(|| LabError::validation("pulse", format!("{} needs a [pulse] section", self.experiment)));
        let need_medium = || self.medium.as_ref().ok_or_else(|| LabError::validation("medium", format!("{} needs a [medium] section", self.experiment)));
        let mut seen = self.z.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::validation("z", "depths must be distinct"));
        }
        match self.experiment {
            Experiment::Propagate => {
                need_z(1)?;
                need_pulse()?;
                need_medium()?;
            }
            Experiment::SweepZ => {
                need_z(3)?;
                need_pulse()?;
                need_medium()?;
            }
            Experiment::Stochastic => {
                need_z(1)?;
                need_pulse()?;
                if self.ensemble.is_none() {
                    return Err(LabError::validation("ensemble", "stochastic needs an [ensemble] section"));
                }
                if self.mc_samples < precursor_core::stochastic::MIN_MC_SAMPLES {
                    return Err(LabError::validation(
                        "ensemble.mc-samples",
                        format!("need at least {}", precursor_core::stochastic::MIN_MC_SAMPLES),
                    ));
                }
            }
            Experiment::Chirp => match need_pulse()? {
                PulseSource::Generated(p) if p.kind == PulseKind::ChirpGaussian && p.alpha > 0.0 => {}
                _ => return Err(LabError::validation("pulse.kind", "chirp needs kind = chirp-gaussian with alpha > 0")),
            },
            Experiment::Slab => {
                need_z(1)?;
                need_pulse()?;
                match need_medium()? {
                    MediumModel::Layered(s) if s.free_space_tail() && s.layers().len() == 1 => {
                        let ell = s.total_thickness();
                        if let Some(z) = self.z.iter().find(|&&z| z <= ell) {
                            return Err(LabError::validation("z", format!("slab depths must exceed the slab thickness {ell}, got {z}")));
                        }
                    }
                    _ => {
                        return Err(LabError::validation(
                            "medium.kind",
                            "slab needs kind = layered with one [layer] and free-space-tail = true",
                        ))
                    }
                }
            }
            Experiment::Verify => {}
        }
        if matches!(self.pulse, Some(PulseSource::File(_))) && self.grid == GridChoice::Auto {
            return Err(LabError::validation("grid", "a pulse read from a file needs an explicit [grid]"));
        }
        Ok(())
    }

    /// The grid to run on; `auto` fits the input and the output at the
    /// deepest `z` with ten standard scores of margin.
    pub fn resolve_grid(&self) -> Result<TimeGrid, LabError> {
        if let GridChoice::Explicit { n, dt, t0 } = self.grid {
            return make_grid(n, dt, t0).map_err(|e| core_err("grid", e));
        }
        let spec = match &self.pulse {
            Some(PulseSource::Generated(p)) => *p,
            _ => return Err(LabError::validation("grid", "auto grid needs a generated pulse")),
        };
        // a chirp sweeps its carrier; sample for the fastest instantaneous frequency
        let omega = spec.omega0.abs() + spec.alpha.abs() * 6.0 * spec.width;
        let zmax = self.z.iter().cloned().fold(0.0, f64::max);
        let (delay, spread) = match (self.experiment, &self.medium, &self.ensemble) {
            (Experiment::Stochastic, _, Some(e)) => {
                // exponential tails e^{-√(b/z)|τ|}: cover about 40 decay lengths
                let sigma = (4.0 + e.m as f64) * (zmax / e.b).sqrt();
                (zmax / e.v, sigma * sigma)
            }
            (_, Some(m), _) => m.delay_and_spread(zmax).map_err(|e| core_err("z", e))?,
            _ => (0.0, 0.0),
        };
        grid_for_delay(spec.width, omega, delay, spread).map_err(|e| core_err("grid", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "experiment = propagate\nz = 100\n[pulse]\nkind = gaussian\nwidth = 1\nomega0 = 2\n[medium]\nkind = quadratic\na = 1\nv = 1\n";

    fn parse(text: &str) -> Result<ExperimentConfig, LabError> {
        parse_config(text, Path::new("/tmp"))
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::Propagate);
        assert_eq!(c.grid, GridChoice::Auto);
        assert_eq!(c.z, vec![100.0]);
        assert_eq!(c.seed, 0);
        assert_eq!(c.output_dir, PathBuf::from("/tmp/output"));
        assert_eq!(c.pulse, Some(PulseSource::Generated(PulseSpec::gaussian(1.0, 2.0).unwrap())));
        let g = c.resolve_grid().unwrap();
        assert!(g.t0() <= -10.0 && g.time(g.len() - 1) >= 200.0);
    }

    #[test]
    fn negative_depth_names_z() {
        let err = parse(&MINIMAL.replace("z = 100", "z = -1")).unwrap_err();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "z"), "{err}");
    }

    #[test]
    fn unknown_experiment_lists_names() {
        let err = parse(&MINIMAL.replace("propagate", "teleport")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "experiment"));
        for e in Experiment::ALL {
            assert!(msg.contains(e.name()), "{msg}");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("experiment = verify\n\njust words\n").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 3, .. }), "{err}");
        let err = parse("experiment = verify\n[pulse\n").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 2, .. }));
        let err = parse("experiment = verify\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 3, .. }));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = parse(&format!("{MINIMAL}colour = red\n")).unwrap_err();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "medium.colour"), "{err}");
        let err = parse(&format!("{MINIMAL}[extras]\nx = 1\n")).unwrap_err();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "extras"), "{err}");
    }

    #[test]
    fn layered_medium_and_explicit_grid() {
        let text = "experiment = slab\nz = 20, 40\n[grid]\nn = 4096\ndt = 1e-10\nt0 = -1e-8\n\
                    [pulse]\nkind = gaussian\nwidth = 1e-9\n[medium]\nkind = layered\nfree-space-tail = true\n\
                    [layer]\nthickness = 10\nkind = quadratic\na = 1e17\nv = 2e8\n";
        let c = parse(text).unwrap();
        assert_eq!(c.grid, GridChoice::Explicit { n: 4096, dt: 1e-10, t0: -1e-8 });
        match c.medium.unwrap() {
            MediumModel::Layered(s) => {
                assert_eq!(s.layers().len(), 1);
                assert!(s.free_space_tail());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn experiment_requirements() {
        let sweep = MINIMAL.replace("propagate", "sweep-z");
        let err = parse(&sweep).unwrap_err();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "z"));
        assert!(parse(&sweep.replace("z = 100", "z = 100, 200, 400")).is_ok());
        let err = parse("experiment = stochastic\nz = 1\n[pulse]\nkind = gaussian\nwidth = 1\n").unwrap_err();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "ensemble"));
        let err = parse("experiment = chirp\n[pulse]\nkind = gaussian\nwidth = 1\n").unwrap_err();
        assert!(matches!(&err, LabError::Validation { key, .. } if key == "pulse.kind"));
        assert!(parse("experiment = verify\n").is_ok());
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{}", MINIMAL.replace("a = 1", "a = 1   # inverse spread"));
        assert!(parse(&text).is_ok());
    }
}
