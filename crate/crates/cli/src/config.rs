//! Run configuration and its TOML representation.

use std::path::{Path, PathBuf};

use osc_factor::dissipative::{BathSpec, Probe};
use osc_factor::experiments::{Preset, ProtocolConfig, SweepAxis, SweepSpec, TauGrid, TauMode};
use osc_factor::model::{CoherentAmplitude, Coupling, SystemParams, TargetN, TrialWindow};
use osc_factor::state_prep::{ThermalSpec, WindowMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tool: ToolSection,
    pub system: SystemSection,
    pub thermal: ThermalSection,
    pub bath: BathSection,
    pub protocol: ProtocolSection,
    pub curve: CurveSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSection {
    /// Version of the tool that wrote the file.
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub couplings: Vec<CouplingEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub order: u32,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub temperature: f64,
    pub tail_cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub gamma: [f64; 3],
    pub nbar: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowModeName {
    FullSupport,
    PaperWindow,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeName {
    Damped,
    Lossless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(rename = "N")]
    pub n: u64,
    pub alpha_modulus: f64,
    pub alpha_phase: f64,
    pub window_mode: WindowModeName,
    /// `[n_min, n_max]`, required for the explicit mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[u32; 2]>,
    /// Measurement time; searched when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub peak_level: f64,
    pub weight_threshold: f64,
    pub probe: ProbeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    G,
    K,
    Alpha,
    Gamma3,
    Tau,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::G => SweepAxis::G,
            Axis::K => SweepAxis::K,
            Axis::Alpha => SweepAxis::Alpha,
            Axis::Gamma3 => SweepAxis::Gamma3,
            Axis::Tau => SweepAxis::Tau,
        }
    }
}

impl From<SweepAxis> for Axis {
    fn from(a: SweepAxis) -> Self {
        match a {
            SweepAxis::G => Axis::G,
            SweepAxis::K => Axis::K,
            SweepAxis::Alpha => Axis::Alpha,
            SweepAxis::Gamma3 => Axis::Gamma3,
            SweepAxis::Tau => Axis::Tau,
        }
    }
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        SweepAxis::from_name(s)
            .map(Axis::from)
            .ok_or_else(|| CliError::Usage(format!("unknown axis `{s}` (expected g, k, alpha, gamma3 or tau)")))
    }

    pub fn name(self) -> &'static str {
        SweepAxis::from(self).name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauModeName {
    Fixed,
    Optimal,
    Threshold,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesSection>,
    pub tau_mode: TauModeName,
    /// Time for `fixed`, level for `threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub report: String,
    pub curve: String,
    pub sweep: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), report: "report.json".into(), curve: "curve.csv".into(), sweep: "sweep.csv".into() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Mirrors a protocol configuration; no curve series, no sweep.
    pub fn from_protocol(c: &ProtocolConfig) -> Self {
        let window = match c.window_mode {
            WindowMode::Explicit(w) => Some([w.n_min, w.n_max]),
            _ => None,
        };
        Self {
            tool: ToolSection { version: TOOL_VERSION.to_string() },
            system: SystemSection {
                omega1: c.params.omega1,
                omega2: c.params.omega2,
                omega3: c.params.omega3,
                couplings: c.params.couplings.iter().map(|k| CouplingEntry { order: k.order, strength: k.strength }).collect(),
            },
            thermal: ThermalSection { temperature: c.thermal.temperature, tail_cutoff: c.thermal.tail_cutoff },
            bath: BathSection { gamma: c.bath.gamma, nbar: c.bath.nbar },
            protocol: ProtocolSection {
                n: c.target.value(),
                alpha_modulus: c.alpha.modulus(),
                alpha_phase: c.alpha.0.arg(),
                window_mode: match c.window_mode {
                    WindowMode::FullSupport => WindowModeName::FullSupport,
                    WindowMode::PaperWindow => WindowModeName::PaperWindow,
                    WindowMode::Explicit(_) => WindowModeName::Explicit,
                },
                window,
                tau: c.tau,
                peak_level: c.peak_level,
                weight_threshold: c.weight_threshold,
                probe: match c.probe {
                    Probe::Damped => ProbeName::Damped,
                    Probe::Lossless => ProbeName::Lossless,
                },
            },
            curve: CurveSection { start: c.curve.start, stop: c.curve.stop, points: c.curve.points, series: None },
            sweep: None,
            output: OutputSection::default(),
            run: RunSection::default(),
        }
    }

    /// Base configuration, curve series and sweep of a preset.
    pub fn preset(p: Preset) -> Self {
        let mut rc = Self::from_protocol(&p.config());
        let (axis, values) = p.curve_axis();
        rc.curve.series = Some(SeriesSection { axis: axis.into(), values });
        rc.sweep = Some(SweepSection::from_spec(&p.sweep_spec()));
        rc
    }

    pub fn to_protocol(&self) -> Result<ProtocolConfig> {
        let p = &self.protocol;
        let target = TargetN::new(p.n)?;
        let window_mode = match (p.window_mode, p.window) {
            (WindowModeName::FullSupport, _) => WindowMode::FullSupport,
            (WindowModeName::PaperWindow, _) => WindowMode::PaperWindow,
            (WindowModeName::Explicit, Some([a, b])) => WindowMode::Explicit(TrialWindow::new(a, b)?),
            (WindowModeName::Explicit, None) => {
                return Err(CliError::Config("window_mode = \"explicit\" needs protocol.window = [n_min, n_max]".into()))
            }
        };
        let couplings = self.system.couplings.iter().map(|k| Coupling::new(k.order, k.strength)).collect();
        let c = ProtocolConfig {
            params: SystemParams::new(self.system.omega1, self.system.omega2, self.system.omega3, couplings),
            thermal: ThermalSpec { temperature: self.thermal.temperature, tail_cutoff: self.thermal.tail_cutoff },
            bath: BathSpec { gamma: self.bath.gamma, nbar: self.bath.nbar },
            probe: match p.probe {
                ProbeName::Damped => Probe::Damped,
                ProbeName::Lossless => Probe::Lossless,
            },
            target,
            alpha: CoherentAmplitude::from_polar(p.alpha_modulus, p.alpha_phase),
            window_mode,
            tau: p.tau,
            peak_level: p.peak_level,
            weight_threshold: p.weight_threshold,
            curve: TauGrid { start: self.curve.start, stop: self.curve.stop, points: self.curve.points },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = self.sweep.as_ref().ok_or_else(|| CliError::Config("no [sweep] section and no --axis given".into()))?;
        s.to_spec()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }
}

impl SweepSection {
    pub fn from_spec(spec: &SweepSpec) -> Self {
        let (tau_mode, tau_value) = match spec.tau_mode {
            TauMode::Fixed(t) => (TauModeName::Fixed, Some(t)),
            TauMode::Optimal => (TauModeName::Optimal, None),
            TauMode::Threshold(theta) => (TauModeName::Threshold, Some(theta)),
            TauMode::Reference => (TauModeName::Reference, None),
        };
        Self {
            axis: spec.axis.into(),
            grid: spec.grid.clone(),
            series: spec.series.as_ref().map(|(a, v)| SeriesSection { axis: (*a).into(), values: v.clone() }),
            tau_mode,
            tau_value,
        }
    }

    pub fn to_spec(&self) -> Result<SweepSpec> {
        let value = |what: &str| {
            self.tau_value.ok_or_else(|| CliError::Config(format!("tau_mode = \"{what}\" needs sweep.tau_value")))
        };
        let tau_mode = match self.tau_mode {
            TauModeName::Fixed => TauMode::Fixed(value("fixed")?),
            TauModeName::Optimal => TauMode::Optimal,
            TauModeName::Threshold => TauMode::Threshold(value("threshold")?),
            TauModeName::Reference => TauMode::Reference,
        };
        Ok(SweepSpec {
            axis: self.axis.into(),
            grid: self.grid.clone(),
            series: self.series.as_ref().map(|s| (s.axis.into(), s.values.clone())),
            tau_mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for p in Preset::ALL {
            let rc = RunConfig::preset(p);
            let back = RunConfig::from_toml(&rc.to_toml()).unwrap();
            assert_eq!(back, rc);
            assert_eq!(back.to_protocol().unwrap(), p.config());
            assert_eq!(back.sweep_spec().unwrap(), p.sweep_spec());
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let mut text = RunConfig::preset(Preset::Fig2).to_toml();
        text = text.replace("[thermal]\n", "[thermal]\ntemprature = 3.0\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("temprature"), "{err}");
    }

    #[test]
    fn explicit_window_needs_bounds() {
        let mut rc = RunConfig::preset(Preset::Fig2);
        rc.protocol.window_mode = WindowModeName::Explicit;
        assert!(rc.to_protocol().is_err());
        rc.protocol.window = Some([2, 7]);
        assert_eq!(rc.to_protocol().unwrap().window_mode, WindowMode::Explicit(TrialWindow::new(2, 7).unwrap()));
    }
}
