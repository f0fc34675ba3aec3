//! Experiment configuration files.
//!
//! A configuration is a TOML document with the sections `room`,
//! `transmitter`, `receiver`, `scheme`, `sweep`, `sim` and `output`. Every
//! section except `scheme` may be omitted, in which case the reference
//! indoor geometry is used. Unknown keys are rejected. Angles are given in
//! degrees and LED cells are one-based.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::LambertianParams;
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, RoomConfig};
use crate::modulation::{efficiency, Pattern, PatternPolicy, SchemeConfig, SchemeKind};
use crate::simulation::{StoppingRule, SweepParameter};
use crate::system::{
    LinkGeometry, LinkSpec, Placement, DEFAULT_AREA, DEFAULT_FOV_DEG, DEFAULT_RESPONSIVITY,
    DEFAULT_RX_SPACING, DEFAULT_SEMIANGLE_DEG, DEFAULT_TX_SPACING,
};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomSection {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for RoomSection {
    fn default() -> Self {
        let r = RoomConfig::default();
        Self {
            length: r.length,
            width: r.width,
            height: r.height,
        }
    }
}

/// `"full"`, `"auto"`, or a list of one-based grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlacementSetting {
    Keyword(String),
    Cells(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransmitterSection {
    pub height: f64,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub semiangle: f64,
    pub elevation: f64,
    pub azimuth: f64,
    pub placement: PlacementSetting,
}

impl Default for TransmitterSection {
    fn default() -> Self {
        Self {
            height: RoomConfig::default().tx_height,
            rows: 4,
            cols: 4,
            spacing: DEFAULT_TX_SPACING,
            semiangle: DEFAULT_SEMIANGLE_DEG,
            elevation: -90.0,
            azimuth: 0.0,
            placement: PlacementSetting::Keyword("auto".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverSection {
    pub height: f64,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub area: f64,
    pub fov: f64,
    pub responsivity: f64,
    pub elevation: f64,
    pub azimuth: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            height: RoomConfig::default().rx_height,
            rows: 2,
            cols: 2,
            spacing: DEFAULT_RX_SPACING,
            area: DEFAULT_AREA,
            fov: DEFAULT_FOV_DEG,
            responsivity: DEFAULT_RESPONSIVITY,
            elevation: 90.0,
            azimuth: 0.0,
        }
    }
}

/// `"lexicographic"`, `"optimized"`, or a list of one-based patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSetting {
    Keyword(String),
    List(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    pub n_tx: usize,
    #[serde(default)]
    pub n_active: Option<usize>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default = "one")]
    pub mean_power: f64,
    #[serde(default = "lexicographic")]
    pub patterns: PatternSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_bits: Option<u32>,
}

fn one() -> f64 {
    1.0
}

fn lexicographic() -> PatternSetting {
    PatternSetting::Keyword("lexicographic".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepSetting {
    #[serde(rename = "d_tx")]
    TxSpacing,
    #[serde(rename = "semiangle")]
    Semiangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<SweepSetting>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: (0..=12).map(|i| 20.0 + 5.0 * i as f64).collect(),
            parameter: None,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub seed: u64,
    pub min_bit_errors: u64,
    pub max_channel_uses: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = StoppingRule::default();
        Self {
            seed: DEFAULT_SEED,
            min_bit_errors: s.min_bit_errors,
            max_channel_uses: s.max_channel_uses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory; empty means standard output.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub dir: String,
    /// File stem for outputs; empty means derived from the scheme.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub name: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: String::new(),
            name: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    room: RoomSection,
    transmitter: TransmitterSection,
    receiver: ReceiverSection,
    scheme: Option<SchemeSection>,
    sweep: SweepSection,
    sim: SimSection,
    output: OutputSection,
}

/// A validated experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub room: RoomSection,
    pub transmitter: TransmitterSection,
    pub receiver: ReceiverSection,
    pub scheme: SchemeSection,
    pub sweep: SweepSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Reference geometry with the given scheme.
    pub fn with_scheme(scheme: &SchemeConfig) -> Self {
        Self {
            room: RoomSection::default(),
            transmitter: TransmitterSection::default(),
            receiver: ReceiverSection::default(),
            scheme: SchemeSection::from_scheme(scheme),
            sweep: SweepSection::default(),
            sim: SimSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            reason: e.message().to_string(),
        })?;
        let scheme = raw
            .scheme
            .ok_or_else(|| Error::validation("scheme", "section is missing"))?;
        let cfg = Self {
            room: raw.room,
            transmitter: raw.transmitter,
            receiver: raw.receiver,
            scheme,
            sweep: raw.sweep,
            sim: raw.sim,
            output: raw.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.transmitter;
        let r = &self.receiver;
        if !(t.semiangle > 0.0 && t.semiangle < 90.0) {
            return Err(Error::validation(
                "transmitter.semiangle",
                format!("{}° is outside (0°, 90°)", t.semiangle),
            ));
        }
        if !(r.fov > 0.0 && r.fov <= 90.0) {
            return Err(Error::validation(
                "receiver.fov",
                format!("{}° is outside (0°, 90°]", r.fov),
            ));
        }
        if t.elevation != -90.0 {
            return Err(Error::validation("transmitter.elevation", "only -90 (facing down) is supported"));
        }
        if r.elevation != 90.0 {
            return Err(Error::validation("receiver.elevation", "only 90 (facing up) is supported"));
        }
        for (name, v) in [
            ("transmitter.spacing", t.spacing),
            ("receiver.spacing", r.spacing),
            ("receiver.area", r.area),
            ("receiver.responsivity", r.responsivity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("transmitter.rows", t.rows),
            ("transmitter.cols", t.cols),
            ("receiver.rows", r.rows),
            ("receiver.cols", r.cols),
        ] {
            if v == 0 {
                return Err(Error::validation(name, "must be at least 1"));
            }
        }
        if self.sweep.snr_db.is_empty() {
            return Err(Error::validation("sweep.snr_db", "SNR grid is empty"));
        }
        if self.sweep.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("sweep.snr_db", "values must be finite"));
        }
        match (self.sweep.parameter, self.sweep.values.is_empty()) {
            (Some(_), true) => return Err(Error::validation("sweep.values", "parameter sweep needs values")),
            (None, false) => return Err(Error::validation("sweep.parameter", "values given without a parameter")),
            _ => {}
        }
        self.stopping().validate()?;
        let scheme = self.scheme_config()?;
        efficiency(&scheme)?;
        let geometry = self.geometry()?;
        geometry.validate()?;
        let cells = geometry.tx_grid.len();
        match self.placement()? {
            Placement::Cells(c) => crate::system::check_cells(&c, scheme.n_tx, cells)?,
            Placement::FullGrid if cells != scheme.n_tx => {
                return Err(Error::validation(
                    "transmitter.placement",
                    format!("\"full\" needs a grid of {} cells, not {cells}", scheme.n_tx),
                ))
            }
            _ if scheme.n_tx > cells => {
                return Err(Error::validation(
                    "scheme.n_tx",
                    format!("{} LEDs do not fit the {cells}-cell grid", scheme.n_tx),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        self.scheme.to_scheme()
    }

    pub fn geometry(&self) -> Result<LinkGeometry> {
        let (t, r) = (&self.transmitter, &self.receiver);
        let room = RoomConfig {
            length: self.room.length,
            width: self.room.width,
            height: self.room.height,
            tx_height: t.height,
            rx_height: r.height,
        };
        room.validate()?;
        Ok(LinkGeometry {
            room,
            tx_grid: GridSpec {
                rows: t.rows,
                cols: t.cols,
                spacing: t.spacing,
                center: room.center_at(t.height),
            },
            rx_grid: GridSpec {
                rows: r.rows,
                cols: r.cols,
                spacing: r.spacing,
                center: room.center_at(r.height),
            },
            lambertian: LambertianParams::from_degrees(t.semiangle)
                .map_err(|e| Error::validation("transmitter.semiangle", e.to_string()))?,
            area: r.area,
            fov: r.fov.to_radians(),
            responsivity: r.responsivity,
        })
    }

    pub fn placement(&self) -> Result<Placement> {
        match &self.transmitter.placement {
            PlacementSetting::Keyword(k) if k == "auto" => Ok(Placement::Optimize),
            PlacementSetting::Keyword(k) if k == "full" => Ok(Placement::FullGrid),
            PlacementSetting::Keyword(k) => Err(Error::validation(
                "transmitter.placement",
                format!("expected \"auto\", \"full\" or a cell list, got {k:?}"),
            )),
            PlacementSetting::Cells(c) => {
                if c.contains(&0) {
                    return Err(Error::validation("transmitter.placement", "cells are one-based"));
                }
                Ok(Placement::Cells(c.iter().map(|v| v - 1).collect()))
            }
        }
    }

    pub fn link_spec(&self) -> Result<LinkSpec> {
        Ok(LinkSpec::new(self.geometry()?, self.scheme_config()?, self.placement()?))
    }

    pub fn stopping(&self) -> StoppingRule {
        StoppingRule {
            min_bit_errors: self.sim.min_bit_errors,
            max_channel_uses: self.sim.max_channel_uses,
        }
    }

    pub fn sweep_parameter(&self) -> Option<SweepParameter> {
        self.sweep.parameter.map(|p| match p {
            SweepSetting::TxSpacing => SweepParameter::TxSpacing,
            SweepSetting::Semiangle => SweepParameter::SemiangleDeg,
        })
    }

    /// File stem used for this experiment's outputs.
    pub fn name(&self) -> String {
        if !self.output.name.is_empty() {
            return self.output.name.clone();
        }
        self.scheme_config().map(|s| slug(&s)).unwrap_or_else(|_| "experiment".into())
    }

    pub fn with_cells(mut self, cells: &[usize]) -> Self {
        self.transmitter.placement = PlacementSetting::Cells(cells.iter().map(|c| c + 1).collect());
        self
    }
}

impl SchemeSection {
    pub fn from_scheme(s: &SchemeConfig) -> Self {
        Self {
            kind: s.kind,
            n_tx: s.n_tx,
            n_active: Some(s.n_active),
            levels: Some(s.levels),
            mean_power: s.mean_power,
            patterns: match &s.policy {
                PatternPolicy::Lexicographic => lexicographic(),
                PatternPolicy::Optimized => PatternSetting::Keyword("optimized".into()),
                PatternPolicy::Explicit(list) => PatternSetting::List(list.iter().map(|p| p.one_based()).collect()),
            },
            index_bits: s.index_bits,
        }
    }

    pub fn to_scheme(&self) -> Result<SchemeConfig> {
        let n_active = self.n_active.unwrap_or(match self.kind {
            SchemeKind::Smp => self.n_tx,
            _ => 1,
        });
        let levels = self.levels.unwrap_or(1);
        let policy = match &self.patterns {
            PatternSetting::Keyword(k) if k == "lexicographic" => PatternPolicy::Lexicographic,
            PatternSetting::Keyword(k) if k == "optimized" => PatternPolicy::Optimized,
            PatternSetting::Keyword(k) => {
                return Err(Error::validation(
                    "scheme.patterns",
                    format!("expected \"lexicographic\", \"optimized\" or a list, got {k:?}"),
                ))
            }
            PatternSetting::List(list) => PatternPolicy::Explicit(
                list.iter()
                    .map(|p| Pattern::from_one_based(p))
                    .collect::<Result<_>>()
                    .map_err(|e| Error::validation("scheme.patterns", e.to_string()))?,
            ),
        };
        let mut s = SchemeConfig::new(self.kind, self.n_tx, n_active, levels)
            .with_mean_power(self.mean_power)
            .with_policy(policy);
        s.index_bits = self.index_bits;
        s.validate()?;
        Ok(s)
    }
}

/// File-name friendly scheme label, e.g. `gsm-7-2-4`.
pub fn slug(s: &SchemeConfig) -> String {
    format!("{}-{}-{}-{}", s.kind.name().to_lowercase(), s.n_tx, s.n_active, s.levels)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text, path)
}
