//! Assembly of a complete link (geometry, channel and signal set).

use crate::channel::{build_channel, ChannelMatrix, LambertianParams};
use crate::error::{Error, Result};
use crate::geometry::{grid_positions, Detector, Emitter, GridSpec, RoomConfig, Vec3};
use crate::modulation::{build_signal_set, select_patterns, Pattern, PatternPolicy, SchemeConfig, SearchMode, SignalSet};
use crate::placement::optimize_placement;

/// Default LED spacing in m.
pub const DEFAULT_TX_SPACING: f64 = 0.6;
/// Default detector spacing in m.
pub const DEFAULT_RX_SPACING: f64 = 0.1;
/// Default detector area in m².
pub const DEFAULT_AREA: f64 = 1e-4;
pub const DEFAULT_RESPONSIVITY: f64 = 0.75;
pub const DEFAULT_FOV_DEG: f64 = 85.0;
pub const DEFAULT_SEMIANGLE_DEG: f64 = 60.0;

/// Everything about the optical front ends except the LED count.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    pub room: RoomConfig,
    /// Candidate LED positions. LEDs occupy a subset of these cells.
    pub tx_grid: GridSpec,
    pub rx_grid: GridSpec,
    pub lambertian: LambertianParams,
    pub area: f64,
    pub fov: f64,
    pub responsivity: f64,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self::with_tx_grid(4, 4, DEFAULT_TX_SPACING)
    }
}

impl LinkGeometry {
    /// Default room and receiver with a `rows × cols` LED grid centred
    /// under the ceiling.
    pub fn with_tx_grid(rows: usize, cols: usize, spacing: f64) -> Self {
        let room = RoomConfig::default();
        Self {
            room,
            tx_grid: GridSpec {
                rows,
                cols,
                spacing,
                center: room.center_at(room.tx_height),
            },
            rx_grid: GridSpec {
                rows: 2,
                cols: 2,
                spacing: DEFAULT_RX_SPACING,
                center: room.center_at(room.rx_height),
            },
            lambertian: LambertianParams::from_degrees(DEFAULT_SEMIANGLE_DEG)
                .expect("default semiangle is valid"),
            area: DEFAULT_AREA,
            fov: DEFAULT_FOV_DEG.to_radians(),
            responsivity: DEFAULT_RESPONSIVITY,
        }
    }

    pub fn with_semiangle_deg(mut self, deg: f64) -> Result<Self> {
        self.lambertian = LambertianParams::from_degrees(deg)?;
        Ok(self)
    }

    pub fn with_fov_deg(mut self, deg: f64) -> Self {
        self.fov = deg.to_radians();
        self
    }

    pub fn with_tx_spacing(mut self, spacing: f64) -> Self {
        self.tx_grid.spacing = spacing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.detectors()?;
        self.emitters()?;
        Ok(())
    }

    pub fn emitters(&self) -> Result<Vec<Emitter>> {
        Ok(grid_positions(&self.tx_grid, &self.room)?
            .into_iter()
            .map(Emitter::facing_down)
            .collect())
    }

    pub fn detectors(&self) -> Result<Vec<Detector>> {
        grid_positions(&self.rx_grid, &self.room)?
            .into_iter()
            .map(|p: Vec3| Detector::facing_up(p, self.area, self.fov, self.responsivity))
            .collect()
    }

    /// Channel from every grid cell to every detector.
    pub fn grid_channel(&self) -> Result<ChannelMatrix> {
        build_channel(&self.emitters()?, &self.detectors()?, &self.lambertian)
    }
}

/// Which grid cells carry LEDs.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// One LED per grid cell.
    FullGrid,
    /// Zero-based cell indices in row-major order.
    Cells(Vec<usize>),
    /// Search for the placement maximising the distance metrics.
    Optimize,
}

/// Recipe for a [`Link`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub geometry: LinkGeometry,
    pub scheme: SchemeConfig,
    pub placement: Placement,
}

/// A resolved link: channel, signal set and detector responsivity.
#[derive(Debug, Clone)]
pub struct Link {
    pub scheme: SchemeConfig,
    pub cells: Vec<usize>,
    pub channel: ChannelMatrix,
    pub set: SignalSet,
    pub responsivity: f64,
    /// How the activation patterns were chosen.
    pub pattern_mode: SearchMode,
}

impl Link {
    pub fn patterns(&self) -> &[Pattern] {
        self.set.patterns()
    }
}

impl LinkSpec {
    pub fn new(geometry: LinkGeometry, scheme: SchemeConfig, placement: Placement) -> Self {
        Self {
            geometry,
            scheme,
            placement,
        }
    }

    pub fn build(&self) -> Result<Link> {
        self.scheme.validate()?;
        self.geometry.validate()?;
        let grid = self.geometry.grid_channel()?;
        let cells = match &self.placement {
            Placement::FullGrid => {
                if grid.cols() != self.scheme.n_tx {
                    return Err(Error::Config(format!(
                        "{} needs {} LEDs but the grid has {} cells",
                        self.scheme.label(),
                        self.scheme.n_tx,
                        grid.cols()
                    )));
                }
                (0..grid.cols()).collect()
            }
            Placement::Cells(cells) => {
                check_cells(cells, self.scheme.n_tx, grid.cols())?;
                cells.clone()
            }
            Placement::Optimize => {
                let result = optimize_placement(&self.geometry, &self.scheme)?;
                let channel = grid.select_columns(&result.best.cells);
                let scheme = self.scheme.clone().with_policy(PatternPolicy::Explicit(result.patterns.clone()));
                let set = build_signal_set(&scheme, &result.patterns)?;
                return Ok(Link {
                    scheme: self.scheme.clone(),
                    cells: result.best.cells,
                    channel,
                    set,
                    responsivity: self.geometry.responsivity,
                    pattern_mode: result.pattern_mode,
                });
            }
        };
        let channel = grid.select_columns(&cells);
        let choice = select_patterns(&self.scheme, Some(&channel))?;
        let set = build_signal_set(&self.scheme, &choice.patterns)?;
        Ok(Link {
            scheme: self.scheme.clone(),
            cells,
            channel,
            set,
            responsivity: self.geometry.responsivity,
            pattern_mode: choice.mode,
        })
    }
}

pub(crate) fn check_cells(cells: &[usize], n_tx: usize, grid_len: usize) -> Result<()> {
    if cells.len() != n_tx {
        return Err(Error::validation(
            "transmitter.cells",
            format!("expected {n_tx} cells, got {}", cells.len()),
        ));
    }
    if cells.iter().any(|&c| c >= grid_len) {
        return Err(Error::validation(
            "transmitter.cells",
            format!("cell index beyond the {grid_len}-cell grid"),
        ));
    }
    if cells.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("transmitter.cells", "cells must be strictly increasing"));
    }
    Ok(())
}
