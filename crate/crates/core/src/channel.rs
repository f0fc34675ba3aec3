//! Line-of-sight Lambertian channel gains and the optical MIMO channel matrix.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{link_angles, Detector, Emitter};

/// Radiation lobe of an LED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertianParams {
    pub half_power_semiangle: f64,
    pub mode_number: f64,
}

impl LambertianParams {
    pub fn from_semiangle(half_power_semiangle: f64) -> Result<Self> {
        Ok(Self {
            half_power_semiangle,
            mode_number: mode_number(half_power_semiangle)?,
        })
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::from_semiangle(deg.to_radians())
    }
}

/// Lambertian mode number `-ln 2 / ln cos(semiangle)`.
pub fn mode_number(half_power_semiangle: f64) -> Result<f64> {
    if !(half_power_semiangle > 0.0 && half_power_semiangle < PI / 2.0) {
        return Err(Error::Domain(format!(
            "half-power semiangle must lie in (0, π/2), got {half_power_semiangle} rad"
        )));
    }
    Ok(-std::f64::consts::LN_2 / half_power_semiangle.cos().ln())
}

/// DC gain of the line-of-sight path from `e` to `d`.
///
/// Zero outside the detector field of view and for detectors behind the
/// emitter plane.
pub fn los_gain(e: &Emitter, d: &Detector, params: &LambertianParams) -> Result<f64> {
    let l = link_angles(e, d)?;
    if l.cos_phi < 0.0 || l.cos_theta < d.fov.cos() {
        return Ok(0.0);
    }
    let n = params.mode_number;
    Ok((n + 1.0) / (2.0 * PI) * l.cos_phi.powf(n) * l.cos_theta * d.area
        / (l.distance * l.distance))
}

/// Nonnegative `N_r × N_t` gain matrix; row = detector, column = LED.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ChannelMatrix {
    /// Row-major construction. Entries must be finite and nonnegative.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Config(format!(
                "channel matrix needs {rows}x{cols} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::Config("channel gains must be finite and nonnegative".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    /// Number of detectors.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of LEDs.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `H x` written into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(h, v)| h * v).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        out
    }

    /// Sub-matrix keeping the given LED columns in order.
    pub fn select_columns(&self, cols: &[usize]) -> ChannelMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        ChannelMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn scaled(&self, k: f64) -> ChannelMatrix {
        ChannelMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|h| h * k).collect(),
        }
    }

    /// CSV dump, one line per detector.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.cols).map(|j| format!("led{}", j + 1)).collect();
        w.write_record(&header)?;
        for r in 0..self.rows {
            w.write_record(self.row(r).iter().map(|h| format!("{h:e}")))?;
        }
        w.flush().map_err(|e| Error::io("<channel csv>", e))?;
        Ok(())
    }
}

pub fn build_channel(
    tx: &[Emitter],
    rx: &[Detector],
    params: &LambertianParams,
) -> Result<ChannelMatrix> {
    if tx.is_empty() || rx.is_empty() {
        return Err(Error::Config("channel needs at least one LED and one detector".into()));
    }
    let mut data = Vec::with_capacity(tx.len() * rx.len());
    for d in rx {
        for e in tx {
            data.push(los_gain(e, d, params)?);
        }
    }
    ChannelMatrix::from_rows(rx.len(), tx.len(), data)
}
