//! Maximum-likelihood detection and the union bound on bit error rate.

use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::modulation::SignalSet;

/// Gaussian tail probability `Q(u) = erfc(u / √2) / 2`.
pub fn q_function(u: f64) -> f64 {
    0.5 * libm::erfc(u / std::f64::consts::SQRT_2)
}

/// Number of differing positions between two bit strings.
pub fn hamming(a: &str, b: &str) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "labels {a:?} and {b:?} have different lengths"
        )));
    }
    Ok(a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count() as u32)
}

pub fn hamming_bits(a: u32, b: u32) -> u32 {
    (a ^ b).count_ones()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionResult {
    pub index: usize,
    pub label: u32,
}

/// ML detector with the noiseless receive images `r H x_k` precomputed.
#[derive(Debug, Clone)]
pub struct MlDetector {
    n_rx: usize,
    images: Vec<f64>,
    labels: Vec<u32>,
}

impl MlDetector {
    pub fn new(h: &ChannelMatrix, set: &SignalSet, responsivity: f64) -> Self {
        let images = set.images(h).into_iter().map(|v| v * responsivity).collect();
        Self {
            n_rx: h.rows(),
            images,
            labels: set.labels().to_vec(),
        }
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    /// Noiseless receive vector for signal `k`.
    pub fn image(&self, k: usize) -> &[f64] {
        &self.images[k * self.n_rx..(k + 1) * self.n_rx]
    }

    /// Closest image to `y`; ties go to the lowest index.
    pub fn detect_index(&self, y: &[f64]) -> usize {
        debug_assert_eq!(y.len(), self.n_rx);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, img) in self.images.chunks_exact(self.n_rx).enumerate() {
            let mut d = 0.0;
            for (a, b) in y.iter().zip(img) {
                let e = a - b;
                d += e * e;
            }
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    pub fn detect(&self, y: &[f64]) -> DetectionResult {
        let index = self.detect_index(y);
        DetectionResult {
            index,
            label: self.labels[index],
        }
    }
}

/// `argmin_x ‖y − r H x‖²` over the signal set.
///
/// The noise level does not change the decision; it is accepted to mirror
/// the normalised receiver form.
pub fn ml_detect(
    y: &[f64],
    h: &ChannelMatrix,
    set: &SignalSet,
    responsivity: f64,
    _sigma: f64,
) -> Result<DetectionResult> {
    if y.len() != h.rows() || h.cols() != set.n_tx() {
        return Err(Error::Config(format!(
            "received vector has {} entries for a {}x{} channel",
            y.len(),
            h.rows(),
            h.cols()
        )));
    }
    Ok(MlDetector::new(h, set, responsivity).detect(y))
}

/// Probability that `x1` is mistaken for `x2`.
pub fn pep(h: &ChannelMatrix, x1: &[f64], x2: &[f64], responsivity: f64, sigma: f64) -> f64 {
    let diff: Vec<f64> = x2.iter().zip(x1).map(|(a, b)| a - b).collect();
    let norm = h.apply(&diff).iter().map(|v| v * v).sum::<f64>().sqrt();
    q_function(responsivity / (2.0 * sigma) * norm)
}

#[derive(Debug, Clone, Copy)]
pub struct BoundInput<'a> {
    pub channel: &'a ChannelMatrix,
    pub set: &'a SignalSet,
    pub responsivity: f64,
    pub sigma: f64,
}

pub fn union_bound_ber(b: BoundInput<'_>) -> Result<f64> {
    if !(b.sigma > 0.0) {
        return Err(Error::Domain(format!("noise deviation must be positive, got {}", b.sigma)));
    }
    Ok(UnionBound::new(b.channel, b.set)?.ber(b.responsivity, b.sigma))
}

/// Pairwise image distances cached for evaluating the union bound at many
/// noise levels.
#[derive(Debug, Clone)]
pub struct UnionBound {
    size: usize,
    bits: u32,
    /// `‖H(x_j − x_i)‖`, row-major `size × size`.
    norms: Vec<f64>,
    labels: Vec<u32>,
}

impl UnionBound {
    pub fn new(h: &ChannelMatrix, set: &SignalSet) -> Result<Self> {
        if set.len() < 2 {
            return Err(Error::Config("union bound needs at least two signal vectors".into()));
        }
        if h.cols() != set.n_tx() {
            return Err(Error::Config("channel and signal set disagree on N_t".into()));
        }
        let nr = h.rows();
        let img = set.images(h);
        let size = set.len();
        let mut norms = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                let d: f64 = img[i * nr..(i + 1) * nr]
                    .iter()
                    .zip(&img[j * nr..(j + 1) * nr])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                norms[i * size + j] = d.sqrt();
            }
        }
        Ok(Self {
            size,
            bits: set.bits(),
            norms,
            labels: set.labels().to_vec(),
        })
    }

    /// Union bound on BER at noise deviation `sigma`.
    ///
    /// Sums every ordered pair `(i, j)`, `i ≠ j`. Rows are reduced
    /// independently and combined in index order so the value does not depend
    /// on the thread count.
    pub fn ber(&self, responsivity: f64, sigma: f64) -> f64 {
        let scale = responsivity / (2.0 * sigma);
        let rows: Vec<f64> = (0..self.size)
            .into_par_iter()
            .map(|i| {
                let row = &self.norms[i * self.size..(i + 1) * self.size];
                let li = self.labels[i];
                let mut acc = 0.0;
                for (j, &d) in row.iter().enumerate() {
                    if j != i {
                        let dh = hamming_bits(li, self.labels[j]);
                        if dh > 0 {
                            acc += dh as f64 * q_function(scale * d);
                        }
                    }
                }
                acc
            })
            .collect();
        rows.iter().sum::<f64>() / (self.size as f64 * self.bits as f64)
    }
}
