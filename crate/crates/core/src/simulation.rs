//! Monte Carlo BER estimation under ML detection.
//!
//! Noise is calibrated per SNR point from the average received power of the
//! equiprobable signal set. Channel uses are grouped in fixed-size batches,
//! and each batch draws from its own ChaCha stream keyed by (master seed,
//! point stream, batch index). Batches run in parallel waves but are folded
//! in index order, so the counts do not depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::ChannelMatrix;
use crate::detection::{hamming_bits, MlDetector, UnionBound};
use crate::error::{Error, Result};
use crate::modulation::SignalSet;
use crate::system::{Link, LinkSpec};

/// Channel uses per batch.
pub const BATCH_USES: u64 = 8192;
/// Batches evaluated per parallel wave.
pub const WAVE_BATCHES: u64 = 16;

/// Received signal power `P_r²` and the noise deviation for one SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrCalibration {
    pub received_power: f64,
    pub sigma: f64,
}

/// `P_r² = (1/N_r) Σ_i E[(H_i x)²]` with `x` uniform over the signal set.
pub fn received_power(h: &ChannelMatrix, set: &SignalSet) -> f64 {
    let img = set.images(h);
    img.iter().map(|v| v * v).sum::<f64>() / (h.rows() as f64 * set.len() as f64)
}

/// Noise deviation giving average received SNR `snr_db`.
pub fn calibrate(h: &ChannelMatrix, set: &SignalSet, responsivity: f64, snr_db: f64) -> Result<SnrCalibration> {
    if set.is_empty() {
        return Err(Error::Calibration("empty signal set".into()));
    }
    let p2 = received_power(h, set);
    if !(p2 > 0.0 && p2.is_finite()) {
        return Err(Error::Calibration("no signal power reaches the detectors".into()));
    }
    Ok(SnrCalibration {
        received_power: p2,
        sigma: responsivity * p2.sqrt() / 10f64.powf(snr_db / 20.0),
    })
}

pub fn calibrate_sigma(h: &ChannelMatrix, set: &SignalSet, responsivity: f64, snr_db: f64) -> Result<f64> {
    Ok(calibrate(h, set, responsivity, snr_db)?.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoppingRule {
    pub min_bit_errors: u64,
    pub max_channel_uses: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            min_bit_errors: 400,
            max_channel_uses: 20_000_000,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_bit_errors == 0 || self.max_channel_uses == 0 {
            return Err(Error::validation("sim.stopping", "counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub channel_uses: u64,
    pub bits_simulated: u64,
    pub bit_errors: u64,
    pub ber_sim: f64,
    pub ber_bound: f64,
    /// The error target was not reached before the channel-use cap.
    pub low_confidence: bool,
}

impl BerPoint {
    /// Normal-approximation confidence half width on `ber_sim` at `z`
    /// standard deviations.
    pub fn half_width(&self, z: f64) -> f64 {
        let p = self.ber_sim;
        z * (p * (1.0 - p) / self.bits_simulated as f64).sqrt()
    }
}

/// Counts accumulated over a run of channel uses.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    pub channel_uses: u64,
    pub bit_errors: u64,
    /// `Σ ‖r H x‖²` over the transmitted vectors.
    pub signal_energy: f64,
}

/// A link with everything needed to simulate it.
#[derive(Debug, Clone)]
pub struct SimPlan {
    pub link: Link,
    pub snr_db: Vec<f64>,
    pub stopping: StoppingRule,
    pub seed: u64,
    detector: MlDetector,
    bound: UnionBound,
}

impl SimPlan {
    pub fn new(link: Link, snr_db: Vec<f64>, stopping: StoppingRule, seed: u64) -> Result<Self> {
        if snr_db.is_empty() {
            return Err(Error::validation("sweep.snr_db", "SNR grid is empty"));
        }
        if snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("sweep.snr_db", "SNR values must be finite"));
        }
        stopping.validate()?;
        let detector = MlDetector::new(&link.channel, &link.set, link.responsivity);
        let bound = UnionBound::new(&link.channel, &link.set)?;
        Ok(Self {
            link,
            snr_db,
            stopping,
            seed,
            detector,
            bound,
        })
    }

    pub fn from_spec(spec: &LinkSpec, snr_db: Vec<f64>, stopping: StoppingRule, seed: u64) -> Result<Self> {
        Self::new(spec.build()?, snr_db, stopping, seed)
    }

    pub fn sigma(&self, snr_db: f64) -> Result<f64> {
        calibrate_sigma(&self.link.channel, &self.link.set, self.link.responsivity, snr_db)
    }

    pub fn bound(&self, snr_db: f64) -> Result<f64> {
        Ok(self.bound.ber(self.link.responsivity, self.sigma(snr_db)?))
    }

    /// Simulates `uses` channel uses on one RNG stream.
    pub fn simulate_batch(&self, sigma: f64, stream: u64, batch: u64, uses: u64) -> BatchStats {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream << 32 | batch);
        let nr = self.detector.n_rx();
        let bits = self.link.set.bits();
        let mask = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
        let mut y = vec![0.0; nr];
        let mut stats = BatchStats {
            channel_uses: uses,
            ..BatchStats::default()
        };
        for _ in 0..uses {
            let label = rng.random::<u32>() & mask;
            let k = self.link.set.encode(label).expect("labels cover every bit pattern");
            let img = self.detector.image(k);
            for (o, s) in y.iter_mut().zip(img) {
                let n: f64 = rng.sample(StandardNormal);
                *o = s + sigma * n;
                stats.signal_energy += s * s;
            }
            let det = self.detector.detect(&y);
            stats.bit_errors += hamming_bits(label, det.label) as u64;
        }
        stats
    }

    /// Simulates one SNR point. `stream` selects the random stream; sweeps
    /// use the point index.
    pub fn run_point(&self, snr_db: f64, stream: u64) -> Result<BerPoint> {
        if stream >= 1 << 32 {
            return Err(Error::Config("stream index must fit in 32 bits".into()));
        }
        let sigma = self.sigma(snr_db)?;
        let rule = self.stopping;
        let mut total = BatchStats::default();
        let mut next_batch = 0u64;
        'outer: loop {
            let first = next_batch;
            let wave: Vec<(u64, u64)> = (first..first + WAVE_BATCHES)
                .map(|b| (b, (rule.max_channel_uses.saturating_sub(b * BATCH_USES)).min(BATCH_USES)))
                .filter(|(_, n)| *n > 0)
                .collect();
            if wave.is_empty() {
                break;
            }
            let results: Vec<BatchStats> = wave
                .par_iter()
                .map(|&(b, n)| self.simulate_batch(sigma, stream, b, n))
                .collect();
            for r in results {
                total.channel_uses += r.channel_uses;
                total.bit_errors += r.bit_errors;
                total.signal_energy += r.signal_energy;
                next_batch += 1;
                if total.bit_errors >= rule.min_bit_errors || total.channel_uses >= rule.max_channel_uses {
                    break 'outer;
                }
            }
        }
        let bits = total.channel_uses * self.link.set.bits() as u64;
        Ok(BerPoint {
            snr_db,
            channel_uses: total.channel_uses,
            bits_simulated: bits,
            bit_errors: total.bit_errors,
            ber_sim: total.bit_errors as f64 / bits as f64,
            ber_bound: self.bound.ber(self.link.responsivity, sigma),
            low_confidence: total.bit_errors < rule.min_bit_errors,
        })
    }

    pub fn run_sweep(&self) -> Result<Vec<BerPoint>> {
        self.snr_db
            .iter()
            .enumerate()
            .map(|(i, &s)| self.run_point(s, i as u64))
            .collect()
    }

    /// Analytical bound only, over the whole SNR grid.
    pub fn bound_sweep(&self) -> Result<Vec<(f64, f64)>> {
        self.snr_db.iter().map(|&s| Ok((s, self.bound(s)?))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// LED spacing `d_tx` in m.
    TxSpacing,
    /// Half-power semiangle in degrees.
    SemiangleDeg,
}

/// Results for one parameter value; geometry failures are kept per value.
#[derive(Debug)]
pub struct ParameterRow {
    pub value: f64,
    pub points: Result<Vec<BerPoint>>,
}

/// Rebuilds the link for each parameter value and simulates the SNR list.
///
/// Placement and pattern policy are taken from `spec` unchanged; pass
/// explicit cells and patterns to keep the link fixed across values.
pub fn sweep_parameter(
    spec: &LinkSpec,
    parameter: SweepParameter,
    values: &[f64],
    snr_db: &[f64],
    stopping: StoppingRule,
    seed: u64,
) -> Result<Vec<ParameterRow>> {
    if values.is_empty() {
        return Err(Error::validation("sweep.values", "no parameter values"));
    }
    if snr_db.is_empty() {
        return Err(Error::validation("sweep.snr_db", "SNR grid is empty"));
    }
    let rows = values
        .iter()
        .enumerate()
        .map(|(vi, &value)| {
            let points = (|| {
                let mut spec = spec.clone();
                match parameter {
                    SweepParameter::TxSpacing => spec.geometry.tx_grid.spacing = value,
                    SweepParameter::SemiangleDeg => {
                        spec.geometry = spec.geometry.with_semiangle_deg(value)?
                    }
                }
                let plan = SimPlan::from_spec(&spec, snr_db.to_vec(), stopping, seed)?;
                snr_db
                    .iter()
                    .enumerate()
                    .map(|(si, &s)| plan.run_point(s, (vi * snr_db.len() + si) as u64))
                    .collect()
            })();
            ParameterRow { value, points }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::q_function;
    use crate::modulation::{signal_set_for, SchemeConfig};
    use crate::system::{LinkGeometry, Placement};

    fn scalar_link(levels: Vec<Vec<f64>>, gain: f64, r: f64) -> Link {
        let set = SignalSet::from_vectors(1, levels).unwrap();
        Link {
            scheme: SchemeConfig::ssk(2),
            cells: vec![0],
            channel: ChannelMatrix::from_rows(1, 1, vec![gain]).unwrap(),
            set,
            responsivity: r,
            pattern_mode: crate::modulation::SearchMode::Fixed,
        }
    }

    #[test]
    fn unit_calibration() {
        let h = ChannelMatrix::identity(1);
        let set = SignalSet::from_vectors(1, vec![vec![1.0]]).unwrap();
        assert!((calibrate_sigma(&h, &set, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((calibrate_sigma(&h, &set, 1.0, 20.0).unwrap() - 0.1).abs() < 1e-15);
        let dark = ChannelMatrix::from_rows(1, 1, vec![0.0]).unwrap();
        assert!(matches!(calibrate_sigma(&dark, &set, 1.0, 0.0), Err(Error::Calibration(_))));
    }

    #[test]
    fn calibration_matches_direct_average() {
        let g = LinkGeometry::with_tx_grid(2, 2, 0.6);
        let link = LinkSpec::new(g, SchemeConfig::gsm(4, 2, 2), Placement::FullGrid).build().unwrap();
        let (h, set) = (&link.channel, &link.set);
        let mut acc = 0.0;
        for k in 0..set.len() {
            for i in 0..h.rows() {
                let hx: f64 = h.row(i).iter().zip(set.vector(k)).map(|(a, b)| a * b).sum();
                acc += hx * hx;
            }
        }
        let p2 = acc / (set.len() * h.rows()) as f64;
        let sigma = calibrate_sigma(h, set, 0.75, 60.0).unwrap();
        assert!((sigma - 0.75 * p2.sqrt() * 1e-3).abs() <= 1e-12 * sigma);
    }

    #[test]
    fn noise_free_regime_has_no_errors() {
        let g = LinkGeometry::with_tx_grid(2, 2, 0.6);
        let link = LinkSpec::new(g, SchemeConfig::gsm(4, 2, 4), Placement::FullGrid).build().unwrap();
        let stop = StoppingRule { min_bit_errors: 1, max_channel_uses: 20_000 };
        let plan = SimPlan::new(link, vec![200.0], stop, 1).unwrap();
        let p = plan.run_point(200.0, 0).unwrap();
        assert_eq!(p.bit_errors, 0);
        assert_eq!(p.channel_uses, 20_000);
        assert!(p.low_confidence);
    }

    #[test]
    fn antipodal_scalar_matches_closed_form() {
        let link = scalar_link(vec![vec![0.5], vec![1.5]], 2.0, 0.75);
        let stop = StoppingRule { min_bit_errors: 20_000, max_channel_uses: 5_000_000 };
        let plan = SimPlan::new(link, vec![8.0], stop, 9).unwrap();
        let p = plan.run_point(8.0, 0).unwrap();
        let sigma = plan.sigma(8.0).unwrap();
        let want = q_function(0.75 * 2.0 * 1.0 / (2.0 * sigma));
        let sd = (want * (1.0 - want) / p.bits_simulated as f64).sqrt();
        assert!((p.ber_sim - want).abs() < 3.0 * sd, "{} vs {want}", p.ber_sim);
        assert!((p.ber_bound - want).abs() < 1e-15);
    }

    #[test]
    fn replay_is_bit_identical() {
        let set = signal_set_for(&SchemeConfig::gsm(4, 2, 2), None).unwrap();
        let link = Link {
            scheme: SchemeConfig::gsm(4, 2, 2),
            cells: vec![0, 1, 2, 3],
            channel: ChannelMatrix::from_rows(2, 4, vec![1.0, 0.8, 0.6, 0.4, 0.3, 0.9, 0.5, 0.7]).unwrap(),
            set,
            responsivity: 0.75,
            pattern_mode: crate::modulation::SearchMode::Fixed,
        };
        let stop = StoppingRule { min_bit_errors: 300, max_channel_uses: 100_000 };
        let a = SimPlan::new(link.clone(), vec![10.0, 14.0], stop, 42).unwrap().run_sweep().unwrap();
        let b = SimPlan::new(link.clone(), vec![10.0, 14.0], stop, 42).unwrap().run_sweep().unwrap();
        assert_eq!(a, b);
        let c = SimPlan::new(link, vec![10.0, 14.0], stop, 43).unwrap().run_sweep().unwrap();
        assert_ne!(a[0].bit_errors, c[0].bit_errors);
    }

    #[test]
    fn thread_count_does_not_change_counts() {
        let link = scalar_link(vec![vec![0.5], vec![1.5]], 1.0, 1.0);
        let stop = StoppingRule { min_bit_errors: 5_000, max_channel_uses: 1_000_000 };
        let plan = SimPlan::new(link, vec![6.0], stop, 5).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| plan.run_point(6.0, 0).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn sweep_shapes() {
        let link = scalar_link(vec![vec![0.5], vec![1.5]], 1.0, 1.0);
        let stop = StoppingRule { min_bit_errors: 10, max_channel_uses: 10_000 };
        assert!(SimPlan::new(link.clone(), vec![], stop, 0).is_err());
        let one = SimPlan::new(link, vec![3.0], stop, 0).unwrap().run_sweep().unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].ber_sim, one[0].bit_errors as f64 / one[0].bits_simulated as f64);
    }

    #[test]
    fn energy_bookkeeping() {
        let g = LinkGeometry::with_tx_grid(2, 2, 0.6);
        let link = LinkSpec::new(g, SchemeConfig::gsm(4, 2, 2), Placement::FullGrid).build().unwrap();
        let p2 = received_power(&link.channel, &link.set);
        let r = link.responsivity;
        let nr = link.channel.rows() as f64;
        let plan = SimPlan::new(link, vec![30.0], StoppingRule::default(), 3).unwrap();
        let sigma = plan.sigma(30.0).unwrap();
        let s = plan.simulate_batch(sigma, 0, 0, 100_000);
        let mean = s.signal_energy / (s.channel_uses as f64 * nr);
        assert!((mean / (r * r * p2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn parameter_sweep_keeps_bad_values() {
        let g = LinkGeometry::with_tx_grid(2, 2, 0.6);
        let spec = LinkSpec::new(g, SchemeConfig::gsm(4, 2, 2), Placement::FullGrid);
        let stop = StoppingRule { min_bit_errors: 10, max_channel_uses: 5_000 };
        let rows = sweep_parameter(&spec, SweepParameter::TxSpacing, &[0.6, 6.0], &[20.0], stop, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].points.as_ref().unwrap().len(), 1);
        assert!(rows[1].points.is_err());
        let one = sweep_parameter(&spec, SweepParameter::SemiangleDeg, &[30.0], &[20.0, 30.0], stop, 1).unwrap();
        assert_eq!(one[0].points.as_ref().unwrap().len(), 2);
        assert!(sweep_parameter(&spec, SweepParameter::TxSpacing, &[], &[20.0], stop, 1).is_err());
    }
}
