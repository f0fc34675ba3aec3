//! Signal sets for GSM and its special cases (SM, SMP, SSK, GSSK).
//!
//! Every scheme is described by the number of LEDs, the number lit per
//! channel use and a PAM intensity alphabet. A signal vector carries
//! `index_bits` bits in the choice of activation pattern followed by
//! `log2(M)` bits per lit LED.
//!
//! Labels use natural binary throughout. The pattern's position in the
//! pattern list supplies the most significant bits, then come the symbol
//! digits of the lit LEDs in increasing LED order, first LED most
//! significant. Vectors are stored in label order so the label of vector `k`
//! is `k`.

mod patterns;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

pub use patterns::{
    all_patterns, binomial, select_patterns, PatternChoice, PatternDistances, SearchMode,
    EXHAUSTIVE_FAMILY_LIMIT,
};

/// Largest signal set the simulator will build.
pub const MAX_SIGNAL_SET: usize = 1 << 16;

/// Relative tolerance under which two distance metrics count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Gsm,
    Sm,
    Smp,
    Ssk,
    Gssk,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Gsm => "GSM",
            SchemeKind::Sm => "SM",
            SchemeKind::Smp => "SMP",
            SchemeKind::Ssk => "SSK",
            SchemeKind::Gssk => "GSSK",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Zero-based indices of the lit LEDs, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern(Vec<usize>);

impl Pattern {
    pub fn new(mut leds: Vec<usize>) -> Result<Self> {
        leds.sort_unstable();
        if leds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("pattern {leds:?} repeats an LED")));
        }
        Ok(Self(leds))
    }

    /// From one-based LED numbers as they appear in configuration files.
    pub fn from_one_based(leds: &[usize]) -> Result<Self> {
        if leds.contains(&0) {
            return Err(Error::Config("LED numbers in patterns start at 1".into()));
        }
        Self::new(leds.iter().map(|l| l - 1).collect())
    }

    pub fn leds(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|l| l + 1).collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| (l + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatternPolicy {
    Lexicographic,
    Optimized,
    Explicit(Vec<Pattern>),
}

/// PAM intensity levels `I_m = 2 I_p m / (M + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityAlphabet {
    pub mean_power: f64,
    pub levels: Vec<f64>,
}

pub fn intensity_levels(m: usize, mean_power: f64) -> IntensityAlphabet {
    let levels = (1..=m)
        .map(|k| 2.0 * mean_power * k as f64 / (m as f64 + 1.0))
        .collect();
    IntensityAlphabet { mean_power, levels }
}

impl IntensityAlphabet {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().sum::<f64>() / self.levels.len() as f64
    }
}

/// A transmission scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub n_tx: usize,
    pub n_active: usize,
    /// PAM alphabet size `M`; a power of two.
    pub levels: usize,
    /// Mean optical power `I_p` in W.
    pub mean_power: f64,
    pub policy: PatternPolicy,
    /// Overrides the number of index bits (otherwise `floor(log2 C(N_t, N_a))`).
    pub index_bits: Option<u32>,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, n_tx: usize, n_active: usize, levels: usize) -> Self {
        Self {
            kind,
            n_tx,
            n_active,
            levels,
            mean_power: 1.0,
            policy: PatternPolicy::Lexicographic,
            index_bits: None,
        }
    }

    pub fn gsm(n_tx: usize, n_active: usize, levels: usize) -> Self {
        Self::new(SchemeKind::Gsm, n_tx, n_active, levels)
    }

    pub fn sm(n_tx: usize, levels: usize) -> Self {
        Self::new(SchemeKind::Sm, n_tx, 1, levels)
    }

    pub fn smp(n_tx: usize, levels: usize) -> Self {
        Self::new(SchemeKind::Smp, n_tx, n_tx, levels)
    }

    pub fn ssk(n_tx: usize) -> Self {
        Self::new(SchemeKind::Ssk, n_tx, 1, 1)
    }

    pub fn gssk(n_tx: usize, n_active: usize) -> Self {
        Self::new(SchemeKind::Gssk, n_tx, n_active, 1)
    }

    pub fn with_policy(mut self, policy: PatternPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_index_bits(mut self, bits: u32) -> Self {
        self.index_bits = Some(bits);
        self
    }

    pub fn with_mean_power(mut self, mean_power: f64) -> Self {
        self.mean_power = mean_power;
        self
    }

    /// Short label such as `GSM(7,2,4)`.
    pub fn label(&self) -> String {
        format!("{}({},{},{})", self.kind, self.n_tx, self.n_active, self.levels)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("scheme.{f}");
        if self.n_tx == 0 {
            return Err(Error::validation(field("n_tx"), "need at least one LED"));
        }
        if self.n_active == 0 || self.n_active > self.n_tx {
            return Err(Error::validation(field("n_active"), "must lie in 1..=n_tx"));
        }
        if self.levels == 0 || !self.levels.is_power_of_two() {
            return Err(Error::validation(field("levels"), "must be a power of two"));
        }
        if !(self.mean_power.is_finite() && self.mean_power > 0.0) {
            return Err(Error::validation(field("mean_power"), "must be positive"));
        }
        match self.kind {
            SchemeKind::Sm | SchemeKind::Ssk if self.n_active != 1 => {
                return Err(Error::validation(
                    field("n_active"),
                    format!("{} lights exactly one LED", self.kind),
                ))
            }
            SchemeKind::Smp if self.n_active != self.n_tx => {
                return Err(Error::validation(field("n_active"), "SMP lights every LED"))
            }
            _ => {}
        }
        if matches!(self.kind, SchemeKind::Ssk | SchemeKind::Gssk) && self.levels != 1 {
            return Err(Error::validation(
                field("levels"),
                format!("{} carries no intensity bits (levels = 1)", self.kind),
            ));
        }
        let max_index = floor_log2(binomial(self.n_tx, self.n_active));
        if let Some(b) = self.index_bits {
            if b > max_index {
                return Err(Error::validation(
                    field("index_bits"),
                    format!("at most {max_index} index bits are available"),
                ));
            }
        }
        let eta = self.index_bits() + self.n_active as u32 * floor_log2(self.levels as u128);
        if eta == 0 {
            return Err(Error::validation(field("kind"), "scheme conveys no bits"));
        }
        if eta > 24 || (1usize << eta) > MAX_SIGNAL_SET {
            return Err(Error::validation(
                field("kind"),
                format!("signal set of 2^{eta} vectors is too large"),
            ));
        }
        if let PatternPolicy::Explicit(list) = &self.policy {
            patterns::validate_explicit(self, list)?;
        }
        Ok(())
    }

    pub fn index_bits(&self) -> u32 {
        self.index_bits
            .unwrap_or_else(|| floor_log2(binomial(self.n_tx, self.n_active)))
    }

    pub fn symbol_bits(&self) -> u32 {
        floor_log2(self.levels as u128)
    }

    pub fn pattern_count(&self) -> usize {
        1 << self.index_bits()
    }

    pub fn alphabet(&self) -> IntensityAlphabet {
        intensity_levels(self.levels, self.mean_power)
    }
}

pub(crate) fn floor_log2(v: u128) -> u32 {
    if v == 0 {
        0
    } else {
        127 - v.leading_zeros()
    }
}

/// Bits per channel use.
pub fn efficiency(cfg: &SchemeConfig) -> Result<u32> {
    cfg.validate()?;
    Ok(cfg.index_bits() + cfg.n_active as u32 * cfg.symbol_bits())
}

/// Transmit vectors with their bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    n_tx: usize,
    bits: u32,
    vectors: Vec<f64>,
    labels: Vec<u32>,
    patterns: Vec<Pattern>,
}

impl SignalSet {
    /// Arbitrary vectors, labelled by position. `vectors.len()` must be a
    /// power of two.
    pub fn from_vectors(n_tx: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let count = vectors.len();
        if count == 0 || !count.is_power_of_two() || n_tx == 0 {
            return Err(Error::Config(format!(
                "signal set size must be a power of two, got {count}"
            )));
        }
        if vectors.iter().any(|v| v.len() != n_tx) {
            return Err(Error::Config("signal vectors have inconsistent length".into()));
        }
        Ok(Self {
            n_tx,
            bits: count.trailing_zeros(),
            vectors: vectors.into_iter().flatten().collect(),
            labels: (0..count as u32).collect(),
            patterns: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    /// Label length `η`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n_tx..(k + 1) * self.n_tx]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n_tx)
    }

    pub fn label(&self, k: usize) -> u32 {
        self.labels[k]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Label of vector `k` as a bit string, most significant bit first.
    pub fn label_string(&self, k: usize) -> String {
        format_bits(self.labels[k], self.bits)
    }

    /// Index of the vector carrying `label`.
    pub fn encode(&self, label: u32) -> Option<usize> {
        // labels are assigned in vector order
        let k = label as usize;
        (k < self.len() && self.labels[k] == label).then_some(k)
    }

    pub fn decode(&self, k: usize) -> u32 {
        self.labels[k]
    }

    /// Channel images `H x_k`, flattened with stride `H.rows()`.
    pub fn images(&self, h: &ChannelMatrix) -> Vec<f64> {
        assert_eq!(h.cols(), self.n_tx, "channel and signal set disagree on N_t");
        let nr = h.rows();
        let mut out = vec![0.0; self.len() * nr];
        for (x, y) in self.vectors().zip(out.chunks_exact_mut(nr)) {
            h.apply_into(x, y);
        }
        out
    }
}

pub fn format_bits(value: u32, bits: u32) -> String {
    (0..bits)
        .rev()
        .map(|b| if value >> b & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bits(s: &str) -> Result<u32> {
    if s.is_empty() || s.len() > 32 || !s.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::Config(format!("not a bit string: {s:?}")));
    }
    Ok(u32::from_str_radix(s, 2).expect("validated bit string"))
}

/// Builds the signal set of `cfg` over the given activation patterns.
pub fn build_signal_set(cfg: &SchemeConfig, patterns: &[Pattern]) -> Result<SignalSet> {
    cfg.validate()?;
    if patterns.len() != cfg.pattern_count() {
        return Err(Error::Config(format!(
            "{} needs {} activation patterns, got {}",
            cfg.label(),
            cfg.pattern_count(),
            patterns.len()
        )));
    }
    for p in patterns {
        if p.len() != cfg.n_active || p.leds().iter().any(|&l| l >= cfg.n_tx) {
            return Err(Error::Config(format!("pattern {p} does not fit {}", cfg.label())));
        }
    }
    let alphabet = cfg.alphabet();
    let sym_bits = cfg.symbol_bits();
    let combos = 1usize << (sym_bits * cfg.n_active as u32);
    let bits = cfg.index_bits() + sym_bits * cfg.n_active as u32;
    let count = patterns.len() * combos;
    let mut vectors = vec![0.0; count * cfg.n_tx];
    for (p_idx, p) in patterns.iter().enumerate() {
        for s in 0..combos {
            let k = p_idx * combos + s;
            let x = &mut vectors[k * cfg.n_tx..(k + 1) * cfg.n_tx];
            fill_vector(x, p, s, sym_bits, &alphabet.levels);
        }
    }
    Ok(SignalSet {
        n_tx: cfg.n_tx,
        bits,
        vectors,
        labels: (0..count as u32).collect(),
        patterns: patterns.to_vec(),
    })
}

/// Writes the vector for symbol combination `combo` on pattern `p`.
pub(crate) fn fill_vector(x: &mut [f64], p: &Pattern, combo: usize, sym_bits: u32, levels: &[f64]) {
    let na = p.len() as u32;
    let mask = (1usize << sym_bits) - 1;
    for (t, &led) in p.leds().iter().enumerate() {
        let shift = sym_bits * (na - 1 - t as u32);
        x[led] = levels[(combo >> shift) & mask];
    }
}

/// Selects patterns per the scheme's policy and builds its signal set.
pub fn signal_set_for(cfg: &SchemeConfig, h: Option<&ChannelMatrix>) -> Result<SignalSet> {
    let choice = select_patterns(cfg, h)?;
    build_signal_set(cfg, &choice.patterns)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn pairwise<F: FnMut(f64)>(h: &ChannelMatrix, set: &SignalSet, mut f: F) -> Result<()> {
    if set.len() < 2 {
        return Err(Error::Config("distance metrics need at least two vectors".into()));
    }
    if h.cols() != set.n_tx() {
        return Err(Error::Config(format!(
            "channel has {} columns but vectors have {} entries",
            h.cols(),
            set.n_tx()
        )));
    }
    let nr = h.rows();
    let img = set.images(h);
    for i in 0..set.len() {
        let a = &img[i * nr..(i + 1) * nr];
        for j in i + 1..set.len() {
            f(squared_distance(a, &img[j * nr..(j + 1) * nr]));
        }
    }
    Ok(())
}

/// Minimum of `‖H(x_i − x_j)‖²` over distinct pairs.
pub fn d_min(h: &ChannelMatrix, set: &SignalSet) -> Result<f64> {
    let mut best = f64::INFINITY;
    pairwise(h, set, |d| best = best.min(d))?;
    Ok(best)
}

/// Mean of `‖H(x_i − x_j)‖²` over the unordered pairs.
pub fn d_avg(h: &ChannelMatrix, set: &SignalSet) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0u64;
    pairwise(h, set, |d| {
        sum += d;
        n += 1;
    })?;
    Ok(sum / n as f64)
}
