//! Property checks shared by the `properties` test target and the
//! acceptance harness. Each check runs a seeded proptest runner and returns
//! the first failure as text.

use std::collections::HashSet;

use proptest::prelude::*;
use proptest::sample::subsequence;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use gsm_vlc::channel::{los_gain, LambertianParams};
use gsm_vlc::detection::MlDetector;
use gsm_vlc::geometry::{Detector, Emitter, Vec3};
use gsm_vlc::modulation::{d_min, efficiency, SchemeConfig};
use gsm_vlc::simulation::{SimPlan, StoppingRule};
use gsm_vlc::system::{Link, LinkGeometry, LinkSpec, Placement};

pub type Check = (&'static str, fn() -> Result<(), String>);

pub const CHECKS: [Check; 8] = [
    ("signal set cardinality is 2^eta", cardinality),
    ("alphabet mean equals I_p", alphabet_mean),
    ("bit mapping is a bijection", bijection),
    ("noise-free ML detection is error-free", noise_free_detection),
    ("bound dominates simulation at 100-error points", bound_dominates),
    ("LOS gain scales as inverse square", inverse_square),
    ("LOS gain vanishes outside the FOV", fov_cutoff),
    ("results do not depend on thread count", thread_independence),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn scheme(max_bits: u32) -> impl Strategy<Value = SchemeConfig> {
    (0usize..5, 1usize..=8, 1usize..=8, 1u32..=3, 0.1f64..5.0)
        .prop_map(|(kind, n_tx, n_active, log_m, power)| {
            let m = 1usize << log_m;
            let s = match kind {
                0 => SchemeConfig::gsm(n_tx.max(2), n_active.min(n_tx.max(2) - 1), m),
                1 => SchemeConfig::sm(n_tx.max(2), m),
                2 => SchemeConfig::smp(n_tx.min(3), m),
                3 => SchemeConfig::ssk(n_tx.max(2)),
                _ => SchemeConfig::gssk(n_tx.max(3), n_active.min(n_tx.max(3) - 1)),
            };
            s.with_mean_power(power)
        })
        .prop_filter("small supported scheme", move |s| {
            efficiency(s).is_ok_and(|eta| eta <= max_bits)
        })
}

fn link(max_bits: u32) -> impl Strategy<Value = Link> {
    scheme(max_bits)
        .prop_flat_map(|s| {
            let n = s.n_tx;
            (Just(s), subsequence((0..16).collect::<Vec<usize>>(), n))
        })
        .prop_map(|(s, cells)| {
            LinkSpec::new(LinkGeometry::default(), s, Placement::Cells(cells))
                .build()
                .expect("valid link")
        })
}

fn cardinality() -> Result<(), String> {
    check(96, link(10), |l| {
        let eta = efficiency(&l.scheme).unwrap();
        prop_assert_eq!(l.set.len(), 1usize << eta);
        prop_assert_eq!(l.set.bits(), eta);
        prop_assert_eq!(l.patterns().len(), 1usize << l.scheme.index_bits());
        Ok(())
    })
}

fn alphabet_mean() -> Result<(), String> {
    check(256, (0u32..=8, 1e-3f64..1e3), |(log_m, ip)| {
        let a = SchemeConfig::gsm(4, 2, 1 << log_m).with_mean_power(ip).alphabet();
        prop_assert!((a.mean() - ip).abs() <= 1e-12 * ip, "mean {} vs {}", a.mean(), ip);
        Ok(())
    })
}

fn bijection() -> Result<(), String> {
    check(96, link(10), |l| {
        let set = &l.set;
        let labels: HashSet<u32> = set.labels().iter().copied().collect();
        prop_assert_eq!(labels.len(), set.len());
        prop_assert!(labels.iter().all(|&b| (b as usize) < set.len()));
        for k in 0..set.len() {
            prop_assert_eq!(set.encode(set.decode(k)), Some(k));
        }
        let vectors: HashSet<Vec<u64>> = set.vectors().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
        prop_assert_eq!(vectors.len(), set.len());
        Ok(())
    })
}

fn noise_free_detection() -> Result<(), String> {
    check(64, link(9), |l| {
        prop_assume!(d_min(&l.channel, &l.set).unwrap() > 0.0);
        let det = MlDetector::new(&l.channel, &l.set, l.responsivity);
        for k in 0..l.set.len() {
            let y: Vec<f64> = l.channel.apply(l.set.vector(k)).iter().map(|v| v * l.responsivity).collect();
            let got = det.detect(&y);
            prop_assert_eq!(got.index, k);
            prop_assert_eq!(got.label, l.set.label(k));
        }
        Ok(())
    })
}

/// Every point with at least 100 errors: the bound is no lower than the
/// simulated BER, up to three standard errors of the estimate.
fn bound_dominates() -> Result<(), String> {
    let stopping = StoppingRule {
        min_bit_errors: 100,
        max_channel_uses: 60_000,
    };
    check(12, (link(6), any::<u64>()), |(l, seed)| {
        let snr: Vec<f64> = (0..12).map(|i| 20.0 + 4.0 * i as f64).collect();
        let points = SimPlan::new(l, snr, stopping, seed).unwrap().run_sweep().unwrap();
        for p in points.iter().filter(|p| p.bit_errors >= 100) {
            prop_assert!(
                p.ber_bound >= p.ber_sim - p.half_width(3.0),
                "snr {} sim {} bound {}",
                p.snr_db,
                p.ber_sim,
                p.ber_bound
            );
        }
        Ok(())
    })
}

fn detector(position: Vec3, fov_deg: f64) -> Detector {
    Detector::facing_up(position, 1e-4, fov_deg.to_radians(), 0.75).unwrap()
}

fn inverse_square() -> Result<(), String> {
    let s = (-2.0f64..2.0, -2.0f64..2.0, 0.5f64..3.0, 1.1f64..4.0, 10.0f64..80.0);
    check(256, s, |(dx, dy, dz, k, semi)| {
        let params = LambertianParams::from_degrees(semi).unwrap();
        let e = Emitter::facing_down(Vec3::new(2.5, 2.5, 3.0));
        let near = detector(Vec3::new(2.5 + dx, 2.5 + dy, 3.0 - dz), 90.0);
        let far = detector(Vec3::new(2.5 + k * dx, 2.5 + k * dy, 3.0 - k * dz), 90.0);
        let g1 = los_gain(&e, &near, &params).unwrap();
        let g2 = los_gain(&e, &far, &params).unwrap();
        prop_assert!(g1 > 0.0);
        prop_assert!((g1 / g2 - k * k).abs() <= 1e-9 * k * k, "ratio {} vs {}", g1 / g2, k * k);
        Ok(())
    })
}

fn fov_cutoff() -> Result<(), String> {
    check(256, (0.05f64..3.0, 0.3f64..2.5, 5.0f64..85.0), |(r, dz, fov)| {
        let params = LambertianParams::from_degrees(60.0).unwrap();
        let e = Emitter::facing_down(Vec3::new(2.5, 2.5, 3.0));
        let incidence = (r / dz).atan().to_degrees();
        prop_assume!((incidence - fov).abs() > 1e-6);
        let d = detector(Vec3::new(2.5 + r, 2.5, 3.0 - dz), fov);
        let g = los_gain(&e, &d, &params).unwrap();
        if incidence > fov {
            prop_assert_eq!(g, 0.0);
        } else {
            prop_assert!(g > 0.0);
        }
        Ok(())
    })
}

fn thread_independence() -> Result<(), String> {
    let stopping = StoppingRule {
        min_bit_errors: 300,
        max_channel_uses: 300_000,
    };
    check(6, (link(8), any::<u64>(), 1usize..=6), |(l, seed, threads)| {
        let plan = SimPlan::new(l, vec![25.0, 35.0, 45.0], stopping, seed).unwrap();
        let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let a = pool(1).install(|| plan.run_sweep().unwrap());
        let b = pool(threads + 1).install(|| plan.run_sweep().unwrap());
        prop_assert_eq!(a, b);
        Ok(())
    })
}
