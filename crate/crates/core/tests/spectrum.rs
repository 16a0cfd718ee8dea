use kgband::config::default_experiment;
use kgband::spectrum::{
    cluster_bands, feature_moments, generate_scenario, load_sweeps, read_sweeps, save_sweeps,
    smooth_rss, write_sweeps, SweepRecord,
};
use kgband::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN: &str = "t,band_0,band_1\n\
0.0000000000000000e0,-5.0500000000000000e1,1.0000000000000001e-1\n\
5.0000000000000000e-1,-6.2831853071795862e0,-1.2345678901234568e-300\n";

fn golden_sweeps() -> Vec<SweepRecord> {
    vec![
        SweepRecord {
            t: 0.0,
            rss: vec![-50.5, 0.1],
        },
        SweepRecord {
            t: 0.5,
            rss: vec![-std::f64::consts::TAU, -1.2345678901234567e-300],
        },
    ]
}

#[test]
fn sweep_file_matches_golden_text() {
    let mut out = Vec::new();
    write_sweeps(&mut out, &golden_sweeps()).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), GOLDEN);
    assert_eq!(read_sweeps(GOLDEN.as_bytes()).unwrap(), golden_sweeps());
}

#[test]
fn sweep_file_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweeps.csv");
    let mut cfg = default_experiment().scenario;
    cfg.seed = 12;
    let sweeps = generate_scenario(&cfg).unwrap().sweeps;
    save_sweeps(&path, &sweeps).unwrap();
    assert_eq!(load_sweeps(&path).unwrap(), sweeps);
}

#[test]
fn empty_and_short_rows() {
    assert!(read_sweeps("".as_bytes()).unwrap().is_empty());
    let short = "t,band_0,band_1\n0,1,2\n1,2\n";
    assert!(matches!(
        read_sweeps(short.as_bytes()),
        Err(Error::Parse { line: 3, .. })
    ));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_sweeps(&dir.path().join("missing.csv")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn geometry_ignores_the_seed_and_noise_follows_it() {
    let mut cfg = default_experiment().scenario;
    let a = generate_scenario(&cfg).unwrap();
    assert_eq!(a, generate_scenario(&cfg).unwrap());
    cfg.seed += 1;
    let b = generate_scenario(&cfg).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_ne!(a.sweeps, b.sweeps);
}

#[test]
fn smoothing_reduces_variance_of_iid_noise() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sweeps: Vec<SweepRecord> = (0..200)
            .map(|k| SweepRecord {
                t: k as f64,
                rss: (0..4).map(|_| StandardNormal.sample(&mut rng)).collect(),
            })
            .collect();
        let before = feature_moments(&sweeps).unwrap();
        for window in [3, 5, 9] {
            let after = feature_moments(&smooth_rss(&sweeps, window).unwrap()).unwrap();
            for (a, b) in after.variance.iter().zip(&before.variance) {
                assert!(a <= b, "seed {seed}, window {window}");
            }
        }
    }
}

proptest! {
    #[test]
    fn clusters_are_contiguous_and_cover_everything(m in 1usize..500, i in 1usize..50) {
        prop_assume!(i <= m);
        let groups = cluster_bands(m, i).unwrap();
        prop_assert_eq!(groups.len(), i);
        let flat: Vec<usize> = groups.iter().flatten().copied().collect();
        prop_assert_eq!(flat, (0..m).collect::<Vec<_>>());
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn any_finite_values_round_trip(rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 3), 0..20)) {
        let sweeps: Vec<SweepRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(k, rss)| SweepRecord { t: k as f64 * 0.25, rss })
            .collect();
        let mut out = Vec::new();
        write_sweeps(&mut out, &sweeps).unwrap();
        prop_assert_eq!(read_sweeps(out.as_slice()).unwrap(), sweeps);
    }

    #[test]
    fn moments_ignore_sweep_order(values in prop::collection::vec(-100.0f64..100.0, 2..30), seed in any::<u64>()) {
        let sweeps: Vec<SweepRecord> = values.iter().map(|v| SweepRecord { t: 0.0, rss: vec![*v] }).collect();
        let mut shuffled = sweeps.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let a = feature_moments(&sweeps).unwrap();
        let b = feature_moments(&shuffled).unwrap();
        prop_assert!((a.mean[0] - b.mean[0]).abs() <= 1e-12);
        prop_assert!((a.variance[0] - b.variance[0]).abs() <= 1e-9 * (1.0 + a.variance[0]));
    }
}
