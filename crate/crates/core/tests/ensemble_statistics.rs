use hom_cascade::dynamics::SectorMassTracker;
use hom_cascade::operators::{CascadeModel, Detector, SystemParams};
use hom_cascade::oracle::first_click_density;
use hom_cascade::stats::{binomial_stderr, same_fraction_from_clicks, summarize, HistogramSpec};
use hom_cascade::trajectory::{read_clicks_csv, run_ensemble, EnsembleConfig, JumpSampling};

fn params() -> SystemParams {
    SystemParams::symmetric(0.25, 0.5)
}

#[test]
fn first_click_histogram_matches_oracle_density() {
    let n = 10_000;
    let cfg = EnsembleConfig {
        n_traj: n,
        jump_sampling: JumpSampling::NormThreshold,
        seed: 77,
        ..EnsembleConfig::default()
    };
    let ens = run_ensemble(&params(), &cfg).unwrap();
    let model = CascadeModel::new(params()).unwrap();
    let width = 0.5;
    let bins = 40;
    for d in Detector::BOTH {
        let mut counts = vec![0u64; bins];
        for r in &ens.results {
            if let Some(c) = r.clicks.first() {
                let i = (c.time / width).floor() as usize;
                if c.detector == d && i < bins {
                    counts[i] += 1;
                }
            }
        }
        for (i, &count) in counts.iter().enumerate() {
            // Simpson over the bin.
            let (a, b) = (i as f64 * width, (i + 1) as f64 * width);
            let f = |t: f64| first_click_density(&model, d, t).unwrap();
            let p = (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
            let expected = n as f64 * p;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!(
                (count as f64 - expected).abs() <= 3.0 * sigma + 1.0,
                "detector {d}, bin {i}: {count} vs {expected:.1} (sigma {sigma:.1})"
            );
        }
    }
}

#[test]
fn completion_grows_with_cutoff() {
    let model = CascadeModel::new(params()).unwrap();
    let mut tracker = SectorMassTracker::new(&model, 0.01).unwrap();
    let mut last = 0.0;
    for t_max in [5.0, 20.0, 60.0] {
        while tracker.time() < t_max - 1e-9 {
            tracker.step();
        }
        let expected = 1.0 - tracker.undetected_mass();
        let cfg = EnsembleConfig {
            n_traj: 4000,
            t_max: Some(t_max),
            jump_sampling: JumpSampling::NormThreshold,
            ..EnsembleConfig::default()
        };
        let ens = run_ensemble(&params(), &cfg).unwrap();
        let complete = ens.results.iter().filter(|r| r.is_complete()).count() as f64 / 4000.0;
        let se = binomial_stderr(expected, 4000).max(1.0 / 4000.0);
        assert!((complete - expected).abs() < 3.0 * se + 1e-3, "t_max {t_max}: {complete} vs {expected}");
        assert!(complete >= last);
        last = complete;
    }
    assert!(last > 0.99);
}

#[test]
fn different_seeds_agree_statistically() {
    let run = |seed| {
        let cfg = EnsembleConfig {
            n_traj: 4000,
            seed,
            ..EnsembleConfig::default()
        };
        summarize(&run_ensemble(&params(), &cfg).unwrap().results, &HistogramSpec::default()).unwrap()
    };
    let (a, b) = (run(1), run(2));
    let se = (a.binomial_stderr.powi(2) + b.binomial_stderr.powi(2)).sqrt();
    assert!((a.f_same - b.f_same).abs() < 3.0 * se);
}

#[test]
fn raw_export_round_trip_preserves_fraction() {
    let cfg = EnsembleConfig {
        n_traj: 1500,
        ..EnsembleConfig::default()
    };
    let ens = run_ensemble(&params(), &cfg).unwrap();
    let summary = summarize(&ens.results, &HistogramSpec::default()).unwrap();
    let mut buf = Vec::new();
    ens.write_clicks_csv(&mut buf, &["round trip".into()]).unwrap();
    let back = read_clicks_csv(buf.as_slice()).unwrap();
    assert_eq!(same_fraction_from_clicks(&back), Some(summary.f_same));
    assert!(ens.results.iter().all(|r| r.clicks.len() <= 2));
}

#[test]
fn step_probability_stays_below_one() {
    // Largest total click rate along the no-jump path bounds (Π_a+Π_b)·dt.
    for g in [0.1, 0.25, 2.0, 5.0] {
        let model = CascadeModel::new(SystemParams::symmetric(g, 0.5)).unwrap();
        let worst = (0..2000)
            .map(|i| {
                let t = i as f64 * 0.05;
                first_click_density(&model, Detector::A, t).unwrap() + first_click_density(&model, Detector::B, t).unwrap()
            })
            .fold(0.0, f64::max);
        assert!(worst * 0.1 <= 1.0, "g={g}: {worst}");
    }
}
