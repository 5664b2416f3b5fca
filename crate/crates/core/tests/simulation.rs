use std::path::Path;

use bidtrack::auction::AuctionRound;
use bidtrack::dynamics::TargetState;
use bidtrack::filter::ParticleCloud;
use bidtrack::payment::settle;
use bidtrack::sim::{aggregate, run_campaign, run_trial, write_outputs, Policy, Scenario, Setup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn small(sc: Scenario) -> Scenario {
    Scenario {
        trials: 4,
        particles: 400,
        ..sc
    }
}

fn lifetime_config() -> Scenario {
    Scenario::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/lifetime.json")).unwrap()
}

#[test]
fn zero_bandwidth_buys_nothing() {
    let sc = small(Scenario {
        bandwidth: 0,
        ..Scenario::default()
    });
    let tr = run_trial(&sc, 0).unwrap();
    assert_eq!(tr.steps.len(), sc.steps);
    for s in &tr.steps {
        assert_eq!(s.allocation.total(), 0);
        assert!(s.payments.iter().all(|&p| p == 0.0));
        assert_eq!(s.fc_utility_without_prior, 0.0);
    }
    // without data the error grows with the prior spread and process noise
    let c = run_campaign(&Scenario { trials: 20, ..sc }).unwrap();
    assert!(c.aggregate.last().unwrap().mse > c.aggregate[0].mse);
}

#[test]
fn trials_are_reproducible_and_independent() {
    let sc = small(Scenario::default());
    let a = run_trial(&sc, 2).unwrap();
    let b = run_trial(&sc, 2).unwrap();
    assert_eq!(a, b);
    let campaign = run_campaign(&sc).unwrap();
    // the same trial inside a parallel campaign is unchanged
    assert_eq!(campaign.trials[2], a);
    assert_ne!(campaign.trials[1].steps, a.steps);
}

#[test]
fn single_trial_campaign_reduces_to_the_trial() {
    let sc = Scenario {
        trials: 1,
        ..small(Scenario::default())
    };
    let c = run_campaign(&sc).unwrap();
    let tr = run_trial(&sc, 0).unwrap();
    for (a, s) in c.aggregate.iter().zip(&tr.steps) {
        assert_eq!(a.mse, s.squared_error);
        assert_eq!(a.fc_utility, s.fc_utility);
        assert_eq!(a.total_bits, f64::from(s.allocation.total()));
        assert_eq!(a.total_payment, s.total_payment());
    }
}

#[test]
fn step_records_respect_invariants() {
    for sc in [small(Scenario::default()), small(lifetime_config())] {
        let c = run_campaign(&sc).unwrap();
        for tr in &c.trials {
            let mut prev: Vec<f64> = tr.sensors.iter().map(|s| s.initial_energy).collect();
            for s in &tr.steps {
                assert!(s.allocation.total() <= sc.bandwidth);
                assert!(s.payments.iter().all(|&p| p >= 0.0));
                assert!(s.fc_utility_without_prior <= s.fc_utility);
                for (i, e) in s.residual_energy.iter().enumerate() {
                    assert!(*e >= 0.0);
                    assert!(*e <= prev[i]);
                    // a winner is paid at least its true cost
                    let cost = tr.sensors[i].valuation * (prev[i] - e);
                    assert!(s.payments[i] >= cost * (1.0 - 1e-12), "payment below cost");
                }
                prev = s.residual_energy.clone();
            }
        }
    }
}

#[test]
fn aggregate_matches_recomputation_from_csv() {
    let sc = small(Scenario::default());
    let c = run_campaign(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&c, dir.path()).unwrap();

    let mut sums = vec![0.0; sc.steps];
    let mut rd = csv::Reader::from_path(dir.path().join("steps.csv")).unwrap();
    for rec in rd.records() {
        let r = rec.unwrap();
        let step: usize = r[1].parse().unwrap();
        sums[step - 1] += r[10].parse::<f64>().unwrap();
    }
    let mut rd = csv::Reader::from_path(dir.path().join("aggregate.csv")).unwrap();
    let emitted: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(emitted.len(), sc.steps);
    for (s, e) in sums.iter().zip(&emitted) {
        assert_eq!(s / sc.trials as f64, *e);
    }
    assert_eq!(aggregate(&c.trials, 25), c.aggregate);
}

#[test]
fn data_utility_declines_as_information_accumulates() {
    let sc = Scenario {
        trials: 30,
        particles: 1000,
        ..Scenario::default()
    };
    let c = run_campaign(&sc).unwrap();
    let pts: Vec<(f64, f64)> = c
        .aggregate
        .iter()
        .filter(|a| a.step >= 5)
        .map(|a| (a.step as f64, a.fc_utility_without_prior))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!(slope < 0.0, "slope {slope}");
}

#[test]
fn fim_baseline_tracks_best() {
    let base = Scenario {
        trials: 30,
        ..lifetime_config()
    };
    let mse = |policy, k| {
        run_campaign(&Scenario {
            policy,
            energy_exponent: k,
            ..base.clone()
        })
        .unwrap()
        .mean_mse(1, base.steps)
    };
    let fim = mse(Policy::Fim, 0.0);
    for k in [0.0, 1.0, 3.0] {
        assert!(fim <= mse(Policy::Auction, k), "k={k}");
    }
}

#[test]
fn fewer_sensors_bought_when_target_sits_on_a_sensor() {
    let sc = Scenario::default();
    let setup = Setup::new(&sc).unwrap();
    let spread = Normal::new(0.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut active = |cx: f64, cy: f64| {
        let cloud = ParticleCloud::uniform(
            (0..2000)
                .map(|_| TargetState::new(cx + spread.sample(&mut rng), cy + spread.sample(&mut rng), 2.0, 2.0))
                .collect(),
        )
        .unwrap();
        let round = AuctionRound::prepare(
            &cloud,
            &setup.sensors,
            &setup.valuation,
            sc.bandwidth,
            &setup.kappa,
            &setup.signal,
        )
        .unwrap();
        let reports = vec![0.5; setup.sensors.len()];
        settle(&round, &reports).unwrap().allocation.active_sensors()
    };
    // grid sensors sit at cell centres (-20, -10, 0, 10, 20)
    let on = active(0.0, 0.0);
    let between = active(5.0, 5.0);
    assert!(on < between, "on a sensor {on}, between sensors {between}");
}

#[test]
fn config_errors_are_reported() {
    assert!(Scenario::from_json("{\"particles\": 0}").is_err());
    assert!(Scenario::from_json("not json").is_err());
    assert!(Scenario::load("/nonexistent/config.json").is_err());
}
