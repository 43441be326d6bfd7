mod common;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rvc_core::harness;
use rvc_core::workloads::{self, Record, Trace};
use rvc_core::{DramConfig, EnergyModel, Mode, OracleState, PhaseModel, Row, TrackerOptions};

use common::naive_flips;

/// Hammer-heavy random trace around a few hot rows, with occasional
/// window markers.
fn random_trace(rng: &mut ChaCha8Rng, cfg: &DramConfig, len: usize, marker_rate: f64) -> Trace {
    let rows = cfg.rows_per_bank();
    let hot: Vec<u32> = (0..3).map(|_| rng.random_range(0..rows)).collect();
    let records = (0..len)
        .map(|_| {
            if rng.random_bool(marker_rate) {
                Record::Window
            } else if rng.random_bool(0.8) {
                let h = hot[rng.random_range(0..hot.len())];
                let off: i64 = rng.random_range(-3..=3);
                Record::Act(Row((i64::from(h) + off).clamp(0, i64::from(rows) - 1) as u32))
            } else {
                Record::Act(Row(rng.random_range(0..rows)))
            }
        })
        .collect();
    Trace {
        meta: Default::default(),
        records,
    }
}

fn configs() -> Vec<DramConfig> {
    let mut v = Vec::new();
    for phase in [PhaseModel::EpochBoundary, PhaseModel::Staggered] {
        for (rows, t_rh, n, w) in [(16, 20, 1, 100), (24, 30, 2, 64), (40, 50, 3, 777), (12, 9, 2, 9)] {
            v.push(DramConfig::new(rows, t_rh, n, w, phase).unwrap());
        }
    }
    v
}

#[test]
fn unmitigated_oracle_matches_naive_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for cfg in configs() {
        for _ in 0..6 {
            let trace = random_trace(&mut rng, &cfg, 3000, 0.002);
            let got: Vec<(u64, u32)> = harness::run_unmitigated(&cfg, &trace)
                .unwrap()
                .iter()
                .map(|f| (f.act_seq, f.row.0))
                .collect();
            assert_eq!(got, naive_flips(&cfg, &trace, &HashMap::new()), "{}", cfg.summary());
        }
    }
}

#[test]
fn mitigated_oracle_matches_naive_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for cfg in configs() {
        for mode in Mode::ALL {
            // a loose threshold so that flips and refreshes both happen
            let opts = TrackerOptions {
                threshold_override: Some(cfg.t_rh() / 2 + 3),
                ..Default::default()
            };
            let trace = random_trace(&mut rng, &cfg, 3000, 0.002);
            let r = harness::run(&cfg, mode, &trace, &EnergyModel::default(), opts).unwrap();
            let refreshes: HashMap<u64, Vec<Row>> =
                r.actions.iter().map(|a| (a.act_seq, a.refreshed.clone())).collect();
            let got: Vec<(u64, u32)> = r.flips.iter().map(|f| (f.act_seq, f.row.0)).collect();
            assert_eq!(got, naive_flips(&cfg, &trace, &refreshes), "{mode} {}", cfg.summary());
        }
    }
}

#[test]
fn long_trace_matches_naive_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = DramConfig::new(32, 60, 2, 2500, PhaseModel::Staggered).unwrap();
    let trace = random_trace(&mut rng, &cfg, 10_000, 0.0);
    let got: Vec<(u64, u32)> = harness::run_unmitigated(&cfg, &trace)
        .unwrap()
        .iter()
        .map(|f| (f.act_seq, f.row.0))
        .collect();
    assert!(!got.is_empty());
    assert_eq!(got, naive_flips(&cfg, &trace, &HashMap::new()));
}

#[test]
fn refreshing_every_neighbour_after_each_act_never_flips() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for cfg in configs() {
        let trace = random_trace(&mut rng, &cfg, 5000, 0.001);
        // aggressor tracker at T = 1 refreshes the whole blast radius on every activation
        let opts = TrackerOptions {
            threshold_override: Some(1),
            ..Default::default()
        };
        let r = harness::run(&cfg, Mode::Aggressor, &trace, &EnergyModel::default(), opts).unwrap();
        assert!(r.is_secure());
        assert_eq!(r.mitigations_issued, trace.acts());

        let mut o = OracleState::new(&cfg);
        for (i, row) in trace.act_rows().enumerate() {
            o.act(row, i as u64 + 1).unwrap();
            o.refresh(&rvc_core::dram::neighbors(row, &cfg).unwrap()).unwrap();
            assert_eq!(o.max_disturbance(), 0);
        }
    }
}

#[test]
fn common_victim_flip_is_exact() {
    let cfg = DramConfig::new(1024, 500, 2, 65_536, PhaseModel::EpochBoundary).unwrap();
    let trace = workloads::gen_common_victim(Row(500), 125, &cfg).unwrap();
    let flips = harness::run_unmitigated(&cfg, &trace).unwrap();
    assert_eq!(flips.len(), 1);
    assert_eq!((flips[0].act_seq, flips[0].row, flips[0].disturbance), (500, Row(500), 500));
    // one activation short of the attack is harmless
    let mut short = trace.clone();
    short.records.pop();
    assert!(harness::run_unmitigated(&cfg, &short).unwrap().is_empty());
}

#[test]
fn flips_are_recorded_once_per_excursion() {
    let cfg = DramConfig::new(64, 10, 1, 1000, PhaseModel::EpochBoundary).unwrap();
    let mut o = OracleState::new(&cfg);
    for s in 1..=25 {
        o.act(Row(30), s).unwrap();
    }
    // rows 29 and 31 each cross 10 once and keep accumulating
    assert_eq!(o.flips().len(), 2);
    assert_eq!(o.disturbance(Row(31)), 25);
    o.refresh(&[Row(31)]).unwrap();
    for s in 26..=35 {
        o.act(Row(30), s).unwrap();
    }
    assert_eq!(o.flips().len(), 3);
    assert_eq!(o.flips()[2].row, Row(31));
    assert_eq!(o.flips()[2].act_seq, 35);
}
