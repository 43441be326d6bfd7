use rvc_core::dram::{threshold_aggressor, threshold_rvc};
use rvc_core::harness::{self, CompareOptions, Improvement, SweepSpec, TraceFamily};
use rvc_core::workloads::{self, Record};
use rvc_core::{report, DramConfig, Energy, EnergyModel, Mode, PhaseModel, Row, TrackerOptions};

fn cfg(t_rh: u64, n: u32, phase: PhaseModel) -> DramConfig {
    DramConfig::new(65_536, t_rh, n, 65_536, phase).unwrap()
}

#[test]
fn decoy_golden_counts() {
    let c = cfg(500, 2, PhaseModel::EpochBoundary);
    let trace = workloads::gen_decoy(Row(1000), 495, 5, &c).unwrap();
    let e = EnergyModel::default();
    let agg = harness::run(&c, Mode::Aggressor, &trace, &e, Default::default()).unwrap();
    assert_eq!(agg.threshold, 63);
    assert_eq!((agg.mitigations_issued, agg.rows_refreshed), (7, 28));
    let seqs: Vec<u64> = agg.actions.iter().map(|a| a.act_seq).collect();
    assert_eq!(seqs, [63, 126, 189, 252, 315, 378, 441]);

    // at t_rh = 500 the victim tracker triggers once, when the lead pushes every
    // neighbour to 250
    let rvc = harness::run(&c, Mode::Rvc, &trace, &e, Default::default()).unwrap();
    assert_eq!((rvc.mitigations_issued, rvc.rows_refreshed), (1, 4));
    assert_eq!(rvc.actions[0].act_seq, 250);

    let log = report::action_log_csv(&[], &[("decoy".into(), agg)]);
    assert_eq!(log.lines().nth(2), Some("63,aggressor,1000,1111,998;999;1001;1002"));
}

#[test]
fn empty_trace_is_secure_and_zero() {
    let c = cfg(500, 2, PhaseModel::Staggered);
    for mode in Mode::ALL {
        let r = harness::run(&c, mode, &Default::default(), &EnergyModel::default(), Default::default()).unwrap();
        assert_eq!((r.acts, r.mitigations_issued, r.rows_refreshed), (0, 0, 0));
        assert_eq!(r.total_energy, Energy::ZERO);
        assert!(r.is_secure());
    }
    let c = harness::compare(&c, &[("empty".into(), Default::default())], &EnergyModel::default(), Default::default()).unwrap();
    assert_eq!(c.mean.refreshes, Improvement::Percent(0.0));
    assert_eq!(c.mean.total_energy, Improvement::Percent(0.0));
}

#[test]
fn trace_validation_errors_propagate() {
    let c = DramConfig::new(128, 100, 2, 1000, PhaseModel::EpochBoundary).unwrap();
    let bad = workloads::parse_trace("A 5\nA 128\n").unwrap();
    assert!(harness::run(&c, Mode::Rvc, &bad, &EnergyModel::default(), Default::default()).is_err());
    assert!(harness::run_unmitigated(&c, &bad).is_err());
}

#[test]
fn rvc_never_refreshes_more_on_common_victim_family() {
    for t_rh in [100u64, 500, 1000, 5000] {
        for n in [1u32, 2, 4, 8] {
            for phase in [PhaseModel::EpochBoundary, PhaseModel::Staggered] {
                let c = cfg(t_rh, n, phase);
                let traces = TraceFamily::CommonVictim.instantiate(&c).unwrap();
                let r = harness::compare(&c, &traces, &EnergyModel::default(), Default::default()).unwrap();
                for t in &r.traces {
                    assert!(t.rvc.rows_refreshed <= t.baseline.rows_refreshed, "t_rh={t_rh} n={n} {}", t.trace);
                    assert!(t.rvc.is_secure() && t.baseline.is_secure());
                }
            }
        }
    }
}

#[test]
fn refresh_improvement_grows_with_blast_radius_on_common_victim_family() {
    for t_rh in [500u64, 1000, 5000] {
        let mut last = f64::NEG_INFINITY;
        for n in [1u32, 2, 4, 8] {
            let c = cfg(t_rh, n, PhaseModel::EpochBoundary);
            let traces = TraceFamily::CommonVictim.instantiate(&c).unwrap();
            let r = harness::compare(&c, &traces, &EnergyModel::default(), Default::default()).unwrap();
            let pct = r.mean.refreshes.percent().unwrap();
            assert!(pct >= last, "t_rh={t_rh}: n={n} gives {pct} after {last}");
            last = pct;
        }
    }
}

#[test]
fn single_cell_sweep_equals_compare() {
    let energy = EnergyModel::default();
    let families = vec![TraceFamily::Golden, TraceFamily::Zipf { seed: 5, length: 5000 }];
    let spec = SweepSpec {
        t_rh: vec![1000],
        blast_radius: vec![4],
        rows_per_bank: 65_536,
        window_acts: 65_536,
        phase_model: PhaseModel::Staggered,
        families: families.clone(),
        options: CompareOptions::default(),
    };
    let s = harness::sweep(&spec, &energy);
    assert_eq!(s.cells.len(), 1);
    assert!(s.skipped.is_empty());
    let c = cfg(1000, 4, PhaseModel::Staggered);
    let mut traces = Vec::new();
    for f in &families {
        for (name, t) in f.instantiate(&c).unwrap() {
            traces.push((format!("{}/{name}", f.name()), t));
        }
    }
    let direct = harness::compare(&c, &traces, &energy, CompareOptions::default()).unwrap();
    assert_eq!(s.cells[0].report, direct);
    assert_eq!(report::sweep_csv(&[], &s), report::comparison_csv(&[], &direct));
}

#[test]
fn sweep_reports_invalid_cells_in_order() {
    let spec = SweepSpec {
        t_rh: vec![16, 500],
        blast_radius: vec![8, 1],
        rows_per_bank: 65_536,
        window_acts: 65_536,
        phase_model: PhaseModel::EpochBoundary,
        families: vec![TraceFamily::Golden],
        options: CompareOptions::default(),
    };
    let s = harness::sweep(&spec, &EnergyModel::default());
    let cells: Vec<(u64, u32)> = s.cells.iter().map(|c| (c.t_rh, c.blast_radius)).collect();
    assert_eq!(cells, [(16, 1), (500, 8), (500, 1)]);
    assert_eq!(s.skipped.len(), 1);
    assert_eq!((s.skipped[0].0, s.skipped[0].1), (16, 8));
    let csv = report::sweep_csv(&[], &s);
    assert!(csv.ends_with(&format!("# skipped trh=16 n=8: {}\n", s.skipped[0].2)));
}

#[test]
fn per_mode_overrides_only_touch_their_tracker() {
    let c = cfg(500, 2, PhaseModel::EpochBoundary);
    let trace = workloads::gen_decoy(Row(1000), 495, 5, &c).unwrap();
    let opts = CompareOptions {
        rvc_threshold: Some(500),
        ..Default::default()
    };
    let r = harness::compare(&c, &[("decoy".into(), trace)], &EnergyModel::default(), opts).unwrap();
    assert_eq!(r.traces[0].baseline.threshold, 63);
    assert_eq!(r.traces[0].rvc.threshold, 500);
    assert_eq!(r.traces[0].improvement.refreshes, Improvement::Percent(100.0));
}

#[test]
fn unbounded_regression_when_baseline_is_zero() {
    let c = cfg(500, 2, PhaseModel::EpochBoundary);
    let trace = workloads::gen_single_sided(Row(1000), 10, &c).unwrap();
    let opts = CompareOptions {
        aggressor_threshold: Some(1000),
        rvc_threshold: Some(1),
        ..Default::default()
    };
    let r = harness::compare(&c, &[("x".into(), trace)], &EnergyModel::default(), opts).unwrap();
    assert_eq!(r.traces[0].improvement.refreshes, Improvement::UnboundedRegression);
    assert_eq!(r.mean.refreshes, Improvement::UnboundedRegression);
    assert!(report::comparison_csv(&[], &r).contains("unbounded_regression"));
}

#[test]
fn insecure_witness_names_the_common_victim() {
    let c = cfg(500, 2, PhaseModel::EpochBoundary);
    let w = harness::insecure_threshold_witness(&c, &EnergyModel::default(), Default::default())
        .unwrap()
        .unwrap();
    assert_eq!(w.threshold, 250);
    assert_eq!(w.per_row_count, 125);
    assert_eq!(w.report.flips[0].row, Row(32_768));
    // the correctly derived threshold survives the same trace
    let r = harness::run(&c, Mode::Aggressor, &w.trace, &EnergyModel::default(), Default::default()).unwrap();
    assert!(r.is_secure());
}

#[test]
fn loose_override_is_caught_by_the_oracle() {
    for phase in [PhaseModel::EpochBoundary, PhaseModel::Staggered] {
        let c = cfg(500, 2, phase);
        let opts = TrackerOptions {
            threshold_override: Some(500),
            ..Default::default()
        };
        let flipped = workloads::adversarial_suite(&c)
            .unwrap()
            .iter()
            .filter(|(_, t)| !harness::run(&c, Mode::Rvc, t, &EnergyModel::default(), opts).unwrap().is_secure())
            .count();
        assert!(flipped >= 1);
    }
}

/// With an odd `t_rh` the derived thresholds satisfy `2(T - 1) < t_rh` with
/// equality one step away: `T - 1` increments before a boundary plus the `T`
/// needed to trigger after it reach `t_rh` on the triggering activation,
/// before its refresh lands.
#[test]
fn odd_trh_leaves_no_margin_for_the_triggering_activation() {
    let c = cfg(501, 2, PhaseModel::Staggered);
    let t = threshold_rvc(501).unwrap();
    assert_eq!(t, 251);
    let victim = Row(32_768);
    let mut trace = workloads::gen_straddle(victim, t, &c).unwrap();
    let r = harness::run(&c, Mode::Rvc, &trace, &EnergyModel::default(), Default::default()).unwrap();
    assert!(r.is_secure());
    trace.records.push(Record::Act(Row(victim.0 + 1)));
    let r = harness::run(&c, Mode::Rvc, &trace, &EnergyModel::default(), Default::default()).unwrap();
    assert_eq!(r.flips.len(), 1);
    assert_eq!((r.flips[0].row, r.flips[0].disturbance), (victim, 501));

    // the same construction stays below the limit at t_rh = 500
    let c = cfg(500, 2, PhaseModel::Staggered);
    let mut trace = workloads::gen_straddle(victim, threshold_rvc(500).unwrap(), &c).unwrap();
    trace.records.push(Record::Act(Row(victim.0 + 1)));
    let r = harness::run(&c, Mode::Rvc, &trace, &EnergyModel::default(), Default::default()).unwrap();
    assert!(r.is_secure());
    assert_eq!(r.actions.iter().filter(|a| a.refreshed.contains(&victim)).count(), 1);

    // aggressor counting has the same gap when t_rh = 1 (mod 4n)
    let c = cfg(505, 2, PhaseModel::Staggered);
    let t_agg = threshold_aggressor(505, 2).unwrap();
    assert_eq!(8 * (t_agg - 1), 504);
    let mut trace = workloads::gen_straddle_common_victim(victim, t_agg - 1, &c).unwrap();
    trace.records.push(Record::Act(Row(victim.0 - 2)));
    let r = harness::run(&c, Mode::Aggressor, &trace, &EnergyModel::default(), Default::default()).unwrap();
    assert_eq!(r.flips.len(), 1);
    assert_eq!(r.flips[0].row, victim);
}
