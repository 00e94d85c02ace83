use sidelink_sim::engine::{audience, build_topology, Simulation};
use sidelink_sim::metrics::{read_run_csv, PirMode};
use sidelink_sim::scenario::AllocMode;
use sidelink_sim::{run, GroupId, Scenario, SimConfig};

fn cfg(scenario: Scenario, count: usize, seed: u64, secs: f64) -> SimConfig {
    let mut c = SimConfig {
        scenario,
        seed,
        sim_time_s: secs,
        ..SimConfig::default()
    };
    c.group_c.count = count;
    c
}

#[test]
fn scheduled_groups_never_share_resources_at_full_density() {
    for seed in 1..=3 {
        let m = run(&cfg(Scenario::S2AllScheduled, 170, seed, 5.0)).unwrap();
        assert_eq!(m.stats.same_group_cochannel, 0, "seed {seed}");
        assert!(m.stats.transmissions > 0);
    }
}

#[test]
fn no_receiver_decodes_while_transmitting() {
    for scenario in Scenario::ALL {
        let mut sim = Simulation::new(&cfg(scenario, 90, 2, 3.0)).unwrap();
        sim.record_outcomes(true);
        let m = sim.run().unwrap();
        assert_eq!(m.stats.half_duplex_violations, 0, "{scenario:?}");
    }
}

#[test]
fn modes_follow_the_scenario() {
    for scenario in Scenario::ALL {
        let topo = build_topology(&cfg(scenario, 10, 1, 1.0)).unwrap();
        for g in GroupId::ALL {
            assert_eq!(topo.mode_of(g), scenario.mode_of(g));
        }
        let leaders = topo.leaders().count();
        let scheduled = [GroupId::A, GroupId::B]
            .iter()
            .filter(|&&g| scenario.mode_of(g) == AllocMode::Mode2dScheduled)
            .count();
        assert_eq!(leaders, scheduled, "{scenario:?}");
    }
}

#[test]
fn platoon_audience_is_the_platoon() {
    let c = cfg(Scenario::S3Mixed, 50, 1, 1.0);
    let topo = build_topology(&c).unwrap();
    let a: Vec<_> = topo.members(GroupId::A).map(|u| u.id).collect();
    for &ue in &a {
        let mut aud = audience(&topo, ue, c.metrics.eval_range_m);
        aud.push(ue);
        aud.sort();
        assert_eq!(aud, a);
    }
}

#[test]
fn per_run_csv_round_trips_through_samples() {
    let m = run(&cfg(Scenario::S3Mixed, 30, 5, 4.0)).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let rows = read_run_csv(buf.as_slice()).unwrap();
    for mode in [PirMode::PerPair, PirMode::PerUe] {
        let mut from_csv = sidelink_sim::metrics::samples_from_rows(&rows, mode).unwrap();
        let mut direct = m.samples(mode);
        let key = |s: &sidelink_sim::metrics::Sample| (s.group, s.metric, s.value.to_bits());
        from_csv.sort_by_key(key);
        direct.sort_by_key(key);
        assert_eq!(from_csv, direct);
    }
}

#[test]
fn ratios_and_intervals_are_in_range() {
    let m = run(&cfg(Scenario::S1AllSensing, 170, 3, 5.0)).unwrap();
    for u in &m.ues {
        if let Some(p) = u.prr() {
            assert!((0.0..=1.0).contains(&p));
        }
        for pair in &u.pairs {
            if let Some(pir) = pair.pir() {
                // A gap is never shorter than one slot.
                assert!(pir >= 1.0);
            }
        }
    }
    assert!(m.stats.packets_generated >= m.stats.packets_dropped);
}

#[test]
fn runs_depend_only_on_the_seed() {
    let a = run(&cfg(Scenario::S3Mixed, 50, 8, 3.0)).unwrap();
    let b = run(&cfg(Scenario::S3Mixed, 50, 8, 3.0)).unwrap();
    let c = run(&cfg(Scenario::S3Mixed, 50, 9, 3.0)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
