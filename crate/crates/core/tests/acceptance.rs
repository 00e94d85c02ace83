//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! The scenario-level criteria share one sweep: three scenarios, group C
//! counts {10, 50, 90, 130, 170}, 20 seeds each, 60 s per run.

use std::collections::{BTreeMap, BTreeSet};
use std::process::{Command, ExitCode};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sidelink_sim::grid::{selection_window, PoolConfig, SlResource};
use sidelink_sim::metrics::{percentile, pir, prr, Metric, MetricsStore, PairStats, PirMode, ReceptionRecord};
use sidelink_sim::mrd::{GroupLedger, Member};
use sidelink_sim::radio::{pathloss_db, RadioEnv};
use sidelink_sim::rng::{self, SimRng};
use sidelink_sim::sps::{candidate_resources, draw_counter, maybe_reselect, select_grant, Reselection, SensingConfig, SensingRecord};
use sidelink_sim::{sweep, GroupId, Position, RunKey, Scenario, SimConfig, UeId};

const COUNTS: [usize; 5] = [10, 50, 90, 130, 170];
const SEEDS: u64 = 20;
const STRICT_GAP: f64 = 0.02;

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        println!("{} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
        if !ok {
            self.failed += 1;
        }
    }
}

// ---------------------------------------------------------------- MRD oracle

fn grid_points() -> Vec<Position> {
    let mut v = Vec::new();
    for y in 0..2 {
        for x in 0..3 {
            v.push(Position::new(x as f64 * 5.0, y as f64 * 5.0));
        }
    }
    v
}

fn all_resources() -> Vec<SlResource> {
    (0..3).flat_map(|s| (0..2).map(move |c| SlResource::new(s, c))).collect()
}

fn subsets<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let n = items.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| items[i]).collect())
        .collect()
}

/// Brute force: max over resources of the min distance to other holders,
/// lowest (slot, subchannel) among equal scores.
fn oracle(pos: &[Position], holding: &[Option<usize>], requester: usize, pool: &[SlResource]) -> SlResource {
    let mut scored: Vec<(f64, SlResource)> = pool
        .iter()
        .enumerate()
        .map(|(ri, r)| {
            let d = (0..pos.len())
                .filter(|&j| j != requester && holding[j] == Some(ri))
                .map(|j| ((pos[j].x - pos[requester].x).powi(2) + (pos[j].y - pos[requester].y).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            (d, *r)
        })
        .collect();
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    scored.retain(|s| s.0 == best);
    scored.iter().map(|s| s.1).min_by_key(|r| (r.slot, r.subchannel)).unwrap()
}

fn mrd_oracle(report: &mut Report) {
    let points = grid_points();
    let resources = all_resources();
    let (mut instances, mut mismatches) = (0u64, 0u64);
    let mut first_mismatch = String::new();

    for m in 1..=6 {
        for pos in subsets(&points, m) {
            for k in 1..=6 {
                for pool in subsets(&resources, k) {
                    // Every assignment of the members to a pool index or nothing.
                    let combos = (k + 1).pow(m as u32);
                    for code in 0..combos {
                        let mut c = code;
                        let holding: Vec<Option<usize>> = (0..m)
                            .map(|_| {
                                let v = c % (k + 1);
                                c /= k + 1;
                                (v < k).then_some(v)
                            })
                            .collect();
                        // The requester's own entry is released before choosing,
                        // so only instances where it holds nothing are distinct.
                        for requester in (0..m).filter(|&i| holding[i].is_none()) {
                            let members = pos
                                .iter()
                                .enumerate()
                                .map(|(i, &p)| Member { id: UeId(i), position: p })
                                .collect();
                            let mut ledger = GroupLedger::new(GroupId::A, members, 500, 0.2);
                            for (j, h) in holding.iter().enumerate() {
                                if let Some(ri) = h {
                                    ledger.mrd_assign(UeId(j), &[pool[*ri]], 0).unwrap();
                                }
                            }
                            let got = ledger.mrd_assign(UeId(requester), &pool, 0).unwrap();
                            let want = oracle(&pos, &holding, requester, &pool);
                            instances += 1;
                            if got != want {
                                if mismatches == 0 {
                                    first_mismatch = format!(", first at m={m} k={k} requester={requester}: {got:?} vs {want:?}");
                                }
                                mismatches += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    report.check(
        "mrd_oracle_equivalence",
        mismatches == 0,
        format!("{instances} instances, {mismatches} disagreements{first_mismatch}"),
    );
}

// ------------------------------------------------------------ scenario sweep

type Runs = BTreeMap<(Scenario, RunKey), MetricsStore>;

fn run_sweep() -> Runs {
    let seeds: Vec<u64> = (1..=SEEDS).collect();
    let mut out = BTreeMap::new();
    for scenario in Scenario::ALL {
        let base = SimConfig {
            scenario,
            ..SimConfig::default()
        };
        let runs = sweep(&base, &COUNTS, &seeds).expect("sweep");
        out.extend(runs.into_iter().map(|(k, v)| ((scenario, k), v)));
    }
    out
}

fn values(runs: &Runs, scenario: Scenario, count: usize, groups: &[GroupId], metric: Metric) -> Vec<f64> {
    let mut v: Vec<f64> = runs
        .iter()
        .filter(|((s, k), _)| *s == scenario && k.group_c_count == count)
        .flat_map(|(_, store)| store.samples(PirMode::PerPair))
        .filter(|s| s.metric == metric && groups.contains(&s.group))
        .map(|s| s.value)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn median(sorted: &[f64]) -> f64 {
    percentile(sorted, 50.0)
}

fn intra_group(report: &mut Report, runs: &Runs) {
    let s2: Vec<&MetricsStore> = runs.iter().filter(|((s, _), _)| *s == Scenario::S2AllScheduled).map(|(_, v)| v).collect();
    let total: u64 = s2.iter().map(|m| m.stats.same_group_cochannel).sum();
    let slots: u64 = s2.iter().map(|m| m.stats.slots).sum();
    report.check(
        "intra_group_collision_freedom",
        total == 0 && !s2.is_empty(),
        format!("{total} same-group co-channel transmissions over {} runs, {slots} slots", s2.len()),
    );
}

fn ordering(report: &mut Report, runs: &Runs) {
    const AB: [GroupId; 2] = [GroupId::A, GroupId::B];
    let mut ok = true;
    let mut detail = Vec::new();
    for count in COUNTS {
        let s2 = median(&values(runs, Scenario::S2AllScheduled, count, &AB, Metric::Prr));
        let s3 = median(&values(runs, Scenario::S3Mixed, count, &[GroupId::A], Metric::Prr));
        let s1 = median(&values(runs, Scenario::S1AllSensing, count, &[GroupId::A], Metric::Prr));
        let p2 = median(&values(runs, Scenario::S2AllScheduled, count, &AB, Metric::Pir));
        let p3 = median(&values(runs, Scenario::S3Mixed, count, &[GroupId::A], Metric::Pir));
        let p1 = median(&values(runs, Scenario::S1AllSensing, count, &[GroupId::A], Metric::Pir));
        let mut good = s2 >= s3 && s3 >= s1 && p2 <= p3 && p3 <= p1;
        if count == COUNTS[COUNTS.len() - 1] {
            good &= s2 - s1 >= STRICT_GAP;
        }
        ok &= good;
        detail.push(format!(
            "c={count} PRR {s2:.4}>={s3:.4}>={s1:.4} PIR {p2:.2}<={p3:.2}<={p1:.2}{}",
            if good { "" } else { " (violated)" }
        ));
    }
    report.check(
        "scenario_ordering",
        ok,
        format!("{}; required gap at c={} is {:.0} pp", detail.join("; "), COUNTS[4], STRICT_GAP * 100.0),
    );
}

fn crossover(report: &mut Report, runs: &Runs) {
    let count = COUNTS[COUNTS.len() - 1];
    let a = values(runs, Scenario::S3Mixed, count, &[GroupId::A], Metric::Prr);
    let b = values(runs, Scenario::S3Mixed, count, &[GroupId::B], Metric::Prr);
    let (p5, p95) = (percentile(&a, 5.0), percentile(&b, 95.0));
    report.check(
        "percentile_crossover",
        p5 >= p95,
        format!("c={count}: scheduled p5 {p5:.4}, sensing p95 {p95:.4}"),
    );
}

fn coexistence(report: &mut Report, runs: &Runs) {
    let mut ok = true;
    let mut detail = Vec::new();
    for count in COUNTS {
        let r3 = median(&values(runs, Scenario::S3Mixed, count, &[GroupId::B], Metric::Prr));
        let r1 = median(&values(runs, Scenario::S1AllSensing, count, &[GroupId::B], Metric::Prr));
        let p3 = median(&values(runs, Scenario::S3Mixed, count, &[GroupId::B], Metric::Pir));
        let p1 = median(&values(runs, Scenario::S1AllSensing, count, &[GroupId::B], Metric::Pir));
        let good = r3 >= r1 && p3 <= p1;
        ok &= good;
        detail.push(format!(
            "c={count} PRR {r3:.4} vs {r1:.4} PIR {p3:.3} vs {p1:.3}{}",
            if good { "" } else { " (violated)" }
        ));
    }
    report.check("coexistence_benefit", ok, detail.join("; "));
}

// ------------------------------------------------------------------ metrics

fn metric_formulas(report: &mut Report) {
    let rec = |i: u64, ok: bool| ReceptionRecord {
        packet_id: i,
        src: UeId(0),
        dst: UeId(1 + (i as usize % 2)),
        sent_at: i as f64 * 100.0,
        received_at: ok.then_some(i as f64 * 100.0 + 1.0),
    };
    let eight: Vec<ReceptionRecord> = (0..8).map(|i| rec(i, i != 2 && i != 5)).collect();
    let six: Vec<ReceptionRecord> = (0..6).map(|i| rec(i, i != 4)).collect();
    let prr_ok = prr(&eight) == Some(0.75) && prr(&six) == Some(5.0 / 6.0) && prr(&[]).is_none();

    let pir_ok = pir(&[100.0, 200.0, 400.0]) == Some(150.0) && pir(&[0.0, 100.0, 200.0, 300.0]) == Some(100.0);

    let mut pair = PairStats::default();
    for k in 0..600 {
        pair.record(Some(5.0 + 100.0 * k as f64));
    }
    let lossless = pair.pir() == Some(100.0) && pair.prr() == Some(1.0);

    let mut cfg = SimConfig {
        scenario: Scenario::S2AllScheduled,
        sim_time_s: 10.0,
        ..SimConfig::default()
    };
    cfg.group_c.count = 1;
    cfg.group_c.rate_kbps = 0.001;
    cfg.radio.shadowing_sigma_db = 0.0;
    let store = sidelink_sim::run(&cfg).expect("run");
    let engine_pir: BTreeSet<String> = store
        .ues
        .iter()
        .filter(|u| u.group == GroupId::A)
        .flat_map(|u| u.pairs.iter())
        .map(|p| format!("{:?}/{:?}", p.pir(), p.prr()))
        .collect();
    let engine_ok = engine_pir.len() == 1 && engine_pir.contains("Some(100.0)/Some(1.0)");

    report.check(
        "metric_formulas",
        prr_ok && pir_ok && lossless && engine_ok,
        format!(
            "PRR 6/8 and 5/6 {}, PIR 150 and 100 {}, lossless pair PIR {:?}, simulated lossless pairs {:?}",
            prr_ok, pir_ok, pair.pir(), engine_pir
        ),
    );
}

// -------------------------------------------------------------- determinism

fn determinism(report: &mut Report) {
    let dir = tempfile::tempdir().expect("tempdir");
    let bin = env!("CARGO_BIN_EXE_sidelink-sim");
    let outputs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let run = Command::new(bin)
                .args(["simulate", "--seed", "11", "--set", "scenario=scenario3", "--set", "sim_time_s=10"])
                .args(["--set", "group_c.count=90", "--out"])
                .arg(&out)
                .output()
                .expect("spawn simulate");
            assert!(run.status.success(), "simulate: {}", String::from_utf8_lossy(&run.stderr));
            std::fs::read(out.join("metrics.csv")).expect("metrics.csv")
        })
        .collect();
    report.check(
        "determinism",
        !outputs[0].is_empty() && outputs[0] == outputs[1],
        format!("two simulate runs, {} and {} bytes, identical: {}", outputs[0].len(), outputs[1].len(), outputs[0] == outputs[1]),
    );
}

// --------------------------------------------------------- sensing contracts

fn candidate_floor(rng: &mut SimRng) -> (bool, String) {
    let pool = PoolConfig::default();
    let sensing = SensingConfig::default();
    let rri = pool.rri();
    let mut worst = f64::INFINITY;
    for trial in 0..2000 {
        let now = 1000 + trial as u64;
        let n = rng.random_range(0..400);
        let records: Vec<SensingRecord> = (0..n)
            .map(|_| {
                let slot = now - rng.random_range(1..=100);
                SensingRecord {
                    slot,
                    resource: SlResource::new((slot % rri) as u32, rng.random_range(0..pool.num_subchannels)),
                    width: pool.subchannels_per_tb,
                    measured_rsrp: rng.random_range(-140.0..-30.0),
                    reserved_until: slot + rri * rng.random_range(1..=3),
                }
            })
            .collect();
        let threshold = rng.random_range(-140.0..-60.0);
        let set = candidate_resources(&records, selection_window(now, &pool), threshold, &pool, &sensing);
        worst = worst.min(set.candidates.len() as f64 / set.total as f64);
        if set.candidates.len() as f64 / (set.total as f64) < sensing.candidate_floor {
            return (false, format!("trial {trial} kept {}/{}", set.candidates.len(), set.total));
        }
    }
    (true, format!("2000 random record sets, smallest kept fraction {worst:.3}"))
}

fn counter_uniform(rng: &mut SimRng) -> (bool, String) {
    let sensing = SensingConfig::default();
    let bins = (sensing.counter_max - sensing.counter_min + 1) as usize;
    let n = 10_000;
    let mut hist = vec![0u32; bins];
    for _ in 0..n {
        let c = draw_counter(&sensing, rng);
        assert!((sensing.counter_min..=sensing.counter_max).contains(&c));
        hist[(c - sensing.counter_min) as usize] += 1;
    }
    let expected = n as f64 / bins as f64;
    let stat: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = ChiSquared::new((bins - 1) as f64).unwrap().sf(stat);
    (p > 0.01, format!("chi2 {stat:.2} on {} df, p {p:.3}", bins - 1))
}

fn keep_fraction(rng: &mut SimRng) -> (bool, String) {
    let pool = PoolConfig::default();
    let sensing = SensingConfig::default();
    let window = selection_window(1000, &pool);
    let set = candidate_resources(&[], window, sensing.rsrp_threshold_dbm, &pool, &sensing);
    let mut grant = select_grant(&set.candidates, rng, &pool, &sensing).unwrap();
    grant.reselection_counter = 0;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [sensing.prob_keep, 0.4, 0.8] {
        let kept = (0..10_000)
            .filter(|_| matches!(maybe_reselect(&grant, p, &sensing, rng), Reselection::Keep(_)))
            .count();
        let f = kept as f64 / 10_000.0;
        ok &= (f - p).abs() <= 0.02;
        parts.push(format!("prob_keep {p}: {f:.4}"));
    }
    (ok, parts.join(", "))
}

fn reselect_fraction(rng: &mut SimRng) -> (bool, String) {
    let pool = [SlResource::new(0, 0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [0.2, 0.5] {
        let mut ledger = GroupLedger::new(
            GroupId::A,
            vec![Member {
                id: UeId(0),
                position: Position::new(0.0, 0.0),
            }],
            1,
            p,
        );
        ledger.leader_bootstrap(&pool, 0).unwrap();
        let hits: usize = (1..=10_000).map(|now| ledger.tick_reselection(now, &pool, rng).len()).sum();
        let f = hits as f64 / 10_000.0;
        ok &= (f - p).abs() <= 0.02;
        parts.push(format!("p_reselect {p}: {f:.4}"));
    }
    (ok, parts.join(", "))
}

fn sensing_contracts(report: &mut Report) {
    let mut rng = rng::stream(2024, 99);
    let results = [
        candidate_floor(&mut rng),
        counter_uniform(&mut rng),
        keep_fraction(&mut rng),
        reselect_fraction(&mut rng),
    ];
    report.check(
        "sensing_statistical_contracts",
        results.iter().all(|r| r.0),
        results.iter().map(|r| r.1.as_str()).collect::<Vec<_>>().join("; "),
    );
}

// ---------------------------------------------------------------- radio

fn radio_invariants(report: &mut Report) {
    let mut rng = rng::stream(2024, 100);
    let f = 5.9;
    let mut mono = 0;
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(0.0..5000.0);
        let b: f64 = rng.random_range(0.0..5000.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if pathloss_db(lo, f) <= pathloss_db(hi, f) {
            mono += 1;
        }
    }

    let mut flips = 0;
    let mut checked = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(3..=8);
        let table: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-130.0..-40.0)).collect()).collect();
        let env = RadioEnv::from_table(&table, -102.45, 6.5);
        let rx = UeId(0);
        let wanted = UeId(1);
        let mut co: Vec<UeId> = (2..n).filter(|_| rng.random_bool(0.5)).map(UeId).collect();
        let extra = UeId(rng.random_range(2..n));
        if co.contains(&extra) {
            continue;
        }
        let before = env.decodes(rx, wanted, &co);
        co.push(extra);
        checked += 1;
        if !before && env.decodes(rx, wanted, &co) {
            flips += 1;
        }
    }
    report.check(
        "radio_invariants",
        mono == 10_000 && flips == 0,
        format!("pathloss monotone on {mono}/10000 pairs; {flips} success flips over {checked} slot configurations"),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };

    mrd_oracle(&mut report);
    metric_formulas(&mut report);
    determinism(&mut report);
    sensing_contracts(&mut report);
    radio_invariants(&mut report);

    let start = std::time::Instant::now();
    let runs = run_sweep();
    eprintln!("sweep: {} runs in {:.0} s", runs.len(), start.elapsed().as_secs_f64());
    intra_group(&mut report, &runs);
    ordering(&mut report, &runs);
    crossover(&mut report, &runs);
    coexistence(&mut report, &runs);

    println!("{} criteria failed", report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
