//! Maximum reuse distance allocation: first on a tiny pool where reuse is
//! forced, then the leader of an 8-vehicle platoon on the default pool.

use sidelink_sim::grid::{pool_resources, PoolConfig, SlResource};
use sidelink_sim::mrd::{GroupLedger, GroupSchedConfig, GroupScheduler, Member};
use sidelink_sim::rng;
use sidelink_sim::{GroupId, Position, UeId};

fn platoon(n: usize, gap: f64) -> Vec<Member> {
    (0..n)
        .map(|k| Member {
            id: UeId(k),
            position: Position::new(k as f64 * gap, 0.0),
        })
        .collect()
}

fn main() -> sidelink_sim::Result<()> {
    // Six members, three resources: every resource ends up shared and the
    // rule pushes sharers as far apart as the platoon allows.
    let pool = [SlResource::new(0, 0), SlResource::new(0, 1), SlResource::new(1, 0)];
    let mut ledger = GroupLedger::new(GroupId::A, platoon(6, 5.0), 500, 0.2);
    for k in 0..6 {
        let id = UeId(k);
        let scores: Vec<String> = pool.iter().map(|r| format!("{:.0}", ledger.score(id, r))).collect();
        let r = ledger.mrd_assign(id, &pool, 0)?;
        println!("UE{k} scores [{}] -> slot {} subchannel {}", scores.join(", "), r.slot, r.subchannel);
    }
    for (r, holders) in ledger.assignment() {
        println!("  ({}, {}) held by {:?}", r.slot, r.subchannel, holders);
    }

    // Engine-style leader: own subchannel block, one slot per transmission.
    let pool_cfg = PoolConfig::default();
    let cfg = GroupSchedConfig::default();
    let mut leader = GroupScheduler::new(GroupLedger::new(GroupId::A, platoon(8, 5.0), 500, 0.2), &pool_cfg, &cfg)?;
    leader.bootstrap(0)?;
    println!(
        "\ngroup A subpool: {} of {} resources",
        leader.pool().len(),
        pool_resources(&pool_cfg).len()
    );
    for k in 0..8 {
        let g = leader.grant(UeId(k)).expect("bootstrapped");
        let res: Vec<String> = g.resources().map(|r| format!("({},{})", r.slot, r.subchannel)).collect();
        println!("  UE{k}: {}  expires at slot {}", res.join(" "), g.expires_at);
    }

    let mut rng = rng::group_stream(1, 0);
    let mut changes = 0;
    for now in 500..5000 {
        changes += leader.tick(now, &mut rng, |_| true).len();
    }
    println!("reselections over 4.5 s: {changes}");
    Ok(())
}
