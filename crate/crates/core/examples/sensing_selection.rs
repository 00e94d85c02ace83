//! One sensing UE: decode neighbours' reservations from the slot ledger,
//! exclude what they hold, then draw a semi-persistent grant.

use sidelink_sim::grid::{selection_window, PoolConfig, SlResource};
use sidelink_sim::ledger::{SlotLedger, SlotRecord, TxEntry};
use sidelink_sim::radio::{RadioConfig, RadioEnv};
use sidelink_sim::rng;
use sidelink_sim::scenario::{Role, UeDesc};
use sidelink_sim::sps::{candidate_resources, select_grant, sense, SensingConfig};
use sidelink_sim::{GroupId, Position, UeId};

fn main() -> sidelink_sim::Result<()> {
    let pool = PoolConfig::default();
    let sensing = SensingConfig::default();
    let radio = RadioConfig {
        shadowing_sigma_db: 0.0,
        ..RadioConfig::default()
    };

    // UE0 senses; UE1..UE6 sit 10 to 60 m away and reserve resources.
    let ues: Vec<UeDesc> = (0..7)
        .map(|k| UeDesc {
            id: UeId(k),
            position: Position::new(k as f64 * 10.0, 0.0),
            group: GroupId::C,
            role: Role::Independent,
        })
        .collect();
    let env = RadioEnv::new(
        &ues,
        &radio.budget(),
        pool.tb_bandwidth_hz(),
        radio.capture_threshold_db,
        &mut rng::stream(1, rng::STREAM_SHADOWING),
    );

    let now = 1000;
    let mut ledger = SlotLedger::new(sensing.t0_slots as usize + 1);
    for slot in now - 100..now {
        let txs = (1..7)
            .filter(|&k| slot % 50 == 5 * k as u64)
            .map(|k| TxEntry {
                tx: UeId(k),
                resource: SlResource::new((slot % 50) as u32, 3 * k as u32),
                width: 1,
                packet_id: slot,
                reservation: true,
            })
            .collect();
        ledger.push(SlotRecord {
            slot,
            txs,
            outcomes: Vec::new(),
        });
    }

    let records = sense(UeId(0), &ledger, now, sensing.t0_slots, pool.reservation_period_slots, &env);
    println!("decoded {} reservations", records.len());
    for r in records.iter().take(6) {
        println!(
            "  slot {} subchannel {} rsrp {:.1} dBm until {}",
            r.slot, r.resource.subchannel, r.measured_rsrp, r.reserved_until
        );
    }

    let window = selection_window(now, &pool);
    let set = candidate_resources(&records, window, sensing.rsrp_threshold_dbm, &pool, &sensing);
    println!(
        "window [{}, {}]: {} of {} resources remain at threshold {} dBm",
        window.start,
        window.end,
        set.candidates.len(),
        set.total,
        set.threshold_dbm
    );

    let grant = select_grant(&set.candidates, &mut rng::ue_stream(1, 0), &pool, &sensing)?;
    println!(
        "grant: first slot {} subchannel {}, counter {}, retransmissions {:?}",
        grant.first_slot, grant.resource.subchannel, grant.reselection_counter, grant.retx
    );
    Ok(())
}
