//! Received power, SNR and capture decisions for a single sidelink at
//! increasing distance, then the same link with a co-channel interferer.

use sidelink_sim::grid::PoolConfig;
use sidelink_sim::radio::{decode, noise_dbm, pathloss_db, rx_power_at, slot_sinr, RadioConfig, RxState};
use sidelink_sim::Position;

fn main() {
    let radio = RadioConfig::default();
    let budget = radio.budget();
    let noise = noise_dbm(&budget, PoolConfig::default().tb_bandwidth_hz());
    println!("noise over one subchannel: {noise:.2} dBm");
    println!("{:>8} {:>10} {:>10} {:>9} {:>8}", "dist_m", "PL_dB", "rx_dBm", "SNR_dB", "decoded");

    let tx = Position::new(0.0, 0.0);
    for d in [5.0, 35.0, 100.0, 300.0, 1000.0, 2000.0, 20_000.0] {
        let rx = rx_power_at(&budget, tx, Position::new(d, 0.0));
        let snr = slot_sinr(rx, &[], noise);
        let (ok, _) = decode(snr, radio.capture_threshold_db, RxState::Listening);
        println!(
            "{d:>8.0} {:>10.2} {rx:>10.2} {snr:>9.2} {ok:>8}",
            pathloss_db(d, budget.carrier_freq_ghz)
        );
    }

    // Platoon neighbour 20 m ahead, background vehicle on the next lane at
    // a varying distance using the same subchannel.
    println!("\nwanted at 20 m, interferer at x:");
    let wanted = rx_power_at(&budget, tx, Position::new(20.0, 0.0));
    for x in [10.0, 30.0, 45.0, 60.0, 120.0] {
        let interferer = rx_power_at(&budget, Position::new(x, 4.0), tx);
        let sinr = slot_sinr(wanted, &[interferer], noise);
        let (ok, cause) = decode(sinr, radio.capture_threshold_db, RxState::Listening);
        println!("  x={x:>5.0} m  SINR={sinr:>6.2} dB  {cause:?} ({ok})");
    }
}
