//! How per-UE samples from several seeds become one percentile row, and
//! why that differs from averaging per-seed percentiles.

use sidelink_sim::metrics::{aggregate_samples, percentile, pir, Metric, PercentileSeries, Sample};
use sidelink_sim::GroupId;

fn main() -> sidelink_sim::Result<()> {
    let seed_a = [0.91, 0.95, 0.97, 0.99];
    let seed_b = [0.80, 0.99, 1.0, 1.0];

    let samples: Vec<Sample> = seed_a
        .iter()
        .chain(&seed_b)
        .map(|&v| Sample::new(90, GroupId::B, Metric::Prr, v))
        .collect();
    let series: PercentileSeries = aggregate_samples(&samples);
    let row = &series.rows[0];
    println!("pooled: p5 {:.4}  p50 {:.4}  p95 {:.4}  (n = {})", row.p5, row.p50, row.p95, row.n_samples);

    let median = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        percentile(&s, 50.0)
    };
    println!(
        "mean of per-seed medians: {:.4}",
        (median(&seed_a) + median(&seed_b)) / 2.0
    );

    println!("PIR of receptions at 100, 200, 400 ms: {:?}", pir(&[100.0, 200.0, 400.0]));

    let mut out = Vec::new();
    series.write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
