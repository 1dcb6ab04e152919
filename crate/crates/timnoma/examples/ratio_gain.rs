//! Sum-rate gain of the hybrid scheme over TDMA across an SNR sweep.
//!
//! Runs both example cells, prints the ratio of the hybrid sum rate to the
//! TDMA time-shared rate per SNR point, and reports where the gain first
//! reaches 100% (ratio 2). Pass a frame count as the first argument to trade
//! accuracy for speed (default 200).
//!
//! ```bash
//! cargo run --release --example ratio_gain [frames]
//! ```

use timnoma::prelude::*;

fn main() -> Result<()> {
    let frames: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("frames must be an integer"))
        .unwrap_or(200);

    for preset in [PRESET_SISO_5U, PRESET_MIMO_4U] {
        let mut config = SimConfig::for_preset(preset)?;
        config.frames = frames;
        config.snr_grid_db = (0..=20).map(|i| 2.0 * i as f64).collect();

        println!("== {preset} ({frames} frames, scheme {}) ==", config.power.tag());
        println!("{:>8} {:>12} {:>12} {:>8}", "SNR dB", "hybrid sum", "tdma avg", "ratio");

        let table = run_simulation(&config)?;
        let mut crossing = None;
        for row in &table.snr_rows {
            let ratio = row.ratio.unwrap();
            println!(
                "{:>8} {:>12.4} {:>12.4} {:>8.4}",
                row.snr_db,
                row.sum_rate_hybrid.unwrap(),
                row.tdma_average_rate.unwrap(),
                ratio
            );
            if crossing.is_none() && ratio > 2.0 {
                crossing = Some(row.snr_db);
            }
        }
        match crossing {
            Some(snr) => println!("ratio first exceeds 2 at {snr} dB\n"),
            None => println!("ratio never exceeds 2 on this grid\n"),
        }
    }
    Ok(())
}
