//! Per-user and network rates versus SNR: the nearer a user, the better its
//! rate; the hybrid sum rate overtakes the TDMA time-shared average as SNR
//! grows. Also dumps one per-draw analytic snapshot to show the quantities
//! behind the averages.
//!
//! ```bash
//! cargo run --release --example rate_sweep [preset] [frames]
//! ```

use timnoma::prelude::*;

fn main() -> Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| PRESET_MIMO_4U.into());
    let frames: u64 = std::env::args()
        .nth(2)
        .map(|s| s.parse().expect("frames must be an integer"))
        .unwrap_or(200);

    let mut config = SimConfig::for_preset(&preset)?;
    config.frames = frames;
    config.snr_grid_db = (0..=8).map(|i| 5.0 * i as f64).collect();

    // One draw under the microscope first.
    let scenario = &config.scenario;
    let allocation = config.allocation()?;
    let precoders = config.precoders()?;
    let channel = draw_channel(scenario, 42);
    let sigma2 = config.sigma2_for_snr(20.0);
    let record = rate_record(scenario, &allocation, &channel, &precoders, 20.0, sigma2)?;
    println!("single draw at 20 dB (seed 42):");
    println!("{}", RateRecord::csv_header());
    for row in record.csv_rows() {
        println!("{row}");
    }

    println!("\n== {preset}, {frames} frames, scheme {} ==", config.power.tag());
    let table = run_simulation(&config)?;
    print!("{:>8}", "SNR dB");
    for u in 0..table.meta.users {
        print!(" {:>9}", format!("user {}", u + 1));
    }
    println!(" {:>9} {:>9} {:>7}", "sum", "tdma avg", "ratio");
    for snr_row in &table.snr_rows {
        print!("{:>8}", snr_row.snr_db);
        for u in 0..table.meta.users {
            let row = table.user_row(snr_row.snr_db, u).unwrap();
            print!(" {:>9.4}", row.rate_hybrid.unwrap());
        }
        println!(
            " {:>9.4} {:>9.4} {:>7.3}",
            snr_row.sum_rate_hybrid.unwrap(),
            snr_row.tdma_average_rate.unwrap(),
            snr_row.ratio.unwrap()
        );
    }

    println!(
        "\nnetwork degrees of freedom: {}",
        dof_total(
            scenario.user_count(),
            scenario.rx_antennas(),
            scenario.group_count()
        )
    );
    Ok(())
}
