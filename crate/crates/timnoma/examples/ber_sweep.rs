//! BER versus SNR for every user, hybrid against the single-user TDMA
//! baseline, plus the effect of the near-member fraction `c` on the
//! four-user cell (the power split decides how fair the cell is: small `c`
//! separates the curves, `c = 0.03` pulls them together at high SNR).
//!
//! ```bash
//! cargo run --release --example ber_sweep [preset] [frames]
//! ```

use timnoma::harness::PowerConfig;
use timnoma::prelude::*;

fn print_ber_table(table: &ResultTable) {
    let users = table.meta.users;
    print!("{:>8}", "SNR dB");
    for u in 0..users {
        print!(" {:>11}", format!("hybrid u{}", u + 1));
    }
    for u in 0..users {
        print!(" {:>11}", format!("tdma u{}", u + 1));
    }
    println!();
    for snr_row in &table.snr_rows {
        print!("{:>8}", snr_row.snr_db);
        for u in 0..users {
            let row = table.user_row(snr_row.snr_db, u).unwrap();
            print!(" {:>11.3e}", row.ber_hybrid.unwrap());
        }
        for u in 0..users {
            let row = table.user_row(snr_row.snr_db, u).unwrap();
            print!(" {:>11.3e}", row.ber_tdma.unwrap());
        }
        println!();
    }
}

fn main() -> Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| PRESET_SISO_5U.into());
    let frames: u64 = std::env::args()
        .nth(2)
        .map(|s| s.parse().expect("frames must be an integer"))
        .unwrap_or(100);

    let mut config = SimConfig::for_preset(&preset)?;
    config.frames = frames;
    config.snr_grid_db = (0..=10).map(|i| 4.0 * i as f64).collect();

    println!("== {preset}, {frames} frames, scheme {} ==", config.power.tag());
    print_ber_table(&run_simulation(&config)?);

    if !config.scenario.is_siso() {
        // Fairness of the power split: per-user BER spread for two values
        // of the near-member fraction.
        for c in [0.01, 0.03] {
            let mut cfg = config.clone();
            cfg.power = PowerConfig::MimoSinr { c };
            cfg.legs = LegSet {
                hybrid: true,
                tdma: false,
            };
            println!("\n== {preset} with c = {c} (hybrid only) ==");
            let table = run_simulation(&cfg)?;
            print!("{:>8}", "SNR dB");
            for u in 0..table.meta.users {
                print!(" {:>11}", format!("user {}", u + 1));
            }
            println!(" {:>11}", "spread");
            for snr_row in &table.snr_rows {
                print!("{:>8}", snr_row.snr_db);
                let bers: Vec<f64> = (0..table.meta.users)
                    .map(|u| table.user_row(snr_row.snr_db, u).unwrap().ber_hybrid.unwrap())
                    .collect();
                for b in &bers {
                    print!(" {:>11.3e}", b);
                }
                let spread = bers.iter().cloned().fold(0.0, f64::max)
                    - bers.iter().cloned().fold(1.0, f64::min);
                println!(" {:>11.3e}", spread);
            }
        }
    }
    Ok(())
}
