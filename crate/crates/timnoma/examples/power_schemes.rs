//! The three power-allocation schemes side by side under a 40 W budget:
//! the fixed distance-squared SISO split, the inverse-gain group shares of
//! the rate-driven MIMO scheme, and the SINR-equalizing scheme with its
//! near-member fraction `c`.
//!
//! ```bash
//! cargo run --example power_schemes
//! ```

use timnoma::powerctl::SplitParams;
use timnoma::prelude::*;

fn print_powers(label: &str, scenario: &Scenario, alloc: &PowerAllocation) {
    println!("-- {label} --");
    for user in 0..scenario.user_count() {
        println!(
            "  user {}: P = {:>10.5} W  (d = {} km)",
            user + 1,
            alloc.power(user),
            scenario.distance_km(user)
        );
    }
    if let Some(groups) = alloc.group_power() {
        for (g, p) in groups.iter().enumerate() {
            println!("  group {}: P_G = {:>9.5} W", g + 1, p);
        }
    }
    println!("  budget check: {:.9} W", total_power(alloc));
}

fn main() -> Result<()> {
    let a = 40f64.sqrt();

    let siso = Scenario::preset(PRESET_SISO_5U)?;
    print_powers("siso-fixed (P_k ~ d_k^2)", &siso, &allocate_siso(&siso, a)?);

    let mimo = Scenario::preset(PRESET_MIMO_4U)?;
    let rate = allocate_mimo_rate(
        &mimo,
        a,
        &[GroupSplit::NearFraction(0.3), GroupSplit::NearFraction(0.3)],
    )?;
    if let SplitParams::Rate { deltas, .. } = rate.params() {
        println!("\nmimo-rate group shares: delta = {deltas:?}");
    }
    print_powers("mimo-rate (a_t = 0.3)", &mimo, &rate);

    println!();
    for c in [0.01, 0.0255, 0.03] {
        let sinr = allocate_mimo_sinr(&mimo, a, c)?;
        if let SplitParams::Sinr { k1, k2, .. } = sinr.params() {
            println!("mimo-sinr c = {c}: k1 = {k1:.6}, k2 = {k2:.6}");
        }
        print_powers(&format!("mimo-sinr (c = {c})"), &mimo, &sinr);
        println!();
    }
    Ok(())
}
