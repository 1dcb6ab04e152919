//! Tour of cell scenarios: the two presets, their path-loss gains, group
//! structure and SIC decoding orders, plus a custom cell and the validation
//! errors malformed configs produce.
//!
//! ```bash
//! cargo run --example scenarios
//! ```

use timnoma::prelude::*;
use timnoma::topology::ScenarioConfig;

fn describe(name: &str, scenario: &Scenario) {
    println!("== {name} ==");
    println!(
        "K = {}, T = {}, N_t = {}, N_r = {}, L = {}, radius {} km, exponent {}",
        scenario.user_count(),
        scenario.group_count(),
        scenario.tx_antennas(),
        scenario.rx_antennas(),
        scenario.streams_per_user(),
        scenario.radius_km(),
        scenario.path_loss_exponent(),
    );
    println!("{:>6} {:>10} {:>14} {:>7}", "user", "d (km)", "gain 1/d^n", "group");
    for user in 0..scenario.user_count() {
        println!(
            "{:>6} {:>10} {:>14.6} {:>7}",
            user + 1,
            scenario.distance_km(user),
            scenario.gain(user),
            scenario.group_of(user) + 1,
        );
    }
    for group in 0..scenario.group_count() {
        let order: Vec<String> = sic_order(scenario, group)
            .unwrap()
            .iter()
            .map(|&u| (u + 1).to_string())
            .collect();
        println!(
            "group {} decodes farthest-first: [{}]",
            group + 1,
            order.join(", ")
        );
    }
    println!();
}

fn main() -> Result<()> {
    describe(PRESET_MIMO_4U, &Scenario::preset(PRESET_MIMO_4U)?);
    describe(PRESET_SISO_5U, &Scenario::preset(PRESET_SISO_5U)?);

    // A custom 6-user cell with three users per group.
    let custom = build_scenario(&ScenarioConfig {
        time_slots: 2,
        tx_antennas: 2,
        rx_antennas: 2,
        radius_km: 6.5,
        distances_km: vec![0.8, 1.6, 2.4, 3.2, 4.0, 4.8],
        path_loss_exponent: 3.0,
        groups: vec![vec![1, 3, 5], vec![2, 4, 6]],
        noise_power: 1.0,
    })?;
    describe("custom 6-user cell", &custom);

    // Group assignments must interleave the distance order.
    let bad = build_scenario(&ScenarioConfig {
        time_slots: 2,
        tx_antennas: 2,
        rx_antennas: 2,
        radius_km: 5.0,
        distances_km: vec![1.0, 2.0, 3.0, 4.0],
        path_loss_exponent: 3.0,
        groups: vec![vec![1, 2], vec![3, 4]],
        noise_power: 1.0,
    });
    println!("adjacent users in one group -> {}", bad.unwrap_err());
    Ok(())
}
