//! Per-user transmit power under the three allocation schemes.
//!
//! All schemes spend a fixed budget `a^2` watts:
//!
//! * `siso-fixed` — `P_k = a^2 d_k^2 / sum_j d_j^2`; the budget is
//!   `sum_k P_k = a^2`.
//! * `mimo-rate` — group power follows the inverse-gain share
//!   `delta_t = (sum_{k in G_t} 1/gamma_k) / (sum_k 1/gamma_k)`, then each
//!   group's power is split between its members by a weight vector
//!   (nearest member first).
//! * `mimo-sinr` — powers chosen to equalize the SINR across users of the
//!   two-per-group cell, parameterized by the near-member fraction
//!   `c = k2/(k1+k2)`.
//!
//! MIMO powers are *per-antenna*: the scheme formulas carry an `a^2/N_t`
//! factor, so the radiated budget check is `N_t * sum_k P_k = a^2`. This is
//! the only convention under which the per-user formulas and the total-power
//! constraint hold simultaneously; `total_power` applies it.

use crate::error::{Error, Result};
use crate::topology::{sic_order, Scenario};

/// Relative tolerance used by the budget invariants; everything here is
/// closed-form, so 1e-9 is generous.
pub const BUDGET_REL_TOL: f64 = 1e-9;

/// Which allocation scheme produced a [`PowerAllocation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerScheme {
    SisoFixed,
    MimoRate,
    MimoSinr,
}

impl PowerScheme {
    /// Config-file tag for the scheme.
    pub fn tag(self) -> &'static str {
        match self {
            PowerScheme::SisoFixed => "siso-fixed",
            PowerScheme::MimoRate => "mimo-rate",
            PowerScheme::MimoSinr => "mimo-sinr",
        }
    }
}

/// How one group's power is split among its members (`mimo-rate` scheme).
#[derive(Debug, Clone, PartialEq)]
pub enum GroupSplit {
    /// Two-member group: the nearer member gets fraction `a_t`, the farther
    /// member `1 - a_t`.
    NearFraction(f64),
    /// General group: one weight per member, nearest to farthest, summing
    /// to 1.
    Weights(Vec<f64>),
}

/// Scheme parameters recorded alongside the powers.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitParams {
    /// `siso-fixed` has no free parameters.
    Fixed,
    /// `mimo-rate`: the group shares `delta_t` and the per-group member
    /// weights (nearest first).
    Rate {
        deltas: Vec<f64>,
        weights: Vec<Vec<f64>>,
    },
    /// `mimo-sinr`: near fraction `c` and the derived `k1`, `k2`.
    Sinr { c: f64, k1: f64, k2: f64 },
}

/// Per-user transmit powers plus the parameters that produced them.
///
/// Immutable; allocations are deterministic functions of
/// `(scenario, a, params)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    scheme: PowerScheme,
    per_user_power: Vec<f64>,
    group_power: Option<Vec<f64>>,
    amplitude: f64,
    tx_antennas: usize,
    params: SplitParams,
}

impl PowerAllocation {
    /// Scheme tag.
    pub fn scheme(&self) -> PowerScheme {
        self.scheme
    }

    /// Power of `user` in watts (per antenna for the MIMO schemes).
    pub fn power(&self, user: usize) -> f64 {
        self.per_user_power[user]
    }

    /// All per-user powers, indexed by user id.
    pub fn per_user_power(&self) -> &[f64] {
        &self.per_user_power
    }

    /// Group powers `P_{G_t}` (MIMO schemes only).
    pub fn group_power(&self) -> Option<&[f64]> {
        self.group_power.as_deref()
    }

    /// Budget amplitude `a` (so the budget is `a^2` watts).
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Scheme parameters.
    pub fn params(&self) -> &SplitParams {
        &self.params
    }

    /// Transmit antennas of the scenario this allocation was built for.
    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if !(a > 0.0) && a != 0.0 {
        return Err(Error::Power(format!("amplitude must be >= 0, got {a}")));
    }
    if a < 0.0 {
        return Err(Error::Power(format!("amplitude must be >= 0, got {a}")));
    }
    Ok(())
}

/// Fixed SISO allocation `P_k = a^2 d_k^2 / sum_j d_j^2`.
///
/// Only defined for single-antenna scenarios; the distance exponent here is
/// 2 regardless of the path-loss exponent.
pub fn allocate_siso(scenario: &Scenario, a: f64) -> Result<PowerAllocation> {
    check_amplitude(a)?;
    if !scenario.is_siso() {
        return Err(Error::Power(format!(
            "siso-fixed needs N_t = N_r = 1, scenario has N_t = {}, N_r = {}",
            scenario.tx_antennas(),
            scenario.rx_antennas()
        )));
    }
    let d2_sum: f64 = scenario.distances_km().iter().map(|d| d * d).sum();
    let per_user_power = scenario
        .distances_km()
        .iter()
        .map(|d| a * a * d * d / d2_sum)
        .collect();
    Ok(PowerAllocation {
        scheme: PowerScheme::SisoFixed,
        per_user_power,
        group_power: None,
        amplitude: a,
        tx_antennas: scenario.tx_antennas(),
        params: SplitParams::Fixed,
    })
}

fn require_mimo(scenario: &Scenario, scheme: &str) -> Result<()> {
    if scenario.is_siso() {
        return Err(Error::Power(format!(
            "{scheme} is a MIMO scheme; use siso-fixed for N_t = N_r = 1 cells"
        )));
    }
    Ok(())
}

/// Inverse-gain group shares `delta_t`, members split by `splits`.
///
/// Group power is `P_{G_t} = (a^2/N_t) * delta_t`. For a two-member group,
/// [`GroupSplit::NearFraction`] `a_t` gives the nearer member `a_t P_{G_t}`
/// and the farther member `(1 - a_t) P_{G_t}`; larger groups take an
/// explicit weight vector ordered nearest to farthest.
pub fn allocate_mimo_rate(
    scenario: &Scenario,
    a: f64,
    splits: &[GroupSplit],
) -> Result<PowerAllocation> {
    check_amplitude(a)?;
    require_mimo(scenario, "mimo-rate")?;
    let t = scenario.group_count();
    if splits.len() != t {
        return Err(Error::Power(format!(
            "expected one split per group ({t}), got {}",
            splits.len()
        )));
    }

    let inv_gain_total: f64 = (0..scenario.user_count())
        .map(|k| 1.0 / scenario.gain(k))
        .sum();
    let mut deltas = Vec::with_capacity(t);
    let mut group_power = Vec::with_capacity(t);
    let mut weights_per_group = Vec::with_capacity(t);
    let mut per_user_power = vec![0.0; scenario.user_count()];

    for g in 0..t {
        let inv_gain_group: f64 = scenario.members(g).iter().map(|&k| 1.0 / scenario.gain(k)).sum();
        let delta = inv_gain_group / inv_gain_total;
        let p_group = a * a / scenario.tx_antennas() as f64 * delta;

        // Nearest-to-farthest member order matches the weight order.
        let mut nearest_first = sic_order(scenario, g)?;
        nearest_first.reverse();

        let weights = match &splits[g] {
            GroupSplit::NearFraction(a_t) => {
                if !(0.0..=1.0).contains(a_t) {
                    return Err(Error::Power(format!(
                        "group {} split {a_t} is outside [0, 1]",
                        g + 1
                    )));
                }
                if nearest_first.len() != 2 {
                    return Err(Error::Power(format!(
                        "group {} has {} members; a scalar split only defines \
                         a two-member group, pass explicit weights",
                        g + 1,
                        nearest_first.len()
                    )));
                }
                vec![*a_t, 1.0 - *a_t]
            }
            GroupSplit::Weights(w) => {
                if w.len() != nearest_first.len() {
                    return Err(Error::Power(format!(
                        "group {} has {} members but {} weights",
                        g + 1,
                        nearest_first.len(),
                        w.len()
                    )));
                }
                if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::Power(format!(
                        "group {} weights must lie in [0, 1], got {w:?}",
                        g + 1
                    )));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Power(format!(
                        "group {} weights must sum to 1, got {sum}",
                        g + 1
                    )));
                }
                w.clone()
            }
        };

        for (&user, &w) in nearest_first.iter().zip(weights.iter()) {
            per_user_power[user] = w * p_group;
        }
        deltas.push(delta);
        group_power.push(p_group);
        weights_per_group.push(weights);
    }

    Ok(PowerAllocation {
        scheme: PowerScheme::MimoRate,
        per_user_power,
        group_power: Some(group_power),
        amplitude: a,
        tx_antennas: scenario.tx_antennas(),
        params: SplitParams::Rate {
            deltas,
            weights: weights_per_group,
        },
    })
}

/// SINR-equalizing allocation for cells with exactly two users per group.
///
/// With `far(t)` the farther member of group `t`,
/// `k1 + k2 = 1 / sum_t (1/gamma_{far(t)})`, `k2 = c (k1 + k2)`, and the
/// near/far members of group `t` get `(a^2/N_t) k2 / gamma_{far(t)}` and
/// `(a^2/N_t) k1 / gamma_{far(t)}` respectively. The formulas hard-code the
/// far members' gains, so the scheme is not defined for other group shapes.
pub fn allocate_mimo_sinr(scenario: &Scenario, a: f64, c: f64) -> Result<PowerAllocation> {
    check_amplitude(a)?;
    require_mimo(scenario, "mimo-sinr")?;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Power(format!(
            "near-member fraction c must lie in (0, 1), got {c}"
        )));
    }
    for g in 0..scenario.group_count() {
        if scenario.members(g).len() != 2 {
            return Err(Error::Power(format!(
                "mimo-sinr is only defined for exactly 2 users per group; \
                 group {} has {}",
                g + 1,
                scenario.members(g).len()
            )));
        }
    }

    let inv_far_gain_sum: f64 = (0..scenario.group_count())
        .map(|g| {
            let far = sic_order(scenario, g).expect("group index valid")[0];
            1.0 / scenario.gain(far)
        })
        .sum();
    let k_total = 1.0 / inv_far_gain_sum;
    let k2 = c * k_total;
    let k1 = (1.0 - c) * k_total;

    let scale = a * a / scenario.tx_antennas() as f64;
    let mut per_user_power = vec![0.0; scenario.user_count()];
    let mut group_power = Vec::with_capacity(scenario.group_count());
    for g in 0..scenario.group_count() {
        let order = sic_order(scenario, g)?;
        let (far, near) = (order[0], order[1]);
        let inv_far_gain = 1.0 / scenario.gain(far);
        per_user_power[near] = scale * k2 * inv_far_gain;
        per_user_power[far] = scale * k1 * inv_far_gain;
        group_power.push(per_user_power[near] + per_user_power[far]);
    }

    Ok(PowerAllocation {
        scheme: PowerScheme::MimoSinr,
        per_user_power,
        group_power: Some(group_power),
        amplitude: a,
        tx_antennas: scenario.tx_antennas(),
        params: SplitParams::Sinr { c, k1, k2 },
    })
}

/// The scheme's budget check value: `sum_k P_k` for `siso-fixed`,
/// `N_t * sum_k P_k` for the MIMO schemes. Equals `a^2` for every valid
/// allocation.
pub fn total_power(allocation: &PowerAllocation) -> f64 {
    let sum: f64 = allocation.per_user_power.iter().sum();
    match allocation.scheme {
        PowerScheme::SisoFixed => sum,
        PowerScheme::MimoRate | PowerScheme::MimoSinr => allocation.tx_antennas as f64 * sum,
    }
}
