//! Closed-form rates, TDMA baselines, DoF accounting and BER.
//!
//! Per-draw evaluators are exposed separately from any averaging so tests can
//! pin exact values; the harness realizes the expectations by Monte-Carlo
//! averaging over channel draws. All rates are in bits/s/Hz per time slot
//! (base-2 logarithms) and carry the `1/T` prefactor of the `T`-slot block
//! structure.
//!
//! A receiver peels every farther group member and treats the nearer ones as
//! noise, so the interference power `rho_{t(k)}` entering user `k`'s rate
//! sums over the *nearer* members of its group; it is exactly zero for each
//! group's nearest member and grows as `k` moves outward.

use nalgebra::DMatrix;

use crate::airlink::{ChannelRealization, Cx};
use crate::codec::{effective_channel, PrecodingSet};
use crate::error::{Error, Result};
use crate::powerctl::PowerAllocation;
use crate::topology::Scenario;

fn complex_identity(n: usize) -> DMatrix<Cx> {
    DMatrix::<Cx>::identity(n, n)
}

/// Noise-treated intra-group interference power `rho_{t(k)}` at receiver
/// `k`: the summed post-TIM power of every nearer group member.
///
/// Each nearer member `j` contributes `P_j gamma_k` times the energy of the
/// receiver's effective channel probed with a unit vector. When the stream
/// count equals the slot count the probe is the group's precoding vector
/// (this reproduces the worked four-user cell, where
/// `rho_1 = ||sqrt(gamma_3) h_3 v_1||^2 P_1`); otherwise the isotropic
/// average `||M_k||_F^2 / L` is used.
pub fn intra_group_interference(
    scenario: &Scenario,
    allocation: &PowerAllocation,
    channel: &ChannelRealization,
    precoders: &PrecodingSet,
    user: usize,
) -> f64 {
    let m = effective_channel(precoders, channel, user);
    let group = scenario.group_of(user);
    let streams = scenario.streams_per_user();
    let probe_energy = if streams == scenario.group_count() {
        let v = precoders.vector(group).map(|x| Cx::new(x, 0.0));
        (&m * v).norm_squared()
    } else {
        m.norm_squared() / streams as f64
    };
    scenario
        .nearer_group_members(user)
        .iter()
        .map(|&j| allocation.power(j) * scenario.gain(user) * probe_energy)
        .sum()
}

/// Per-draw hybrid rate of `user` in a multi-antenna cell:
/// `(1/T) log2 det(I + P_k gamma_k / (rho + sigma2) * M_k M_k^H)`.
///
/// `P_k` is the per-antenna allocation (the schemes already carry the
/// `a^2/N_t` factor), which makes this expression specialize exactly to the
/// worked four-user cell's per-user forms.
pub fn user_rate_mimo(
    scenario: &Scenario,
    allocation: &PowerAllocation,
    channel: &ChannelRealization,
    precoders: &PrecodingSet,
    user: usize,
    sigma2: f64,
) -> Result<f64> {
    if user >= scenario.user_count() {
        return Err(Error::Scenario(format!("user id {user} out of range")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    let rho = intra_group_interference(scenario, allocation, channel, precoders, user);
    let m = effective_channel(precoders, channel, user);
    let coeff = allocation.power(user) * scenario.gain(user) / (rho + sigma2);
    let gram = &m * m.adjoint() * Cx::new(coeff, 0.0);
    let det = (complex_identity(m.nrows()) + gram).determinant();
    Ok(det.re.max(1.0).log2() / scenario.group_count() as f64)
}

/// Per-draw hybrid rate of `user` in a single-antenna cell:
/// `(1/T) log2(1 + P_k |v_t^T H_k v_t|^2 / (sum_nearer |H_k v_t|^2 P_j + sigma2))`.
///
/// `P_k` equals `P_T d_k^2 / D` under the fixed SISO allocation.
pub fn user_rate_siso(
    scenario: &Scenario,
    allocation: &PowerAllocation,
    channel: &ChannelRealization,
    precoders: &PrecodingSet,
    user: usize,
    sigma2: f64,
) -> Result<f64> {
    if !scenario.is_siso() {
        return Err(Error::Scenario(
            "user_rate_siso needs a single-antenna scenario".into(),
        ));
    }
    if user >= scenario.user_count() {
        return Err(Error::Scenario(format!("user id {user} out of range")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    let group = scenario.group_of(user);
    let v = precoders.vector(group).map(|x| Cx::new(x, 0.0));
    let h = channel.transfer(user);

    let signal_gain = (v.adjoint() * h * &v)[(0, 0)].norm_sqr();
    let interference: f64 = scenario
        .nearer_group_members(user)
        .iter()
        .map(|&j| (h * &v).norm_squared() * allocation.power(j))
        .sum();
    let snr = allocation.power(user) * signal_gain / (interference + sigma2);
    Ok((1.0 + snr).log2() / scenario.group_count() as f64)
}

/// Per-draw TDMA baseline rate of `user` with the full budget `p_total`.
///
/// Multi-antenna cells use
/// `(1/T) log2 det(I + p_total gamma_k / (N_t sigma2) * h_k h_k^H)`;
/// single-antenna cells keep the precoded form
/// `(1/T) log2(1 + p_total |H_k v_t|^2 / sigma2)`.
pub fn tdma_rate(
    scenario: &Scenario,
    channel: &ChannelRealization,
    precoders: &PrecodingSet,
    user: usize,
    p_total: f64,
    sigma2: f64,
) -> Result<f64> {
    if user >= scenario.user_count() {
        return Err(Error::Scenario(format!("user id {user} out of range")));
    }
    if !(p_total >= 0.0) || !(sigma2 > 0.0) {
        return Err(Error::Domain(format!(
            "need p_total >= 0 and sigma2 > 0, got {p_total} and {sigma2}"
        )));
    }
    let t = scenario.group_count() as f64;
    if scenario.is_siso() {
        let v = precoders
            .vector(scenario.group_of(user))
            .map(|x| Cx::new(x, 0.0));
        let gain = (channel.transfer(user) * v).norm_squared();
        Ok((1.0 + p_total * gain / sigma2).log2() / t)
    } else {
        let h = channel.fading(user);
        let coeff = p_total * scenario.gain(user) / (scenario.tx_antennas() as f64 * sigma2);
        let gram = h * h.adjoint() * Cx::new(coeff, 0.0);
        let det = (complex_identity(h.nrows()) + gram).determinant();
        Ok(det.re.max(1.0).log2() / t)
    }
}

/// Total network degrees of freedom `K N_r / T`.
pub fn dof_total(users: usize, rx_antennas: usize, groups: usize) -> f64 {
    users as f64 * rx_antennas as f64 / groups as f64
}

/// Sum-rate gain of the hybrid scheme over TDMA; errors on a non-positive
/// TDMA rate.
pub fn sum_rate_ratio(hybrid_sum: f64, tdma_sum: f64) -> Result<f64> {
    if !(tdma_sum > 0.0) {
        return Err(Error::Domain(format!(
            "TDMA sum rate must be positive, got {tdma_sum}"
        )));
    }
    Ok(hybrid_sum / tdma_sum)
}

/// Bit error rate: Hamming distance over length.
pub fn ber(tx_bits: &[bool], rx_bits: &[bool]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Dimension(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if tx_bits.is_empty() {
        return Err(Error::Domain("cannot compute BER of empty streams".into()));
    }
    let errors = tx_bits
        .iter()
        .zip(rx_bits.iter())
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// Analytic snapshot of one channel draw at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRecord {
    /// Operating point in dB.
    pub snr_db: f64,
    /// Per-user hybrid rate.
    pub per_user_rate: Vec<f64>,
    /// Hybrid sum rate.
    pub sum_rate: f64,
    /// Per-user single-user baseline rates.
    pub tdma_rates: Vec<f64>,
    /// Mean of `tdma_rates`; the throughput of a TDMA system time-sharing
    /// all `K` users.
    pub tdma_average: f64,
    /// Hybrid sum rate over the TDMA network rate (`tdma_average`).
    pub ratio: f64,
    /// Intra-group interference power per user.
    pub interference_power: Vec<f64>,
    /// Effective channel `M_k` per user.
    pub effective_channel: Vec<DMatrix<Cx>>,
    /// `D = sum_k d_k^2`.
    pub distance_norm: f64,
}

impl RateRecord {
    /// CSV header matching [`RateRecord::csv_rows`].
    pub fn csv_header() -> &'static str {
        "snr_db,user,rate,tdma_rate,interference_power,effective_channel_fro,\
         sum_rate,tdma_average,ratio,distance_norm"
    }

    /// One CSV row per user at this operating point.
    pub fn csv_rows(&self) -> Vec<String> {
        (0..self.per_user_rate.len())
            .map(|k| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    self.snr_db,
                    k + 1,
                    self.per_user_rate[k],
                    self.tdma_rates[k],
                    self.interference_power[k],
                    self.effective_channel[k].norm(),
                    self.sum_rate,
                    self.tdma_average,
                    self.ratio,
                    self.distance_norm
                )
            })
            .collect()
    }
}

/// Evaluate every rate quantity for one channel draw.
///
/// `sigma2` is the noise power of the operating point; `snr_db` is recorded
/// into the snapshot unchanged.
pub fn rate_record(
    scenario: &Scenario,
    allocation: &PowerAllocation,
    channel: &ChannelRealization,
    precoders: &PrecodingSet,
    snr_db: f64,
    sigma2: f64,
) -> Result<RateRecord> {
    let users = scenario.user_count();
    let p_total = allocation.amplitude().powi(2);
    let mut per_user_rate = Vec::with_capacity(users);
    let mut tdma_rates = Vec::with_capacity(users);
    let mut interference = Vec::with_capacity(users);
    let mut effective = Vec::with_capacity(users);
    for user in 0..users {
        let rate = if scenario.is_siso() {
            user_rate_siso(scenario, allocation, channel, precoders, user, sigma2)?
        } else {
            user_rate_mimo(scenario, allocation, channel, precoders, user, sigma2)?
        };
        per_user_rate.push(rate);
        tdma_rates.push(tdma_rate(
            scenario, channel, precoders, user, p_total, sigma2,
        )?);
        interference.push(intra_group_interference(
            scenario, allocation, channel, precoders, user,
        ));
        effective.push(effective_channel(precoders, channel, user));
    }
    let sum_rate: f64 = per_user_rate.iter().sum();
    let tdma_average = tdma_rates.iter().sum::<f64>() / users as f64;
    let ratio = sum_rate_ratio(sum_rate, tdma_average)?;
    let distance_norm = scenario.distances_km().iter().map(|d| d * d).sum();
    Ok(RateRecord {
        snr_db,
        per_user_rate,
        sum_rate,
        tdma_rates,
        tdma_average,
        ratio,
        interference_power: interference,
        effective_channel: effective,
        distance_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::draw_channel;
    use crate::codec::build_precoders;
    use crate::powerctl::{allocate_mimo_rate, allocate_mimo_sinr, allocate_siso, GroupSplit};
    use crate::topology::{Scenario, PRESET_MIMO_4U, PRESET_SISO_5U};
    use approx::assert_relative_eq;

    fn mimo() -> (Scenario, PrecodingSet) {
        (
            Scenario::preset(PRESET_MIMO_4U).unwrap(),
            build_precoders(2, 2, 2, 2).unwrap(),
        )
    }

    fn siso() -> (Scenario, PrecodingSet) {
        (
            Scenario::preset(PRESET_SISO_5U).unwrap(),
            build_precoders(2, 1, 1, 1).unwrap(),
        )
    }

    /// Independent 2x2 complex determinant on raw (re, im) pairs.
    fn det2_re(m: &DMatrix<Cx>) -> f64 {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let re = (a.re * d.re - a.im * d.im) - (b.re * c.re - b.im * c.im);
        let _im = (a.re * d.im + a.im * d.re) - (b.re * c.im + b.im * c.re);
        re
    }

    /// Hand-specialized per-user rates of the four-user cell under the
    /// inverse-gain scheme with near fractions (a1, a2): the nearest members
    /// see only noise, the far members also see the near member's power
    /// through `||sqrt(gamma_k) h_k v_t||^2`.
    fn worked_cell_rate(
        s: &Scenario,
        pre: &PrecodingSet,
        ch: &ChannelRealization,
        user: usize,
        a1: f64,
        a2: f64,
        sigma2: f64,
    ) -> f64 {
        let a2_watts = 40.0;
        let n_t = 2.0;
        let d3: Vec<f64> = s.distances_km().iter().map(|d| d.powi(3)).collect();
        let total: f64 = d3.iter().sum();
        let delta1 = (d3[0] + d3[2]) / total;
        let delta2 = (d3[1] + d3[3]) / total;

        let h = ch.fading(user);
        let v = pre.vector(s.group_of(user)).map(|x| Cx::new(x, 0.0));
        let (coeff, denom) = match user {
            0 => (a1 * delta1, sigma2),
            1 => (a2 * delta2, sigma2),
            2 => {
                let p1 = a1 * delta1 * a2_watts / n_t;
                let rho = (h * &v).norm_squared() * s.gain(2) * p1;
                ((1.0 - a1) * delta1, rho + sigma2)
            }
            3 => {
                let p2 = a2 * delta2 * a2_watts / n_t;
                let rho = (h * &v).norm_squared() * s.gain(3) * p2;
                ((1.0 - a2) * delta2, rho + sigma2)
            }
            _ => unreachable!(),
        };
        let alpha = a2_watts / n_t * coeff * s.gain(user) / denom;
        let gram = h * h.adjoint() * Cx::new(alpha, 0.0);
        let m = DMatrix::<Cx>::identity(2, 2) + gram;
        0.5 * det2_re(&m).log2()
    }

    #[test]
    fn mimo_rate_matches_worked_cell_specialization() {
        let (s, pre) = mimo();
        let (a1, a2) = (0.3, 0.2);
        let alloc = allocate_mimo_rate(
            &s,
            40f64.sqrt(),
            &[GroupSplit::NearFraction(a1), GroupSplit::NearFraction(a2)],
        )
        .unwrap();
        for seed in 0..100 {
            let ch = draw_channel(&s, seed);
            for user in 0..4 {
                let got = user_rate_mimo(&s, &alloc, &ch, &pre, user, 0.05).unwrap();
                let expected = worked_cell_rate(&s, &pre, &ch, user, a1, a2, 0.05);
                assert_relative_eq!(got, expected, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn rates_vanish_as_noise_dominates() {
        let (s, pre) = mimo();
        let alloc = allocate_mimo_sinr(&s, 40f64.sqrt(), 0.0255).unwrap();
        let ch = draw_channel(&s, 4);
        for user in 0..4 {
            let r = user_rate_mimo(&s, &alloc, &ch, &pre, user, 1e12).unwrap();
            assert!(r >= 0.0 && r < 1e-9, "rate {r}");
        }
        let (s, pre) = siso();
        let alloc = allocate_siso(&s, 40f64.sqrt()).unwrap();
        let ch = draw_channel(&s, 4);
        for user in 0..5 {
            let r = user_rate_siso(&s, &alloc, &ch, &pre, user, 1e12).unwrap();
            assert!(r >= 0.0 && r < 1e-9, "rate {r}");
        }
    }

    #[test]
    fn siso_rate_matches_scalar_hand_evaluation() {
        let (s, pre) = siso();
        let alloc = allocate_siso(&s, 40f64.sqrt()).unwrap();
        let sigma2 = 0.37;
        for seed in 0..50 {
            let ch = draw_channel(&s, seed);
            for user in 0..5 {
                // Scalar route: |v^T H v|^2 = gamma |h|^2 for unit v, and
                // every interference term carries the same factor.
                let h = ch.fading(user)[(0, 0)];
                let g = s.gain(user) * h.norm_sqr();
                let p_near: f64 = s
                    .nearer_group_members(user)
                    .iter()
                    .map(|&j| alloc.power(j))
                    .sum();
                let expected =
                    0.5 * (1.0 + alloc.power(user) * g / (g * p_near + sigma2)).log2();
                let got = user_rate_siso(&s, &alloc, &ch, &pre, user, sigma2).unwrap();
                assert_relative_eq!(got, expected, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn nearest_member_sees_only_noise() {
        let (s, pre) = siso();
        let alloc = allocate_siso(&s, 40f64.sqrt()).unwrap();
        let ch = draw_channel(&s, 12);
        // Users 1 and 2 (ids 0, 1) are their groups' nearest members.
        for user in [0, 1] {
            assert_eq!(
                intra_group_interference(&s, &alloc, &ch, &pre, user),
                0.0
            );
        }
        // Moving outward within a group never decreases rho.
        let rho: Vec<f64> = (0..5)
            .map(|u| intra_group_interference(&s, &alloc, &ch, &pre, u))
            .collect();
        assert!(rho[0] <= rho[2] && rho[2] <= rho[4]);
        assert!(rho[1] <= rho[3]);
    }

    #[test]
    fn mimo_rate_with_single_antennas_reduces_to_siso_formula() {
        let (s, pre) = siso();
        let alloc = allocate_siso(&s, 40f64.sqrt()).unwrap();
        for seed in 0..50 {
            let ch = draw_channel(&s, seed);
            for user in 0..5 {
                let mimo = user_rate_mimo(&s, &alloc, &ch, &pre, user, 0.2).unwrap();
                let siso = user_rate_siso(&s, &alloc, &ch, &pre, user, 0.2).unwrap();
                assert_relative_eq!(mimo, siso, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn tdma_rate_edges_and_scalar_oracle() {
        let (s, pre) = siso();
        let ch = draw_channel(&s, 3);
        assert_eq!(tdma_rate(&s, &ch, &pre, 0, 0.0, 1.0).unwrap(), 0.0);
        for user in 0..5 {
            let h = ch.fading(user)[(0, 0)];
            let expected = 0.5 * (1.0 + 40.0 / 0.5 * s.gain(user) * h.norm_sqr()).log2();
            let got = tdma_rate(&s, &ch, &pre, user, 40.0, 0.5).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn tdma_beats_hybrid_for_interference_limited_users() {
        // User 5 of the SISO cell treats two members as noise; with the full
        // budget and no interference its baseline rate wins on average.
        let (s, pre) = siso();
        let alloc = allocate_siso(&s, 40f64.sqrt()).unwrap();
        let sigma2 = 0.01;
        let mut hybrid = 0.0;
        let mut tdma = 0.0;
        for seed in 0..200 {
            let ch = draw_channel(&s, seed);
            hybrid += user_rate_siso(&s, &alloc, &ch, &pre, 4, sigma2).unwrap();
            tdma += tdma_rate(&s, &ch, &pre, 4, 40.0, sigma2).unwrap();
        }
        assert!(tdma > hybrid, "tdma {tdma} vs hybrid {hybrid}");
    }

    #[test]
    fn rate_is_monotone_in_power_and_interference() {
        let (s, pre) = mimo();
        let ch = draw_channel(&s, 8);
        let low = allocate_mimo_sinr(&s, 40f64.sqrt(), 0.01).unwrap();
        let high = allocate_mimo_sinr(&s, 40f64.sqrt(), 0.05).unwrap();
        // More power on user 1 (and more interference at user 3).
        let r1_low = user_rate_mimo(&s, &low, &ch, &pre, 0, 0.1).unwrap();
        let r1_high = user_rate_mimo(&s, &high, &ch, &pre, 0, 0.1).unwrap();
        assert!(r1_high > r1_low);
        let rho_low = intra_group_interference(&s, &low, &ch, &pre, 2);
        let rho_high = intra_group_interference(&s, &high, &ch, &pre, 2);
        assert!(rho_high > rho_low);
    }

    #[test]
    fn dof_reference_points() {
        assert_eq!(dof_total(4, 2, 2), 4.0);
        assert_eq!(dof_total(5, 1, 2), 2.5);
        assert_eq!(dof_total(7, 3, 1), 21.0);
        // The five-user cell at one message per two slots: 5 * (1/2).
        assert_eq!(dof_total(5, 1, 2), 5.0 * 0.5);
    }

    #[test]
    fn ratio_reference_points() {
        assert_eq!(sum_rate_ratio(3.0, 3.0).unwrap(), 1.0);
        assert_eq!(sum_rate_ratio(6.0, 3.0).unwrap(), 2.0);
        assert_eq!(sum_rate_ratio(0.0, 3.0).unwrap(), 0.0);
        assert!(sum_rate_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn ber_reference_points() {
        let a = vec![true, false, true, false];
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(ber(&a, &flipped).unwrap(), 1.0);

        let mut long = vec![false; 6144];
        let mut rx = long.clone();
        rx[17] = true;
        rx[100] = true;
        rx[6000] = true;
        assert_eq!(ber(&long, &rx).unwrap(), 3.0 / 6144.0);
        long.pop();
        assert!(ber(&long, &rx).is_err());
    }

    #[test]
    fn rate_record_rows_are_per_user() {
        let (s, pre) = siso();
        let alloc = allocate_siso(&s, 40f64.sqrt()).unwrap();
        let ch = draw_channel(&s, 1);
        let rec = rate_record(&s, &alloc, &ch, &pre, 10.0, 0.1).unwrap();
        assert_eq!(rec.per_user_rate.len(), 5);
        assert_relative_eq!(rec.sum_rate, rec.per_user_rate.iter().sum::<f64>());
        assert_relative_eq!(rec.distance_norm, 41.25);
        assert_eq!(rec.csv_rows().len(), 5);
        assert!(rec.ratio > 0.0);
    }
}
