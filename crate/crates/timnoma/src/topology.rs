//! Cell scenario: user distances, path-loss gains, group assignment and the
//! within-group SIC decoding order.
//!
//! A [`Scenario`] describes a single downlink cell with one transmitter and
//! `K` users split into `T` groups. Groups must be *distance-interleaved*:
//! sorting users by distance and reading off group labels, two members of the
//! same group are always separated by exactly `T - 1` users from the other
//! groups. This places users with very different channel strengths in the
//! same group, which is what power-domain superposition relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the 4-user MIMO example cell (`K=4, T=2, N_t=N_r=2`).
pub const PRESET_MIMO_4U: &str = "paper-mimo-4u";
/// Name of the 5-user SISO example cell (`K=5, T=2, N_t=N_r=1`).
pub const PRESET_SISO_5U: &str = "paper-siso-5u";

/// Raw scenario parameters, as read from a config file.
///
/// `groups` uses 1-based user ids (users are numbered `1..=K` in configs and
/// reports); everything else mirrors [`Scenario`] directly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    /// Number of groups; equals the number of time slots per operation block.
    pub time_slots: usize,
    /// Transmit antennas at the basestation.
    pub tx_antennas: usize,
    /// Receive antennas per user.
    pub rx_antennas: usize,
    /// Cell radius in km.
    #[serde(default = "default_radius_km")]
    pub radius_km: f64,
    /// Distance of every user from the basestation, in km. Length is `K`.
    pub distances_km: Vec<f64>,
    /// Path-loss exponent `n`; 3 is typical of urban macrocells.
    #[serde(default = "default_path_loss_exponent")]
    pub path_loss_exponent: f64,
    /// Partition of the users into groups, using 1-based user ids.
    pub groups: Vec<Vec<usize>>,
    /// Reference receiver noise power in watts (the 0 dB SNR point).
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
}

fn default_radius_km() -> f64 {
    5.0
}

fn default_path_loss_exponent() -> f64 {
    3.0
}

fn default_noise_power() -> f64 {
    1.0
}

/// A validated cell scenario.
///
/// Immutable after construction; cheap to clone and safe to share across
/// concurrent simulation workers. User ids are 0-based in the API.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    users: usize,
    time_slots: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    streams_per_user: usize,
    radius_km: f64,
    distances_km: Vec<f64>,
    path_loss_exponent: f64,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    gains: Vec<f64>,
    noise_power: f64,
}

/// Per-user path-loss gains `gamma_k = 1/d_k^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossTable {
    /// Linear gain per user, indexed by user id.
    pub gains: Vec<f64>,
}

/// Distance-based path-loss gain `1/d^n`.
///
/// Errors on non-positive distance or exponent.
pub fn path_loss(d_km: f64, exponent: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {d_km}"
        )));
    }
    if !(exponent > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive exponent, got {exponent}"
        )));
    }
    Ok(d_km.powf(-exponent))
}

/// Validate raw parameters and build a [`Scenario`].
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let k = config.distances_km.len();
    let t = config.time_slots;
    if k == 0 {
        return Err(Error::Scenario("at least one user is required".into()));
    }
    if t == 0 {
        return Err(Error::Scenario("at least one group is required".into()));
    }
    if t > k {
        return Err(Error::Scenario(format!(
            "group count {t} exceeds user count {k}"
        )));
    }
    if config.tx_antennas == 0 || config.rx_antennas == 0 {
        return Err(Error::Scenario("antenna counts must be positive".into()));
    }
    if config.tx_antennas < config.rx_antennas {
        return Err(Error::Scenario(format!(
            "tx antennas ({}) must be >= rx antennas ({})",
            config.tx_antennas, config.rx_antennas
        )));
    }
    if !(config.radius_km > 0.0) {
        return Err(Error::Scenario("cell radius must be positive".into()));
    }
    for (i, &d) in config.distances_km.iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::Scenario(format!(
                "user {} has non-positive distance {d}",
                i + 1
            )));
        }
        if d > config.radius_km {
            return Err(Error::Scenario(format!(
                "user {} distance {d} km exceeds cell radius {} km",
                i + 1,
                config.radius_km
            )));
        }
    }
    if !(config.path_loss_exponent > 0.0) {
        return Err(Error::Scenario("path-loss exponent must be positive".into()));
    }
    if !(config.noise_power > 0.0) {
        return Err(Error::Scenario("noise power must be positive".into()));
    }

    // Convert 1-based config ids to 0-based and check the partition.
    if config.groups.len() != t {
        return Err(Error::Scenario(format!(
            "expected {t} groups, got {}",
            config.groups.len()
        )));
    }
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(t);
    let mut group_of = vec![usize::MAX; k];
    for (g, members) in config.groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Scenario(format!("group {} is empty", g + 1)));
        }
        let mut converted = Vec::with_capacity(members.len());
        for &id in members {
            if id == 0 || id > k {
                return Err(Error::Scenario(format!(
                    "group {} names user {id}, valid ids are 1..={k}",
                    g + 1
                )));
            }
            let u = id - 1;
            if group_of[u] != usize::MAX {
                return Err(Error::Scenario(format!(
                    "user {id} appears in more than one group"
                )));
            }
            group_of[u] = g;
            converted.push(u);
        }
        groups.push(converted);
    }
    if let Some(u) = group_of.iter().position(|&g| g == usize::MAX) {
        return Err(Error::Scenario(format!(
            "user {} is not assigned to any group",
            u + 1
        )));
    }

    // Distance interleaving: within the distance ordering, consecutive
    // members of the same group must be exactly T positions apart.
    let order = distance_order(&config.distances_km);
    let mut rank = vec![0usize; k];
    for (pos, &u) in order.iter().enumerate() {
        rank[u] = pos;
    }
    for (g, members) in groups.iter().enumerate() {
        let mut ranks: Vec<usize> = members.iter().map(|&u| rank[u]).collect();
        ranks.sort_unstable();
        for w in ranks.windows(2) {
            if w[1] - w[0] != t {
                return Err(Error::Scenario(format!(
                    "group {} violates distance interleaving: members at \
                     distance ranks {} and {} are not separated by exactly \
                     {} users from the other groups",
                    g + 1,
                    w[0],
                    w[1],
                    t - 1
                )));
            }
        }
    }

    let gains: Result<Vec<f64>> = config
        .distances_km
        .iter()
        .map(|&d| path_loss(d, config.path_loss_exponent))
        .collect();

    Ok(Scenario {
        users: k,
        time_slots: t,
        tx_antennas: config.tx_antennas,
        rx_antennas: config.rx_antennas,
        streams_per_user: config.rx_antennas,
        radius_km: config.radius_km,
        distances_km: config.distances_km.clone(),
        path_loss_exponent: config.path_loss_exponent,
        groups,
        group_of,
        gains: gains?,
        noise_power: config.noise_power,
    })
}

/// Sort user ids by increasing distance, ties broken by ascending id, so the
/// ordering is total and deterministic.
fn distance_order(distances: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| {
        distances[a]
            .partial_cmp(&distances[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

impl Scenario {
    /// Look up a named preset scenario.
    pub fn preset(name: &str) -> Result<Scenario> {
        match name {
            PRESET_MIMO_4U => build_scenario(&ScenarioConfig {
                time_slots: 2,
                tx_antennas: 2,
                rx_antennas: 2,
                radius_km: 5.0,
                distances_km: vec![1.0, 2.0, 3.0, 4.0],
                path_loss_exponent: 3.0,
                groups: vec![vec![1, 3], vec![2, 4]],
                noise_power: 1.0,
            }),
            PRESET_SISO_5U => build_scenario(&ScenarioConfig {
                time_slots: 2,
                tx_antennas: 1,
                rx_antennas: 1,
                radius_km: 5.0,
                distances_km: vec![0.5, 1.5, 2.5, 3.5, 4.5],
                path_loss_exponent: 3.0,
                groups: vec![vec![1, 3, 5], vec![2, 4]],
                noise_power: 1.0,
            }),
            other => Err(Error::Scenario(format!(
                "unknown preset {other:?}; available: {PRESET_MIMO_4U:?}, {PRESET_SISO_5U:?}"
            ))),
        }
    }

    /// Number of users `K`.
    pub fn user_count(&self) -> usize {
        self.users
    }

    /// Number of groups `T`; also the number of time slots per block.
    pub fn group_count(&self) -> usize {
        self.time_slots
    }

    /// Transmit antennas `N_t`.
    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    /// Receive antennas per user `N_r`.
    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    /// Messages per user per block, `L = N_r`.
    pub fn streams_per_user(&self) -> usize {
        self.streams_per_user
    }

    /// Cell radius in km.
    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    /// Path-loss exponent `n`.
    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    /// Reference receiver noise power in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Distance of `user` from the basestation in km.
    pub fn distance_km(&self, user: usize) -> f64 {
        self.distances_km[user]
    }

    /// All user distances, indexed by user id.
    pub fn distances_km(&self) -> &[f64] {
        &self.distances_km
    }

    /// Path-loss gain `gamma_k = 1/d_k^n` of `user`.
    pub fn gain(&self, user: usize) -> f64 {
        self.gains[user]
    }

    /// Per-user path-loss gains.
    pub fn path_loss_table(&self) -> PathLossTable {
        PathLossTable {
            gains: self.gains.clone(),
        }
    }

    /// Index of the group `user` belongs to.
    pub fn group_of(&self, user: usize) -> usize {
        self.group_of[user]
    }

    /// Members of group `group`, in config order.
    pub fn members(&self, group: usize) -> &[usize] {
        &self.groups[group]
    }

    /// True for single-antenna cells (`N_t = N_r = 1`).
    pub fn is_siso(&self) -> bool {
        self.tx_antennas == 1 && self.rx_antennas == 1
    }

    /// Users sorted by increasing distance (ties by id).
    pub fn users_by_distance(&self) -> Vec<usize> {
        distance_order(&self.distances_km)
    }

    /// Group members of `user` that are strictly farther from the
    /// basestation (ties broken by id), i.e. the signals `user` peels off
    /// during SIC, in decoding order.
    pub fn farther_group_members(&self, user: usize) -> Vec<usize> {
        let group = self.group_of(user);
        sic_order(self, group)
            .expect("group index from group_of is valid")
            .into_iter()
            .take_while(|&j| j != user)
            .collect()
    }

    /// Group members of `user` that are strictly nearer to the basestation
    /// (ties broken by id); their signals are treated as noise at `user`.
    pub fn nearer_group_members(&self, user: usize) -> Vec<usize> {
        let group = self.group_of(user);
        let order = sic_order(self, group).expect("group index from group_of is valid");
        let pos = order.iter().position(|&j| j == user).unwrap();
        order[pos + 1..].to_vec()
    }
}

/// SIC decoding order for one group: members sorted by decreasing distance,
/// farthest first.
///
/// Receiver `k` decodes, in this order, every member farther than itself
/// before decoding its own signal, and treats all nearer members as noise.
/// Distance ties are broken by ascending user id (the lower id counts as
/// nearer), matching the scenario's total distance ordering.
pub fn sic_order(scenario: &Scenario, group: usize) -> Result<Vec<usize>> {
    if group >= scenario.group_count() {
        return Err(Error::Scenario(format!(
            "group index {group} out of range, scenario has {} groups",
            scenario.group_count()
        )));
    }
    let mut order = scenario.groups[group].clone();
    order.sort_by(|&a, &b| {
        scenario.distances_km[b]
            .partial_cmp(&scenario.distances_km[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.cmp(&a))
    });
    Ok(order)
}
