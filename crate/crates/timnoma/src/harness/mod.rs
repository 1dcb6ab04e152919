//! Monte-Carlo simulation engine: SNR sweeps over hybrid and TDMA legs with
//! seed-deterministic, parallel frame execution.
//!
//! Frames are the unit of parallelism. Every random quantity of frame `f` is
//! drawn from a substream labelled by `(master_seed, purpose, f, ...)`, so
//! results are bit-identical for any worker count and any SNR-grid order:
//!
//! * channel:       `(TAG_CHANNEL, frame)` — fading is redrawn per frame and
//!   shared by both legs and all SNR points (common random numbers);
//! * payload bits:  `(TAG_BITS, frame)`;
//! * hybrid noise:  `(TAG_NOISE_HYBRID, frame, snr_db.to_bits())`, consumed
//!   block-major, receiver-minor;
//! * TDMA noise:    `(TAG_NOISE_TDMA, frame, snr_db.to_bits())`, consumed
//!   user-major, block-minor.
//!
//! An SNR point maps to the noise power
//! `sigma_n^2 = noise_power * 10^(-snr_db/10)`, i.e. the grid is referenced
//! to the scenario's noise floor (1 W by default). The transmit budget stays
//! fixed at `a^2` watts across the sweep.

mod export;

pub use export::{export_results, import_results, report_figure, FIGURE_RANGE};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::airlink::{
    add_awgn, draw_channel, qpsk_demodulate, qpsk_modulate, substream_rng, substream_seed,
    ChannelRealization, Constellation, Cx,
};
use crate::codec::{build_precoders, sic_decode, tim_postprocess, transmit, PrecodingSet, ReceiverContext};
use crate::error::{Error, Result};
use crate::metrics::{sum_rate_ratio, tdma_rate, user_rate_mimo, user_rate_siso};
use crate::powerctl::{
    allocate_mimo_rate, allocate_mimo_sinr, allocate_siso, GroupSplit, PowerAllocation,
};
use crate::topology::{build_scenario, Scenario, ScenarioConfig};

const TAG_CHANNEL: u64 = 1;
const TAG_BITS: u64 = 2;
const TAG_NOISE_HYBRID: u64 = 3;
const TAG_NOISE_TDMA: u64 = 4;

/// 95% two-sided normal quantile, used for every confidence half-width.
const Z95: f64 = 1.959963984540054;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which legs to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegSet {
    pub hybrid: bool,
    pub tdma: bool,
}

impl LegSet {
    pub fn both() -> Self {
        LegSet {
            hybrid: true,
            tdma: true,
        }
    }

    /// Parse a comma-separated list such as `"hybrid,tdma"`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut legs = LegSet {
            hybrid: false,
            tdma: false,
        };
        for part in text.split(',') {
            match part.trim() {
                "hybrid" => legs.hybrid = true,
                "tdma" => legs.tdma = true,
                "" => {}
                other => {
                    return Err(Error::Config(format!(
                        "unknown leg {other:?}; valid legs are hybrid, tdma"
                    )))
                }
            }
        }
        if !legs.hybrid && !legs.tdma {
            return Err(Error::Config("at least one leg must be enabled".into()));
        }
        Ok(legs)
    }
}

/// Power scheme selection plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerConfig {
    SisoFixed,
    MimoRate { splits: Vec<GroupSplit> },
    MimoSinr { c: f64 },
}

impl PowerConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            PowerConfig::SisoFixed => "siso-fixed",
            PowerConfig::MimoRate { .. } => "mimo-rate",
            PowerConfig::MimoSinr { .. } => "mimo-sinr",
        }
    }
}

/// A fully validated simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Cell under simulation.
    pub scenario: Scenario,
    /// Human-readable scenario name (preset name or "custom").
    pub scenario_label: String,
    /// Power scheme and parameters.
    pub power: PowerConfig,
    /// Transmit power budget `a^2` in watts.
    pub a2_watts: f64,
    /// SNR grid in dB. `f64::INFINITY` is allowed and means zero noise.
    pub snr_grid_db: Vec<f64>,
    /// Monte-Carlo frames per SNR point.
    pub frames: u64,
    /// Information bits per frame, shared by all users.
    pub frame_bits: usize,
    /// Master seed all substreams derive from.
    pub master_seed: u64,
    /// Legs to simulate.
    pub legs: LegSet,
    /// Where `export_results` should write, if anywhere.
    pub output_dir: Option<PathBuf>,
}

/// How one frame's bit budget maps onto users and blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    /// Bits each user transmits per frame.
    pub bits_per_user: usize,
    /// QPSK symbols each user transmits per frame.
    pub symbols_per_user: usize,
    /// `L`-stream blocks per frame.
    pub blocks: usize,
    /// Bits of the frame budget left unused (dropped).
    pub dropped_bits: usize,
}

impl SimConfig {
    /// Default SNR grid: 0 to 40 dB in 2 dB steps.
    pub fn default_snr_grid() -> Vec<f64> {
        (0..=20).map(|i| (2 * i) as f64).collect()
    }

    /// Convenience constructor with the defaults used throughout: 40 W
    /// budget, 6144-bit frames, both legs, the default grid and a scheme
    /// matching the scenario kind (`siso-fixed`, or `mimo-sinr` with
    /// `c = 0.0255`).
    pub fn for_preset(name: &str) -> Result<SimConfig> {
        let scenario = Scenario::preset(name)?;
        let power = if scenario.is_siso() {
            PowerConfig::SisoFixed
        } else {
            PowerConfig::MimoSinr { c: 0.0255 }
        };
        Ok(SimConfig {
            scenario,
            scenario_label: name.to_string(),
            power,
            a2_watts: 40.0,
            snr_grid_db: Self::default_snr_grid(),
            frames: 200,
            frame_bits: 6144,
            master_seed: 1,
            legs: LegSet::both(),
            output_dir: None,
        })
    }

    /// Build the power allocation this config describes.
    pub fn allocation(&self) -> Result<PowerAllocation> {
        let a = self.a2_watts.sqrt();
        match &self.power {
            PowerConfig::SisoFixed => allocate_siso(&self.scenario, a),
            PowerConfig::MimoRate { splits } => allocate_mimo_rate(&self.scenario, a, splits),
            PowerConfig::MimoSinr { c } => allocate_mimo_sinr(&self.scenario, a, *c),
        }
    }

    /// Precoders for the scenario's dimensions.
    pub fn precoders(&self) -> Result<PrecodingSet> {
        build_precoders(
            self.scenario.group_count(),
            self.scenario.tx_antennas(),
            self.scenario.rx_antennas(),
            self.scenario.streams_per_user(),
        )
    }

    /// Split the frame budget evenly across users, rounding each share down
    /// to a whole number of blocks.
    pub fn frame_layout(&self) -> Result<FrameLayout> {
        let users = self.scenario.user_count();
        let bits_per_block = 2 * self.scenario.streams_per_user();
        let share = self.frame_bits / users;
        let bits_per_user = share - share % bits_per_block;
        if bits_per_user == 0 {
            return Err(Error::Config(format!(
                "frame_bits = {} is too small for {} users at {} bits per block",
                self.frame_bits, users, bits_per_block
            )));
        }
        Ok(FrameLayout {
            bits_per_user,
            symbols_per_user: bits_per_user / 2,
            blocks: bits_per_user / bits_per_block,
            dropped_bits: self.frame_bits - bits_per_user * users,
        })
    }

    /// Check every invariant that does not require running anything.
    pub fn validate(&self) -> Result<()> {
        if !(self.a2_watts > 0.0) {
            return Err(Error::Config(format!(
                "a2_watts must be positive, got {}",
                self.a2_watts
            )));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("the SNR grid must not be empty".into()));
        }
        for &snr in &self.snr_grid_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(Error::Config(format!("invalid SNR point {snr}")));
            }
        }
        let bits_per_block = 2 * self.scenario.streams_per_user();
        if self.frame_bits % bits_per_block != 0 {
            return Err(Error::Config(format!(
                "frame_bits = {} must be divisible by bits-per-symbol x streams = {}",
                self.frame_bits, bits_per_block
            )));
        }
        let layout = self.frame_layout()?;
        if layout.dropped_bits > 0 {
            log::warn!(
                "frame budget of {} bits does not divide across {} users; \
                 dropping {} bits per frame",
                self.frame_bits,
                self.scenario.user_count(),
                layout.dropped_bits
            );
        }
        self.allocation()?;
        self.precoders()?;
        Ok(())
    }

    /// Noise power `sigma_n^2` of an SNR point:
    /// `noise_power * 10^(-snr_db/10)`.
    pub fn sigma2_for_snr(&self, snr_db: f64) -> f64 {
        self.scenario.noise_power() * 10f64.powf(-snr_db / 10.0)
    }
}

/// On-disk form of [`SimConfig`] (TOML).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    /// Preset name; mutually exclusive with `scenario`.
    pub preset: Option<String>,
    /// Custom cell description.
    pub scenario: Option<ScenarioConfig>,
    /// `siso-fixed`, `mimo-rate` or `mimo-sinr`; defaults by scenario kind.
    pub scheme: Option<String>,
    pub a2_watts: Option<f64>,
    /// Near-member fraction for `mimo-sinr`.
    pub c: Option<f64>,
    /// Per-group splits for `mimo-rate`: scalars for two-member groups or
    /// weight vectors for larger ones.
    pub splits: Option<Vec<SplitEntry>>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub frames: Option<u64>,
    pub frame_bits: Option<usize>,
    pub master_seed: Option<u64>,
    /// Subset of `["hybrid", "tdma"]`.
    pub legs: Option<Vec<String>>,
    pub output_dir: Option<String>,
}

/// One `splits` entry: a scalar near fraction or a full weight vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitEntry {
    NearFraction(f64),
    Weights(Vec<f64>),
}

impl SimConfigFile {
    /// Parse a TOML config file.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolve the file into a validated [`SimConfig`].
    pub fn resolve(&self) -> Result<SimConfig> {
        let (scenario, label) = match (&self.preset, &self.scenario) {
            (Some(name), None) => (Scenario::preset(name)?, name.clone()),
            (None, Some(cfg)) => (build_scenario(cfg)?, "custom".to_string()),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either a preset or a [scenario] table, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "a preset name or a [scenario] table is required".into(),
                ))
            }
        };

        let default_scheme = if scenario.is_siso() {
            "siso-fixed"
        } else {
            "mimo-sinr"
        };
        let power = match self.scheme.as_deref().unwrap_or(default_scheme) {
            "siso-fixed" => PowerConfig::SisoFixed,
            "mimo-rate" => {
                let entries = self.splits.as_ref().ok_or_else(|| {
                    Error::Config("mimo-rate needs a `splits` list".into())
                })?;
                let splits = entries
                    .iter()
                    .map(|e| match e {
                        SplitEntry::NearFraction(a) => GroupSplit::NearFraction(*a),
                        SplitEntry::Weights(w) => GroupSplit::Weights(w.clone()),
                    })
                    .collect();
                PowerConfig::MimoRate { splits }
            }
            "mimo-sinr" => PowerConfig::MimoSinr {
                c: self.c.unwrap_or(0.0255),
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown scheme {other:?}; valid schemes are siso-fixed, \
                     mimo-rate, mimo-sinr"
                )))
            }
        };

        let legs = match &self.legs {
            None => LegSet::both(),
            Some(list) => LegSet::parse(&list.join(","))?,
        };

        let config = SimConfig {
            scenario,
            scenario_label: label,
            power,
            a2_watts: self.a2_watts.unwrap_or(40.0),
            snr_grid_db: self
                .snr_grid_db
                .clone()
                .unwrap_or_else(SimConfig::default_snr_grid),
            frames: self.frames.unwrap_or(200),
            frame_bits: self.frame_bits.unwrap_or(6144),
            master_seed: self.master_seed.unwrap_or(1),
            legs,
            output_dir: self.output_dir.as_ref().map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }
}

// ---------------------------------------------------------------------------
// Result table
// ---------------------------------------------------------------------------

/// Run metadata carried alongside the numeric rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub scenario: String,
    pub users: usize,
    pub siso: bool,
    pub distances_km: Vec<f64>,
    pub scheme: String,
    pub frames: u64,
    pub frame_bits: usize,
    pub master_seed: u64,
    pub legs: LegSet,
}

/// Per-(SNR, user) results.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRow {
    pub snr_db: f64,
    /// 0-based user id.
    pub user: usize,
    /// Bits simulated per leg for this user at this SNR point.
    pub bits: u64,
    pub ber_hybrid: Option<f64>,
    pub ber_tdma: Option<f64>,
    pub rate_hybrid: Option<f64>,
    /// 95% confidence half-width of `rate_hybrid`.
    pub rate_hybrid_ci95: Option<f64>,
    pub rate_tdma: Option<f64>,
    pub rate_tdma_ci95: Option<f64>,
}

/// Per-SNR aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub snr_db: f64,
    pub sum_rate_hybrid: Option<f64>,
    pub sum_rate_hybrid_ci95: Option<f64>,
    /// Sum of the per-user single-user rates.
    pub sum_rate_tdma: Option<f64>,
    /// Mean of the per-user single-user rates: the throughput of a TDMA
    /// system time-sharing all users, and the denominator of `ratio`.
    pub tdma_average_rate: Option<f64>,
    pub tdma_average_rate_ci95: Option<f64>,
    /// Hybrid sum rate over the TDMA network rate.
    pub ratio: Option<f64>,
    pub network_ber_hybrid: Option<f64>,
    pub network_ber_tdma: Option<f64>,
}

/// Everything one simulation run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub meta: TableMeta,
    pub user_rows: Vec<UserRow>,
    pub snr_rows: Vec<SnrRow>,
}

impl ResultTable {
    /// Row for `(snr_db, user)`, if present.
    pub fn user_row(&self, snr_db: f64, user: usize) -> Option<&UserRow> {
        self.user_rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.user == user)
    }

    /// Aggregate row for `snr_db`, if present.
    pub fn snr_row(&self, snr_db: f64) -> Option<&SnrRow> {
        self.snr_rows.iter().find(|r| r.snr_db == snr_db)
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_std_error(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Frame execution
// ---------------------------------------------------------------------------

/// BER tally of one leg of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegTally {
    /// Bit errors per user.
    pub bit_errors: Vec<u64>,
    /// Bits each user transmitted.
    pub bits_per_user: u64,
}

fn frame_channel(config: &SimConfig, frame: u64) -> ChannelRealization {
    let seed = substream_seed(config.master_seed, &[TAG_CHANNEL, frame]);
    draw_channel(&config.scenario, seed)
}

fn frame_payloads(config: &SimConfig, frame: u64, layout: &FrameLayout) -> Vec<Vec<bool>> {
    use rand::Rng;
    let mut rng = substream_rng(config.master_seed, &[TAG_BITS, frame]);
    (0..config.scenario.user_count())
        .map(|_| (0..layout.bits_per_user).map(|_| rng.gen()).collect())
        .collect()
}

fn block_symbols(symbols: &[Cx], block: usize, streams: usize) -> DVector<Cx> {
    DVector::from_row_slice(&symbols[block * streams..(block + 1) * streams])
}

/// Run the hybrid leg of one frame: superposition transmit, per-receiver
/// AWGN, inter-group cancellation and SIC decoding for every user.
pub fn run_hybrid_leg(config: &SimConfig, snr_db: f64, frame: u64) -> Result<LegTally> {
    let scenario = &config.scenario;
    let layout = config.frame_layout()?;
    let allocation = config.allocation()?;
    let precoders = config.precoders()?;
    let sigma2 = config.sigma2_for_snr(snr_db);
    let channel = frame_channel(config, frame);
    let payloads = frame_payloads(config, frame, &layout);
    let mut noise_rng = substream_rng(
        config.master_seed,
        &[TAG_NOISE_HYBRID, frame, snr_db.to_bits()],
    );

    let users = scenario.user_count();
    let streams = scenario.streams_per_user();
    let symbols: Vec<Vec<Cx>> = payloads
        .iter()
        .map(|bits| Ok(qpsk_modulate(bits)?.symbols))
        .collect::<Result<_>>()?;
    let contexts: Vec<ReceiverContext> = (0..users)
        .map(|k| ReceiverContext::new(scenario, &precoders, &channel, k, sigma2, Constellation::Qpsk))
        .collect();

    let mut decoded: Vec<Vec<bool>> = vec![Vec::with_capacity(layout.bits_per_user); users];
    for block in 0..layout.blocks {
        let block_syms: Vec<DVector<Cx>> = (0..users)
            .map(|k| block_symbols(&symbols[k], block, streams))
            .collect();
        let x = transmit(&block_syms, &allocation, &precoders, scenario)?;
        for k in 0..users {
            let y = add_awgn(&channel.apply(k, &x)?, sigma2, &mut noise_rng)?;
            let post = tim_postprocess(&y, scenario.group_of(k), &precoders, scenario)?;
            let trace = sic_decode(&post, &contexts[k], &allocation, scenario)?;
            decoded[k].extend(qpsk_demodulate(trace.own_estimate.as_slice()));
        }
    }

    let bit_errors = payloads
        .iter()
        .zip(decoded.iter())
        .map(|(tx, rx)| tx.iter().zip(rx.iter()).filter(|(a, b)| a != b).count() as u64)
        .collect();
    Ok(LegTally {
        bit_errors,
        bits_per_user: layout.bits_per_user as u64,
    })
}

/// Run the TDMA leg of one frame: each user transmits alone with the full
/// budget over its own slots (per-antenna power `a^2/N_t`, no precoding) and
/// is detected by ML over its own AWGN channel.
pub fn run_tdma_leg(config: &SimConfig, snr_db: f64, frame: u64) -> Result<LegTally> {
    let scenario = &config.scenario;
    let layout = config.frame_layout()?;
    let precoders = config.precoders()?;
    let sigma2 = config.sigma2_for_snr(snr_db);
    let channel = frame_channel(config, frame);
    let payloads = frame_payloads(config, frame, &layout);
    let mut noise_rng = substream_rng(
        config.master_seed,
        &[TAG_NOISE_TDMA, frame, snr_db.to_bits()],
    );

    let users = scenario.user_count();
    let streams = scenario.streams_per_user();
    let tx_map = precoders.tx_map().map(|x| Cx::new(x, 0.0));
    let mut bit_errors = vec![0u64; users];

    for user in 0..users {
        let amp = (config.a2_watts / scenario.tx_antennas() as f64 * scenario.gain(user)).sqrt();
        let gain = channel.fading(user) * &tx_map * Cx::new(amp, 0.0);
        let symbols = qpsk_modulate(&payloads[user])?.symbols;
        let mut decoded = Vec::with_capacity(layout.bits_per_user);
        for block in 0..layout.blocks {
            let x = block_symbols(&symbols, block, streams);
            let y = add_awgn(&(&gain * &x), sigma2, &mut noise_rng)?;
            let estimate = crate::airlink::ml_detect(&y, &gain, sigma2, Constellation::Qpsk)?;
            decoded.extend(qpsk_demodulate(estimate.as_slice()));
        }
        bit_errors[user] = payloads[user]
            .iter()
            .zip(decoded.iter())
            .filter(|(a, b)| a != b)
            .count() as u64;
    }
    Ok(LegTally {
        bit_errors,
        bits_per_user: layout.bits_per_user as u64,
    })
}

/// Everything one frame contributes to one SNR point.
#[derive(Debug, Clone)]
struct FrameResult {
    hybrid: Option<LegTally>,
    tdma: Option<LegTally>,
    rate_hybrid: Option<Vec<f64>>,
    rate_tdma: Option<Vec<f64>>,
}

fn run_frame(config: &SimConfig, snr_db: f64, frame: u64) -> Result<FrameResult> {
    let scenario = &config.scenario;
    let sigma2 = config.sigma2_for_snr(snr_db);

    let hybrid = if config.legs.hybrid {
        Some(run_hybrid_leg(config, snr_db, frame)?)
    } else {
        None
    };
    let tdma = if config.legs.tdma {
        Some(run_tdma_leg(config, snr_db, frame)?)
    } else {
        None
    };

    // Per-draw analytic rates; undefined at zero noise.
    let (mut rate_hybrid, mut rate_tdma) = (None, None);
    if sigma2 > 0.0 {
        let allocation = config.allocation()?;
        let precoders = config.precoders()?;
        let channel = frame_channel(config, frame);
        if config.legs.hybrid {
            let rates: Vec<f64> = (0..scenario.user_count())
                .map(|k| {
                    if scenario.is_siso() {
                        user_rate_siso(scenario, &allocation, &channel, &precoders, k, sigma2)
                    } else {
                        user_rate_mimo(scenario, &allocation, &channel, &precoders, k, sigma2)
                    }
                })
                .collect::<Result<_>>()?;
            rate_hybrid = Some(rates);
        }
        if config.legs.tdma {
            let rates: Vec<f64> = (0..scenario.user_count())
                .map(|k| tdma_rate(scenario, &channel, &precoders, k, config.a2_watts, sigma2))
                .collect::<Result<_>>()?;
            rate_tdma = Some(rates);
        }
    }

    Ok(FrameResult {
        hybrid,
        tdma,
        rate_hybrid,
        rate_tdma,
    })
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Running mean/variance accumulator (plain sums; the merge order is fixed
/// by the frame index, so results are scheduling-independent).
#[derive(Debug, Clone, Default)]
struct Series {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Series {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// 95% confidence half-width of the mean.
    fn ci95(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        Z95 * (var / n).sqrt()
    }
}

/// Run the configured sweep and aggregate per-user BER, per-user rates and
/// the sum-rate comparison at every SNR point.
///
/// Deterministic given `config.master_seed`, regardless of worker count.
pub fn run_simulation(config: &SimConfig) -> Result<ResultTable> {
    config.validate()?;
    let scenario = &config.scenario;
    let users = scenario.user_count();
    let layout = config.frame_layout()?;

    let mut user_rows = Vec::with_capacity(config.snr_grid_db.len() * users);
    let mut snr_rows = Vec::with_capacity(config.snr_grid_db.len());

    for &snr_db in &config.snr_grid_db {
        // Frames run in parallel; the collected order is the frame order.
        let frames: Vec<FrameResult> = (0..config.frames)
            .into_par_iter()
            .map(|frame| run_frame(config, snr_db, frame))
            .collect::<Result<_>>()?;

        let mut errors_hybrid = vec![0u64; users];
        let mut errors_tdma = vec![0u64; users];
        let mut rate_hybrid = vec![Series::default(); users];
        let mut rate_tdma = vec![Series::default(); users];
        let mut sum_series = Series::default();
        let mut tdma_avg_series = Series::default();

        for fr in &frames {
            if let Some(t) = &fr.hybrid {
                for (acc, &e) in errors_hybrid.iter_mut().zip(&t.bit_errors) {
                    *acc += e;
                }
            }
            if let Some(t) = &fr.tdma {
                for (acc, &e) in errors_tdma.iter_mut().zip(&t.bit_errors) {
                    *acc += e;
                }
            }
            if let Some(rates) = &fr.rate_hybrid {
                for (s, &r) in rate_hybrid.iter_mut().zip(rates) {
                    s.push(r);
                }
                sum_series.push(rates.iter().sum());
            }
            if let Some(rates) = &fr.rate_tdma {
                for (s, &r) in rate_tdma.iter_mut().zip(rates) {
                    s.push(r);
                }
                tdma_avg_series.push(rates.iter().sum::<f64>() / users as f64);
            }
        }

        let bits_total = layout.bits_per_user as u64 * config.frames;
        for user in 0..users {
            user_rows.push(UserRow {
                snr_db,
                user,
                bits: bits_total,
                ber_hybrid: config
                    .legs
                    .hybrid
                    .then(|| errors_hybrid[user] as f64 / bits_total as f64),
                ber_tdma: config
                    .legs
                    .tdma
                    .then(|| errors_tdma[user] as f64 / bits_total as f64),
                rate_hybrid: (rate_hybrid[user].n > 0).then(|| rate_hybrid[user].mean()),
                rate_hybrid_ci95: (rate_hybrid[user].n > 0).then(|| rate_hybrid[user].ci95()),
                rate_tdma: (rate_tdma[user].n > 0).then(|| rate_tdma[user].mean()),
                rate_tdma_ci95: (rate_tdma[user].n > 0).then(|| rate_tdma[user].ci95()),
            });
        }

        let sum_rate_hybrid = (sum_series.n > 0).then(|| sum_series.mean());
        let tdma_average_rate = (tdma_avg_series.n > 0).then(|| tdma_avg_series.mean());
        let ratio = match (sum_rate_hybrid, tdma_average_rate) {
            (Some(h), Some(t)) => Some(sum_rate_ratio(h, t)?),
            _ => None,
        };
        snr_rows.push(SnrRow {
            snr_db,
            sum_rate_hybrid,
            sum_rate_hybrid_ci95: (sum_series.n > 0).then(|| sum_series.ci95()),
            sum_rate_tdma: tdma_average_rate.map(|t| t * users as f64),
            tdma_average_rate,
            tdma_average_rate_ci95: (tdma_avg_series.n > 0).then(|| tdma_avg_series.ci95()),
            ratio,
            network_ber_hybrid: config.legs.hybrid.then(|| {
                errors_hybrid.iter().sum::<u64>() as f64 / (bits_total * users as u64) as f64
            }),
            network_ber_tdma: config.legs.tdma.then(|| {
                errors_tdma.iter().sum::<u64>() as f64 / (bits_total * users as u64) as f64
            }),
        });
        log::info!(
            "snr {snr_db} dB done: {} frames, ratio {:?}",
            config.frames,
            snr_rows.last().and_then(|r| r.ratio)
        );
    }

    Ok(ResultTable {
        meta: TableMeta {
            scenario: config.scenario_label.clone(),
            users,
            siso: scenario.is_siso(),
            distances_km: scenario.distances_km().to_vec(),
            scheme: config.power.tag().to_string(),
            frames: config.frames,
            frame_bits: config.frame_bits,
            master_seed: config.master_seed,
            legs: config.legs,
        },
        user_rows,
        snr_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{PRESET_MIMO_4U, PRESET_SISO_5U};

    fn small_config(preset: &str) -> SimConfig {
        let mut cfg = SimConfig::for_preset(preset).unwrap();
        cfg.frames = 4;
        cfg.snr_grid_db = vec![10.0, 20.0];
        cfg
    }

    #[test]
    fn config_file_resolves_presets_and_defaults() {
        let cfg = SimConfigFile::from_toml(
            r#"
            preset = "paper-mimo-4u"
            frames = 10
            snr_grid_db = [0.0, 10.0]
            "#,
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(cfg.scenario.user_count(), 4);
        assert_eq!(cfg.power, PowerConfig::MimoSinr { c: 0.0255 });
        assert_eq!(cfg.a2_watts, 40.0);
        assert_eq!(cfg.frames, 10);
        assert!(cfg.legs.hybrid && cfg.legs.tdma);
    }

    #[test]
    fn config_file_accepts_custom_scenarios_and_splits() {
        let cfg = SimConfigFile::from_toml(
            r#"
            scheme = "mimo-rate"
            splits = [0.2, 0.3]
            snr_grid_db = [10.0]
            frames = 1

            [scenario]
            time_slots = 2
            tx_antennas = 2
            rx_antennas = 2
            distances_km = [1.0, 2.0, 3.0, 4.0]
            groups = [[1, 3], [2, 4]]
            "#,
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(cfg.scenario_label, "custom");
        match &cfg.power {
            PowerConfig::MimoRate { splits } => assert_eq!(splits.len(), 2),
            other => panic!("unexpected power config {other:?}"),
        }
    }

    #[test]
    fn config_validation_names_the_problem() {
        let mut cfg = small_config(PRESET_SISO_5U);
        cfg.frames = 0;
        assert!(cfg.validate().unwrap_err().to_string().contains("frames"));

        let mut cfg = small_config(PRESET_SISO_5U);
        cfg.snr_grid_db.clear();
        assert!(cfg.validate().unwrap_err().to_string().contains("SNR grid"));

        let mut cfg = small_config(PRESET_MIMO_4U);
        cfg.frame_bits = 6146; // not divisible by 4
        assert!(cfg.validate().unwrap_err().to_string().contains("divisible"));

        let err = SimConfigFile::from_toml("preset = \"paper-siso-5u\"\nlegs = []")
            .unwrap()
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("leg"), "{err}");
    }

    #[test]
    fn frame_layout_splits_evenly_and_reports_dropped_bits() {
        let cfg = small_config(PRESET_MIMO_4U);
        let layout = cfg.frame_layout().unwrap();
        assert_eq!(layout.bits_per_user, 1536);
        assert_eq!(layout.blocks, 384);
        assert_eq!(layout.dropped_bits, 0);

        let cfg = small_config(PRESET_SISO_5U);
        let layout = cfg.frame_layout().unwrap();
        assert_eq!(layout.bits_per_user, 1228);
        assert_eq!(layout.blocks, 614);
        assert_eq!(layout.dropped_bits, 4);
    }

    #[test]
    fn sigma2_follows_the_snr_grid() {
        let cfg = small_config(PRESET_SISO_5U);
        assert_eq!(cfg.sigma2_for_snr(0.0), 1.0);
        assert!((cfg.sigma2_for_snr(10.0) - 0.1).abs() < 1e-15);
        assert_eq!(cfg.sigma2_for_snr(f64::INFINITY), 0.0);
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let cfg = small_config(PRESET_SISO_5U);
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a, b);

        let mut other = cfg.clone();
        other.master_seed += 1;
        assert_ne!(a, run_simulation(&other).unwrap());
    }

    #[test]
    fn results_are_worker_count_independent() {
        let cfg = small_config(PRESET_MIMO_4U);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_simulation(&cfg))
            .unwrap();
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_simulation(&cfg))
            .unwrap();
        assert_eq!(single, multi);
    }

    #[test]
    fn table_shape_matches_grid() {
        let cfg = small_config(PRESET_SISO_5U);
        let table = run_simulation(&cfg).unwrap();
        assert_eq!(table.user_rows.len(), 2 * 5);
        assert_eq!(table.snr_rows.len(), 2);
        for &snr in &cfg.snr_grid_db {
            for user in 0..5 {
                let row = table.user_row(snr, user).unwrap();
                assert!(row.ber_hybrid.unwrap() >= 0.0 && row.ber_hybrid.unwrap() <= 1.0);
                assert!(row.rate_hybrid_ci95.unwrap() >= 0.0);
            }
            let agg = table.snr_row(snr).unwrap();
            let per_user_sum: f64 = (0..5)
                .map(|u| table.user_row(snr, u).unwrap().rate_hybrid.unwrap())
                .sum();
            // Sum-rate additivity across users.
            assert!((agg.sum_rate_hybrid.unwrap() - per_user_sum).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_only_leg_leaves_tdma_columns_empty() {
        let mut cfg = small_config(PRESET_SISO_5U);
        cfg.legs = LegSet {
            hybrid: true,
            tdma: false,
        };
        let table = run_simulation(&cfg).unwrap();
        let row = &table.user_rows[0];
        assert!(row.ber_tdma.is_none() && row.rate_tdma.is_none());
        assert!(table.snr_rows[0].ratio.is_none());
    }

    #[test]
    fn noiseless_legs_have_zero_errors() {
        let mut cfg = small_config(PRESET_SISO_5U);
        cfg.snr_grid_db = vec![f64::INFINITY];
        for frame in 0..3 {
            let tally = run_tdma_leg(&cfg, f64::INFINITY, frame).unwrap();
            assert!(tally.bit_errors.iter().all(|&e| e == 0));
            let tally = run_hybrid_leg(&cfg, f64::INFINITY, frame).unwrap();
            assert!(tally.bit_errors.iter().all(|&e| e == 0));
        }
    }

    #[test]
    fn halving_frames_widens_intervals_by_sqrt2() {
        let mut cfg = small_config(PRESET_SISO_5U);
        cfg.snr_grid_db = vec![10.0];
        cfg.frames = 400;
        let wide = run_simulation(&cfg).unwrap();
        cfg.frames = 200;
        let narrow = run_simulation(&cfg).unwrap();
        let w = wide.snr_rows[0].sum_rate_hybrid_ci95.unwrap();
        let n = narrow.snr_rows[0].sum_rate_hybrid_ci95.unwrap();
        let growth = n / w;
        let expected = 2f64.sqrt();
        assert!(
            (growth - expected).abs() < 0.2 * expected,
            "interval growth {growth}"
        );
    }

    #[test]
    fn ber_is_monotone_in_snr_within_tolerance() {
        let mut cfg = small_config(PRESET_SISO_5U);
        cfg.frames = 20;
        cfg.snr_grid_db = (0..=8).map(|i| 4.0 * i as f64).collect();
        let table = run_simulation(&cfg).unwrap();
        for user in 0..5 {
            let mut prev: Option<(f64, u64)> = None;
            for &snr in &cfg.snr_grid_db {
                let row = table.user_row(snr, user).unwrap();
                let ber = row.ber_hybrid.unwrap();
                if let Some((p, bits)) = prev {
                    let slack = 3.0 * binomial_std_error(p.max(ber), bits);
                    assert!(
                        ber <= p + slack,
                        "user {user}: BER rose from {p} to {ber} at {snr} dB"
                    );
                }
                prev = Some((ber, row.bits));
            }
        }
    }

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        let (lo, hi) = wilson_interval(10, 1000, 1.96);
        assert!(lo > 0.0 && lo < 0.01 && hi > 0.01 && hi < 0.03);
        let (lo, hi) = wilson_interval(0, 1000, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }
}
