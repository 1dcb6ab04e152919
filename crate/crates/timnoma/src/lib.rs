//! Link-level simulator and analytic-rate library for a hybrid TIM-NOMA
//! downlink broadcast channel.
//!
//! One basestation serves `K` users that are split into `T` distance-
//! interleaved groups. Every group gets a precoding vector orthogonal to all
//! other groups' vectors, so a receiver can null *inter-group* interference
//! with a single projection (topological interference management). Inside a
//! group, users are superimposed in the power domain and separated by
//! successive interference cancellation (non-orthogonal multiple access):
//! each receiver decodes and subtracts the signals of all farther group
//! members before detecting its own, and treats nearer members as noise.
//!
//! The crate provides:
//!
//! * [`topology`] — cell scenarios, path loss, group/SIC ordering,
//!   the `paper-mimo-4u` and `paper-siso-5u` presets;
//! * [`powerctl`] — the three power-allocation schemes and budget checks;
//! * [`airlink`] — Rayleigh block-fading channels, QPSK, AWGN and
//!   maximum-likelihood detection;
//! * [`codec`] — precoder construction, superposition transmit, the
//!   inter-group cancellation projection and SIC decoding;
//! * [`metrics`] — closed-form per-user rates, TDMA baselines, DoF and BER;
//! * [`harness`] — a seed-deterministic parallel Monte-Carlo engine with
//!   CSV/plot-data export.
//!
//! # Quick start
//!
//! ```
//! use timnoma::prelude::*;
//!
//! let scenario = Scenario::preset(PRESET_SISO_5U)?;
//! let allocation = allocate_siso(&scenario, 40f64.sqrt())?;
//! assert!((total_power(&allocation) - 40.0).abs() < 1e-9);
//!
//! let precoders = build_precoders(
//!     scenario.group_count(),
//!     scenario.tx_antennas(),
//!     scenario.rx_antennas(),
//!     scenario.streams_per_user(),
//! )?;
//! let channel = draw_channel(&scenario, 7);
//! let rate = user_rate_siso(&scenario, &allocation, &channel, &precoders, 0, 0.1)?;
//! assert!(rate > 0.0);
//! # Ok::<(), timnoma::Error>(())
//! ```
//!
//! Runnable walkthroughs live in `examples/`; the `timnoma` binary wraps the
//! harness behind `simulate` and `report` subcommands.

pub mod airlink;
pub mod codec;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod powerctl;
pub mod topology;

pub use error::{Error, Result};

/// The most commonly used items in one import.
pub mod prelude {
    pub use crate::airlink::{
        add_awgn, draw_channel, ml_detect, qpsk_demodulate, qpsk_modulate, substream_seed,
        ChannelRealization, Constellation,
    };
    pub use crate::codec::{
        build_precoders, effective_channel, sic_decode, tim_postprocess, transmit, DecodeTrace,
        PrecodingSet, ReceiverContext,
    };
    pub use crate::error::{Error, Result};
    pub use crate::harness::{
        export_results, import_results, run_simulation, LegSet, PowerConfig, ResultTable,
        SimConfig,
    };
    pub use crate::metrics::{
        ber, dof_total, rate_record, sum_rate_ratio, tdma_rate, user_rate_mimo, user_rate_siso,
        RateRecord,
    };
    pub use crate::powerctl::{
        allocate_mimo_rate, allocate_mimo_sinr, allocate_siso, total_power, GroupSplit,
        PowerAllocation, PowerScheme,
    };
    pub use crate::topology::{
        build_scenario, path_loss, sic_order, PathLossTable, Scenario, ScenarioConfig,
        PRESET_MIMO_4U, PRESET_SISO_5U,
    };
}
