//! Hybrid transceiver core: orthonormal group precoders, superposition
//! transmit, the inter-group cancellation projection and SIC decoding.
//!
//! Stage 1 (inter-group): group `t` transmits through `v_t (x) U`, where the
//! `v_t` are pairwise-orthogonal unit vectors over the `T` slots of a block.
//! A receiver in group `i` applies `v_i^T (x) S`, which nulls every other
//! group's contribution identically and leaves the noise white with the same
//! variance.
//!
//! Stage 2 (intra-group): the post-processed signal still superimposes the
//! receiver's own group. The receiver ML-detects and subtracts each farther
//! member's signal in farthest-first order, treating everything not yet
//! peeled as noise, and finally detects its own symbols with only the nearer
//! members left as interference. Subtraction uses the *detected* estimates,
//! so detection errors propagate exactly as they would in hardware.
//!
//! "Treating as noise" is implemented with the exact second-order statistics
//! of the unpeeled members: since they pass through the receiver's own
//! effective channel, their covariance is `(sum P_m gamma) M M^H + sigma2 I`,
//! and each detection whitens the residual and gain by its Cholesky factor
//! before the constellation search. On a scalar channel this reduces to the
//! plain Euclidean metric; on matrix channels it keeps noiseless peeling
//! exact even for badly conditioned fading draws, provided the power ladder
//! separates the members.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::airlink::{ml_detect, ChannelRealization, Constellation, Cx};
use crate::error::{Error, Result};
use crate::powerctl::PowerAllocation;
use crate::topology::{sic_order, Scenario};

/// Cosine of the 60-degree rotation the precoder cascade is built from,
/// written out so the two-group pair is exactly `v_1 = (1/2, sqrt(3)/2)`,
/// `v_2 = (-sqrt(3)/2, 1/2)`.
const ROT_C: f64 = 0.5;

fn rot_s() -> f64 {
    3f64.sqrt() / 2.0
}

/// The group precoding vectors plus the antenna/stream maps.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingSet {
    vectors: Vec<DVector<f64>>,
    tx_map: DMatrix<f64>,
    rx_map: DMatrix<f64>,
}

impl PrecodingSet {
    /// Precoding vector `v_t` of group `t` (a real `T x 1` unit vector).
    pub fn vector(&self, group: usize) -> &DVector<f64> {
        &self.vectors[group]
    }

    /// Number of groups `T`.
    pub fn group_count(&self) -> usize {
        self.vectors.len()
    }

    /// Transmit stream map `U` (`N_t x L`, 0/1 entries).
    pub fn tx_map(&self) -> &DMatrix<f64> {
        &self.tx_map
    }

    /// Receive stream map `S` (`L x N_r`, 0/1 entries).
    pub fn rx_map(&self) -> &DMatrix<f64> {
        &self.rx_map
    }

    /// Complex transmit operator `v_t (x) U` of group `t`, `(T N_t) x L`.
    pub fn tx_operator(&self, group: usize) -> DMatrix<Cx> {
        let t = self.vectors[group].len();
        let v = DMatrix::from_column_slice(t, 1, self.vectors[group].as_slice());
        to_complex(&v.kronecker(&self.tx_map))
    }

    /// Complex receive operator `v_t^T (x) S` of group `t`, `L x (T N_r)`.
    pub fn rx_operator(&self, group: usize) -> DMatrix<Cx> {
        let t = self.vectors[group].len();
        let vt = DMatrix::from_row_slice(1, t, self.vectors[group].as_slice());
        to_complex(&vt.kronecker(&self.rx_map))
    }
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Cx> {
    m.map(|x| Cx::new(x, 0.0))
}

/// Build the `T` orthonormal group vectors and the stream maps.
///
/// The vectors are the columns of a fixed cascade of 60-degree Givens
/// rotations of the identity, so any `T` gives a deterministic orthonormal
/// set and `T = 2` gives exactly the pair `(1/2, sqrt(3)/2)`,
/// `(-sqrt(3)/2, 1/2)`. The stream maps are the canonical leading-row
/// selections: `U = I_L` padded with zero rows when `N_t > L` (antenna `i`
/// carries stream `i`), and `S = I_{N_r}`.
pub fn build_precoders(
    time_slots: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    streams: usize,
) -> Result<PrecodingSet> {
    if time_slots == 0 {
        return Err(Error::Dimension("need at least one time slot".into()));
    }
    if streams != rx_antennas {
        return Err(Error::Dimension(format!(
            "streams per user ({streams}) must equal rx antennas ({rx_antennas})"
        )));
    }
    if tx_antennas < rx_antennas {
        return Err(Error::Dimension(format!(
            "tx antennas ({tx_antennas}) must be >= rx antennas ({rx_antennas})"
        )));
    }

    let t = time_slots;
    let mut basis = DMatrix::<f64>::identity(t, t);
    for i in 0..t.saturating_sub(1) {
        let mut g = DMatrix::<f64>::identity(t, t);
        g[(i, i)] = ROT_C;
        g[(i, i + 1)] = -rot_s();
        g[(i + 1, i)] = rot_s();
        g[(i + 1, i + 1)] = ROT_C;
        basis *= g;
    }
    let vectors = (0..t)
        .map(|j| DVector::from(basis.column(j).into_owned()))
        .collect();

    let mut tx_map = DMatrix::<f64>::zeros(tx_antennas, streams);
    for i in 0..streams {
        tx_map[(i, i)] = 1.0;
    }
    let rx_map = DMatrix::<f64>::identity(streams, rx_antennas);

    Ok(PrecodingSet {
        vectors,
        tx_map,
        rx_map,
    })
}

/// Superposition transmit vector `x = sum_k sqrt(P_k) (v_{t(k)} (x) U) x_k`.
///
/// `symbols[k]` is user `k`'s `L x 1` symbol vector for this block; the
/// result is `(T N_t) x 1` and linear in every user's symbols.
pub fn transmit(
    symbols: &[DVector<Cx>],
    allocation: &PowerAllocation,
    precoders: &PrecodingSet,
    scenario: &Scenario,
) -> Result<DVector<Cx>> {
    if symbols.len() != scenario.user_count() {
        return Err(Error::Dimension(format!(
            "need one symbol vector per user ({}), got {}",
            scenario.user_count(),
            symbols.len()
        )));
    }
    let streams = scenario.streams_per_user();
    let mut x = DVector::<Cx>::zeros(scenario.group_count() * scenario.tx_antennas());
    for (user, sym) in symbols.iter().enumerate() {
        if sym.len() != streams {
            return Err(Error::Dimension(format!(
                "user {} has {} symbols per block, expected {streams}",
                user + 1,
                sym.len()
            )));
        }
        let op = precoders.tx_operator(scenario.group_of(user));
        let amp = allocation.power(user).sqrt();
        x += op * sym * Cx::new(amp, 0.0);
    }
    Ok(x)
}

/// Inter-group cancellation: project the received block with `v_i^T (x) S`.
///
/// For a receiver `k` in group `i`, every term transmitted to a group
/// `j != i` vanishes identically because `v_i^T v_j = 0`, leaving
/// `sum_{j in G_i} sqrt(P_j gamma_k) (S h_k U) x_j` plus noise that stays
/// white with the same variance.
pub fn tim_postprocess(
    received: &DVector<Cx>,
    group: usize,
    precoders: &PrecodingSet,
    scenario: &Scenario,
) -> Result<DVector<Cx>> {
    if group >= precoders.group_count() {
        return Err(Error::Dimension(format!(
            "group index {group} out of range ({} groups)",
            precoders.group_count()
        )));
    }
    let expected = scenario.group_count() * scenario.rx_antennas();
    if received.len() != expected {
        return Err(Error::Dimension(format!(
            "received block has {} entries, expected {expected}",
            received.len()
        )));
    }
    Ok(precoders.rx_operator(group) * received)
}

/// Post-TIM effective channel `M_k = S h_k U` of `user` (an `L x L` complex
/// matrix; the path-loss amplitude is kept separate).
pub fn effective_channel(
    precoders: &PrecodingSet,
    channel: &ChannelRealization,
    user: usize,
) -> DMatrix<Cx> {
    to_complex(precoders.rx_map()) * channel.fading(user) * to_complex(precoders.tx_map())
}

/// Everything a receiver knows when running SIC: its own effective channel,
/// path gain, the group power plan and the operating noise level.
#[derive(Debug, Clone)]
pub struct ReceiverContext {
    /// Receiver's user id.
    pub receiver: usize,
    /// `M_k = S h_k U` for this receiver.
    pub effective_channel: DMatrix<Cx>,
    /// Path-loss gain `gamma_k`.
    pub gamma: f64,
    /// Noise variance `sigma_n^2` at the receiver input.
    pub sigma2: f64,
    /// Constellation used by every stream.
    pub constellation: Constellation,
}

impl ReceiverContext {
    /// Assemble the context for `user` from a channel realization.
    pub fn new(
        scenario: &Scenario,
        precoders: &PrecodingSet,
        channel: &ChannelRealization,
        user: usize,
        sigma2: f64,
        constellation: Constellation,
    ) -> Self {
        ReceiverContext {
            receiver: user,
            effective_channel: effective_channel(precoders, channel, user),
            gamma: scenario.gain(user),
            sigma2,
            constellation,
        }
    }

    /// Detection gain for group member `j` as seen by this receiver:
    /// `sqrt(P_j gamma_k) M_k`.
    fn member_gain(&self, allocation: &PowerAllocation, member: usize) -> DMatrix<Cx> {
        let amp = (allocation.power(member) * self.gamma).sqrt();
        self.effective_channel.map(|z| z * amp)
    }

    /// Average per-stream power of `sqrt(P_j gamma_k) M_k x_j` for
    /// unit-energy symbols; the interference term of the detector's noise
    /// budget.
    fn member_interference_power(&self, allocation: &PowerAllocation, member: usize) -> f64 {
        let streams = self.effective_channel.ncols() as f64;
        allocation.power(member) * self.gamma * self.effective_channel.norm_squared() / streams
    }

    /// ML detection of one member under unpeeled-interference statistics.
    ///
    /// `interference_coeff` is `sum_m P_m gamma_k` over the members treated
    /// as noise; when positive, the observation and gain are whitened by the
    /// Cholesky factor of `sigma2 I + interference_coeff * M M^H`. A
    /// singular covariance (an exactly rank-deficient fading draw) falls
    /// back to the plain metric.
    fn detect(
        &self,
        observed: &DVector<Cx>,
        gain: &DMatrix<Cx>,
        interference_coeff: f64,
        noise_plus_interference: f64,
    ) -> crate::error::Result<DVector<Cx>> {
        if interference_coeff > 0.0 {
            let m = &self.effective_channel;
            let cov = m * m.adjoint() * Cx::new(interference_coeff, 0.0)
                + DMatrix::<Cx>::identity(m.nrows(), m.nrows()) * Cx::new(self.sigma2, 0.0);
            if let Some(chol) = Cholesky::new(cov) {
                let l = chol.l();
                if let (Some(obs_w), Some(gain_w)) = (
                    l.solve_lower_triangular(observed),
                    l.solve_lower_triangular(gain),
                ) {
                    return ml_detect(
                        &obs_w,
                        &gain_w,
                        noise_plus_interference,
                        self.constellation,
                    );
                }
            }
        }
        ml_detect(observed, gain, noise_plus_interference, self.constellation)
    }
}

/// One peeling step of a SIC decode.
#[derive(Debug, Clone)]
pub struct SicStep {
    /// Group member whose signal was detected and removed.
    pub user: usize,
    /// Detected symbol vector for that member.
    pub estimate: DVector<Cx>,
    /// Residual signal after subtracting the reconstructed contribution.
    pub residual_after: DVector<Cx>,
    /// Interference-plus-noise variance the detector was given.
    pub noise_plus_interference: f64,
}

/// Full record of one receiver's two-stage decode.
#[derive(Debug, Clone)]
pub struct DecodeTrace {
    /// Receiver's user id.
    pub receiver: usize,
    /// Post-processed input the SIC started from.
    pub post_processed: DVector<Cx>,
    /// Peeling steps in decode order (farthest member first). The number of
    /// steps equals the number of group members farther than the receiver.
    pub steps: Vec<SicStep>,
    /// Detected own symbols.
    pub own_estimate: DVector<Cx>,
    /// Interference-plus-noise variance for the final own detection.
    pub own_noise_plus_interference: f64,
}

impl DecodeTrace {
    /// Number of peeled members.
    pub fn peel_count(&self) -> usize {
        self.steps.len()
    }
}

/// Successive interference cancellation at one receiver.
///
/// Iterates over the group members farther than the receiver in SIC order:
/// ML-detects that member's symbols (all not-yet-peeled group signals,
/// including the receiver's own, count towards the detector's noise budget),
/// reconstructs `sqrt(P_j gamma_k) M_k x~_j` from the *detected* estimate
/// and subtracts it from the running residual. Finally the receiver's own
/// symbols are detected with only the nearer members left as interference.
pub fn sic_decode(
    post_processed: &DVector<Cx>,
    context: &ReceiverContext,
    allocation: &PowerAllocation,
    scenario: &Scenario,
) -> Result<DecodeTrace> {
    let receiver = context.receiver;
    if receiver >= scenario.user_count() {
        return Err(Error::Scenario(format!(
            "receiver id {receiver} out of range, cell has {} users",
            scenario.user_count()
        )));
    }
    let group = scenario.group_of(receiver);
    let order = sic_order(scenario, group)?;
    if post_processed.len() != context.effective_channel.nrows() {
        return Err(Error::Dimension(format!(
            "post-processed block has {} entries, expected {}",
            post_processed.len(),
            context.effective_channel.nrows()
        )));
    }

    let own_position = order.iter().position(|&u| u == receiver).ok_or_else(|| {
        Error::Scenario(format!(
            "user {} is not a member of group {}",
            receiver + 1,
            group + 1
        ))
    })?;
    let mut residual = post_processed.clone();
    let mut steps = Vec::with_capacity(own_position);

    for step in 0..own_position {
        let target = order[step];
        // Noise budget: thermal noise plus every not-yet-peeled member other
        // than the one being detected.
        let others: Vec<usize> = order[step..]
            .iter()
            .copied()
            .filter(|&j| j != target)
            .collect();
        let coeff: f64 = others
            .iter()
            .map(|&j| allocation.power(j) * context.gamma)
            .sum();
        let nv = context.sigma2
            + others
                .iter()
                .map(|&j| context.member_interference_power(allocation, j))
                .sum::<f64>();
        let gain = context.member_gain(allocation, target);
        let estimate = context.detect(&residual, &gain, coeff, nv)?;
        residual -= &gain * &estimate;
        steps.push(SicStep {
            user: target,
            estimate,
            residual_after: residual.clone(),
            noise_plus_interference: nv,
        });
    }

    let nearer = &order[own_position + 1..];
    let coeff: f64 = nearer
        .iter()
        .map(|&j| allocation.power(j) * context.gamma)
        .sum();
    let own_nv = context.sigma2
        + nearer
            .iter()
            .map(|&j| context.member_interference_power(allocation, j))
            .sum::<f64>();
    let own_gain = context.member_gain(allocation, receiver);
    let own_estimate = context.detect(&residual, &own_gain, coeff, own_nv)?;

    Ok(DecodeTrace {
        receiver,
        post_processed: post_processed.clone(),
        steps,
        own_estimate,
        own_noise_plus_interference: own_nv,
    })
}
