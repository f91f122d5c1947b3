//! End-to-end retrieval runs, error-rate estimation, rate sweeps and
//! privacy audits.
//!
//! One retrieval: sample the store, draw the queries, pair the servers,
//! form the answers, encode each block with the shared lattice code, pass the
//! superposition through the channel, decode the sum per block, map it back
//! to F_p and undo the sign.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelRealization};
use crate::exec::{self, Execution};
use crate::ffield::{Message, MessageStore};
use crate::lattice::{Dither, NestedLatticeCode};
use crate::protocol::{self, ChannelMode, PairingPlan, PrivacyReport, Role};
use crate::rates::{self, RateReport};
use crate::seed;
use crate::stats::ErrorRate;
use crate::{Error, Result};

/// Parameters shared by every trial of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub servers: usize,
    pub messages: usize,
    pub p: u64,
    /// Message symbols per lattice codeword.
    pub k: usize,
    /// Lattice dimension (channel uses per codeword).
    pub n: usize,
    /// Message length `L`; a multiple of `k`.
    pub message_len: usize,
    pub trials: u64,
    pub mode: ChannelMode,
    pub noiseless: bool,
    pub seed: u64,
    /// Seed of the generator matrix; the same code is scaled to every power.
    pub code_seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.servers < 2 {
            return Err(Error::TooSmall { what: "N", min: 2, got: self.servers });
        }
        if self.messages == 0 {
            return Err(Error::TooSmall { what: "M", min: 1, got: 0 });
        }
        if self.k == 0 || self.message_len == 0 || !self.message_len.is_multiple_of(self.k) {
            return Err(Error::InvalidConfig(format!(
                "message length {} must be a positive multiple of k = {}",
                self.message_len, self.k
            )));
        }
        Ok(())
    }

    pub fn code(&self, power: f64) -> Result<NestedLatticeCode> {
        NestedLatticeCode::build(self.n, self.p, self.k, power, self.code_seed)
    }
}

/// Result of one retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub retrieved: Message,
    pub success: bool,
    pub block_errors: usize,
    pub blocks: usize,
    /// Decoded `A1 + A2` before the sign is removed.
    pub decoded_sum: Message,
    /// `linear_combine(store, a1·q1' + a2·q2')`, i.e. `±W_i`.
    pub expected_sum: Message,
    /// Effective gains seen by the two query roles.
    pub gains: [f64; 2],
}

/// The effective two-user channel produced by a pairing plan.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveLink {
    pub plan: PairingPlan,
    pub gains: [f64; 2],
    /// Integer coefficients the decoder targets (sign-matched gains).
    pub coeffs: [i64; 2],
    /// Decoder scale `P h̃ᵀa / (σ² + P‖h̃‖²)`.
    pub scale: f64,
}

impl EffectiveLink {
    pub fn new(chan: &ChannelRealization, mode: ChannelMode) -> Result<Self> {
        let plan = protocol::plan_servers(chan.servers(), mode, Some(&chan.h), chan.power)?;
        let gains = [
            plan.first.iter().map(|&s| chan.h[s]).sum::<f64>(),
            plan.second.iter().map(|&s| chan.h[s]).sum::<f64>(),
        ];
        let signs = rates::sign_match_coeffs(&gains);
        let coeffs = [signs[0], signs[1]];
        let ha = gains[0] * coeffs[0] as f64 + gains[1] * coeffs[1] as f64;
        let hh = gains[0] * gains[0] + gains[1] * gains[1];
        let den = chan.noise_variance() + chan.power * hh;
        let scale = if den > 0.0 { chan.power * ha / den } else { 0.0 };
        Ok(Self { plan, gains, coeffs, scale })
    }
}

/// Runs one private retrieval of message `index` (0-based).
///
/// Each role's query is pre-multiplied by its sign coefficient `a_j`, so the
/// decoded `a1·(a1 A1) + a2·(a2 A2)` is `A1 + A2 = ±W_i` whatever the signs of
/// the effective gains. Every server in a role transmits the same signal.
pub fn run_retrieval(
    config: &TrialConfig,
    code: &NestedLatticeCode,
    chan: &ChannelRealization,
    index: usize,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    config.validate()?;
    if chan.servers() != config.servers {
        return Err(Error::LengthMismatch { expected: config.servers, found: chan.servers() });
    }
    let store = MessageStore::sample(trial_seed, config.messages, config.message_len, config.p)?;
    let queries = protocol::make_queries(trial_seed, config.messages, index)?;
    let link = EffectiveLink::new(chan, config.mode)?;

    let role_query = |role: Role, coeff: i64| -> Vec<i64> {
        queries.query(role).iter().map(|q| coeff * q).collect()
    };
    let q = [role_query(Role::First, link.coeffs[0]), role_query(Role::Second, link.coeffs[1])];
    let answers = [
        protocol::answer(&store, link.plan.first[0], &q[0])?.payload,
        protocol::answer(&store, link.plan.second[0], &q[1])?.payload,
    ];
    // every server of a role holds the same answer; check the plan-level invariant
    let combined: Vec<i64> = q[0]
        .iter()
        .zip(&q[1])
        .map(|(a, b)| link.coeffs[0] * a + link.coeffs[1] * b)
        .collect();
    let expected_sum = store.linear_combine(&combined)?;

    let mut dither_rng = seed::rng(trial_seed, seed::tag::DITHERS);
    let mut noise_rng = seed::rng(trial_seed, seed::tag::NOISE);
    let blocks0 = answers[0].blocks(code.block_len())?;
    let blocks1 = answers[1].blocks(code.block_len())?;
    let silent = vec![0.0; code.dimension()];
    let mut decoded = Vec::with_capacity(config.message_len);
    let mut block_errors = 0;
    for (b0, b1) in blocks0.iter().zip(&blocks1) {
        let d1 = Dither::sample(code, &mut dither_rng);
        let d2 = Dither::sample(code, &mut dither_rng);
        let x1 = code.encode(b0, &d1)?;
        let x2 = code.encode(b1, &d2)?;
        let xs: Vec<Vec<f64>> = (0..config.servers)
            .map(|s| match link.plan.role_of(s) {
                Some(Role::First) => x1.clone(),
                Some(Role::Second) => x2.clone(),
                None => silent.clone(),
            })
            .collect();
        let y = channel::transmit(&xs, chan, &mut noise_rng)?;
        let point = code.decode_combination(&y, &[(link.coeffs[0], &d1), (link.coeffs[1], &d2)], link.scale)?;
        let f = code.field();
        let want: Vec<u64> = b0
            .iter()
            .zip(b1.iter())
            .map(|(&u, &v)| f.add(f.mul(f.reduce(link.coeffs[0]), u), f.mul(f.reduce(link.coeffs[1]), v)))
            .collect();
        if point.label != want {
            block_errors += 1;
        }
        decoded.extend(point.label);
    }
    let decoded_sum = Message::new(store.field(), decoded)?;
    let retrieved = protocol::recover_message(&decoded_sum, queries.sum_sign());
    let success = &retrieved == store.get(index)?;
    Ok(TrialOutcome {
        index,
        retrieved,
        success,
        block_errors,
        blocks: blocks0.len(),
        decoded_sum,
        expected_sum,
        gains: link.gains,
    })
}

/// Channel for one trial: unit gains, or a fresh fading draw.
pub fn trial_channel(config: &TrialConfig, power: f64, trial_seed: u64) -> Result<ChannelRealization> {
    let chan = match config.mode {
        ChannelMode::Awgn => ChannelRealization::nonfading(config.servers, power),
        ChannelMode::Fading => channel::sample_fading(trial_seed, config.servers, power)?,
    };
    Ok(chan.with_noiseless(config.noiseless))
}

/// Error rate at power `code.power()` over `config.trials` retrievals.
/// Trial `t` retrieves message `t mod M` with seed `child(config.seed, t)`.
pub fn estimate_error_rate(config: &TrialConfig, code: &NestedLatticeCode, exec: Execution) -> Result<ErrorRate> {
    config.validate()?;
    let outcomes = exec::map_indexed(config.trials, exec, |t| -> Result<bool> {
        let trial_seed = seed::child(config.seed, t);
        let chan = trial_channel(config, code.power(), trial_seed)?;
        let index = (t % config.messages as u64) as usize;
        Ok(run_retrieval(config, code, &chan, index, trial_seed)?.success)
    });
    let mut errors = 0;
    for ok in outcomes {
        if !ok? {
            errors += 1;
        }
    }
    Ok(ErrorRate::new(errors, config.trials))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub snr_db: f64,
    pub power: f64,
    pub rate: ErrorRate,
}

/// Error rate at each power of `powers`, the same generator scaled to each.
pub fn simulate(config: &TrialConfig, powers: &[f64], exec: Execution) -> Result<Vec<SimPoint>> {
    powers
        .iter()
        .map(|&power| {
            let code = config.code(power)?;
            Ok(SimPoint { snr_db: rates::power_to_db(power), power, rate: estimate_error_rate(config, &code, exec)? })
        })
        .collect()
}

/// Rate table over a power grid.
///
/// Fading rows average over `draws` channel draws (the same draws at every
/// power), optimizing the server partition per draw; the separation column
/// is left empty there since the baseline has no closed form under fading.
pub fn sweep_rates(
    servers: usize,
    messages: usize,
    powers: &[f64],
    mode: ChannelMode,
    draws: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RateReport>> {
    if powers.is_empty() {
        return Err(Error::InvalidConfig("empty power grid".into()));
    }
    if let Some(&bad) = powers.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidConfig(format!("power {bad} is not positive")));
    }
    match mode {
        ChannelMode::Awgn => powers.iter().map(|&p| RateReport::awgn(servers, messages, p)).collect(),
        ChannelMode::Fading => {
            if draws == 0 {
                return Err(Error::TooSmall { what: "draws", min: 1, got: 0 });
            }
            rates::pir_capacity(servers, messages)?;
            let channels: Vec<Vec<f64>> = (0..draws)
                .map(|d| channel::sample_fading(seed::child(seed, d), servers, 1.0).map(|c| c.h))
                .collect::<Result<_>>()?;
            powers
                .iter()
                .map(|&power| {
                    let per_draw = exec::map_indexed(draws, exec, |d| -> Result<(f64, f64)> {
                        let h = &channels[d as usize];
                        Ok((rates::optimize_partition(h, power)?.rate, rates::miso_capacity(h, power)))
                    });
                    let (mut joint, mut miso) = (0.0, 0.0);
                    for r in per_draw {
                        let (j, m) = r?;
                        joint += j;
                        miso += m;
                    }
                    joint /= draws as f64;
                    miso /= draws as f64;
                    Ok(RateReport {
                        snr_db: rates::power_to_db(power),
                        power,
                        separation: None,
                        joint,
                        miso_capacity: miso,
                        gap: (joint > 0.0).then_some(miso - joint),
                        chosen: rates::Scheme::Joint,
                    })
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AuditMode {
    Exhaustive,
    Sampled { draws: u64, seed: u64 },
}

/// Audits every `M` in `messages`; `leaky` swaps in the negative-control
/// query builder that reveals `e_i`.
pub fn privacy_audit(
    messages: std::ops::RangeInclusive<usize>,
    mode: AuditMode,
    leaky: bool,
) -> Result<Vec<PrivacyReport>> {
    let builder: &dyn protocol::ViewBuilder =
        if leaky { &protocol::LeakyQueries } else { &protocol::HonestQueries };
    messages
        .map(|m| match mode {
            AuditMode::Exhaustive => protocol::verify_privacy(m, builder),
            AuditMode::Sampled { draws, seed } => protocol::verify_privacy_sampled(m, draws, seed, builder),
        })
        .collect()
}
