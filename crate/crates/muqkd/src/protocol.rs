//! Roles, round transcripts, and the classical-channel message schema.
//!
//! One round walks the subsystem of server Alice, sender Bob, and receiver
//! Carol: Alice prepares |φ⁺⟩ and sends the traveling particle to Bob; Bob
//! either checks the channel (control), encodes two bits with a local unitary
//! (coding), or substitutes a self-prepared decoy qubit (decoy); Carol checks
//! or encodes in turn and returns the particle; Alice joint-measures the pair
//! and announces the combined operation, from which Carol strips her own to
//! recover Bob's bits. The per-round outcome is a [`RoundRecord`]; the session
//! driver that wires rounds through channels and adversaries lives in
//! [`crate::session`].

use crate::error::{Error, Result};
use crate::quantum::{bell_state, BellLabel, EncodingOp, MeasBasis, TwoQubitState};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-round mode of a user. Decoy is valid only for the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Control,
    Coding,
    Decoy,
}

/// Mode-selection probabilities for the two users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProbabilities {
    pub p_control_bob: f64,
    pub p_decoy_bob: f64,
    pub p_control_carol: f64,
}

impl Default for ModeProbabilities {
    fn default() -> Self {
        // Small check fractions maximize throughput; all configurable.
        ModeProbabilities {
            p_control_bob: 0.1,
            p_decoy_bob: 0.1,
            p_control_carol: 0.1,
        }
    }
}

impl ModeProbabilities {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_control_bob", self.p_control_bob),
            ("p_decoy_bob", self.p_decoy_bob),
            ("p_control_carol", self.p_control_carol),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if self.p_control_bob + self.p_decoy_bob > 1.0 {
            return Err(Error::Config(format!(
                "p_control_bob + p_decoy_bob = {} exceeds 1",
                self.p_control_bob + self.p_decoy_bob
            )));
        }
        Ok(())
    }
}

/// A recorded single-particle measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub basis: MeasBasis,
    pub bit: u8,
}

/// A decoy preparation: basis and eigenvalue bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyPrep {
    pub basis: MeasBasis,
    pub value: u8,
}

/// Full transcript of one protocol round.
///
/// Exactly the fields implied by the mode combination are present: e.g.
/// `alice_announcement` exists iff the traveling particle came back to the
/// server, and `bob_mode` itself is absent when the particle was lost before
/// reaching Bob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: u64,
    pub lost: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bob_mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carol_mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bob_op: Option<EncodingOp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carol_op: Option<EncodingOp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoy: Option<DecoyPrep>,
    /// Bob's single-particle measurement: the control check, or the retained
    /// particle B in a decoy round (recorded, unused by default).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bob_measurement: Option<Measurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carol_measurement: Option<Measurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alice_measurement: Option<Measurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alice_announcement: Option<EncodingOp>,
}

impl RoundRecord {
    pub fn new(round_id: u64) -> Self {
        RoundRecord {
            round_id,
            lost: false,
            bob_mode: None,
            carol_mode: None,
            bob_op: None,
            carol_op: None,
            decoy: None,
            bob_measurement: None,
            carol_measurement: None,
            alice_measurement: None,
            alice_announcement: None,
        }
    }

    /// True when both users chose coding on a genuine (non-decoy) particle
    /// and the round completed through the announcement.
    pub fn is_double_coding(&self) -> bool {
        !self.lost
            && self.bob_mode == Some(Mode::Coding)
            && self.carol_mode == Some(Mode::Coding)
            && self.alice_announcement.is_some()
    }

    /// Carol's decode of Bob's bits for this round. Errors unless the round
    /// is a completed genuine double-coding round.
    pub fn decode_carol(&self) -> Result<EncodingOp> {
        if !self.is_double_coding() {
            return Err(Error::Contract(format!(
                "round {} is not a double-coding round; nothing to decode",
                self.round_id
            )));
        }
        let announced = self.alice_announcement.unwrap();
        let own = self.carol_op.unwrap();
        Ok(carol_decode(announced, own))
    }
}

/// Strip Carol's own operation from the announced combination. The group is
/// its own inverse, so this is a plain XOR and equals Bob's operation on an
/// honest, noiseless round.
pub fn carol_decode(announced: EncodingOp, own: EncodingOp) -> EncodingOp {
    announced.compose(own)
}

/// Server-side pair preparation: a fresh |φ⁺⟩ with the second slot
/// designated as the traveling particle B.
pub fn alice_prepare() -> TwoQubitState {
    bell_state(BellLabel::PhiPlus)
}

/// Map a joint Bell-measurement result to the operation announced in public:
/// the encoding that carries |φ⁺⟩ onto the measured state.
pub fn announcement_for(label: BellLabel) -> EncodingOp {
    label.encoding()
}

/// The server's step once the particle returns: joint Bell measurement of
/// (held, returned), announced as the combined operation. On an honest,
/// noiseless double-coding round this equals the XOR of both users'
/// operations with certainty.
pub fn alice_announce<R: Rng>(carrier: &crate::carrier::Carrier, rng: &mut R) -> EncodingOp {
    announcement_for(carrier.joint_bell_measure(rng))
}

/// Bob's sampled decision for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BobAction {
    /// Measure the received particle and request the server's same-basis
    /// check measurement.
    Control { basis: MeasBasis },
    /// Encode two bits on the traveling particle and forward it.
    Code { op: EncodingOp },
    /// Forward a self-prepared decoy instead of the received particle, and
    /// measure the retained particle in the decoy's basis.
    SendDecoy { prep: DecoyPrep },
}

impl BobAction {
    pub fn mode(&self) -> Mode {
        match self {
            BobAction::Control { .. } => Mode::Control,
            BobAction::Code { .. } => Mode::Coding,
            BobAction::SendDecoy { .. } => Mode::Decoy,
        }
    }
}

/// Carol's sampled decision for one round. She has no decoy mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarolAction {
    Control { basis: MeasBasis },
    Code { op: EncodingOp },
}

impl CarolAction {
    pub fn mode(&self) -> Mode {
        match self {
            CarolAction::Control { .. } => Mode::Control,
            CarolAction::Code { .. } => Mode::Coding,
        }
    }
}

/// Sample Bob's mode and its parameters.
pub fn bob_decide<R: Rng>(probs: &ModeProbabilities, rng: &mut R) -> BobAction {
    let draw = rng.random::<f64>();
    if draw < probs.p_control_bob {
        BobAction::Control {
            basis: MeasBasis::sample(rng),
        }
    } else if draw < probs.p_control_bob + probs.p_decoy_bob {
        let basis = MeasBasis::sample(rng);
        let value = rng.random_range(0..2u8);
        BobAction::SendDecoy {
            prep: DecoyPrep { basis, value },
        }
    } else {
        BobAction::Code {
            op: EncodingOp::sample(rng),
        }
    }
}

/// Sample Carol's mode and its parameters.
pub fn carol_decide<R: Rng>(probs: &ModeProbabilities, rng: &mut R) -> CarolAction {
    if rng.random::<f64>() < probs.p_control_carol {
        CarolAction::Control {
            basis: MeasBasis::sample(rng),
        }
    } else {
        CarolAction::Code {
            op: EncodingOp::sample(rng),
        }
    }
}

/// Classical-channel messages. Used in process, but serializable: the wire
/// layout is a one-byte tag, round ids as unsigned 64-bit little-endian,
/// op codes as a 2-bit value in one byte, bases as one byte (0 = Z, 1 = X).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "msg", rename_all = "snake_case")]
pub enum ClassicalMessage {
    BasisRequest {
        round: u64,
        basis: MeasBasis,
    },
    MeasResult {
        round: u64,
        basis: MeasBasis,
        bit: u8,
    },
    BellAnnounce {
        round: u64,
        op_code: u8,
    },
    DecoyPositions {
        round_ids: Vec<u64>,
    },
    SampleReveal {
        round: u64,
        op_code: u8,
    },
}

const TAG_BASIS_REQUEST: u8 = 1;
const TAG_MEAS_RESULT: u8 = 2;
const TAG_BELL_ANNOUNCE: u8 = 3;
const TAG_DECOY_POSITIONS: u8 = 4;
const TAG_SAMPLE_REVEAL: u8 = 5;

impl ClassicalMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10);
        match self {
            ClassicalMessage::BasisRequest { round, basis } => {
                out.push(TAG_BASIS_REQUEST);
                out.extend_from_slice(&round.to_le_bytes());
                out.push(basis.to_byte());
            }
            ClassicalMessage::MeasResult { round, basis, bit } => {
                out.push(TAG_MEAS_RESULT);
                out.extend_from_slice(&round.to_le_bytes());
                out.push(basis.to_byte());
                out.push(*bit & 1);
            }
            ClassicalMessage::BellAnnounce { round, op_code } => {
                out.push(TAG_BELL_ANNOUNCE);
                out.extend_from_slice(&round.to_le_bytes());
                out.push(*op_code & 0b11);
            }
            ClassicalMessage::DecoyPositions { round_ids } => {
                out.push(TAG_DECOY_POSITIONS);
                out.extend_from_slice(&(round_ids.len() as u64).to_le_bytes());
                for id in round_ids {
                    out.extend_from_slice(&id.to_le_bytes());
                }
            }
            ClassicalMessage::SampleReveal { round, op_code } => {
                out.push(TAG_SAMPLE_REVEAL);
                out.extend_from_slice(&round.to_le_bytes());
                out.push(*op_code & 0b11);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        fn u64_at(bytes: &[u8], at: usize) -> Result<u64> {
            let slice = bytes
                .get(at..at + 8)
                .ok_or_else(|| Error::Wire("truncated u64 field".into()))?;
            Ok(u64::from_le_bytes(slice.try_into().unwrap()))
        }
        fn byte_at(bytes: &[u8], at: usize) -> Result<u8> {
            bytes
                .get(at)
                .copied()
                .ok_or_else(|| Error::Wire("truncated byte field".into()))
        }
        fn basis_at(bytes: &[u8], at: usize) -> Result<MeasBasis> {
            let b = byte_at(bytes, at)?;
            MeasBasis::from_byte(b).ok_or_else(|| Error::Wire(format!("invalid basis byte {b}")))
        }

        let tag = byte_at(bytes, 0)?;
        let msg = match tag {
            TAG_BASIS_REQUEST => ClassicalMessage::BasisRequest {
                round: u64_at(bytes, 1)?,
                basis: basis_at(bytes, 9)?,
            },
            TAG_MEAS_RESULT => ClassicalMessage::MeasResult {
                round: u64_at(bytes, 1)?,
                basis: basis_at(bytes, 9)?,
                bit: byte_at(bytes, 10)? & 1,
            },
            TAG_BELL_ANNOUNCE => ClassicalMessage::BellAnnounce {
                round: u64_at(bytes, 1)?,
                op_code: byte_at(bytes, 9)? & 0b11,
            },
            TAG_DECOY_POSITIONS => {
                let len = u64_at(bytes, 1)? as usize;
                let mut round_ids = Vec::with_capacity(len.min(1 << 20));
                for i in 0..len {
                    round_ids.push(u64_at(bytes, 9 + 8 * i)?);
                }
                ClassicalMessage::DecoyPositions { round_ids }
            }
            TAG_SAMPLE_REVEAL => ClassicalMessage::SampleReveal {
                round: u64_at(bytes, 1)?,
                op_code: byte_at(bytes, 9)? & 0b11,
            },
            other => return Err(Error::Wire(format!("unknown message tag {other}"))),
        };
        Ok(msg)
    }
}
