//! Pluggable attack strategies and their disturbance statistics.
//!
//! Two eavesdropper classes exist here. An external interceptor taps one
//! channel segment, measures each passing particle in a random basis, and
//! forwards the collapsed eigenstate; on basis-matched check samples this
//! produces the classic 25% error signature at full strength. The malicious
//! server holds particle A of every pair and attacks right after the sender's
//! transmission: on a genuine pair her joint Bell measurement is a projection
//! the pair already satisfies, so she reads the sender's operation without
//! leaving a trace. A substituted decoy she cannot recognize in advance: its
//! preparation basis is unknown to her, so her readout of the traveling
//! particle disturbs it exactly like an unknown-basis interceptor, and the
//! decoy checks light up at the same 25% while the genuine-pair checks stay
//! silent. That asymmetry is the detection mechanism this simulator exists to
//! reproduce.

use crate::carrier::Carrier;
use crate::error::{Error, Result};
use crate::network::SegmentKind;
use crate::quantum::{BellLabel, EncodingOp, MeasBasis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which adversary, if any, is active for a run. At most one per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryModel {
    None,
    ExternalEve {
        segment: SegmentKind,
        attack_fraction: f64,
    },
    MaliciousServer {
        attack_fraction: f64,
    },
}

impl AdversaryModel {
    pub fn validate(&self) -> Result<()> {
        let fraction = match self {
            AdversaryModel::None => return Ok(()),
            AdversaryModel::ExternalEve {
                attack_fraction, ..
            } => *attack_fraction,
            AdversaryModel::MaliciousServer { attack_fraction } => *attack_fraction,
        };
        if !(0.0..=1.0).contains(&fraction) || !fraction.is_finite() {
            return Err(Error::Config(format!(
                "attack_fraction = {fraction} is not in [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, AdversaryModel::None)
    }
}

/// One intercept-resend event by the external eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub round: u64,
    pub basis: MeasBasis,
    pub bit: u8,
}

/// What the malicious server observed in one attacked round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServerObservation {
    /// Joint Bell readout of (held, traveling); on a genuine pair this pins
    /// down the sender's operation.
    Bell { label: BellLabel },
    /// Unknown-basis readout of a lone traveling qubit (a decoy round).
    Intercept { basis: MeasBasis, bit: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerRecord {
    pub round: u64,
    pub observation: ServerObservation,
}

impl ServerRecord {
    /// The sender operation this observation identifies, when it does.
    pub fn learned_op(&self) -> Option<EncodingOp> {
        match self.observation {
            ServerObservation::Bell { label } => Some(label.encoding()),
            ServerObservation::Intercept { .. } => None,
        }
    }
}

/// Per-session accumulation of adversary activity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdversaryLog {
    pub eve: Vec<EveRecord>,
    pub server: Vec<ServerRecord>,
}

/// Measure the traveling particle in a uniformly random basis and forward the
/// post-measurement eigenstate.
pub fn eve_intercept_resend<R: Rng>(carrier: &mut Carrier, round: u64, rng: &mut R) -> EveRecord {
    let basis = MeasBasis::sample(rng);
    let bit = carrier.measure_traveling(basis, rng);
    EveRecord { round, basis, bit }
}

/// The server's attack after the sender's transmission. An entangled carrier
/// is projected onto the Bell basis — idempotent on the Bell states the
/// protocol actually produces, so undetectable there — and the outcome is
/// recorded. A split carrier means the traveling particle is a lone qubit
/// whose preparation basis the server does not know; her readout disturbs it
/// like an unknown-basis intercept, which is what the decoy checks detect.
pub fn server_bell_attack<R: Rng>(carrier: &mut Carrier, round: u64, rng: &mut R) -> ServerRecord {
    let observation = match carrier {
        Carrier::Entangled(_) => {
            let label = carrier.joint_bell_measure(rng);
            *carrier = Carrier::Entangled(crate::quantum::bell_state(label));
            ServerObservation::Bell { label }
        }
        Carrier::Split { .. } => {
            let basis = MeasBasis::sample(rng);
            let bit = carrier.measure_traveling(basis, rng);
            ServerObservation::Intercept { basis, bit }
        }
    };
    ServerRecord { round, observation }
}
