//! One session: a fixed number of rounds driven through the three-segment
//! subsystem, producing a transcript, the classical-channel message log, and
//! the adversary's private log.
//!
//! Determinism contract: a session is a pure function of its parameters and
//! seed. All randomness flows through one ChaCha stream derived from the
//! seed, consumed in a fixed order per round.

use crate::adversary::{eve_intercept_resend, server_bell_attack, AdversaryLog, AdversaryModel};
use crate::carrier::Carrier;
use crate::network::{transmit, Arrival, SegmentChannels, SegmentKind};
use crate::protocol::{
    alice_announce, alice_prepare, bob_decide, carol_decide, BobAction, CarolAction,
    ClassicalMessage, Measurement, Mode, ModeProbabilities, RoundRecord,
};
use crate::quantum::prepare_decoy;
use crate::rng;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionParams {
    pub rounds: u64,
    pub probs: ModeProbabilities,
    pub channels: SegmentChannels,
    pub adversary: AdversaryModel,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            rounds: 10_000,
            probs: ModeProbabilities::default(),
            channels: SegmentChannels::default(),
            adversary: AdversaryModel::None,
        }
    }
}

/// Everything one session leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTranscript {
    pub records: Vec<RoundRecord>,
    pub messages: Vec<ClassicalMessage>,
    pub adversary_log: AdversaryLog,
    /// Decoy positions as disclosed after the quantum phase (step order:
    /// announced last, then used to discard and classify).
    pub decoy_positions: Vec<u64>,
}

/// Run one session from a seed. Lost rounds are flagged and the loop
/// continues with a fresh pair under a fresh round id.
pub fn run_session(params: &SessionParams, seed: u64) -> SessionTranscript {
    let mut stream = rng::stream(rng::derive_seed(seed, rng::label::ROUNDS));
    let mut records = Vec::with_capacity(params.rounds as usize);
    let mut messages = Vec::new();
    let mut adversary_log = AdversaryLog::default();
    let mut decoy_positions = Vec::new();

    for round_id in 0..params.rounds {
        let record = run_round(
            round_id,
            params,
            &mut stream,
            &mut messages,
            &mut adversary_log,
            &mut decoy_positions,
        );
        records.push(record);
    }

    messages.push(ClassicalMessage::DecoyPositions {
        round_ids: decoy_positions.clone(),
    });

    SessionTranscript {
        records,
        messages,
        adversary_log,
        decoy_positions,
    }
}

fn run_round<R: Rng>(
    round_id: u64,
    params: &SessionParams,
    rng: &mut R,
    messages: &mut Vec<ClassicalMessage>,
    adversary_log: &mut AdversaryLog,
    decoy_positions: &mut Vec<u64>,
) -> RoundRecord {
    let mut rec = RoundRecord::new(round_id);
    let mut carrier = Carrier::entangled(alice_prepare());

    if traverse(
        SegmentKind::AliceToBob,
        &mut carrier,
        round_id,
        params,
        rng,
        adversary_log,
    ) == Arrival::Lost
    {
        rec.lost = true;
        return rec;
    }

    match bob_decide(&params.probs, rng) {
        BobAction::Control { basis } => {
            rec.bob_mode = Some(Mode::Control);
            let bit = carrier.measure_traveling(basis, rng);
            rec.bob_measurement = Some(Measurement { basis, bit });
            messages.push(ClassicalMessage::BasisRequest {
                round: round_id,
                basis,
            });
            let alice_bit = carrier.measure_held(basis, rng);
            rec.alice_measurement = Some(Measurement {
                basis,
                bit: alice_bit,
            });
            messages.push(ClassicalMessage::MeasResult {
                round: round_id,
                basis,
                bit: alice_bit,
            });
            return rec;
        }
        BobAction::Code { op } => {
            rec.bob_mode = Some(Mode::Coding);
            rec.bob_op = Some(op);
            carrier.apply_traveling(op);
        }
        BobAction::SendDecoy { prep } => {
            rec.bob_mode = Some(Mode::Decoy);
            rec.decoy = Some(prep);
            // Bob keeps the genuine particle and measures it in the decoy's
            // basis; recorded, unused by the default checks.
            let retained = carrier.measure_traveling(prep.basis, rng);
            rec.bob_measurement = Some(Measurement {
                basis: prep.basis,
                bit: retained,
            });
            carrier.set_traveling(prepare_decoy(prep.basis, prep.value));
            decoy_positions.push(round_id);
        }
    }

    if traverse(
        SegmentKind::BobToCarol,
        &mut carrier,
        round_id,
        params,
        rng,
        adversary_log,
    ) == Arrival::Lost
    {
        rec.lost = true;
        return rec;
    }

    match carol_decide(&params.probs, rng) {
        CarolAction::Control { basis } => {
            rec.carol_mode = Some(Mode::Control);
            let bit = carrier.measure_traveling(basis, rng);
            rec.carol_measurement = Some(Measurement { basis, bit });
            messages.push(ClassicalMessage::BasisRequest {
                round: round_id,
                basis,
            });
            let alice_bit = carrier.measure_held(basis, rng);
            rec.alice_measurement = Some(Measurement {
                basis,
                bit: alice_bit,
            });
            messages.push(ClassicalMessage::MeasResult {
                round: round_id,
                basis,
                bit: alice_bit,
            });
            return rec;
        }
        CarolAction::Code { op } => {
            rec.carol_mode = Some(Mode::Coding);
            rec.carol_op = Some(op);
            carrier.apply_traveling(op);
        }
    }

    if traverse(
        SegmentKind::CarolToAlice,
        &mut carrier,
        round_id,
        params,
        rng,
        adversary_log,
    ) == Arrival::Lost
    {
        rec.lost = true;
        return rec;
    }

    let announced = alice_announce(&carrier, rng);
    rec.alice_announcement = Some(announced);
    messages.push(ClassicalMessage::BellAnnounce {
        round: round_id,
        op_code: announced.code(),
    });
    rec
}

/// Channel transit plus any in-line adversary action on this segment. The
/// malicious server strikes right after the sender's transmission, i.e. at
/// the head of the Bob→Carol segment.
fn traverse<R: Rng>(
    segment: SegmentKind,
    carrier: &mut Carrier,
    round_id: u64,
    params: &SessionParams,
    rng: &mut R,
    adversary_log: &mut AdversaryLog,
) -> Arrival {
    if let AdversaryModel::MaliciousServer { attack_fraction } = params.adversary {
        if segment == SegmentKind::BobToCarol && rng.random::<f64>() < attack_fraction {
            adversary_log
                .server
                .push(server_bell_attack(carrier, round_id, rng));
        }
    }

    let arrival = transmit(carrier, params.channels.for_segment(segment), rng);
    if arrival == Arrival::Lost {
        return Arrival::Lost;
    }

    if let AdversaryModel::ExternalEve {
        segment: eve_segment,
        attack_fraction,
    } = params.adversary
    {
        if segment == eve_segment && rng.random::<f64>() < attack_fraction {
            adversary_log
                .eve
                .push(eve_intercept_resend(carrier, round_id, rng));
        }
    }

    Arrival::Arrived
}
