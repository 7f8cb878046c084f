//! Post-processing of a completed session: sample classification, error
//! rates, the accept/abort verdict, key distillation, and the efficiency
//! metrics.
//!
//! Check samples fall into four classes: the sender's control rounds (s_Bc),
//! the receiver's control rounds split by what she actually measured —
//! genuine pair (s_Cc0) versus decoy (s_Cc1) — and a random reveal sample of
//! double-coding rounds (s_w). Each non-lost round lands in at most one
//! class; double-coding rounds that survive the reveal draw carry the key.
//!
//! Distillation is deliberately simple: iterated block-parity exchange with
//! bisection of mismatching blocks (one bit discarded per revealed parity),
//! then privacy amplification through a seeded binary Toeplitz extractor
//! shrinking by the declared leak fraction.

use crate::adversary::AdversaryModel;
use crate::error::{Error, Result};
use crate::protocol::{ClassicalMessage, Mode, RoundRecord};
use crate::quantum::{EncodingOp, MeasBasis};
use crate::rng;
use crate::session::SessionTranscript;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Residual-error target that stops the correction loop.
const RESIDUAL_TARGET: f64 = 1e-3;
const BASE_BLOCK: usize = 8;
const MAX_PASSES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleClass {
    #[serde(rename = "s_bc")]
    SBc,
    #[serde(rename = "s_cc0")]
    SCc0,
    #[serde(rename = "s_cc1")]
    SCc1,
    #[serde(rename = "s_w")]
    SW,
}

/// A correlated control check: one party's outcome against the server's
/// same-basis published outcome, judged under the correlation rule of the
/// Bell state the pair should occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlCheck {
    pub round_id: u64,
    pub basis: MeasBasis,
    pub party_bit: u8,
    pub alice_bit: u8,
    /// Encoding whose Bell image the pair should be in (identity for checks
    /// upstream of the sender's coding).
    pub state_op: EncodingOp,
}

impl ControlCheck {
    pub fn is_error(&self) -> bool {
        (self.party_bit == self.alice_bit) != self.state_op.correlated_equal(self.basis)
    }
}

/// A decoy check: the receiver's outcome against the sender's preparation,
/// meaningful only when the bases match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoyCheck {
    pub round_id: u64,
    pub prep_basis: MeasBasis,
    pub prep_value: u8,
    pub carol_basis: MeasBasis,
    pub carol_bit: u8,
}

impl DecoyCheck {
    pub fn is_matched(&self) -> bool {
        self.carol_basis == self.prep_basis
    }

    pub fn is_error(&self) -> bool {
        self.is_matched() && self.carol_bit != self.prep_value
    }
}

/// A revealed double-coding round: the receiver's decode against the
/// sender's disclosed operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RevealCheck {
    pub round_id: u64,
    pub revealed: EncodingOp,
    pub decoded: EncodingOp,
}

impl RevealCheck {
    pub fn is_error(&self) -> bool {
        self.decoded != self.revealed
    }
}

/// A key-carrying round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyRound {
    pub round_id: u64,
    pub bob_op: EncodingOp,
    pub carol_decoded: EncodingOp,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Classified {
    pub s_bc: Vec<ControlCheck>,
    pub s_cc0: Vec<ControlCheck>,
    pub s_cc1: Vec<DecoyCheck>,
    pub s_w: Vec<RevealCheck>,
    pub key_rounds: Vec<KeyRound>,
    /// Decoy rounds the receiver unknowingly encoded on; discarded once the
    /// positions are disclosed.
    pub discarded_decoy_rounds: u64,
    pub lost_rounds: u64,
    pub total_rounds: u64,
}

/// Assign every non-lost round to at most one sample class. Fails if the
/// transcript contains a decoy round missing from the disclosure (the checks
/// cannot be split into s_Cc0/s_Cc1 before step-order disclosure) or a
/// disclosed position that is not actually a decoy round.
pub fn classify_samples<R: Rng>(
    records: &[RoundRecord],
    disclosed_decoys: &[u64],
    reveal_fraction: f64,
    rng: &mut R,
) -> Result<Classified> {
    if !(0.0..=1.0).contains(&reveal_fraction) || !reveal_fraction.is_finite() {
        return Err(Error::Config(format!(
            "reveal_fraction = {reveal_fraction} is not in [0, 1]"
        )));
    }
    let disclosed: HashSet<u64> = disclosed_decoys.iter().copied().collect();
    let by_id: std::collections::HashMap<u64, &RoundRecord> =
        records.iter().map(|r| (r.round_id, r)).collect();
    for &id in &disclosed {
        if !by_id
            .get(&id)
            .is_some_and(|r| r.bob_mode == Some(Mode::Decoy))
        {
            return Err(Error::Contract(format!(
                "disclosed decoy position {id} is not a decoy round"
            )));
        }
    }

    let mut out = Classified {
        total_rounds: records.len() as u64,
        ..Default::default()
    };

    for rec in records {
        if rec.lost {
            out.lost_rounds += 1;
            continue;
        }
        match rec.bob_mode {
            Some(Mode::Control) => {
                let bob = rec
                    .bob_measurement
                    .expect("control round has a measurement");
                let alice = rec.alice_measurement.expect("control round has a check");
                out.s_bc.push(ControlCheck {
                    round_id: rec.round_id,
                    basis: bob.basis,
                    party_bit: bob.bit,
                    alice_bit: alice.bit,
                    state_op: EncodingOp::U0,
                });
            }
            Some(Mode::Decoy) => {
                if !disclosed.contains(&rec.round_id) {
                    return Err(Error::UndisclosedDecoy(rec.round_id));
                }
                match rec.carol_mode {
                    Some(Mode::Control) => {
                        let prep = rec.decoy.expect("decoy round has a preparation");
                        let carol = rec.carol_measurement.expect("control round measured");
                        out.s_cc1.push(DecoyCheck {
                            round_id: rec.round_id,
                            prep_basis: prep.basis,
                            prep_value: prep.value,
                            carol_basis: carol.basis,
                            carol_bit: carol.bit,
                        });
                    }
                    _ => out.discarded_decoy_rounds += 1,
                }
            }
            Some(Mode::Coding) => match rec.carol_mode {
                Some(Mode::Control) => {
                    let carol = rec.carol_measurement.expect("control round measured");
                    let alice = rec.alice_measurement.expect("control round has a check");
                    out.s_cc0.push(ControlCheck {
                        round_id: rec.round_id,
                        basis: carol.basis,
                        party_bit: carol.bit,
                        alice_bit: alice.bit,
                        state_op: rec.bob_op.expect("coding round has an op"),
                    });
                }
                Some(Mode::Coding) => {
                    let bob_op = rec.bob_op.expect("coding round has an op");
                    let decoded = rec.decode_carol()?;
                    if reveal_fraction > 0.0 && rng.random::<f64>() < reveal_fraction {
                        out.s_w.push(RevealCheck {
                            round_id: rec.round_id,
                            revealed: bob_op,
                            decoded,
                        });
                    } else {
                        out.key_rounds.push(KeyRound {
                            round_id: rec.round_id,
                            bob_op,
                            carol_decoded: decoded,
                        });
                    }
                }
                _ => unreachable!("coding round without receiver mode is lost"),
            },
            None => unreachable!("non-lost round always has a sender mode"),
        }
    }
    Ok(out)
}

/// Counts and error rate of one sample class. `rate` is absent (not zero)
/// when no comparable events exist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    pub events: u64,
    pub matched: u64,
    pub errors: u64,
    pub rate: Option<f64>,
}

impl ClassStats {
    fn from_counts(events: u64, matched: u64, errors: u64) -> Self {
        ClassStats {
            events,
            matched,
            errors,
            rate: (matched > 0).then(|| errors as f64 / matched as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub s_bc: ClassStats,
    pub s_cc0: ClassStats,
    pub s_cc1: ClassStats,
    pub s_w: ClassStats,
}

/// Per-class error rates. Control and reveal checks are basis-matched by
/// construction; decoy checks compare only when the receiver guessed the
/// preparation basis, which happens half the time.
pub fn error_rates(classified: &Classified) -> RateReport {
    let control = |checks: &[ControlCheck]| {
        let errors = checks.iter().filter(|c| c.is_error()).count() as u64;
        ClassStats::from_counts(checks.len() as u64, checks.len() as u64, errors)
    };
    let s_cc1_matched = classified.s_cc1.iter().filter(|c| c.is_matched()).count() as u64;
    let s_cc1_errors = classified.s_cc1.iter().filter(|c| c.is_error()).count() as u64;
    let s_w_errors = classified.s_w.iter().filter(|c| c.is_error()).count() as u64;
    RateReport {
        s_bc: control(&classified.s_bc),
        s_cc0: control(&classified.s_cc0),
        s_cc1: ClassStats::from_counts(classified.s_cc1.len() as u64, s_cc1_matched, s_cc1_errors),
        s_w: ClassStats::from_counts(
            classified.s_w.len() as u64,
            classified.s_w.len() as u64,
            s_w_errors,
        ),
    }
}

/// Abort thresholds per sample class. A rate must be strictly lower than its
/// threshold to pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub s_bc: f64,
    pub s_cc0: f64,
    pub s_cc1: f64,
    pub s_w: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        // Well below the 25% full-attack signature, above desk-scale noise.
        Thresholds {
            s_bc: 0.08,
            s_cc0: 0.08,
            s_cc1: 0.08,
            s_w: 0.08,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("s_bc", self.s_bc),
            ("s_cc0", self.s_cc0),
            ("s_cc1", self.s_cc1),
            ("s_w", self.s_w),
        ] {
            if !(0.0..=1.0).contains(&t) || !t.is_finite() {
                return Err(Error::Config(format!(
                    "threshold {name} = {t} is not in [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Abort,
}

/// Accept iff every class with comparable events sits strictly below its
/// threshold; a rate exactly at the threshold aborts.
pub fn verdict(rates: &RateReport, thresholds: &Thresholds) -> Verdict {
    let pairs = [
        (rates.s_bc.rate, thresholds.s_bc),
        (rates.s_cc0.rate, thresholds.s_cc0),
        (rates.s_cc1.rate, thresholds.s_cc1),
        (rates.s_w.rate, thresholds.s_w),
    ];
    for (rate, threshold) in pairs {
        if let Some(rate) = rate {
            if rate >= threshold {
                return Verdict::Abort;
            }
        }
    }
    Verdict::Accept
}

/// Sender and receiver bit strings of the kept key rounds, two bits per
/// round in protocol order, code high bit first.
pub fn key_bits(key_rounds: &[KeyRound]) -> (Vec<bool>, Vec<bool>) {
    let mut bob = Vec::with_capacity(key_rounds.len() * 2);
    let mut carol = Vec::with_capacity(key_rounds.len() * 2);
    for round in key_rounds {
        let b = round.bob_op.code();
        let c = round.carol_decoded.code();
        bob.push(b & 0b10 != 0);
        bob.push(b & 0b01 != 0);
        carol.push(c & 0b10 != 0);
        carol.push(c & 0b01 != 0);
    }
    (bob, carol)
}

/// Result of error correction plus privacy amplification.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillOutcome {
    /// Keys after correction, before amplification.
    pub corrected_bob: Vec<bool>,
    pub corrected_carol: Vec<bool>,
    /// Final keys after the Toeplitz extraction.
    pub final_bob: Vec<bool>,
    pub final_carol: Vec<bool>,
    /// Parity bits revealed during correction (one bit discarded for each).
    pub revealed_parities: u64,
    pub correction_passes: u32,
    /// Declared leak: revealed information per corrected bit plus twice the
    /// observed s_w error rate, capped at 1.
    pub leak_fraction: f64,
}

/// Distill final keys from the kept double-coding rounds. Refuses when the
/// verdict is abort. `observed_sw_rate` seeds the residual-error estimate: a
/// clean estimate (below 1e-3) skips correction entirely, so an honest
/// noiseless run reveals nothing and keeps every bit.
pub fn distill(
    verdict: Verdict,
    bob_bits: &[bool],
    carol_bits: &[bool],
    observed_sw_rate: f64,
    seed: u64,
) -> Result<DistillOutcome> {
    if verdict == Verdict::Abort {
        return Err(Error::DistillAfterAbort);
    }
    assert_eq!(bob_bits.len(), carol_bits.len(), "key halves must align");

    let mut carol = carol_bits.to_vec();
    let mut rng = rng::stream(rng::derive_seed(seed, rng::label::DISTILL));
    let correction = correct(bob_bits, &mut carol, observed_sw_rate, &mut rng);

    let corrected_bob: Vec<bool> = correction.kept.iter().map(|&i| bob_bits[i]).collect();
    let corrected_carol: Vec<bool> = correction.kept.iter().map(|&i| carol[i]).collect();

    let n = corrected_bob.len();
    let leak_fraction = if n == 0 {
        0.0
    } else {
        (correction.revealed_parities as f64 / n as f64 + 2.0 * observed_sw_rate).clamp(0.0, 1.0)
    };
    let final_len = ((n as f64) * (1.0 - leak_fraction)).floor() as usize;

    let toeplitz_seed = rng::derive_seed(seed, rng::label::DISTILL ^ 0xA5A5);
    let final_bob = toeplitz_extract(&corrected_bob, final_len, toeplitz_seed);
    let final_carol = toeplitz_extract(&corrected_carol, final_len, toeplitz_seed);

    Ok(DistillOutcome {
        corrected_bob,
        corrected_carol,
        final_bob,
        final_carol,
        revealed_parities: correction.revealed_parities,
        correction_passes: correction.passes,
        leak_fraction,
    })
}

struct CorrectionResult {
    kept: Vec<usize>,
    revealed_parities: u64,
    passes: u32,
}

fn parity(bits: &[bool], positions: &[usize]) -> bool {
    positions.iter().fold(false, |acc, &p| acc ^ bits[p])
}

/// Iterated block-parity exchange. Each pass shuffles the surviving
/// positions, reveals one parity per block (discarding one bit for it), and
/// bisects mismatching blocks to pin down one erroneous bit, which the
/// receiver flips. Block sizes double per pass from 8 up to 128. The loop
/// stops once the residual-error estimate drops below the target: below it
/// from the start means zero passes, otherwise two consecutive passes with
/// every parity matching.
fn correct<R: Rng>(
    bob: &[bool],
    carol: &mut [bool],
    initial_estimate: f64,
    rng: &mut R,
) -> CorrectionResult {
    let mut alive: Vec<usize> = (0..bob.len()).collect();
    let mut revealed = 0u64;
    let mut passes = 0u32;

    if initial_estimate >= RESIDUAL_TARGET && !alive.is_empty() {
        let mut clean_streak = 0u32;
        for pass in 0..MAX_PASSES {
            if clean_streak >= 2 || alive.is_empty() {
                break;
            }
            let block = (BASE_BLOCK << pass.min(4)).min(alive.len()).max(1);
            alive.shuffle(rng);
            let mut discards: HashSet<usize> = HashSet::new();
            let mut mismatch_found = false;
            for chunk in alive.chunks(block) {
                revealed += 1;
                discards.insert(*chunk.last().unwrap());
                if parity(bob, chunk) != parity(carol, chunk) {
                    mismatch_found = true;
                    let mut lo = 0usize;
                    let mut hi = chunk.len();
                    while hi - lo > 1 {
                        let mid = lo + (hi - lo) / 2;
                        revealed += 1;
                        discards.insert(chunk[mid - 1]);
                        let left = &chunk[lo..mid];
                        if parity(bob, left) != parity(carol, left) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let pos = chunk[lo];
                    carol[pos] = !carol[pos];
                }
            }
            alive.retain(|p| !discards.contains(p));
            clean_streak = if mismatch_found { 0 } else { clean_streak + 1 };
            passes += 1;
        }
    }

    alive.sort_unstable();
    CorrectionResult {
        kept: alive,
        revealed_parities: revealed,
        passes,
    }
}

/// Multiply a key by a seeded random binary Toeplitz matrix with `out_len`
/// rows. Output bit j is the parity of the key masked by a sliding window of
/// the diagonal-bit sequence, computed on packed words.
pub fn toeplitz_extract(bits: &[bool], out_len: usize, seed: u64) -> Vec<bool> {
    let n = bits.len();
    if n == 0 || out_len == 0 {
        return Vec::new();
    }
    let diag = toeplitz_diagonal(n, out_len, seed);
    toeplitz_apply(&diag, bits, out_len)
}

/// The m + n − 1 diagonal bits defining the Toeplitz matrix, as a bit vector.
fn toeplitz_diagonal(n: usize, m: usize, seed: u64) -> Vec<bool> {
    let mut stream = rng::stream(seed);
    (0..n + m - 1).map(|_| stream.random::<bool>()).collect()
}

fn pack(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1u64 << (i % 64);
        }
    }
    words
}

fn toeplitz_apply(diag: &[bool], bits: &[bool], out_len: usize) -> Vec<bool> {
    let n = bits.len();
    let m = out_len;
    debug_assert_eq!(diag.len(), n + m - 1);
    // Row j of the matrix is diag[(n−1+j) − i] over columns i; reversing the
    // diagonal turns each row into a contiguous window at offset m−1−j.
    let reversed: Vec<bool> = diag.iter().rev().copied().collect();
    let key_words = pack(bits);
    let rev_words = pack(&reversed);
    let key_len_words = n.div_ceil(64);

    (0..m)
        .map(|j| {
            let offset = m - 1 - j;
            let word_off = offset / 64;
            let bit_off = (offset % 64) as u32;
            let mut ones = 0u32;
            for w in 0..key_len_words {
                let lo = rev_words[word_off + w] >> bit_off;
                let hi = if bit_off == 0 {
                    0
                } else {
                    rev_words[word_off + w + 1] << (64 - bit_off)
                };
                ones += ((lo | hi) & key_words[w]).count_ones();
            }
            ones & 1 == 1
        })
        .collect()
}

/// Raw counters behind the two efficiency ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EfficiencyCounters {
    /// b_s: bits in the final key.
    pub key_bits: u64,
    /// q_t: qubits emitted — two per pair, one extra per decoy.
    pub qubits_emitted: u64,
    /// b_t: classical bits exchanged on the key channel (two per joint
    /// measurement announcement).
    pub classical_bits: u64,
    /// q_u: qubits of non-lost sender-coding rounds, the ones carrying
    /// encoded bits before any checks remove them.
    pub useful_qubits: u64,
}

impl EfficiencyCounters {
    pub fn add(&mut self, other: &EfficiencyCounters) {
        self.key_bits += other.key_bits;
        self.qubits_emitted += other.qubits_emitted;
        self.classical_bits += other.classical_bits;
        self.useful_qubits += other.useful_qubits;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Efficiency {
    pub eta_t: Option<f64>,
    pub eta_q: Option<f64>,
}

/// η_t = b_s / (q_t + b_t) and η_q = q_u / q_t; both absent when no qubits
/// were emitted.
pub fn compute_efficiency(counters: &EfficiencyCounters) -> Efficiency {
    if counters.qubits_emitted == 0 {
        return Efficiency {
            eta_t: None,
            eta_q: None,
        };
    }
    let q_t = counters.qubits_emitted as f64;
    Efficiency {
        eta_t: Some(counters.key_bits as f64 / (q_t + counters.classical_bits as f64)),
        eta_q: Some(counters.useful_qubits as f64 / q_t),
    }
}

/// Derive the emission/announcement counters from a transcript (final key
/// bits are filled in after distillation).
pub fn counters_from_records(records: &[RoundRecord]) -> EfficiencyCounters {
    let decoys = records
        .iter()
        .filter(|r| r.bob_mode == Some(Mode::Decoy))
        .count() as u64;
    let announcements = records
        .iter()
        .filter(|r| r.alice_announcement.is_some())
        .count() as u64;
    let coding = records
        .iter()
        .filter(|r| !r.lost && r.bob_mode == Some(Mode::Coding))
        .count() as u64;
    EfficiencyCounters {
        key_bits: 0,
        qubits_emitted: 2 * records.len() as u64 + decoys,
        classical_bits: 2 * announcements,
        useful_qubits: 2 * coding,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: SampleClass,
    pub events: u64,
    pub matched: u64,
    pub errors: u64,
    pub rate: Option<f64>,
}

/// The per-session summary, serialized as JSON for downstream tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session: u64,
    pub rounds: u64,
    pub lost_rounds: u64,
    pub classes: Vec<ClassReport>,
    pub verdict: Verdict,
    pub raw_key_bits: u64,
    pub sifted_key_bits: u64,
    pub final_key_bits: u64,
    pub eta_t: Option<f64>,
    pub eta_q: Option<f64>,
    pub classical_bits_exchanged: u64,
    pub qubits_used: u64,
    /// Fraction of double-coding rounds whose sender operation the adversary
    /// log pins down correctly; absent without an adversary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary_known_op_fraction: Option<f64>,
    /// Final key (sender side) as hex, present only on accept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_hex: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub thresholds: Thresholds,
    pub reveal_fraction: f64,
    pub adversary: AdversaryModel,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            thresholds: Thresholds::default(),
            reveal_fraction: 0.1,
            adversary: AdversaryModel::None,
        }
    }
}

/// Everything the analysis of one session yields: the serializable report,
/// plus the intermediate stages tests and tooling want to slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionAnalysis {
    pub report: SessionReport,
    pub rates: RateReport,
    pub classified: Classified,
    pub distill: Option<DistillOutcome>,
    /// The reveal messages implied by the s_w draw, for transcript dumps.
    pub reveal_messages: Vec<ClassicalMessage>,
}

/// Classify, rate, judge, and (on accept) distill one session.
pub fn analyze_session(
    transcript: &SessionTranscript,
    options: &AnalysisOptions,
    session: u64,
    session_seed: u64,
) -> Result<SessionAnalysis> {
    let mut classify_rng = rng::stream(rng::derive_seed(session_seed, rng::label::CLASSIFY));
    let classified = classify_samples(
        &transcript.records,
        &transcript.decoy_positions,
        options.reveal_fraction,
        &mut classify_rng,
    )?;
    let rates = error_rates(&classified);
    let verdict = verdict(&rates, &options.thresholds);

    let (bob_bits, carol_bits) = key_bits(&classified.key_rounds);
    let sifted_key_bits = bob_bits.len() as u64;
    let raw_key_bits = 2 * transcript
        .records
        .iter()
        .filter(|r| !r.lost && r.bob_mode == Some(Mode::Coding))
        .count() as u64;

    let distilled = match verdict {
        Verdict::Accept => Some(distill(
            verdict,
            &bob_bits,
            &carol_bits,
            rates.s_w.rate.unwrap_or(0.0),
            session_seed,
        )?),
        Verdict::Abort => None,
    };

    let mut counters = counters_from_records(&transcript.records);
    counters.key_bits = distilled.as_ref().map_or(0, |d| d.final_bob.len() as u64);
    let efficiency = compute_efficiency(&counters);

    let key_hex = distilled.as_ref().map(|d| bits_to_hex(&d.final_bob));

    let adversary_known_op_fraction = match options.adversary {
        AdversaryModel::None => None,
        _ => Some(known_op_fraction(transcript)),
    };

    let report = SessionReport {
        session,
        rounds: classified.total_rounds,
        lost_rounds: classified.lost_rounds,
        classes: vec![
            class_report(SampleClass::SBc, &rates.s_bc),
            class_report(SampleClass::SCc0, &rates.s_cc0),
            class_report(SampleClass::SCc1, &rates.s_cc1),
            class_report(SampleClass::SW, &rates.s_w),
        ],
        verdict,
        raw_key_bits,
        sifted_key_bits,
        final_key_bits: counters.key_bits,
        eta_t: efficiency.eta_t,
        eta_q: efficiency.eta_q,
        classical_bits_exchanged: counters.classical_bits,
        qubits_used: counters.qubits_emitted,
        adversary_known_op_fraction,
        key_hex,
    };

    let reveal_messages = classified
        .s_w
        .iter()
        .map(|check| ClassicalMessage::SampleReveal {
            round: check.round_id,
            op_code: check.revealed.code(),
        })
        .collect();

    Ok(SessionAnalysis {
        report,
        rates,
        classified,
        distill: distilled,
        reveal_messages,
    })
}

fn class_report(class: SampleClass, stats: &ClassStats) -> ClassReport {
    ClassReport {
        class,
        events: stats.events,
        matched: stats.matched,
        errors: stats.errors,
        rate: stats.rate,
    }
}

/// Fraction of double-coding rounds whose sender operation the adversary's
/// log identifies correctly. An intercept record carries no operation
/// estimate, so a pure interceptor scores zero.
fn known_op_fraction(transcript: &SessionTranscript) -> f64 {
    let learned: std::collections::HashMap<u64, EncodingOp> = transcript
        .adversary_log
        .server
        .iter()
        .filter_map(|attack| attack.learned_op().map(|op| (attack.round, op)))
        .collect();
    let mut double_coding = 0u64;
    let mut known = 0u64;
    for rec in &transcript.records {
        if !rec.is_double_coding() {
            continue;
        }
        double_coding += 1;
        if learned.get(&rec.round_id).copied() == rec.bob_op {
            known += 1;
        }
    }
    if double_coding == 0 {
        return 0.0;
    }
    known as f64 / double_coding as f64
}

/// Pack bits into hex, most significant bit of each byte first.
pub fn bits_to_hex(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            bytes[i / 8] |= 0x80 >> (i % 8);
        }
    }
    hex::encode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{run_session, SessionParams};

    fn honest_transcript(rounds: u64, seed: u64) -> SessionTranscript {
        run_session(
            &SessionParams {
                rounds,
                ..Default::default()
            },
            seed,
        )
    }

    #[test]
    fn classes_partition_the_transcript() {
        let t = honest_transcript(30_000, 3);
        let mut rng = rng::stream(1);
        let c = classify_samples(&t.records, &t.decoy_positions, 0.1, &mut rng).unwrap();
        let total = c.s_bc.len()
            + c.s_cc0.len()
            + c.s_cc1.len()
            + c.s_w.len()
            + c.key_rounds.len()
            + c.discarded_decoy_rounds as usize
            + c.lost_rounds as usize;
        assert_eq!(total as u64, c.total_rounds);
        assert_eq!(c.total_rounds, 30_000);
        assert!(c.s_bc.len() > 1000 && c.s_cc1.len() > 100);
    }

    #[test]
    fn undisclosed_decoys_are_rejected() {
        let t = honest_transcript(5_000, 5);
        let mut rng = rng::stream(2);
        let err = classify_samples(&t.records, &[], 0.1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::UndisclosedDecoy(_)));
    }

    #[test]
    fn bogus_disclosure_is_rejected() {
        let t = honest_transcript(200, 7);
        // Claim a coding round is a decoy position.
        let coding_round = t
            .records
            .iter()
            .find(|r| r.bob_mode == Some(Mode::Coding))
            .unwrap()
            .round_id;
        let mut disclosed = t.decoy_positions.clone();
        disclosed.push(coding_round);
        let mut rng = rng::stream(3);
        assert!(classify_samples(&t.records, &disclosed, 0.1, &mut rng).is_err());
    }

    #[test]
    fn all_coding_with_zero_reveal_leaves_only_key_rounds() {
        let t = run_session(
            &SessionParams {
                rounds: 500,
                probs: crate::protocol::ModeProbabilities {
                    p_control_bob: 0.0,
                    p_decoy_bob: 0.0,
                    p_control_carol: 0.0,
                },
                ..Default::default()
            },
            9,
        );
        let mut rng = rng::stream(4);
        let c = classify_samples(&t.records, &t.decoy_positions, 0.0, &mut rng).unwrap();
        assert!(c.s_bc.is_empty() && c.s_cc0.is_empty() && c.s_cc1.is_empty() && c.s_w.is_empty());
        assert_eq!(c.key_rounds.len(), 500);
    }

    #[test]
    fn honest_rates_are_exactly_zero() {
        let t = honest_transcript(40_000, 11);
        let mut rng = rng::stream(5);
        let c = classify_samples(&t.records, &t.decoy_positions, 0.1, &mut rng).unwrap();
        let rates = error_rates(&c);
        assert_eq!(rates.s_bc.errors, 0);
        assert_eq!(rates.s_cc0.errors, 0);
        assert_eq!(rates.s_cc1.errors, 0);
        assert_eq!(rates.s_w.errors, 0);
        assert_eq!(rates.s_bc.rate, Some(0.0));
    }

    #[test]
    fn empty_class_rate_is_absent() {
        let c = Classified::default();
        let rates = error_rates(&c);
        assert_eq!(rates.s_bc.rate, None);
        assert_eq!(rates.s_cc1.rate, None);
    }

    #[test]
    fn verdict_rules() {
        let mut rates = RateReport::default();
        let thresholds = Thresholds::default();
        // All absent → accept.
        assert_eq!(verdict(&rates, &thresholds), Verdict::Accept);
        rates.s_bc = ClassStats::from_counts(10, 10, 0);
        assert_eq!(verdict(&rates, &thresholds), Verdict::Accept);
        // 0.25 against 0.08 → abort.
        rates.s_cc1 = ClassStats::from_counts(100, 48, 12);
        assert_eq!(verdict(&rates, &thresholds), Verdict::Abort);
        // Exactly at the threshold → abort (strictly-lower rule).
        rates.s_cc1 = ClassStats::from_counts(100, 100, 8);
        assert_eq!(verdict(&rates, &thresholds), Verdict::Abort);
        rates.s_cc1 = ClassStats::from_counts(100, 100, 7);
        assert_eq!(verdict(&rates, &thresholds), Verdict::Accept);
    }

    #[test]
    fn distill_refuses_after_abort() {
        let err = distill(Verdict::Abort, &[true], &[true], 0.0, 1).unwrap_err();
        assert!(matches!(err, Error::DistillAfterAbort));
    }

    #[test]
    fn distill_empty_input_yields_empty_key() {
        let out = distill(Verdict::Accept, &[], &[], 0.0, 1).unwrap();
        assert!(out.final_bob.is_empty() && out.final_carol.is_empty());
        assert_eq!(out.revealed_parities, 0);
    }

    #[test]
    fn noiseless_distill_reveals_nothing_and_keeps_everything() {
        let bits: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
        let out = distill(Verdict::Accept, &bits, &bits, 0.0, 42).unwrap();
        assert_eq!(out.revealed_parities, 0);
        assert_eq!(out.correction_passes, 0);
        assert_eq!(out.leak_fraction, 0.0);
        assert_eq!(out.corrected_bob, bits);
        assert_eq!(out.final_bob.len(), bits.len());
        assert_eq!(out.final_bob, out.final_carol);
    }

    #[test]
    fn distill_corrects_injected_errors() {
        let mut stream = rng::stream(77);
        let n = 20_000usize;
        let bob: Vec<bool> = (0..n).map(|_| stream.random()).collect();
        let mut carol = bob.clone();
        let p = 0.05;
        let mut injected = 0u32;
        for bit in carol.iter_mut() {
            if stream.random::<f64>() < p {
                *bit = !*bit;
                injected += 1;
            }
        }
        assert!(injected > 0);
        let out = distill(Verdict::Accept, &bob, &carol, p, 99).unwrap();
        let disagreements = out
            .corrected_bob
            .iter()
            .zip(&out.corrected_carol)
            .filter(|(a, b)| a != b)
            .count();
        let rate = disagreements as f64 / out.corrected_bob.len().max(1) as f64;
        assert!(rate < 1e-3, "residual disagreement {rate}");
        assert!(out.revealed_parities > 0);
        assert!(out.leak_fraction > 0.0);
        // Final key shrinks by exactly the declared fraction.
        let expect =
            ((out.corrected_bob.len() as f64) * (1.0 - out.leak_fraction)).floor() as usize;
        assert_eq!(out.final_bob.len(), expect);
        assert!(out.final_bob.len() < out.corrected_bob.len());
    }

    #[test]
    fn toeplitz_matches_naive_reference() {
        // Independent dense-matrix oracle for the packed implementation.
        let mut stream = rng::stream(123);
        for _ in 0..40 {
            let n = stream.random_range(1..80usize);
            let m = stream.random_range(1..80usize);
            let bits: Vec<bool> = (0..n).map(|_| stream.random()).collect();
            let seed = stream.random::<u64>();
            let diag = toeplitz_diagonal(n, m, seed);
            let fast = toeplitz_extract(&bits, m, seed);
            let naive: Vec<bool> = (0..m)
                .map(|j| {
                    (0..n)
                        .filter(|&i| bits[i])
                        .fold(false, |acc, i| acc ^ diag[j + (n - 1) - i])
                })
                .collect();
            assert_eq!(fast, naive, "n={n} m={m}");
        }
    }

    #[test]
    fn efficiency_edge_cases() {
        let none = compute_efficiency(&EfficiencyCounters::default());
        assert_eq!(none.eta_t, None);
        assert_eq!(none.eta_q, None);

        // One double-coding round alone: 2 qubits, 2 announced bits, 2 key
        // bits → η_t = 0.5, η_q = 1.
        let one = compute_efficiency(&EfficiencyCounters {
            key_bits: 2,
            qubits_emitted: 2,
            classical_bits: 2,
            useful_qubits: 2,
        });
        assert_eq!(one.eta_t, Some(0.5));
        assert_eq!(one.eta_q, Some(1.0));
    }

    #[test]
    fn analyze_honest_session_end_to_end() {
        let t = honest_transcript(20_000, 15);
        let analysis = analyze_session(&t, &AnalysisOptions::default(), 0, 15).unwrap();
        let report = &analysis.report;
        assert_eq!(report.verdict, Verdict::Accept);
        assert_eq!(report.final_key_bits, report.sifted_key_bits);
        assert!(report.key_hex.is_some());
        assert!(report.adversary_known_op_fraction.is_none());
        let d = analysis.distill.unwrap();
        assert_eq!(d.final_bob, d.final_carol);
        // Report fields match the stats.
        assert_eq!(report.classes.len(), 4);
        assert!(report.eta_t.unwrap() > 0.3);
        assert!(report.eta_q.unwrap() > 0.7);
    }

    #[test]
    fn bits_to_hex_packs_msb_first() {
        assert_eq!(bits_to_hex(&[]), "");
        assert_eq!(bits_to_hex(&[true]), "80");
        let byte = [true, false, true, false, false, false, false, true];
        assert_eq!(bits_to_hex(&byte), "a1");
    }
}
