//! Exact statevector algebra for one EPR pair plus one decoy qubit.
//!
//! The state space is deliberately tiny: a [`Qubit`] is two complex amplitudes,
//! a [`TwoQubitState`] is four. Amplitudes keep their exact signs internally so
//! the encoding identities come out sign-exact (e.g. `U1` on the traveling half
//! of |φ⁺⟩ really produces −|ψ⁻⟩), but everything protocol-visible — Bell
//! labels, measurement outcomes, encoding composition — is defined modulo
//! global phase. No measurement can see a phase, so no protocol logic branches
//! on one.
//!
//! All sampling operations take an injected `&mut impl Rng`; there is no hidden
//! global randomness anywhere in this module.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tolerance for amplitude comparisons. States live in dimension ≤ 4, so
/// floating-point error never accumulates anywhere near this.
pub const AMP_TOLERANCE: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Measuring basis for single-particle measurements: σz (rectilinear) or
/// σx (diagonal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasBasis {
    Z,
    X,
}

impl MeasBasis {
    pub const ALL: [MeasBasis; 2] = [MeasBasis::Z, MeasBasis::X];

    /// Wire encoding: one byte, 0 = Z, 1 = X.
    pub fn to_byte(self) -> u8 {
        match self {
            MeasBasis::Z => 0,
            MeasBasis::X => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(MeasBasis::Z),
            1 => Some(MeasBasis::X),
            _ => None,
        }
    }

    /// Uniform basis choice.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            MeasBasis::Z
        } else {
            MeasBasis::X
        }
    }
}

/// A single qubit: amplitudes over {|0⟩, |1⟩}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit {
    pub a0: Complex64,
    pub a1: Complex64,
}

impl Qubit {
    /// Build a qubit from amplitudes, asserting normalization.
    pub fn new(a0: Complex64, a1: Complex64) -> Self {
        let q = Qubit { a0, a1 };
        debug_assert!(
            (q.norm_sqr() - 1.0).abs() < AMP_TOLERANCE,
            "qubit not normalized: |a|^2 = {}",
            q.norm_sqr()
        );
        q
    }

    pub fn zero() -> Self {
        Qubit::new(c(1.0), c(0.0))
    }

    pub fn one() -> Self {
        Qubit::new(c(0.0), c(1.0))
    }

    /// |+x⟩ = (|0⟩ + |1⟩)/√2.
    pub fn plus() -> Self {
        Qubit::new(c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2))
    }

    /// |−x⟩ = (|0⟩ − |1⟩)/√2.
    pub fn minus() -> Self {
        Qubit::new(c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }

    /// Amplitudes on the eigenvectors of `basis`, outcome-0 component first.
    /// For Z that is (a0, a1); for X it is the (|+x⟩, |−x⟩) pair.
    pub fn components(&self, basis: MeasBasis) -> (Complex64, Complex64) {
        match basis {
            MeasBasis::Z => (self.a0, self.a1),
            MeasBasis::X => (
                (self.a0 + self.a1) * FRAC_1_SQRT_2,
                (self.a0 - self.a1) * FRAC_1_SQRT_2,
            ),
        }
    }
}

/// Eigenstate of `basis` with the given outcome bit. Outcome 0 maps to
/// |0⟩ / |+x⟩, outcome 1 to |1⟩ / |−x⟩.
pub fn basis_eigenstate(basis: MeasBasis, outcome: u8) -> Qubit {
    match (basis, outcome) {
        (MeasBasis::Z, 0) => Qubit::zero(),
        (MeasBasis::Z, _) => Qubit::one(),
        (MeasBasis::X, 0) => Qubit::plus(),
        (MeasBasis::X, _) => Qubit::minus(),
    }
}

/// Decoy preparation: |0⟩/|1⟩ for Z, |+x⟩/|−x⟩ for X.
pub fn prepare_decoy(basis: MeasBasis, value: u8) -> Qubit {
    basis_eigenstate(basis, value)
}

/// Projective single-qubit measurement. Returns the sampled outcome bit and
/// the collapsed eigenstate.
pub fn measure_qubit<R: Rng>(q: &Qubit, basis: MeasBasis, rng: &mut R) -> (u8, Qubit) {
    let (c0, _) = q.components(basis);
    let p0 = c0.norm_sqr().clamp(0.0, 1.0);
    let outcome = if rng.random::<f64>() < p0 { 0 } else { 1 };
    (outcome, basis_eigenstate(basis, outcome))
}

/// Which particle of a pair an operation touches. The first tensor slot is
/// the server-held particle A; the second is the particle that travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Held,
    Traveling,
}

/// The four Bell states of one EPR pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PsiMinus,
        BellLabel::PsiPlus,
        BellLabel::PhiMinus,
        BellLabel::PhiPlus,
    ];

    /// The encoding that carries |φ⁺⟩ onto this Bell state (modulo phase).
    /// This is the map the server uses to announce a joint measurement as an
    /// operation code.
    pub fn encoding(self) -> EncodingOp {
        match self {
            BellLabel::PhiPlus => EncodingOp::U0,
            BellLabel::PsiMinus => EncodingOp::U1,
            BellLabel::PsiPlus => EncodingOp::U2,
            BellLabel::PhiMinus => EncodingOp::U3,
        }
    }
}

/// Two qubits over the ordered basis (|00⟩, |01⟩, |10⟩, |11⟩); the first
/// slot is the held particle A, the second the traveling particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amps: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amps: [Complex64; 4]) -> Self {
        let s = TwoQubitState { amps };
        debug_assert!(
            (s.norm_sqr() - 1.0).abs() < AMP_TOLERANCE,
            "two-qubit state not normalized: |a|^2 = {}",
            s.norm_sqr()
        );
        s
    }

    /// Tensor product |a⟩ ⊗ |t⟩ of two lone qubits.
    pub fn from_product(held: &Qubit, traveling: &Qubit) -> Self {
        TwoQubitState::new([
            held.a0 * traveling.a0,
            held.a0 * traveling.a1,
            held.a1 * traveling.a0,
            held.a1 * traveling.a1,
        ])
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &TwoQubitState) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩| — the phase-blind overlap used by every identification
    /// test in this crate.
    pub fn overlap_mag(&self, other: &TwoQubitState) -> f64 {
        self.inner(other).norm()
    }
}

/// The exact Bell vector of the given label, with the conventional signs:
/// |ψ∓⟩ = (|01⟩ ∓ |10⟩)/√2 and |φ∓⟩ = (|00⟩ ∓ |11⟩)/√2.
pub fn bell_state(label: BellLabel) -> TwoQubitState {
    let f = FRAC_1_SQRT_2;
    let amps = match label {
        BellLabel::PsiMinus => [c(0.0), c(f), c(-f), c(0.0)],
        BellLabel::PsiPlus => [c(0.0), c(f), c(f), c(0.0)],
        BellLabel::PhiMinus => [c(f), c(0.0), c(0.0), c(-f)],
        BellLabel::PhiPlus => [c(f), c(0.0), c(0.0), c(f)],
    };
    TwoQubitState::new(amps)
}

/// One of the four local unitaries {U0, U1, U2, U3}, stored as the exponent
/// pair (x, z) of Z^z·X^x. Composition is componentwise XOR, so the group is
/// Klein-four and every element is its own inverse; matrices appear only
/// inside [`apply_encoding`].
///
/// The agreed classical code is U0→00, U1→01, U2→10, U3→11. The code map is
/// GF(2)-linear in (x, z), so XOR of codes and XOR of exponent pairs agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct EncodingOp {
    x: bool,
    z: bool,
}

impl EncodingOp {
    /// Identity.
    pub const U0: EncodingOp = EncodingOp { x: false, z: false };
    /// |0⟩⟨1| − |1⟩⟨0| = Z·X.
    pub const U1: EncodingOp = EncodingOp { x: true, z: true };
    /// Bit flip |1⟩⟨0| + |0⟩⟨1| = X.
    pub const U2: EncodingOp = EncodingOp { x: true, z: false };
    /// Phase flip |0⟩⟨0| − |1⟩⟨1| = Z.
    pub const U3: EncodingOp = EncodingOp { x: false, z: true };

    pub const ALL: [EncodingOp; 4] = [
        EncodingOp::U0,
        EncodingOp::U1,
        EncodingOp::U2,
        EncodingOp::U3,
    ];

    /// The agreed 2-bit code (0..=3).
    pub fn code(self) -> u8 {
        let c0 = self.z as u8;
        let c1 = (self.x ^ self.z) as u8;
        (c1 << 1) | c0
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EncodingOp::U0),
            1 => Some(EncodingOp::U1),
            2 => Some(EncodingOp::U2),
            3 => Some(EncodingOp::U3),
            _ => None,
        }
    }

    /// Whether this operation flips bits in the Z basis (the X exponent).
    pub fn flips_bit(self) -> bool {
        self.x
    }

    /// Whether this operation flips phase (the Z exponent).
    pub fn flips_phase(self) -> bool {
        self.z
    }

    /// Group composition: apply `self` first, `then` second. XOR of exponent
    /// pairs; exact, no floating point involved.
    pub fn compose(self, then: EncodingOp) -> EncodingOp {
        EncodingOp {
            x: self.x ^ then.x,
            z: self.z ^ then.z,
        }
    }

    /// The Bell state (I ⊗ self)|φ⁺⟩ collapses onto, modulo phase.
    pub fn bell_image(self) -> BellLabel {
        match (self.x, self.z) {
            (false, false) => BellLabel::PhiPlus,
            (true, true) => BellLabel::PsiMinus,
            (true, false) => BellLabel::PsiPlus,
            (false, true) => BellLabel::PhiMinus,
        }
    }

    /// For a pair currently in the Bell state `(I ⊗ self)|φ⁺⟩`: whether
    /// same-basis measurements of the two particles agree. Z outcomes agree
    /// iff there is no bit flip; X outcomes agree iff there is no phase flip.
    pub fn correlated_equal(self, basis: MeasBasis) -> bool {
        match basis {
            MeasBasis::Z => !self.x,
            MeasBasis::X => !self.z,
        }
    }

    /// Uniform choice among the four operations.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        EncodingOp::from_code(rng.random_range(0..4u8)).unwrap()
    }

    /// The 2×2 matrix Z^z·X^x, row-major. Only used by `apply_encoding`.
    fn matrix(self) -> [[Complex64; 2]; 2] {
        let x = self.x;
        let z = self.z;
        let one = c(1.0);
        let neg = c(-1.0);
        let zero = c(0.0);
        match (x, z) {
            (false, false) => [[one, zero], [zero, one]],
            (true, false) => [[zero, one], [one, zero]],
            (false, true) => [[one, zero], [zero, neg]],
            // Z·X = |0⟩⟨1| − |1⟩⟨0|
            (true, true) => [[zero, one], [neg, zero]],
        }
    }
}

impl From<EncodingOp> for u8 {
    fn from(op: EncodingOp) -> u8 {
        op.code()
    }
}

impl TryFrom<u8> for EncodingOp {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        EncodingOp::from_code(code).ok_or_else(|| format!("invalid encoding code {code}"))
    }
}

/// Apply a local unitary to one slot of a pair: (U ⊗ I) or (I ⊗ U).
/// Norm-preserving; signs are exact.
pub fn apply_encoding(state: &TwoQubitState, op: EncodingOp, slot: Slot) -> TwoQubitState {
    let m = op.matrix();
    let a = state.amplitudes();
    let amps = match slot {
        // Index layout: amps[2*h + t] for held bit h, traveling bit t.
        Slot::Traveling => [
            m[0][0] * a[0] + m[0][1] * a[1],
            m[1][0] * a[0] + m[1][1] * a[1],
            m[0][0] * a[2] + m[0][1] * a[3],
            m[1][0] * a[2] + m[1][1] * a[3],
        ],
        Slot::Held => [
            m[0][0] * a[0] + m[0][1] * a[2],
            m[0][0] * a[1] + m[0][1] * a[3],
            m[1][0] * a[0] + m[1][1] * a[2],
            m[1][0] * a[1] + m[1][1] * a[3],
        ],
    };
    TwoQubitState::new(amps)
}

/// Apply a local unitary to a lone qubit (the decoy path).
pub fn apply_encoding_qubit(q: &Qubit, op: EncodingOp) -> Qubit {
    let m = op.matrix();
    Qubit::new(
        m[0][0] * q.a0 + m[0][1] * q.a1,
        m[1][0] * q.a0 + m[1][1] * q.a1,
    )
}

/// Measure one slot of a pair. Returns the sampled outcome bit and the other
/// particle's conditional (normalized) state.
pub fn measure_pair_slot<R: Rng>(
    state: &TwoQubitState,
    slot: Slot,
    basis: MeasBasis,
    rng: &mut R,
) -> (u8, Qubit) {
    let a = state.amplitudes();
    // Conditional amplitudes of the *other* particle given outcome 0/1 on
    // `slot`, before normalization.
    let (on0, on1): ([Complex64; 2], [Complex64; 2]) = match (slot, basis) {
        (Slot::Traveling, MeasBasis::Z) => ([a[0], a[2]], [a[1], a[3]]),
        (Slot::Held, MeasBasis::Z) => ([a[0], a[1]], [a[2], a[3]]),
        (Slot::Traveling, MeasBasis::X) => (
            [(a[0] + a[1]) * FRAC_1_SQRT_2, (a[2] + a[3]) * FRAC_1_SQRT_2],
            [(a[0] - a[1]) * FRAC_1_SQRT_2, (a[2] - a[3]) * FRAC_1_SQRT_2],
        ),
        (Slot::Held, MeasBasis::X) => (
            [(a[0] + a[2]) * FRAC_1_SQRT_2, (a[1] + a[3]) * FRAC_1_SQRT_2],
            [(a[0] - a[2]) * FRAC_1_SQRT_2, (a[1] - a[3]) * FRAC_1_SQRT_2],
        ),
    };
    let p0 = (on0[0].norm_sqr() + on0[1].norm_sqr()).clamp(0.0, 1.0);
    let (outcome, rest) = if rng.random::<f64>() < p0 {
        (0, on0)
    } else {
        (1, on1)
    };
    let norm = (rest[0].norm_sqr() + rest[1].norm_sqr()).sqrt();
    (outcome, Qubit::new(rest[0] / norm, rest[1] / norm))
}

/// Joint Bell-basis measurement of a pair. Samples a label with probability
/// |⟨Bell_i|state⟩|²; invariant under global phase of the input.
pub fn bell_measure<R: Rng>(state: &TwoQubitState, rng: &mut R) -> BellLabel {
    let mut draw = rng.random::<f64>();
    let mut last = BellLabel::PhiPlus;
    for label in BellLabel::ALL {
        let p = bell_state(label).overlap_mag(state).powi(2);
        if draw < p {
            return label;
        }
        draw -= p;
        last = label;
    }
    // Probabilities sum to 1 up to rounding; attribute the sliver to the
    // final label.
    last
}
