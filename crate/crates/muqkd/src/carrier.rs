//! The quantum payload of one round while it moves through the subsystem.
//!
//! A round starts as an entangled pair (held particle A, traveling particle
//! B). Two things can break that picture apart: a single-particle measurement
//! on either slot, or the sender swapping a self-prepared decoy into the
//! traveling position. Both leave two lone qubits, so the carrier is either
//! `Entangled` or `Split`. Joint Bell measurement works on both: a split
//! carrier is measured as the product of its halves.

use crate::quantum::{
    apply_encoding, apply_encoding_qubit, bell_measure, measure_pair_slot, measure_qubit,
    EncodingOp, MeasBasis, Qubit, Slot, TwoQubitState,
};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Carrier {
    Entangled(TwoQubitState),
    Split { held: Qubit, traveling: Qubit },
}

impl Carrier {
    pub fn entangled(state: TwoQubitState) -> Self {
        Carrier::Entangled(state)
    }

    /// Apply a local unitary to the traveling particle.
    pub fn apply_traveling(&mut self, op: EncodingOp) {
        match self {
            Carrier::Entangled(state) => *state = apply_encoding(state, op, Slot::Traveling),
            Carrier::Split { traveling, .. } => *traveling = apply_encoding_qubit(traveling, op),
        }
    }

    /// Measure the traveling particle; the carrier collapses to `Split` with
    /// the held particle in its conditional state.
    pub fn measure_traveling<R: Rng>(&mut self, basis: MeasBasis, rng: &mut R) -> u8 {
        match self {
            Carrier::Entangled(state) => {
                let (bit, held) = measure_pair_slot(state, Slot::Traveling, basis, rng);
                *self = Carrier::Split {
                    held,
                    traveling: crate::quantum::basis_eigenstate(basis, bit),
                };
                bit
            }
            Carrier::Split { traveling, .. } => {
                let (bit, post) = measure_qubit(traveling, basis, rng);
                *traveling = post;
                bit
            }
        }
    }

    /// Measure the held particle (the server's check measurement).
    pub fn measure_held<R: Rng>(&mut self, basis: MeasBasis, rng: &mut R) -> u8 {
        match self {
            Carrier::Entangled(state) => {
                let (bit, traveling) = measure_pair_slot(state, Slot::Held, basis, rng);
                *self = Carrier::Split {
                    held: crate::quantum::basis_eigenstate(basis, bit),
                    traveling,
                };
                bit
            }
            Carrier::Split { held, .. } => {
                let (bit, post) = measure_qubit(held, basis, rng);
                *held = post;
                bit
            }
        }
    }

    /// Put a fresh qubit into the traveling position (the decoy swap). The
    /// caller is responsible for measuring the retained particle first.
    pub fn set_traveling(&mut self, qubit: Qubit) {
        match self {
            Carrier::Split { traveling, .. } => *traveling = qubit,
            Carrier::Entangled(_) => {
                panic!("decoy swap requires the retained particle to be measured first")
            }
        }
    }

    /// The joint two-qubit state (held, traveling), materializing a product
    /// state for a split carrier.
    pub fn joint_state(&self) -> TwoQubitState {
        match self {
            Carrier::Entangled(state) => *state,
            Carrier::Split { held, traveling } => TwoQubitState::from_product(held, traveling),
        }
    }

    /// The server's joint Bell-basis measurement of (held, traveling).
    pub fn joint_bell_measure<R: Rng>(&self, rng: &mut R) -> crate::quantum::BellLabel {
        bell_measure(&self.joint_state(), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::alice_prepare;
    use crate::quantum::{bell_state, prepare_decoy, BellLabel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn coding_then_joint_measure_identifies_the_operation() {
        let mut r = ChaCha12Rng::seed_from_u64(3);
        for op in EncodingOp::ALL {
            let mut carrier = Carrier::entangled(alice_prepare());
            carrier.apply_traveling(op);
            assert_eq!(carrier.joint_bell_measure(&mut r), op.bell_image());
        }
    }

    #[test]
    fn decoy_swap_after_retained_measurement() {
        let mut r = ChaCha12Rng::seed_from_u64(4);
        let mut carrier = Carrier::entangled(alice_prepare());
        let retained = carrier.measure_traveling(MeasBasis::Z, &mut r);
        carrier.set_traveling(prepare_decoy(MeasBasis::Z, 1));
        match &carrier {
            Carrier::Split { held, traveling } => {
                // |φ⁺⟩ collapses the held particle to the same Z eigenstate.
                assert_eq!(
                    *held,
                    crate::quantum::basis_eigenstate(MeasBasis::Z, retained)
                );
                assert_eq!(*traveling, Qubit::one());
            }
            _ => panic!("expected split carrier"),
        }
    }

    #[test]
    fn joint_state_of_split_is_the_product() {
        let carrier = Carrier::Split {
            held: Qubit::zero(),
            traveling: Qubit::zero(),
        };
        let s = carrier.joint_state();
        // |00⟩ overlaps each φ Bell state with weight 1/2.
        let p = bell_state(BellLabel::PhiPlus).overlap_mag(&s).powi(2);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn decoy_swap_on_entangled_carrier_is_rejected() {
        let mut carrier = Carrier::entangled(alice_prepare());
        carrier.set_traveling(Qubit::zero());
    }
}
