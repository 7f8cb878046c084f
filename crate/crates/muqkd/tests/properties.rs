//! Property tests: schedule validity over random request sets, wire
//! round-trips, and config round-trips.

use muqkd::config::RunConfig;
use muqkd::network::{schedule, Node, NodeRole, Shape, Topology};
use muqkd::protocol::ClassicalMessage;
use muqkd::quantum::MeasBasis;
use proptest::prelude::*;
use std::collections::HashMap;

fn star_topology(servers: usize, users_per_server: usize) -> Topology {
    let mut nodes = Vec::new();
    for s in 0..servers {
        nodes.push(Node {
            id: format!("server{s}"),
            role: NodeRole::Server,
            server: None,
        });
    }
    for s in 0..servers {
        for u in 0..users_per_server {
            nodes.push(Node {
                id: format!("user{s}_{u}"),
                role: NodeRole::User,
                server: Some(format!("server{s}")),
            });
        }
    }
    Topology {
        shape: Shape::Star,
        nodes,
    }
}

proptest! {
    #[test]
    fn schedule_never_double_books_a_server(
        servers in 1usize..4,
        users_per_server in 2usize..4,
        picks in proptest::collection::vec((0usize..12, 0usize..12), 1..24),
    ) {
        let topology = star_topology(servers, users_per_server);
        let users: Vec<String> = topology
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::User)
            .map(|n| n.id.clone())
            .collect();
        let requests: Vec<(String, String)> = picks
            .into_iter()
            .map(|(a, b)| {
                let sender = users[a % users.len()].clone();
                let mut receiver = users[b % users.len()].clone();
                if receiver == sender {
                    receiver = users[(b + 1) % users.len()].clone();
                }
                (sender, receiver)
            })
            .filter(|(a, b)| a != b)
            .collect();
        prop_assume!(!requests.is_empty());

        let out = schedule(&topology, &requests).unwrap();
        prop_assert_eq!(out.slots.len(), requests.len());

        let mut bookings: HashMap<(u64, String), u32> = HashMap::new();
        for slot in &out.slots {
            let serving = slot.serving_server.clone();
            let relay = topology.owning_server(&slot.receiver).unwrap().to_string();
            *bookings.entry((slot.slot_id, serving.clone())).or_insert(0) += 1;
            if relay != serving {
                *bookings.entry((slot.slot_id, relay)).or_insert(0) += 1;
            }
        }
        prop_assert!(bookings.values().all(|&n| n <= 1));
    }

    #[test]
    fn wire_roundtrip_for_arbitrary_messages(
        round in any::<u64>(),
        basis_byte in 0u8..2,
        bit in 0u8..2,
        op_code in 0u8..4,
        ids in proptest::collection::vec(any::<u64>(), 0..32),
        pick in 0usize..5,
    ) {
        let basis = MeasBasis::from_byte(basis_byte).unwrap();
        let msg = match pick {
            0 => ClassicalMessage::BasisRequest { round, basis },
            1 => ClassicalMessage::MeasResult { round, basis, bit },
            2 => ClassicalMessage::BellAnnounce { round, op_code },
            3 => ClassicalMessage::DecoyPositions { round_ids: ids },
            _ => ClassicalMessage::SampleReveal { round, op_code },
        };
        let decoded = ClassicalMessage::from_bytes(&msg.to_bytes()).unwrap();
        prop_assert_eq!(decoded, msg);
    }

    #[test]
    fn config_toml_roundtrip(
        seed in any::<u64>(),
        rounds in 1u64..1_000_000,
        sessions in 0u64..64,
        p_control in 0.0f64..0.5,
        p_decoy in 0.0f64..0.5,
        loss in 0.0f64..1.0,
        reveal in 0.0f64..1.0,
    ) {
        let mut config = RunConfig {
            seed,
            rounds_per_session: rounds,
            sessions,
            ..Default::default()
        };
        config.modes.p_control_bob = p_control;
        config.modes.p_decoy_bob = p_decoy;
        config.channel.loss_prob = loss;
        config.analysis.reveal_fraction = reveal;
        let text = config.to_toml_string().unwrap();
        let parsed = RunConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(parsed, config);
    }
}
