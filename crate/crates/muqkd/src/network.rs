//! Topology, time-slot scheduling, and channel models.
//!
//! Networks come in two shapes: a loop where all nodes sit on one ring, and a
//! star where users hang off branch servers. Either way a key-distribution
//! session reduces to the three-segment subsystem server → sender → receiver
//! → server, with only the traveling particle of each pair ever entering a
//! channel. Channels model loss and independent Pauli X/Z errors per segment
//! transit.

use crate::carrier::Carrier;
use crate::error::{Error, Result};
use crate::quantum::EncodingOp;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// The three logical channel segments of one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    AliceToBob,
    BobToCarol,
    CarolToAlice,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 3] = [
        SegmentKind::AliceToBob,
        SegmentKind::BobToCarol,
        SegmentKind::CarolToAlice,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Server,
    User,
}

/// A network node. Users carry the id of their owning server; for a loop the
/// declaration order is the cyclic order around the ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: NodeRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Loop,
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub shape: Shape,
    pub nodes: Vec<Node>,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for node in &self.nodes {
            if !seen.insert(node.id.as_str()) {
                return Err(Error::Config(format!("duplicate node id '{}'", node.id)));
            }
        }
        for node in &self.nodes {
            match node.role {
                NodeRole::Server => {
                    if node.server.is_some() {
                        return Err(Error::Config(format!(
                            "server '{}' must not name an owning server",
                            node.id
                        )));
                    }
                }
                NodeRole::User => {
                    let owner = node.server.as_deref().ok_or_else(|| {
                        Error::Config(format!("user '{}' has no owning server", node.id))
                    })?;
                    let owner_node = self
                        .node(owner)
                        .ok_or_else(|| Error::UnknownNode(owner.to_string()))?;
                    if owner_node.role != NodeRole::Server {
                        return Err(Error::Config(format!(
                            "user '{}' names non-server '{}' as owner",
                            node.id, owner
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn user(&self, id: &str) -> Result<&Node> {
        let node = self
            .node(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        if node.role != NodeRole::User {
            return Err(Error::Config(format!("node '{id}' is not a user")));
        }
        Ok(node)
    }

    pub fn owning_server(&self, user: &str) -> Result<&str> {
        Ok(self.user(user)?.server.as_deref().unwrap())
    }
}

/// One logical segment of a routed session, with any passive intermediates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub via: Vec<String>,
}

/// Resolve the three-segment subsystem path for a sender/receiver pair. The
/// serving server is the sender's owning server; in a star network a
/// cross-branch hop relays passively through the receiver's server, and the
/// return leg uses the same granted path.
pub fn route(topology: &Topology, sender: &str, receiver: &str) -> Result<[Segment; 3]> {
    if sender == receiver {
        return Err(Error::Config("sender and receiver must differ".into()));
    }
    let serving = topology.owning_server(sender)?.to_string();
    let receiver_server = topology.owning_server(receiver)?.to_string();

    let segments = match topology.shape {
        Shape::Star => {
            let cross_branch = serving != receiver_server;
            let outbound_via = if cross_branch {
                vec![serving.clone(), receiver_server.clone()]
            } else {
                vec![serving.clone()]
            };
            let return_via = if cross_branch {
                vec![receiver_server.clone()]
            } else {
                vec![]
            };
            [
                Segment {
                    kind: SegmentKind::AliceToBob,
                    from: serving.clone(),
                    to: sender.to_string(),
                    via: vec![],
                },
                Segment {
                    kind: SegmentKind::BobToCarol,
                    from: sender.to_string(),
                    to: receiver.to_string(),
                    via: outbound_via,
                },
                Segment {
                    kind: SegmentKind::CarolToAlice,
                    from: receiver.to_string(),
                    to: serving.clone(),
                    via: return_via,
                },
            ]
        }
        Shape::Loop => {
            let hop =
                |from: &str, to: &str| -> Result<Vec<String>> { loop_between(topology, from, to) };
            [
                Segment {
                    kind: SegmentKind::AliceToBob,
                    from: serving.clone(),
                    to: sender.to_string(),
                    via: hop(&serving, sender)?,
                },
                Segment {
                    kind: SegmentKind::BobToCarol,
                    from: sender.to_string(),
                    to: receiver.to_string(),
                    via: hop(sender, receiver)?,
                },
                Segment {
                    kind: SegmentKind::CarolToAlice,
                    from: receiver.to_string(),
                    to: serving.clone(),
                    via: hop(receiver, &serving)?,
                },
            ]
        }
    };
    Ok(segments)
}

/// Nodes strictly between `from` and `to`, walking the ring forward in
/// declaration order.
fn loop_between(topology: &Topology, from: &str, to: &str) -> Result<Vec<String>> {
    let pos = |id: &str| {
        topology
            .nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    };
    let n = topology.nodes.len();
    let mut idx = pos(from)?;
    let stop = pos(to)?;
    let mut via = Vec::new();
    loop {
        idx = (idx + 1) % n;
        if idx == stop {
            break;
        }
        via.push(topology.nodes[idx].id.clone());
        if via.len() > n {
            return Err(Error::Config("loop routing did not terminate".into()));
        }
    }
    Ok(via)
}

/// Per-transit channel behavior: loss, then independent Pauli X/Z errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub loss_prob: f64,
    pub flip_x_prob: f64,
    pub flip_z_prob: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            loss_prob: 0.0,
            flip_x_prob: 0.0,
            flip_z_prob: 0.0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("loss_prob", self.loss_prob),
            ("flip_x_prob", self.flip_x_prob),
            ("flip_z_prob", self.flip_z_prob),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Channel model per logical segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentChannels {
    pub alice_to_bob: ChannelModel,
    pub bob_to_carol: ChannelModel,
    pub carol_to_alice: ChannelModel,
}

impl SegmentChannels {
    pub fn uniform(model: ChannelModel) -> Self {
        SegmentChannels {
            alice_to_bob: model,
            bob_to_carol: model,
            carol_to_alice: model,
        }
    }

    pub fn for_segment(&self, kind: SegmentKind) -> &ChannelModel {
        match kind {
            SegmentKind::AliceToBob => &self.alice_to_bob,
            SegmentKind::BobToCarol => &self.bob_to_carol,
            SegmentKind::CarolToAlice => &self.carol_to_alice,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alice_to_bob.validate()?;
        self.bob_to_carol.validate()?;
        self.carol_to_alice.validate()
    }
}

impl Default for SegmentChannels {
    fn default() -> Self {
        SegmentChannels::uniform(ChannelModel::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrival {
    Arrived,
    Lost,
}

/// Send the traveling particle through one segment. Loss aborts the transit;
/// otherwise an X error is applied with `flip_x_prob` and a Z error with
/// `flip_z_prob`, independently. Only the traveling particle is ever touched.
pub fn transmit<R: Rng>(carrier: &mut Carrier, channel: &ChannelModel, rng: &mut R) -> Arrival {
    if channel.loss_prob > 0.0 && rng.random::<f64>() < channel.loss_prob {
        return Arrival::Lost;
    }
    if channel.flip_x_prob > 0.0 && rng.random::<f64>() < channel.flip_x_prob {
        carrier.apply_traveling(EncodingOp::U2);
    }
    if channel.flip_z_prob > 0.0 && rng.random::<f64>() < channel.flip_z_prob {
        carrier.apply_traveling(EncodingOp::U3);
    }
    Arrival::Arrived
}

/// One granted time slot: a server serves exactly one sender/receiver pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub slot_id: u64,
    pub sender: String,
    pub receiver: String,
    pub serving_server: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSlotSchedule {
    pub slots: Vec<SlotAssignment>,
}

/// Round-robin slot assignment: each request takes the earliest slot in which
/// every server it involves (the serving server, plus the receiver's relay
/// server on cross-branch star sessions) is still free.
pub fn schedule(topology: &Topology, requests: &[(String, String)]) -> Result<TimeSlotSchedule> {
    let mut busy: HashMap<u64, Vec<String>> = HashMap::new();
    let mut slots = Vec::with_capacity(requests.len());
    for (sender, receiver) in requests {
        let serving = topology.owning_server(sender)?.to_string();
        let relay = topology.owning_server(receiver)?.to_string();
        let mut involved = vec![serving.clone()];
        if relay != serving {
            involved.push(relay);
        }
        let mut slot_id = 0u64;
        loop {
            let occupied = busy.entry(slot_id).or_default();
            if involved.iter().all(|s| !occupied.contains(s)) {
                occupied.extend(involved.iter().cloned());
                slots.push(SlotAssignment {
                    slot_id,
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    serving_server: serving,
                });
                break;
            }
            slot_id += 1;
        }
    }
    Ok(TimeSlotSchedule { slots })
}
