//! Run configuration: a TOML file with nested sections for topology,
//! channel, adversary, and analysis settings. One canonical example ships in
//! `docs/example-config.toml`.

use crate::adversary::AdversaryModel;
use crate::analysis::Thresholds;
use crate::error::{Error, Result};
use crate::network::{self, ChannelModel, Node, NodeRole, SegmentChannels, Shape, Topology};
use crate::protocol::ModeProbabilities;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub sender: String,
    pub receiver: String,
}

/// Default channel parameters plus optional whole-model overrides per
/// segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub loss_prob: f64,
    pub flip_x_prob: f64,
    pub flip_z_prob: f64,
    pub segments: SegmentOverrides,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alice_to_bob: Option<ChannelModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bob_to_carol: Option<ChannelModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carol_to_alice: Option<ChannelModel>,
}

impl ChannelConfig {
    pub fn to_segment_channels(&self) -> SegmentChannels {
        let base = ChannelModel {
            loss_prob: self.loss_prob,
            flip_x_prob: self.flip_x_prob,
            flip_z_prob: self.flip_z_prob,
        };
        SegmentChannels {
            alice_to_bob: self.segments.alice_to_bob.unwrap_or(base),
            bob_to_carol: self.segments.bob_to_carol.unwrap_or(base),
            carol_to_alice: self.segments.carol_to_alice.unwrap_or(base),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub reveal_fraction: f64,
    pub thresholds: Thresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            reveal_fraction: 0.1,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub rounds_per_session: u64,
    pub sessions: u64,
    pub topology: Topology,
    pub requests: Vec<SessionRequest>,
    pub modes: ModeProbabilities,
    pub channel: ChannelConfig,
    pub adversary: AdversaryModel,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            rounds_per_session: 20_000,
            sessions: 1,
            topology: Topology {
                shape: Shape::Star,
                nodes: vec![
                    Node {
                        id: "alice".into(),
                        role: NodeRole::Server,
                        server: None,
                    },
                    Node {
                        id: "bob".into(),
                        role: NodeRole::User,
                        server: Some("alice".into()),
                    },
                    Node {
                        id: "carol".into(),
                        role: NodeRole::User,
                        server: Some("alice".into()),
                    },
                ],
            },
            requests: vec![SessionRequest {
                sender: "bob".into(),
                receiver: "carol".into(),
            }],
            modes: ModeProbabilities::default(),
            channel: ChannelConfig::default(),
            adversary: AdversaryModel::None,
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds_per_session < 1 {
            return Err(Error::Config(
                "rounds_per_session must be at least 1".into(),
            ));
        }
        self.topology.validate()?;
        if self.sessions > 0 && self.requests.is_empty() {
            return Err(Error::Config("at least one request is required".into()));
        }
        for request in &self.requests {
            network::route(&self.topology, &request.sender, &request.receiver)?;
        }
        self.modes.validate()?;
        self.channel.to_segment_channels().validate()?;
        self.adversary.validate()?;
        self.analysis.thresholds.validate()?;
        let f = self.analysis.reveal_fraction;
        if !(0.0..=1.0).contains(&f) || !f.is_finite() {
            return Err(Error::Config(format!(
                "reveal_fraction = {f} is not in [0, 1]"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SegmentKind;

    #[test]
    fn default_config_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let mut config = RunConfig {
            seed: 0xDEAD_BEEF,
            sessions: 3,
            ..Default::default()
        };
        config.channel.flip_x_prob = 0.0625;
        config.channel.segments.bob_to_carol = Some(ChannelModel {
            loss_prob: 0.125,
            flip_x_prob: 0.05,
            flip_z_prob: 0.0,
        });
        config.adversary = AdversaryModel::ExternalEve {
            segment: SegmentKind::BobToCarol,
            attack_fraction: 0.5,
        };
        config.output.report = Some("report.json".into());
        let text = config.to_toml_string().unwrap();
        let parsed = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let parsed = RunConfig::from_toml_str("seed = 9\n").unwrap();
        assert_eq!(parsed.seed, 9);
        assert_eq!(parsed.rounds_per_session, 20_000);
        assert_eq!(parsed.adversary, AdversaryModel::None);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let config = RunConfig {
            rounds_per_session: 0,
            ..Default::default()
        };
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.requests[0].receiver = "nobody".into();
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.modes.p_control_bob = 1.2;
        assert!(config.validate().is_err());

        let config = RunConfig {
            adversary: AdversaryModel::MaliciousServer {
                attack_fraction: -0.5,
            },
            ..Default::default()
        };
        assert!(config.validate().is_err());

        assert!(RunConfig::from_toml_str("seed = \"zebra\"").is_err());
    }

    #[test]
    fn shipped_example_config_parses() {
        let path = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../docs/example-config.toml"
        );
        let config = RunConfig::load(std::path::Path::new(path)).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.sessions, 4);
        assert_eq!(config.output.report, Some("report.json".into()));
    }

    #[test]
    fn adversary_toml_shapes() {
        let text = r#"
            [adversary]
            kind = "external_eve"
            segment = "bob_to_carol"
            attack_fraction = 1.0
        "#;
        let parsed = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(
            parsed.adversary,
            AdversaryModel::ExternalEve {
                segment: SegmentKind::BobToCarol,
                attack_fraction: 1.0
            }
        );
    }
}
