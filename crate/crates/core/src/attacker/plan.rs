use std::fmt;

use serde::{Deserialize, Serialize};

use crate::endpoints::TransportMode;
use crate::netsim::IpAddr4;
use crate::wire::BodyFraming;

use super::AttackError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Recon,
    Poison,
    Passive,
    Active,
    Assess,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperTarget {
    /// A query parameter of a plaintext GET.
    PlainField(String),
    /// A ciphertext byte; `None` picks a uniformly random position per message.
    CiphertextByte(Option<usize>),
    /// A bit of the transmitted IV, counted from the most significant bit of byte 0.
    IvBit(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperAction {
    /// New query value for `PlainField`, or a two-digit hex byte for `CiphertextByte`.
    SetValue(String),
    /// Replace with a uniformly random different byte.
    RandomByte,
    FlipBit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TamperRule {
    pub target: TamperTarget,
    pub action: TamperAction,
    /// 1-based index of the intercepted telemetry message this rule is
    /// restricted to. `None` applies it to every message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<u64>,
}

impl TamperRule {
    pub fn set_field(field: &str, value: &str, message: Option<u64>) -> Self {
        Self {
            target: TamperTarget::PlainField(field.to_string()),
            action: TamperAction::SetValue(value.to_string()),
            message,
        }
    }

    pub fn random_ciphertext_byte() -> Self {
        Self {
            target: TamperTarget::CiphertextByte(None),
            action: TamperAction::RandomByte,
            message: None,
        }
    }

    pub fn applies_to(&self, message: u64) -> bool {
        self.message.is_none_or(|m| m == message)
    }

    /// IV manipulation goes beyond the tamper strategies the original
    /// experiment tried; reports flag it separately.
    pub fn is_beyond_paper(&self) -> bool {
        matches!(self.target, TamperTarget::IvBit(_))
    }

    fn check(&self, mode: TransportMode, framing: BodyFraming) -> Result<(), String> {
        match (&self.target, &self.action) {
            (TamperTarget::PlainField(_), _) if mode != TransportMode::Plain => {
                Err("plain_field rules need plain traffic".into())
            }
            (TamperTarget::PlainField(name), TamperAction::SetValue(_)) if !name.is_empty() => Ok(()),
            (TamperTarget::PlainField(_), _) => Err("plain_field rules need a field name and set_value".into()),
            (_, _) if mode != TransportMode::Encrypted => Err("ciphertext and IV rules need encrypted traffic".into()),
            (TamperTarget::CiphertextByte(_), TamperAction::SetValue(v)) => {
                if v.len() == 2 && u8::from_str_radix(v, 16).is_ok() {
                    Ok(())
                } else {
                    Err(format!("ciphertext set_value must be one hex byte, got {v:?}"))
                }
            }
            (TamperTarget::CiphertextByte(_), _) => Ok(()),
            (TamperTarget::IvBit(_), _) if matches!(framing, BodyFraming::Fidelity(_)) => {
                Err("iv_bit rules need the IV on the wire (canonical framing)".into())
            }
            (TamperTarget::IvBit(bit), TamperAction::FlipBit) if *bit < 128 => Ok(()),
            (TamperTarget::IvBit(_), _) => Err("iv_bit rules need flip_bit and an index below 128".into()),
        }
    }
}

impl fmt::Display for TamperRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.target, &self.action) {
            (TamperTarget::PlainField(name), TamperAction::SetValue(v)) => write!(f, "{name}={v}"),
            (TamperTarget::CiphertextByte(Some(i)), a) => write!(f, "ciphertext[{i}] {a:?}"),
            (TamperTarget::CiphertextByte(None), a) => write!(f, "ciphertext[random] {a:?}"),
            (TamperTarget::IvBit(bit), _) => write!(f, "iv bit {bit} (beyond-paper)"),
            (t, a) => write!(f, "{t:?} {a:?}"),
        }
    }
}

fn default_repoison() -> u64 {
    1000
}

fn default_recon_at() -> u64 {
    100
}

/// What the attacker does and to whom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackPlan {
    pub victim_ip: IpAddr4,
    /// The host the victim talks to: the server by default, or the gateway.
    pub peer_ip: IpAddr4,
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub tamper_rules: Vec<TamperRule>,
    #[serde(default = "default_repoison")]
    pub repoison_interval_ms: u64,
    #[serde(default = "default_recon_at")]
    pub recon_at_ms: u64,
    /// Inclusive address range swept during reconnaissance. Defaults to
    /// the attacker's own /24.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon_range: Option<(IpAddr4, IpAddr4)>,
    /// Stop poisoning at this time and send corrective replies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at_ms: Option<u64>,
}

impl AttackPlan {
    pub fn new(victim_ip: IpAddr4, peer_ip: IpAddr4, phases: Vec<Phase>) -> Self {
        Self {
            victim_ip,
            peer_ip,
            phases,
            tamper_rules: Vec::new(),
            repoison_interval_ms: default_repoison(),
            recon_at_ms: default_recon_at(),
            recon_range: None,
            stop_at_ms: None,
        }
    }

    pub fn has(&self, phase: Phase) -> bool {
        self.phases.contains(&phase)
    }

    /// Checks phase dependencies and that every rule fits the traffic it
    /// will see.
    pub fn validate(&self, mode: TransportMode, framing: BodyFraming) -> Result<(), AttackError> {
        let plan = |msg: String| Err(AttackError::Plan(msg));
        if self.victim_ip == self.peer_ip {
            return plan("victim and peer must differ".into());
        }
        if self.has(Phase::Poison) && !self.has(Phase::Recon) {
            return plan("poison requires recon".into());
        }
        if self.has(Phase::Active) && !self.has(Phase::Poison) {
            return plan("active requires poison".into());
        }
        if self.has(Phase::Passive) && !self.has(Phase::Poison) {
            return plan("passive requires poison".into());
        }
        if self.has(Phase::Assess) && !(self.has(Phase::Passive) || self.has(Phase::Active)) {
            return plan("assess requires passive or active".into());
        }
        if self.has(Phase::Active) && self.tamper_rules.is_empty() {
            return plan("active requires at least one tamper rule".into());
        }
        if self.repoison_interval_ms == 0 {
            return plan("repoison_interval_ms must be > 0".into());
        }
        if let Some((first, last)) = self.recon_range {
            if first > last {
                return plan("recon_range start exceeds end".into());
            }
        }
        for (i, rule) in self.tamper_rules.iter().enumerate() {
            rule.check(mode, framing)
                .or_else(|why| plan(format!("tamper_rules[{i}]: {why}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Iv;

    fn ip(last: u8) -> IpAddr4 {
        IpAddr4::new(192, 168, 1, last)
    }

    fn plan(phases: &[Phase]) -> AttackPlan {
        AttackPlan::new(ip(50), ip(100), phases.to_vec())
    }

    #[test]
    fn phase_dependencies() {
        use Phase::*;
        let ok = |p: AttackPlan| p.validate(TransportMode::Plain, BodyFraming::Canonical);
        assert!(ok(plan(&[Recon])).is_ok());
        assert!(ok(plan(&[Recon, Poison, Passive, Assess])).is_ok());
        assert!(ok(plan(&[Poison])).is_err());
        assert!(ok(plan(&[Recon, Active])).is_err());
        assert!(ok(plan(&[Recon, Poison, Assess])).is_err());
        assert!(ok(plan(&[Recon, Poison, Active])).is_err(), "active without rules");
        let mut active = plan(&[Recon, Poison, Active, Assess]);
        active.tamper_rules.push(TamperRule::set_field("HeartRate", "180", None));
        assert!(ok(active).is_ok());
    }

    #[test]
    fn rules_must_match_traffic() {
        use Phase::*;
        let with = |rule: TamperRule, mode, framing| {
            let mut p = plan(&[Recon, Poison, Active]);
            p.tamper_rules.push(rule);
            p.validate(mode, framing)
        };
        let field = TamperRule::set_field("HeartRate", "180", None);
        let byte = TamperRule::random_ciphertext_byte();
        let iv = TamperRule {
            target: TamperTarget::IvBit(106),
            action: TamperAction::FlipBit,
            message: None,
        };
        let fidelity = BodyFraming::Fidelity(Iv([0; 16]));
        assert!(with(field.clone(), TransportMode::Plain, BodyFraming::Canonical).is_ok());
        assert!(with(field, TransportMode::Encrypted, BodyFraming::Canonical).is_err());
        assert!(with(byte.clone(), TransportMode::Encrypted, fidelity).is_ok());
        assert!(with(byte, TransportMode::Plain, BodyFraming::Canonical).is_err());
        assert!(with(iv.clone(), TransportMode::Encrypted, BodyFraming::Canonical).is_ok());
        assert!(with(iv, TransportMode::Encrypted, fidelity).is_err());
    }

    #[test]
    fn rule_json_shape() {
        let rule = TamperRule::set_field("Temperature", "102.5", Some(1));
        let json = serde_json::to_string(&rule).unwrap();
        assert_eq!(json, r#"{"target":{"plain_field":"Temperature"},"action":{"set_value":"102.5"},"message":1}"#);
        let back: TamperRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rule);
        let random: TamperRule =
            serde_json::from_str(r#"{"target":{"ciphertext_byte":null},"action":"random_byte"}"#).unwrap();
        assert_eq!(random, TamperRule::random_ciphertext_byte());
    }
}
