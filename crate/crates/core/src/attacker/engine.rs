use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::{decode_text, encode_text, TextEncoding};
use crate::endpoints::{TransportMode, SERVER_PORT};
use crate::netsim::{ArpPacket, Datagram, EtherType, EthernetFrame, IpAddr4, MacAddr, Network, NodeId};
use crate::rng::{stream, Stream};
use crate::wire::{parse_http, parse_plain, tamper_query, BodyFraming};

use super::{
    AttackError, AttackPlan, Direction, InterceptEntry, InterceptLog, Phase, TamperAction, TamperRule, TamperTarget,
};

const RECON: u64 = 1;
const REPOISON: u64 = 2;
const RESTORE: u64 = 3;

/// What the attacker knows about the wire format. It never holds the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficProfile {
    pub mode: TransportMode,
    pub encoding: TextEncoding,
    pub framing: BodyFraming,
}

/// The MITM node. Driven by timers and by IPv4 frames the poisoned caches
/// steer to it.
pub struct Attacker {
    node: NodeId,
    plan: AttackPlan,
    profile: TrafficProfile,
    rng: ChaCha8Rng,
    inventory: BTreeMap<IpAddr4, MacAddr>,
    messages: BTreeMap<(IpAddr4, u16), u64>,
    log: InterceptLog,
    poisoning: bool,
    standing_down: bool,
    poisoned_at: Option<u64>,
    restored_at: Option<u64>,
}

impl Attacker {
    pub fn new(
        plan: AttackPlan,
        node: NodeId,
        profile: TrafficProfile,
        seed: u64,
        run_id: &str,
    ) -> Result<Self, AttackError> {
        plan.validate(profile.mode, profile.framing)?;
        Ok(Self {
            node,
            plan,
            profile,
            rng: stream(seed, Stream::Attacker),
            inventory: BTreeMap::new(),
            messages: BTreeMap::new(),
            log: InterceptLog::new(run_id),
            poisoning: false,
            standing_down: false,
            poisoned_at: None,
            restored_at: None,
        })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn plan(&self) -> &AttackPlan {
        &self.plan
    }

    pub fn inventory(&self) -> &BTreeMap<IpAddr4, MacAddr> {
        &self.inventory
    }

    pub fn log(&self) -> &InterceptLog {
        &self.log
    }

    pub fn is_poisoning(&self) -> bool {
        self.poisoning
    }

    pub fn poisoned_at(&self) -> Option<u64> {
        self.poisoned_at
    }

    pub fn restored_at(&self) -> Option<u64> {
        self.restored_at
    }

    /// Schedules reconnaissance; everything else follows from it.
    pub fn start(&mut self, net: &mut Network) {
        if self.plan.has(Phase::Recon) {
            net.schedule_timer(self.node, self.plan.recon_at_ms, RECON);
        }
    }

    /// Stops refreshing the forged bindings so the event queue can drain.
    /// Caches stay poisoned.
    pub fn stand_down(&mut self) {
        self.standing_down = true;
    }

    pub fn on_timer(&mut self, net: &mut Network, token: u64) -> Result<(), AttackError> {
        match token {
            RECON => {
                self.recon(net)?;
                if self.plan.has(Phase::Poison) {
                    self.poison(net)?;
                    if let Some(at) = self.plan.stop_at_ms {
                        net.schedule_timer(self.node, at.max(net.now()), RESTORE);
                    }
                }
            }
            REPOISON if self.poisoning && !self.standing_down => self.poison(net)?,
            RESTORE => self.restore(net)?,
            _ => {}
        }
        Ok(())
    }

    fn recon_targets(&self, net: &Network) -> Vec<IpAddr4> {
        let own = net.host(self.node).ip;
        let (first, last) = self.plan.recon_range.unwrap_or_else(|| {
            let [a, b, c, _] = own.octets();
            (IpAddr4::new(a, b, c, 1), IpAddr4::new(a, b, c, 254))
        });
        (u32::from(first)..=u32::from(last))
            .map(IpAddr4::from)
            .filter(|ip| *ip != own)
            .collect()
    }

    /// Sweeps the configured range with ARP requests, waits one ARP timeout
    /// for answers and returns every responder.
    pub fn recon(&mut self, net: &mut Network) -> Result<Vec<(IpAddr4, MacAddr)>, AttackError> {
        let host = net.host(self.node).clone();
        let targets = self.recon_targets(net);
        for ip in &targets {
            net.send_arp(self.node, MacAddr::BROADCAST, &ArpPacket::request(host.mac, host.ip, *ip))?;
        }
        let deadline = net.now() + net.config().arp_timeout_ms;
        net.pump_arp_until(self.node, deadline, |_| false)?;
        self.inventory = targets
            .iter()
            .filter_map(|ip| net.cached(self.node, *ip).map(|mac| (*ip, mac)))
            .collect();
        Ok(self.inventory.iter().map(|(ip, mac)| (*ip, *mac)).collect())
    }

    fn true_mac(&self, ip: IpAddr4) -> Result<MacAddr, AttackError> {
        self.inventory
            .get(&ip)
            .copied()
            .ok_or_else(|| AttackError::Plan(format!("{ip} was not found during recon")))
    }

    /// Tells the victim that the peer lives at the attacker's MAC and vice
    /// versa, then schedules the next refresh.
    pub fn poison(&mut self, net: &mut Network) -> Result<(), AttackError> {
        let (victim, peer) = (self.plan.victim_ip, self.plan.peer_ip);
        let (victim_mac, peer_mac) = (self.true_mac(victim)?, self.true_mac(peer)?);
        let own = net.host(self.node).mac;
        net.send_arp(self.node, victim_mac, &ArpPacket::reply(own, peer, victim_mac, victim))?;
        net.send_arp(self.node, peer_mac, &ArpPacket::reply(own, victim, peer_mac, peer))?;
        self.poisoning = true;
        self.poisoned_at.get_or_insert(net.now());
        net.schedule_timer(self.node, net.now() + self.plan.repoison_interval_ms, REPOISON);
        Ok(())
    }

    /// Sends corrective replies carrying the true MACs and stops poisoning.
    pub fn restore(&mut self, net: &mut Network) -> Result<(), AttackError> {
        let (victim, peer) = (self.plan.victim_ip, self.plan.peer_ip);
        let (victim_mac, peer_mac) = (self.true_mac(victim)?, self.true_mac(peer)?);
        net.send_arp(self.node, victim_mac, &ArpPacket::reply(peer_mac, peer, victim_mac, victim))?;
        net.send_arp(self.node, peer_mac, &ArpPacket::reply(victim_mac, victim, peer_mac, peer))?;
        self.poisoning = false;
        self.restored_at = Some(net.now());
        Ok(())
    }

    fn message_index(&mut self, datagram: &Datagram) -> u64 {
        let next = self.messages.len() as u64 + 1;
        *self.messages.entry((datagram.src_ip, datagram.src_port)).or_insert(next)
    }

    /// Handles an IPv4 frame steered to the attacker: logs it, applies
    /// tamper rules in the active phase and relays it to the true owner of
    /// the destination IP.
    pub fn forward(&mut self, net: &mut Network, frame: &EthernetFrame) -> Result<(), AttackError> {
        debug_assert_eq!(frame.ethertype, EtherType::Ipv4);
        let Ok(datagram) = Datagram::decode(&frame.payload) else {
            net.note_drop(frame, "malformed");
            return Ok(());
        };
        let own_ip = net.host(self.node).ip;
        if datagram.dst_ip == own_ip {
            return Ok(());
        }
        let (victim, peer) = (self.plan.victim_ip, self.plan.peer_ip);
        let direction = match (datagram.src_ip, datagram.dst_ip) {
            (s, d) if s == victim && d == peer => Direction::ToPeer,
            (s, d) if s == peer && d == victim => Direction::ToVictim,
            _ => {
                net.note_drop(frame, "not-forwarded");
                return Ok(());
            }
        };
        let telemetry = direction == Direction::ToPeer && datagram.dst_port == SERVER_PORT;
        let message = telemetry.then(|| self.message_index(&datagram));
        let relaying = self.plan.has(Phase::Passive) || self.plan.has(Phase::Active);

        let mut forwarded = datagram.payload.clone();
        let mut rule = (!telemetry).then(|| "uninteresting".to_string());
        let mut beyond_paper = false;
        if let (Some(index), true) = (message, self.plan.has(Phase::Active)) {
            let rules: Vec<TamperRule> = self
                .plan
                .tamper_rules
                .iter()
                .filter(|r| r.applies_to(index))
                .cloned()
                .collect();
            let mut applied = Vec::new();
            for r in &rules {
                match self.apply(r, &forwarded) {
                    Ok((bytes, note)) => {
                        forwarded = bytes;
                        beyond_paper |= r.is_beyond_paper();
                        applied.push(note);
                    }
                    Err(why) => applied.push(format!("skipped {r}: {why}")),
                }
            }
            if !applied.is_empty() {
                rule = Some(applied.join("; "));
            }
        }

        let extraction = if telemetry { parse_plain(&datagram.payload).ok() } else { None };
        self.log.entries.push(InterceptEntry {
            t_ms: net.now(),
            direction,
            src_ip: datagram.src_ip,
            dst_ip: datagram.dst_ip,
            message,
            original: datagram.payload.clone(),
            forwarded: forwarded.clone(),
            rule,
            beyond_paper,
            extraction,
            relayed: relaying,
        });

        if !relaying {
            net.note_drop(frame, "not-forwarded");
            return Ok(());
        }
        let dst_mac = self.true_mac(datagram.dst_ip)?;
        let own_mac = net.host(self.node).mac;
        let out = if forwarded == datagram.payload {
            EthernetFrame::new(own_mac, dst_mac, EtherType::Ipv4, frame.payload.clone())?
        } else {
            let relayed = Datagram {
                payload: forwarded,
                ..datagram
            };
            EthernetFrame::ipv4(own_mac, dst_mac, &relayed)
        };
        net.send_frame(out)?;
        Ok(())
    }

    fn apply(&mut self, rule: &TamperRule, payload: &[u8]) -> Result<(Vec<u8>, String), String> {
        match (&rule.target, &rule.action) {
            (TamperTarget::PlainField(field), TamperAction::SetValue(value)) => tamper_query(payload, field, value)
                .map(|bytes| (bytes, format!("{field}={value}")))
                .map_err(|e| e.to_string()),
            (TamperTarget::CiphertextByte(pos), action) => self.mutate_body(payload, |rng, data, ct_start| {
                let ct_len = data.len() - ct_start;
                let index = match pos {
                    Some(i) if *i < ct_len => *i,
                    Some(i) => return Err(format!("ciphertext byte {i} out of range ({ct_len} bytes)")),
                    None => rng.gen_range(0..ct_len),
                };
                let old = data[ct_start + index];
                let new = match action {
                    TamperAction::RandomByte => old ^ rng.gen_range(1..=255u8),
                    TamperAction::FlipBit => old ^ 0x01,
                    TamperAction::SetValue(v) => u8::from_str_radix(v, 16).map_err(|e| e.to_string())?,
                };
                data[ct_start + index] = new;
                Ok(format!("ciphertext[{index}] {old:02x}->{new:02x}"))
            }),
            (TamperTarget::IvBit(bit), TamperAction::FlipBit) => {
                let bit = *bit;
                self.mutate_body(payload, move |_, data, ct_start| {
                    if ct_start < 16 {
                        return Err("IV is not on the wire".into());
                    }
                    data[bit / 8] ^= 0x80 >> (bit % 8);
                    Ok(format!("iv bit {bit} (beyond-paper)"))
                })
            }
            _ => Err("unsupported rule".into()),
        }
    }

    /// Decodes the POST body, lets `edit` change the raw bytes and rebuilds
    /// the request with a matching Content-Length.
    fn mutate_body<F>(&mut self, payload: &[u8], edit: F) -> Result<(Vec<u8>, String), String>
    where
        F: FnOnce(&mut ChaCha8Rng, &mut Vec<u8>, usize) -> Result<String, String>,
    {
        let mut req = parse_http(payload).map_err(|e| e.to_string())?;
        let text = std::str::from_utf8(&req.body).map_err(|_| "body is not text".to_string())?;
        let mut data = decode_text(text, self.profile.encoding).map_err(|e| e.to_string())?;
        let ct_start = match self.profile.framing {
            BodyFraming::Canonical => 16,
            BodyFraming::Fidelity(_) => 0,
        };
        if data.len() <= ct_start {
            return Err("body holds no ciphertext".into());
        }
        let note = edit(&mut self.rng, &mut data, ct_start)?;
        req.body = encode_text(&data, self.profile.encoding).into_bytes();
        let len = req.body.len().to_string();
        for (name, value) in &mut req.headers {
            if name.eq_ignore_ascii_case("Content-Length") {
                *value = len.clone();
            }
        }
        Ok((req.to_bytes(), note))
    }
}
