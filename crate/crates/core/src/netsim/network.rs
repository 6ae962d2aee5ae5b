use std::collections::{BTreeMap, VecDeque};

use super::medium::{Event, EventKind, FrameLoss, Medium, NodeId};
use super::{ArpOp, ArpPacket, Datagram, EtherType, EthernetFrame, IpAddr4, MacAddr, NetError};

/// Timer tokens with this bit set belong to the network layer itself.
const INTERNAL_TIMER: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub propagation_ms: u64,
    pub arp_timeout_ms: u64,
    /// `None` keeps entries for the whole run.
    pub arp_ttl_ms: Option<u64>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            propagation_ms: 1,
            arp_timeout_ms: 500,
            arp_ttl_ms: None,
        }
    }
}

/// IP → MAC bindings. A later write for the same IP replaces the earlier one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArpCache {
    entries: BTreeMap<IpAddr4, (MacAddr, u64)>,
}

impl ArpCache {
    pub fn insert(&mut self, ip: IpAddr4, mac: MacAddr, learned_at: u64) {
        self.entries.insert(ip, (mac, learned_at));
    }

    pub fn lookup(&self, ip: IpAddr4, now: u64, ttl_ms: Option<u64>) -> Option<MacAddr> {
        let (mac, learned_at) = *self.entries.get(&ip)?;
        match ttl_ms {
            Some(ttl) if now.saturating_sub(learned_at) >= ttl => None,
            _ => Some(mac),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (IpAddr4, MacAddr)> + '_ {
        self.entries.iter().map(|(ip, (mac, _))| (*ip, *mac))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Host {
    pub name: String,
    pub mac: MacAddr,
    pub ip: IpAddr4,
    pub cache: ArpCache,
}

/// The segment plus every node's ARP stack. ARP traffic is handled here;
/// IPv4 deliveries and application timers are handed back from [`Network::step`].
pub struct Network {
    medium: Medium,
    hosts: Vec<Host>,
    config: NetConfig,
    pending: VecDeque<Event>,
    next_wait: u64,
}

impl Network {
    pub fn new(config: NetConfig) -> Self {
        Self {
            medium: Medium::new(config.propagation_ms),
            hosts: Vec::new(),
            config,
            pending: VecDeque::new(),
            next_wait: 0,
        }
    }

    pub fn set_loss(&mut self, loss: Option<FrameLoss>) {
        self.medium.set_loss(loss);
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn add_host(&mut self, name: &str, mac: MacAddr, ip: IpAddr4) -> Result<NodeId, NetError> {
        let id = self.medium.add_node(mac, ip)?;
        self.hosts.push(Host {
            name: name.to_string(),
            mac,
            ip,
            cache: ArpCache::default(),
        });
        Ok(id)
    }

    pub fn host(&self, id: NodeId) -> &Host {
        &self.hosts[id]
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    pub fn host_by_ip(&self, ip: IpAddr4) -> Option<NodeId> {
        self.hosts.iter().position(|h| h.ip == ip)
    }

    pub fn now(&self) -> u64 {
        self.medium.now()
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn cached(&self, node: NodeId, ip: IpAddr4) -> Option<MacAddr> {
        self.hosts[node].cache.lookup(ip, self.now(), self.config.arp_ttl_ms)
    }

    pub fn schedule_timer(&mut self, node: NodeId, at: u64, token: u64) {
        debug_assert!(token & INTERNAL_TIMER == 0, "token collides with internal timers");
        self.medium.schedule_timer(node, at, token);
    }

    pub fn send_frame(&mut self, frame: EthernetFrame) -> Result<(), NetError> {
        let now = self.now();
        self.medium.send_frame(frame, now).map(drop)
    }

    pub fn send_arp(&mut self, node: NodeId, dst: MacAddr, packet: &ArpPacket) -> Result<(), NetError> {
        let src = self.hosts.get(node).ok_or(NetError::UnknownNode(node))?.mac;
        self.send_frame(EthernetFrame::arp(src, dst, packet))
    }

    pub fn send_datagram(&mut self, node: NodeId, dst: MacAddr, datagram: &Datagram) -> Result<(), NetError> {
        let src = self.hosts.get(node).ok_or(NetError::UnknownNode(node))?.mac;
        self.send_frame(EthernetFrame::ipv4(src, dst, datagram))
    }

    pub fn note_drop(&mut self, frame: &EthernetFrame, annotation: &str) {
        self.medium.note_drop(frame, annotation);
    }

    /// Applies an ARP packet received by `node`. Any Reply, solicited or
    /// not, overwrites the binding for its sender; a Request for the node's
    /// own address is answered with a unicast Reply.
    pub fn handle_arp(&mut self, node: NodeId, packet: &ArpPacket) -> Result<(), NetError> {
        let now = self.now();
        let host = &mut self.hosts[node];
        match packet.op {
            ArpOp::Reply => {
                host.cache.insert(packet.sender_ip, packet.sender_mac, now);
                Ok(())
            }
            ArpOp::Request if packet.target_ip == host.ip => {
                let reply = ArpPacket::reply(host.mac, host.ip, packet.sender_mac, packet.sender_ip);
                self.send_arp(node, packet.sender_mac, &reply)
            }
            ArpOp::Request => Ok(()),
        }
    }

    fn process_arp_frame(&mut self, to: NodeId, frame: &EthernetFrame) -> Result<(), NetError> {
        match ArpPacket::decode(&frame.payload) {
            Ok(packet) => self.handle_arp(to, &packet),
            Err(_) => {
                self.medium.note_drop(frame, "malformed");
                Ok(())
            }
        }
    }

    /// Next IPv4 delivery or application timer. ARP is consumed internally.
    pub fn step(&mut self) -> Result<Option<Event>, NetError> {
        if let Some(ev) = self.pending.pop_front() {
            return Ok(Some(ev));
        }
        while let Some(ev) = self.medium.pop() {
            match &ev.kind {
                EventKind::Deliver { to, frame } if frame.ethertype == EtherType::Arp => {
                    let (to, frame) = (*to, frame.clone());
                    self.process_arp_frame(to, &frame)?;
                }
                EventKind::Timer { token, .. } if token & INTERNAL_TIMER != 0 => {}
                _ => return Ok(Some(ev)),
            }
        }
        Ok(None)
    }

    /// Processes ARP traffic until `done` holds or `deadline` passes.
    /// Other events seen meanwhile are queued for [`Network::step`].
    pub fn pump_arp_until<F>(&mut self, node: NodeId, deadline: u64, done: F) -> Result<bool, NetError>
    where
        F: Fn(&Network) -> bool,
    {
        let token = INTERNAL_TIMER | self.next_wait;
        self.next_wait += 1;
        self.medium.schedule_timer(node, deadline, token);
        loop {
            if done(self) {
                return Ok(true);
            }
            let Some(ev) = self.medium.pop() else {
                return Ok(done(self));
            };
            match &ev.kind {
                EventKind::Timer { token: t, .. } if *t == token => return Ok(done(self)),
                EventKind::Timer { token: t, .. } if t & INTERNAL_TIMER != 0 => {}
                EventKind::Deliver { to, frame } if frame.ethertype == EtherType::Arp => {
                    let (to, frame) = (*to, frame.clone());
                    self.process_arp_frame(to, &frame)?;
                }
                _ => self.pending.push_back(ev),
            }
        }
    }

    /// Returns the cached binding, or broadcasts a Request and waits up to
    /// the configured timeout for the Reply.
    pub fn arp_resolve(&mut self, node: NodeId, ip: IpAddr4) -> Result<MacAddr, NetError> {
        if let Some(mac) = self.cached(node, ip) {
            return Ok(mac);
        }
        let host = &self.hosts[node];
        let request = ArpPacket::request(host.mac, host.ip, ip);
        self.send_arp(node, MacAddr::BROADCAST, &request)?;
        let deadline = self.now() + self.config.arp_timeout_ms;
        if self.pump_arp_until(node, deadline, |net| net.cached(node, ip).is_some())? {
            Ok(self.cached(node, ip).expect("resolved"))
        } else {
            Err(NetError::ResolutionFailed(ip))
        }
    }
}
