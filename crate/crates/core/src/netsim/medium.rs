use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{EtherType, EthernetFrame, IpAddr4, MacAddr, NetError};

pub type NodeId = usize;

/// Simulated millisecond clock. Only moves forward, and only when an event
/// is taken off the queue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    now: u64,
}

impl SimClock {
    pub fn now(&self) -> u64 {
        self.now
    }

    fn advance_to(&mut self, t: u64) {
        self.now = self.now.max(t);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Deliver { to: NodeId, frame: EthernetFrame },
    Timer { node: NodeId, token: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub at: u64,
    pub seq: u64,
    pub kind: EventKind,
}

// Min-heap on (at, seq).
struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.0.at, self.0.seq) == (other.0.at, other.0.seq)
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.at, other.0.seq).cmp(&(self.0.at, self.0.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub to: NodeId,
    pub at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureEvent {
    Send,
    Deliver,
    Drop,
}

/// One line of the capture export. Field order is the export order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaptureRecord {
    pub t_ms: u64,
    pub event: CaptureEvent,
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub ethertype: EtherType,
    pub payload_hex: String,
    pub annotation: Option<String>,
}

impl CaptureRecord {
    pub fn payload(&self) -> Vec<u8> {
        hex::decode(&self.payload_hex).expect("capture payload is hex")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeEntry {
    pub id: NodeId,
    pub mac: MacAddr,
    pub ip: IpAddr4,
}

/// Independent per-frame drop applied to IPv4 frames only.
#[derive(Debug, Clone)]
pub struct FrameLoss {
    pub probability: f64,
    pub rng: ChaCha8Rng,
}

/// A switched segment: unicast goes to the owner of the destination MAC,
/// broadcast to everyone but the sender, each after `propagation_ms`.
pub struct Medium {
    nodes: Vec<NodeEntry>,
    by_mac: BTreeMap<MacAddr, NodeId>,
    queue: BinaryHeap<Queued>,
    next_seq: u64,
    clock: SimClock,
    propagation_ms: u64,
    capture: Vec<CaptureRecord>,
    loss: Option<FrameLoss>,
}

impl Medium {
    pub fn new(propagation_ms: u64) -> Self {
        Self {
            nodes: Vec::new(),
            by_mac: BTreeMap::new(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            clock: SimClock::default(),
            propagation_ms,
            capture: Vec::new(),
            loss: None,
        }
    }

    pub fn set_loss(&mut self, loss: Option<FrameLoss>) {
        self.loss = loss.filter(|l| l.probability > 0.0);
    }

    pub fn add_node(&mut self, mac: MacAddr, ip: IpAddr4) -> Result<NodeId, NetError> {
        if mac.is_broadcast() || mac == MacAddr::ZERO {
            return Err(NetError::BadAddress(mac.to_string()));
        }
        if self.by_mac.contains_key(&mac) {
            return Err(NetError::DuplicateAddress(mac.to_string()));
        }
        if self.nodes.iter().any(|n| n.ip == ip) {
            return Err(NetError::DuplicateAddress(ip.to_string()));
        }
        let id = self.nodes.len();
        self.nodes.push(NodeEntry { id, mac, ip });
        self.by_mac.insert(mac, id);
        Ok(id)
    }

    pub fn nodes(&self) -> &[NodeEntry] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeEntry, NetError> {
        self.nodes.get(id).ok_or(NetError::UnknownNode(id))
    }

    pub fn node_by_mac(&self, mac: MacAddr) -> Option<NodeId> {
        self.by_mac.get(&mac).copied()
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    pub fn propagation_ms(&self) -> u64 {
        self.propagation_ms
    }

    fn push(&mut self, at: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event { at, seq, kind }));
    }

    fn record(&mut self, t_ms: u64, event: CaptureEvent, frame: &EthernetFrame, annotation: Option<String>) {
        self.capture.push(CaptureRecord {
            t_ms,
            event,
            src_mac: frame.src,
            dst_mac: frame.dst,
            ethertype: frame.ethertype,
            payload_hex: hex::encode(&frame.payload),
            annotation,
        });
    }

    /// Puts a frame on the wire at `at` (clamped to now) and schedules its
    /// deliveries. Unknown unicast destinations are dropped with a
    /// `no-receiver` capture annotation.
    pub fn send_frame(&mut self, frame: EthernetFrame, at: u64) -> Result<Vec<Delivery>, NetError> {
        let sender = self.node_by_mac(frame.src).ok_or(NetError::UnknownSender(frame.src))?;
        if frame.payload.is_empty() {
            return Err(NetError::EmptyPayload);
        }
        let at = at.max(self.now());
        self.record(at, CaptureEvent::Send, &frame, None);

        if frame.ethertype == EtherType::Ipv4 {
            if let Some(loss) = self.loss.as_mut() {
                if loss.rng.gen_bool(loss.probability) {
                    self.record(at, CaptureEvent::Drop, &frame, Some("loss".into()));
                    return Ok(Vec::new());
                }
            }
        }

        let receivers: Vec<NodeId> = if frame.dst.is_broadcast() {
            self.nodes.iter().map(|n| n.id).filter(|&id| id != sender).collect()
        } else {
            match self.node_by_mac(frame.dst) {
                Some(id) => vec![id],
                None => {
                    self.record(at, CaptureEvent::Drop, &frame, Some("no-receiver".into()));
                    return Ok(Vec::new());
                }
            }
        };
        let deliver_at = at + self.propagation_ms;
        let deliveries = receivers
            .into_iter()
            .map(|to| {
                self.push(deliver_at, EventKind::Deliver { to, frame: frame.clone() });
                Delivery { to, at: deliver_at }
            })
            .collect();
        Ok(deliveries)
    }

    pub fn schedule_timer(&mut self, node: NodeId, at: u64, token: u64) {
        let at = at.max(self.now());
        self.push(at, EventKind::Timer { node, token });
    }

    /// Takes the next event, advancing the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let Queued(event) = self.queue.pop()?;
        self.clock.advance_to(event.at);
        if let EventKind::Deliver { to, frame } = &event.kind {
            let annotation = frame
                .dst
                .is_broadcast()
                .then(|| format!("rx {}", self.nodes[*to].mac));
            let frame = frame.clone();
            self.record(event.at, CaptureEvent::Deliver, &frame, annotation);
        }
        Some(event)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn note_drop(&mut self, frame: &EthernetFrame, annotation: &str) {
        let now = self.now();
        self.record(now, CaptureEvent::Drop, frame, Some(annotation.to_string()));
    }

    pub fn capture(&self) -> &[CaptureRecord] {
        &self.capture
    }

    pub fn export_capture<W: Write>(&self, mut out: W) -> io::Result<()> {
        for record in &self.capture {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
