//! Discrete-event simulation of one switched LAN segment with ARP.
//!
//! Every frame is recorded in a capture log that exports as JSON Lines.
//! Ordering is by `(time, insertion sequence)`, so a fixed configuration and
//! seed always replays to the same capture.

mod addr;
mod frame;
mod medium;
mod network;

use thiserror::Error;

pub use self::addr::{IpAddr4, MacAddr};
pub use self::frame::{ArpOp, ArpPacket, Datagram, EtherType, EthernetFrame, ARP_PACKET_LEN};
pub use self::medium::{
    CaptureEvent, CaptureRecord, Delivery, Event, EventKind, FrameLoss, Medium, NodeEntry, NodeId, SimClock,
};
pub use self::network::{ArpCache, Host, NetConfig, Network};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("frame sender {0} is not registered on the segment")]
    UnknownSender(MacAddr),
    #[error("no node with id {0}")]
    UnknownNode(NodeId),
    #[error("address {0} already in use")]
    DuplicateAddress(String),
    #[error("invalid address {0:?}")]
    BadAddress(String),
    #[error("frame payload is empty")]
    EmptyPayload,
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error("ARP resolution of {0} timed out")]
    ResolutionFailed(IpAddr4),
}
