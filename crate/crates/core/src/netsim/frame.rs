use std::fmt;

use serde::{Deserialize, Serialize};

use super::{IpAddr4, MacAddr, NetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EtherType {
    #[serde(rename = "ARP")]
    Arp,
    #[serde(rename = "IPv4")]
    Ipv4,
}

impl EtherType {
    pub fn code(self) -> u16 {
        match self {
            EtherType::Arp => 0x0806,
            EtherType::Ipv4 => 0x0800,
        }
    }
}

impl fmt::Display for EtherType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtherType::Arp => "ARP",
            EtherType::Ipv4 => "IPv4",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EthernetFrame {
    pub src: MacAddr,
    pub dst: MacAddr,
    pub ethertype: EtherType,
    pub payload: Vec<u8>,
}

impl EthernetFrame {
    pub fn new(src: MacAddr, dst: MacAddr, ethertype: EtherType, payload: Vec<u8>) -> Result<Self, NetError> {
        if payload.is_empty() {
            return Err(NetError::EmptyPayload);
        }
        Ok(Self {
            src,
            dst,
            ethertype,
            payload,
        })
    }

    pub fn arp(src: MacAddr, dst: MacAddr, packet: &ArpPacket) -> Self {
        Self {
            src,
            dst,
            ethertype: EtherType::Arp,
            payload: packet.encode().to_vec(),
        }
    }

    pub fn ipv4(src: MacAddr, dst: MacAddr, datagram: &Datagram) -> Self {
        Self {
            src,
            dst,
            ethertype: EtherType::Ipv4,
            payload: datagram.encode(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArpOp {
    Request,
    Reply,
}

/// Ethernet/IPv4 ARP packet (28 bytes on the wire).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArpPacket {
    pub op: ArpOp,
    pub sender_mac: MacAddr,
    pub sender_ip: IpAddr4,
    pub target_mac: MacAddr,
    pub target_ip: IpAddr4,
}

pub const ARP_PACKET_LEN: usize = 28;

impl ArpPacket {
    pub fn request(sender_mac: MacAddr, sender_ip: IpAddr4, target_ip: IpAddr4) -> Self {
        Self {
            op: ArpOp::Request,
            sender_mac,
            sender_ip,
            target_mac: MacAddr::ZERO,
            target_ip,
        }
    }

    pub fn reply(sender_mac: MacAddr, sender_ip: IpAddr4, target_mac: MacAddr, target_ip: IpAddr4) -> Self {
        Self {
            op: ArpOp::Reply,
            sender_mac,
            sender_ip,
            target_mac,
            target_ip,
        }
    }

    pub fn encode(&self) -> [u8; ARP_PACKET_LEN] {
        let mut out = [0u8; ARP_PACKET_LEN];
        out[0..2].copy_from_slice(&1u16.to_be_bytes());
        out[2..4].copy_from_slice(&EtherType::Ipv4.code().to_be_bytes());
        out[4] = 6;
        out[5] = 4;
        let op: u16 = match self.op {
            ArpOp::Request => 1,
            ArpOp::Reply => 2,
        };
        out[6..8].copy_from_slice(&op.to_be_bytes());
        out[8..14].copy_from_slice(&self.sender_mac.0);
        out[14..18].copy_from_slice(&self.sender_ip.octets());
        out[18..24].copy_from_slice(&self.target_mac.0);
        out[24..28].copy_from_slice(&self.target_ip.octets());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        let malformed = |why: &str| NetError::Malformed(format!("arp: {why}"));
        if bytes.len() != ARP_PACKET_LEN {
            return Err(malformed("length"));
        }
        if bytes[0..2] != [0, 1] || bytes[2..4] != [0x08, 0x00] || bytes[4] != 6 || bytes[5] != 4 {
            return Err(malformed("header"));
        }
        let op = match u16::from_be_bytes([bytes[6], bytes[7]]) {
            1 => ArpOp::Request,
            2 => ArpOp::Reply,
            _ => return Err(malformed("opcode")),
        };
        let mac = |at: usize| MacAddr(bytes[at..at + 6].try_into().expect("6 bytes"));
        let ip = |at: usize| IpAddr4::new(bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]);
        let packet = Self {
            op,
            sender_mac: mac(8),
            sender_ip: ip(14),
            target_mac: mac(18),
            target_ip: ip(24),
        };
        if packet.sender_mac.is_broadcast() || packet.sender_mac == MacAddr::ZERO {
            return Err(malformed("sender mac"));
        }
        Ok(packet)
    }
}

/// IPv4 header (20 bytes, no options) followed by a UDP-style port header
/// (8 bytes) and the application bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src_ip: IpAddr4,
    pub dst_ip: IpAddr4,
    pub ident: u16,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Vec<u8>,
}

const IPV4_HEADER_LEN: usize = 20;
const PORT_HEADER_LEN: usize = 8;
const PROTO_UDP: u8 = 17;

fn checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header
        .chunks(2)
        .map(|c| u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)])))
        .sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

impl Datagram {
    pub fn encode(&self) -> Vec<u8> {
        let udp_len = PORT_HEADER_LEN + self.payload.len();
        let total = IPV4_HEADER_LEN + udp_len;
        let mut out = Vec::with_capacity(total);
        out.push(0x45);
        out.push(0);
        out.extend_from_slice(&(total as u16).to_be_bytes());
        out.extend_from_slice(&self.ident.to_be_bytes());
        out.extend_from_slice(&[0x40, 0x00]); // DF
        out.push(64);
        out.push(PROTO_UDP);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.src_ip.octets());
        out.extend_from_slice(&self.dst_ip.octets());
        let sum = checksum(&out);
        out[10..12].copy_from_slice(&sum.to_be_bytes());
        out.extend_from_slice(&self.src_port.to_be_bytes());
        out.extend_from_slice(&self.dst_port.to_be_bytes());
        out.extend_from_slice(&(udp_len as u16).to_be_bytes());
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        let malformed = |why: &str| NetError::Malformed(format!("ipv4: {why}"));
        if bytes.len() < IPV4_HEADER_LEN + PORT_HEADER_LEN {
            return Err(malformed("short"));
        }
        if bytes[0] != 0x45 || bytes[9] != PROTO_UDP {
            return Err(malformed("header"));
        }
        if checksum(&bytes[..IPV4_HEADER_LEN]) != 0 {
            return Err(malformed("checksum"));
        }
        let total = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
        if total != bytes.len() {
            return Err(malformed("total length"));
        }
        let udp = &bytes[IPV4_HEADER_LEN..];
        if usize::from(u16::from_be_bytes([udp[4], udp[5]])) != udp.len() {
            return Err(malformed("port header length"));
        }
        let ip = |at: usize| IpAddr4::new(bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]);
        Ok(Self {
            src_ip: ip(12),
            dst_ip: ip(16),
            ident: u16::from_be_bytes([bytes[4], bytes[5]]),
            src_port: u16::from_be_bytes([udp[0], udp[1]]),
            dst_port: u16::from_be_bytes([udp[2], udp[3]]),
            payload: udp[PORT_HEADER_LEN..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mac(last: u8) -> MacAddr {
        MacAddr([2, 0, 0, 0, 0, last])
    }

    #[test]
    fn arp_roundtrip_and_layout() {
        let req = ArpPacket::request(mac(1), IpAddr4::new(10, 0, 0, 1), IpAddr4::new(10, 0, 0, 2));
        let bytes = req.encode();
        assert_eq!(&bytes[..8], &[0, 1, 8, 0, 6, 4, 0, 1]);
        assert_eq!(&bytes[18..24], &[0; 6]);
        assert_eq!(ArpPacket::decode(&bytes).unwrap(), req);

        let rep = ArpPacket::reply(mac(2), IpAddr4::new(10, 0, 0, 2), mac(1), IpAddr4::new(10, 0, 0, 1));
        assert_eq!(ArpPacket::decode(&rep.encode()).unwrap(), rep);
    }

    #[test]
    fn arp_malformed() {
        let mut bytes = ArpPacket::request(mac(1), IpAddr4::LOCALHOST, IpAddr4::LOCALHOST).encode();
        assert!(ArpPacket::decode(&bytes[..27]).is_err());
        bytes[7] = 9;
        assert!(ArpPacket::decode(&bytes).is_err());
    }

    #[test]
    fn datagram_roundtrip() {
        let d = Datagram {
            src_ip: IpAddr4::new(192, 168, 1, 50),
            dst_ip: IpAddr4::new(192, 168, 1, 100),
            ident: 7,
            src_port: 49152,
            dst_port: 80,
            payload: b"GET / HTTP/1.1\r\n\r\n".to_vec(),
        };
        let bytes = d.encode();
        assert_eq!(bytes.len(), 28 + d.payload.len());
        assert_eq!(checksum(&bytes[..20]), 0);
        assert_eq!(Datagram::decode(&bytes).unwrap(), d);

        let mut corrupt = bytes.clone();
        corrupt[15] ^= 1;
        assert!(Datagram::decode(&corrupt).is_err());
        assert!(Datagram::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn empty_payload_rejected() {
        assert_eq!(
            EthernetFrame::new(mac(1), mac(2), EtherType::Ipv4, vec![]),
            Err(NetError::EmptyPayload)
        );
    }
}
