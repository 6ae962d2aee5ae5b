//! Deterministic simulated-LAN testbed for medical IoT telemetry: ARP-spoofing
//! interception and tampering of plaintext HTTP telemetry, AES-128-CBC
//! protection of the same channel, and a calibrated latency/reliability model.

pub mod crypto;
pub mod wire;
pub mod netsim;
pub mod endpoints;
pub mod rng;
pub mod attacker;
pub mod scenario;
pub mod bench;
pub mod cli;
