//! One complete testbed run: topology, device, server and optional attacker
//! wired into a single event loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacker::{AttackError, AttackPlan, Attacker, TrafficProfile};
use crate::endpoints::{Device, DeviceConfig, EndpointError, RequestMeta, Server, ServerConfig, SERVER_PORT};
use crate::netsim::{Datagram, EtherType, EventKind, FrameLoss, IpAddr4, MacAddr, NetConfig, NetError, Network, NodeId};
use crate::rng::{stream, Stream};
use crate::wire::ACK_RESPONSE;

/// Upper bound on processed events; a run that exceeds it is stuck.
const MAX_EVENTS: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("topology: {0}")]
    Topology(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Device,
    Server,
    Gateway,
    Attacker,
    Host,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub role: Role,
    pub ip: IpAddr4,
    pub mac: MacAddr,
}

impl NodeSpec {
    pub fn new(name: &str, role: Role, ip: [u8; 4], mac: [u8; 6]) -> Self {
        Self {
            name: name.to_string(),
            role,
            ip: IpAddr4::from(ip),
            mac: MacAddr(mac),
        }
    }
}

/// The four-node segment: device, server, gateway and attacker.
pub fn paper_topology() -> Vec<NodeSpec> {
    vec![
        NodeSpec::new("device", Role::Device, [192, 168, 1, 50], [0x5c, 0xcf, 0x7f, 0x00, 0x00, 0x50]),
        NodeSpec::new("server", Role::Server, [192, 168, 1, 100], [0x3c, 0x52, 0x82, 0x00, 0x01, 0x00]),
        NodeSpec::new("gateway", Role::Gateway, [192, 168, 1, 1], [0xc0, 0x25, 0xe9, 0x00, 0x00, 0x01]),
        NodeSpec::new("attacker", Role::Attacker, [192, 168, 1, 66], [0x00, 0x0c, 0x29, 0x66, 0x66, 0x66]),
    ]
}

/// Everything needed to build a run.
#[derive(Debug, Clone)]
pub struct TestbedSpec {
    pub run_id: String,
    pub seed: u64,
    pub nodes: Vec<NodeSpec>,
    pub net: NetConfig,
    /// Per-frame IPv4 drop probability.
    pub loss: f64,
    pub device: DeviceConfig,
    pub server: ServerConfig,
    pub attack: Option<AttackPlan>,
    pub messages: u64,
}

impl TestbedSpec {
    /// Paper topology, default endpoints, no attacker.
    pub fn new(run_id: &str, seed: u64, messages: u64) -> Self {
        Self {
            run_id: run_id.to_string(),
            seed,
            nodes: paper_topology(),
            net: NetConfig::default(),
            loss: 0.0,
            device: DeviceConfig::default(),
            server: ServerConfig::default(),
            attack: None,
            messages,
        }
    }

    fn role(&self, role: Role) -> Result<&NodeSpec, ScenarioError> {
        let mut found = self.nodes.iter().filter(|n| n.role == role);
        match (found.next(), found.next()) {
            (Some(node), None) => Ok(node),
            (None, _) => Err(ScenarioError::Topology(format!("no node with role {role:?}"))),
            (Some(_), Some(_)) => Err(ScenarioError::Topology(format!("more than one {role:?}"))),
        }
    }
}

pub struct Testbed {
    run_id: String,
    net: Network,
    device: Device,
    server: Server,
    server_node: NodeId,
    attacker: Option<Attacker>,
    first_tick_ms: u64,
}

impl Testbed {
    pub fn new(spec: TestbedSpec) -> Result<Self, ScenarioError> {
        let mut net = Network::new(spec.net);
        for node in &spec.nodes {
            net.add_host(&node.name, node.mac, node.ip)?;
        }
        if !(0.0..=1.0).contains(&spec.loss) {
            return Err(ScenarioError::Topology(format!("loss {} outside [0, 1]", spec.loss)));
        }
        if spec.loss > 0.0 {
            net.set_loss(Some(FrameLoss {
                probability: spec.loss,
                rng: stream(spec.seed, Stream::FrameLoss),
            }));
        }
        let node_of = |ip: IpAddr4| net.host_by_ip(ip).expect("registered");
        let device_spec = spec.role(Role::Device)?;
        let server_spec = spec.role(Role::Server)?;
        let device = Device::new(
            spec.device.clone(),
            node_of(device_spec.ip),
            server_spec.ip,
            spec.seed,
            spec.messages,
        )?;
        let server = Server::new(spec.server.clone())?;
        let server_node = node_of(server_spec.ip);
        let attacker = match &spec.attack {
            Some(plan) => {
                let attacker_spec = spec.role(Role::Attacker)?;
                for ip in [plan.victim_ip, plan.peer_ip] {
                    if net.host_by_ip(ip).is_none() {
                        return Err(ScenarioError::Topology(format!("attack references unknown address {ip}")));
                    }
                }
                let profile = TrafficProfile {
                    mode: spec.device.mode,
                    encoding: spec.device.encoding,
                    framing: spec.device.framing,
                };
                Some(Attacker::new(
                    plan.clone(),
                    node_of(attacker_spec.ip),
                    profile,
                    spec.seed,
                    &spec.run_id,
                )?)
            }
            None => None,
        };
        Ok(Self {
            run_id: spec.run_id,
            server_node,
            first_tick_ms: spec.device.sample_interval_ms,
            net,
            device,
            server,
            attacker,
        })
    }

    /// Boots every actor and processes events until the device has sent
    /// and settled all its messages and the queue is empty.
    pub fn run(&mut self) -> Result<(), ScenarioError> {
        self.device.boot(&mut self.net, self.first_tick_ms);
        if let Some(attacker) = &mut self.attacker {
            attacker.start(&mut self.net);
        }
        let mut processed = 0u64;
        while let Some(event) = self.net.step()? {
            processed += 1;
            if processed > MAX_EVENTS {
                return Err(ScenarioError::Invariant(format!("no quiescence after {MAX_EVENTS} events")));
            }
            match event.kind {
                EventKind::Timer { node, token } => {
                    if node == self.device.node() {
                        self.device.on_timer(&mut self.net, token)?;
                    } else if let Some(attacker) = self.attacker.as_mut().filter(|a| a.node() == node) {
                        attacker.on_timer(&mut self.net, token)?;
                    }
                }
                EventKind::Deliver { to, frame } if frame.ethertype == EtherType::Ipv4 => {
                    if let Some(attacker) = self.attacker.as_mut().filter(|a| a.node() == to) {
                        attacker.forward(&mut self.net, &frame)?;
                    } else {
                        self.deliver(to, &frame.payload)?;
                    }
                }
                EventKind::Deliver { .. } => {}
            }
            if self.device.is_finished() {
                if let Some(attacker) = &mut self.attacker {
                    attacker.stand_down();
                }
            }
        }
        if !self.device.is_finished() {
            return Err(ScenarioError::Invariant("event queue drained before the device finished".into()));
        }
        Ok(())
    }

    fn deliver(&mut self, to: NodeId, payload: &[u8]) -> Result<(), ScenarioError> {
        let Ok(datagram) = Datagram::decode(payload) else {
            return Ok(());
        };
        if datagram.dst_ip != self.net.host(to).ip {
            return Ok(());
        }
        if to == self.device.node() {
            self.device.on_datagram(self.net.now(), &datagram);
        } else if to == self.server_node && datagram.dst_port == SERVER_PORT {
            let meta = RequestMeta {
                received_at: self.net.now(),
                source_ip: datagram.src_ip,
            };
            self.server.handle_request(&datagram.payload, meta);
            self.acknowledge(&datagram)?;
        }
        Ok(())
    }

    fn acknowledge(&mut self, request: &Datagram) -> Result<(), ScenarioError> {
        let Ok(dst_mac) = self.net.arp_resolve(self.server_node, request.src_ip) else {
            return Ok(());
        };
        let ack = Datagram {
            src_ip: request.dst_ip,
            dst_ip: request.src_ip,
            ident: request.ident,
            src_port: SERVER_PORT,
            dst_port: request.src_port,
            payload: ACK_RESPONSE.to_vec(),
        };
        self.net.send_datagram(self.server_node, dst_mac, &ack)?;
        Ok(())
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn server(&self) -> &Server {
        &self.server
    }

    pub fn attacker(&self) -> Option<&Attacker> {
        self.attacker.as_ref()
    }
}
