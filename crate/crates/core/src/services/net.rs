//! Serving nodes over TCP with length-prefixed frames.

use std::collections::BTreeMap;
use std::io::{self, ErrorKind};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::protocol::wire::{read_frame, write_frame};
use crate::protocol::RejectionCode;

use super::sim::{Network, Simulator, World};
use super::{Clock, Envelope, Node, Recorder, Role, Scenario, Trace};

/// A running server; dropping it stops the accept loop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if let Some(accept) = self.accept.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            let _ = TcpStream::connect(self.addr);
            let _ = accept.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

/// Answers framed envelopes on `listener`, one thread per connection.
///
/// A frame that is truncated or does not decode gets a failure
/// acknowledgment and closes its connection; other connections are
/// unaffected.
pub fn serve(node: Arc<Node>, listener: TcpListener) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let accept = {
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let node = Arc::clone(&node);
                thread::spawn(move || {
                    let _ = handle_connection(&node, stream);
                });
            }
        })
    };
    Ok(ServerHandle {
        addr,
        stop,
        accept: Some(accept),
    })
}

fn handle_connection(node: &Node, mut stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    loop {
        let frame = match read_frame(&mut stream) {
            Ok(Some(frame)) => frame,
            Ok(None) => return Ok(()),
            Err(e) if matches!(e.kind(), ErrorKind::UnexpectedEof | ErrorKind::InvalidData) => {
                write_frame(&mut stream, &Envelope::ack(RejectionCode::Malformed).encode())?;
                return stream.shutdown(Shutdown::Both);
            }
            Err(e) => return Err(e),
        };
        match Envelope::decode(&frame) {
            Ok(env) => write_frame(&mut stream, &node.handle(env).encode())?,
            Err(_) => {
                write_frame(&mut stream, &Envelope::ack(RejectionCode::Malformed).encode())?;
                return stream.shutdown(Shutdown::Both);
            }
        }
    }
}

/// Sends one envelope over `stream` and waits for the reply.
pub fn request(stream: &mut TcpStream, envelope: &Envelope) -> io::Result<Envelope> {
    write_frame(stream, &envelope.encode())?;
    let reply = read_frame(stream)?.ok_or_else(|| io::Error::from(ErrorKind::UnexpectedEof))?;
    Envelope::decode(&reply).map_err(|e| io::Error::new(ErrorKind::InvalidData, e))
}

/// Reaches services over one persistent connection per endpoint.
pub struct SocketNetwork {
    routes: BTreeMap<Role, SocketAddr>,
    conns: BTreeMap<SocketAddr, TcpStream>,
    error: Option<io::Error>,
}

impl SocketNetwork {
    pub fn new(routes: BTreeMap<Role, SocketAddr>) -> Self {
        Self {
            routes,
            conns: BTreeMap::new(),
            error: None,
        }
    }

    /// The first transport failure, if any happened.
    pub fn take_error(&mut self) -> Option<io::Error> {
        self.error.take()
    }

    fn try_deliver(&mut self, to: Role, envelope: &Envelope) -> io::Result<Envelope> {
        let addr = *self
            .routes
            .get(&to)
            .ok_or_else(|| io::Error::new(ErrorKind::NotFound, format!("no route to {to}")))?;
        if !self.conns.contains_key(&addr) {
            let stream = TcpStream::connect(addr)?;
            stream.set_nodelay(true)?;
            self.conns.insert(addr, stream);
        }
        let stream = self.conns.get_mut(&addr).expect("connection just inserted");
        request(stream, envelope)
    }
}

impl Network for SocketNetwork {
    fn deliver(&mut self, to: Role, envelope: &Envelope) -> Envelope {
        match self.try_deliver(to, envelope) {
            Ok(reply) => reply,
            Err(e) => {
                self.error.get_or_insert(e);
                Envelope::ack(RejectionCode::Malformed)
            }
        }
    }
}

/// Runs `scenario` with every node served on its own loopback port.
pub fn run_over_sockets(world: &World, scenario: &Scenario) -> io::Result<Trace> {
    let recorder = Recorder::new();
    let clock = Clock::logical(world.start);
    let mut servers = Vec::new();
    let mut routes = BTreeMap::new();
    for (roles, node) in world.build_nodes(&recorder, &clock) {
        let server = serve(Arc::new(node), TcpListener::bind("127.0.0.1:0")?)?;
        for r in roles {
            routes.insert(r, server.local_addr());
        }
        servers.push(server);
    }
    let mut net = SocketNetwork::new(routes);
    let trace = Simulator::new(world, &mut net, recorder, clock).run(scenario);
    drop(servers);
    match net.take_error() {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;
    use crate::protocol::wire::Message;
    use crate::services::random_scenario;
    use crate::services::sim::run_scenario;
    use crate::services::sim::tests::world;

    #[test]
    fn sockets_and_in_process_agree() {
        let mut scenarios = vec![Scenario::honest()];
        scenarios.extend((0..4).map(random_scenario));
        for s in &scenarios {
            assert_eq!(run_over_sockets(world(), s).unwrap(), run_scenario(world(), s), "{}", s.to_script());
        }
    }

    fn served_node() -> (ServerHandle, Recorder) {
        let recorder = Recorder::new();
        let clock = Clock::logical(world().start);
        let (_, node) = world()
            .build_nodes(&recorder, &clock)
            .into_iter()
            .find(|(roles, _)| roles.contains(&Role::Ca))
            .unwrap();
        let server = serve(Arc::new(node), TcpListener::bind("127.0.0.1:0").unwrap()).unwrap();
        (server, recorder)
    }

    #[test]
    fn truncated_frame_gets_error_ack_and_service_continues() {
        let (server, _) = served_node();
        let mut bad = TcpStream::connect(server.local_addr()).unwrap();
        bad.write_all(&[0, 0, 0, 50, 1, 2, 3]).unwrap();
        bad.shutdown(Shutdown::Write).unwrap();
        let reply = read_frame(&mut bad).unwrap().unwrap();
        assert_eq!(
            Envelope::decode(&reply).unwrap(),
            Envelope::ack(RejectionCode::Malformed)
        );

        let mut garbage = TcpStream::connect(server.local_addr()).unwrap();
        write_frame(&mut garbage, b"not a message").unwrap();
        let reply = Envelope::decode(&read_frame(&mut garbage).unwrap().unwrap()).unwrap();
        assert_eq!(reply, Envelope::ack(RejectionCode::Malformed));

        let mut good = TcpStream::connect(server.local_addr()).unwrap();
        let alice = &world().alice;
        let reg = Envelope::Register(super::super::Registration {
            user_key: alice.verification_key().clone(),
            attributes: alice.attributes.clone(),
            evidence: alice.evidence,
        });
        assert!(matches!(request(&mut good, &reg).unwrap(), Envelope::Credentials(b) if b.len() == 4));
        let wrong_party = Envelope::Protocol(Message::Ack(crate::protocol::Acknowledgment::success()));
        assert_eq!(request(&mut good, &wrong_party).unwrap(), Envelope::ack(RejectionCode::Malformed));
        server.shutdown();
    }
}
