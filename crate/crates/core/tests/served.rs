//! Sequential requests against an OCP served over loopback.

use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Instant;

use oblivion_core::bench::{throughput_requests, BenchKeys};
use oblivion_core::matching::{Matcher, SynonymTable};
use oblivion_core::protocol::wire::Message;
use oblivion_core::protocol::{OcpConfig, OcpVerifier};
use oblivion_core::services::net::request;
use oblivion_core::services::{serve, Clock, Envelope, Node, OcpParty, Recorder};

const START: u64 = 1_413_763_200;

#[test]
fn two_thousand_requests_over_loopback() {
    let keys = BenchKeys::generate(1024, 77).unwrap();
    let ocp_key = BenchKeys::generate(1024, 78).unwrap().ca;
    let requests = throughput_requests(&keys, 20, 2_000, START).unwrap();
    let verifier = OcpVerifier::new(
        keys.ca.verification_key().clone(),
        Matcher::new(SynonymTable::new()),
        OcpConfig::default(),
    );
    let node = Node::new(Recorder::new(), Clock::logical(START)).with_ocp(OcpParty::new(verifier, ocp_key));
    let server = serve(Arc::new(node), TcpListener::bind("127.0.0.1:0").unwrap()).unwrap();
    let mut stream = TcpStream::connect(server.local_addr()).unwrap();
    stream.set_nodelay(true).unwrap();

    let started = Instant::now();
    for req in requests {
        let reply = request(&mut stream, &Envelope::Protocol(Message::Request(req))).unwrap();
        assert!(matches!(reply, Envelope::Protocol(Message::Token(_))), "{reply:?}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 8.24, "2000 requests took {elapsed:.2?}");
    eprintln!("2000 served requests in {elapsed:.2?}");
}
