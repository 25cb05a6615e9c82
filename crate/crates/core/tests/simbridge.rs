use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use falsify_core::simbridge::{
    decode, encode, run_client, BridgeError, EpisodeOutcome, EpisodeSimulator, InProcess, ProtocolMessage, Signals,
    SimulatorTarget, TcpOptions, TcpTarget, TestConfig,
};
use falsify_core::Value;
use indexmap::IndexMap;
use proptest::prelude::*;

fn config(episode: u64, duration: f64) -> TestConfig {
    let mut features = IndexMap::new();
    features.insert("cte0".to_string(), Value::Real(0.3));
    TestConfig {
        episode,
        features,
        duration,
        period: 0.1,
        seed: 42,
        flags: BTreeMap::new(),
    }
}

fn options(timeout_ms: u64) -> TcpOptions {
    TcpOptions {
        episode_timeout: Duration::from_millis(timeout_ms),
        connect_timeout: Duration::from_secs(5),
        keep_alive: false,
    }
}

/// Connects a scripted client that reads `init` and replies with `frames`.
fn scripted(addr: SocketAddr, frames: Vec<String>, hold: Duration) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let stream = TcpStream::connect(addr).unwrap();
        let mut w = stream.try_clone().unwrap();
        let mut r = BufReader::new(stream);
        let mut line = String::new();
        r.read_line(&mut line).unwrap();
        assert!(matches!(decode(&line).unwrap(), ProtocolMessage::Init { .. }));
        for f in frames {
            let _ = w.write_all(f.as_bytes());
        }
        thread::sleep(hold);
    })
}

fn step(t: f64) -> String {
    encode(&ProtocolMessage::Step {
        t,
        signals: [("cte".to_string(), 0.0)].into_iter().collect(),
    })
    .unwrap()
}

fn init(c: &TestConfig) -> String {
    encode(&ProtocolMessage::Init { config: c.clone() }).unwrap()
}

#[test]
fn tcp_happy_path_three_steps() {
    let mut target = TcpTarget::bind("127.0.0.1:0", options(5000)).unwrap();
    let c = config(1, 0.2);
    let done = encode(&ProtocolMessage::Done { status: "ok".into() }).unwrap();
    let client = scripted(
        target.local_addr(),
        vec![init(&c), step(0.0), step(0.1), step(0.2), done],
        Duration::ZERO,
    );
    let out = target.run(&c).unwrap();
    assert_eq!(out.trace().unwrap().len(), 3);
    client.join().unwrap();
}

#[test]
fn tcp_step_before_init_is_violation() {
    let mut target = TcpTarget::bind("127.0.0.1:0", options(5000)).unwrap();
    let client = scripted(target.local_addr(), vec![step(0.0)], Duration::from_millis(50));
    assert!(matches!(target.run(&config(1, 1.0)).unwrap(), EpisodeOutcome::ProtocolViolation(_)));
    client.join().unwrap();
}

#[test]
fn tcp_silent_client_times_out() {
    let mut target = TcpTarget::bind("127.0.0.1:0", options(200)).unwrap();
    let c = config(1, 1.0);
    let client = scripted(target.local_addr(), vec![init(&c)], Duration::from_millis(600));
    let started = Instant::now();
    assert_eq!(target.run(&c).unwrap(), EpisodeOutcome::Timeout);
    assert!(started.elapsed() < Duration::from_millis(550));
    client.join().unwrap();
}

#[test]
fn no_client_is_unreachable() {
    let mut target = TcpTarget::bind(
        "127.0.0.1:0",
        TcpOptions {
            connect_timeout: Duration::from_millis(100),
            ..TcpOptions::default()
        },
    )
    .unwrap();
    assert!(matches!(target.run(&config(1, 1.0)), Err(BridgeError::Unreachable(_))));
}

#[test]
fn client_refused_when_server_down() {
    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    assert!(matches!(run_client(addr, &mut Wobble), Err(BridgeError::Unreachable(_))));
}

/// Deterministic toy simulator with irrational-looking outputs so bitwise
/// equality is a meaningful check.
struct Wobble;

impl EpisodeSimulator for Wobble {
    fn start(&mut self, _: &TestConfig) -> Result<(), String> {
        Ok(())
    }
    fn sample(&mut self, t: f64) -> Result<Signals, String> {
        Ok([
            ("cte".to_string(), (t * 1.7).sin() / 3.0),
            ("he".to_string(), (t * 0.3).exp().ln_1p()),
        ]
        .into_iter()
        .collect())
    }
}

#[test]
fn loopback_matches_in_process_bitwise() {
    let target = TcpTarget::bind(
        "127.0.0.1:0",
        TcpOptions {
            keep_alive: true,
            ..options(5000)
        },
    )
    .unwrap();
    let addr = target.local_addr();
    let client = thread::spawn(move || run_client(addr, &mut Wobble));
    let mut tcp = target.clone();
    let mut local = InProcess::new(Wobble);
    for ep in 0..3 {
        let c = config(ep, 3.0);
        let a = tcp.run(&c).unwrap();
        let b = local.run(&c).unwrap();
        assert!(a.trace().unwrap().bit_eq(b.trace().unwrap()));
        assert_eq!(a.trace().unwrap().len(), 31);
    }
    target.shutdown();
    drop(tcp);
    drop(target);
    assert_eq!(client.join().unwrap().unwrap(), 3);
}

#[test]
fn concurrent_sessions() {
    let target = TcpTarget::bind("127.0.0.1:0", options(5000)).unwrap();
    let addr = target.local_addr();
    let clients: Vec<_> = (0..4)
        .map(|_| {
            thread::spawn(move || {
                let mut n = 0;
                // one episode per connection; reconnect until refused
                while let Ok(k) = run_client(addr, &mut Wobble) {
                    n += k;
                    if n >= 2 {
                        break;
                    }
                }
                n
            })
        })
        .collect();
    let workers: Vec<_> = (0..4)
        .map(|w| {
            let mut t = target.clone();
            thread::spawn(move || {
                (0..2)
                    .map(|i| t.run(&config(w * 10 + i, 0.5)).unwrap().trace().map(|tr| tr.len()))
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    for w in workers {
        assert_eq!(w.join().unwrap(), vec![Some(6), Some(6)]);
    }
    let total: usize = clients.into_iter().map(|c| c.join().unwrap()).sum();
    assert_eq!(total, 8);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE), Just(1e300)]
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![finite().prop_map(Value::Real), "[a-z_]{0,8}".prop_map(Value::Tag)]
}

fn message() -> impl Strategy<Value = ProtocolMessage> {
    let text = "[ -~é\"\\\\\n]{0,16}";
    prop_oneof![
        (finite(), prop::collection::btree_map("[a-z]{1,6}", finite(), 0..5))
            .prop_map(|(t, signals)| ProtocolMessage::Step { t, signals }),
        text.prop_map(|status| ProtocolMessage::Done { status }),
        text.prop_map(|message| ProtocolMessage::Error { message }),
        (
            any::<u64>(),
            prop::collection::vec(("[a-z0-9]{1,6}", value()), 0..5),
            0.001..100.0f64,
            0.001..1.0f64,
            any::<u64>(),
            prop::collection::btree_map("[a-z]{1,5}", "[a-z=,]{0,5}", 0..3),
        )
            .prop_map(|(episode, fs, duration, period, seed, flags)| ProtocolMessage::Init {
                config: TestConfig {
                    episode,
                    features: fs.into_iter().collect(),
                    duration,
                    period,
                    seed,
                    flags,
                },
            }),
    ]
}

proptest! {
    #[test]
    fn encode_decode_round_trip(m in message()) {
        let line = encode(&m).unwrap();
        prop_assert!(line.ends_with('\n'));
        prop_assert_eq!(line.matches('\n').count(), 1);
        let back = decode(&line).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode(&back).unwrap(), line);
    }
}
