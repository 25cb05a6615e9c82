use std::collections::{HashMap, VecDeque};
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{decode, encode, ProtocolMessage, TestConfig};
use super::session::{EpisodeOutcome, Progress, Session};
use super::{BridgeError, SimulatorTarget};

pub const DEFAULT_EPISODE_TIMEOUT: Duration = Duration::from_secs(60);

const ACCEPT_POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct TcpOptions {
    /// Wall-clock limit from sending `init` to receiving `done`/`error`.
    pub episode_timeout: Duration,
    /// How long a queued episode may wait for a simulator to connect
    /// before the target reports it unreachable.
    pub connect_timeout: Duration,
    /// Run several episodes per connection instead of one.
    pub keep_alive: bool,
}

impl Default for TcpOptions {
    fn default() -> Self {
        Self {
            episode_timeout: DEFAULT_EPISODE_TIMEOUT,
            connect_timeout: Duration::from_secs(30),
            keep_alive: false,
        }
    }
}

#[derive(Default)]
struct Queue {
    next_id: u64,
    pending: VecDeque<(u64, TestConfig)>,
    done: HashMap<u64, EpisodeOutcome>,
}

struct Shared {
    queue: Mutex<Queue>,
    cv: Condvar,
    stop: AtomicBool,
}

impl Shared {
    /// Blocks until an episode is queued or the server stops.
    fn take(&self) -> Option<(u64, TestConfig)> {
        let mut q = self.queue.lock().unwrap();
        loop {
            if self.stop.load(Ordering::SeqCst) {
                return None;
            }
            if let Some(item) = q.pending.pop_front() {
                return Some(item);
            }
            q = self.cv.wait_timeout(q, ACCEPT_POLL * 10).unwrap().0;
        }
    }

    fn finish(&self, id: u64, outcome: EpisodeOutcome) {
        self.queue.lock().unwrap().done.insert(id, outcome);
        self.cv.notify_all();
    }
}

/// Falsifier-side TCP endpoint. Simulators connect as clients; each
/// [`SimulatorTarget::run`] call queues one episode and blocks until a
/// connected simulator finishes it. Clones share the listener, so several
/// threads can keep several simulators busy at once.
#[derive(Clone)]
pub struct TcpTarget {
    shared: Arc<Shared>,
    options: TcpOptions,
    local_addr: SocketAddr,
    acceptor: Arc<Mutex<Option<JoinHandle<()>>>>,
}

impl TcpTarget {
    pub fn bind<A: ToSocketAddrs>(addr: A, options: TcpOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            queue: Mutex::new(Queue::default()),
            cv: Condvar::new(),
            stop: AtomicBool::new(false),
        });
        let acceptor = {
            let shared = shared.clone();
            let options = options.clone();
            thread::spawn(move || accept_loop(listener, shared, options))
        };
        Ok(Self {
            shared,
            options,
            local_addr,
            acceptor: Arc::new(Mutex::new(Some(acceptor))),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops accepting connections. Open sessions run to completion.
    pub fn shutdown(&self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        self.shared.cv.notify_all();
        if let Some(h) = self.acceptor.lock().unwrap().take() {
            let _ = h.join();
        }
    }
}

impl SimulatorTarget for TcpTarget {
    fn run(&mut self, config: &TestConfig) -> Result<EpisodeOutcome, BridgeError> {
        config.validate()?;
        let queued = Instant::now();
        let mut q = self.shared.queue.lock().unwrap();
        let id = q.next_id;
        q.next_id += 1;
        q.pending.push_back((id, config.clone()));
        self.shared.cv.notify_all();
        loop {
            if let Some(outcome) = q.done.remove(&id) {
                return Ok(outcome);
            }
            let waiting = q.pending.iter().position(|(i, _)| *i == id);
            if let Some(pos) = waiting {
                let elapsed = queued.elapsed();
                if elapsed >= self.options.connect_timeout || self.shared.stop.load(Ordering::SeqCst) {
                    q.pending.remove(pos);
                    return Err(BridgeError::Unreachable(format!(
                        "no simulator connected to {} within {:?}",
                        self.local_addr, self.options.connect_timeout
                    )));
                }
                q = self.shared.cv.wait_timeout(q, self.options.connect_timeout - elapsed).unwrap().0;
            } else {
                q = self.shared.cv.wait(q).unwrap();
            }
        }
    }
}

impl Drop for TcpTarget {
    fn drop(&mut self) {
        // last handle stops the acceptor
        if Arc::strong_count(&self.acceptor) == 1 {
            self.shutdown();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, options: TcpOptions) {
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let shared = shared.clone();
                let options = options.clone();
                thread::spawn(move || {
                    let _ = serve_connection(stream, &shared, &options);
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(_) => thread::sleep(ACCEPT_POLL),
        }
    }
}

fn serve_connection(stream: TcpStream, shared: &Shared, options: &TcpOptions) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    loop {
        let Some((id, config)) = shared.take() else {
            return Ok(());
        };
        let outcome = run_session(&mut reader, &mut writer, &config, options.episode_timeout);
        let keep = options.keep_alive && matches!(outcome, EpisodeOutcome::Completed(_) | EpisodeOutcome::Error(_));
        if let EpisodeOutcome::ProtocolViolation(why) = &outcome {
            if let Ok(frame) = encode(&ProtocolMessage::Error { message: why.clone() }) {
                let _ = writer.write_all(frame.as_bytes());
            }
        }
        shared.finish(id, outcome);
        if !keep {
            let _ = writer.shutdown(std::net::Shutdown::Both);
            return Ok(());
        }
    }
}

fn run_session(
    reader: &mut BufReader<TcpStream>,
    writer: &mut TcpStream,
    config: &TestConfig,
    timeout: Duration,
) -> EpisodeOutcome {
    let deadline = Instant::now() + timeout;
    let frame = match encode(&ProtocolMessage::Init { config: config.clone() }) {
        Ok(f) => f,
        Err(e) => return EpisodeOutcome::Error(e.to_string()),
    };
    if let Err(e) = writer.write_all(frame.as_bytes()) {
        return EpisodeOutcome::Error(format!("sending init: {e}"));
    }
    let mut session = Session::new(config);
    let mut line = String::new();
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return EpisodeOutcome::Timeout;
        }
        if reader.get_ref().set_read_timeout(Some(left)).is_err() {
            return EpisodeOutcome::Error("socket configuration failed".into());
        }
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => return EpisodeOutcome::ProtocolViolation("connection closed mid-session".into()),
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                return EpisodeOutcome::Timeout
            }
            Err(e) => return EpisodeOutcome::ProtocolViolation(format!("read failed: {e}")),
        }
        if line.trim().is_empty() {
            continue;
        }
        let msg = match decode(&line) {
            Ok(m) => m,
            Err(e) => return EpisodeOutcome::ProtocolViolation(e.to_string()),
        };
        if let Progress::Finished(outcome) = session.feed(msg) {
            return outcome;
        }
    }
}
