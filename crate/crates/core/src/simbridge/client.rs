use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use super::inprocess::{drive_episode, EpisodeSimulator};
use super::protocol::{decode, encode, ProtocolMessage};
use super::BridgeError;

/// Simulator side over TCP. Connects, answers every `init` with a full
/// episode and returns the number of episodes run once the server closes
/// the connection.
pub fn run_client<A: ToSocketAddrs>(addr: A, sim: &mut dyn EpisodeSimulator) -> Result<usize, BridgeError> {
    let stream = TcpStream::connect(addr).map_err(|e| BridgeError::Unreachable(e.to_string()))?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let mut episodes = 0;
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            // server hung up after its last episode
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        let msg = match decode(&line) {
            Ok(m) => m,
            Err(e) => {
                let frame = encode(&ProtocolMessage::Error { message: e.to_string() })?;
                writer.write_all(frame.as_bytes())?;
                return Err(e);
            }
        };
        match msg {
            ProtocolMessage::Init { config } => {
                let mut out = String::new();
                drive_episode(sim, &config, |m| {
                    out.push_str(&encode(&m)?);
                    Ok(())
                })?;
                writer.write_all(out.as_bytes())?;
                writer.flush()?;
                episodes += 1;
            }
            ProtocolMessage::Error { message } => return Err(BridgeError::Simulator(message)),
            other => return Err(BridgeError::Framing(format!("unexpected `{}` from server", other.kind()))),
        }
    }
    Ok(episodes)
}
