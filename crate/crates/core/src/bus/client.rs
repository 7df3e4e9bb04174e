use super::*;
use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

/// Something the hub sent to this client.
#[derive(Debug, Clone, PartialEq)]
pub enum Incoming {
    Message { topic: String, payload: String },
    Error { topic: String, id: String, kind: String, message: String },
}

type Handler = Box<dyn FnMut(&str) + Send>;

/// Blocking TCP client. A background thread reads deliveries; topics with a
/// registered handler are dispatched there in arrival order, everything else
/// is queued for [`BusClient::recv_timeout`].
pub struct BusClient {
    writer: BufWriter<TcpStream>,
    stream: TcpStream,
    next_id: u64,
    rx: Receiver<Incoming>,
    pending: VecDeque<Incoming>,
    handlers: Arc<Mutex<HashMap<String, Handler>>>,
    reader: Option<JoinHandle<()>>,
}

impl BusClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, BusError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let (tx, rx) = mpsc::channel();
        let handlers: Arc<Mutex<HashMap<String, Handler>>> = Arc::default();
        let reader = {
            let input = BufReader::new(stream.try_clone()?);
            let handlers = handlers.clone();
            std::thread::spawn(move || {
                for line in input.lines() {
                    let Ok(line) = line else { break };
                    let Ok(env) = Envelope::decode(&line) else {
                        log::warn!("undecodable line from hub");
                        continue;
                    };
                    let item = match env.op {
                        Op::Publish => {
                            let payload = env.payload().unwrap_or("null");
                            let mut hs = handlers.lock().unwrap_or_else(|e| e.into_inner());
                            if let Some(h) = hs.get_mut(&env.topic) {
                                h(payload);
                                continue;
                            }
                            Incoming::Message {
                                topic: env.topic.clone(),
                                payload: payload.to_owned(),
                            }
                        }
                        Op::Error => {
                            let body = env.error.clone().unwrap_or(ErrorBody {
                                kind: "unknown".into(),
                                message: String::new(),
                            });
                            Incoming::Error {
                                topic: env.topic,
                                id: env.id,
                                kind: body.kind,
                                message: body.message,
                            }
                        }
                        _ => continue,
                    };
                    if tx.send(item).is_err() {
                        break;
                    }
                }
            })
        };
        Ok(BusClient {
            writer: BufWriter::new(stream.try_clone()?),
            stream,
            next_id: 1,
            rx,
            pending: VecDeque::new(),
            handlers,
            reader: Some(reader),
        })
    }

    fn send(&mut self, env: Envelope) -> Result<(), BusError> {
        env.check()?;
        let line = env.to_line();
        self.next_id += 1;
        let w = &mut self.writer;
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|_| BusError::NotConnected)
    }

    fn id(&self) -> String {
        self.next_id.to_string()
    }

    pub fn advertise(&mut self, topic: &str) -> Result<(), BusError> {
        self.send(Envelope::new(Op::Advertise, topic, self.id()))
    }

    pub fn subscribe(&mut self, topic: &str) -> Result<(), BusError> {
        self.send(Envelope::new(Op::Subscribe, topic, self.id()))
    }

    /// Subscribe and route that topic's payloads to `handler` instead of the
    /// receive queue.
    pub fn subscribe_with(&mut self, topic: &str, handler: impl FnMut(&str) + Send + 'static) -> Result<(), BusError> {
        self.handlers
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(topic.to_owned(), Box::new(handler));
        self.subscribe(topic)
    }

    pub fn unsubscribe(&mut self, topic: &str) -> Result<(), BusError> {
        self.handlers.lock().unwrap_or_else(|e| e.into_inner()).remove(topic);
        self.send(Envelope::new(Op::Unsubscribe, topic, self.id()))
    }

    /// Publish serialized JSON as is. It must be a single line.
    pub fn publish_raw(&mut self, topic: &str, json: &str) -> Result<(), BusError> {
        if json.contains('\n') {
            return Err(BusError::InvalidEnvelope("payload contains a raw newline".into()));
        }
        let msg = RawValue::from_string(json.to_owned()).map_err(|e| BusError::InvalidEnvelope(e.to_string()))?;
        self.send(Envelope::publish(topic, self.id(), msg))
    }

    pub fn publish<T: Serialize>(&mut self, topic: &str, msg: &T) -> Result<(), BusError> {
        let json = serde_json::to_string(msg).map_err(|e| BusError::InvalidEnvelope(e.to_string()))?;
        self.publish_raw(topic, &json)
    }

    /// Next delivery or hub error; `Ok(None)` on timeout.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Incoming>, BusError> {
        if let Some(item) = self.pending.pop_front() {
            return Ok(Some(item));
        }
        match self.rx.recv_timeout(timeout) {
            Ok(item) => Ok(Some(item)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(BusError::NotConnected),
        }
    }

    /// Next payload on `topic`, setting other deliveries aside for later.
    pub fn recv_on(&mut self, topic: &str, timeout: Duration) -> Result<Option<String>, BusError> {
        if let Some(pos) = self.pending.iter().position(|i| matches!(i, Incoming::Message { topic: t, .. } if t == topic)) {
            if let Some(Incoming::Message { payload, .. }) = self.pending.remove(pos) {
                return Ok(Some(payload));
            }
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(Incoming::Message { topic: t, payload }) if t == topic => return Ok(Some(payload)),
                Ok(other) => self.pending.push_back(other),
                Err(RecvTimeoutError::Timeout) => return Ok(None),
                Err(RecvTimeoutError::Disconnected) => return Err(BusError::NotConnected),
            }
        }
    }

    /// Round-trip through the hub so every envelope sent so far has been
    /// processed (subscriptions are in effect once this returns).
    pub fn barrier(&mut self, timeout: Duration) -> Result<(), BusError> {
        let topic = format!("/_barrier/{}/{}", self.stream.local_addr()?.port(), self.next_id);
        self.subscribe(&topic)?;
        self.publish_raw(&topic, "true")?;
        let got = self.recv_on(&topic, timeout)?;
        self.unsubscribe(&topic)?;
        got.map(drop).ok_or_else(|| BusError::Io(std::io::Error::new(std::io::ErrorKind::TimedOut, "hub did not answer")))
    }

    pub fn close(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        let _ = self.writer.flush();
        let _ = self.stream.shutdown(Shutdown::Both);
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
    }
}

impl Drop for BusClient {
    fn drop(&mut self) {
        self.shutdown();
    }
}
