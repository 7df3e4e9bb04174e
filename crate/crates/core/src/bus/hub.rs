use super::schema::{is_well_known, validate};
use super::*;
use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;
use tokio::sync::Notify;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

type ClientId = u64;

/// Bounded per-subscriber queue of serialized envelopes; overflow drops the
/// oldest entry so a stalled reader never blocks publishers.
pub(crate) struct Outbox {
    queue: Mutex<VecDeque<Arc<str>>>,
    capacity: usize,
    notify: Notify,
    closed: AtomicBool,
    dropped: AtomicU64,
}

impl Outbox {
    fn new(capacity: usize) -> Self {
        Outbox {
            queue: Mutex::new(VecDeque::new()),
            capacity,
            notify: Notify::new(),
            closed: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        }
    }

    /// Returns true when an older entry was evicted.
    fn push(&self, line: Arc<str>) -> bool {
        let evicted = {
            let mut q = self.queue.lock().unwrap_or_else(|e| e.into_inner());
            let evicted = if q.len() >= self.capacity { q.pop_front().is_some() } else { false };
            q.push_back(line);
            evicted
        };
        if evicted {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        self.notify.notify_one();
        evicted
    }

    fn pop(&self) -> Option<Arc<str>> {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).pop_front()
    }

    fn close(&self) {
        self.closed.store(true, Ordering::Release);
        self.notify.notify_one();
    }

    /// Next queued line; `None` once closed and drained.
    pub(crate) async fn recv(&self) -> Option<Arc<str>> {
        loop {
            if let Some(line) = self.pop() {
                return Some(line);
            }
            if self.closed.load(Ordering::Acquire) {
                return None;
            }
            self.notify.notified().await;
        }
    }
}

#[derive(Default)]
struct State {
    subscriptions: HashMap<String, HashMap<ClientId, Arc<Outbox>>>,
    clients: HashMap<ClientId, Arc<Outbox>>,
    advertised: HashMap<ClientId, HashSet<String>>,
    latched: HashMap<String, Arc<str>>,
}

struct Inner {
    state: Mutex<State>,
    capacity: usize,
    next_client: AtomicU64,
    dropped: AtomicU64,
    published: AtomicU64,
    epoch: Instant,
}

/// The routing core, independent of any transport. Cloning shares state.
#[derive(Clone)]
pub struct Hub {
    inner: Arc<Inner>,
}

impl Default for Hub {
    fn default() -> Self {
        Hub::new(DEFAULT_QUEUE_CAPACITY)
    }
}

impl Hub {
    pub fn new(queue_capacity: usize) -> Self {
        Hub {
            inner: Arc::new(Inner {
                state: Mutex::new(State::default()),
                capacity: queue_capacity.max(1),
                next_client: AtomicU64::new(1),
                dropped: AtomicU64::new(0),
                published: AtomicU64::new(0),
                epoch: Instant::now(),
            }),
        }
    }

    fn state(&self) -> std::sync::MutexGuard<'_, State> {
        self.inner.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Seconds since the hub was created; stamps hub-originated messages.
    pub fn clock(&self) -> f64 {
        self.inner.epoch.elapsed().as_secs_f64()
    }

    pub fn is_latched(topic: &str) -> bool {
        topic == ROBOT_DESCRIPTION
    }

    pub fn connect(&self) -> Connection {
        let id = self.inner.next_client.fetch_add(1, Ordering::Relaxed);
        let outbox = Arc::new(Outbox::new(self.inner.capacity));
        self.state().clients.insert(id, outbox.clone());
        Connection {
            hub: self.clone(),
            id,
            outbox,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn client_count(&self) -> usize {
        self.state().clients.len()
    }

    pub fn subscriber_count(&self, topic: &str) -> usize {
        self.state().subscriptions.get(topic).map_or(0, HashMap::len)
    }

    /// Total entries evicted from subscriber queues so far.
    pub fn dropped(&self) -> u64 {
        self.inner.dropped.load(Ordering::Relaxed)
    }

    pub fn diagnostics(&self) -> serde_json::Value {
        let state = self.state();
        serde_json::json!({
            "clients": state.clients.len(),
            "topics": state.subscriptions.values().filter(|s| !s.is_empty()).count(),
            "published": self.inner.published.load(Ordering::Relaxed),
            "dropped": self.dropped(),
            "queue_capacity": self.inner.capacity,
        })
    }

    fn route(&self, envelope: &Envelope) {
        let line: Arc<str> = envelope.to_line().into();
        let mut state = self.state();
        if Hub::is_latched(&envelope.topic) {
            state.latched.insert(envelope.topic.clone(), line.clone());
        }
        self.inner.published.fetch_add(1, Ordering::Relaxed);
        if let Some(subs) = state.subscriptions.get(&envelope.topic) {
            for outbox in subs.values() {
                if outbox.push(line.clone()) {
                    self.inner.dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }

    fn disconnect(&self, id: ClientId) {
        let mut state = self.state();
        if let Some(outbox) = state.clients.remove(&id) {
            outbox.close();
        }
        state.advertised.remove(&id);
        for subs in state.subscriptions.values_mut() {
            subs.remove(&id);
        }
        state.subscriptions.retain(|_, subs| !subs.is_empty());
    }
}

/// One attached client, network or in-process. Dropping it detaches.
pub struct Connection {
    hub: Hub,
    id: ClientId,
    outbox: Arc<Outbox>,
    next_id: AtomicU64,
}

impl Connection {
    pub fn hub(&self) -> &Hub {
        &self.hub
    }

    fn reply_error(&self, topic: &str, id: &str, err: &BusError) {
        let kind = match err {
            BusError::SchemaViolation { .. } => "schema_violation",
            _ => "invalid_envelope",
        };
        self.outbox.push(Envelope::error(topic, id, kind, err.to_string()).to_line().into());
    }

    /// Process one inbound envelope as received from the wire. Protocol
    /// errors are answered on this connection with an error envelope.
    pub fn handle_text(&self, text: &str) {
        match Envelope::parse(text) {
            Ok(env) => {
                if let Err(e) = self.handle(env) {
                    log::debug!("client {}: {e}", self.id);
                }
            }
            Err(e) => {
                // Echo back whatever addressing the client managed to send.
                let v: serde_json::Value = serde_json::from_str(text).unwrap_or_default();
                let topic = v.get("topic").and_then(|t| t.as_str()).unwrap_or("");
                let id = v.get("id").and_then(|t| t.as_str()).unwrap_or("");
                self.reply_error(topic, id, &e);
            }
        }
    }

    pub fn handle(&self, env: Envelope) -> Result<(), BusError> {
        env.check()?;
        match env.op {
            Op::Subscribe => {
                let mut state = self.hub.state();
                state
                    .subscriptions
                    .entry(env.topic.clone())
                    .or_default()
                    .insert(self.id, self.outbox.clone());
                if let Some(line) = state.latched.get(&env.topic) {
                    self.outbox.push(line.clone());
                }
            }
            Op::Unsubscribe => {
                let mut state = self.hub.state();
                if let Some(subs) = state.subscriptions.get_mut(&env.topic) {
                    subs.remove(&self.id);
                }
            }
            Op::Advertise => {
                self.hub.state().advertised.entry(self.id).or_default().insert(env.topic.clone());
            }
            Op::Publish => {
                if is_well_known(&env.topic) {
                    if let Err(e) = validate(&env.topic, env.payload().unwrap_or("")) {
                        self.reply_error(&env.topic, &env.id, &e);
                        return Err(e);
                    }
                }
                self.hub.route(&env);
            }
            Op::Error => unreachable!("rejected by check"),
        }
        Ok(())
    }

    fn fresh_id(&self) -> String {
        self.next_id.fetch_add(1, Ordering::Relaxed).to_string()
    }

    pub fn subscribe(&self, topic: &str) -> Result<(), BusError> {
        self.handle(Envelope::new(Op::Subscribe, topic, self.fresh_id()))
    }

    pub fn unsubscribe(&self, topic: &str) -> Result<(), BusError> {
        self.handle(Envelope::new(Op::Unsubscribe, topic, self.fresh_id()))
    }

    /// Publish already-serialized JSON. Well-known topics are validated.
    pub fn publish_raw(&self, topic: &str, json: &str) -> Result<(), BusError> {
        let msg = RawValue::from_string(json.to_owned()).map_err(|e| BusError::InvalidEnvelope(e.to_string()))?;
        self.handle(Envelope::publish(topic, self.fresh_id(), msg))
    }

    pub fn publish<T: Serialize>(&self, topic: &str, msg: &T) -> Result<(), BusError> {
        let json = serde_json::to_string(msg).map_err(|e| BusError::InvalidEnvelope(e.to_string()))?;
        self.publish_raw(topic, &json)
    }

    /// Next outbound line for this client.
    pub async fn recv_line(&self) -> Option<Arc<str>> {
        self.outbox.recv().await
    }

    /// Next outbound envelope, parsed.
    pub async fn recv(&self) -> Option<Envelope> {
        loop {
            let line = self.recv_line().await?;
            match serde_json::from_str(&line) {
                Ok(env) => return Some(env),
                Err(e) => log::warn!("unparseable outbound envelope: {e}"),
            }
        }
    }

    /// Lines queued for this client and not yet taken.
    pub fn pending(&self) -> usize {
        self.outbox.queue.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    #[cfg(test)]
    pub(crate) fn try_recv_line(&self) -> Option<Arc<str>> {
        self.outbox.pop()
    }

    /// Entries this connection lost to queue overflow.
    pub fn dropped(&self) -> u64 {
        self.outbox.dropped.load(Ordering::Relaxed)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.hub.disconnect(self.id);
    }
}
