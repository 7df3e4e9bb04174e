use super::hub::Connection;
use super::*;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, BufWriter};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinHandle;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub host: IpAddr,
    /// Newline-delimited JSON over TCP; 0 picks a free port.
    pub port: u16,
    /// Websocket (and static files) over HTTP; `None` disables it.
    pub ws_port: Option<u16>,
    pub static_dir: Option<PathBuf>,
    pub queue_capacity: usize,
    /// Period of /diagnostics reports while anyone listens.
    pub diagnostics_period: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 9870,
            ws_port: Some(9871),
            static_dir: None,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            diagnostics_period: Duration::from_secs(1),
        }
    }
}

async fn bind(host: IpAddr, port: u16) -> Result<TcpListener, BusError> {
    TcpListener::bind((host, port)).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => BusError::PortInUse { port },
        _ => BusError::Io(e),
    })
}

/// A hub with its listeners. Dropping it stops accepting and closes every
/// connection.
pub struct RunningHub {
    hub: Hub,
    tcp_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningHub {
    pub fn hub(&self) -> &Hub {
        &self.hub
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    /// Resolve once shutdown has been requested from elsewhere (or never).
    pub async fn stopped(&self) {
        let mut rx = self.shutdown.subscribe();
        let _ = rx.wait_for(|stop| *stop).await;
    }
}

impl Drop for RunningHub {
    fn drop(&mut self) {
        let _ = self.shutdown.send(true);
        for t in &self.tasks {
            t.abort();
        }
    }
}

/// Bind both listeners and start serving. Binding happens before this
/// returns, so a port conflict surfaces as `PortInUse` immediately.
pub async fn serve(config: ServeConfig) -> Result<RunningHub, BusError> {
    let hub = Hub::new(config.queue_capacity);
    let tcp = bind(config.host, config.port).await?;
    let ws = match config.ws_port {
        Some(p) => Some(bind(config.host, p).await?),
        None => None,
    };
    let (shutdown, stop_rx) = watch::channel(false);
    let mut tasks = Vec::new();
    let tcp_addr = tcp.local_addr()?;
    tasks.push(tokio::spawn(accept_tcp(tcp, hub.clone(), stop_rx.clone())));
    let ws_addr = match ws {
        Some(listener) => {
            let addr = listener.local_addr()?;
            let app = ws_router(hub.clone(), stop_rx.clone(), config.static_dir.clone());
            let mut stop = stop_rx.clone();
            tasks.push(tokio::spawn(async move {
                let graceful = async move {
                    let _ = stop.wait_for(|s| *s).await;
                };
                if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(graceful).await {
                    log::error!("websocket listener: {e}");
                }
            }));
            Some(addr)
        }
        None => None,
    };
    tasks.push(tokio::spawn(report_diagnostics(hub.clone(), config.diagnostics_period)));
    log::info!("bus listening on tcp {tcp_addr}{}", ws_addr.map(|a| format!(", ws {a}")).unwrap_or_default());
    Ok(RunningHub {
        hub,
        tcp_addr,
        ws_addr,
        shutdown,
        tasks,
    })
}

async fn report_diagnostics(hub: Hub, period: Duration) {
    let conn = hub.connect();
    let mut ticker = tokio::time::interval(period.max(Duration::from_millis(10)));
    loop {
        ticker.tick().await;
        if hub.subscriber_count(DIAGNOSTICS) > 0 {
            let _ = conn.publish(DIAGNOSTICS, &hub.diagnostics());
        }
    }
}

async fn accept_tcp(listener: TcpListener, hub: Hub, stop: watch::Receiver<bool>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                log::debug!("tcp client {peer} connected");
                let _ = stream.set_nodelay(true);
                tokio::spawn(tcp_client(stream, hub.clone(), stop.clone()));
            }
            Err(e) => {
                log::warn!("accept: {e}");
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
        }
    }
}

/// Drain the connection's queue into `write`, flushing whenever it runs dry.
async fn pump_tcp(conn: &Connection, wr: tokio::net::tcp::OwnedWriteHalf) -> std::io::Result<()> {
    let mut w = BufWriter::new(wr);
    while let Some(line) = conn.recv_line().await {
        w.write_all(line.as_bytes()).await?;
        w.write_all(b"\n").await?;
        if conn.pending() == 0 {
            w.flush().await?;
        }
    }
    w.flush().await
}

async fn tcp_client(stream: TcpStream, hub: Hub, mut stop: watch::Receiver<bool>) {
    let conn = Arc::new(hub.connect());
    let (rd, wr) = stream.into_split();
    let reader = {
        let conn = conn.clone();
        async move {
            let mut lines = BufReader::new(rd).lines();
            while let Ok(Some(line)) = lines.next_line().await {
                let line = line.trim_end_matches('\r');
                if !line.trim().is_empty() {
                    conn.handle_text(line);
                }
            }
        }
    };
    tokio::select! {
        _ = reader => {}
        r = pump_tcp(&conn, wr) => if let Err(e) = r { log::debug!("tcp write: {e}") },
        _ = stop.wait_for(|s| *s) => {}
    }
}

#[derive(Clone)]
struct WsState {
    hub: Hub,
    stop: watch::Receiver<bool>,
}

fn ws_router(hub: Hub, stop: watch::Receiver<bool>, static_dir: Option<PathBuf>) -> Router {
    let router = Router::new().route("/ws", get(ws_upgrade)).with_state(WsState { hub, stop });
    match static_dir {
        Some(dir) => router.fallback_service(tower_http::services::ServeDir::new(dir).append_index_html_on_directories(true)),
        None => router,
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<WsState>) -> Response {
    ws.on_upgrade(move |socket| ws_client(socket, state))
}

async fn ws_client(socket: WebSocket, mut state: WsState) {
    let conn = Arc::new(state.hub.connect());
    let (mut tx, mut rx) = socket.split();
    let reader = {
        let conn = conn.clone();
        async move {
            while let Some(Ok(msg)) = rx.next().await {
                match msg {
                    Message::Text(text) => conn.handle_text(text.as_str()),
                    Message::Binary(bytes) => match std::str::from_utf8(&bytes) {
                        Ok(text) => conn.handle_text(text),
                        Err(_) => conn.handle_text(""),
                    },
                    Message::Close(_) => break,
                    _ => {}
                }
            }
        }
    };
    let writer = async {
        while let Some(line) = conn.recv_line().await {
            if tx.send(Message::Text(line.as_ref().into())).await.is_err() {
                break;
            }
        }
    };
    tokio::select! {
        _ = reader => {}
        _ = writer => {}
        _ = state.stop.wait_for(|s| *s) => {}
    }
}

/// A hub running on its own runtime, for synchronous callers (CLI helpers,
/// tests, the C interface).
pub struct BackgroundHub {
    running: Option<RunningHub>,
    runtime: tokio::runtime::Runtime,
}

impl BackgroundHub {
    pub fn start(config: ServeConfig) -> Result<Self, BusError> {
        Self::start_with(config, |_| {})
    }

    /// Start, then run `setup` inside the runtime (e.g. to spawn services).
    pub fn start_with(config: ServeConfig, setup: impl FnOnce(&Hub)) -> Result<Self, BusError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .thread_name("bus")
            .enable_all()
            .build()?;
        let running = runtime.block_on(serve(config))?;
        {
            let _guard = runtime.enter();
            setup(running.hub());
        }
        Ok(BackgroundHub {
            running: Some(running),
            runtime,
        })
    }

    fn running(&self) -> &RunningHub {
        self.running.as_ref().expect("present until drop")
    }

    pub fn hub(&self) -> &Hub {
        self.running().hub()
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.running().tcp_addr()
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.running().ws_addr()
    }

    pub fn runtime(&self) -> &tokio::runtime::Runtime {
        &self.runtime
    }
}

impl Drop for BackgroundHub {
    fn drop(&mut self) {
        let _guard = self.runtime.enter();
        self.running.take();
    }
}
