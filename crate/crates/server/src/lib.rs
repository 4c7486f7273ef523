//! TCP service exposing one [`Env`] per connection over the framed JSON
//! protocol in [`groundsim::wire`].

use std::io;
use std::net::SocketAddr;
use std::time::Duration;

use groundsim::env::{Env, EnvConfig, EnvError};
use groundsim::vehicle::Action;
use groundsim::wire::{
    error_body, to_body, CloseReply, Request, ResetReply, SpecReply, StepReply, MAX_FRAME_LEN,
};
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

pub use groundsim::wire::DEFAULT_PORT;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub env: EnvConfig,
    /// Drop a connection after this long without a complete request.
    pub idle_timeout: Option<Duration>,
}

impl ServerConfig {
    pub fn new(env: EnvConfig) -> Self {
        Self { env, idle_timeout: None }
    }
}

pub struct Server {
    listener: TcpListener,
    /// Built once; each connection gets its own clone.
    template: Env,
    idle_timeout: Option<Duration>,
}

impl Server {
    pub async fn bind(cfg: ServerConfig, addr: &str) -> Result<Self, ServerError> {
        let template = Env::new(cfg.env)?;
        let listener = TcpListener::bind(addr).await.map_err(|source| ServerError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(Self {
            listener,
            template,
            idle_timeout: cfg.idle_timeout,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the task is dropped.
    pub async fn run(self) -> Result<(), ServerError> {
        loop {
            let (stream, peer) = self.listener.accept().await?;
            let env = self.template.clone();
            let idle = self.idle_timeout;
            tokio::spawn(async move {
                tracing::debug!(%peer, "connection opened");
                match handle(stream, env, idle).await {
                    Ok(()) => tracing::debug!(%peer, "connection closed"),
                    Err(e) => tracing::debug!(%peer, error = %e, "connection dropped"),
                }
            });
        }
    }
}

pub async fn serve(cfg: ServerConfig, addr: &str) -> Result<(), ServerError> {
    Server::bind(cfg, addr).await?.run().await
}

enum Frame {
    Body(Vec<u8>),
    Oversized(u32),
    Eof,
}

async fn read_frame<R: AsyncReadExt + Unpin>(r: &mut R) -> io::Result<Frame> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len).await {
        Ok(_) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(Frame::Eof),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_LEN {
        // Drain the body so the stream stays in sync for the next request.
        let copied = tokio::io::copy(&mut r.take(u64::from(len)), &mut tokio::io::sink()).await?;
        if copied < u64::from(len) {
            return Ok(Frame::Eof);
        }
        return Ok(Frame::Oversized(len));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).await?;
    Ok(Frame::Body(body))
}

async fn write_frame<W: AsyncWriteExt + Unpin>(w: &mut W, body: &[u8]) -> io::Result<()> {
    w.write_all(&(body.len() as u32).to_be_bytes()).await?;
    w.write_all(body).await?;
    w.flush().await
}

async fn handle(stream: TcpStream, mut env: Env, idle: Option<Duration>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let (read, mut write) = stream.into_split();
    let mut read = BufReader::new(read);
    loop {
        let frame = match idle {
            Some(d) => match tokio::time::timeout(d, read_frame(&mut read)).await {
                Ok(f) => f?,
                Err(_) => {
                    tracing::debug!("idle timeout");
                    return Ok(());
                }
            },
            None => read_frame(&mut read).await?,
        };
        let body = match frame {
            Frame::Eof => return Ok(()),
            Frame::Oversized(n) => {
                let msg = format!("frame of {n} bytes exceeds the {MAX_FRAME_LEN}-byte limit");
                write_frame(&mut write, &error_body(msg)).await?;
                continue;
            }
            Frame::Body(b) => b,
        };
        let (reply, close) = respond(&mut env, &body);
        write_frame(&mut write, &reply).await?;
        if close {
            return Ok(());
        }
    }
}

/// Computes the response body for one request frame, and whether the
/// connection should close afterwards.
pub fn respond(env: &mut Env, body: &[u8]) -> (Vec<u8>, bool) {
    let req = match Request::parse(body) {
        Ok(r) => r,
        Err(msg) => return (error_body(msg), false),
    };
    let reply = match req {
        Request::Spec => to_body(&SpecReply::from(env.config())),
        Request::Reset { seed } => match env.reset(seed) {
            Ok(obs) => to_body(&ResetReply::from(&obs)),
            Err(e) => error_body(e.to_string()),
        },
        Request::Step { action } => match Action::new(action[0], action[1]) {
            Ok(a) => match env.step(a) {
                Ok(r) => to_body(&StepReply::from(&r)),
                Err(e) => error_body(e.to_string()),
            },
            Err(e) => error_body(e.to_string()),
        },
        Request::Close => return (to_body(&CloseReply { ok: true }), true),
    };
    (reply, false)
}
