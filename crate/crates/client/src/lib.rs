//! Blocking client for the environment server: `reset`/`step` with the
//! usual (obs, reward, terminated, truncated, info) step result.

use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use groundsim::wire::{
    decode_reply, read_frame, to_body, write_frame, CloseReply, Request, ResetReply, SpecReply, StepReply,
};
use serde::de::DeserializeOwned;
use thiserror::Error;

pub use groundsim::env::StepInfo;
pub use groundsim::wire::{SpecReply as Spec, StepReply as Step};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed reply: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("server error: {0}")]
    Server(String),
    #[error("server closed the connection")]
    Closed,
    #[error("reset must be called before step")]
    NotReset,
    #[error("episode is over; call reset before stepping again")]
    EpisodeOver,
}

fn call<T: DeserializeOwned>(
    reader: &mut BufReader<TcpStream>,
    writer: &mut BufWriter<TcpStream>,
    req: &Request,
) -> Result<T, ClientError> {
    write_frame(writer, &to_body(req))?;
    let body = read_frame(reader)?.ok_or(ClientError::Closed)?;
    decode_reply(&body)?.map_err(ClientError::Server)
}

pub struct RemoteEnv {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    spec: SpecReply,
    /// `None` before the first reset, then whether the episode has ended.
    done: Option<bool>,
}

impl RemoteEnv {
    /// Connects and fetches the environment spec.
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ClientError> {
        Self::connect_with_timeout(addr, None)
    }

    pub fn connect_with_timeout<A: ToSocketAddrs>(addr: A, timeout: Option<Duration>) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(timeout)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        let spec = call(&mut reader, &mut writer, &Request::Spec)?;
        Ok(Self {
            reader,
            writer,
            spec,
            done: None,
        })
    }

    pub fn spec(&self) -> &SpecReply {
        &self.spec
    }

    fn call<T: DeserializeOwned>(&mut self, req: &Request) -> Result<T, ClientError> {
        call(&mut self.reader, &mut self.writer, req)
    }

    pub fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, ClientError> {
        let r: ResetReply = self.call(&Request::Reset { seed })?;
        self.done = Some(false);
        Ok(r.obs)
    }

    pub fn step(&mut self, action: [f64; 2]) -> Result<StepReply, ClientError> {
        match self.done {
            None => return Err(ClientError::NotReset),
            Some(true) => return Err(ClientError::EpisodeOver),
            Some(false) => {}
        }
        let r: StepReply = self.call(&Request::Step { action })?;
        self.done = Some(r.terminated || r.truncated);
        Ok(r)
    }

    /// Sends an arbitrary request body and returns the raw reply body.
    pub fn raw(&mut self, body: &[u8]) -> Result<Vec<u8>, ClientError> {
        write_frame(&mut self.writer, body)?;
        read_frame(&mut self.reader)?.ok_or(ClientError::Closed)
    }

    pub fn close(mut self) -> Result<(), ClientError> {
        let _: CloseReply = self.call(&Request::Close)?;
        Ok(())
    }
}
