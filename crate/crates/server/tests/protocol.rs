use std::time::Duration;

use groundsim::env::{Env, EnvConfig, Preset, Task};
use groundsim::Action;
use groundsim_server::{respond, Server, ServerConfig};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

async fn start(cfg: ServerConfig) -> std::net::SocketAddr {
    let server = Server::bind(cfg, "127.0.0.1:0").await.unwrap();
    let addr = server.local_addr().unwrap();
    tokio::spawn(server.run());
    addr
}

async fn send_raw(s: &mut TcpStream, body: &[u8]) -> Value {
    s.write_all(&(body.len() as u32).to_be_bytes()).await.unwrap();
    s.write_all(body).await.unwrap();
    let mut len = [0u8; 4];
    s.read_exact(&mut len).await.unwrap();
    let mut buf = vec![0u8; u32::from_be_bytes(len) as usize];
    s.read_exact(&mut buf).await.unwrap();
    serde_json::from_slice(&buf).unwrap()
}

async fn send(s: &mut TcpStream, v: Value) -> Value {
    send_raw(s, &serde_json::to_vec(&v).unwrap()).await
}

fn cfg() -> EnvConfig {
    EnvConfig::new(Preset::Urban20, Task::Search)
}

#[tokio::test]
async fn spec_reset_step_round_trip() {
    let addr = start(ServerConfig::new(cfg())).await;
    let mut s = TcpStream::connect(addr).await.unwrap();

    let spec = send(&mut s, json!({"cmd": "spec"})).await;
    assert_eq!(spec["obs_dim"], 39);
    assert_eq!(spec["act_dim"], 2);
    assert_eq!(spec["preset"], "urban20");
    assert_eq!(spec["max_steps"], 2000);

    let r1 = send(&mut s, json!({"cmd": "reset", "seed": 7})).await;
    assert_eq!(r1["t"], 0);
    let r2 = send(&mut s, json!({"cmd": "reset", "seed": 7})).await;
    assert_eq!(r1, r2);

    let step = send(&mut s, json!({"cmd": "step", "action": [0.5, -0.2]})).await;
    let mut local = Env::new(cfg()).unwrap();
    local.reset(Some(7)).unwrap();
    let want = local.step(Action::new(0.5, -0.2).unwrap()).unwrap();
    assert_eq!(step["reward"].as_f64().unwrap().to_bits(), want.reward.to_bits());
    assert_eq!(step["terminated"], false);
    assert_eq!(step["truncated"], false);
    assert_eq!(step["info"]["r_m"].as_f64().unwrap().to_bits(), want.info.r_m.to_bits());
    let obs: Vec<f64> = serde_json::from_value(step["obs"].clone()).unwrap();
    assert_eq!(obs, want.observation.to_vec());

    assert_eq!(send(&mut s, json!({"cmd": "close"})).await, json!({"ok": true}));
    let mut probe = [0u8; 1];
    assert_eq!(s.read(&mut probe).await.unwrap(), 0);
}

#[tokio::test]
async fn malformed_frames_get_errors_without_closing() {
    let addr = start(ServerConfig::new(cfg())).await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    for bad in [&b"{oops"[..], br#"{"nocmd":1}"#, br#"{"cmd":"fly"}"#, br#"{"cmd":"step","action":[1]}"#, b"\xff"] {
        let r = send_raw(&mut s, bad).await;
        assert!(r["error"].is_string(), "{r}");
    }
    // Still usable afterwards.
    let r = send(&mut s, json!({"cmd": "spec"})).await;
    assert_eq!(r["act_dim"], 2);
}

#[tokio::test]
async fn oversized_frame_is_rejected_and_stream_stays_in_sync() {
    let addr = start(ServerConfig::new(cfg())).await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    let big = vec![b' '; groundsim::wire::MAX_FRAME_LEN as usize + 1];
    let r = send_raw(&mut s, &big).await;
    assert!(r["error"].as_str().unwrap().contains("exceeds"));
    assert_eq!(send(&mut s, json!({"cmd": "spec"})).await["act_dim"], 2);
}

#[tokio::test]
async fn step_errors_before_reset_and_after_episode_end() {
    let env = EnvConfig {
        max_steps: 2,
        ..cfg()
    };
    let addr = start(ServerConfig::new(env)).await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    let step = json!({"cmd": "step", "action": [0.0, 0.0]});
    assert!(send(&mut s, step.clone()).await["error"].is_string());
    send(&mut s, json!({"cmd": "reset", "seed": 1})).await;
    assert_eq!(send(&mut s, step.clone()).await["truncated"], false);
    assert_eq!(send(&mut s, step.clone()).await["truncated"], true);
    let err = send(&mut s, step).await;
    assert!(err["error"].as_str().unwrap().contains("episode is over"));
}

#[tokio::test]
async fn connections_have_independent_envs() {
    let addr = start(ServerConfig::new(cfg())).await;
    let mut a = TcpStream::connect(addr).await.unwrap();
    let mut b = TcpStream::connect(addr).await.unwrap();
    send(&mut a, json!({"cmd": "reset", "seed": 3})).await;
    let step = json!({"cmd": "step", "action": [1.0, 0.0]});
    let a1 = send(&mut a, step.clone()).await;
    // b was never reset, so its step fails even though a's env is live.
    assert!(send(&mut b, step.clone()).await["error"].is_string());
    send(&mut b, json!({"cmd": "reset", "seed": 3})).await;
    let b1 = send(&mut b, step).await;
    assert_eq!(a1, b1);
}

#[tokio::test]
async fn idle_connections_are_dropped() {
    let addr = start(ServerConfig {
        env: cfg(),
        idle_timeout: Some(Duration::from_millis(100)),
    })
    .await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    tokio::time::sleep(Duration::from_millis(300)).await;
    let mut probe = [0u8; 1];
    assert_eq!(s.read(&mut probe).await.unwrap(), 0);
}

#[tokio::test]
async fn bind_failure_is_reported() {
    let first = Server::bind(ServerConfig::new(cfg()), "127.0.0.1:0").await.unwrap();
    let taken = first.local_addr().unwrap().to_string();
    let err = Server::bind(ServerConfig::new(cfg()), &taken).await.err().unwrap();
    assert!(err.to_string().contains("cannot bind"));
}

#[test]
fn respond_is_usable_without_a_socket() {
    let mut env = Env::new(cfg()).unwrap();
    let (body, close) = respond(&mut env, br#"{"cmd":"reset","seed":2}"#);
    assert!(!close);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["obs"].as_array().unwrap().len(), 39);
    let (_, close) = respond(&mut env, br#"{"cmd":"close"}"#);
    assert!(close);
}
