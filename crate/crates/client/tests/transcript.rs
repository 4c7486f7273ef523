use std::net::SocketAddr;

use groundsim::env::{Env, EnvConfig, Preset, Task};
use groundsim::Action;
use groundsim_client::{ClientError, RemoteEnv};
use groundsim_server::{Server, ServerConfig};

fn spawn_server(cfg: EnvConfig) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let server = Server::bind(ServerConfig::new(cfg), "127.0.0.1:0").await.unwrap();
            tx.send(server.local_addr().unwrap()).unwrap();
            server.run().await.unwrap();
        });
    });
    rx.recv().unwrap()
}

/// Deterministic scripted controls: a slow weave with occasional braking.
fn scripted(k: usize) -> [f64; 2] {
    let t = k as f64;
    [0.6 + 0.4 * (t * 0.013).sin(), 0.5 * (t * 0.021).cos()]
}

#[test]
fn remote_transcript_matches_in_process_engine() {
    let cfg = EnvConfig::new(Preset::Outdoor20, Task::Search);
    let addr = spawn_server(cfg.clone());
    let mut remote = RemoteEnv::connect(addr).unwrap();
    assert_eq!(remote.spec().obs_dim, cfg.obs_dim());
    let mut local = Env::new(cfg).unwrap();
    for seed in 0..5 {
        let r0 = remote.reset(Some(seed)).unwrap();
        assert_eq!(r0, local.reset(Some(seed)).unwrap().to_vec());
        let mut steps = 0;
        while steps < 1000 {
            let a = scripted(steps);
            let got = remote.step(a).unwrap();
            let want = local.step(Action::new(a[0], a[1]).unwrap()).unwrap();
            assert_eq!(got.obs, want.observation.to_vec());
            assert_eq!(got.reward.to_bits(), want.reward.to_bits());
            assert_eq!(got.terminated, want.terminated);
            assert_eq!(got.truncated, want.truncated);
            assert_eq!(got.info, want.info);
            steps += 1;
            if got.terminated || got.truncated {
                remote.reset(None).unwrap();
                local.reset(None).unwrap();
            }
        }
    }
    remote.close().unwrap();
}

#[test]
fn client_refuses_step_before_reset_and_after_end() {
    let cfg = EnvConfig {
        max_steps: 1,
        ..EnvConfig::new(Preset::Oval, Task::Racing)
    };
    let mut remote = RemoteEnv::connect(spawn_server(cfg)).unwrap();
    assert!(matches!(remote.step([0.0, 0.0]), Err(ClientError::NotReset)));
    remote.reset(Some(1)).unwrap();
    assert!(remote.step([0.0, 0.0]).unwrap().truncated);
    assert!(matches!(remote.step([0.0, 0.0]), Err(ClientError::EpisodeOver)));
}

#[test]
fn server_errors_surface_as_client_errors() {
    let mut remote = RemoteEnv::connect(spawn_server(EnvConfig::default())).unwrap();
    let body = remote.raw(br#"{"cmd":"warp"}"#).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert!(v["error"].is_string());
    // The connection survives the bad request.
    assert_eq!(remote.reset(Some(0)).unwrap().len(), remote.spec().obs_dim);
}
