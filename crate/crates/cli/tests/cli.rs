use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use groundsim::trainer::PolicyParams;

fn groundsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundsim")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn train_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r1");
    let o = groundsim(&[
        "train", "--env", "oval", "--task", "racing", "--steps", "2048", "--seed", "42", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let policy = PolicyParams::from_json(&read(&out.join("policy.json"))).unwrap();
    assert_eq!(policy.obs_dim(), 39);
    assert!(read(&out.join("returns.csv")).starts_with("episode,steps,return,moving_avg\n"));
    let cfg: serde_json::Value = serde_json::from_str(&read(&out.join("config.json"))).unwrap();
    assert_eq!(cfg["env"]["preset"], "oval");
    assert_eq!(cfg["env"]["task"], "racing");
    assert_eq!(cfg["ppo"]["seed"], 42);
    assert_eq!(cfg["ppo"]["total_steps"], 2048);
    // No temp files left behind.
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 3);
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let o = groundsim(&["train", "--env", "nosuch", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"), "{}", stderr(&o));
    let o = groundsim(&["scene", "gen", "--preset", "nosuch", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = groundsim(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_all_commands() {
    let o = groundsim(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["train", "rollout", "serve", "scene"] {
        assert!(text.contains(cmd), "{text}");
    }
}

fn zero_policy(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("zero.json");
    std::fs::write(&path, PolicyParams::zeros(39, &[8, 8]).to_json()).unwrap();
    path
}

#[test]
fn rollout_writes_trajectories_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let policy = zero_policy(dir.path());
    let out = dir.path().join("evals");
    let o = groundsim(&[
        "rollout", "--policy", policy.to_str().unwrap(), "--env", "outdoor20", "--episodes", "10", "--seed", "1",
        "--max-steps", "50", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..10 {
        let csv = read(&out.join(format!("episode_{k:03}.csv")));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("step,t,x,y,psi,v_joint,a_T,a_delta,T,delta,r_m,reward,terminated,truncated")
        );
        // Zero mean action means zero throttle: the vehicle never moves.
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        assert_eq!(rows.len(), 50);
        for r in &rows {
            assert_eq!(r[2], rows[0][2]);
            assert_eq!(r[3], rows[0][3]);
            assert_eq!(r[5], "0");
            assert_eq!(r[8], "0");
        }
        assert_eq!(rows[49][13], "true");
    }
    let summary = read(&out.join("summary.csv"));
    assert!(summary.starts_with("episode,seed,return,length,collided\n"));
    assert_eq!(summary.lines().count(), 11);
}

#[test]
fn rollout_across_presets_runs() {
    let dir = tempfile::tempdir().unwrap();
    let train_out = dir.path().join("t");
    let o = groundsim(&[
        "train", "--env", "oval", "--task", "racing", "--steps", "2048", "--out", train_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = groundsim(&[
        "rollout", "--policy", train_out.join("policy.json").to_str().unwrap(), "--env", "urban50", "--episodes",
        "2", "--max-steps", "200", "--out", dir.path().join("e").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn rollout_rejects_missing_and_corrupt_policies() {
    let dir = tempfile::tempdir().unwrap();
    let o = groundsim(&["rollout", "--policy", "/nonexistent/p.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\":1,").unwrap();
    let o = groundsim(&["rollout", "--policy", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("corrupt policy"), "{}", stderr(&o));
}

#[test]
fn scene_gen_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = groundsim(&["scene", "gen", "--preset", "outdoor20", "--seed", "42", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read(&a), read(&b));
    let o = groundsim(&["scene", "validate", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let dup = dir.path().join("dup.json");
    std::fs::write(
        &dup,
        r#"{"name":"d","bounds":{"xmin":-5,"xmax":5,"ymin":-5,"ymax":5},"obstacles":[
            {"id":1,"kind":"cylinder","x":0,"y":0,"radius":1},
            {"id":1,"kind":"cylinder","x":2,"y":2,"radius":1}]}"#,
    )
    .unwrap();
    let o = groundsim(&["scene", "validate", dup.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));
}

struct Served(std::process::Child, String);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Starts `serve` on an ephemeral port and returns the child plus the
/// banner line.
fn serve(extra: &[&str]) -> Served {
    let mut child = Command::new(env!("CARGO_BIN_EXE_groundsim"))
        .args(["serve", "--port", "0"])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    Served(child, line)
}

fn banner_addr(banner: &str) -> String {
    banner.split_whitespace().nth(5).unwrap().to_string()
}

#[test]
fn serve_prints_banner_and_honours_config() {
    let s = serve(&["--env", "urban50", "--task", "search"]);
    assert!(s.1.contains("listening on"), "{}", s.1);
    assert!(s.1.contains("urban50"));
    let client = groundsim_client::RemoteEnv::connect(banner_addr(&s.1)).unwrap();
    assert_eq!(client.spec().preset, "urban50");
    assert_eq!(client.spec().max_steps, 2000);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("custom.json");
    std::fs::write(&cfg, r#"{"preset":"oval","task":"racing","max_steps":5}"#).unwrap();
    let s = serve(&["--config", cfg.to_str().unwrap()]);
    let client = groundsim_client::RemoteEnv::connect(banner_addr(&s.1)).unwrap();
    assert_eq!(client.spec().preset, "oval");
    assert_eq!(client.spec().max_steps, 5);
}

#[test]
fn serve_bind_failure_exits_1() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = groundsim(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot bind"), "{}", stderr(&o));
}

#[test]
fn remote_rollout_matches_local_rollout() {
    let dir = tempfile::tempdir().unwrap();
    let train_out = dir.path().join("t");
    let o = groundsim(&[
        "train", "--env", "outdoor20", "--steps", "2048", "--seed", "3", "--out", train_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let policy = train_out.join("policy.json");
    let s = serve(&["--env", "outdoor20", "--seed", "3", "--max-steps", "300"]);
    let (local, remote) = (dir.path().join("local"), dir.path().join("remote"));
    let o = groundsim(&[
        "rollout", "--policy", policy.to_str().unwrap(), "--env", "outdoor20", "--seed", "3", "--episodes", "3",
        "--max-steps", "300", "--out", local.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = groundsim(&[
        "rollout", "--policy", policy.to_str().unwrap(), "--seed", "3", "--episodes", "3", "--remote",
        &banner_addr(&s.1), "--out", remote.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["episode_000.csv", "episode_001.csv", "episode_002.csv", "summary.csv"] {
        assert_eq!(read(&local.join(f)), read(&remote.join(f)), "{f}");
    }
}
