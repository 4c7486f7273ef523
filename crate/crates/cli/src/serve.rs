use std::io::Write;
use std::time::Duration;

use clap::Args;
use groundsim_server::{Server, ServerConfig, DEFAULT_PORT};

use crate::EnvArgs;

#[derive(Args)]
pub struct ServeArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Scene seed for procedural presets.
    #[arg(long)]
    seed: Option<u64>,
    /// Close connections idle for this many seconds.
    #[arg(long, value_name = "SECONDS")]
    idle_timeout: Option<f64>,
}

pub fn run(a: ServeArgs) -> anyhow::Result<()> {
    let mut cfg = a.env.resolve()?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let idle_timeout = a
        .idle_timeout
        .map(|s| Duration::try_from_secs_f64(s).map_err(|_| anyhow::anyhow!("invalid --idle-timeout {s}")))
        .transpose()?;
    let (preset, task) = (cfg.preset, cfg.task);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let server = Server::bind(
            ServerConfig {
                env: cfg,
                idle_timeout,
            },
            &format!("{}:{}", a.bind, a.port),
        )
        .await?;
        println!(
            "groundsim env server listening on {} (preset {preset}, task {})",
            server.local_addr()?,
            task.name()
        );
        std::io::stdout().flush()?;
        server.run().await?;
        Ok(())
    })
}
