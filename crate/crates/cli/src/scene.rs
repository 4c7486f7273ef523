use std::path::PathBuf;

use anyhow::Context;
use clap::Subcommand;
use groundsim::env::{build_preset, Preset};
use groundsim::scene::parse_scene;

use crate::output::write_string;

#[derive(Subcommand)]
pub enum SceneCommand {
    /// Parse and validate a scene file.
    Validate { file: PathBuf },
    /// Write a procedural preset scene to a file.
    Gen {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(c: SceneCommand) -> anyhow::Result<()> {
    match c {
        SceneCommand::Validate { file } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("cannot read {}", file.display()))?;
            let scene = parse_scene(&text).with_context(|| format!("{} is invalid", file.display()))?;
            println!(
                "ok: scene '{}' with {} obstacles",
                scene.name(),
                scene.user_obstacles().len()
            );
        }
        SceneCommand::Gen { preset, seed, out } => {
            let (scene, _) = build_preset(preset, seed);
            write_string(&out, &scene.to_document())?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
