//! `serve` and the `session` client subcommands.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Subcommand;
use layoutforge_client::Client;
use layoutforge_core::eval::ValidationThresholds;
use layoutforge_core::gateway::{Gateway, GenerationParams};
use layoutforge_service::ServiceConfig;
use serde::Serialize;

use crate::offline::{read_layout, read_task};

#[derive(Subcommand)]
pub enum SessionAction {
    /// Open a session for a task; prints the session id.
    Create {
        #[arg(long)]
        task: PathBuf,
    },
    Generate {
        #[arg(long)]
        id: String,
    },
    Edit {
        #[arg(long)]
        id: String,
        #[arg(long)]
        instruction: String,
    },
    Layout {
        #[arg(long)]
        id: String,
    },
    History {
        #[arg(long)]
        id: String,
    },
    Render {
        #[arg(long)]
        id: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Validate a layout file on the service.
    Validate {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        task: Option<PathBuf>,
    },
}

pub async fn serve(
    host: &str,
    port: u16,
    persist: Option<PathBuf>,
    cors_origin: Option<String>,
    gateway: Gateway,
    params: GenerationParams,
    thresholds: ValidationThresholds,
) -> anyhow::Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .with_context(|| format!("binding {host}:{port}"))?;
    println!("listening on http://{}", listener.local_addr()?);
    let config = ServiceConfig {
        gateway,
        params,
        thresholds,
        persist,
        cors_origin,
    };
    layoutforge_service::serve(listener, config).await?;
    Ok(ExitCode::SUCCESS)
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

pub async fn session(url: &str, action: SessionAction) -> anyhow::Result<ExitCode> {
    let c = Client::new(url);
    match action {
        SessionAction::Create { task } => println!("{}", c.create_session(&read_task(&task)?).await?),
        SessionAction::Generate { id } => print_json(&c.generate(&id).await?),
        SessionAction::Edit { id, instruction } => print_json(&c.edit(&id, &instruction).await?),
        SessionAction::Layout { id } => print_json(&c.layout(&id).await?),
        SessionAction::History { id } => print_json(&c.history(&id).await?),
        SessionAction::Render { id, output } => {
            let svg = c.render_svg(&id).await?;
            match output {
                Some(path) => std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{svg}"),
            }
        }
        SessionAction::Validate { layout, task } => {
            let task = task.map(|p| read_task(&p)).transpose()?;
            let report = c.validate(&read_layout(&layout)?, task.as_ref()).await?;
            print_json(&report);
            if !report.usable {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
