use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hintforge_server::{serve, ServerConfig};

/// Serve the workbench HTTP API.
#[derive(Debug, Parser)]
#[command(name = "hintforge-server", version)]
struct Args {
    /// TOML config file; PH_* environment variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let config = match ServerConfig::from_env(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": {"code": "CONFIG_ERROR", "message": e.to_string()}}));
            return ExitCode::from(2);
        }
    };
    eprintln!("listening on {}:{}", config.host, config.port);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match serve(config, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e {
                hintforge_server::ServerError::PortInUse(_) => "PORT_IN_USE",
                _ => "SERVER_ERROR",
            };
            eprintln!("{}", serde_json::json!({"error": {"code": code, "message": e.to_string()}}));
            ExitCode::FAILURE
        }
    }
}
