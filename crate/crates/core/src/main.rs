use std::io::{BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use idvault::api::generate_schema;
use idvault::clock::SystemClock;
use idvault::gateway::{self, ConfigError, ConfigLayer, ServiceConfig, DEFAULT_DATA_DIR};
use idvault::schema::SchemaRegistry;

#[derive(Parser)]
#[command(
    name = "idvault",
    version,
    about = "Identity-document repository service"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// JSON config file; keys mirror the config field names in snake_case
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, value_name = "SECRET")]
    jwt_secret: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service
    Serve {
        #[arg(long)]
        port: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Schema utilities
    Schema {
        #[command(subcommand)]
        action: SchemaCommand,
    },
    /// Administrative tasks
    Admin {
        #[command(subcommand)]
        action: AdminCommand,
    },
    /// Verification workflow
    Verify {
        #[command(subcommand)]
        action: VerifyCommand,
    },
}

#[derive(Subcommand)]
enum SchemaCommand {
    /// Print the generated GraphQL SDL
    Print {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum AdminCommand {
    /// Create an account; the password is read from the terminal or stdin
    CreateUser {
        username: String,
        email: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Advance one idcard record with a single call to the configured verifier
    Run {
        record_id: String,
        #[command(flatten)]
        common: Common,
    },
}

fn layers(common: &Common, port: Option<u64>) -> Result<ConfigLayer, ConfigError> {
    let file = match &common.config {
        Some(path) => ConfigLayer::from_file(path)?,
        None => ConfigLayer::default(),
    };
    let env = ConfigLayer::from_env(std::env::vars())?;
    let flags = ConfigLayer {
        port,
        data_dir: common.data_dir.clone(),
        jwt_secret: common.jwt_secret.clone(),
        ..Default::default()
    };
    Ok(file.overlay(env).overlay(flags))
}

fn config(common: &Common, port: Option<u64>) -> Result<ServiceConfig, ConfigError> {
    ServiceConfig::from_layer(layers(common, port)?)
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("idvault: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { port, common } => serve(&common, port),
        Command::Schema {
            action: SchemaCommand::Print { common },
        } => print_schema(&common),
        Command::Admin {
            action:
                AdminCommand::CreateUser {
                    username,
                    email,
                    common,
                },
        } => create_user(&common, &username, &email),
        Command::Verify {
            action: VerifyCommand::Run { record_id, common },
        } => verify(&common, &record_id),
    }
}

fn serve(common: &Common, port: Option<u64>) -> ExitCode {
    let config = match config(common, port) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let service = match gateway::build_service(&config) {
        Ok(s) => Arc::new(s),
        Err(e) => return fail(e),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    match runtime.block_on(gateway::serve(config, service)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(format!("server failed: {e}")),
    }
}

fn print_schema(common: &Common) -> ExitCode {
    let data_dir = match layers(common, None) {
        Ok(layer) => layer
            .data_dir
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
        Err(e) => return fail(e),
    };
    let schema_dir = data_dir.join("schema");
    let registry = if schema_dir.is_dir() {
        match SchemaRegistry::open(schema_dir, Arc::new(SystemClock)) {
            Ok(r) => r,
            Err(e) => return fail(e),
        }
    } else {
        SchemaRegistry::in_memory(Arc::new(SystemClock))
    };
    print!("{}", generate_schema(&registry.snapshot()).sdl_text);
    ExitCode::SUCCESS
}

fn read_password() -> std::io::Result<String> {
    if std::io::stdin().is_terminal() {
        return rpassword::prompt_password("Password: ");
    }
    eprint!("Password: ");
    std::io::stderr().flush()?;
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line)?;
    Ok(line.trim_end_matches(['\r', '\n']).to_string())
}

fn create_user(common: &Common, username: &str, email: &str) -> ExitCode {
    let config = match config(common, None) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let service = match gateway::build_service(&config) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let password = match read_password() {
        Ok(p) => p,
        Err(e) => return fail(format!("cannot read password: {e}")),
    };
    use idvault::api::Backend;
    match service.users().register(username, email, &password) {
        Ok(user) => {
            println!("{}", serde_json::Value::Object(user.to_json()));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn verify(common: &Common, record_id: &str) -> ExitCode {
    let config = match config(common, None) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let service = match gateway::build_service(&config) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let client = service.verifier();
    match service.workflow().advance(record_id, client.as_ref()) {
        Ok(doc) => {
            println!("{}", serde_json::Value::Object(doc.to_json()));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
