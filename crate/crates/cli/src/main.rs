mod config;
mod server;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use trailkit_core::accounts::UserProfile;
use trailkit_core::fixtures;
use trailkit_core::gateway::routes;
use trailkit_core::service::system_clock;
use trailkit_core::{FileStore, Gateway, Portal};

use config::Settings;

#[derive(Parser)]
#[command(name = "trailkit", version, about = "Leveled learning trails portal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        /// TOML settings file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Install the sample fixtures first when the store has none.
        #[arg(long)]
        seed: bool,
    },
    /// Install the sample fixtures into a store.
    Seed {
        #[arg(long, env = "TRAILKIT_STORE", default_value = config::DEFAULT_STORE)]
        store: PathBuf,
    },
    /// Replay the result log and check it against the stored snapshots.
    Verify {
        #[arg(long, env = "TRAILKIT_STORE", default_value = config::DEFAULT_STORE)]
        store: PathBuf,
    },
    /// Print a user's microformats2 bundle.
    Export {
        #[arg(long, env = "TRAILKIT_STORE", default_value = config::DEFAULT_STORE)]
        store: PathBuf,
        #[arg(long)]
        email: String,
    },
    /// Print the endpoint listing.
    Openapi,
}

fn open_portal(store: &Path, checksums: bool) -> anyhow::Result<Portal> {
    let storage = FileStore::open_with(store, checksums)
        .with_context(|| format!("opening store at {}", store.display()))?;
    Ok(Portal::open(Box::new(storage), system_clock())?)
}

/// Installs the fixtures unless the store already holds them.
fn seed(portal: &mut Portal) -> anyhow::Result<Option<fixtures::Fixtures>> {
    if portal.find_account("teste5@email.com").is_some() {
        return Ok(None);
    }
    Ok(Some(fixtures::install(portal)?))
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn seed_summary(fx: &fixtures::Fixtures) -> serde_json::Value {
    serde_json::json!({
        "password": fixtures::FIXTURE_PASSWORD,
        "accounts": {
            "admin": fx.admin, "developer": fx.developer,
            "mediator": fx.mediator, "student": fx.student,
        },
        "class": fx.class,
        "trails": { "two_level": fx.two_level_trail, "three_level": fx.three_level_trail },
    })
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Serve { config, seed: with_seed } => {
            let settings = Settings::load(config.as_deref(), |k| std::env::var(k).ok())?;
            let mut portal = open_portal(&settings.store, settings.checksums)?;
            if let Some(admin) = &settings.admin {
                let profile = UserProfile {
                    given_name: admin.name.clone(),
                    email: admin.email.clone(),
                    ..Default::default()
                };
                portal.provision_admin(profile, &admin.password)?;
            }
            if with_seed && seed(&mut portal)?.is_some() {
                eprintln!("seeded fixtures (password {})", fixtures::FIXTURE_PASSWORD);
            }
            let gateway = Arc::new(Gateway::new(portal));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&settings.listen)
                    .await
                    .with_context(|| format!("binding {}", settings.listen))?;
                println!("listening on {}", listener.local_addr()?);
                std::io::stdout().flush()?;
                server::serve(gateway, listener).await
            })
        }
        Command::Seed { store } => {
            let mut portal = open_portal(&store, true)?;
            match seed(&mut portal)? {
                Some(fx) => print_json(&seed_summary(&fx)),
                None => {
                    eprintln!("store already holds the fixtures");
                    Ok(())
                }
            }
        }
        Command::Verify { store } => {
            let mut portal = open_portal(&store, true)?;
            let report = portal.snapshot_and_recover()?;
            print_json(&report)
        }
        Command::Export { store, email } => {
            let portal = open_portal(&store, true)?;
            let account = portal
                .find_account(&email)
                .ok_or_else(|| anyhow!("no account with email {email}"))?;
            let bundle = portal.export_bundle(account.id)?;
            println!("{}", bundle.to_canonical_json());
            Ok(())
        }
        Command::Openapi => print_json(&routes::openapi()),
    }
}
