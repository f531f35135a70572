//! Server settings from an optional TOML file, overridden by environment
//! variables.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! store = "/var/lib/trailkit"
//! checksums = true
//!
//! [admin]
//! email = "admin@example.org"
//! password = "change-me"
//! ```
//!
//! Environment: `TRAILKIT_LISTEN`, `TRAILKIT_STORE`, `TRAILKIT_ADMIN_EMAIL`,
//! `TRAILKIT_ADMIN_PASSWORD`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORE: &str = "trailkit-data";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    listen: Option<String>,
    store: Option<PathBuf>,
    checksums: Option<bool>,
    admin: Option<AdminFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdminFile {
    email: String,
    password: String,
    #[serde(default)]
    name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admin {
    pub email: String,
    pub password: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub listen: String,
    pub store: PathBuf,
    pub checksums: bool,
    pub admin: Option<Admin>,
}

impl Settings {
    pub fn load(file: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let parsed: FileConfig = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let mut admin = parsed.admin.map(|a| Admin {
            email: a.email,
            password: a.password,
            name: a.name.unwrap_or_else(|| "Admin".into()),
        });
        match (env("TRAILKIT_ADMIN_EMAIL"), env("TRAILKIT_ADMIN_PASSWORD")) {
            (Some(email), Some(password)) => {
                admin = Some(Admin {
                    email,
                    password,
                    name: admin.map_or_else(|| "Admin".into(), |a| a.name),
                })
            }
            (None, None) => {}
            _ => bail!("TRAILKIT_ADMIN_EMAIL and TRAILKIT_ADMIN_PASSWORD must be set together"),
        }
        Ok(Settings {
            listen: env("TRAILKIT_LISTEN")
                .or(parsed.listen)
                .unwrap_or_else(|| DEFAULT_LISTEN.into()),
            store: env("TRAILKIT_STORE")
                .map(PathBuf::from)
                .or(parsed.store)
                .unwrap_or_else(|| DEFAULT_STORE.into()),
            checksums: parsed.checksums.unwrap_or(true),
            admin,
        })
    }
}
