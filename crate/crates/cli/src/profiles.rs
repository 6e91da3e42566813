//! Named user profiles: the built-in four plus a directory of JSON files.

use std::fs;
use std::path::{Path, PathBuf};

use trustlens_core::rating::{builtin_profile, builtin_profiles, UserProfile};
use trustlens_core::voting::Ranking;

use crate::error::{io_config, read_to_string, write_output, CliError, Result};

pub struct ProfileStore {
    dir: PathBuf,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ProfileStore {
    pub fn new(dir: PathBuf) -> Self {
        ProfileStore { dir }
    }

    fn path_of(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.json"))
    }

    pub fn stored(&self) -> Result<Vec<UserProfile>> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_config(&self.dir, e)),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| load_file(p)).collect()
    }

    pub fn get(&self, name: &str) -> Result<Option<UserProfile>> {
        if !valid_name(name) {
            return Ok(None);
        }
        let path = self.path_of(name);
        if !path.is_file() {
            return Ok(None);
        }
        load_file(&path).map(Some)
    }

    pub fn add(&self, name: &str, order: &str, force: bool) -> Result<PathBuf> {
        if !valid_name(name) {
            return Err(CliError::Usage(format!(
                "profile name `{name}` may only contain letters, digits, `_` and `-`"
            )));
        }
        if builtin_profile(name).is_some() {
            return Err(CliError::Usage(format!("`{name}` is a built-in profile")));
        }
        let ranking = Ranking::parse(order).map_err(|e| CliError::Usage(e.to_string()))?;
        let profile = UserProfile::new(name, ranking.order().to_vec())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let path = self.path_of(name);
        if path.exists() && !force {
            return Err(CliError::Usage(format!(
                "profile `{name}` already exists; pass --force to replace it"
            )));
        }
        write_output(&path, &(profile.to_json() + "\n"))?;
        Ok(path)
    }

    /// Built-in name, stored name, or path to a profile JSON file.
    pub fn resolve(&self, reference: &str) -> Result<UserProfile> {
        if let Some(p) = builtin_profile(reference) {
            return Ok(p);
        }
        if let Some(p) = self.get(reference)? {
            return Ok(p);
        }
        let path = Path::new(reference);
        if path.is_file() {
            return load_file(path);
        }
        let names: Vec<String> = builtin_profiles().into_iter().map(|p| p.name).collect();
        Err(CliError::Usage(format!(
            "unknown profile `{reference}`; built-in profiles: {}",
            names.join(", ")
        )))
    }
}

fn load_file(path: &Path) -> Result<UserProfile> {
    let text = read_to_string(path, CliError::Config)?;
    UserProfile::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}
