use std::fs;
use std::path::{Path, PathBuf};

use qudio::engine::GlobalConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments after the binary name, as given.
    pub argv: Vec<String>,
    pub config: Option<GlobalConfig>,
    /// Workload-specific settings.
    pub settings: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> std::io::Result<InputDigest> {
    Ok(InputDigest { path: path.to_path_buf(), sha256: sha256_hex(&fs::read(path)?) })
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        argv: Vec<String>,
        config: Option<GlobalConfig>,
        settings: Value,
        inputs: Vec<InputDigest>,
    ) -> Self {
        let mut manifest = Self {
            run_id: String::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            argv,
            config,
            settings,
            inputs,
            outputs: Vec::new(),
        };
        manifest.run_id = manifest.compute_id();
        manifest
    }

    /// Short hex hash of the subcommand, resolved config, settings and input
    /// digests.
    fn compute_id(&self) -> String {
        let key = serde_json::json!({
            "subcommand": self.subcommand,
            "config": self.config,
            "settings": self.settings,
            "inputs": self.inputs.iter().map(|i| &i.sha256).collect::<Vec<_>>(),
        });
        sha256_hex(key.to_string().as_bytes())[..12].to_string()
    }

    pub fn default_out_dir(&self) -> PathBuf {
        PathBuf::from("runs").join(format!("{}-{}", self.subcommand, self.run_id))
    }

    pub fn write(&self, dir: &Path) -> qudio::Result<PathBuf> {
        let path = dir.join(FILE_NAME);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn read(path: &Path) -> qudio::Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn run_id_ignores_argv_spelling_but_not_config() {
        let a = RunManifest::new("vqe", vec!["-Q".into(), "2".into()], Some(GlobalConfig::default()), Value::Null, vec![]);
        let b = RunManifest::new("vqe", vec!["--nodes".into(), "2".into()], Some(GlobalConfig::default()), Value::Null, vec![]);
        assert_eq!(a.run_id, b.run_id);
        assert_eq!(a.run_id.len(), 12);
        let c = RunManifest::new("vqe", vec![], Some(GlobalConfig { seed: 9, ..Default::default() }), Value::Null, vec![]);
        assert_ne!(a.run_id, c.run_id);
    }

    #[test]
    fn round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest::new("bench", vec!["bench".into()], None, serde_json::json!({"sweep": [1, 2]}), vec![]);
        let path = m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }
}
