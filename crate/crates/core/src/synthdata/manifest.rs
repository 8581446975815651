//! Dataset manifest: a plain-text TOML record with a documented schema.
//!
//! Keys: `version`, `resolution`, `part_names`, `sample_count`,
//! `global_seed`, `rarity_rates` (part name -> rate in (0,1)), and
//! `rare_samples` — the ground-truth list of indices that drew a rare
//! variant, which downstream recall measurements rely on.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RarityRates, SynthError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RareSample {
    pub index: usize,
    pub parts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub resolution: [usize; 2],
    pub part_names: Vec<String>,
    pub sample_count: usize,
    pub global_seed: u64,
    pub rarity_rates: BTreeMap<String, f64>,
    #[serde(default)]
    pub rare_samples: Vec<RareSample>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let text = toml::to_string_pretty(self).map_err(|e| SynthError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let manifest: DatasetManifest =
            toml::from_str(&text).map_err(|e| SynthError::Manifest {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        manifest.validate().map_err(|reason| SynthError::Manifest {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sample_count == 0 {
            return Err("sample_count is zero".into());
        }
        if self.resolution[0] != self.resolution[1] || self.resolution[0] < 32 {
            return Err(format!("unsupported resolution {:?}", self.resolution));
        }
        for (name, &rate) in &self.rarity_rates {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(format!("rarity rate for {name} out of (0,1): {rate}"));
            }
        }
        for rare in &self.rare_samples {
            if rare.index >= self.sample_count {
                return Err(format!("rare sample index {} out of range", rare.index));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> RarityRates {
        RarityRates {
            frame: self.rarity_rates.get("frame").copied().unwrap_or(0.02),
            handle: self.rarity_rates.get("handle").copied().unwrap_or(0.02),
        }
    }

    /// A short identity string for provenance checks in the feature cache.
    pub fn identity(&self) -> String {
        format!(
            "synth-v{}-n{}-r{}-seed{}",
            self.version, self.sample_count, self.resolution[0], self.global_seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_toml_round_trip() {
        let m = DatasetManifest {
            version: 1,
            resolution: [64, 64],
            part_names: vec!["frame".into(), "wheel".into()],
            sample_count: 10,
            global_seed: 3,
            rarity_rates: [("frame".to_string(), 0.02)].into_iter().collect(),
            rare_samples: vec![RareSample {
                index: 4,
                parts: vec!["frame".into()],
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        m.save(&path).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), m);
    }

    #[test]
    fn out_of_range_rate_fails_validation() {
        let mut m = DatasetManifest {
            version: 1,
            resolution: [64, 64],
            part_names: vec![],
            sample_count: 1,
            global_seed: 0,
            rarity_rates: BTreeMap::new(),
            rare_samples: vec![],
        };
        m.rarity_rates.insert("frame".into(), 0.0);
        assert!(m.validate().is_err());
    }
}
