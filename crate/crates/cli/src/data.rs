use std::path::PathBuf;

use alpf_core::datagen::{load_dir, preset, Dataset, PRESETS};
use alpf_core::ClassHierarchy;
use serde::{Deserialize, Serialize};

use crate::args::DataArgs;
use crate::UsageError;

/// How a run's data was obtained, as recorded in its manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSpec {
    Preset {
        name: String,
        seed: u64,
    },
    Dir {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hierarchy: Option<PathBuf>,
    },
}

impl DataSpec {
    pub fn from_args(args: &DataArgs) -> Self {
        if PRESETS.contains(&args.data.as_str()) {
            DataSpec::Preset {
                name: args.data.clone(),
                seed: args.data_seed,
            }
        } else {
            DataSpec::Dir {
                path: PathBuf::from(&args.data),
                hierarchy: args.hierarchy.clone(),
            }
        }
    }

    pub fn load(&self) -> anyhow::Result<(Dataset, ClassHierarchy)> {
        match self {
            DataSpec::Preset { name, seed } => Ok(preset(name, *seed)?),
            DataSpec::Dir { path, hierarchy } => {
                if !path.is_dir() {
                    return Err(UsageError(format!(
                        "dataset `{}` is neither a preset ({}) nor a directory",
                        path.display(),
                        PRESETS.join(", ")
                    ))
                    .into());
                }
                let (data, mut h) = load_dir(path)?;
                if let Some(hp) = hierarchy {
                    h = ClassHierarchy::load(hp)?;
                }
                Ok((data, h))
            }
        }
    }
}
