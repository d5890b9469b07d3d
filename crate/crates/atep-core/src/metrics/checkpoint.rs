//! Checkpoint persistence: a directory holding the resolved config, the
//! full engine state (populations, registries, RNG streams, archive,
//! ledger), and a version marker. Loading a checkpoint reproduces the saved
//! state bit for bit, so a resumed run continues exactly as the
//! uninterrupted one would. Files are written to a temp name and renamed,
//! so a torn write loads as an explicit error rather than partial state.

use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::engine::EngineState;
use crate::error::CheckpointError;

pub const CHECKPOINT_VERSION: u32 = 1;

const VERSION_FILE: &str = "VERSION";
const CONFIG_FILE: &str = "config.txt";
const STATE_FILE: &str = "state.json";

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CheckpointError> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let dest = dir.join(name);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, &dest).map_err(|e| io_err(&dest, e))?;
    Ok(())
}

pub fn checkpoint_save(
    cfg: &RunConfig,
    state: &EngineState,
    dir: &Path,
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_atomic(dir, VERSION_FILE, format!("{CHECKPOINT_VERSION}\n").as_bytes())?;
    write_atomic(dir, CONFIG_FILE, cfg.echo().as_bytes())?;
    let json = serde_json::to_vec(state).map_err(|e| CheckpointError::Corrupt {
        path: dir.display().to_string(),
        reason: format!("state serialization failed: {e}"),
    })?;
    write_atomic(dir, STATE_FILE, &json)?;
    Ok(())
}

pub fn checkpoint_load(dir: &Path) -> Result<(RunConfig, EngineState), CheckpointError> {
    let corrupt = |reason: String| CheckpointError::Corrupt {
        path: dir.display().to_string(),
        reason,
    };

    let version_path = dir.join(VERSION_FILE);
    let version_text = fs::read_to_string(&version_path).map_err(|e| io_err(&version_path, e))?;
    let found: u32 = version_text
        .trim()
        .parse()
        .map_err(|_| corrupt(format!("unreadable version marker '{}'", version_text.trim())))?;
    if found != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found,
            expected: CHECKPOINT_VERSION,
        });
    }

    let config_path = dir.join(CONFIG_FILE);
    let config_text = fs::read_to_string(&config_path).map_err(|e| io_err(&config_path, e))?;
    let mut cfg = RunConfig::default();
    cfg.apply_text(&config_text)
        .map_err(|e| corrupt(format!("bad config echo: {e}")))?;
    cfg.validate()
        .map_err(|e| corrupt(format!("invalid config: {e}")))?;

    let state_path = dir.join(STATE_FILE);
    let state_bytes = fs::read(&state_path).map_err(|e| io_err(&state_path, e))?;
    let state: EngineState = serde_json::from_slice(&state_bytes)
        .map_err(|e| corrupt(format!("state deserialization failed: {e}")))?;

    if state.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: state.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if state.config_hash != cfg.config_hash() {
        return Err(corrupt(
            "state config hash disagrees with the stored config echo".to_string(),
        ));
    }
    Ok((cfg, state))
}

/// Guard used by resume: a caller-supplied config must hash identically to
/// the checkpointed one unless explicitly overridden.
pub fn check_config_compatible(
    stored: &RunConfig,
    supplied: &RunConfig,
) -> Result<(), CheckpointError> {
    let (a, b) = (stored.config_hash(), supplied.config_hash());
    if a != b {
        return Err(CheckpointError::ConfigMismatch {
            stored: a,
            supplied: b,
        });
    }
    Ok(())
}
