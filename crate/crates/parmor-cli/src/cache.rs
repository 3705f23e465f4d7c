//! Full-order model caching.
//!
//! Assembling a desk-scale thermal block is cheap, but the cache makes every
//! run start from bit-identical operators and gives the archive's checksum a
//! chance to catch on-disk corruption. Archive names depend only on the
//! geometry, never on seeds or solver settings, so all experiments over the
//! same FOM share one file.

use std::path::{Path, PathBuf};

use parmor::model::{load_model, save_model, LtiModel};
use parmor::thermalblock::{self, OutputMode};
use parmor::Result;

use crate::config::FomConfig;

fn output_tag(mode: OutputMode) -> &'static str {
    match mode {
        OutputMode::BlockAverages => "block",
        OutputMode::DomainAverage => "domain",
    }
}

/// Archive path of the `k x k` parametric thermal block.
pub fn fom_path(out_dir: &Path, fom: &FomConfig) -> PathBuf {
    out_dir.join(format!(
        "fom_k{}_g{}_{}.json",
        fom.blocks_per_side,
        fom.grid_per_side,
        output_tag(fom.output.into()),
    ))
}

/// Archive path of the one-parameter variant (shares the grid with `fom`).
pub fn one_param_fom_path(out_dir: &Path, fom: &FomConfig) -> PathBuf {
    out_dir.join(format!(
        "fom_one_param_g{}_{}.json",
        fom.grid_per_side,
        output_tag(fom.output.into()),
    ))
}

/// Loads the archive at `path`, or assembles the model with `build` and
/// writes the archive. A load failure (missing file, checksum mismatch,
/// unparseable content) falls back to rebuilding; the returned flag says
/// whether that happened.
pub fn load_or_build(
    path: &Path,
    build: impl FnOnce() -> Result<LtiModel>,
) -> Result<(LtiModel, bool)> {
    if path.exists() {
        match load_model(path) {
            Ok(model) => return Ok((model, false)),
            Err(e) => {
                log::warn!(
                    "model archive {} is unusable ({e}); rebuilding",
                    path.display()
                );
            }
        }
    }
    let model = build()?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_model(&model, path)?;
    Ok((model, true))
}

/// The cached `k x k` thermal block for `fom`.
pub fn thermal_fom(out_dir: &Path, fom: &FomConfig) -> Result<(LtiModel, bool)> {
    let spec = fom.spec()?;
    load_or_build(&fom_path(out_dir, fom), || thermalblock::build(&spec))
}

/// The cached one-parameter thermal block for `fom`'s grid.
pub fn one_param_fom(out_dir: &Path, fom: &FomConfig) -> Result<(LtiModel, bool)> {
    let grid = fom.grid_per_side;
    let output = fom.output.into();
    load_or_build(&one_param_fom_path(out_dir, fom), || {
        thermalblock::build_one_param(grid, output)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::OutputKind;
    use parmor::model::Parameter;

    fn small() -> FomConfig {
        FomConfig {
            blocks_per_side: 2,
            grid_per_side: 4,
            output: OutputKind::BlockAverages,
        }
    }

    #[test]
    fn build_then_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (built, rebuilt) = thermal_fom(dir.path(), &small()).unwrap();
        assert!(rebuilt);
        let (loaded, rebuilt) = thermal_fom(dir.path(), &small()).unwrap();
        assert!(!rebuilt);
        let mu = Parameter::new(vec![0.5, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(
            built.eval_a(&mu).unwrap().to_dense(),
            loaded.eval_a(&mu).unwrap().to_dense()
        );
        assert_eq!(built.b(), loaded.b());
    }

    #[test]
    fn corrupted_archive_triggers_rebuild() {
        let dir = tempfile::tempdir().unwrap();
        let path = fom_path(dir.path(), &small());
        thermal_fom(dir.path(), &small()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("0.04", "0.05");
        std::fs::write(&path, text).unwrap();
        let (_, rebuilt) = thermal_fom(dir.path(), &small()).unwrap();
        assert!(rebuilt, "corruption must send the loader down the rebuild path");
        // and the rewritten archive is healthy again
        let (_, rebuilt) = thermal_fom(dir.path(), &small()).unwrap();
        assert!(!rebuilt);
    }

    #[test]
    fn archive_name_ignores_seeds_and_solvers() {
        let fom = small();
        let p = fom_path(Path::new("out"), &fom);
        assert_eq!(p, Path::new("out").join("fom_k2_g4_block.json"));
    }
}
