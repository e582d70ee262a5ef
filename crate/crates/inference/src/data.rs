//! The bundled model and held-out digit images under `data/`.

use std::path::PathBuf;

use cmpswhe_vision::Frame;

use crate::InferenceError;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn model_path() -> PathBuf {
    data_dir().join("mlp.txt")
}

/// `(image, label)` pairs sorted by file name (`NNN_L.pgm`).
pub fn load_digits() -> Result<Vec<(Frame, usize)>, InferenceError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data_dir().join("digits"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let label = p
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.rsplit('_').next())
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| InferenceError::Dimension(format!("no label in {}", p.display())))?;
            Ok((Frame::read_pgm(&p)?, label))
        })
        .collect()
}
