//! Versioned JSON documents for score models and predictors.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pipeline::ConfidenceSetPredictor;
use crate::score::ScoreModel;

pub const FORMAT_VERSION: &str = "1";

/// Types that can be stored as a model document.
pub trait Persist: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Persist for ScoreModel {
    const KIND: &'static str = "ScoreModel";
}

impl Persist for ConfidenceSetPredictor {
    const KIND: &'static str = "ConfidenceSetPredictor";
}

#[derive(Serialize)]
struct DocumentRef<'a, T> {
    version: &'static str,
    kind: &'static str,
    model: &'a T,
}

#[derive(Deserialize)]
struct Header {
    version: String,
    kind: String,
    model: Value,
}

pub fn to_document<T: Persist>(model: &T) -> Result<String> {
    let doc = DocumentRef { version: FORMAT_VERSION, kind: T::KIND, model };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Corrupted(e.to_string()))
}

pub fn from_document<T: Persist>(text: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text).map_err(|e| Error::Corrupted(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: header.version, expected: FORMAT_VERSION.to_string() });
    }
    if header.kind != T::KIND {
        return Err(Error::Corrupted(format!("expected a {} document, found {}", T::KIND, header.kind)));
    }
    serde_json::from_value(header.model).map_err(|e| Error::Corrupted(e.to_string()))
}

pub fn save_model<T: Persist>(model: &T, path: &Path) -> Result<()> {
    let text = to_document(model)?;
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn load_model<T: Persist>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    from_document(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm::AffineScoreModel;
    use ndarray::array;

    fn model() -> ScoreModel {
        let mut m = AffineScoreModel::zeros(2, 2, 5.0);
        m.weights = array![[0.1 + 0.2, 1.0 / 3.0], [-2.0f64.sqrt(), 1e-300]];
        ScoreModel::Affine(m)
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back: ScoreModel = from_document(&to_document(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_other_versions_kinds_and_truncation() {
        let text = to_document(&model()).unwrap();
        let v99 = text.replacen("\"version\": \"1\"", "\"version\": \"99\"", 1);
        assert!(matches!(from_document::<ScoreModel>(&v99), Err(Error::VersionMismatch { .. })));
        assert!(matches!(from_document::<ConfidenceSetPredictor>(&text), Err(Error::Corrupted(_))));
        assert!(matches!(from_document::<ScoreModel>(&text[..text.len() / 2]), Err(Error::Corrupted(_))));
    }
}
