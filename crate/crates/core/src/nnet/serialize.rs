//! Versioned JSON model files.
//!
//! Every file carries a `format` tag, a `kind` naming the model family, the
//! family's geometry record and one flat `params` array in the model's
//! packed-parameter layout. JSON number formatting round-trips `f64` exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "landsr-model/1";

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<G> {
    format: String,
    kind: String,
    geometry: G,
    params: Vec<f64>,
}

pub fn to_json<G: Serialize>(kind: &str, geometry: &G, params: &[f64]) -> String {
    #[derive(Serialize)]
    struct Out<'a, G> {
        format: &'a str,
        kind: &'a str,
        geometry: &'a G,
        params: &'a [f64],
    }
    serde_json::to_string_pretty(&Out {
        format: FORMAT_TAG,
        kind,
        geometry,
        params,
    })
    .expect("model serializes")
}

pub fn from_json<G: DeserializeOwned>(kind: &str, text: &str) -> Result<(G, Vec<f64>)> {
    let env: Envelope<G> =
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
    if env.format != FORMAT_TAG {
        return Err(Error::InvalidModel(format!(
            "unsupported model format {:?} (expected {FORMAT_TAG:?})",
            env.format
        )));
    }
    if env.kind != kind {
        return Err(Error::InvalidModel(format!(
            "model file holds a {:?} model, expected {kind:?}",
            env.kind
        )));
    }
    Ok((env.geometry, env.params))
}

pub fn save<G: Serialize>(
    path: impl AsRef<Path>,
    kind: &str,
    geometry: &G,
    params: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(kind, geometry, params)).map_err(|e| Error::io(path, e))
}

pub fn load<G: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<(G, Vec<f64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(kind, &text).map_err(|e| match e {
        Error::InvalidModel(msg) => Error::parse(path, msg),
        other => other,
    })
}
