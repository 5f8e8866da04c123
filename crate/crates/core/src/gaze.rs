use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One eye-tracker sample. Coordinates are screen pixels, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Seconds since stimulus onset.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub pupil_mm: f64,
    #[serde(with = "bool_as_int")]
    pub valid: bool,
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        let raw = String::deserialize(d)?;
        match raw.trim() {
            "1" | "true" | "True" | "TRUE" => Ok(true),
            "0" | "false" | "False" | "FALSE" => Ok(false),
            other => Err(serde::de::Error::custom(format!("invalid validity flag {other:?}"))),
        }
    }
}

/// Read a gaze CSV with header `t,x,y,pupil_mm,valid`.
pub fn read_gaze_csv(path: impl AsRef<Path>) -> Result<Vec<GazeSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::load(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, row) in rdr.deserialize::<GazeSample>().enumerate() {
        let s = row.map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        if !s.t.is_finite() || s.t < last_t {
            return Err(Error::Validation(format!(
                "{}: row {}: timestamps must be finite and nondecreasing",
                path.display(),
                i + 1
            )));
        }
        last_t = s.t;
        out.push(s);
    }
    Ok(out)
}

pub fn write_gaze_csv(path: impl AsRef<Path>, samples: &[GazeSample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::load(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for s in samples {
        w.serialize(s).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
