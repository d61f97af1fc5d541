//! JSON scan metadata sidecars.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, FormatError};
use crate::geometry::{LandmarkSet, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Race {
    AfricanAmerican,
    Asian,
    Spanish,
    White,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
        }
    }
}

impl Race {
    pub const ALL: [Race; 4] = [Race::AfricanAmerican, Race::Asian, Race::Spanish, Race::White];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::AfricanAmerican => "AfricanAmerican",
            Race::Asian => "Asian",
            Race::Spanish => "Spanish",
            Race::White => "White",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = FormatError;
    fn from_str(s: &str) -> Result<Self, FormatError> {
        Gender::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| FormatError::Metadata(format!("unknown gender {s:?}")))
    }
}

impl FromStr for Race {
    type Err = FormatError;
    fn from_str(s: &str) -> Result<Self, FormatError> {
        Race::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| FormatError::Metadata(format!("unknown race {s:?}")))
    }
}

/// Everything about a scan except its points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub id: String,
    pub gender: Gender,
    pub race: Race,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<LandmarkSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<BTreeMap<String, f64>>,
    /// Keys this version does not know about, kept verbatim.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ScanMetadata {
    pub fn new(id: impl Into<String>, gender: Gender, race: Race) -> Self {
        Self {
            id: id.into(),
            gender,
            race,
            landmarks: None,
            factors: None,
            extra: serde_json::Map::new(),
        }
    }

    fn validate(&self) -> Result<(), FormatError> {
        if self.id.is_empty() {
            return Err(FormatError::Metadata("empty id".into()));
        }
        if let Some(lm) = &self.landmarks {
            lm.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str, strict: bool) -> Result<Self, FormatError> {
        let meta: ScanMetadata =
            serde_json::from_str(text).map_err(|e| FormatError::Metadata(e.to_string()))?;
        if strict && !meta.extra.is_empty() {
            let keys: Vec<&str> = meta.extra.keys().map(String::as_str).collect();
            return Err(FormatError::Metadata(format!("unknown keys {keys:?}")));
        }
        meta.validate()?;
        Ok(meta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

/// A scan: its cloud plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub meta: ScanMetadata,
    pub cloud: PointCloud,
}

impl ScanRecord {
    pub fn id(&self) -> &str {
        &self.meta.id
    }
}

pub fn read_metadata(path: &Path) -> Result<ScanMetadata, FormatError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| FormatError::Metadata(e.to_string()))?;
    ScanMetadata::from_json(&text, false)
}

/// Like [`read_metadata`] but rejects unknown keys.
pub fn read_metadata_strict(path: &Path) -> Result<ScanMetadata, FormatError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| FormatError::Metadata(e.to_string()))?;
    ScanMetadata::from_json(&text, true)
}

pub fn write_metadata(meta: &ScanMetadata, path: &Path) -> Result<(), FormatError> {
    meta.validate()?;
    write_file(path, meta.to_json().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn full() -> ScanMetadata {
        let mut m = ScanMetadata::new("scan_00001", Gender::Female, Race::Asian);
        m.landmarks = Some(LandmarkSet {
            cervicale: Point3::new(-0.03, 0.0, 1.41),
            tragion_left: Point3::new(0.0, 0.071, 1.55),
            tragion_right: Point3::new(0.0, -0.071, 1.55),
        });
        m.factors = Some(BTreeMap::from([
            ("width".to_string(), 1.1),
            ("size".to_string(), 0.93),
            ("protrusion".to_string(), 0.0123456789),
        ]));
        m
    }

    #[test]
    fn full_round_trip() {
        let m = full();
        assert_eq!(ScanMetadata::from_json(&m.to_json(), true).unwrap(), m);
    }

    #[test]
    fn unknown_race_rejected() {
        let text = r#"{"id":"a","gender":"Male","race":"Martian"}"#;
        assert!(matches!(
            ScanMetadata::from_json(text, false),
            Err(FormatError::Metadata(_))
        ));
    }

    #[test]
    fn landmarks_optional() {
        let text = r#"{"id":"a","gender":"Male","race":"White"}"#;
        let m = ScanMetadata::from_json(text, true).unwrap();
        assert_eq!(m.landmarks, None);
        assert_eq!(m.factors, None);
    }

    #[test]
    fn missing_required_key() {
        let text = r#"{"id":"a","race":"White"}"#;
        let err = ScanMetadata::from_json(text, false).unwrap_err();
        assert!(err.to_string().contains("gender"), "{err}");
    }

    #[test]
    fn unknown_keys_kept_or_rejected() {
        let text = r#"{"id":"a","gender":"Male","race":"White","scanner":{"model":"x"}}"#;
        let m = ScanMetadata::from_json(text, false).unwrap();
        assert!(m.extra.contains_key("scanner"));
        let again = ScanMetadata::from_json(&m.to_json(), false).unwrap();
        assert_eq!(again, m);
        assert!(ScanMetadata::from_json(text, true).is_err());
    }

    #[test]
    fn enum_string_round_trip() {
        for g in Gender::ALL {
            assert_eq!(g.as_str().parse::<Gender>().unwrap(), g);
        }
        for r in Race::ALL {
            assert_eq!(r.as_str().parse::<Race>().unwrap(), r);
        }
    }
}
