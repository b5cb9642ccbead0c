//! Virus-by-antibody IC80 panels in CATNAP-style CSV.
//!
//! Expected header: `virus_id,antibody,ic80_ug_ml`, optionally followed by a
//! `hill_slope` column. Right-censored values are written `>50`; an empty
//! cell, `NA` or `.` marks a pair as explicitly missing.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelEntry {
    pub virus_id: String,
    pub antibody: String,
    /// None when the measurement is missing.
    pub ic80: Option<f64>,
    /// The value is a lower bound (the antibody did not reach 80% at the top concentration).
    pub censored: bool,
    pub hill_slope: Option<f64>,
}

/// How right-censored IC80 values enter titer predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorMode {
    /// Treat as fully resistant: no contribution to the titer.
    #[default]
    Resistant,
    /// Use the bound itself as the IC80.
    UseBound,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VirusPanel {
    entries: Vec<PanelEntry>,
    index: HashMap<(String, String), usize>,
    viruses: Vec<String>,
}

impl VirusPanel {
    pub fn from_entries(entries: Vec<PanelEntry>) -> Result<Self> {
        let mut panel = VirusPanel::default();
        for e in entries {
            panel.push(e)?;
        }
        Ok(panel)
    }

    fn push(&mut self, entry: PanelEntry) -> Result<()> {
        let key = (entry.virus_id.clone(), entry.antibody.clone());
        if self.index.contains_key(&key) {
            return Err(Error::invalid(
                "panel",
                format!("duplicate entry for ({}, {})", key.0, key.1),
            ));
        }
        if !self.viruses.contains(&entry.virus_id) {
            self.viruses.push(entry.virus_id.clone());
        }
        self.index.insert(key, self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| headers.iter().position(|h| h == name);
        let (Some(vi), Some(ai), Some(ii)) = (column("virus_id"), column("antibody"), column("ic80_ug_ml"))
        else {
            return Err(Error::invalid(
                "panel",
                "header must contain virus_id,antibody,ic80_ug_ml",
            ));
        };
        let hi = column("hill_slope");

        let mut panel = VirusPanel::default();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let line = row + 2;
            let field = |i: usize| record.get(i).unwrap_or("");
            let virus_id = field(vi).to_string();
            let antibody = field(ai).to_string();
            if virus_id.is_empty() || antibody.is_empty() {
                return Err(Error::invalid(
                    format!("panel line {line}"),
                    "virus_id and antibody must be non-empty",
                ));
            }
            let (ic80, censored) = parse_ic80(field(ii))
                .map_err(|reason| Error::invalid(format!("panel line {line}.ic80_ug_ml"), reason))?;
            let hill_slope = match hi.map(field) {
                None | Some("") | Some("NA") => None,
                Some(s) => match s.parse::<f64>() {
                    Ok(h) if h > 0.0 && h.is_finite() => Some(h),
                    _ => {
                        return Err(Error::invalid(
                            format!("panel line {line}.hill_slope"),
                            format!("expected a positive number, got '{s}'"),
                        ))
                    }
                },
            };
            panel.push(PanelEntry {
                virus_id,
                antibody,
                ic80,
                censored,
                hill_slope,
            })?;
        }
        Ok(panel)
    }

    /// Virus ids in order of first appearance.
    pub fn viruses(&self) -> &[String] {
        &self.viruses
    }

    pub fn entries(&self) -> &[PanelEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, virus_id: &str, antibody: &str) -> Option<&PanelEntry> {
        self.index
            .get(&(virus_id.to_string(), antibody.to_string()))
            .map(|&i| &self.entries[i])
    }

    /// Pairs among `viruses` x `antibodies` with no usable IC80.
    pub fn missing_pairs<'a>(
        &self,
        viruses: impl IntoIterator<Item = &'a str>,
        antibodies: &[&str],
    ) -> Vec<(String, String)> {
        let mut missing = Vec::new();
        for v in viruses {
            for &a in antibodies {
                if self.get(v, a).and_then(|e| e.ic80).is_none() {
                    missing.push((v.to_string(), a.to_string()));
                }
            }
        }
        missing
    }

    pub fn check_coverage(&self, antibodies: &[&str]) -> Result<()> {
        let missing = self.missing_pairs(self.viruses.iter().map(String::as_str), antibodies);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::PanelIncomplete { missing })
        }
    }
}

fn parse_ic80(raw: &str) -> std::result::Result<(Option<f64>, bool), String> {
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw == "." {
        return Ok((None, false));
    }
    let (censored, number) = match raw.strip_prefix('>') {
        Some(rest) => (true, rest.trim()),
        None => (false, raw),
    };
    match number.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok((Some(v), censored)),
        _ => Err(format!("expected a positive number or '>bound', got '{raw}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "virus_id,antibody,ic80_ug_ml\n\
        V1,VRC01,0.5\n\
        V1,PGT121,>50\n\
        V2,VRC01,1.2\n\
        V2,PGT121,NA\n";

    #[test]
    fn parses_censored_and_missing() {
        let panel = VirusPanel::from_reader(CSV.as_bytes()).unwrap();
        assert_eq!(panel.viruses(), ["V1", "V2"]);
        let e = panel.get("V1", "PGT121").unwrap();
        assert_eq!(e.ic80, Some(50.0));
        assert!(e.censored);
        assert_eq!(panel.get("V2", "PGT121").unwrap().ic80, None);
        assert!(!panel.get("V2", "VRC01").unwrap().censored);
    }

    #[test]
    fn coverage_lists_missing_pairs() {
        let panel = VirusPanel::from_reader(CSV.as_bytes()).unwrap();
        assert!(panel.check_coverage(&["VRC01"]).is_ok());
        match panel.check_coverage(&["VRC01", "PGT121", "10-1074"]) {
            Err(Error::PanelIncomplete { missing }) => {
                assert_eq!(
                    missing,
                    vec![
                        ("V1".to_string(), "10-1074".to_string()),
                        ("V2".to_string(), "PGT121".to_string()),
                        ("V2".to_string(), "10-1074".to_string()),
                    ]
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        let bad = "virus_id,antibody,ic80_ug_ml\nV1,A,-3\n";
        let err = VirusPanel::from_reader(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let dup = "virus_id,antibody,ic80_ug_ml\nV1,A,3\nV1,A,4\n";
        assert!(VirusPanel::from_reader(dup.as_bytes()).is_err());
        let header = "virus,antibody,ic80\nV1,A,3\n";
        assert!(VirusPanel::from_reader(header.as_bytes()).is_err());
    }

    #[test]
    fn optional_hill_column() {
        let csv = "virus_id,antibody,ic80_ug_ml,hill_slope\nV1,A,3,1.5\nV1,B,2,\n";
        let panel = VirusPanel::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(panel.get("V1", "A").unwrap().hill_slope, Some(1.5));
        assert_eq!(panel.get("V1", "B").unwrap().hill_slope, None);
    }
}
