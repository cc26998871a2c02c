//! The `seqinfo.ini` file that accompanies a MOT sequence.

use std::path::Path;

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeqInfo {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub length: u32,
}

impl SeqInfo {
    pub fn to_ini(&self) -> String {
        format!(
            "[Sequence]\nname={}\nimWidth={}\nimHeight={}\nseqLength={}\n",
            self.name, self.width, self.height, self.length
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut width = None;
        let mut height = None;
        let mut length = None;
        for (k, l) in text.lines().enumerate() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('[') || l.starts_with(';') || l.starts_with('#') {
                continue;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(k + 1, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| Error::parse(k + 1, format!("{key} must be a positive number")))
            };
            match key {
                "name" => name = Some(value.to_string()),
                "imWidth" => width = Some(num()?),
                "imHeight" => height = Some(num()?),
                "seqLength" => length = Some(num()? as u32),
                _ => {}
            }
        }
        match (width, height) {
            (Some(width), Some(height)) => Ok(SeqInfo {
                name: name.unwrap_or_default(),
                width,
                height,
                length: length.unwrap_or(0),
            }),
            _ => Err(Error::parse(1, "imWidth and imHeight are required")),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?).map_err(|e| e.in_file(path))
    }
}
