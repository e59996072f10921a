//! Configuration files: one `key = value` per line, `#` starts a comment.
//! Keys are those of the model and training settings; `grid.<key> = a, b, c`
//! declares a grid-search axis instead of a single value.

use std::path::Path;

use hermit_core::training::{GridSpace, Hyperparameters};

use crate::error::{read_to_string, AppError, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    /// Plain settings in file order.
    pub values: Vec<(String, String)>,
    pub grid: GridSpace,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut file = ConfigFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| AppError::Data(format!("config line {}: expected `key = value`", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(axis) = key.strip_prefix("grid.") {
            let values: Vec<&str> = value.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(AppError::Data(format!("config line {}: empty grid axis {axis}", i + 1)));
            }
            file.grid = std::mem::take(&mut file.grid).axis(axis, values);
        } else {
            file.values.push((key.to_string(), value.to_string()));
        }
    }
    Ok(file)
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    parse_config(&read_to_string(path)?)
}

/// Splits a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| AppError::Usage(format!("--set expects key=value, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Defaults, then the file, then command-line overrides, later ones winning.
pub fn resolve(file: Option<&ConfigFile>, overrides: &[(String, String)]) -> Result<Hyperparameters> {
    let mut hyper = Hyperparameters::default();
    let file_values = file.map(|f| f.values.as_slice()).unwrap_or_default();
    for (k, v) in file_values.iter().chain(overrides) {
        hyper.set(k, v).context(|| format!("setting {k}"))?;
    }
    hyper.validate().context(|| "configuration".into())?;
    Ok(hyper)
}

pub fn render(hyper: &Hyperparameters) -> String {
    hyper.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let f = parse_config("# comment\nhidden = 12  # trailing\n\nlearning_rate=0.01\ngrid.hidden = 8, 16\n").unwrap();
        assert_eq!(f.grid.points().len(), 2);
        let h = resolve(Some(&f), &[("hidden".into(), "7".into())]).unwrap();
        assert_eq!(h.model.hidden, 7);
        assert_eq!(h.train.learning_rate, 0.01);
        assert!(parse_config("hidden 3").is_err());
        assert!(resolve(None, &[("bogus".into(), "1".into())]).is_err());
        assert!(parse_override("x").is_err());
    }

    #[test]
    fn rendered_defaults_parse_back() {
        let h = Hyperparameters::default();
        let back = resolve(Some(&parse_config(&render(&h)).unwrap()), &[]).unwrap();
        assert_eq!(back, h);
    }
}
