//! Optional TOML configuration. Keys mirror the long flag names with
//! underscores; lists are TOML arrays (`order = [1, 1]`, `roi = [x, y, h, w]`).

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub order: Option<[usize; 2]>,
    pub link: Option<String>,
    pub beta: Option<f64>,
    pub phi: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub burn_in: Option<usize>,
    pub alpha: Option<f64>,
    pub pfa: Option<f64>,
    pub max_iter: Option<usize>,
    pub limit: Option<f64>,
    pub roi: Option<[usize; 4]>,
    pub morph: Option<String>,
    pub scenario: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub reps: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Flag, then config file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None::<i32>, None, 3), 3);
    }

    #[test]
    fn parses_known_keys_and_rejects_unknown() {
        let c = FileConfig::parse("order = [1, 1]\nlimit = 2.5\nroi = [1, 2, 30, 40]\n").unwrap();
        assert_eq!(c.order, Some([1, 1]));
        assert_eq!(c.limit, Some(2.5));
        assert_eq!(c.roi, Some([1, 2, 30, 40]));
        let err = FileConfig::parse("limt = 2.5\n").unwrap_err();
        assert!(err.contains("limt"), "{err}");
    }
}
