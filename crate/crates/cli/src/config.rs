//! Effective run configuration: built-in defaults, overridden by an optional
//! JSON config file, overridden by command-line flags.

use serde::{Deserialize, Serialize};

use biped_core::error::{Error, Result};

use crate::{CommonArgs, FormatArg, ModelArg};

/// Persisted shape of a config file; every field optional.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    pub format: Option<String>,
    pub model: Option<String>,
    pub tol_scale: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub interval: Option<[f64; 2]>,
    pub theta0_bracket: Option<[f64; 2]>,
}

/// The effective configuration echoed into every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub format: String,
    pub model: String,
    pub tol_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0_bracket: Option<[f64; 2]>,
}

fn parse_model(s: &str) -> Result<ModelArg> {
    match s {
        "full" => Ok(ModelArg::Full),
        "expanded" => Ok(ModelArg::Expanded),
        "both" => Ok(ModelArg::Both),
        other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
    }
}

fn parse_format(s: &str) -> Result<FormatArg> {
    match s {
        "json" => Ok(FormatArg::Json),
        "csv" => Ok(FormatArg::Csv),
        other => Err(Error::InvalidInput(format!("unknown format '{other}'"))),
    }
}

pub struct Resolved {
    pub format: FormatArg,
    pub model: ModelArg,
    pub tol_scale: f64,
    pub grid: Option<Vec<f64>>,
    pub interval: Option<[f64; 2]>,
    pub theta0_bracket: Option<[f64; 2]>,
}

impl Resolved {
    pub fn config_echo(&self) -> RunConfig {
        RunConfig {
            format: match self.format {
                FormatArg::Json => "json".into(),
                FormatArg::Csv => "csv".into(),
            },
            model: match self.model {
                ModelArg::Full => "full".into(),
                ModelArg::Expanded => "expanded".into(),
                ModelArg::Both => "both".into(),
            },
            tol_scale: self.tol_scale,
            grid: self.grid.clone(),
            interval: self.interval,
            theta0_bracket: self.theta0_bracket,
        }
    }
}

/// Merge defaults, file config and flags. `default_format` is per-command.
pub fn resolve(common: &CommonArgs, default_format: FormatArg) -> Result<Resolved> {
    let file = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let format = if common.json {
        FormatArg::Json
    } else if common.csv {
        FormatArg::Csv
    } else if let Some(f) = common.format {
        f
    } else if let Some(s) = &file.format {
        parse_format(s)?
    } else {
        default_format
    };

    let model = match (common.model, &file.model) {
        (Some(m), _) => m,
        (None, Some(s)) => parse_model(s)?,
        (None, None) => ModelArg::Expanded,
    };

    let tol_scale = common.tol_scale.or(file.tol_scale).unwrap_or(1.0);
    if !(tol_scale > 0.0 && tol_scale.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tol-scale must be positive, got {tol_scale}"
        )));
    }

    Ok(Resolved {
        format,
        model,
        tol_scale,
        grid: file.grid,
        interval: file.interval,
        theta0_bracket: file.theta0_bracket,
    })
}
