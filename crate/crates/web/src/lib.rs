//! Browser bindings: run a command on a TOML config and evaluate the
//! mollifier norm. Results cross the boundary as JSON text.

use qlayer::bessel::mollifier_norm_sq;
use qlayer::config::parse_config;
use qlayer::run::{run_command, Command};
use qlayer::{Error, Result};
use wasm_bindgen::prelude::*;

fn report_json(command: &str, config: &str) -> Result<String> {
    let cmd: Command = command.parse()?;
    if matches!(cmd, Command::Solve | Command::Full) {
        return Err(Error::Domain("the eigensolver is only available from the command line".into()));
    }
    let validated = parse_config(config)?.validate()?;
    let report = run_command(cmd, &validated)?;
    serde_json::to_string(&report).map_err(|e| Error::Io(e.to_string()))
}

fn sweep_json(xs: &[f64]) -> Result<String> {
    let rows = xs
        .iter()
        .map(|&x| {
            let n = mollifier_norm_sq(x, 1.0)?.value;
            Ok([x, n, n * x.ln().abs() / std::f64::consts::TAU])
        })
        .collect::<Result<Vec<_>>>()?;
    serde_json::to_string(&rows).map_err(|e| Error::Io(e.to_string()))
}

/// Runs `curvature`, `check-identities` or `certify` and returns the report.
#[wasm_bindgen]
pub fn run(command: &str, config: &str) -> std::result::Result<String, JsError> {
    report_json(command, config).map_err(|e| JsError::new(&e.to_string()))
}

/// Kinetic norm of the mollifier at each sigma r0, as a JSON array of
/// `[x, norm, norm |ln x| / (2 pi)]` triples.
#[wasm_bindgen]
pub fn mollifier_sweep(xs: Vec<f64>) -> std::result::Result<String, JsError> {
    sweep_json(&xs).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUMP: &str = include_str!("../../../configs/bump.toml");

    #[test]
    fn curvature_report_is_json() {
        let v: serde_json::Value = serde_json::from_str(&report_json("curvature", BUMP).unwrap()).unwrap();
        assert_eq!(v["schema"], "qlayer-report/1");
        assert!(v["geometry"]["profile"].as_array().unwrap().len() > 10);
    }

    #[test]
    fn solve_is_refused() {
        assert!(matches!(report_json("solve", BUMP), Err(Error::Domain(_))));
    }

    #[test]
    fn mollifier_norm_shrinks_with_sigma() {
        let rows: Vec<[f64; 3]> = serde_json::from_str(&sweep_json(&[0.1, 0.01]).unwrap()).unwrap();
        assert!(rows[1][1] < rows[0][1]);
    }
}
