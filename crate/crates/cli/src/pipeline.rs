//! Scenario execution: artifact generation for `run`, dot-path patching and
//! summary assembly for `sweep`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spinwave_core::fitkit::{self, FitResult};
use spinwave_core::scenario::Scenario;
use spinwave_core::spinwave::decay_curve;
use spinwave_core::stimulation;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or scenario: exit 2.
    Usage(String),
    /// The tool itself failed mid-run: exit 3.
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn load_scenario(
    path: &Path,
    seed: Option<u64>,
    atoms: Option<usize>,
) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut scenario = Scenario::from_json_str(&text).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = seed {
        scenario.sim.seed = seed;
    }
    if let Some(atoms) = atoms {
        scenario.sim.n_atoms = atoms;
    }
    scenario.validate().map_err(|e| usage(e.to_string()))?;
    Ok(scenario)
}

/// What a finished sub-run contributes to a sweep summary.
struct RunSummary {
    dominant_tau_s: Option<f64>,
    longest_delay_s: Option<f64>,
}

pub fn run(
    scenario_path: &Path,
    out: &Path,
    seed: Option<u64>,
    atoms: Option<usize>,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path, seed, atoms)?;
    run_one(&scenario, out)?;
    Ok(())
}

fn run_one(scenario: &Scenario, out: &Path) -> Result<RunSummary, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let sim = scenario.to_sim().map_err(|e| usage(e.to_string()))?;
    let grid = scenario.time_grid().map_err(|e| usage(e.to_string()))?;

    let curve = decay_curve(&sim, &grid).map_err(|e| CliError::Runtime(e.to_string()))?;
    let curve_csv = curve.to_csv();

    let mut fits: Vec<FitResult> = Vec::new();
    for model in &scenario.analysis.fit_models {
        let fit = fitkit::fit(&curve, *model)
            .map_err(|e| CliError::Runtime(format!("{model} fit: {e}")))?;
        fits.push(fit);
    }
    // Non-convergence is an analysis outcome: selected_model stays null.
    let selected = fitkit::select_from_fits(fits.clone()).ok();
    let fit_json = serde_json::to_string_pretty(&json!({
        "selected_model": selected.as_ref().map(|f| f.model.name()),
        "fits": fits,
    }))
    .expect("fit serialization cannot fail")
        + "\n";

    let stim_rows = match &scenario.stimulation {
        Some(spec) => Some(
            stimulation::delay_vs_power(
                spec.gain_per_watt,
                spec.decay_rate_hz,
                spec.threshold,
                &spec.powers_w,
            )
            .map_err(|e| usage(format!("stimulation.powers_w: {e}")))?,
        ),
        None => None,
    };
    let stim_csv = stim_rows.as_deref().map(stimulation::delays_to_csv);

    let mut artifacts = serde_json::Map::new();
    artifacts.insert("curve.csv".into(), json!(sha256_hex(curve_csv.as_bytes())));
    artifacts.insert("fit.json".into(), json!(sha256_hex(fit_json.as_bytes())));
    if let Some(csv) = &stim_csv {
        artifacts.insert("stimulation.csv".into(), json!(sha256_hex(csv.as_bytes())));
    }
    let manifest = serde_json::to_string_pretty(&json!({
        "scenario": scenario,
        "scenario_digest": sim.digest(),
        "seed": scenario.sim.seed,
        "n_atoms": scenario.sim.n_atoms,
        "artifacts": artifacts,
    }))
    .expect("manifest serialization cannot fail")
        + "\n";

    let write = |name: &str, text: &str| -> Result<(), CliError> {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    };
    write("curve.csv", &curve_csv)?;
    write("fit.json", &fit_json)?;
    if let Some(csv) = &stim_csv {
        write("stimulation.csv", csv)?;
    }
    write("manifest.json", &manifest)?;

    let selected_name = selected.as_ref().map(|f| f.model.name().to_string());
    let dominant_tau = selected.as_ref().map(|f| f.dominant_tau());
    let longest_delay = stim_rows.as_deref().and_then(|rows| {
        rows.iter()
            .filter_map(|(_, d)| *d)
            .fold(None, |acc: Option<f64>, d| {
                Some(acc.map_or(d, |a| a.max(d)))
            })
    });

    println!(
        "{}: {} points, selected model {}",
        out.display(),
        grid.len(),
        selected_name.as_deref().unwrap_or("none")
    );
    Ok(RunSummary {
        dominant_tau_s: dominant_tau,
        longest_delay_s: longest_delay,
    })
}

pub fn sweep(
    scenario_path: &Path,
    param: &str,
    values: &str,
    out: &Path,
    seed: Option<u64>,
    atoms: Option<usize>,
) -> Result<(), CliError> {
    let base = load_scenario(scenario_path, seed, atoms)?;
    let parsed = parse_values(values)?;
    let leaf = param
        .rsplit('.')
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| usage(format!("--param {param:?} is not a field path")))?;

    let sweep_dir = out.join(format!("sweep_{leaf}"));
    // Header depends on what the swept runs can report: stimulation sweeps
    // summarize the longest onset delay, everything else the fitted
    // dominant decay time.
    let stim_sweep = param == "stimulation" || param.starts_with("stimulation.");
    let mut summary = String::from(if stim_sweep {
        "value,longest_delay_s\n"
    } else {
        "value,dominant_tau_s\n"
    });

    for (token, value) in &parsed {
        let patched = patch_scenario(&base, param, *value)?;
        let run = run_one(&patched, &sweep_dir.join(token))?;
        let metric = if stim_sweep {
            run.longest_delay_s
        } else {
            run.dominant_tau_s
        };
        match metric {
            Some(m) => writeln!(summary, "{token},{m:e}").unwrap(),
            None => writeln!(summary, "{token},").unwrap(),
        }
    }

    let summary_path = sweep_dir.join("summary.csv");
    fs::write(&summary_path, &summary).map_err(|e| io_err(&summary_path, e))?;
    println!("{}", summary_path.display());
    Ok(())
}

fn parse_values(values: &str) -> Result<Vec<(String, f64)>, CliError> {
    let mut parsed = Vec::new();
    for raw in values.split(',') {
        let token = raw.trim();
        if token.is_empty() {
            return Err(usage(
                "--values must be a non-empty comma-separated list of numbers",
            ));
        }
        let v: f64 = token
            .parse()
            .map_err(|_| usage(format!("--values entry {token:?} is not a number")))?;
        if !v.is_finite() {
            return Err(usage(format!("--values entry {token:?} is not finite")));
        }
        // Tokens double as sub-directory names.
        if token.contains(['/', '\\']) || token == "." || token == ".." {
            return Err(usage(format!(
                "--values entry {token:?} is not a safe directory name"
            )));
        }
        parsed.push((token.to_string(), v));
    }
    Ok(parsed)
}

/// Set the numeric field at dotted `path` to `value` and re-validate.
fn patch_scenario(base: &Scenario, path: &str, value: f64) -> Result<Scenario, CliError> {
    let mut root = serde_json::to_value(base).expect("scenario serialization cannot fail");
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(usage(format!("--param {path:?} is not a field path")));
    }

    let mut cursor = &mut root;
    for (i, seg) in segments[..segments.len() - 1].iter().enumerate() {
        cursor = cursor.get_mut(seg).ok_or_else(|| {
            usage(format!(
                "scenario has no field {:?} (at {:?})",
                path,
                segments[..=i].join(".")
            ))
        })?;
    }
    let leaf = *segments.last().expect("split is never empty");
    let obj = cursor
        .as_object_mut()
        .ok_or_else(|| usage(format!("--param {path:?} does not address a scalar field")))?;
    let old = obj
        .get(leaf)
        .ok_or_else(|| usage(format!("scenario has no field {path:?}")))?;

    let new = match old {
        // Integer-valued fields stay integers so counts and seeds sweep too.
        Value::Number(n) if n.as_u64().is_some() => {
            if value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
                json!(value as u64)
            } else {
                return Err(usage(format!(
                    "--param {path:?} takes a non-negative integer, got {value}"
                )));
            }
        }
        Value::Number(_) | Value::Null => {
            json!(value)
        }
        _ => {
            return Err(usage(format!(
                "--param {path:?} does not address a scalar field"
            )))
        }
    };
    obj.insert(leaf.to_string(), new);

    let patched: Scenario =
        serde_json::from_value(root).map_err(|e| usage(format!("--param {path}: {e}")))?;
    patched.validate().map_err(|e| usage(e.to_string()))?;
    Ok(patched)
}
