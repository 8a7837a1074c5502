//! `--config` handling: JSON defaults are spliced into argv as extra flags
//! for every key the command line does not already set.

use std::fs;

use serde_json::{Map, Value};

use crate::error::Usage;

const SUBCOMMANDS: [&str; 5] = ["gen", "run", "eval", "check", "bench"];

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn present(args: &[String], flag: &str) -> bool {
    let eq = format!("{flag}=");
    args.iter().any(|a| a == flag || a.starts_with(&eq))
}

fn splice(args: &mut Vec<String>, given: &[String], obj: &Map<String, Value>) -> Result<(), Usage> {
    for (key, value) in obj {
        if value.is_object() {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || present(given, &flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => args.push(flag),
            Value::String(s) => args.extend([flag, s.clone()]),
            Value::Number(n) => args.extend([flag, n.to_string()]),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(n) => Ok(n.to_string()),
                        other => Err(Usage(format!("config key {key:?}: unsupported list item {other}"))),
                    })
                    .collect::<Result<_, _>>()?;
                args.extend([flag, parts.join(",")]);
            }
            Value::Object(_) => unreachable!(),
        }
    }
    Ok(())
}

/// Returns argv with config defaults appended. Without `--config` the input
/// is returned unchanged.
pub fn merged_args(args: Vec<String>) -> Result<Vec<String>, Usage> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Usage(format!("config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Usage(format!("config {path}: {e}")))?;
    let Value::Object(root) = value else {
        return Err(Usage(format!("config {path}: expected a JSON object")));
    };
    let mut out = args.clone();
    splice(&mut out, &args, &root)?;
    if let Some(sub) = args.iter().skip(1).find(|a| SUBCOMMANDS.contains(&a.as_str())) {
        match root.get(sub.as_str()) {
            Some(Value::Object(section)) => splice(&mut out, &args, section)?,
            Some(_) => return Err(Usage(format!("config {path}: section {sub:?} must be an object"))),
            None => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"seed": 4, "run": {"n": 50, "planner": "simplex", "seeds": [1, 2]}}"#).unwrap();
        let args = argv(&format!("lowrank run --config {} --n 70 --env m.json", p.display()));
        let out = merged_args(args.clone()).unwrap();
        assert_eq!(&out[..args.len()], &args[..]);
        let tail = out[args.len()..].join(" ");
        assert!(tail.contains("--seed 4"));
        assert!(tail.contains("--planner simplex"));
        assert!(tail.contains("--seeds 1,2"));
        assert!(!tail.contains("--n "));
    }

    #[test]
    fn malformed_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, "[1]").unwrap();
        assert!(merged_args(argv(&format!("lowrank gen --config {}", p.display()))).is_err());
        assert!(merged_args(argv("lowrank gen --config /nonexistent/c.json")).is_err());
    }
}
