mod args;
mod config;
mod error;
mod manifest;
mod stages;

use std::path::PathBuf;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use config::Config;
use error::{error_record, Usage};
use manifest::{config_hash, manifest_path, parents_of, FileRef, RunManifest, MANIFEST_VERSION};
use stages::{dispatch, Common};

type Failure = (String, anyhow::Error);

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let code = match drive(argv) {
        Ok(()) => 0,
        Err((command, e)) => {
            let (code, record) = error_record(&command, &e);
            eprintln!("{record}");
            code
        }
    };
    std::process::exit(code);
}

fn parse(argv: &[String]) -> Result<Cli, Failure> {
    match Cli::try_parse_from(argv) {
        Ok(c) => Ok(c),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => Err((
            "gazegoal".into(),
            Usage(e.render().to_string().trim().to_string()).into(),
        )),
    }
}

fn drive(argv: Vec<String>) -> Result<(), Failure> {
    let cli = parse(&argv)?;
    let name = cli.command.name().to_string();
    let fail = |e: anyhow::Error| (name.clone(), e);
    let config = match &cli.config {
        Some(p) if !p.is_file() => {
            return Err(fail(
                error::MissingDependency {
                    flag: "--config",
                    path: Some(p.clone()),
                }
                .into(),
            ))
        }
        Some(p) => Some(Config::load(p).map_err(fail)?),
        None => None,
    };
    match &cli.command {
        Command::Run => {
            let config = config.ok_or_else(|| {
                fail(
                    error::MissingDependency {
                        flag: "--config",
                        path: None,
                    }
                    .into(),
                )
            })?;
            let stages = config.stages().map_err(fail)?;
            let mut manifests = Vec::new();
            for stage in stages {
                let mut stage_argv = vec![argv[0].clone(), stage.clone()];
                for (flag, v) in [
                    ("--seed", cli.seed.map(|s| s as usize)),
                    ("--fold", cli.fold),
                    ("--workers", cli.workers),
                ] {
                    if let Some(v) = v {
                        stage_argv.extend([flag.to_string(), v.to_string()]);
                    }
                }
                if matches!(stage.as_str(), "run" | "replay") {
                    return Err(fail(Usage(format!("stage {stage:?} cannot be nested")).into()));
                }
                manifests.push(run_stage(stage_argv, Some(&config))?);
            }
            println!(
                "{}",
                json!({ "status": "ok", "command": "run", "manifests": manifests })
            );
            Ok(())
        }
        Command::Replay(a) => {
            let m = RunManifest::read(&a.manifest).map_err(fail)?;
            let mut replay = vec![argv[0].clone()];
            replay.extend(m.argv);
            if let Some(out) = &cli.out {
                set_flag(&mut replay, "--out", &out.display().to_string());
            }
            let path = run_stage(replay, None)?;
            println!("{}", json!({ "status": "ok", "command": "replay", "manifest": path }));
            Ok(())
        }
        _ => {
            let path = run_stage(argv, config.as_ref())?;
            println!("{}", json!({ "status": "ok", "command": name, "manifest": path }));
            Ok(())
        }
    }
}

fn set_flag(argv: &mut Vec<String>, flag: &str, value: &str) {
    match argv.iter().position(|a| a == flag) {
        Some(i) if i + 1 < argv.len() => argv[i + 1] = value.to_string(),
        _ => argv.extend([flag.to_string(), value.to_string()]),
    }
}

fn strip_config(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--config" {
            skip = true;
        } else if !a.starts_with("--config=") {
            out.push(a.clone());
        }
    }
    out
}

/// Runs one stage and writes its manifest; returns the manifest path.
fn run_stage(argv: Vec<String>, config: Option<&Config>) -> Result<PathBuf, Failure> {
    let first = parse(&argv)?;
    let name = first.command.name().to_string();
    let fail = |e: anyhow::Error| (name.clone(), e);
    let merged = match config {
        Some(c) => c.merge(&name, &strip_config(&argv)).map_err(fail)?,
        None => strip_config(&argv),
    };
    let cli = parse(&merged)?;
    let started = now();
    let common = Common {
        seed: cli.seed.unwrap_or(0),
        fold: cli.fold,
        out: cli.out.clone(),
    };
    let out = dispatch(&cli.command, &common, cli.workers).map_err(fail)?;
    let record = || -> Result<PathBuf> {
        let effective: Vec<String> = merged[1..].to_vec();
        let inputs = out.inputs.iter().map(|p| FileRef::of(p)).collect::<Result<Vec<_>>>()?;
        let outputs = out.outputs.iter().map(|p| FileRef::of(p)).collect::<Result<Vec<_>>>()?;
        let path = manifest_path(&out.primary);
        let mut seeds = out.seeds.clone();
        seeds.insert("seed".into(), common.seed);
        let m = RunManifest {
            manifest_version: MANIFEST_VERSION,
            toolkit: format!("gazegoal {}", env!("CARGO_PKG_VERSION")),
            command: name.clone(),
            config_hash: config_hash(&effective),
            argv: effective,
            config_file: config.map(|c| FileRef {
                path: c.path.display().to_string(),
                sha256: c.sha256.clone(),
            }),
            seeds,
            inputs,
            outputs,
            parents: parents_of(&out.inputs)?,
            summary: out.summary.clone(),
            started_at: started,
            finished_at: now(),
        };
        m.write(&path)?;
        Ok(path)
    };
    record().map_err(fail)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
