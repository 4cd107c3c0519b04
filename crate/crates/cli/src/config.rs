//! TOML defaults merged into the command line.
//!
//! `[<stage>]` applies to one stage and `[common]` to every stage, the stage
//! section taking precedence. Keys are flag names with `_` or `-`. Flags
//! given on the command line always win.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, CommandFactory};
use sha2::{Digest, Sha256};

use crate::args::Cli;
use crate::error::Usage;

pub struct Config {
    pub path: PathBuf,
    pub sha256: String,
    pub table: toml::Table,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not utf-8", path.display()))?;
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(Config {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            table,
        })
    }

    /// Stage names listed under `[run] stages`.
    pub fn stages(&self) -> Result<Vec<String>> {
        let run = self
            .table
            .get("run")
            .and_then(|v| v.as_table())
            .ok_or_else(|| anyhow!("{}: no [run] section", self.path.display()))?;
        let stages = run
            .get("stages")
            .and_then(|v| v.as_array())
            .ok_or_else(|| anyhow!("{}: [run] needs a stages list", self.path.display()))?;
        stages
            .iter()
            .map(|s| {
                s.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| anyhow!("stage names must be strings"))
            })
            .collect()
    }

    /// `argv` with every flag of `stage` that the config sets and `argv` does not.
    pub fn merge(&self, stage: &str, argv: &[String]) -> Result<Vec<String>> {
        let root = Cli::command();
        let sub = root
            .find_subcommand(stage)
            .ok_or_else(|| anyhow!("unknown stage {stage:?}"))?;
        let flags: Vec<(String, bool)> = root
            .get_arguments()
            .chain(sub.get_arguments())
            .filter_map(|a| {
                let long = a.get_long()?;
                (long != "config").then(|| (long.to_string(), matches!(a.get_action(), ArgAction::SetTrue)))
            })
            .collect();

        let mut out = argv.to_vec();
        for section in [stage, "common"] {
            let Some(values) = self.table.get(section).and_then(|v| v.as_table()) else {
                continue;
            };
            for (key, value) in values {
                let long = key.replace('_', "-");
                let Some((_, switch)) = flags.iter().find(|(f, _)| *f == long) else {
                    if section == stage {
                        bail!(Usage(format!(
                            "{}: [{stage}] has no flag --{long}",
                            self.path.display()
                        )));
                    }
                    continue;
                };
                let flag = format!("--{long}");
                if out.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
                    continue;
                }
                if *switch {
                    match value.as_bool() {
                        Some(true) => out.push(flag),
                        Some(false) => {}
                        None => bail!("{}: {key} must be true or false", self.path.display()),
                    }
                } else {
                    out.push(flag);
                    out.push(scalar(value).with_context(|| format!("{}: {key}", self.path.display()))?);
                }
            }
        }
        Ok(out)
    }
}

fn scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(a) => a.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","),
        other => bail!("unsupported value {other}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> Config {
        Config {
            path: PathBuf::from("test.toml"),
            sha256: String::new(),
            table: toml::from_str(text).unwrap(),
        }
    }

    fn argv(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precedence() {
        let c = config("[common]\nseed = 1\nworkers = 2\n[split]\nseed = 5\ncorpus = \"c.bin\"\n");
        let got = c
            .merge("split", &argv(&["gazegoal", "split", "--workers", "8"]))
            .unwrap();
        assert_eq!(
            got,
            argv(&[
                "gazegoal",
                "split",
                "--workers",
                "8",
                "--corpus",
                "c.bin",
                "--seed",
                "5"
            ])
        );
    }

    #[test]
    fn switches_lists_and_unknown_keys() {
        let c = config(
            "[prompts]\nwith_target = true\n[train]\nfeatures = [\"saccade\", \"linguistic\"]\nfrozen = false\n",
        );
        assert_eq!(
            c.merge("prompts", &argv(&["g", "prompts"])).unwrap(),
            argv(&["g", "prompts", "--with-target"])
        );
        assert_eq!(
            c.merge("train", &argv(&["g", "train"])).unwrap(),
            argv(&["g", "train", "--features", "saccade,linguistic", "--frozen", "false"])
        );
        let bad = config("[split]\nwhich = \"x\"\n");
        assert!(bad.merge("split", &argv(&["g", "split"])).is_err());
        // common keys a stage lacks are skipped
        let common = config("[common]\nwhich = \"rt-profile\"\n");
        assert_eq!(
            common.merge("split", &argv(&["g", "split"])).unwrap(),
            argv(&["g", "split"])
        );
    }

    #[test]
    fn stage_list() {
        let c = config("[run]\nstages = [\"ingest\", \"split\"]\n");
        assert_eq!(c.stages().unwrap(), ["ingest", "split"]);
        assert!(config("").stages().is_err());
    }
}
