//! Rerun a recorded command and compare its outputs bit for bit.

use std::path::{Path, PathBuf};

use clap::Parser;

use super::{execute, manifest_location};
use crate::args::{Cli, ReplayArgs};
use crate::error::{CliError, Result};
use crate::manifest::{FileDigest, RunManifest};

const INPUT_FLAGS: [&str; 3] = ["--input", "--assignments", "--truth"];
const OUTPUT_FLAGS: [&str; 2] = ["--out", "--out-dir"];

fn resolve(cwd: &Path, p: &str) -> String {
    let p = Path::new(p);
    if p.is_absolute() { p.to_path_buf() } else { cwd.join(p) }
        .to_string_lossy()
        .into_owned()
}

/// Makes path flags absolute and optionally redirects outputs into `out_dir`.
fn rewrite(argv: &[String], cwd: &Path, out_dir: Option<&Path>) -> Vec<String> {
    let fix = |flag: &str, value: &str| -> String {
        match (OUTPUT_FLAGS.contains(&flag), out_dir) {
            (true, Some(dir)) if flag == "--out-dir" => dir.to_string_lossy().into_owned(),
            (true, Some(dir)) => {
                let name = Path::new(value).file_name().map(PathBuf::from).unwrap_or_default();
                dir.join(name).to_string_lossy().into_owned()
            }
            _ if OUTPUT_FLAGS.contains(&flag) || INPUT_FLAGS.contains(&flag) => resolve(cwd, value),
            _ => value.to_string(),
        }
    };
    let mut out = Vec::with_capacity(argv.len());
    let mut pending: Option<&str> = None;
    for arg in argv {
        if let Some(flag) = pending.take() {
            out.push(fix(flag, arg));
            continue;
        }
        let is_path = |f: &str| INPUT_FLAGS.contains(&f) || OUTPUT_FLAGS.contains(&f);
        match arg.split_once('=') {
            Some((flag, value)) if is_path(flag) => out.push(format!("{flag}={}", fix(flag, value))),
            _ => {
                if is_path(arg) {
                    pending = Some(arg.as_str());
                }
                out.push(arg.clone());
            }
        }
    }
    out
}

pub fn replay(a: &ReplayArgs) -> Result<()> {
    let old = RunManifest::read(&a.manifest)?;
    for (role, d) in &old.inputs {
        let path = PathBuf::from(resolve(&old.cwd, &d.path.to_string_lossy()));
        let now = FileDigest::of(&path)?;
        if now.sha256 != d.sha256 {
            return Err(CliError::Mismatch(format!(
                "input '{role}' ({}) changed since the run",
                path.display()
            )));
        }
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let argv = rewrite(&old.argv, &old.cwd, a.out_dir.as_deref());
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::Config(format!("recorded arguments no longer parse: {e}")))?;
    let location = manifest_location(&cli.command).ok_or_else(|| {
        CliError::Config(format!("'{}' runs cannot be replayed", cli.command.name()))
    })?;
    execute(&cli.command, &argv)?;
    let new = RunManifest::read(&location)?;

    let mut differing = Vec::new();
    for (role, d) in &old.outputs {
        match new.outputs.get(role) {
            Some(n) if n.sha256 == d.sha256 => {}
            _ => differing.push(role.as_str()),
        }
    }
    if !differing.is_empty() {
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    println!(
        "replayed {}: {} outputs identical",
        old.command,
        old.outputs.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn rewrites_paths() {
        let argv = s(&["hypergcd", "cluster", "--input", "d.tsv", "--out=o/a.tsv", "--k", "3"]);
        assert_eq!(
            rewrite(&argv, Path::new("/w"), None),
            s(&["hypergcd", "cluster", "--input", "/w/d.tsv", "--out=/w/o/a.tsv", "--k", "3"])
        );
        assert_eq!(
            rewrite(&argv, Path::new("/w"), Some(Path::new("/r"))),
            s(&["hypergcd", "cluster", "--input", "/w/d.tsv", "--out=/r/a.tsv", "--k", "3"])
        );
        let argv = s(&["hypergcd", "ablate", "--out-dir", "res"]);
        assert_eq!(
            rewrite(&argv, Path::new("/w"), Some(Path::new("/r"))),
            s(&["hypergcd", "ablate", "--out-dir", "/r"])
        );
    }
}
