use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::experiments::Summary;

/// Prints every summary found one level below `out`; true if all checks passed.
pub fn report(out: &Path) -> Result<bool> {
    let mut paths: Vec<_> = fs::read_dir(out)
        .with_context(|| format!("reading {}", out.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("summary.json"))
        .filter(|p| p.is_file())
        .collect();
    if paths.is_empty() {
        bail!("no summary.json found under {}", out.display());
    }
    paths.sort();
    let mut all_passed = true;
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let summary: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let passed = summary.checks.iter().filter(|c| c.passed).count();
        println!("{}: {passed}/{} checks passed", summary.experiment, summary.checks.len());
        for c in summary.checks.iter().filter(|c| !c.passed) {
            println!("  FAIL {} {}", c.name, c.detail);
        }
        all_passed &= summary.passed();
    }
    Ok(all_passed)
}
