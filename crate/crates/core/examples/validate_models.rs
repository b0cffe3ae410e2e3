//! Check every bundled model file against the standing hypotheses.

use agepop::io::load_model;
use agepop::model::{validate, CheckStatus, ProbeGrid};

fn main() -> anyhow::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/models");
    let mut paths: Vec<_> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let spec = load_model(&path)?;
        let report = validate(&spec, &ProbeGrid::default())?;
        println!("{} ({})", path.file_name().unwrap().to_string_lossy(), if report.passed() { "ok" } else { "FAILED" });
        for c in report.checks.iter().filter(|c| c.status != CheckStatus::Pass) {
            println!("  {:<22} {:?} {}", c.name, c.status, c.detail);
        }
    }
    Ok(())
}
