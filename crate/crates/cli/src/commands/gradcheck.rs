use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use synacc::seed::derive_seed;
use synacc::toygan::{default_suite, GradCheck};

use super::Global;
use crate::manifest::{report_json, RunManifest};
use crate::output::write_atomic;
use crate::NumericalFailure;

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcheckArgs {
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Serialize)]
struct GradcheckReport<'a> {
    max_rel_error: f64,
    passed: bool,
    checks: &'a [GradCheck],
}

pub fn run(g: &Global, args: &GradcheckArgs) -> Result<()> {
    if args.tolerance.is_nan() || args.tolerance <= 0.0 {
        bail!("tolerance must be positive");
    }
    let seed = derive_seed(g.seed, "gradcheck");
    let mut manifest = RunManifest::new("gradcheck", g.seed).with_config(args)?;
    manifest.seed("gradcheck", seed);
    let checks = default_suite(seed)?;
    let max = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    for c in &checks {
        let sizes: Vec<String> = c.sizes.iter().map(usize::to_string).collect();
        println!(
            "{:<12} {:<5} checked {:>5} skipped {:>4} max rel error {:.3e}",
            sizes.join("-"),
            format!("{:?}", c.activation).to_lowercase(),
            c.checked,
            c.skipped,
            c.max_rel_error
        );
    }
    println!("max relative error: {max:.3e}");
    let passed = max <= args.tolerance;
    if let Some(out) = &g.out {
        let report = GradcheckReport {
            max_rel_error: max,
            passed,
            checks: &checks,
        };
        write_atomic(out, &report_json(&manifest, &report)?)?;
    }
    if !passed {
        return Err(NumericalFailure(format!("max relative error {max:e} exceeds {:e}", args.tolerance)).into());
    }
    Ok(())
}
