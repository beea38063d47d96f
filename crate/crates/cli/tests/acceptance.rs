//! Acceptance run: every criterion is evaluated from the shipped configs and
//! reported as one PASS/FAIL line. Exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;

use indexforms_runner::{run, Assertion, ExperimentConfig, Report};

struct Runs {
    reports: BTreeMap<String, Result<Report, String>>,
}

impl Runs {
    fn get(&mut self, name: &str) -> Result<&Report, String> {
        self.reports
            .entry(name.to_string())
            .or_insert_with(|| {
                let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                    .join("../../configs")
                    .join(format!("{name}.toml"));
                let cfg = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
                run(name, &cfg).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| e.clone())
    }
}

struct Check {
    pass: bool,
    detail: String,
}

fn select<'a>(r: &'a Report, prefix: &str) -> Vec<&'a Assertion> {
    r.assertions
        .iter()
        .filter(|a| a.name.starts_with(prefix))
        .collect()
}

/// All selected assertions pass and there are at least `min` of them.
fn all(r: &Report, prefix: &str, min: usize) -> Check {
    let sel = select(r, prefix);
    let failed: Vec<&&Assertion> = sel.iter().filter(|a| !a.pass).collect();
    let pass = sel.len() >= min && failed.is_empty();
    let label = if prefix.is_empty() {
        "all assertions"
    } else {
        prefix
    };
    let mut detail = format!("{label}: {}/{} pass", sel.len() - failed.len(), sel.len());
    if sel.len() < min {
        detail.push_str(&format!(" (expected at least {min})"));
    }
    if let Some(a) = failed.first() {
        detail.push_str(&format!(
            "; first failure `{}` lhs {:e} rhs {:e} tol {:e}",
            a.name, a.lhs, a.rhs, a.tol
        ));
    }
    Check { pass, detail }
}

fn combine(checks: Vec<Check>) -> Check {
    Check {
        pass: checks.iter().all(|c| c.pass),
        detail: checks
            .into_iter()
            .map(|c| c.detail)
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

fn criterion(runs: &mut Runs, k: usize) -> Result<Check, String> {
    Ok(match k {
        1 => {
            let r = runs.get("eta")?;
            let mut c = all(r, "heat-trace eta", 8);
            let fast = r.runtime_ms < 60_000;
            c.detail.push_str(&format!("; runtime {} ms", r.runtime_ms));
            c.pass &= fast;
            c
        }
        2 => all(runs.get("relative-eta")?, "additivity", 50),
        3 => all(runs.get("theorem1-deg0")?, "trace against SVD index", 20),
        4 => all(
            runs.get("aps-index")?,
            "Calderon trace against solution count",
            20,
        ),
        5 => {
            let a = all(runs.get("relative-eta")?, "relative eta form is closed", 1);
            let b = all(
                runs.get("transgression")?,
                "relative Chern form is closed",
                1,
            );
            let mut c = combine(vec![a, b]);
            c.detail
                .push_str(" (defects at roundoff level count as closed)");
            c
        }
        6 => {
            let r = runs.get("transgression")?;
            combine(vec![
                all(r, "transgression at", 10),
                all(r, "leading small-time exponent", 1),
            ])
        }
        7 => {
            let r = runs.get("time-limits")?;
            combine(vec![all(r, "zero-time limit", 1), all(r, "large-time", 2)])
        }
        8 => {
            let r = runs.get("theorem1-deg2")?;
            let mut c = all(r, "integrated degree-2", 1);
            if let Some(a) = select(r, "integrated degree-2").first() {
                c.pass &= a.lhs.round() == a.rhs.round();
                c.detail.push_str(&format!(
                    "; value {:.6} against lattice {:.6}",
                    a.lhs, a.rhs
                ));
            }
            c
        }
        9 => {
            let a = all(runs.get("theorem2-deg0")?, "relative pseudo-trace", 10);
            let b = all(runs.get("theorem2-deg2")?, "degree-", 1);
            combine(vec![a, b])
        }
        10 => {
            let r = runs.get("residue")?;
            combine(vec![
                all(r, "regularized trace of the identity", 1),
                all(r, "leading heat coefficient", 1),
                all(r, "residue of", 2),
            ])
        }
        11 => {
            let r = runs.get("schatten")?;
            let mut c = combine(vec![
                all(r, "degree-0 part", 2),
                all(r, "integrated degree-2", 1),
            ]);
            if let Some(a) = select(r, "integrated degree-2").first() {
                c.pass &= a.lhs.round() == a.rhs.round();
            }
            c
        }
        12 => all(runs.get("commutator-defect")?, "", 5),
        _ => unreachable!(),
    })
}

fn main() {
    let mut runs = Runs {
        reports: BTreeMap::new(),
    };
    let mut failures = 0;
    for k in 1..=12 {
        let (pass, detail) = match criterion(&mut runs, k) {
            Ok(c) => (c.pass, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {k:>2}: {}  {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{}/12 criteria pass", 12 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
