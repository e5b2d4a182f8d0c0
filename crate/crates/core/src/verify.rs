//! Invariant checks over a loaded model, one line per check.

use serde::Serialize;

use crate::dimension::{perron_measure, spectral_radius_at};
use crate::error::Result;
use crate::ftc::{descendant_checks, representative_checks, Limits};
use crate::geometry::{open_overlap, Similitude};
use crate::index_sets::validate_nested_properties;
use crate::model_io::{parse_model, ModelFile};
use crate::render::{chart_push, conjugation_discrepancy, generate_points, ChartMap};
use crate::report::analyze;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        out.push_str(&format!(
            "{} checks, {} failed\n",
            self.checks.len(),
            self.failures()
        ));
        out
    }

    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub limits: Limits,
    pub tol: f64,
    pub index_depth: usize,
    pub measure_depth: usize,
    pub render_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            limits: Limits::default(),
            tol: 1e-12,
            index_depth: 5,
            measure_depth: 4,
            render_points: 2000,
        }
    }
}

/// Run every check that applies to the model. Errors from the pipeline
/// itself (limits, malformed input) abort; violated invariants are reported.
pub fn verify_model(model: &ModelFile, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut r = VerifyReport { checks: Vec::new() };

    let round_trip = parse_model(&model.render()).map(|m| m == *model);
    r.push(
        "model.round_trip",
        matches!(round_trip, Ok(true)),
        match round_trip {
            Ok(true) => "parse(render(model)) is equal".to_string(),
            Ok(false) => "re-parsed model differs".to_string(),
            Err(e) => e.to_string(),
        },
    );

    let system = model.build_system()?;
    let violations = system.invariance_violations();
    r.push(
        "model.invariance",
        violations.is_empty(),
        violations
            .first()
            .map_or_else(|| "every S_e(Ω_j) ⊆ Ω_i".to_string(), |v| v.to_string()),
    );

    let mut geometry_bad = Vec::new();
    for (e, m) in system.maps().iter().enumerate() {
        if !m.compose(&m.inverse()).is_identity() || !m.inverse().compose(m).is_identity() {
            geometry_bad.push(format!("inverse of {}", system.labels()[e]));
        }
    }
    let images: Vec<_> = (0..system.maps().len())
        .map(|e| system.omegas()[system.edge_to(e)].map(&system.maps()[e]))
        .collect();
    let mut overlaps = 0;
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            let ab = open_overlap(&images[a], &images[b]);
            if ab != open_overlap(&images[b], &images[a]) {
                geometry_bad.push(format!(
                    "overlap asymmetry {}/{}",
                    system.labels()[a],
                    system.labels()[b]
                ));
            }
            overlaps += usize::from(ab && system.edge_from(a) == system.edge_from(b));
        }
    }
    let id = Similitude::identity(system.dim());
    if system
        .maps()
        .iter()
        .any(|m| m.compose(&id) != *m || id.compose(m) != *m)
    {
        geometry_bad.push("identity is not neutral".into());
    }
    r.push(
        "geometry.exact_identities",
        geometry_bad.is_empty(),
        if geometry_bad.is_empty() {
            format!("inverses and identities exact; {overlaps} overlapping first-level pairs")
        } else {
            geometry_bad.join(", ")
        },
    );

    let rule = model.rule();
    let starts: Vec<usize> = (0..system.graph_vertices()).collect();
    let nested = validate_nested_properties(&rule, &system, &starts, opts.index_depth)?;
    r.push(
        "index_sets.nested",
        nested.passed(),
        if nested.passed() {
            format!(
                "{} satisfies (a)-(e) to depth {}, gap bound {}",
                nested.rule, nested.depth, nested.gap_bound
            )
        } else {
            nested.violations.join("; ")
        },
    );

    let analysis = analyze(model, &opts.limits, opts.tol)?;
    let a = &analysis.automaton;
    r.push(
        "ftc.fixpoint",
        true,
        format!(
            "{} types, fixpoint at level {}, {} pruned",
            a.len(),
            a.fixpoint_level,
            a.pruned_types
        ),
    );
    let reps = representative_checks(&system, a)?;
    let bad: Vec<String> = reps
        .iter()
        .filter(|c| !c.agree)
        .map(|c| format!("T{}: {}", c.type_id + 1, c.detail))
        .collect();
    let multi = reps.iter().filter(|c| c.representatives >= 2).count();
    r.push(
        "ftc.representative_independence",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{multi} types with several representatives agree")
        } else {
            bad.join("; ")
        },
    );
    if opts.limits.verify_depth > 0 {
        let desc = descendant_checks(&system, a, opts.limits.verify_depth)?;
        let bad: Vec<String> = desc
            .iter()
            .filter(|c| !c.agree)
            .map(|c| format!("T{}: {}", c.type_id + 1, c.detail))
            .collect();
        r.push(
            "ftc.descendants",
            bad.is_empty(),
            if bad.is_empty() {
                format!("descendants agree to depth {}", opts.limits.verify_depth)
            } else {
                bad.join("; ")
            },
        );
    }
    let mixed = a.types.iter().any(|t| {
        t.representative_neighborhood()
            .members
            .iter()
            .any(|m| m.initial != t.representative.initial)
    });
    r.push(
        "ftc.same_initial_vertex",
        !mixed,
        "neighbors share the initial vertex",
    );

    let d = &analysis.dimension;
    let m = &analysis.matrix;
    r.push(
        "dimension.root",
        (d.lambda_at_alpha - 1.0).abs() <= 1e-9,
        format!(
            "alpha = {:.15}, lambda_alpha - 1 = {:.3e}",
            d.alpha,
            d.lambda_at_alpha - 1.0
        ),
    );
    let (lo, hi) = d.bracket;
    let grid: Vec<f64> = (0..20)
        .map(|k| spectral_radius_at(m, lo + (hi - lo) * k as f64 / 19.0))
        .collect::<Result<_>>()?;
    r.push(
        "dimension.monotone",
        grid.windows(2).all(|w| w[1] < w[0]),
        format!("lambda strictly decreasing on 20 points of [{lo}, {hi}]"),
    );
    let positive = d
        .perron_vector
        .iter()
        .enumerate()
        .all(|(i, &x)| x > 0.0 || d.zero_weight_types.contains(&i));
    r.push(
        "dimension.perron_vector",
        positive && d.perron_vector[0] == 1.0,
        if d.zero_weight_types.is_empty() {
            "strictly positive, a_1 = 1".to_string()
        } else {
            format!(
                "zero weight reported for {:?}",
                d.zero_weight_types
                    .iter()
                    .map(|t| t + 1)
                    .collect::<Vec<_>>()
            )
        },
    );
    let table = perron_measure(&system, a, d, opts.measure_depth, opts.limits.vertex_budget)?;
    let sums_ok = table.level_sums.iter().all(|s| {
        s.iter()
            .zip(&table.root_measures)
            .all(|(x, root)| (x - root).abs() < 1e-10)
    });
    r.push(
        "dimension.measure_additivity",
        table.max_additivity_error < 1e-10 && sums_ok,
        format!(
            "max error {:.3e} to depth {}",
            table.max_additivity_error, opts.measure_depth
        ),
    );

    let diam = system
        .omegas()
        .iter()
        .map(|o| o.diameter_f64())
        .fold(0.0, f64::max);
    let leaves = (opts.render_points as f64).max(2.0);
    let per_vertex = leaves / system.graph_vertices() as f64;
    let shrink = if system.dim() == 1 {
        per_vertex
    } else {
        per_vertex.sqrt()
    };
    let points = generate_points(
        &system,
        diam / shrink,
        opts.render_points.saturating_mul(64).max(1000),
    )?;
    let chart = model.chart();
    match chart_push(&points, chart) {
        Ok(pushed) => {
            let (ok, detail) = match chart {
                ChartMap::Identity => (true, format!("{} points", pushed.len())),
                ChartMap::TorusQuotient => (
                    pushed
                        .iter()
                        .all(|p| p.coords.iter().all(|&x| (0.0..1.0).contains(&x))),
                    format!("{} points in [0,1)^{}", pushed.len(), system.dim()),
                ),
                ChartMap::StereographicSphere => {
                    let worst = pushed
                        .iter()
                        .map(|p| (p.coords.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
                        .fold(0.0, f64::max);
                    let up = pushed
                        .iter()
                        .all(|p| p.coords[p.coords.len() - 1] >= -1e-12);
                    (
                        worst < 1e-12 && up,
                        format!("{} points, max ||p|-1| = {worst:.2e}", pushed.len()),
                    )
                }
            };
            r.push("render.chart", ok, detail);
            if chart == ChartMap::StereographicSphere {
                let disc = conjugation_discrepancy(&system, &points[..points.len().min(1000)]);
                r.push(
                    "render.conjugation",
                    disc < 1e-12,
                    format!("discrepancy {disc:.2e}"),
                );
            }
        }
        Err(e) => r.push("render.chart", false, e.to_string()),
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::preset;

    #[test]
    fn sierpinski_passes_everything() {
        let r = verify_model(&preset("sierpinski").unwrap(), &VerifyOptions::default()).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        assert!(r.checks.iter().any(|c| c.name == "render.conjugation"));
    }

    #[test]
    fn torus_passes_everything() {
        let r = verify_model(&preset("torus_gifs").unwrap(), &VerifyOptions::default()).unwrap();
        assert!(r.passed(), "{}", r.to_text());
    }
}
