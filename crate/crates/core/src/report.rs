//! The end-to-end pipeline and its serializable reports.

use serde::Serialize;

use crate::dimension::{
    assemble_matrix, solve_dimension, spectral_radius_at, DimensionResult, MeasureTable,
    WeightedIncidenceMatrix,
};
use crate::error::Result;
use crate::ftc::{explore, Limits, System, TypeAutomaton};
use crate::model_io::ModelFile;

/// Everything `analyze` computes for a model.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub system: System,
    pub automaton: TypeAutomaton,
    pub matrix: WeightedIncidenceMatrix,
    pub dimension: DimensionResult,
}

pub fn explore_model(model: &ModelFile, limits: &Limits) -> Result<(System, TypeAutomaton)> {
    let system = model.build_system()?;
    let automaton = explore(&system, &model.rule(), limits)?;
    Ok((system, automaton))
}

pub fn analyze(model: &ModelFile, limits: &Limits, tol: f64) -> Result<Analysis> {
    let (system, automaton) = explore_model(model, limits)?;
    let matrix = assemble_matrix(&automaton);
    let dimension = solve_dimension(&matrix, model.space_dim, tol)?;
    Ok(Analysis {
        system,
        automaton,
        matrix,
        dimension,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeReport {
    pub target: usize,
    pub ratio: String,
    pub word: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeReport {
    /// 1-based.
    pub id: usize,
    pub representative: String,
    pub level: usize,
    pub initial: usize,
    pub terminal: usize,
    pub neighborhood_size: usize,
    pub production: String,
    pub edges: Vec<EdgeReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AutomatonReport {
    pub index_rule: String,
    pub types: usize,
    pub root_types: usize,
    pub fixpoint_level: usize,
    pub pruned_types: usize,
    pub vertices_generated: usize,
    pub type_list: Vec<TypeReport>,
}

impl AutomatonReport {
    /// Productions list targets in type order; ratios are shown unless all
    /// edges share one ratio.
    pub fn new(system: &System, a: &TypeAutomaton) -> AutomatonReport {
        let mut all = a.types.iter().flat_map(|t| &t.edges).map(|e| &e.ratio);
        let common = all.next().is_none_or(|first| all.all(|r| r == first));
        let type_list = a
            .types
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let edges: Vec<EdgeReport> = t
                    .edges
                    .iter()
                    .map(|e| EdgeReport {
                        target: e.target + 1,
                        ratio: e.ratio.to_string(),
                        word: system.label(&e.word),
                    })
                    .collect();
                let production = if edges.is_empty() {
                    "0".to_string()
                } else {
                    let mut terms: Vec<(usize, &str)> =
                        edges.iter().map(|e| (e.target, e.ratio.as_str())).collect();
                    terms.sort();
                    terms
                        .iter()
                        .map(|(t, r)| {
                            if common {
                                format!("T{t}")
                            } else {
                                format!("T{t}({r})")
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(" + ")
                };
                let v = &t.representative;
                TypeReport {
                    id: i + 1,
                    representative: if v.word.is_empty() {
                        "root".into()
                    } else {
                        system.label(&v.word)
                    },
                    level: v.level,
                    initial: v.initial + 1,
                    terminal: v.terminal + 1,
                    neighborhood_size: t.neighborhood_size,
                    production: format!("T{} -> {production}", i + 1),
                    edges,
                }
            })
            .collect();
        AutomatonReport {
            index_rule: a.rule.describe(),
            types: a.len(),
            root_types: a.roots,
            fixpoint_level: a.fixpoint_level,
            pruned_types: a.pruned_types,
            vertices_generated: a.vertices_generated,
            type_list,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "types: {}\nindex rule: {}\nfixpoint level: {}\npruned types: {}\n",
            self.types, self.index_rule, self.fixpoint_level, self.pruned_types
        );
        for t in &self.type_list {
            out.push_str(&format!(
                "  {}    [rep {}, level {}, {} neighbors]\n",
                t.production, t.representative, t.level, t.neighborhood_size
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub alpha: f64,
    pub lambda_at_alpha: f64,
    pub lambda_at_zero: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub perron_vector: Vec<f64>,
    pub zero_weight_types: Vec<usize>,
}

impl DimensionReport {
    pub fn new(matrix: &WeightedIncidenceMatrix, d: &DimensionResult) -> Result<DimensionReport> {
        Ok(DimensionReport {
            alpha: d.alpha,
            lambda_at_alpha: d.lambda_at_alpha,
            lambda_at_zero: spectral_radius_at(matrix, 0.0)?,
            bracket: d.bracket,
            tol: d.tol,
            perron_vector: d.perron_vector.clone(),
            zero_weight_types: d.zero_weight_types.iter().map(|t| t + 1).collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "alpha: {:.15}\nlambda_0: {:.15}\nlambda_alpha: {:.15}\n",
            self.alpha, self.lambda_at_zero, self.lambda_at_alpha
        );
        if !self.zero_weight_types.is_empty() {
            let ids: Vec<String> = self
                .zero_weight_types
                .iter()
                .map(|t| format!("T{t}"))
                .collect();
            out.push_str(&format!("zero Perron weight: {}\n", ids.join(", ")));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub model: Option<String>,
    pub kind: String,
    pub field: String,
    pub automaton: AutomatonReport,
    /// Symbolic entries, `a` standing for the exponent.
    pub matrix: Vec<Vec<String>>,
    pub dimension: DimensionReport,
}

impl AnalyzeReport {
    pub fn new(model: &ModelFile, analysis: &Analysis) -> Result<AnalyzeReport> {
        let m = &analysis.matrix;
        Ok(AnalyzeReport {
            model: model.name.clone(),
            kind: model.kind().into(),
            field: model.field.to_string(),
            automaton: AutomatonReport::new(&analysis.system, &analysis.automaton),
            matrix: (0..m.q)
                .map(|i| (0..m.q).map(|j| m.symbolic(i, j)).collect())
                .collect(),
            dimension: DimensionReport::new(m, &analysis.dimension)?,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(name) = &self.model {
            out.push_str(&format!("model: {name}\n"));
        }
        out.push_str(&format!("kind: {}\nfield: {}\n", self.kind, self.field));
        out.push_str(&self.automaton.to_text());
        out.push_str(&matrix_text(&self.matrix));
        out.push_str(&self.dimension.to_text());
        out
    }
}

/// One row per line, entries separated by `|`.
pub fn matrix_text(symbolic: &[Vec<String>]) -> String {
    let mut out = String::from("matrix:\n");
    for row in symbolic {
        out.push_str("  ");
        out.push_str(&row.join(" | "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureRow {
    pub word: String,
    /// 1-based.
    pub type_id: usize,
    pub measure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    pub alpha: f64,
    pub depth: usize,
    pub max_additivity_error: f64,
    pub root_measures: Vec<f64>,
    pub level_sums: Vec<Vec<f64>>,
    pub excluded_types: Vec<usize>,
    pub levels: Vec<Vec<MeasureRow>>,
}

impl MeasureReport {
    pub fn new(table: &MeasureTable) -> MeasureReport {
        MeasureReport {
            alpha: table.alpha,
            depth: table.levels.len().saturating_sub(1),
            max_additivity_error: table.max_additivity_error,
            root_measures: table.root_measures.clone(),
            level_sums: table.level_sums.clone(),
            excluded_types: table.excluded_types.iter().map(|t| t + 1).collect(),
            levels: table
                .levels
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|e| MeasureRow {
                            word: e.word.clone(),
                            type_id: e.type_id + 1,
                            measure: e.measure,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "alpha: {:.15}\ndepth: {}\nmax additivity error: {:.3e}\n",
            self.alpha, self.depth, self.max_additivity_error
        );
        for (k, level) in self.levels.iter().enumerate() {
            let sums: Vec<String> = self.level_sums[k]
                .iter()
                .map(|s| format!("{s:.15}"))
                .collect();
            out.push_str(&format!(
                "level {k}: {} vertices, sums {}\n",
                level.len(),
                sums.join(", ")
            ));
            for row in level {
                let word = if row.word.is_empty() {
                    "root"
                } else {
                    &row.word
                };
                out.push_str(&format!(
                    "  {word}  T{}  {:.15e}\n",
                    row.type_id, row.measure
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::preset;

    #[test]
    fn analyze_text_is_deterministic() {
        let m = preset("sierpinski").unwrap();
        let a = analyze(&m, &Limits::default(), 1e-12).unwrap();
        let r = AnalyzeReport::new(&m, &a).unwrap();
        let text = r.to_text();
        assert!(text.contains("types: 1\n"), "{text}");
        assert!(text.contains("alpha: 1.584962500721156"), "{text}");
        assert!(text.contains("T1 -> T1 + T1 + T1"), "{text}");
        let again =
            AnalyzeReport::new(&m, &analyze(&m, &Limits::default(), 1e-12).unwrap()).unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}
