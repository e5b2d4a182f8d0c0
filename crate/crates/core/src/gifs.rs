//! Graph-directed systems: edges carry similitudes, graph vertices carry
//! invariant regions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ftc::{explore, InvarianceViolation, Limits, System, TypeAutomaton};
use crate::geometry::{ConvexPolygon, Similitude};
use crate::index_sets::IndexSetRule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GifsEdge {
    pub id: String,
    /// 0-based initial vertex `i`; the map sends `Ω_to` into `Ω_from`.
    pub from: usize,
    pub to: usize,
    pub map: Similitude,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GifsModel {
    pub t: usize,
    /// In list order, which is also the lexicographic order of symbols.
    pub edges: Vec<GifsEdge>,
    pub omegas: Vec<ConvexPolygon>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub passed: bool,
    pub violations: Vec<InvarianceViolation>,
}

impl GifsModel {
    pub fn new(t: usize, edges: Vec<GifsEdge>, omegas: Vec<ConvexPolygon>) -> Result<GifsModel> {
        if t == 0 {
            return Err(Error::model("a graph-directed system needs t ≥ 1"));
        }
        if omegas.len() != t {
            return Err(Error::model(format!(
                "expected {t} regions, got {}",
                omegas.len()
            )));
        }
        for e in &edges {
            if e.from >= t || e.to >= t {
                return Err(Error::model(format!(
                    "edge {} joins a vertex outside 1..{t}",
                    e.id
                )));
            }
        }
        Ok(GifsModel { t, edges, omegas })
    }

    /// Exact check that `S_e(Ω_j) ⊆ Ω_i` for every edge `e ∈ E^{i,j}`.
    pub fn validate_invariance(&self) -> InvarianceReport {
        let mut violations = Vec::new();
        for e in &self.edges {
            let image = self.omegas[e.to].map(&e.map);
            if let Some(w) = self.omegas[e.from].containment_witness(&image) {
                violations.push(InvarianceViolation {
                    edge: e.id.clone(),
                    from: e.from + 1,
                    to: e.to + 1,
                    witness: w.iter().map(|x| x.to_string()).collect(),
                });
            }
        }
        InvarianceReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn system(&self) -> Result<System> {
        System::new(
            self.edges.iter().map(|e| e.map.clone()).collect(),
            self.edges.iter().map(|e| e.from).collect(),
            self.edges.iter().map(|e| e.to).collect(),
            self.omegas.clone(),
            self.edges.iter().map(|e| e.id.clone()).collect(),
        )
    }
}

/// Type exploration with roots `T_1..T_t`; neighbors must share the initial
/// vertex.
pub fn explore_types_gifs(
    model: &GifsModel,
    rule: &IndexSetRule,
    limits: &Limits,
) -> Result<TypeAutomaton> {
    let report = model.validate_invariance();
    if let Some(v) = report.violations.first() {
        return Err(Error::model(v.to_string()));
    }
    explore(&model.system()?, rule, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ftc::representative_checks;
    use crate::scalar::QuadScalar;

    fn q(n: i64, d: i64) -> QuadScalar {
        QuadScalar::ratio(n, d)
    }

    fn edge(id: &str, from: usize, to: usize, r: QuadScalar, t: Vec<QuadScalar>) -> GifsEdge {
        GifsEdge {
            id: id.into(),
            from,
            to,
            map: Similitude::homothety(r, t).unwrap(),
        }
    }

    #[test]
    fn two_disconnected_cantor_components() {
        let unit = ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap();
        let edges = vec![
            edge("a", 0, 0, q(1, 3), vec![q(0, 1)]),
            edge("b", 0, 0, q(1, 3), vec![q(2, 3)]),
            edge("c", 1, 1, q(1, 3), vec![q(0, 1)]),
            edge("d", 1, 1, q(1, 3), vec![q(2, 3)]),
        ];
        let model = GifsModel::new(2, edges, vec![unit.clone(), unit]).unwrap();
        assert!(model.validate_invariance().passed);
        let a = explore_types_gifs(&model, &IndexSetRule::FixedLength, &Limits::default()).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.count_matrix(), vec![vec![2, 0], vec![0, 2]]);
    }

    #[test]
    fn single_vertex_gifs_matches_ifs() {
        let unit = ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap();
        let maps: Vec<Similitude> = [(0, 1), (1, 3), (2, 3), (1, 6)]
            .iter()
            .map(|&(a, b)| Similitude::homothety(q(1, 3), vec![q(a, b)]).unwrap())
            .collect();
        let ifs = System::ifs(maps.clone(), unit.clone()).unwrap();
        let by_ifs = explore(&ifs, &IndexSetRule::FixedLength, &Limits::default()).unwrap();
        let edges = maps
            .into_iter()
            .enumerate()
            .map(|(i, map)| GifsEdge {
                id: format!("e{}", i + 1),
                from: 0,
                to: 0,
                map,
            })
            .collect();
        let model = GifsModel::new(1, edges, vec![unit]).unwrap();
        let by_gifs =
            explore_types_gifs(&model, &IndexSetRule::FixedLength, &Limits::default()).unwrap();
        assert_eq!(by_ifs.len(), by_gifs.len());
        for (a, b) in by_ifs.types.iter().zip(&by_gifs.types) {
            assert_eq!(a.signature, b.signature);
            assert_eq!(a.edges, b.edges);
        }
        assert!(representative_checks(&model.system().unwrap(), &by_gifs)
            .unwrap()
            .iter()
            .all(|c| c.agree));
    }

    #[test]
    fn invariance_failure_has_witness() {
        let unit = ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap();
        let edges = vec![
            edge("a", 0, 0, q(1, 2), vec![q(0, 1)]),
            edge("b", 0, 0, q(1, 2), vec![q(2, 3)]),
        ];
        let model = GifsModel::new(1, edges, vec![unit]).unwrap();
        let report = model.validate_invariance();
        assert!(!report.passed);
        assert_eq!(report.violations[0].edge, "b");
        assert_eq!(report.violations[0].witness, vec!["7/6".to_string()]);
        assert!(GifsModel::new(1, vec![], vec![]).is_err());
    }
}
