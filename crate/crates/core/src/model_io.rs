//! Model files and built-in presets.
//!
//! A model is a JSON document. Scalars are strings in the syntax accepted by
//! [`QuadScalar::parse`]; vertices and graph-directed vertex indices are
//! 1-based in the file.
//!
//! ```json
//! {
//!   "name": "sierpinski",
//!   "field": {"d": "rational"},
//!   "space_dim": 2,
//!   "kind": "ifs",
//!   "maps": [{"ratio": "1/2", "translation": ["0", "1/2"]}],
//!   "omega": [["-1/2", "0"], ["1/2", "0"], ["0", "1"]],
//!   "index_rule": {"kind": "fixed_length"},
//!   "chart": "sphere"
//! }
//! ```
//!
//! Graph-directed models use `"kind": "gifs"`, `"t"`, `"omegas"` and
//! `"edges"`, each edge carrying `"id"`, `"from"`, `"to"` and the map fields.
//! A map may carry a row-major `"orthogonal"` matrix; the identity is
//! implied otherwise. The index rule may also be
//! `{"kind": "ratio_stopping", "base": "..."}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftc::System;
use crate::geometry::{ConvexPolygon, Similitude};
use crate::gifs::{GifsEdge, GifsModel};
use crate::index_sets::IndexSetRule;
use crate::render::ChartMap;
use crate::scalar::{Field, QuadScalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSystem {
    Ifs {
        maps: Vec<Similitude>,
        omega: ConvexPolygon,
    },
    Gifs(GifsModel),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelFile {
    pub name: Option<String>,
    pub field: Field,
    pub space_dim: usize,
    pub system: ModelSystem,
    pub index_rule: Option<IndexSetRule>,
    pub chart: Option<ChartMap>,
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self.system {
            ModelSystem::Ifs { .. } => "ifs",
            ModelSystem::Gifs(_) => "gifs",
        }
    }

    pub fn build_system(&self) -> Result<System> {
        match &self.system {
            ModelSystem::Ifs { maps, omega } => System::ifs(maps.clone(), omega.clone()),
            ModelSystem::Gifs(g) => g.system(),
        }
    }

    /// The declared rule, or the default for the generator ratios.
    pub fn rule(&self) -> IndexSetRule {
        self.index_rule.clone().unwrap_or_else(|| {
            let ratios: Vec<QuadScalar> = match &self.system {
                ModelSystem::Ifs { maps, .. } => maps.iter().map(|m| m.ratio().clone()).collect(),
                ModelSystem::Gifs(g) => g.edges.iter().map(|e| e.map.ratio().clone()).collect(),
            };
            IndexSetRule::default_for(&ratios)
        })
    }

    pub fn chart(&self) -> ChartMap {
        self.chart.unwrap_or(ChartMap::Identity)
    }

    pub fn map_count(&self) -> usize {
        match &self.system {
            ModelSystem::Ifs { maps, .. } => maps.len(),
            ModelSystem::Gifs(g) => g.edges.len(),
        }
    }

    pub fn render(&self) -> String {
        let field = RawField {
            d: match self.field {
                Field::Rational => serde_json::Value::from("rational"),
                Field::Quadratic(d) => serde_json::Value::from(d),
            },
        };
        let mut raw = RawModel {
            name: self.name.clone(),
            field,
            space_dim: self.space_dim,
            kind: self.kind().into(),
            maps: None,
            omega: None,
            t: None,
            edges: None,
            omegas: None,
            index_rule: self.index_rule.as_ref().map(|r| match r {
                IndexSetRule::FixedLength => RawRule::FixedLength,
                IndexSetRule::RatioStopping(b) => RawRule::RatioStopping {
                    base: b.to_string(),
                },
            }),
            chart: self.chart.map(|c| chart_name(c).to_string()),
        };
        match &self.system {
            ModelSystem::Ifs { maps, omega } => {
                raw.maps = Some(maps.iter().map(raw_map).collect());
                raw.omega = Some(raw_polygon(omega));
            }
            ModelSystem::Gifs(g) => {
                raw.t = Some(g.t);
                raw.omegas = Some(g.omegas.iter().map(raw_polygon).collect());
                raw.edges = Some(
                    g.edges
                        .iter()
                        .map(|e| RawEdge {
                            id: e.id.clone(),
                            from: e.from + 1,
                            to: e.to + 1,
                            map: raw_map(&e.map),
                        })
                        .collect(),
                );
            }
        }
        let mut text = serde_json::to_string_pretty(&raw).expect("model serializes");
        text.push('\n');
        text
    }
}

fn chart_name(c: ChartMap) -> &'static str {
    match c {
        ChartMap::Identity => "identity",
        ChartMap::StereographicSphere => "sphere",
        ChartMap::TorusQuotient => "torus",
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    field: RawField,
    space_dim: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    maps: Option<Vec<RawMap>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<RawEdge>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omegas: Option<Vec<Vec<Vec<String>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index_rule: Option<RawRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chart: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    d: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    ratio: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orthogonal: Option<Vec<Vec<String>>>,
    translation: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    id: String,
    from: usize,
    to: usize,
    #[serde(flatten)]
    map: RawMap,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawRule {
    FixedLength,
    RatioStopping { base: String },
}

fn raw_map(m: &Similitude) -> RawMap {
    let n = m.dim();
    RawMap {
        ratio: m.ratio().to_string(),
        orthogonal: (m.orthogonal() != Similitude::identity(n).orthogonal()).then(|| {
            m.orthogonal()
                .chunks(n)
                .map(|row| row.iter().map(|x| x.to_string()).collect())
                .collect()
        }),
        translation: m.translation().iter().map(|x| x.to_string()).collect(),
    }
}

fn raw_polygon(p: &ConvexPolygon) -> Vec<Vec<String>> {
    p.vertices()
        .iter()
        .map(|v| v.iter().map(|x| x.to_string()).collect())
        .collect()
}

/// Collects every field-level problem before failing.
struct Checker {
    field: Field,
    dim: usize,
    problems: Vec<String>,
}

impl Checker {
    fn scalar(&mut self, at: &str, text: &str) -> Option<QuadScalar> {
        match QuadScalar::parse(text, self.field) {
            Ok(x) => Some(x),
            Err(e) => {
                self.problems.push(format!("{at}: {e}"));
                None
            }
        }
    }

    fn vector(&mut self, at: &str, texts: &[String]) -> Option<Vec<QuadScalar>> {
        if texts.len() != self.dim {
            self.problems.push(format!(
                "{at}: expected {} coordinates, got {}",
                self.dim,
                texts.len()
            ));
            return None;
        }
        let parsed: Vec<Option<QuadScalar>> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| self.scalar(&format!("{at}[{i}]"), t))
            .collect();
        parsed.into_iter().collect()
    }

    fn map(&mut self, at: &str, raw: &RawMap) -> Option<Similitude> {
        let ratio = self.scalar(&format!("{at}.ratio"), &raw.ratio);
        if let Some(r) = &ratio {
            if !r.is_positive() || *r >= QuadScalar::one() {
                self.problems.push(format!(
                    "{at}.ratio: non-contractive generator, ratio {r} is not in (0,1)"
                ));
                return None;
            }
        }
        let translation = self.vector(&format!("{at}.translation"), &raw.translation);
        let orthogonal = match &raw.orthogonal {
            None => Some(Similitude::identity(self.dim).orthogonal().to_vec()),
            Some(rows) => {
                if rows.len() != self.dim {
                    self.problems
                        .push(format!("{at}.orthogonal: expected {} rows", self.dim));
                    None
                } else {
                    let parsed: Vec<Option<Vec<QuadScalar>>> = rows
                        .iter()
                        .enumerate()
                        .map(|(i, row)| self.vector(&format!("{at}.orthogonal[{i}]"), row))
                        .collect();
                    parsed
                        .into_iter()
                        .collect::<Option<Vec<_>>>()
                        .map(|rows| rows.concat())
                }
            }
        };
        let (ratio, orthogonal, translation) = (ratio?, orthogonal?, translation?);
        match Similitude::new(ratio, orthogonal, translation) {
            Ok(s) => Some(s),
            Err(e) => {
                self.problems.push(format!("{at}: {e}"));
                None
            }
        }
    }

    fn polygon(&mut self, at: &str, raw: &[Vec<String>]) -> Option<ConvexPolygon> {
        let parsed: Vec<Option<Vec<QuadScalar>>> = raw
            .iter()
            .enumerate()
            .map(|(i, v)| self.vector(&format!("{at}[{i}]"), v))
            .collect();
        let vertices = parsed.into_iter().collect::<Option<Vec<_>>>()?;
        let built = if self.dim == 1 {
            if vertices.len() != 2 {
                Err(Error::model("an interval needs exactly two endpoints"))
            } else {
                ConvexPolygon::interval(vertices[0][0].clone(), vertices[1][0].clone())
            }
        } else {
            ConvexPolygon::new(vertices)
        };
        match built {
            Ok(p) => Some(p),
            Err(e) => {
                self.problems.push(format!("{at}: malformed polygon: {e}"));
                None
            }
        }
    }
}

fn parse_field(raw: &RawField) -> Result<Field> {
    match &raw.d {
        serde_json::Value::String(s) if s == "rational" => Ok(Field::Rational),
        serde_json::Value::Number(n) => match n.as_u64() {
            Some(1) => Ok(Field::Rational),
            Some(d) => Ok(Field::new(Some(d))?),
            None => Err(Error::model(format!(
                "field.d: {n} is not a positive integer"
            ))),
        },
        other => Err(Error::model(format!(
            "field.d: expected a square-free integer or \"rational\", got {other}"
        ))),
    }
}

/// Parse and fully validate a model, including exact invariance of Ω.
pub fn parse_model(text: &str) -> Result<ModelFile> {
    let raw: RawModel = serde_json::from_str(text)
        .map_err(|e| Error::model(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let field = parse_field(&raw.field)?;
    if !(1..=2).contains(&raw.space_dim) {
        return Err(Error::model(format!(
            "space_dim: {} is not 1 or 2",
            raw.space_dim
        )));
    }
    let mut ck = Checker {
        field,
        dim: raw.space_dim,
        problems: Vec::new(),
    };
    let system = match raw.kind.as_str() {
        "ifs" => {
            for (name, present) in [
                ("t", raw.t.is_some()),
                ("edges", raw.edges.is_some()),
                ("omegas", raw.omegas.is_some()),
            ] {
                if present {
                    ck.problems
                        .push(format!("{name}: not allowed for kind \"ifs\""));
                }
            }
            let maps: Vec<Option<Similitude>> = match &raw.maps {
                Some(m) if !m.is_empty() => m
                    .iter()
                    .enumerate()
                    .map(|(i, m)| ck.map(&format!("maps[{i}]"), m))
                    .collect(),
                _ => {
                    ck.problems
                        .push("maps: at least one map is required".into());
                    vec![]
                }
            };
            let omega = match &raw.omega {
                Some(o) => ck.polygon("omega", o),
                None => {
                    ck.problems.push("omega: missing".into());
                    None
                }
            };
            match (maps.into_iter().collect::<Option<Vec<_>>>(), omega) {
                (Some(maps), Some(omega)) if ck.problems.is_empty() => {
                    Some(ModelSystem::Ifs { maps, omega })
                }
                _ => None,
            }
        }
        "gifs" => {
            for (name, present) in [("maps", raw.maps.is_some()), ("omega", raw.omega.is_some())] {
                if present {
                    ck.problems
                        .push(format!("{name}: not allowed for kind \"gifs\""));
                }
            }
            let t = raw.t.unwrap_or_else(|| {
                ck.problems.push("t: missing".into());
                0
            });
            let omegas: Vec<Option<ConvexPolygon>> = raw
                .omegas
                .as_deref()
                .unwrap_or_default()
                .iter()
                .enumerate()
                .map(|(i, o)| ck.polygon(&format!("omegas[{i}]"), o))
                .collect();
            if omegas.len() != t {
                ck.problems.push(format!(
                    "omegas: expected {t} regions, got {}",
                    omegas.len()
                ));
            }
            let mut edges = Vec::new();
            for (i, e) in raw.edges.as_deref().unwrap_or_default().iter().enumerate() {
                for (name, v) in [("from", e.from), ("to", e.to)] {
                    if v == 0 || v > t {
                        ck.problems
                            .push(format!("edges[{i}].{name}: vertex {v} is not in 1..{t}"));
                    }
                }
                if let Some(map) = ck.map(&format!("edges[{i}]"), &e.map) {
                    edges.push(GifsEdge {
                        id: e.id.clone(),
                        from: e.from.wrapping_sub(1),
                        to: e.to.wrapping_sub(1),
                        map,
                    });
                }
            }
            if edges.is_empty() && ck.problems.is_empty() {
                ck.problems
                    .push("edges: at least one edge is required".into());
            }
            match omegas.into_iter().collect::<Option<Vec<_>>>() {
                Some(omegas) if ck.problems.is_empty() => {
                    Some(ModelSystem::Gifs(GifsModel::new(t, edges, omegas)?))
                }
                _ => None,
            }
        }
        other => {
            ck.problems
                .push(format!("kind: {other:?} is neither \"ifs\" nor \"gifs\""));
            None
        }
    };
    let index_rule = match &raw.index_rule {
        None => None,
        Some(RawRule::FixedLength) => Some(IndexSetRule::FixedLength),
        Some(RawRule::RatioStopping { base }) => ck
            .scalar("index_rule.base", base)
            .map(IndexSetRule::RatioStopping),
    };
    if let Some(rule) = &index_rule {
        if let Err(e) = rule.validate() {
            ck.problems.push(format!("index_rule: {e}"));
        }
    }
    let chart = match raw.chart.as_deref().map(str::parse::<ChartMap>) {
        None => None,
        Some(Ok(c)) => Some(c),
        Some(Err(e)) => {
            ck.problems.push(format!("chart: {e}"));
            None
        }
    };
    if !ck.problems.is_empty() {
        return Err(Error::Model(ck.problems.join("; ")));
    }
    let model = ModelFile {
        name: raw.name,
        field,
        space_dim: raw.space_dim,
        system: system
            .ok_or_else(|| Error::Internal("model checks passed without a system".into()))?,
        index_rule,
        chart,
    };
    model.build_system()?;
    Ok(model)
}

pub fn read_model(path: &std::path::Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_model(&text)
}

pub const PRESET_NAMES: [&str; 4] = ["sierpinski", "lau_ngai", "golden_gasket", "torus_gifs"];

fn q(n: i64, d: i64) -> QuadScalar {
    QuadScalar::ratio(n, d)
}

fn homothety(r: &QuadScalar, t: [QuadScalar; 2]) -> Similitude {
    Similitude::homothety(r.clone(), t.to_vec()).expect("preset map is a valid homothety")
}

/// A preset with default parameters (`lau_ngai` uses ρ = r = 1/3).
pub fn preset(name: &str) -> Result<ModelFile> {
    match name {
        "sierpinski" => Ok(sierpinski()),
        "lau_ngai" => lau_ngai(q(1, 3), q(1, 3)),
        "golden_gasket" => Ok(golden_gasket()),
        "torus_gifs" => Ok(torus_gifs()),
        other => Err(Error::model(format!(
            "unknown preset {other:?} (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Sierpinski gasket on Ω = open hull of the fixed points,
/// (-1/2,0), (1/2,0), (0,1).
pub fn sierpinski() -> ModelFile {
    let h = q(1, 2);
    let maps = vec![
        homothety(&h, [q(0, 1), q(1, 2)]),
        homothety(&h, [q(-1, 4), q(0, 1)]),
        homothety(&h, [q(1, 4), q(0, 1)]),
    ];
    let omega = ConvexPolygon::new(vec![
        vec![q(-1, 2), q(0, 1)],
        vec![q(1, 2), q(0, 1)],
        vec![q(0, 1), q(1, 1)],
    ])
    .expect("triangle");
    ModelFile {
        name: Some("sierpinski".into()),
        field: Field::Rational,
        space_dim: 2,
        system: ModelSystem::Ifs { maps, omega },
        index_rule: Some(IndexSetRule::FixedLength),
        chart: Some(ChartMap::StereographicSphere),
    }
}

/// The four-map overlapping family. The maps as given leave the unit square
/// (`f_3` reaches `x = 1 + r/2`), so Ω is the open bounding box of the four
/// fixed points, which every homothety here maps into itself. For
/// ρ = r = 1/3 this is (1/4, 5/4) × (0, 1).
pub fn lau_ngai(rho: QuadScalar, r: QuadScalar) -> Result<ModelFile> {
    let one = QuadScalar::one();
    for (name, v) in [("rho", &rho), ("r", &r)] {
        if !v.is_positive() || *v >= one {
            return Err(Error::model(format!(
                "lau_ngai: {name} = {v} is not in (0,1)"
            )));
        }
    }
    let lhs = rho
        .checked_add(&(&r + &r))?
        .checked_sub(&rho.checked_mul(&r)?)?;
    if lhs > one {
        return Err(Error::model(format!(
            "lau_ngai: constraint rho + 2r - rho*r <= 1 fails ({lhs} > 1)"
        )));
    }
    let field = match (rho.radicand(), r.radicand()) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::model("lau_ngai: rho and r lie in different fields"))
        }
        (Some(d), _) | (_, Some(d)) => Field::Quadratic(d),
        _ => Field::Rational,
    };
    let half = q(1, 2);
    let translations = [
        (rho.clone(), [&half * &rho, q(0, 1)]),
        (r.clone(), [&rho - &(&rho * &r) + &half * &r, q(0, 1)]),
        (r.clone(), [&one - &(&half * &r), q(0, 1)]),
        (r.clone(), [&half * &r, &one - &r]),
    ];
    let maps: Vec<Similitude> = translations
        .iter()
        .map(|(s, t)| homothety(s, t.clone()))
        .collect();
    // fixed point of x ↦ s x + t is t / (1 - s)
    let fixed: Vec<Vec<QuadScalar>> = maps
        .iter()
        .map(|m| {
            m.translation()
                .iter()
                .map(|t| t / &(&one - m.ratio()))
                .collect()
        })
        .collect();
    let lo = |k: usize| fixed.iter().map(|p| p[k].clone()).min().expect("four maps");
    let hi = |k: usize| fixed.iter().map(|p| p[k].clone()).max().expect("four maps");
    let omega = ConvexPolygon::rectangle(lo(0), lo(1), hi(0), hi(1))?;
    Ok(ModelFile {
        name: Some("lau_ngai".into()),
        field,
        space_dim: 2,
        system: ModelSystem::Ifs { maps, omega },
        index_rule: None,
        chart: Some(ChartMap::StereographicSphere),
    })
}

/// `(√5 − 1)/2`.
pub fn golden_ratio_conjugate() -> QuadScalar {
    QuadScalar::new(
        num_rational::BigRational::new((-1).into(), 2.into()),
        num_rational::BigRational::new(1.into(), 2.into()),
        5,
    )
    .expect("sqrt(5) is a valid radical")
}

/// Golden gasket over Q(√5) with Ω the open triangle (0,0), (1,0), (1,1),
/// the hull of the fixed points, under ratio stopping at ρ.
pub fn golden_gasket() -> ModelFile {
    let rho = golden_ratio_conjugate();
    let rho2 = &rho * &rho;
    let maps = vec![
        homothety(&rho, [q(0, 1), q(0, 1)]),
        homothety(&rho, [rho2.clone(), q(0, 1)]),
        homothety(&rho2, [rho.clone(), rho.clone()]),
    ];
    let omega = ConvexPolygon::new(vec![
        vec![q(0, 1), q(0, 1)],
        vec![q(1, 1), q(0, 1)],
        vec![q(1, 1), q(1, 1)],
    ])
    .expect("triangle");
    ModelFile {
        name: Some("golden_gasket".into()),
        field: Field::Quadratic(5),
        space_dim: 2,
        system: ModelSystem::Ifs { maps, omega },
        index_rule: Some(IndexSetRule::RatioStopping(rho)),
        chart: Some(ChartMap::StereographicSphere),
    }
}

/// The two-vertex torus system on Ω₁ = (0,1)×(0,1/2), Ω₂ = (0,1)×(1/2,1).
///
/// `e1..e3` and `e5..e7` are the maps `x/2 + (0|1/4|1/2, 1/4)`, restricted to
/// the lower and the upper half; `e4 = x/2 + (1/4, −1/4)` sends the upper half
/// into the lower one and `e8 = x/2 + (1/4, 3/4)` the lower into the upper.
/// These are the translations for which every `S_e(Ω_j) ⊆ Ω_i` holds exactly.
pub fn torus_gifs() -> ModelFile {
    let h = q(1, 2);
    let quarter = q(1, 4);
    let mut edges = Vec::new();
    let mut push = |id: usize, from: usize, to: usize, t: [QuadScalar; 2]| {
        edges.push(GifsEdge {
            id: format!("e{id}"),
            from,
            to,
            map: homothety(&h, t),
        });
    };
    for (k, x) in [q(0, 1), q(1, 4), q(1, 2)].into_iter().enumerate() {
        push(k + 1, 0, 0, [x, quarter.clone()]);
    }
    push(4, 0, 1, [q(1, 4), q(-1, 4)]);
    for (k, x) in [q(0, 1), q(1, 4), q(1, 2)].into_iter().enumerate() {
        push(k + 5, 1, 1, [x, quarter.clone()]);
    }
    push(8, 1, 0, [q(1, 4), q(3, 4)]);
    let omegas = vec![
        ConvexPolygon::rectangle(q(0, 1), q(0, 1), q(1, 1), q(1, 2)).expect("rectangle"),
        ConvexPolygon::rectangle(q(0, 1), q(1, 2), q(1, 1), q(1, 1)).expect("rectangle"),
    ];
    ModelFile {
        name: Some("torus_gifs".into()),
        field: Field::Rational,
        space_dim: 2,
        system: ModelSystem::Gifs(GifsModel {
            t: 2,
            edges,
            omegas,
        }),
        index_rule: Some(IndexSetRule::FixedLength),
        chart: Some(ChartMap::TorusQuotient),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESET_NAMES {
            let m = preset(name).unwrap();
            m.build_system().unwrap();
            let text = m.render();
            assert_eq!(parse_model(&text).unwrap(), m, "{name}");
        }
    }

    #[test]
    fn sierpinski_text() {
        let m = parse_model(&sierpinski().render()).unwrap();
        assert_eq!(m.map_count(), 3);
        assert_eq!(m.field, Field::Rational);
        assert_eq!(m.kind(), "ifs");
    }

    #[test]
    fn redundant_radical_accepted() {
        let mut v: serde_json::Value = serde_json::from_str(&golden_gasket().render()).unwrap();
        v["index_rule"]["base"] = "1/3 + 0/1*sqrt(5)".into();
        let m = parse_model(&v.to_string()).unwrap();
        assert_eq!(m.rule(), IndexSetRule::RatioStopping(q(1, 3)));
    }

    #[test]
    fn non_contractive_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&sierpinski().render()).unwrap();
        v["maps"][1]["ratio"] = "3/2".into();
        let e = parse_model(&v.to_string()).unwrap_err().to_string();
        assert!(
            e.contains("maps[1].ratio") && e.contains("non-contractive"),
            "{e}"
        );
    }

    #[test]
    fn errors_carry_locations() {
        let e =
            parse_model("{\n  \"field\": {\"d\": \"rational\"},\n  \"space_dim\": 2,\n  oops\n}")
                .unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        let mut v: serde_json::Value = serde_json::from_str(&sierpinski().render()).unwrap();
        v["maps"][0]["translation"][1] = "sqrt(2)".into();
        v["omega"][2] = serde_json::json!(["0", "0"]);
        let e = parse_model(&v.to_string()).unwrap_err().to_string();
        assert!(
            e.contains("maps[0].translation[1]") && e.contains("omega: malformed"),
            "{e}"
        );
        let mut v: serde_json::Value = serde_json::from_str(&sierpinski().render()).unwrap();
        v["maps"][0]["translation"] = serde_json::json!(["0", "3/4"]);
        let e = parse_model(&v.to_string()).unwrap_err();
        assert!(e.to_string().contains("edge f1"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn lau_ngai_constraint() {
        // 1/3 + 2/3 - 1/9 = 8/9
        assert!(lau_ngai(q(1, 3), q(1, 3)).is_ok());
        // 1/2 + 1 - 1/4 = 5/4
        let e = lau_ngai(q(1, 2), q(1, 2)).unwrap_err();
        assert!(e.to_string().contains("5/4"), "{e}");
        assert!(lau_ngai(q(1, 1), q(0, 1)).is_err());
        let m = lau_ngai(q(1, 3), q(1, 3)).unwrap();
        let ModelSystem::Ifs { omega, .. } = &m.system else {
            panic!()
        };
        assert_eq!(
            omega,
            &ConvexPolygon::rectangle(q(1, 4), q(0, 1), q(5, 4), q(1, 1)).unwrap()
        );
    }

    #[test]
    fn torus_preset_shape() {
        let m = torus_gifs();
        assert_eq!(m.map_count(), 8);
        let ModelSystem::Gifs(g) = &m.system else {
            panic!()
        };
        assert!(g.validate_invariance().passed);
        let s = |e: usize| &g.edges[e - 1].map;
        assert_eq!(s(1).compose(s(3)), s(2).compose(s(1)));
        for k in 1..=3 {
            assert_eq!(s(k), s(k + 4));
        }
    }

    #[test]
    fn printed_torus_translations_break_invariance() {
        // e4 = x/2 + (1/4, -1/2) and e5..e7 = x/2 + (t, 0)
        let mut g = match torus_gifs().system {
            ModelSystem::Gifs(g) => g,
            _ => unreachable!(),
        };
        g.edges[3].map = homothety(&q(1, 2), [q(1, 4), q(-1, 2)]);
        for (k, x) in [q(0, 1), q(1, 4), q(1, 2)].into_iter().enumerate() {
            g.edges[4 + k].map = homothety(&q(1, 2), [x, q(0, 1)]);
        }
        let bad: Vec<String> = g
            .validate_invariance()
            .violations
            .into_iter()
            .map(|v| v.edge)
            .collect();
        assert_eq!(bad, ["e4", "e5", "e6", "e7"]);
    }

    #[test]
    fn unknown_preset() {
        assert!(preset("koch").is_err());
    }
}
