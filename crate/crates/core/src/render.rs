//! Attractor point clouds, chart maps and export.
//!
//! Floating point throughout, except [`exact_attractor_samples`] which feeds
//! the exact covering probe.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftc::System;
use crate::geometry::Point;
use crate::index_sets::Alphabet;
use crate::parallel::par_map;
use crate::scalar::QuadScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartMap {
    Identity,
    /// Inverse stereographic projection of the open unit disk onto the upper hemisphere.
    StereographicSphere,
    /// Coordinates reduced mod 1.
    TorusQuotient,
}

impl std::str::FromStr for ChartMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<ChartMap> {
        match s {
            "identity" | "none" => Ok(ChartMap::Identity),
            "sphere" | "stereographic_sphere" => Ok(ChartMap::StereographicSphere),
            "torus" | "torus_quotient" => Ok(ChartMap::TorusQuotient),
            other => Err(Error::model(format!(
                "unknown chart {other:?} (use identity, sphere or torus)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPoint {
    pub coords: Vec<f64>,
    /// Graph vertex the point belongs to.
    pub component: usize,
}

#[derive(Clone)]
struct FloatMap {
    ratio: f64,
    orth: Vec<f64>,
    trans: Vec<f64>,
}

impl FloatMap {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|r| {
                self.ratio * (0..n).map(|c| self.orth[r * n + c] * x[c]).sum::<f64>()
                    + self.trans[r]
            })
            .collect()
    }

    fn compose(&self, g: &FloatMap) -> FloatMap {
        let n = self.trans.len();
        let mut orth = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                orth[r * n + c] = (0..n)
                    .map(|k| self.orth[r * n + k] * g.orth[k * n + c])
                    .sum();
            }
        }
        FloatMap {
            ratio: self.ratio * g.ratio,
            orth,
            trans: self.apply(&g.trans),
        }
    }

    fn identity(n: usize) -> FloatMap {
        let orth = (0..n * n)
            .map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 })
            .collect();
        FloatMap {
            ratio: 1.0,
            orth,
            trans: vec![0.0; n],
        }
    }
}

fn float_maps(system: &System) -> Vec<FloatMap> {
    system
        .maps()
        .iter()
        .map(|m| FloatMap {
            ratio: m.ratio().to_f64(),
            orth: m.orthogonal().iter().map(QuadScalar::to_f64).collect(),
            trans: m.translation().iter().map(QuadScalar::to_f64).collect(),
        })
        .collect()
}

fn bbox_diameter(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

/// One point per leaf of the depth-first expansion that stops once the image
/// of the region's bounding box has diameter at most `max_diameter`. Each
/// point is the image of the vertex mean of the terminal region.
pub fn generate_points(
    system: &System,
    max_diameter: f64,
    budget: usize,
) -> Result<Vec<TaggedPoint>> {
    if max_diameter.is_nan() || max_diameter <= 0.0 {
        return Err(Error::model("max diameter must be positive"));
    }
    let maps = float_maps(system);
    let dim = system.dim();
    let diam: Vec<f64> = system
        .omegas()
        .iter()
        .map(|o| {
            let (lo, hi) = o.bbox_f64();
            bbox_diameter(&lo, &hi)
        })
        .collect();
    let centers: Vec<Vec<f64>> = system
        .omegas()
        .iter()
        .map(|o| o.vertex_mean().iter().map(QuadScalar::to_f64).collect())
        .collect();
    let limit = max_diameter * (1.0 + 1e-12);
    let mut branches: Vec<(usize, Option<usize>)> = Vec::new();
    for (i, &d) in diam.iter().enumerate() {
        if d <= limit {
            branches.push((i, None));
        } else {
            branches.extend(system.successors(i).iter().map(|&e| (i, Some(e))));
        }
    }
    let parts = par_map(&branches, |&(i, first)| -> Result<Vec<TaggedPoint>> {
        let mut out = Vec::new();
        let start = match first {
            None => (FloatMap::identity(dim), i),
            Some(e) => (maps[e].clone(), system.edge_to(e)),
        };
        let mut stack = vec![start];
        while let Some((m, state)) = stack.pop() {
            if m.ratio * diam[state] <= limit {
                if out.len() >= budget {
                    return Err(Error::Resource(format!("more than {budget} points")));
                }
                out.push(TaggedPoint {
                    coords: m.apply(&centers[state]),
                    component: i,
                });
                continue;
            }
            for &e in system.successors(state).iter().rev() {
                stack.push((m.compose(&maps[e]), system.edge_to(e)));
            }
        }
        Ok(out)
    });
    let mut points = Vec::new();
    for part in parts {
        points.extend(part?);
        if points.len() > budget {
            return Err(Error::Resource(format!("more than {budget} points")));
        }
    }
    Ok(points)
}

/// `φ⁻¹(y) = (2y, 1 − |y|²) / (|y|² + 1)`.
pub fn stereographic_inverse(y: &[f64]) -> Vec<f64> {
    let s: f64 = y.iter().map(|v| v * v).sum();
    let mut p: Vec<f64> = y.iter().map(|v| 2.0 * v / (s + 1.0)).collect();
    p.push((1.0 - s) / (s + 1.0));
    p
}

/// `φ(x) = (x_1, …, x_n) / (1 + x_{n+1})`.
pub fn stereographic(x: &[f64]) -> Vec<f64> {
    let (last, head) = x.split_last().expect("nonempty point");
    head.iter().map(|v| v / (1.0 + last)).collect()
}

fn torus_reduce(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartError {
    pub index: usize,
    pub point: Vec<f64>,
}

impl std::fmt::Display for ChartError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "point {} at {:?} lies outside the chart domain",
            self.index, self.point
        )
    }
}

/// Push Euclidean points through a chart. The sphere chart rejects points not
/// strictly inside the unit disk.
pub fn chart_push(
    points: &[TaggedPoint],
    chart: ChartMap,
) -> std::result::Result<Vec<TaggedPoint>, ChartError> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let coords = match chart {
                ChartMap::Identity => p.coords.clone(),
                ChartMap::TorusQuotient => p.coords.iter().map(|&x| torus_reduce(x)).collect(),
                ChartMap::StereographicSphere => {
                    let s: f64 = p.coords.iter().map(|v| v * v).sum();
                    if s.is_nan() || s >= 1.0 {
                        return Err(ChartError {
                            index,
                            point: p.coords.clone(),
                        });
                    }
                    stereographic_inverse(&p.coords)
                }
            };
            Ok(TaggedPoint {
                coords,
                component: p.component,
            })
        })
        .collect()
}

/// Largest discrepancy between `φ⁻¹(f(φ(φ⁻¹ y)))` and `φ⁻¹(f(y))` over the
/// given points and all maps.
pub fn conjugation_discrepancy(system: &System, points: &[TaggedPoint]) -> f64 {
    let maps = float_maps(system);
    let mut worst: f64 = 0.0;
    for p in points {
        let on_sphere = stereographic_inverse(&p.coords);
        for e in system.successors(p.component) {
            let m = &maps[*e];
            let conjugated = stereographic_inverse(&m.apply(&stereographic(&on_sphere)));
            let direct = stereographic_inverse(&m.apply(&p.coords));
            for (a, b) in conjugated.iter().zip(&direct) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// Exact points close to the attractor: the image of an interior point of
/// the terminal region under a random path whose ratio is below `1e-6`.
pub fn exact_attractor_samples(system: &System, samples: usize, seed: u64) -> Vec<(usize, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<Point> = system
        .omegas()
        .iter()
        .map(|o| {
            // off-center so that images avoid the lattice of region boundaries
            let mean = o.vertex_mean();
            let v0 = &o.vertices()[0];
            mean.iter()
                .zip(v0)
                .map(|(m, v)| (QuadScalar::integer(6) * m + v) * QuadScalar::ratio(1, 7))
                .collect()
        })
        .collect();
    let t = system.graph_vertices();
    (0..samples)
        .map(|_| {
            let start = rng.random_range(0..t);
            let mut state = start;
            let mut word = Vec::new();
            let mut ratio = 1.0f64;
            while ratio > 1e-6 && word.len() < 64 {
                let succ = system.successors(state);
                let e = succ[rng.random_range(0..succ.len())];
                word.push(e);
                ratio *= system.ratio(e).to_f64();
                state = system.edge_to(e);
            }
            (start, system.word_map(&word).apply(&bases[state]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Ply,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<ExportFormat> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "ply" => Ok(ExportFormat::Ply),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::model(format!(
                "unknown format {other:?} (use csv, ply or svg)"
            ))),
        }
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// CSV with header `x,y[,z][,component]`; the component column appears when
/// points come from more than one graph vertex.
pub fn to_csv(points: &[TaggedPoint], dim: usize, with_component: bool) -> String {
    let mut s = AXES[..dim.min(3)].join(",");
    if with_component {
        s.push_str(",component");
    }
    s.push('\n');
    for p in points {
        let coords: Vec<String> = p.coords.iter().map(|c| format!("{c}")).collect();
        s.push_str(&coords.join(","));
        if with_component {
            let _ = write!(s, ",{}", p.component + 1);
        }
        s.push('\n');
    }
    s
}

/// ASCII PLY with vertices only; 2D points get `z = 0`.
pub fn to_ply(points: &[TaggedPoint]) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    );
    for p in points {
        let c = |i: usize| p.coords.get(i).copied().unwrap_or(0.0);
        let _ = writeln!(s, "{} {} {}", c(0), c(1), c(2));
    }
    s
}

/// Dots of a fixed radius; the viewBox is the data extent plus a 5% margin.
/// The y axis is flipped so the picture reads like a plot.
pub fn to_svg(points: &[TaggedPoint]) -> Result<String> {
    if points.iter().any(|p| p.coords.len() != 2) {
        return Err(Error::model("svg export needs 2D points"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        x0 = x0.min(p.coords[0]);
        x1 = x1.max(p.coords[0]);
        y0 = y0.min(p.coords[1]);
        y1 = y1.max(p.coords[1]);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let w = (x1 - x0).max(1e-9);
    let h = (y1 - y0).max(1e-9);
    let (mx, my) = (0.05 * w, 0.05 * h);
    let r = 0.002 * w.max(h);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        x0 - mx,
        -(y1 + my),
        w + 2.0 * mx,
        h + 2.0 * my
    );
    let palette = ["#1f4e79", "#b03a2e", "#1e8449", "#7d3c98"];
    for p in points {
        let _ = writeln!(
            s,
            "<circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"{}\"/>",
            p.coords[0],
            -p.coords[1],
            palette[p.component % palette.len()]
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export(
    points: &[TaggedPoint],
    format: ExportFormat,
    with_component: bool,
) -> Result<String> {
    let dim = points.first().map(|p| p.coords.len()).unwrap_or(2);
    match format {
        ExportFormat::Csv => Ok(to_csv(points, dim, with_component)),
        ExportFormat::Ply => Ok(to_ply(points)),
        ExportFormat::Svg => to_svg(points),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexPolygon, Similitude};

    fn tp(x: &[f64]) -> TaggedPoint {
        TaggedPoint {
            coords: x.to_vec(),
            component: 0,
        }
    }

    fn gasket() -> System {
        let q = QuadScalar::ratio;
        let tri = ConvexPolygon::new(vec![
            vec![q(-1, 2), q(0, 1)],
            vec![q(1, 2), q(0, 1)],
            vec![q(0, 1), q(1, 1)],
        ])
        .unwrap();
        let maps = [(0, 1, 1, 2), (-1, 4, 0, 1), (1, 4, 0, 1)]
            .iter()
            .map(|&(a, b, c, d)| Similitude::homothety(q(1, 2), vec![q(a, b), q(c, d)]).unwrap())
            .collect();
        System::ifs(maps, tri).unwrap()
    }

    #[test]
    fn chart_examples() {
        let out = chart_push(
            &[tp(&[0.0, 0.0]), tp(&[0.5, 0.0])],
            ChartMap::StereographicSphere,
        )
        .unwrap();
        assert_eq!(out[0].coords, vec![0.0, 0.0, 1.0]);
        let p = &out[1].coords;
        assert!((p[0] - 0.8).abs() < 1e-15 && p[1] == 0.0 && (p[2] - 0.6).abs() < 1e-15);
        let t = chart_push(&[tp(&[1.25, 0.5])], ChartMap::TorusQuotient).unwrap();
        assert_eq!(t[0].coords, vec![0.25, 0.5]);
        let err = chart_push(
            &[tp(&[0.0, 0.0]), tp(&[1.0, 0.0])],
            ChartMap::StereographicSphere,
        )
        .unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn torus_reduction_is_idempotent_and_half_open() {
        for x in [-1e-20, -0.3, 0.0, 0.999_999_999_999, 3.5, -7.0] {
            let r = torus_reduce(x);
            assert!((0.0..1.0).contains(&r), "{x} -> {r}");
            assert_eq!(torus_reduce(r), r);
        }
    }

    #[test]
    fn stereographic_round_trip() {
        let y = [0.3, -0.45];
        let back = stereographic(&stereographic_inverse(&y));
        assert!((back[0] - y[0]).abs() < 1e-15 && (back[1] - y[1]).abs() < 1e-15);
    }

    #[test]
    fn gasket_point_count() {
        let s = gasket();
        let (lo, hi) = s.omegas()[0].bbox_f64();
        let d = bbox_diameter(&lo, &hi) / 256.0;
        assert_eq!(generate_points(&s, d, 1_000_000).unwrap().len(), 6561);
        assert!(generate_points(&s, d, 100).is_err());
    }

    #[test]
    fn exports() {
        assert_eq!(to_csv(&[], 2, false), "x,y\n");
        let pts = vec![tp(&[0.0, 0.5]), tp(&[0.25, 0.0]), tp(&[-0.25, 0.0])];
        let csv = to_csv(&pts, 2, false);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().nth(1), Some("0,0.5"));
        let ply = to_ply(&pts);
        assert!(ply.contains("element vertex 3\n"));
        assert_eq!(ply.lines().count(), 7 + 3);
        let svg = to_svg(&pts).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(to_svg(&[tp(&[0.0, 0.0, 1.0])]).is_err());
        assert!(to_svg(&[]).unwrap().starts_with("<svg"));
        assert!(to_ply(&[]).contains("element vertex 0\n"));
    }

    #[test]
    fn exact_samples_are_deterministic_and_inside() {
        let s = gasket();
        let a = exact_attractor_samples(&s, 20, 3);
        assert_eq!(a, exact_attractor_samples(&s, 20, 3));
        assert!(a
            .iter()
            .all(|(c, x)| *c == 0 && s.omegas()[0].contains_closed(x)));
    }
}
