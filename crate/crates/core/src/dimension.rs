//! Weighted incidence matrix `A_α`, its spectral radius, the root of
//! `λ_α = 1` and the cylinder measure built from the Perron vector.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ftc::{build_levels, classify_level, System, TypeAutomaton};
use crate::scalar::QuadScalar;

/// Entry `(i, j)` lists each distinct exact ratio with its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedIncidenceMatrix {
    pub q: usize,
    pub entries: Vec<Vec<Vec<(QuadScalar, usize)>>>,
}

pub fn assemble_matrix(automaton: &TypeAutomaton) -> WeightedIncidenceMatrix {
    let q = automaton.len();
    let mut entries = vec![vec![Vec::new(); q]; q];
    for (i, t) in automaton.types.iter().enumerate() {
        let mut acc: Vec<BTreeMap<QuadScalar, usize>> = vec![BTreeMap::new(); q];
        for e in &t.edges {
            *acc[e.target].entry(e.ratio.clone()).or_insert(0) += 1;
        }
        for (j, m) in acc.into_iter().enumerate() {
            // largest ratio first reads naturally in the symbolic form
            entries[i][j] = m.into_iter().rev().collect();
        }
    }
    WeightedIncidenceMatrix { q, entries }
}

impl WeightedIncidenceMatrix {
    /// `A_α(i,j) = Σ m · ρ^α`, each power taken as `exp(α ln ρ)`.
    pub fn evaluate(&self, alpha: f64) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| {
                        cell.iter()
                            .map(|(r, m)| *m as f64 * (alpha * r.to_f64().ln()).exp())
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// The 0/1-style pattern `A_0` with multiplicities.
    pub fn counts(&self) -> Vec<Vec<usize>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|c| c.iter().map(|(_, m)| m).sum()).collect())
            .collect()
    }

    /// Whether every nonzero entry is `m·r^α` for one common ratio `r`.
    pub fn common_ratio(&self) -> Option<QuadScalar> {
        let mut ratios = self.entries.iter().flatten().flatten().map(|(r, _)| r);
        let first = ratios.next()?.clone();
        ratios.all(|r| *r == first).then_some(first)
    }

    pub fn symbolic(&self, i: usize, j: usize) -> String {
        let cell = &self.entries[i][j];
        if cell.is_empty() {
            return "0".into();
        }
        cell.iter()
            .map(|(r, m)| {
                if r.is_one() {
                    format!("{m}")
                } else if *m == 1 {
                    format!("({r})^a")
                } else {
                    format!("{m}*({r})^a")
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// `P A Pᵀ` where type `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> WeightedIncidenceMatrix {
        assert_eq!(perm.len(), self.q, "permutation of the wrong size");
        let mut entries = vec![vec![Vec::new(); self.q]; self.q];
        for i in 0..self.q {
            for j in 0..self.q {
                entries[perm[i]][perm[j]] = self.entries[i][j].clone();
            }
        }
        WeightedIncidenceMatrix { q: self.q, entries }
    }

    /// Long-format CSV `i,j,symbolic,value` (1-based, nonzero entries only).
    pub fn to_csv(&self, alpha: f64) -> String {
        let values = self.evaluate(alpha);
        let mut out = String::from("i,j,symbolic,value\n");
        for (i, row) in values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !self.entries[i][j].is_empty() {
                    out.push_str(&format!(
                        "{},{},{},{v:.17e}\n",
                        i + 1,
                        j + 1,
                        self.symbolic(i, j)
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    PowerIteration,
    Squaring,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralEstimate {
    pub lambda: f64,
    /// Collatz–Wielandt bounds for power iteration, the last two Gelfand
    /// estimates for squaring.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub method: SpectralMethod,
}

const POWER_TOL: f64 = 1e-14;
const POWER_CAP: usize = 20_000;
const SQUARINGS: usize = 60;

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn max_row_sum(a: &[Vec<f64>]) -> f64 {
    a.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max)
}

/// Spectral radius of a nonnegative square matrix.
///
/// Power iteration runs on `A + I`, which has the same Perron root plus one
/// and is aperiodic on every class. If the Collatz–Wielandt bracket does not
/// close (reducible matrices with unequal classes), the radius is taken from
/// `‖(A+I)^(2^k)‖^(2^-k)` with log scaling.
pub fn spectral_radius(a: &[Vec<f64>]) -> Result<SpectralEstimate> {
    let n = a.len();
    if n == 0 {
        return Err(Error::Numerical(
            "spectral radius of an empty matrix".into(),
        ));
    }
    if a.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Numerical(
            "matrix has negative or non-finite entries".into(),
        ));
    }
    let b: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a[i][j] + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut x = vec![1.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 1..=POWER_CAP {
        let y = mat_vec(&b, &x);
        lo = f64::INFINITY;
        hi = 0.0f64;
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= POWER_TOL * hi {
            return Ok(SpectralEstimate {
                lambda: 0.5 * (lo + hi) - 1.0,
                lower: lo - 1.0,
                upper: hi - 1.0,
                iterations: it,
                method: SpectralMethod::PowerIteration,
            });
        }
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y
            .into_iter()
            .map(|v| (v / norm).max(f64::MIN_POSITIVE))
            .collect();
    }
    gelfand(&b).map_err(|e| {
        Error::Numerical(format!(
            "{e}; power iteration stalled with bracket [{}, {}] after {POWER_CAP} steps",
            lo - 1.0,
            hi - 1.0
        ))
    })
}

fn gelfand(b: &[Vec<f64>]) -> std::result::Result<SpectralEstimate, String> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = b.to_vec();
    let mut log_scale = 0.0;
    let mut prev = f64::NAN;
    let mut est = f64::NAN;
    for k in 0..=SQUARINGS {
        let s = max_row_sum(&m);
        if !(s.is_finite() && s > 0.0) {
            return Err(format!("squaring degenerated at step {k}"));
        }
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        log_scale += s.ln();
        // ‖B^(2^k)‖ = exp(log_scale) since ‖m‖ = 1 now
        prev = est;
        est = (log_scale / f64::powi(2.0, k as i32)).exp();
        if k == SQUARINGS {
            break;
        }
        let sq: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|l| m[i][l] * m[l][j]).sum())
                    .collect()
            })
            .collect();
        m = sq;
        log_scale *= 2.0;
    }
    if !est.is_finite() {
        return Err("Gelfand estimate is not finite".into());
    }
    Ok(SpectralEstimate {
        lambda: est - 1.0,
        lower: prev.min(est) - 1.0,
        upper: prev.max(est) - 1.0,
        iterations: SQUARINGS,
        method: SpectralMethod::Squaring,
    })
}

pub fn spectral_radius_at(m: &WeightedIncidenceMatrix, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Numerical(format!(
            "alpha = {alpha} must be nonnegative"
        )));
    }
    Ok(spectral_radius(&m.evaluate(alpha))?.lambda)
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionResult {
    pub alpha: f64,
    pub lambda_at_alpha: f64,
    /// Normalized so that the first root type has weight 1.
    pub perron_vector: Vec<f64>,
    /// Types whose Perron weight vanishes (not reachable at the solved α).
    pub zero_weight_types: Vec<usize>,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub bisection_steps: usize,
}

pub const DEFAULT_TOL: f64 = 1e-12;
const ALPHA_MAX: f64 = 64.0;

/// Bisection for `λ_α = 1` on `[0, α_hi]`, `α_hi` doubling from
/// `space_dim`, until the bracket is narrower than `tol`. The returned root is
/// interpolated within that bracket, or taken from `α = ln λ_0 / ln(1/r)`
/// when every entry has the same ratio `r`.
pub fn solve_dimension(
    m: &WeightedIncidenceMatrix,
    space_dim: usize,
    tol: f64,
) -> Result<DimensionResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Numerical(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let lambda0 = spectral_radius_at(m, 0.0)?;
    if lambda0 < 1.0 - 1e-12 {
        return Err(Error::model(format!(
            "malformed automaton: lambda_0 = {lambda0} < 1"
        )));
    }
    let lam = |a: f64| spectral_radius_at(m, a);
    let mut lo = 0.0;
    let mut hi = space_dim.max(1) as f64;
    while lam(hi)? >= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > ALPHA_MAX {
            return Err(Error::model(format!(
                "degenerate model: lambda_alpha stays at or above 1 up to alpha = {ALPHA_MAX}"
            )));
        }
    }
    let bracket = (lo, hi);
    let mut steps = 0;
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lam(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    // with one common ratio r, λ_α = r^α λ_0 and the root has a closed form
    let homogeneous = m
        .common_ratio()
        .filter(|r| !r.is_one())
        .map(|r| lambda0.ln() / -r.to_f64().ln())
        .filter(|a| *a >= lo - tol && *a <= hi + tol);
    let (l_lo, l_hi) = (lam(lo)?, lam(hi)?);
    let alpha = if let Some(a) = homogeneous {
        a
    } else if l_lo > 1.0 && l_hi <= 1.0 && l_lo > l_hi {
        (lo + (hi - lo) * (l_lo - 1.0) / (l_lo - l_hi)).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    let (perron_vector, zero_weight_types) = perron_vector(m, alpha)?;
    Ok(DimensionResult {
        alpha,
        lambda_at_alpha: lam(alpha)?,
        perron_vector,
        zero_weight_types,
        bracket,
        tol,
        bisection_steps: steps,
    })
}

/// Right Perron vector of `A_α` scaled so that `a_1 = 1`, with the indices of
/// entries that vanish relative to the largest.
pub fn perron_vector(m: &WeightedIncidenceMatrix, alpha: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    let a = m.evaluate(alpha);
    let n = a.len();
    let mut x = vec![1.0; n];
    for _ in 0..POWER_CAP {
        let mut y = mat_vec(&a, &x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        let norm = y.iter().cloned().fold(0.0, f64::max);
        y.iter_mut().for_each(|v| *v /= norm);
        let delta = y
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        x = y;
        if delta <= 1e-16 {
            break;
        }
    }
    let peak = x.iter().cloned().fold(0.0, f64::max);
    let zeros: Vec<usize> = (0..n).filter(|&i| x[i] <= 1e-12 * peak).collect();
    if x[0] <= 1e-12 * peak {
        return Err(Error::Internal(
            "Perron weight of the root type vanishes".into(),
        ));
    }
    let a1 = x[0];
    let v = x
        .iter()
        .enumerate()
        .map(|(i, v)| if zeros.contains(&i) { 0.0 } else { v / a1 })
        .collect();
    Ok((v, zeros))
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureEntry {
    pub word: String,
    pub type_id: usize,
    pub measure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureTable {
    pub alpha: f64,
    /// Alive vertices of each level `0..=depth`.
    pub levels: Vec<Vec<MeasureEntry>>,
    /// Largest `|Σ children μ̂ − μ̂(parent)|` over the reduced graph.
    pub max_additivity_error: f64,
    /// `level_sums[k][r]`: total measure of level `k` below root `r`.
    pub level_sums: Vec<Vec<f64>>,
    pub root_measures: Vec<f64>,
    pub excluded_types: Vec<usize>,
}

/// `μ̂(I_ω) = ρ_ω^α a_{[ω]}` on every vertex of the reduced graph up to
/// `depth`.
pub fn perron_measure(
    system: &System,
    automaton: &TypeAutomaton,
    result: &DimensionResult,
    depth: usize,
    vertex_budget: usize,
) -> Result<MeasureTable> {
    let levels = build_levels(system, &automaton.rule, depth, vertex_budget)?;
    let roots = automaton.roots;
    let mut tables: Vec<Vec<Option<f64>>> = Vec::with_capacity(levels.len());
    let mut out_levels = Vec::with_capacity(levels.len());
    let mut level_sums = Vec::with_capacity(levels.len());
    for level in &levels {
        let types = classify_level(system, automaton, level)?;
        let mut sums = vec![0.0; roots];
        let mut row = Vec::with_capacity(level.len());
        let mut entries = Vec::new();
        for (i, (v, t)) in level.vertices.iter().zip(&types).enumerate() {
            let alive_parent = match &level.parent_edges[i] {
                None => true,
                Some(e) => tables.last().is_some_and(|prev| prev[e.parent].is_some()),
            };
            match (t, alive_parent) {
                (Some(t), true) => {
                    let mu = (result.alpha * v.map.ratio().to_f64().ln()).exp()
                        * result.perron_vector[*t];
                    sums[v.initial] += mu;
                    row.push(Some(mu));
                    entries.push(MeasureEntry {
                        word: system.label(&v.word),
                        type_id: *t,
                        measure: mu,
                    });
                }
                _ => row.push(None),
            }
        }
        tables.push(row);
        out_levels.push(entries);
        level_sums.push(sums);
    }
    let mut max_err = 0.0f64;
    for k in 0..depth {
        let mut child_sum = vec![0.0; levels[k].len()];
        for (i, e) in levels[k + 1].parent_edges.iter().enumerate() {
            if let (Some(e), Some(mu)) = (e, tables[k + 1][i]) {
                child_sum[e.parent] += mu;
            }
        }
        for (i, mu) in tables[k].iter().enumerate() {
            if let Some(mu) = mu {
                max_err = max_err.max((child_sum[i] - mu).abs());
            }
        }
    }
    Ok(MeasureTable {
        alpha: result.alpha,
        levels: out_levels,
        max_additivity_error: max_err,
        level_sums,
        root_measures: (0..roots).map(|r| result.perron_vector[r]).collect(),
        excluded_types: result.zero_weight_types.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ftc::{explore, Limits};
    use crate::geometry::{ConvexPolygon, Similitude};
    use crate::index_sets::IndexSetRule;
    use crate::model_io::preset;

    fn q(n: i64, d: i64) -> QuadScalar {
        QuadScalar::ratio(n, d)
    }

    fn diag(blocks: &[(QuadScalar, usize)]) -> WeightedIncidenceMatrix {
        let n = blocks.len();
        let mut entries = vec![vec![Vec::new(); n]; n];
        for (i, b) in blocks.iter().enumerate() {
            entries[i][i] = vec![b.clone()];
        }
        WeightedIncidenceMatrix { q: n, entries }
    }

    fn automaton_of(name: &str) -> (System, TypeAutomaton) {
        let m = preset(name).unwrap();
        let s = m.build_system().unwrap();
        let a = explore(&s, &m.rule(), &Limits::default()).unwrap();
        (s, a)
    }

    #[test]
    fn gasket_matrix_and_dimension() {
        let (s, a) = automaton_of("sierpinski");
        let m = assemble_matrix(&a);
        assert_eq!(m.entries, vec![vec![vec![(q(1, 2), 3)]]]);
        assert!((spectral_radius_at(&m, 1.0).unwrap() - 1.5).abs() < 1e-14);
        let r = solve_dimension(&m, 2, DEFAULT_TOL).unwrap();
        assert!((r.alpha - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert!((r.lambda_at_alpha - 1.0).abs() < 1e-11);
        assert_eq!(r.perron_vector, vec![1.0]);
        let t = perron_measure(&s, &a, &r, 3, 10_000).unwrap();
        assert_eq!(t.levels[0][0].measure, 1.0);
        for e in &t.levels[1] {
            assert!((e.measure - 1.0 / 3.0).abs() < 1e-12);
        }
        for sums in &t.level_sums {
            assert!((sums[0] - 1.0).abs() < 1e-12);
        }
        assert!(t.max_additivity_error < 1e-12);
        assert_eq!(m.symbolic(0, 0), "3*(1/2)^a");
        assert!(m
            .to_csv(r.alpha)
            .starts_with("i,j,symbolic,value\n1,1,3*(1/2)^a,"));
    }

    #[test]
    fn halves_of_the_line() {
        let maps = vec![
            Similitude::homothety(q(1, 2), vec![q(0, 1)]).unwrap(),
            Similitude::homothety(q(1, 2), vec![q(1, 2)]).unwrap(),
        ];
        let s = System::ifs(maps, ConvexPolygon::interval(q(0, 1), q(1, 1)).unwrap()).unwrap();
        let a = explore(&s, &IndexSetRule::FixedLength, &Limits::default()).unwrap();
        let r = solve_dimension(&assemble_matrix(&a), 1, DEFAULT_TOL).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reducible_block_diagonal() {
        let m = diag(&[(q(1, 2), 3), (q(1, 3), 2)]);
        let est = spectral_radius(&m.evaluate(1.0)).unwrap();
        assert!((est.lambda - 1.5).abs() < 1e-12 * 1.5, "{est:?}");
        let r = solve_dimension(&m, 2, DEFAULT_TOL).unwrap();
        assert!((r.alpha - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.zero_weight_types, vec![1]);
        assert_eq!(r.perron_vector[1], 0.0);
        // equal blocks converge by plain power iteration
        let est = spectral_radius(&diag(&[(q(1, 3), 2), (q(1, 3), 2)]).evaluate(0.5)).unwrap();
        assert_eq!(est.method, SpectralMethod::PowerIteration);
        assert!((est.lambda - 2.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn squaring_fallback_matches_power_iteration() {
        let a = vec![
            vec![0.0, 2.0, 1.0],
            vec![1.0, 0.0, 0.5],
            vec![0.25, 1.0, 1.0],
        ];
        let p = spectral_radius(&a).unwrap();
        let b: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| a[i][j] + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let g = gelfand(&b).unwrap();
        assert!(
            (p.lambda - g.lambda).abs() < 1e-12 * p.lambda,
            "{p:?} {g:?}"
        );
    }

    #[test]
    fn rejects_subcritical_and_degenerate() {
        // a single map: λ_0 = 1 and the attractor is a point
        let m = diag(&[(q(1, 2), 1)]);
        assert!(solve_dimension(&m, 1, DEFAULT_TOL).unwrap().alpha < 1e-12);
        let stuck = diag(&[(q(1, 1), 2)]);
        let e = solve_dimension(&stuck, 1, DEFAULT_TOL).unwrap_err();
        assert!(e.to_string().contains("degenerate"), "{e}");
        let childless = WeightedIncidenceMatrix {
            q: 1,
            entries: vec![vec![vec![]]],
        };
        let e = solve_dimension(&childless, 1, DEFAULT_TOL).unwrap_err();
        assert!(e.to_string().contains("lambda_0"), "{e}");
        assert!(spectral_radius_at(&m, -1.0).is_err());
    }

    #[test]
    fn torus_radius_and_dimension() {
        let (s, a) = automaton_of("torus_gifs");
        let m = assemble_matrix(&a);
        assert_eq!(m.common_ratio(), Some(q(1, 2)));
        let lambda0 = spectral_radius_at(&m, 0.0).unwrap();
        assert!((lambda0 - (2.0 + 2f64.sqrt())).abs() < 1e-10);
        let r = solve_dimension(&m, 2, DEFAULT_TOL).unwrap();
        assert!((r.alpha - (2.0 + 2f64.sqrt()).ln() / 2f64.ln()).abs() < 1e-9);
        assert!(r.perron_vector.iter().all(|&x| x > 0.0));
        let t = perron_measure(&s, &a, &r, 4, 100_000).unwrap();
        assert!(t.max_additivity_error < 1e-10);
        for sums in &t.level_sums {
            for (root, total) in sums.iter().enumerate() {
                assert!((total - t.root_measures[root]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn permutation_invariance_and_monotonicity() {
        let (_, a) = automaton_of("torus_gifs");
        let m = assemble_matrix(&a);
        let base = solve_dimension(&m, 2, DEFAULT_TOL).unwrap();
        let n = m.q;
        let perm: Vec<usize> = (0..n).map(|i| (i * 3 + 1) % n).collect();
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let permuted = solve_dimension(&m.permute(&perm), 2, DEFAULT_TOL).unwrap();
        assert!((base.alpha - permuted.alpha).abs() < 1e-12);
        let (lo, hi) = base.bracket;
        let lams: Vec<f64> = (0..20)
            .map(|k| spectral_radius_at(&m, lo + (hi - lo) * k as f64 / 19.0).unwrap())
            .collect();
        assert!(lams.windows(2).all(|w| w[1] < w[0]));
    }
}
