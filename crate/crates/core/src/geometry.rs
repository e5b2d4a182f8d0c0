//! Exact similitudes of the line and plane, and open convex regions.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::QuadScalar;

pub type Point = Vec<QuadScalar>;

/// `x ↦ ratio · orthogonal · x + translation` in dimension 1 or 2.
///
/// The orthogonal part is stored row-major. Equality, hashing and ordering are
/// structural on the reduced exact components, so two similitudes compare equal
/// iff they are the same function.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Similitude {
    ratio: QuadScalar,
    orthogonal: Vec<QuadScalar>,
    translation: Point,
}

impl Similitude {
    pub fn new(
        ratio: QuadScalar,
        orthogonal: Vec<QuadScalar>,
        translation: Point,
    ) -> Result<Similitude> {
        let n = translation.len();
        if !(1..=2).contains(&n) {
            return Err(Error::model(format!(
                "space dimension {n} is not supported (use 1 or 2)"
            )));
        }
        if orthogonal.len() != n * n {
            return Err(Error::model(format!(
                "orthogonal part needs {} entries, got {}",
                n * n,
                orthogonal.len()
            )));
        }
        if !ratio.is_positive() {
            return Err(Error::model(format!(
                "similitude ratio {ratio} is not positive"
            )));
        }
        for r in 0..n {
            for c in 0..n {
                let mut dot = QuadScalar::zero();
                for k in 0..n {
                    dot = dot
                        .checked_add(&orthogonal[k * n + r].checked_mul(&orthogonal[k * n + c])?)?;
                }
                let want = if r == c {
                    QuadScalar::one()
                } else {
                    QuadScalar::zero()
                };
                if dot != want {
                    return Err(Error::model("orthogonal part is not an orthogonal matrix"));
                }
            }
        }
        Ok(Similitude {
            ratio,
            orthogonal,
            translation,
        })
    }

    /// `ratio · x + translation`.
    pub fn homothety(ratio: QuadScalar, translation: Point) -> Result<Similitude> {
        let n = translation.len();
        Similitude::new(ratio, identity_matrix(n), translation)
    }

    pub fn identity(n: usize) -> Similitude {
        Similitude {
            ratio: QuadScalar::one(),
            orthogonal: identity_matrix(n),
            translation: vec![QuadScalar::zero(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> &QuadScalar {
        &self.ratio
    }

    pub fn orthogonal(&self) -> &[QuadScalar] {
        &self.orthogonal
    }

    pub fn translation(&self) -> &[QuadScalar] {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        *self == Similitude::identity(self.dim())
    }

    fn orth_apply(&self, x: &[QuadScalar]) -> Point {
        let n = self.dim();
        (0..n)
            .map(|r| {
                (0..n).fold(QuadScalar::zero(), |acc, c| {
                    acc + &self.orthogonal[r * n + c] * &x[c]
                })
            })
            .collect()
    }

    pub fn apply(&self, x: &[QuadScalar]) -> Point {
        self.orth_apply(x)
            .into_iter()
            .zip(&self.translation)
            .map(|(v, t)| &self.ratio * v + t)
            .collect()
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let rho = self.ratio.to_f64();
        (0..n)
            .map(|r| {
                let s: f64 = (0..n)
                    .map(|c| self.orthogonal[r * n + c].to_f64() * x[c])
                    .sum();
                rho * s + self.translation[r].to_f64()
            })
            .collect()
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &Similitude) -> Similitude {
        let n = self.dim();
        let mut orthogonal = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let v = (0..n).fold(QuadScalar::zero(), |acc, k| {
                    acc + &self.orthogonal[r * n + k] * &g.orthogonal[k * n + c]
                });
                orthogonal.push(v);
            }
        }
        Similitude {
            ratio: &self.ratio * &g.ratio,
            orthogonal,
            translation: self.apply(&g.translation),
        }
    }

    pub fn inverse(&self) -> Similitude {
        let n = self.dim();
        let mut transposed = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                transposed.push(self.orthogonal[c * n + r].clone());
            }
        }
        let inv_ratio = self.ratio.recip();
        let partial = Similitude {
            ratio: inv_ratio.clone(),
            orthogonal: transposed,
            translation: vec![QuadScalar::zero(); n],
        };
        let translation = partial
            .apply(&self.translation)
            .into_iter()
            .map(|v| -v)
            .collect();
        Similitude {
            translation,
            ..partial
        }
    }

    /// Sign of det of the orthogonal part.
    pub fn preserves_orientation(&self) -> bool {
        match self.dim() {
            1 => self.orthogonal[0].is_positive(),
            _ => {
                let o = &self.orthogonal;
                (&o[0] * &o[3] - &o[1] * &o[2]).is_positive()
            }
        }
    }

    /// Opaque key; equal iff the maps are equal.
    pub fn canonical_key(&self) -> Similitude {
        self.clone()
    }

    /// Whether every scalar lives in the given field.
    pub fn in_field(&self, field: crate::scalar::Field) -> bool {
        field.contains(&self.ratio)
            && self.orthogonal.iter().all(|x| field.contains(x))
            && self.translation.iter().all(|x| field.contains(x))
    }
}

fn identity_matrix(n: usize) -> Vec<QuadScalar> {
    (0..n * n)
        .map(|i| {
            if i % (n + 1) == 0 {
                QuadScalar::one()
            } else {
                QuadScalar::zero()
            }
        })
        .collect()
}

fn structural_cmp(x: &QuadScalar, y: &QuadScalar) -> Ordering {
    (x.radicand(), x.rational_part(), x.radical_part()).cmp(&(
        y.radicand(),
        y.rational_part(),
        y.radical_part(),
    ))
}

fn slice_cmp(a: &[QuadScalar], b: &[QuadScalar]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match structural_cmp(x, y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

impl PartialOrd for Similitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Structural order, used only to sort keys deterministically.
impl Ord for Similitude {
    fn cmp(&self, other: &Self) -> Ordering {
        structural_cmp(&self.ratio, &other.ratio)
            .then_with(|| slice_cmp(&self.orthogonal, &other.orthogonal))
            .then_with(|| slice_cmp(&self.translation, &other.translation))
    }
}

impl fmt::Display for Similitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t: Vec<String> = self.translation.iter().map(|x| x.to_string()).collect();
        if self.orthogonal == identity_matrix(self.dim()) {
            write!(f, "({})x + ({})", self.ratio, t.join(", "))
        } else {
            let o: Vec<String> = self.orthogonal.iter().map(|x| x.to_string()).collect();
            write!(
                f,
                "({})[{}]x + ({})",
                self.ratio,
                o.join(", "),
                t.join(", ")
            )
        }
    }
}

impl fmt::Debug for Similitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An open convex region: a strictly convex counter-clockwise polygon in the
/// plane, or an open interval `(lo, hi)` stored as two one-coordinate vertices.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

fn cross(o: &[QuadScalar], a: &[QuadScalar], b: &[QuadScalar]) -> QuadScalar {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point>) -> Result<ConvexPolygon> {
        let n = vertices.first().map(|v| v.len()).unwrap_or(0);
        if !(1..=2).contains(&n) || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::model(
                "polygon vertices must all have 1 or 2 coordinates",
            ));
        }
        if n == 1 {
            if vertices.len() != 2 || vertices[0][0] >= vertices[1][0] {
                return Err(Error::model(
                    "an interval needs exactly two endpoints with lo < hi",
                ));
            }
            return Ok(ConvexPolygon { vertices });
        }
        let m = vertices.len();
        if m < 3 {
            return Err(Error::model("a polygon needs at least three vertices"));
        }
        for i in 0..m {
            let c = cross(&vertices[i], &vertices[(i + 1) % m], &vertices[(i + 2) % m]);
            if !c.is_positive() {
                return Err(Error::model(format!(
                    "polygon is not strictly convex and counter-clockwise at vertex {}",
                    (i + 1) % m
                )));
            }
        }
        // a locally convex chain may still wind more than once; a fan from
        // vertex 0 that turns monotonically rules that out
        for i in 1..m - 1 {
            if !cross(&vertices[0], &vertices[i], &vertices[i + 1]).is_positive()
                || !cross(&vertices[0], &vertices[1], &vertices[i + 1]).is_positive()
            {
                return Err(Error::model("polygon winds more than once"));
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn interval(lo: QuadScalar, hi: QuadScalar) -> Result<ConvexPolygon> {
        ConvexPolygon::new(vec![vec![lo], vec![hi]])
    }

    /// Axis-aligned open rectangle `(x0, x1) × (y0, y1)`.
    pub fn rectangle(
        x0: QuadScalar,
        y0: QuadScalar,
        x1: QuadScalar,
        y1: QuadScalar,
    ) -> Result<ConvexPolygon> {
        ConvexPolygon::new(vec![
            vec![x0.clone(), y0.clone()],
            vec![x1.clone(), y0],
            vec![x1, y1.clone()],
            vec![x0, y1],
        ])
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn map(&self, f: &Similitude) -> ConvexPolygon {
        let mut vertices: Vec<Point> = self.vertices.iter().map(|v| f.apply(v)).collect();
        if !f.preserves_orientation() {
            vertices.reverse();
            if self.dim() == 2 {
                // keep the original first vertex first
                vertices.rotate_right(1);
            }
        }
        ConvexPolygon { vertices }
    }

    /// Whether `p` lies in the closed region.
    pub fn contains_closed(&self, p: &[QuadScalar]) -> bool {
        if self.dim() == 1 {
            return self.vertices[0][0] <= p[0] && p[0] <= self.vertices[1][0];
        }
        let m = self.vertices.len();
        (0..m).all(|i| !cross(&self.vertices[i], &self.vertices[(i + 1) % m], p).is_negative())
    }

    /// First vertex of `other` outside the closure of `self`, if any. `None`
    /// means the closure of `other` is contained in the closure of `self`,
    /// hence the open regions nest as well.
    pub fn containment_witness(&self, other: &ConvexPolygon) -> Option<Point> {
        other
            .vertices
            .iter()
            .find(|v| !self.contains_closed(v))
            .cloned()
    }

    pub fn contains_region(&self, other: &ConvexPolygon) -> bool {
        self.containment_witness(other).is_none()
    }

    /// Mean of the vertices, an interior point.
    pub fn vertex_mean(&self) -> Point {
        let k = QuadScalar::integer(self.vertices.len() as i64).recip();
        (0..self.dim())
            .map(|c| {
                self.vertices
                    .iter()
                    .fold(QuadScalar::zero(), |acc, v| acc + &v[c])
                    * &k
            })
            .collect()
    }

    pub fn bbox_f64(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in &self.vertices {
            for c in 0..n {
                let x = v[c].to_f64();
                lo[c] = lo[c].min(x);
                hi[c] = hi[c].max(x);
            }
        }
        (lo, hi)
    }

    /// Euclidean diameter, in floating point.
    pub fn diameter_f64(&self) -> f64 {
        let pts: Vec<Vec<f64>> = self
            .vertices
            .iter()
            .map(|v| v.iter().map(|x| x.to_f64()).collect())
            .collect();
        let mut best: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                best = best.max(d.sqrt());
            }
        }
        best
    }

    fn project(&self, axis: &[QuadScalar; 2]) -> (QuadScalar, QuadScalar) {
        let mut it = self
            .vertices
            .iter()
            .map(|v| &v[0] * &axis[0] + &v[1] * &axis[1]);
        let first = it.next().expect("nonempty polygon");
        it.fold((first.clone(), first), |(lo, hi), x| {
            let lo = if x < lo { x.clone() } else { lo };
            let hi = if x > hi { x } else { hi };
            (lo, hi)
        })
    }

    fn edge_normals(&self) -> impl Iterator<Item = [QuadScalar; 2]> + '_ {
        let m = self.vertices.len();
        (0..m).map(move |i| {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % m];
            [&b[1] - &a[1], &a[0] - &b[0]]
        })
    }
}

/// Whether two open convex regions intersect, i.e. their closures meet in a
/// set of positive measure. Touching along an edge or at a corner is not an
/// overlap.
pub fn open_overlap(p: &ConvexPolygon, q: &ConvexPolygon) -> bool {
    assert_eq!(p.dim(), q.dim(), "regions of different dimension");
    if p.dim() == 1 {
        let lo = std::cmp::max(&p.vertices[0][0], &q.vertices[0][0]);
        let hi = std::cmp::min(&p.vertices[1][0], &q.vertices[1][0]);
        return lo < hi;
    }
    for axis in p.edge_normals().chain(q.edge_normals()) {
        let (p_lo, p_hi) = p.project(&axis);
        let (q_lo, q_hi) = q.project(&axis);
        if p_hi <= q_lo || q_hi <= p_lo {
            return false;
        }
    }
    true
}

/// Float bounding boxes overlap (with slack); a cheap necessary condition for
/// [`open_overlap`].
pub fn bbox_may_overlap(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> bool {
    let slack = 1e-9;
    a.0.iter()
        .zip(&a.1)
        .zip(b.0.iter().zip(&b.1))
        .all(|((alo, ahi), (blo, bhi))| alo < &(bhi + slack) && blo < &(ahi + slack))
}
