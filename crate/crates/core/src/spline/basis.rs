//! Clamped cubic B-spline basis on the training range.
//!
//! Evaluation happens on the unit interval: `u = (x - lower) / (upper - lower)`.
//! Working in `u` keeps the curvature penalty, and therefore the smoothing
//! parameter grid, independent of the units of the feature.

use serde::{Deserialize, Serialize};

use crate::dataset::{distinct_count, quantile_type7};
use crate::error::{Error, Result};

pub const DEGREE: usize = 3;
const ORDER: usize = DEGREE + 1;

/// Nonzero basis values (or derivatives) at a point: index of the first
/// nonzero function plus the `DEGREE + 1` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    pub first: usize,
    pub values: [f64; ORDER],
}

impl LocalBasis {
    pub fn dot(&self, coefficients: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&coefficients[self.first..self.first + ORDER])
            .map(|(b, c)| b * c)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRepr", into = "BasisRepr")]
pub struct SplineBasis {
    lower: f64,
    upper: f64,
    interior_knots: Vec<f64>,
    /// Full clamped knot vector on the unit interval.
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    degree: usize,
    #[serde(with = "crate::real_string")]
    lower: f64,
    #[serde(with = "crate::real_string")]
    upper: f64,
    #[serde(with = "crate::real_string::vec")]
    interior_knots: Vec<f64>,
}

impl From<SplineBasis> for BasisRepr {
    fn from(b: SplineBasis) -> Self {
        BasisRepr {
            degree: DEGREE,
            lower: b.lower,
            upper: b.upper,
            interior_knots: b.interior_knots,
        }
    }
}

impl TryFrom<BasisRepr> for SplineBasis {
    type Error = Error;

    fn try_from(r: BasisRepr) -> Result<Self> {
        if r.degree != DEGREE {
            return Err(Error::MalformedModel(format!("unsupported spline degree {}", r.degree)));
        }
        SplineBasis::new(r.lower, r.upper, r.interior_knots)
    }
}

impl SplineBasis {
    /// Basis with the given boundary and interior knots (feature units).
    pub fn new(lower: f64, upper: f64, interior_knots: Vec<f64>) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::InvalidParameter(format!(
                "spline boundary must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        if interior_knots.is_empty() {
            return Err(Error::InvalidParameter("need at least one interior knot".into()));
        }
        let ascending = interior_knots.windows(2).all(|w| w[0] < w[1]);
        let inside = interior_knots.iter().all(|&k| k > lower && k < upper);
        if !ascending || !inside {
            return Err(Error::InvalidParameter(
                "interior knots must be strictly ascending and inside the boundary".into(),
            ));
        }
        let range = upper - lower;
        let mut knots = vec![0.0; ORDER];
        knots.extend(interior_knots.iter().map(|k| (k - lower) / range));
        knots.extend([1.0; ORDER]);
        Ok(Self {
            lower,
            upper,
            interior_knots,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    /// Number of basis functions: interior knots + degree + 1.
    pub fn dimension(&self) -> usize {
        self.interior_knots.len() + ORDER
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior_knots
    }

    pub(crate) fn unit_knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lower) / self.range()
    }

    /// Knot span `i` with `knots[i] <= u < knots[i + 1]`; `u = 1` falls in
    /// the last nonempty span.
    fn span(&self, u: f64) -> usize {
        let last = self.dimension() - 1;
        if u >= self.knots[last + 1] {
            return last;
        }
        if u <= self.knots[DEGREE] {
            return DEGREE;
        }
        // Largest i in [DEGREE, last] with knots[i] <= u.
        let interior = &self.knots[DEGREE..=last];
        DEGREE + interior.partition_point(|&k| k <= u) - 1
    }

    /// Values and the first `N - 1` derivatives (with respect to `u`) of the
    /// nonzero basis functions at `u`, which is clamped into `[0, 1]`.
    pub(crate) fn unit_derivatives<const N: usize>(&self, u: f64) -> [LocalBasis; N] {
        let u = u.clamp(0.0, 1.0);
        let span = self.span(u);
        let ders = basis_derivatives::<N>(&self.knots, span, u);
        let first = span - DEGREE;
        ders.map(|values| LocalBasis { first, values })
    }

    /// Nonzero basis values at `x` (clamped into the boundary).
    pub fn local(&self, x: f64) -> LocalBasis {
        let [v] = self.unit_derivatives::<1>(self.to_unit(x));
        v
    }

    /// All `dimension()` basis values at `x`.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let loc = self.local(x);
        let mut out = vec![0.0; self.dimension()];
        out[loc.first..loc.first + ORDER].copy_from_slice(&loc.values);
        out
    }

    pub fn design_matrix(&self, xs: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(xs.len(), self.dimension());
        for (i, &x) in xs.iter().enumerate() {
            let loc = self.local(x);
            for (a, v) in loc.values.iter().enumerate() {
                m[(i, loc.first + a)] = *v;
            }
        }
        m
    }

    /// Greville abscissae on the unit interval. As coefficients they
    /// reproduce `f(u) = u`; all-ones coefficients reproduce `f = 1`.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.dimension())
            .map(|j| self.knots[j + 1..j + ORDER].iter().sum::<f64>() / DEGREE as f64)
            .collect()
    }
}

/// Derivatives of the nonzero B-splines on `span` (Piegl & Tiller A2.3).
fn basis_derivatives<const N: usize>(knots: &[f64], span: usize, u: f64) -> [[f64; ORDER]; N] {
    let p = DEGREE;
    let mut ndu = [[0.0f64; ORDER]; ORDER];
    let mut left = [0.0f64; ORDER];
    let mut right = [0.0f64; ORDER];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = [[0.0f64; ORDER]; N];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let nd = (N - 1).min(p);
    let mut a = [[0.0f64; ORDER]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nd {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if rk >= 0 {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1).take(nd) {
        for v in row.iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

/// Cubic basis over the range of `x` with `interior_knot_count` knots at
/// equally spaced quantiles of the distinct values of `x`.
///
/// Coinciding quantile knots are merged, so the knot vector stays strictly
/// ascending even with heavy ties.
pub fn build_basis(x: &[f64], interior_knot_count: usize) -> Result<SplineBasis> {
    let needed = DEGREE + 2;
    let found = distinct_count(x);
    if found < needed {
        return Err(Error::TooFewDistinct { found, needed });
    }
    if interior_knot_count == 0 {
        return Err(Error::InvalidParameter("interior_knot_count must be at least 1".into()));
    }
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let lower = distinct[0];
    let upper = distinct[distinct.len() - 1];
    let k = interior_knot_count;
    let mut knots: Vec<f64> = (1..=k)
        .map(|j| quantile_type7(&distinct, j as f64 / (k + 1) as f64))
        .filter(|&q| q > lower && q < upper)
        .collect();
    knots.dedup();
    SplineBasis::new(lower, upper, knots)
}
