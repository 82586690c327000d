//! Polytope geometry: membership, slacks, chords, cross-ratio distance,
//! inscribed balls.
//!
//! A polytope is kept in H-representation, `K = {theta : A theta <= b}`.
//! Constraint rows are *not* normalized at ingestion: the log-barrier Hessian
//! is invariant to jointly rescaling a row `(a_j, b_j)`, but slacks are not,
//! so the user's representation is preserved as given.

use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("shape mismatch: A is {m}x{d}, b has {blen} entries, point has {plen}")]
    ShapeMismatch {
        m: usize,
        d: usize,
        blen: usize,
        plen: usize,
    },
    #[error("constraint row {0} is identically zero")]
    ZeroRow(usize),
    #[error("input contains a non-finite entry")]
    NonFinite,
    #[error("empty interior: witness violates constraint {row} (slack {slack:e})")]
    EmptyInterior { row: usize, slack: f64 },
    #[error("point is not strictly interior to the polytope")]
    NotInterior,
    #[error("degenerate chord direction: the two points coincide")]
    DegenerateDirection,
    #[error("chord never exits the polytope; K is unbounded along this line")]
    UnboundedChord,
    #[error("l1 ball in H-representation has 2^d facets; d={0} > 12 is not supported")]
    DimensionTooLarge(usize),
    #[error("polytope file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A ball `B(center, radius)` certified to lie inside a polytope.
#[derive(Debug, Clone)]
pub struct InnerBall {
    pub center: DVector<f64>,
    pub radius: f64,
}

/// Bounded polytope `K = {theta : A theta <= b}` with a strictly interior
/// witness point recorded at validation time.
///
/// Immutable after construction; all operations are pure and safe to call
/// concurrently.
#[derive(Debug, Clone)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    witness: DVector<f64>,
}

impl Polytope {
    /// Validates an H-representation and returns the polytope.
    ///
    /// The witness (origin when `None`) must be strictly interior; this also
    /// certifies the interior is nonempty. Rows must be nonzero and all
    /// entries finite.
    pub fn validate(
        a: DMatrix<f64>,
        b: DVector<f64>,
        witness: Option<DVector<f64>>,
    ) -> Result<Self, GeometryError> {
        let (m, d) = (a.nrows(), a.ncols());
        let witness = witness.unwrap_or_else(|| DVector::zeros(d));
        if m == 0 || d == 0 || b.len() != m || witness.len() != d {
            return Err(GeometryError::ShapeMismatch {
                m,
                d,
                blen: b.len(),
                plen: witness.len(),
            });
        }
        if a.iter().any(|x| !x.is_finite())
            || b.iter().any(|x| !x.is_finite())
            || witness.iter().any(|x| !x.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        for j in 0..m {
            if a.row(j).iter().all(|&x| x == 0.0) {
                return Err(GeometryError::ZeroRow(j));
            }
        }
        let p = Polytope { a, b, witness };
        let s = p.slacks(&p.witness);
        for j in 0..m {
            if s[j] <= 0.0 {
                return Err(GeometryError::EmptyInterior { row: j, slack: s[j] });
            }
        }
        Ok(p)
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.b
    }

    /// The interior point recorded at validation.
    pub fn witness(&self) -> &DVector<f64> {
        &self.witness
    }

    /// Slack vector `s_j = b_j - a_j^T theta`. Strictly interior iff all
    /// slacks are positive.
    pub fn slacks(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * theta
    }

    /// Strict interior membership, no tolerance: the walk only ever proposes
    /// float-representable points and the boundary has measure zero.
    pub fn contains_interior(&self, theta: &DVector<f64>) -> bool {
        if theta.len() != self.dim() {
            return false;
        }
        self.slacks(theta).iter().all(|&s| s > 0.0)
    }

    /// Endpoints `(p, q)` of the chord of `K` through interior points `u`,
    /// `v`, ordered `p, u, v, q` along the line.
    ///
    /// Computed from the slack/directional-rate minimum over constraints in
    /// each direction. Errors with `UnboundedChord` when the line never exits
    /// `K` on one side.
    pub fn chord_endpoints(
        &self,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
        if !self.contains_interior(u) || !self.contains_interior(v) {
            return Err(GeometryError::NotInterior);
        }
        let w = v - u;
        if w.iter().all(|&x| x == 0.0) {
            return Err(GeometryError::DegenerateDirection);
        }
        let s = self.slacks(u);
        let rates = &self.a * &w; // rate of slack consumption per unit t along u + t w
        let mut t_fwd = f64::INFINITY;
        let mut t_bwd = f64::INFINITY;
        for j in 0..self.num_constraints() {
            let r = rates[j];
            if r > 0.0 {
                t_fwd = t_fwd.min(s[j] / r);
            } else if r < 0.0 {
                t_bwd = t_bwd.min(s[j] / -r);
            }
        }
        if !t_fwd.is_finite() || !t_bwd.is_finite() {
            return Err(GeometryError::UnboundedChord);
        }
        let p = u - &w * t_bwd;
        let q = u + &w * t_fwd;
        Ok((p, q))
    }

    /// Cross-ratio distance
    /// `sigma(u, v) = (|u-v| * |p-q|) / (|p-u| * |v-q|)`, with `(p, q)` the
    /// chord endpoints; zero when `u = v`.
    pub fn cross_ratio(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64, GeometryError> {
        if !self.contains_interior(u) || !self.contains_interior(v) {
            return Err(GeometryError::NotInterior);
        }
        if u == v {
            return Ok(0.0);
        }
        let (p, q) = self.chord_endpoints(u, v)?;
        Ok((u - v).norm() * (&p - &q).norm() / ((&p - u).norm() * (v - &q).norm()))
    }

    /// The largest ball centered at `a` inside `K`:
    /// `r = min_j (b_j - a_j^T a) / |a_j|`.
    pub fn inscribed_radius_at(&self, center: &DVector<f64>) -> Result<InnerBall, GeometryError> {
        if !self.contains_interior(center) {
            return Err(GeometryError::NotInterior);
        }
        let s = self.slacks(center);
        let mut r = f64::INFINITY;
        for j in 0..self.num_constraints() {
            r = r.min(s[j] / self.a.row(j).norm());
        }
        Ok(InnerBall {
            center: center.clone(),
            radius: r,
        })
    }

    /// Parses the text matrix format: first line `m d`, then `m` lines of the
    /// `d` entries of `a_j` followed by `b_j`, whitespace-separated.
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut nums = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| GeometryError::Parse(format!("bad number {t:?}: {e}")))
            })
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter();
        let m = nums.next().ok_or_else(|| GeometryError::Parse("empty file".into()))?;
        let d = nums.next().ok_or_else(|| GeometryError::Parse("missing dimension".into()))?;
        if m.fract() != 0.0 || d.fract() != 0.0 || m < 1.0 || d < 1.0 {
            return Err(GeometryError::Parse(format!("bad header m={m} d={d}")));
        }
        let (m, d) = (m as usize, d as usize);
        let rest: Vec<f64> = nums.collect();
        if rest.len() != m * (d + 1) {
            return Err(GeometryError::Parse(format!(
                "expected {} entries after header, got {}",
                m * (d + 1),
                rest.len()
            )));
        }
        let mut a = DMatrix::zeros(m, d);
        let mut b = DVector::zeros(m);
        for j in 0..m {
            for k in 0..d {
                a[(j, k)] = rest[j * (d + 1) + k];
            }
            b[j] = rest[j * (d + 1) + d];
        }
        Self::validate(a, b, None)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, GeometryError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the same text matrix format accepted by [`Self::parse`].
    pub fn to_text(&self) -> String {
        let (m, d) = (self.num_constraints(), self.dim());
        let mut out = format!("{m} {d}\n");
        for j in 0..m {
            for k in 0..d {
                let _ = write!(out, "{} ", self.a[(j, k)]);
            }
            let _ = writeln!(out, "{}", self.b[j]);
        }
        out
    }
}

/// Axis-aligned box `[-half_width, half_width]^d` (2d rows).
pub fn box_polytope(d: usize, half_width: f64) -> Polytope {
    let mut a = DMatrix::zeros(2 * d, d);
    let b = DVector::from_element(2 * d, half_width);
    for i in 0..d {
        a[(2 * i, i)] = 1.0;
        a[(2 * i + 1, i)] = -1.0;
    }
    Polytope::validate(a, b, None).expect("box is a valid polytope")
}

/// Standard simplex `{theta >= 0, 1^T theta <= 1}` (d+1 rows). The recorded
/// witness is the barycenter-ish point `(1/(d+1), ..., 1/(d+1))`.
pub fn simplex(d: usize) -> Polytope {
    let mut a = DMatrix::zeros(d + 1, d);
    let mut b = DVector::zeros(d + 1);
    for i in 0..d {
        a[(i, i)] = -1.0;
    }
    for k in 0..d {
        a[(d, k)] = 1.0;
    }
    b[d] = 1.0;
    let w = DVector::from_element(d, 1.0 / (d as f64 + 1.0));
    Polytope::validate(a, b, Some(w)).expect("simplex is a valid polytope")
}

/// The l1 ball `{|theta|_1 <= radius}` as 2^d facets of +-1 sign patterns.
/// Restricted to `d <= 12`; the 2d-facet box is the cheap alternative for
/// larger dimension.
pub fn l1_ball(d: usize, radius: f64) -> Result<Polytope, GeometryError> {
    if d > 12 {
        return Err(GeometryError::DimensionTooLarge(d));
    }
    let m = 1usize << d;
    let mut a = DMatrix::zeros(m, d);
    let b = DVector::from_element(m, radius);
    for pattern in 0..m {
        for k in 0..d {
            a[(pattern, k)] = if pattern >> k & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
    Polytope::validate(a, b, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn interval() -> Polytope {
        box_polytope(1, 1.0)
    }

    #[test]
    fn validate_unit_interval() {
        let p = Polytope::validate(dmatrix![1.0; -1.0], dvector![1.0, 1.0], Some(dvector![0.0]))
            .unwrap();
        assert_eq!(p.num_constraints(), 2);
        assert_eq!(p.dim(), 1);
    }

    #[test]
    fn validate_degenerate_slab_is_empty() {
        let err = Polytope::validate(dmatrix![1.0; -1.0], dvector![0.0, 0.0], Some(dvector![0.0]))
            .unwrap_err();
        assert!(matches!(err, GeometryError::EmptyInterior { .. }));
    }

    #[test]
    fn validate_unit_box_origin_witness() {
        let p = box_polytope(2, 1.0);
        assert_eq!(p.num_constraints(), 4);
        assert!(p.contains_interior(&dvector![0.0, 0.0]));
    }

    #[test]
    fn validate_rejects_zero_row() {
        let err =
            Polytope::validate(dmatrix![1.0, 0.0; 0.0, 0.0], dvector![1.0, 1.0], None).unwrap_err();
        assert!(matches!(err, GeometryError::ZeroRow(1)));
    }

    #[test]
    fn validate_rejects_shape_mismatch() {
        let err = Polytope::validate(dmatrix![1.0, 0.0], dvector![1.0, 2.0], None).unwrap_err();
        assert!(matches!(err, GeometryError::ShapeMismatch { .. }));
    }

    #[test]
    fn slacks_at_box_center() {
        let p = box_polytope(2, 1.0);
        let s = p.slacks(&dvector![0.0, 0.0]);
        assert_eq!(s, dvector![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn slacks_on_interval() {
        let p = interval();
        assert_eq!(p.slacks(&dvector![0.5]), dvector![0.5, 1.5]);
        let s = p.slacks(&dvector![2.0]);
        assert_eq!(s, dvector![-1.0, 3.0]);
        assert!(!p.contains_interior(&dvector![2.0]));
    }

    #[test]
    fn membership_is_strict() {
        let p = box_polytope(2, 1.0);
        assert!(p.contains_interior(&dvector![0.999, 0.0]));
        assert!(!p.contains_interior(&dvector![1.0, 0.0]));
        assert!(!p.contains_interior(&dvector![1.5, 0.0]));
    }

    #[test]
    fn chord_axis_aligned() {
        let p = box_polytope(2, 1.0);
        let (pe, qe) = p
            .chord_endpoints(&dvector![0.0, 0.0], &dvector![0.5, 0.0])
            .unwrap();
        assert_relative_eq!(pe, dvector![-1.0, 0.0], epsilon = 1e-12);
        assert_relative_eq!(qe, dvector![1.0, 0.0], epsilon = 1e-12);
    }

    #[test]
    fn chord_on_interval() {
        let p = interval();
        let (pe, qe) = p.chord_endpoints(&dvector![0.2], &dvector![0.4]).unwrap();
        assert_relative_eq!(pe[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(qe[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chord_diagonal() {
        let p = box_polytope(2, 1.0);
        let (pe, qe) = p
            .chord_endpoints(&dvector![0.0, 0.0], &dvector![0.5, 0.5])
            .unwrap();
        assert_relative_eq!(pe, dvector![-1.0, -1.0], epsilon = 1e-12);
        assert_relative_eq!(qe, dvector![1.0, 1.0], epsilon = 1e-12);
    }

    #[test]
    fn chord_errors() {
        let p = box_polytope(2, 1.0);
        let u = dvector![0.1, 0.1];
        assert!(matches!(
            p.chord_endpoints(&u, &u),
            Err(GeometryError::DegenerateDirection)
        ));
        assert!(matches!(
            p.chord_endpoints(&u, &dvector![2.0, 0.0]),
            Err(GeometryError::NotInterior)
        ));
        // half-plane x <= 1 is unbounded along e_2
        let hp = Polytope::validate(dmatrix![1.0, 0.0], dvector![1.0], None).unwrap();
        assert!(matches!(
            hp.chord_endpoints(&dvector![0.0, 0.0], &dvector![0.0, 0.5]),
            Err(GeometryError::UnboundedChord)
        ));
    }

    #[test]
    fn cross_ratio_coincident_points() {
        let p = box_polytope(2, 1.0);
        let u = dvector![0.3, -0.2];
        assert_eq!(p.cross_ratio(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn cross_ratio_box_hand_value() {
        let p = box_polytope(2, 1.0);
        let s = p
            .cross_ratio(&dvector![0.0, 0.0], &dvector![0.5, 0.0])
            .unwrap();
        assert_relative_eq!(s, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn cross_ratio_interval_hand_value() {
        let p = interval();
        let s = p.cross_ratio(&dvector![0.0], &dvector![0.9]).unwrap();
        assert_relative_eq!(s, 18.0, max_relative = 1e-10);
    }

    #[test]
    fn inscribed_radius_box_and_interval() {
        let p = box_polytope(2, 1.0);
        let ball = p.inscribed_radius_at(&dvector![0.0, 0.0]).unwrap();
        assert_relative_eq!(ball.radius, 1.0);
        let ball = interval().inscribed_radius_at(&dvector![0.5]).unwrap();
        assert_relative_eq!(ball.radius, 0.5);
    }

    #[test]
    fn inscribed_radius_simplex() {
        let p = simplex(2);
        let ball = p
            .inscribed_radius_at(&dvector![1.0 / 3.0, 1.0 / 3.0])
            .unwrap();
        assert_relative_eq!(ball.radius, 1.0 / (3.0 * 2.0_f64.sqrt()), max_relative = 1e-12);
    }

    #[test]
    fn builtin_shapes() {
        assert_eq!(box_polytope(2, 1.0).num_constraints(), 4);
        let l1 = l1_ball(2, 1.0).unwrap();
        assert_eq!(l1.num_constraints(), 4);
        assert!(l1.contains_interior(&dvector![0.4, 0.4]));
        assert!(!l1.contains_interior(&dvector![0.6, 0.6]));
        assert!(simplex(2).contains_interior(&dvector![1.0 / 3.0, 1.0 / 3.0]));
        assert!(matches!(
            l1_ball(13, 1.0),
            Err(GeometryError::DimensionTooLarge(13))
        ));
    }

    #[test]
    fn file_round_trip() {
        let p = simplex(2);
        let text = p.to_text();
        let q = Polytope::parse(&text);
        // simplex's origin-excluded rows make the origin a boundary point, so
        // parse (origin witness) must fail; supply the witness explicitly.
        assert!(q.is_err());
        let q = Polytope::validate(
            p.matrix().clone(),
            p.offsets().clone(),
            Some(p.witness().clone()),
        )
        .unwrap();
        assert_eq!(q.to_text(), text);

        let boxed = box_polytope(2, 0.75);
        let round = Polytope::parse(&boxed.to_text()).unwrap();
        assert_eq!(round.matrix(), boxed.matrix());
        assert_eq!(round.offsets(), boxed.offsets());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Polytope::parse("").is_err());
        assert!(Polytope::parse("2 1\n1 1\n").is_err());
        assert!(Polytope::parse("1 1\nx 1\n").is_err());
    }
}
