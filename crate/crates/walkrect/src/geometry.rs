//! Global domains assembled from overlapping axis-aligned time-space boxes
//! with labeled surfaces, plus the coefficient-freezing step that turns the
//! variable-coefficient operator into a constant one per box.
//!
//! A domain file lists parallelepipeds (center, half-lengths, time interval,
//! per-side labels), names the boundary and terminal data, and declares the
//! coefficient fields. Faces labeled `interior` sit strictly inside another
//! box, so a walk exiting through them keeps going; faces labeled `dirichlet`
//! are absorbing; `neumann` faces reflect and absorb no mass.

use crate::boxstep::AffineMap;
use crate::error::{Result, WalkError};
use crate::series1d::{Bc, BoundaryPair};
use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

/// Label of one lateral face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideLabel {
    Interior,
    Dirichlet,
    Neumann,
}

impl SideLabel {
    fn bc(self) -> Bc {
        match self {
            // an interior face still absorbs the walk within its box; the
            // walker then restarts inside the neighbouring box
            SideLabel::Interior | SideLabel::Dirichlet => Bc::Dirichlet,
            SideLabel::Neumann => Bc::Neumann,
        }
    }
}

fn de_time<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum T {
        Num(f64),
        Word(String),
    }
    match T::deserialize(d)? {
        T::Num(v) => Ok(v),
        T::Word(w) if w == "inf" => Ok(f64::INFINITY),
        T::Word(w) => Err(D::Error::custom(format!("bad time value {w:?}"))),
    }
}

fn ser_time<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn inf_time() -> f64 {
    f64::INFINITY
}

/// One axis-aligned spatial box crossed with a time interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Parallelepiped {
    pub center: Vec<f64>,
    pub half_lengths: Vec<f64>,
    #[serde(default)]
    pub t0: f64,
    #[serde(
        default = "inf_time",
        deserialize_with = "de_time",
        serialize_with = "ser_time"
    )]
    pub t1: f64,
    /// keys "x0-", "x0+", "x1-", ...; missing sides default to Dirichlet
    #[serde(default)]
    pub sides: std::collections::BTreeMap<String, SideLabel>,
}

impl Parallelepiped {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        self.half_lengths.iter().map(|l| 2.0 * l).product()
    }

    pub fn label(&self, axis: usize, eta: i8) -> SideLabel {
        let key = format!("x{axis}{}", if eta > 0 { '+' } else { '-' });
        self.sides.get(&key).copied().unwrap_or(SideLabel::Dirichlet)
    }

    pub fn bcs(&self) -> Vec<BoundaryPair> {
        (0..self.dim())
            .map(|i| BoundaryPair {
                left: self.label(i, -1).bc(),
                right: self.label(i, 1).bc(),
            })
            .collect()
    }

    /// Strict spatial interior with a small safety margin.
    pub fn strictly_inside(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.center.iter().zip(&self.half_lengths))
                .all(|(&xi, (&c, &l))| (xi - c).abs() < l - margin)
    }

    /// Relative containment depth: min over axes of the distance to the
    /// nearest face divided by the half-length (1 at the center, 0 on a face).
    pub fn depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.center.iter().zip(&self.half_lengths))
            .map(|(&xi, (&c, &l))| (l - (xi - c).abs()) / l)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains_closure(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.center.iter().zip(&self.half_lengths))
                .all(|(&xi, (&c, &l))| (xi - c).abs() <= l + tol)
    }

    pub fn time_contains(&self, t: f64) -> bool {
        t >= self.t0 && t < self.t1
    }

    /// Center of the face (axis, eta).
    fn face_center(&self, axis: usize, eta: i8) -> Vec<f64> {
        let mut p = self.center.clone();
        p[axis] += eta as f64 * self.half_lengths[axis];
        p
    }
}

/// Named analytic boundary/terminal data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryData {
    Zero,
    Constant { value: f64 },
    /// the coordinate x_axis itself (harmonic)
    Coordinate { axis: usize },
    /// (x_1^2 + ... + x_d^2) / 2
    QuadraticSum,
    /// (x_1^4 + ... + x_d^4) / 12
    QuarticSum,
    /// 1 when x_axis >= threshold (or <= when `below`), else 0
    Indicator {
        axis: usize,
        threshold: f64,
        #[serde(default)]
        below: bool,
    },
}

impl BoundaryData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BoundaryData::Zero => 0.0,
            BoundaryData::Constant { value } => value,
            BoundaryData::Coordinate { axis } => x[axis],
            BoundaryData::QuadraticSum => x.iter().map(|v| v * v).sum::<f64>() / 2.0,
            BoundaryData::QuarticSum => x.iter().map(|v| v.powi(4)).sum::<f64>() / 12.0,
            BoundaryData::Indicator {
                axis,
                threshold,
                below,
            } => {
                let hit = if below {
                    x[axis] <= threshold
                } else {
                    x[axis] >= threshold
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl Default for BoundaryData {
    fn default() -> BoundaryData {
        BoundaryData::Zero
    }
}

/// Diffusion matrix field a(x) = sigma(x) sigma(x)*.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiffusionField {
    #[default]
    Identity,
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    /// a = sigma sigma* for sigma(x) = [[1, sin(x1+x2)/2], [0, 1]]
    ShearSin,
}

impl DiffusionField {
    pub fn eval(&self, x: &[f64], d: usize) -> Result<DMatrix<f64>> {
        match self {
            DiffusionField::Identity => Ok(DMatrix::identity(d, d)),
            DiffusionField::Constant { matrix } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(WalkError::Config(
                        "diffusion matrix shape must match the domain dimension".into(),
                    ));
                }
                Ok(DMatrix::from_fn(d, d, |i, j| matrix[i][j]))
            }
            DiffusionField::ShearSin => {
                if d != 2 {
                    return Err(WalkError::Config("shear_sin diffusion is 2-d only".into()));
                }
                let s = 0.5 * (x[0] + x[1]).sin();
                Ok(DMatrix::from_row_slice(
                    2,
                    2,
                    &[1.0 + s * s, s, s, 1.0],
                ))
            }
        }
    }
}

/// Coefficient fields of the operator: diffusion a, drift b, potential c,
/// source f. Drift, c and f are spatially constant for the shipped
/// experiments; the freezing step is where variable fields would plug in.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct CoefficientField {
    #[serde(default)]
    pub diffusion: DiffusionField,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub f: f64,
}

/// Coefficients frozen at one point, with the symmetric factor of a.
#[derive(Debug, Clone)]
pub struct FrozenCoefficients {
    pub a: DMatrix<f64>,
    /// principal square root: sigma sigma* = a
    pub sigma: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub f: f64,
}

/// Freeze the coefficient fields at (t, x). The diffusion matrix is
/// factorized through its principal square root (eigendecomposition), which
/// is deterministic; any factorization with sigma sigma* = a would do.
pub fn freeze_coefficients(
    fields: &CoefficientField,
    _t: f64,
    x: &[f64],
) -> Result<FrozenCoefficients> {
    let d = x.len();
    let a = fields.diffusion.eval(x, d)?;
    if (&a - a.transpose()).amax() > 1e-12 {
        return Err(WalkError::NotPositiveDefinite);
    }
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 1e-14) {
        return Err(WalkError::NotPositiveDefinite);
    }
    let sqrt_l = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        eig.eigenvalues.iter().map(|l| l.sqrt()),
    ));
    let sigma = &eig.eigenvectors * sqrt_l * eig.eigenvectors.transpose();
    if (&sigma * sigma.transpose() - &a).amax() > 1e-12 {
        return Err(WalkError::NonConvergence {
            context: "symmetric factorization residual",
        });
    }
    let b = fields.drift.clone().unwrap_or_else(|| vec![0.0; d]);
    if b.len() != d {
        return Err(WalkError::Config("drift dimension mismatch".into()));
    }
    Ok(FrozenCoefficients {
        a,
        sigma,
        b,
        c: fields.c,
        f: fields.f,
    })
}

/// Where a point landed relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Landing {
    /// strictly inside some box: keep walking
    Interior,
    /// on an absorbing surface: evaluate the Dirichlet data
    Dirichlet,
    /// the global horizon was reached: evaluate the terminal data
    Terminal,
}

/// A box selected for the next step, with coefficients frozen at the entry
/// point and the affine map back to physical coordinates.
#[derive(Debug, Clone)]
pub struct FrozenBox {
    pub index: usize,
    /// canonical right box [0, T_loc] x prod [-L_i, L_i] carrying the frozen
    /// drift and (c, f)
    pub bx: crate::boxstep::TimeSpaceBox,
    /// physical = sigma . canonical + center
    pub map: AffineMap,
    /// entry point in canonical coordinates
    pub start: Vec<f64>,
    pub labels: Vec<(SideLabel, SideLabel)>,
}

/// A union of labeled boxes with boundary data and coefficient fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Domain {
    pub boxes: Vec<Parallelepiped>,
    /// global time horizon; "inf" for elliptic problems
    #[serde(
        default = "inf_time",
        deserialize_with = "de_time",
        serialize_with = "ser_time"
    )]
    pub horizon: f64,
    #[serde(default)]
    pub dirichlet: BoundaryData,
    #[serde(default)]
    pub terminal: BoundaryData,
    #[serde(default)]
    pub coefficients: CoefficientField,
}

/// Membership tolerance used when classifying landing points.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

impl Domain {
    pub fn from_json(text: &str) -> Result<Domain> {
        let dom: Domain =
            serde_json::from_str(text).map_err(|e| WalkError::Config(e.to_string()))?;
        dom.validate()?;
        Ok(dom)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Domain> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WalkError::Config(format!("{}: {e}", path.display())))?;
        Domain::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.boxes.first().map_or(0, |b| b.dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.boxes.is_empty() {
            return Err(WalkError::Config("domain has no boxes".into()));
        }
        let d = self.dim();
        if d == 0 {
            return Err(WalkError::Config("domain dimension is zero".into()));
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if b.dim() != d || b.half_lengths.len() != d {
                return Err(WalkError::Config(format!("box {i}: dimension mismatch")));
            }
            if b.half_lengths.iter().any(|&l| !(l > 0.0)) {
                return Err(WalkError::Config(format!(
                    "box {i}: half-lengths must be positive"
                )));
            }
            if !(b.t1 > b.t0) {
                return Err(WalkError::Config(format!("box {i}: empty time interval")));
            }
            for key in b.sides.keys() {
                let ok = key.starts_with('x')
                    && key.ends_with(['+', '-'])
                    && key[1..key.len() - 1].parse::<usize>().is_ok_and(|a| a < d);
                if !ok {
                    return Err(WalkError::Config(format!("box {i}: bad side key {key:?}")));
                }
            }
            // every interior face must open into some other box (H1)
            for axis in 0..d {
                for eta in [-1i8, 1] {
                    if b.label(axis, eta) == SideLabel::Interior {
                        let fc = b.face_center(axis, eta);
                        let covered = self
                            .boxes
                            .iter()
                            .enumerate()
                            .any(|(j, o)| j != i && o.strictly_inside(&fc, 0.0));
                        if !covered {
                            return Err(WalkError::Config(format!(
                                "box {i}: interior face x{axis}{} opens into no other box",
                                if eta > 0 { '+' } else { '-' }
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Index of every box whose open spatial interior contains x at time t.
    fn covering(&self, t: f64, x: &[f64]) -> impl Iterator<Item = usize> + '_ {
        let x = x.to_vec();
        self.boxes
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.time_contains(t) && b.strictly_inside(&x, MEMBERSHIP_TOL))
            .map(|(i, _)| i)
    }

    /// Classify a landing point: strictly inside a box means the walk goes
    /// on, the horizon means terminal data, anything else is a Dirichlet hit.
    pub fn classify(&self, t: f64, x: &[f64]) -> Landing {
        if self.horizon.is_finite() && t >= self.horizon - MEMBERSHIP_TOL {
            Landing::Terminal
        } else if self.covering(t, x).next().is_some() {
            Landing::Interior
        } else {
            Landing::Dirichlet
        }
    }

    /// Pick the box for the next step: largest spatial volume whose interior
    /// contains the point (fewer steps, hence a shorter weight product), with
    /// volume ties broken by the deepest containment. The depth tie-break
    /// matters on uniform tilings: starting a step next to a face makes the
    /// true exit law sharply peaked and the step weight badly conditioned.
    /// Coefficients are frozen at (t, x) and the time side is capped at the
    /// global horizon.
    pub fn select_box(&self, t: f64, x: &[f64]) -> Result<FrozenBox> {
        let mut best: Option<usize> = None;
        for i in self.covering(t, x) {
            let better = best.is_none_or(|b| {
                let (vi, vb) = (self.boxes[i].volume(), self.boxes[b].volume());
                vi > vb || (vi == vb && self.boxes[i].depth(x) > self.boxes[b].depth(x))
            });
            if better {
                best = Some(i);
            }
        }
        let index = match best {
            Some(i) => i,
            None => {
                let p = [
                    x.first().copied().unwrap_or(f64::NAN),
                    x.get(1).copied().unwrap_or(0.0),
                    x.get(2).copied().unwrap_or(0.0),
                ];
                let in_closure = self
                    .boxes
                    .iter()
                    .any(|b| b.time_contains(t) && b.contains_closure(x, MEMBERSHIP_TOL));
                return Err(if in_closure {
                    WalkError::NoCoveringBox(p)
                } else {
                    WalkError::PointOutsideDomain(p)
                });
            }
        };
        let pbox = &self.boxes[index];
        let d = pbox.dim();
        let frozen = freeze_coefficients(&self.coefficients, t, x)?;
        // the canonical step lives on an axis-aligned right box, so the
        // frozen sigma must be diagonal; the general affine case goes through
        // box-local constructions (see baselines::mixed_step_scheme)
        for i in 0..d {
            for j in 0..d {
                if i != j && frozen.sigma[(i, j)].abs() > 1e-12 {
                    return Err(WalkError::Config(
                        "non-diagonal frozen diffusion is not supported by box selection".into(),
                    ));
                }
            }
        }
        let t1 = pbox.t1.min(self.horizon);
        let t_local = t1 - t;
        if !(t_local > 0.0) {
            return Err(WalkError::Config(format!(
                "no time left in box {index} at t = {t}"
            )));
        }
        let mut half = Vec::with_capacity(d);
        let mut drift = Vec::with_capacity(d);
        for i in 0..d {
            let s = frozen.sigma[(i, i)];
            half.push(pbox.half_lengths[i] / s);
            drift.push(frozen.b[i] / s);
        }
        let bx = crate::boxstep::TimeSpaceBox::new(t_local, half, drift, pbox.bcs())?
            .with_coeffs(frozen.c, frozen.f);
        let map = AffineMap::new(
            frozen.sigma,
            DVector::from_column_slice(&pbox.center),
        )?;
        let start = map.to_canonical(x);
        let labels = (0..d)
            .map(|i| (pbox.label(i, -1), pbox.label(i, 1)))
            .collect();
        Ok(FrozenBox {
            index,
            bx,
            map,
            start,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;
    use rand::Rng;

    fn unit_square() -> Domain {
        Domain::from_json(
            r#"{
            "horizon": "inf",
            "boxes": [{"center": [0.0, 0.0], "half_lengths": [1.0, 1.0]}],
            "dirichlet": {"type": "constant", "value": 1.0}
        }"#,
        )
        .unwrap()
    }

    fn corridor() -> Domain {
        // room [0,2]^2 with a corridor [1.8, 3.0] x [0.9, 1.1]
        Domain::from_json(
            r#"{
            "boxes": [
                {"center": [1.0, 1.0], "half_lengths": [1.0, 1.0]},
                {"center": [2.4, 1.0], "half_lengths": [0.6, 0.1],
                 "sides": {"x0-": "interior"}}
            ],
            "dirichlet": {"type": "indicator", "axis": 0, "threshold": 2.999999}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn single_box_selection_truncates_time() {
        let mut dom = unit_square();
        dom.horizon = 2.0;
        let fb = dom.select_box(0.5, &[0.2, -0.3]).unwrap();
        assert_eq!(fb.index, 0);
        assert!((fb.bx.horizon - 1.5).abs() < 1e-15);
        assert_eq!(fb.start, vec![0.2, -0.3]);
        assert!(fb.bx.contains(&fb.start));
    }

    #[test]
    fn overlap_picks_largest_volume() {
        let dom = corridor();
        // the corridor mouth overlap region belongs to both boxes
        let fb = dom.select_box(0.0, &[1.9, 1.0]).unwrap();
        assert_eq!(fb.index, 0);
        // deep in the corridor only box 1 covers
        let fb = dom.select_box(0.0, &[2.5, 1.05]).unwrap();
        assert_eq!(fb.index, 1);
    }

    #[test]
    fn outside_and_boundary_points_are_rejected() {
        let dom = unit_square();
        assert!(matches!(
            dom.select_box(0.0, &[2.0, 0.0]),
            Err(WalkError::PointOutsideDomain(_))
        ));
        assert!(matches!(
            dom.select_box(0.0, &[1.0, 0.0]),
            Err(WalkError::NoCoveringBox(_))
        ));
    }

    #[test]
    fn classification_interior_boundary_terminal() {
        let mut dom = corridor();
        assert_eq!(dom.classify(0.0, &[1.0, 1.0]), Landing::Interior);
        // corridor mouth: on the room face but strictly inside the corridor
        assert_eq!(dom.classify(0.0, &[2.0, 1.0]), Landing::Interior);
        // room wall outside the mouth
        assert_eq!(dom.classify(0.0, &[2.0, 0.5]), Landing::Dirichlet);
        assert_eq!(dom.classify(0.0, &[3.0, 1.0]), Landing::Dirichlet);
        assert_eq!(dom.dirichlet.eval(&[3.0, 1.0]), 1.0);
        assert_eq!(dom.dirichlet.eval(&[2.0, 0.5]), 0.0);
        dom.horizon = 1.0;
        assert_eq!(dom.classify(1.0, &[1.0, 1.0]), Landing::Terminal);
    }

    #[test]
    fn interior_face_must_open_into_another_box() {
        let r = Domain::from_json(
            r#"{
            "boxes": [{"center": [0.0], "half_lengths": [1.0],
                       "sides": {"x0+": "interior"}}]
        }"#,
        );
        assert!(matches!(r, Err(WalkError::Config(_))));
    }

    #[test]
    fn freeze_identity_and_constant() {
        let f = CoefficientField::default();
        let fr = freeze_coefficients(&f, 0.0, &[0.3, 0.4]).unwrap();
        assert!((fr.sigma.clone() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);

        let f = CoefficientField {
            diffusion: DiffusionField::Constant {
                matrix: vec![vec![1.25, 0.4], vec![0.4, 1.0]],
            },
            drift: Some(vec![0.5, -0.25]),
            c: -1.0,
            f: 2.0,
        };
        let fr = freeze_coefficients(&f, 0.0, &[0.0, 0.0]).unwrap();
        assert!((fr.sigma.clone() * fr.sigma.transpose() - fr.a.clone()).amax() < 1e-12);
        assert!((fr.sigma.clone() - fr.sigma.transpose()).amax() < 1e-12);
        assert_eq!((fr.c, fr.f), (-1.0, 2.0));
    }

    #[test]
    fn freeze_shear_sin_reconstructs_a() {
        let f = CoefficientField {
            diffusion: DiffusionField::ShearSin,
            ..CoefficientField::default()
        };
        for &x in &[[0.0, 0.0], [0.7, -0.2], [1.3, 2.1]] {
            let fr = freeze_coefficients(&f, 0.0, &x).unwrap();
            assert!((fr.sigma.clone() * fr.sigma.transpose() - fr.a.clone()).amax() < 1e-12);
            let s = 0.5 * (x[0] + x[1]).sin();
            assert!((fr.a[(0, 1)] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_diffusion_is_rejected() {
        let f = CoefficientField {
            diffusion: DiffusionField::Constant {
                matrix: vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-18]],
            },
            ..CoefficientField::default()
        };
        assert!(matches!(
            freeze_coefficients(&f, 0.0, &[0.0, 0.0]),
            Err(WalkError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn coverage_rain_on_corridor() {
        let dom = corridor();
        let mut rng = RngStream::new(1, 0);
        let mut found = 0usize;
        let n = 20_000;
        for _ in 0..n {
            // rejection-sample a point of the open domain
            let x = [rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 2.0];
            let inside = dom
                .boxes
                .iter()
                .any(|b| b.strictly_inside(&x, 1e-9));
            if !inside {
                continue;
            }
            found += 1;
            assert!(dom.select_box(0.0, &x).is_ok(), "{x:?}");
        }
        assert!(found > n / 2);
    }

    #[test]
    fn json_round_trip() {
        let dom = corridor();
        let text = serde_json::to_string(&dom).unwrap();
        let back = Domain::from_json(&text).unwrap();
        assert_eq!(back.boxes.len(), 2);
        assert!(back.horizon.is_infinite());
        assert_eq!(back.boxes[1].label(0, -1), SideLabel::Interior);
        assert_eq!(back.boxes[1].label(0, 1), SideLabel::Dirichlet);
    }

    #[test]
    fn frozen_box_bcs_follow_labels() {
        let dom = Domain::from_json(
            r#"{
            "boxes": [
                {"center": [0.0, 0.0], "half_lengths": [1.0, 1.0],
                 "sides": {"x1-": "neumann", "x1+": "neumann"}},
                {"center": [1.5, 0.0], "half_lengths": [1.0, 1.0],
                 "sides": {"x0-": "interior"}}
            ]
        }"#,
        )
        .unwrap();
        let fb = dom.select_box(0.0, &[0.0, 0.0]).unwrap();
        assert_eq!(fb.bx.bcs[0], BoundaryPair::DD);
        assert_eq!(fb.bx.bcs[1], BoundaryPair::NN);
        assert_eq!(fb.labels[1], (SideLabel::Neumann, SideLabel::Neumann));
    }
}
