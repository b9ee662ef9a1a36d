//! Trapping regions `U = {u < 0}` and their definition files.

use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, HashMapContext, Node as ExprNode, Value};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projective::{fs_distance, sup_norm, CenterProjection, HomogeneousPoint};

type C64 = Complex64;

/// Shape of a region, as named in definition files.
#[derive(Clone, Debug)]
pub enum RegionKind {
    /// `{|s| < t}` in the fiber coordinate of the projection.
    FiberCone { t: f64 },
    /// `{t_inner < |s| < t_outer}`; not star-shaped.
    FiberAnnulus { inner: f64, outer: f64 },
    /// `{min |z_i| < max |z_i| / 2}`, the complement of a neighbourhood of the
    /// unit torus; a neighbourhood of all coordinate hyperplanes.
    CoordinateHyperplanes,
    /// `P^k` minus a closed FS ball.
    ComplementBall { center: HomogeneousPoint, radius: f64 },
    /// All of `P^k`.
    Whole,
    /// `u` given by an expression in `a0..ak` (moduli of sup-normalized
    /// coordinates) and `s` (fiber modulus).
    Expression { source: String, tree: Arc<ExprNode> },
}

#[derive(Clone, Debug)]
pub struct TrappingRegion {
    pub kind: RegionKind,
    pub projection: CenterProjection,
    /// Set by a successful trapping check.
    pub validated_margin: Option<f64>,
}

impl TrappingRegion {
    pub fn new(kind: RegionKind, projection: CenterProjection) -> Self {
        Self { kind, projection, validated_margin: None }
    }

    /// `{|z_axis| < t · max_{i≠axis} |z_i|}` with `I = e_axis`, `L = {z_axis = 0}`.
    pub fn fiber_cone(k: usize, axis: usize, t: f64) -> Self {
        Self::new(RegionKind::FiberCone { t }, CenterProjection::coordinate(k, axis))
    }

    pub fn expression(source: &str, projection: CenterProjection) -> Result<Self> {
        let tree = build_operator_tree(source).map_err(|e| Error::Region(format!("{source}: {e}")))?;
        let region = Self::new(RegionKind::Expression { source: source.to_string(), tree: Arc::new(tree) }, projection);
        let probe = region.projection.target().orthonormal_basis()[0].clone();
        region.try_defining_function(&HomogeneousPoint::new(probe)?)?;
        Ok(region)
    }

    pub fn k(&self) -> usize {
        self.projection.center().k()
    }

    /// Defining function `u`; `U = {u < 0}`.
    pub fn defining_function(&self, x: &HomogeneousPoint) -> f64 {
        self.try_defining_function(x).unwrap_or(f64::NAN)
    }

    fn try_defining_function(&self, x: &HomogeneousPoint) -> Result<f64> {
        Ok(match &self.kind {
            RegionKind::FiberCone { t } => self.fiber_modulus_capped(x) - t,
            RegionKind::FiberAnnulus { inner, outer } => {
                let s = self.fiber_modulus_capped(x);
                (inner - s).max(s - outer)
            }
            RegionKind::CoordinateHyperplanes => {
                let m = x.coords().iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
                m / sup_norm(x.coords()) - 0.5
            }
            RegionKind::ComplementBall { center, radius } => radius - fs_distance(x, center),
            RegionKind::Whole => -1.0,
            RegionKind::Expression { source, tree } => {
                let mut ctx = HashMapContext::new();
                let sup = sup_norm(x.coords());
                for (i, c) in x.coords().iter().enumerate() {
                    ctx.set_value(format!("a{i}"), Value::Float(c.norm() / sup))
                        .map_err(|e| Error::Region(e.to_string()))?;
                }
                ctx.set_value("s".into(), Value::Float(self.fiber_modulus_capped(x)))
                    .map_err(|e| Error::Region(e.to_string()))?;
                tree.eval_number_with_context(&ctx).map_err(|e| Error::Region(format!("{source}: {e}")))?
            }
        })
    }

    fn fiber_modulus_capped(&self, x: &HomogeneousPoint) -> f64 {
        self.projection.fiber_modulus(x).min(1e300)
    }

    pub fn contains(&self, x: &HomogeneousPoint) -> bool {
        self.defining_function(x) < 0.0
    }

    /// Whether the region can have a nonempty boundary.
    pub fn is_whole(&self) -> bool {
        matches!(self.kind, RegionKind::Whole)
    }

    /// The point of the fiber over `base ∈ L` at fiber coordinate `s`.
    pub fn fiber_point(&self, base: &HomogeneousPoint, s: C64) -> Result<HomogeneousPoint> {
        self.projection.fiber_point(base, s)
    }

    pub fn to_file(&self) -> RegionFile {
        let (kind, params, expression) = match &self.kind {
            RegionKind::FiberCone { t } => ("fiber_cone", vec![*t], None),
            RegionKind::FiberAnnulus { inner, outer } => ("fiber_annulus", vec![*inner, *outer], None),
            RegionKind::CoordinateHyperplanes => ("coordinate_hyperplanes", vec![], None),
            RegionKind::ComplementBall { radius, .. } => ("complement_ball", vec![*radius], None),
            RegionKind::Whole => ("whole", vec![], None),
            RegionKind::Expression { source, .. } => ("expression", vec![], Some(source.clone())),
        };
        let center = match &self.kind {
            RegionKind::ComplementBall { center, .. } => Some(center.coords().iter().map(|c| [c.re, c.im]).collect()),
            _ => None,
        };
        RegionFile {
            kind: kind.to_string(),
            k: self.k(),
            axis: None,
            params,
            expression,
            ball_center: center,
            center: Some(coords_of(&self.projection.center().orthonormal_basis()[0])),
            target: Some(self.projection.target().orthonormal_basis().iter().map(|b| coords_of(b)).collect()),
        }
    }
}

fn coords_of(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn to_complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

/// TOML region definition.
///
/// ```toml
/// kind = "fiber_cone"   # fiber_annulus, coordinate_hyperplanes, complement_ball, whole, expression
/// k = 2
/// axis = 2              # I = e_axis, L = {z_axis = 0}; or give `center` and `target`
/// params = [0.2]
/// expression = "s - 0.2"
/// ```
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RegionFile {
    pub kind: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub axis: Option<usize>,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub expression: Option<String>,
    #[serde(default)]
    pub ball_center: Option<Vec<[f64; 2]>>,
    /// Lift of the center point `I` (p = 1).
    #[serde(default)]
    pub center: Option<Vec<[f64; 2]>>,
    /// Spanning lifts of `L`.
    #[serde(default)]
    pub target: Option<Vec<Vec<[f64; 2]>>>,
}

fn default_k() -> usize {
    2
}

impl RegionFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Region(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("region file serializes")
    }

    fn param(&self, i: usize) -> Result<f64> {
        self.params.get(i).copied().ok_or_else(|| Error::Region(format!("{}: missing params[{i}]", self.kind)))
    }

    pub fn build(&self) -> Result<TrappingRegion> {
        use crate::projective::LinearSubspace;
        let projection = match (&self.center, &self.target) {
            (Some(c), Some(t)) => CenterProjection::new(
                LinearSubspace::span(&[to_complex(c)])?,
                LinearSubspace::span(&t.iter().map(|v| to_complex(v)).collect::<Vec<_>>())?,
            )?,
            _ => CenterProjection::coordinate(self.k, self.axis.unwrap_or(self.k)),
        };
        let kind = match self.kind.as_str() {
            "fiber_cone" => RegionKind::FiberCone { t: self.param(0)? },
            "fiber_annulus" => RegionKind::FiberAnnulus { inner: self.param(0)?, outer: self.param(1)? },
            "coordinate_hyperplanes" => RegionKind::CoordinateHyperplanes,
            "complement_ball" => RegionKind::ComplementBall {
                center: HomogeneousPoint::new(to_complex(
                    self.ball_center.as_ref().ok_or_else(|| Error::Region("complement_ball needs ball_center".into()))?,
                ))?,
                radius: self.param(0)?,
            },
            "whole" => RegionKind::Whole,
            "expression" => {
                let src = self.expression.as_ref().ok_or_else(|| Error::Region("expression region needs `expression`".into()))?;
                return TrappingRegion::expression(src, projection);
            }
            other => return Err(Error::Region(format!("unknown region kind {other}"))),
        };
        Ok(TrappingRegion::new(kind, projection))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fiber_cone_membership() {
        let u = TrappingRegion::fiber_cone(2, 2, 0.2);
        assert!(u.contains(&HomogeneousPoint::from_real(&[1.0, 0.5, 0.1]).unwrap()));
        assert!(!u.contains(&HomogeneousPoint::from_real(&[1.0, 0.5, 0.3]).unwrap()));
        assert!(!u.contains(&HomogeneousPoint::from_real(&[0.0, 0.0, 1.0]).unwrap()));
    }

    #[test]
    fn expression_matches_builtin() {
        let a = TrappingRegion::fiber_cone(2, 2, 0.2);
        let b = TrappingRegion::expression("a2 / max(a0, a1) - 0.2", CenterProjection::coordinate(2, 2)).unwrap();
        let c = TrappingRegion::expression("s - 0.2", CenterProjection::coordinate(2, 2)).unwrap();
        for p in [[1.0, 0.3, 0.1], [0.2, 1.0, -0.7], [0.5, 0.5, 1.0]] {
            let x = HomogeneousPoint::from_real(&p).unwrap();
            assert!((a.defining_function(&x) - b.defining_function(&x)).abs() < 1e-12);
            assert!((a.defining_function(&x) - c.defining_function(&x)).abs() < 1e-12);
        }
        assert!(TrappingRegion::expression("s - ", CenterProjection::coordinate(2, 2)).is_err());
    }

    #[test]
    fn file_round_trip() {
        let text = "kind = \"fiber_cone\"\nk = 2\naxis = 2\nparams = [0.2]\n";
        let r = RegionFile::parse(text).unwrap().build().unwrap();
        let again = RegionFile::parse(&r.to_file().to_toml()).unwrap().build().unwrap();
        let x = HomogeneousPoint::from_real(&[1.0, 0.4, 0.15]).unwrap();
        assert!((r.defining_function(&x) - again.defining_function(&x)).abs() < 1e-12);
        assert!(RegionFile::parse("kind = \"blob\"").unwrap().build().is_err());
    }
}
