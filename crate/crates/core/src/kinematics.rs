//! Task maps used by the experiments: planar arm kinematics, scalar distance
//! maps and the polar chart.

use crate::error::{check_dim, check_state};
use crate::taskmap::TaskMap;
use crate::{FabricError, Matrix, Result, State, Vector};

/// Serial planar chain with revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArm {
    pub link_lengths: Vec<f64>,
    pub joint_limits: Vec<(f64, f64)>,
    pub default_config: Vec<f64>,
}

impl Default for PlanarArm {
    fn default() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
        Self {
            link_lengths: vec![1.0, 1.0, 1.0],
            joint_limits: vec![(-PI, PI); 3],
            default_config: vec![FRAC_PI_2, -FRAC_PI_4, -FRAC_PI_4],
        }
    }
}

/// End-effector position and Jacobian at one configuration.
#[derive(Debug, Clone)]
pub struct ArmFk {
    pub ee: Vector,
    pub jacobian: Matrix,
}

impl PlanarArm {
    pub fn new(link_lengths: Vec<f64>, joint_limits: Vec<(f64, f64)>, default_config: Vec<f64>) -> Result<Self> {
        let n = link_lengths.len();
        if n == 0 || link_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(FabricError::InvalidParameter("link lengths must be positive".into()));
        }
        check_dim("joint limits", n, joint_limits.len())?;
        check_dim("default configuration", n, default_config.len())?;
        if joint_limits.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(FabricError::InvalidParameter("joint limits must satisfy lower < upper".into()));
        }
        Ok(Self {
            link_lengths,
            joint_limits,
            default_config,
        })
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    fn absolute_angles(&self, q: &Vector) -> Vec<f64> {
        q.iter()
            .scan(0.0, |acc, qi| {
                *acc += qi;
                Some(*acc)
            })
            .collect()
    }

    /// Base, elbow points and end effector.
    pub fn joint_positions(&self, q: &Vector) -> Result<Vec<[f64; 2]>> {
        check_dim("planar arm", self.dof(), q.len())?;
        let mut p = [0.0, 0.0];
        let mut out = vec![p];
        for (l, th) in self.link_lengths.iter().zip(self.absolute_angles(q)) {
            p = [p[0] + l * th.cos(), p[1] + l * th.sin()];
            out.push(p);
        }
        Ok(out)
    }

    pub fn fk(&self, q: &Vector) -> Result<ArmFk> {
        check_dim("planar arm", self.dof(), q.len())?;
        let n = self.dof();
        let th = self.absolute_angles(q);
        let mut ee = Vector::zeros(2);
        let mut jacobian = Matrix::zeros(2, n);
        for i in 0..n {
            let (s, c) = th[i].sin_cos();
            let l = self.link_lengths[i];
            ee[0] += l * c;
            ee[1] += l * s;
            for j in 0..=i {
                jacobian[(0, j)] -= l * s;
                jacobian[(1, j)] += l * c;
            }
        }
        Ok(ArmFk { ee, jacobian })
    }
}

/// Free-function form of [`PlanarArm::fk`].
pub fn arm_fk(arm: &PlanarArm, q: &Vector) -> Result<ArmFk> {
    arm.fk(q)
}

impl TaskMap for PlanarArm {
    fn domain_dim(&self) -> usize {
        self.dof()
    }
    fn codomain_dim(&self) -> usize {
        2
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        Ok(self.fk(q)?.ee)
    }
    fn jacobian(&self, q: &Vector) -> Result<Matrix> {
        Ok(self.fk(q)?.jacobian)
    }
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        check_state("planar arm", self.dof(), q, qd)?;
        let th = self.absolute_angles(q);
        let om = self.absolute_angles(qd);
        let mut out = Vector::zeros(2);
        for i in 0..self.dof() {
            let (s, c) = th[i].sin_cos();
            let w2 = om[i] * om[i] * self.link_lengths[i];
            out[0] -= w2 * c;
            out[1] -= w2 * s;
        }
        Ok(out)
    }
}

/// Scalar distance-like maps `ℝⁿ → ℝ`, positive on the admissible region.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceMap1D {
    /// `x = q̄ − q_i`.
    UpperLimit { dim: usize, index: usize, limit: f64 },
    /// `x = q_i − q̲`.
    LowerLimit { dim: usize, index: usize, limit: f64 },
    /// `x = ‖q − c‖/r − 1`.
    CircleObstacle { center: Vector, radius: f64 },
    /// `x = n̂·q − offset`.
    FloorHeight { normal: Vector, offset: f64 },
    /// `x = |q₀ − goal|`, the distance along the first axis.
    HorizontalGoalDistance { dim: usize, goal: f64 },
}

impl DistanceMap1D {
    pub fn circle(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(FabricError::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(Self::CircleObstacle { center, radius })
    }

    /// Floor line `y = floor` in the plane with upward normal.
    pub fn floor(floor: f64) -> Self {
        Self::FloorHeight {
            normal: Vector::from_column_slice(&[0.0, 1.0]),
            offset: floor,
        }
    }

    /// The `2n` limit maps of a box `lower ≤ q ≤ upper`.
    pub fn box_limits(lower: &[f64], upper: &[f64]) -> Result<Vec<Self>> {
        check_dim("box limits", lower.len(), upper.len())?;
        let dim = lower.len();
        let mut out = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            out.push(Self::UpperLimit { dim, index: i, limit: upper[i] });
            out.push(Self::LowerLimit { dim, index: i, limit: lower[i] });
        }
        Ok(out)
    }

    /// Value, Jacobian row and curvature `J̇q̇` at one state.
    pub fn distance(&self, q: &Vector, qd: &Vector) -> Result<(f64, Vector, f64)> {
        check_state("distance map", self.dim(), q, qd)?;
        let n = self.dim();
        let basis = |i: usize, s: f64| {
            let mut e = Vector::zeros(n);
            e[i] = s;
            e
        };
        Ok(match self {
            Self::UpperLimit { index, limit, .. } => (limit - q[*index], basis(*index, -1.0), 0.0),
            Self::LowerLimit { index, limit, .. } => (q[*index] - limit, basis(*index, 1.0), 0.0),
            Self::CircleObstacle { center, radius } => {
                let delta = q - center;
                let d = delta.norm();
                if d == 0.0 {
                    return Err(FabricError::NonDifferentiable {
                        what: "circle distance map",
                        state: State::new(q, qd),
                    });
                }
                let nrm = delta / d;
                let along = nrm.dot(qd);
                let curv = (qd.norm_squared() - along * along) / (radius * d);
                (d / radius - 1.0, nrm / *radius, curv)
            }
            Self::FloorHeight { normal, offset } => (normal.dot(q) - offset, normal.clone(), 0.0),
            Self::HorizontalGoalDistance { goal, .. } => {
                let s = q[0] - goal;
                if s == 0.0 {
                    return Err(FabricError::NonDifferentiable {
                        what: "horizontal distance map",
                        state: State::new(q, qd),
                    });
                }
                (s.abs(), basis(0, s.signum()), 0.0)
            }
        })
    }

    fn dim(&self) -> usize {
        match self {
            Self::UpperLimit { dim, .. } | Self::LowerLimit { dim, .. } | Self::HorizontalGoalDistance { dim, .. } => *dim,
            Self::CircleObstacle { center, .. } => center.len(),
            Self::FloorHeight { normal, .. } => normal.len(),
        }
    }
}

/// Free-function form of [`DistanceMap1D::distance`].
pub fn distance_map(map: &DistanceMap1D, q: &Vector, qd: &Vector) -> Result<(f64, Vector, f64)> {
    map.distance(q, qd)
}

impl TaskMap for DistanceMap1D {
    fn domain_dim(&self) -> usize {
        self.dim()
    }
    fn codomain_dim(&self) -> usize {
        1
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        let zero = Vector::zeros(q.len());
        Ok(Vector::from_element(1, self.distance(q, &zero)?.0))
    }
    fn jacobian(&self, q: &Vector) -> Result<Matrix> {
        let zero = Vector::zeros(q.len());
        let row = self.distance(q, &zero)?.1;
        Ok(Matrix::from_row_slice(1, row.len(), row.as_slice()))
    }
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        Ok(Vector::from_element(1, self.distance(q, qd)?.2))
    }
}

/// `(r, θ) ↦ (r cos θ, r sin θ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarMap;

impl PolarMap {
    fn check(q: &Vector) -> Result<()> {
        check_dim("polar map", 2, q.len())?;
        if !(q[0] > 0.0) {
            return Err(FabricError::NonDifferentiable {
                what: "polar map (r ≤ 0)",
                state: State::position_only(q),
            });
        }
        Ok(())
    }
}

impl TaskMap for PolarMap {
    fn domain_dim(&self) -> usize {
        2
    }
    fn codomain_dim(&self) -> usize {
        2
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        Self::check(q)?;
        let (s, c) = q[1].sin_cos();
        Ok(Vector::from_column_slice(&[q[0] * c, q[0] * s]))
    }
    fn jacobian(&self, q: &Vector) -> Result<Matrix> {
        Self::check(q)?;
        let (s, c) = q[1].sin_cos();
        Ok(Matrix::from_row_slice(2, 2, &[c, -q[0] * s, s, q[0] * c]))
    }
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        Self::check(q)?;
        check_dim("polar map", 2, qd.len())?;
        let (s, c) = q[1].sin_cos();
        let (r, rd, td) = (q[0], qd[0], qd[1]);
        Ok(Vector::from_column_slice(&[
            -2.0 * rd * td * s - r * td * td * c,
            2.0 * rd * td * c - r * td * td * s,
        ]))
    }
}

/// `(x, y) ↦ (‖(x, y)‖, atan2(y, x))`, the inverse of [`PolarMap`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CartesianToPolar;

impl CartesianToPolar {
    fn radius(q: &Vector) -> Result<f64> {
        check_dim("cartesian-to-polar map", 2, q.len())?;
        let r = q.norm();
        if r == 0.0 {
            return Err(FabricError::NonDifferentiable {
                what: "cartesian-to-polar map (origin)",
                state: State::position_only(q),
            });
        }
        Ok(r)
    }
}

impl TaskMap for CartesianToPolar {
    fn domain_dim(&self) -> usize {
        2
    }
    fn codomain_dim(&self) -> usize {
        2
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        let r = Self::radius(q)?;
        Ok(Vector::from_column_slice(&[r, q[1].atan2(q[0])]))
    }
    fn jacobian(&self, q: &Vector) -> Result<Matrix> {
        let r = Self::radius(q)?;
        let r2 = r * r;
        Ok(Matrix::from_row_slice(2, 2, &[q[0] / r, q[1] / r, -q[1] / r2, q[0] / r2]))
    }
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        let r = Self::radius(q)?;
        check_dim("cartesian-to-polar map", 2, qd.len())?;
        let rd = q.dot(qd) / r;
        let td = (q[0] * qd[1] - q[1] * qd[0]) / (r * r);
        Ok(Vector::from_column_slice(&[(qd.norm_squared() - rd * rd) / r, -2.0 * rd * td / r]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmap::check_map_derivatives;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(a: &[f64]) -> Vector {
        Vector::from_row_slice(a)
    }

    #[test]
    fn arm_fk_examples() {
        let arm = PlanarArm::default();
        let ee = arm.fk(&v(&[0.0, 0.0, 0.0])).unwrap().ee;
        assert!((ee - v(&[3.0, 0.0])).norm() < 1e-15);
        let ee = arm.fk(&v(&[FRAC_PI_2, 0.0, 0.0])).unwrap().ee;
        assert!((ee - v(&[0.0, 3.0])).norm() < 1e-15);
    }

    #[test]
    fn arm_angle_wrap() {
        let arm = PlanarArm::default();
        let q = v(&[0.3, -1.2, 0.8]);
        for j in 0..3 {
            let mut w = q.clone();
            w[j] += 2.0 * PI;
            assert!((arm.map(&q).unwrap() - arm.map(&w).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn arm_derivatives() {
        let arm = PlanarArm::default();
        let c = check_map_derivatives(&arm, &v(&[0.3, -1.2, 0.8]), &v(&[0.5, 1.0, -2.0])).unwrap();
        assert!(c.within(1e-6, 1e-6), "{c:?}");
        let pts = arm.joint_positions(&v(&[0.3, -1.2, 0.8])).unwrap();
        let ee = arm.map(&v(&[0.3, -1.2, 0.8])).unwrap();
        assert_eq!(pts.len(), 4);
        assert!((pts[3][0] - ee[0]).abs() < 1e-15 && (pts[3][1] - ee[1]).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let z = v(&[0.0, 0.0]);
        let up = DistanceMap1D::UpperLimit { dim: 2, index: 0, limit: 4.0 };
        assert_eq!(up.distance(&v(&[1.0, 0.0]), &z).unwrap().0, 3.0);
        let c = DistanceMap1D::circle(v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(c.distance(&v(&[2.0, 0.0]), &z).unwrap().0, 1.0);
        let f = DistanceMap1D::floor(0.0);
        assert_eq!(f.distance(&v(&[0.4, 0.7]), &z).unwrap().0, 0.7);
        assert!(matches!(
            c.distance(&v(&[0.0, 0.0]), &z),
            Err(FabricError::NonDifferentiable { .. })
        ));
    }

    #[test]
    fn box_limits_come_in_pairs() {
        let maps = DistanceMap1D::box_limits(&[-4.0, -4.0], &[4.0, 4.0]).unwrap();
        assert_eq!(maps.len(), 4);
    }

    #[test]
    fn polar_examples() {
        let p = PolarMap;
        assert!((p.map(&v(&[1.0, 0.0])).unwrap() - v(&[1.0, 0.0])).norm() < 1e-15);
        assert!((p.map(&v(&[2.0, FRAC_PI_2])).unwrap() - v(&[0.0, 2.0])).norm() < 1e-15);
        assert!(p.map(&v(&[0.0, 1.0])).is_err());
        assert!(p.map(&v(&[-1.0, 1.0])).is_err());
    }

    #[test]
    fn polar_round_trip() {
        let q = v(&[1.7, 0.4]);
        let back = CartesianToPolar.map(&PolarMap.map(&q).unwrap()).unwrap();
        assert!((back - q).norm() < 1e-14);
    }
}
