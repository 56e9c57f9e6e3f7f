//! Planar (SE(2)) value types shared by every layer of the controller.
//!
//! Units are SI throughout: metres, seconds, newtons, radians. Wrench
//! "magnitude" always means the norm of the linear force components; torque is
//! carried along but never enters a threshold comparison.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances at or below this are treated as coincident points.
pub const DIRECTION_EPS: f64 = 1e-9;

/// Two-dimensional vector used for directions, forces and velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotates the vector by `angle` radians (counter-clockwise).
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > DIRECTION_EPS).then(|| Vec2::new(self.x / n, self.y / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Planar force/torque: `fx`, `fy` in N, `tau` in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarWrench {
    pub fx: f64,
    pub fy: f64,
    pub tau: f64,
}

impl PlanarWrench {
    pub const ZERO: PlanarWrench = PlanarWrench { fx: 0.0, fy: 0.0, tau: 0.0 };

    pub const fn new(fx: f64, fy: f64, tau: f64) -> Self {
        Self { fx, fy, tau }
    }

    /// Pure translational wrench.
    pub fn from_force(f: Vec2) -> Self {
        Self::new(f.x, f.y, 0.0)
    }

    pub fn force(&self) -> Vec2 {
        Vec2::new(self.fx, self.fy)
    }

    /// Linear force norm; torque is excluded by convention.
    pub fn magnitude(&self) -> f64 {
        self.fx.hypot(self.fy)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.fx * k, self.fy * k, self.tau * k)
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.tau.is_finite()
    }

    /// Expresses a world-frame wrench in a frame rotated by `theta`.
    pub fn to_body_frame(&self, theta: f64) -> Self {
        let f = self.force().rotated(-theta);
        Self::new(f.x, f.y, self.tau)
    }
}

impl Add for PlanarWrench {
    type Output = PlanarWrench;
    fn add(self, rhs: PlanarWrench) -> PlanarWrench {
        PlanarWrench::new(self.fx + rhs.fx, self.fy + rhs.fy, self.tau + rhs.tau)
    }
}

impl Sub for PlanarWrench {
    type Output = PlanarWrench;
    fn sub(self, rhs: PlanarWrench) -> PlanarWrench {
        PlanarWrench::new(self.fx - rhs.fx, self.fy - rhs.fy, self.tau - rhs.tau)
    }
}

/// Planar velocity: `vx`, `vy` in m/s, `wz` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarTwist {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
}

impl PlanarTwist {
    pub const ZERO: PlanarTwist = PlanarTwist { vx: 0.0, vy: 0.0, wz: 0.0 };

    pub const fn new(vx: f64, vy: f64, wz: f64) -> Self {
        Self { vx, vy, wz }
    }

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.wz.is_finite()
    }
}

/// Planar acceleration: `ax`, `ay` in m/s², `alphaz` in rad/s².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarAccel {
    pub ax: f64,
    pub ay: f64,
    pub alphaz: f64,
}

/// Object configuration in the plane. `theta` is kept in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &PlanarPose) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut a = theta.rem_euclid(two_pi);
    if a > PI {
        a -= two_pi;
    }
    a
}

/// Unit vector pointing from `from` to `to` in the plane.
pub fn unit_direction(from: &PlanarPose, to: &PlanarPose) -> Result<Vec2> {
    let d = Vec2::new(to.x - from.x, to.y - from.y);
    let n = d.norm();
    if n <= DIRECTION_EPS {
        return Err(Error::DegenerateDirection { distance: n });
    }
    Ok(Vec2::new(d.x / n, d.y / n))
}

/// Scalar projection of `v` onto a unit direction.
pub fn project(v: Vec2, dir: Vec2) -> f64 {
    debug_assert!((dir.norm() - 1.0).abs() < 1e-9, "projection direction must be unit");
    v.dot(dir)
}

/// Level of commitment an agent has to its goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Commitment {
    Hard,
    Soft,
    Follower,
}

/// An agent's task: which goal (if any) and how strongly it holds it.
///
/// A goal index is present exactly when the commitment is not `Follower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAssignment", into = "RawAssignment")]
pub struct GoalAssignment {
    goal_index: Option<usize>,
    commitment: Commitment,
}

#[derive(Serialize, Deserialize)]
struct RawAssignment {
    goal_index: Option<usize>,
    commitment: Commitment,
}

impl TryFrom<RawAssignment> for GoalAssignment {
    type Error = Error;
    fn try_from(raw: RawAssignment) -> Result<Self> {
        match (raw.commitment, raw.goal_index) {
            (Commitment::Follower, None) => Ok(Self::follower()),
            (Commitment::Follower, Some(_)) => Err(Error::Config("a follower assignment carries no goal".into())),
            (c, Some(g)) => Ok(Self { goal_index: Some(g), commitment: c }),
            (_, None) => Err(Error::Config("hard and soft assignments need a goal".into())),
        }
    }
}

impl From<GoalAssignment> for RawAssignment {
    fn from(a: GoalAssignment) -> Self {
        RawAssignment { goal_index: a.goal_index, commitment: a.commitment }
    }
}

impl GoalAssignment {
    pub fn hard(goal: usize) -> Self {
        Self { goal_index: Some(goal), commitment: Commitment::Hard }
    }

    pub fn soft(goal: usize) -> Self {
        Self { goal_index: Some(goal), commitment: Commitment::Soft }
    }

    pub fn follower() -> Self {
        Self { goal_index: None, commitment: Commitment::Follower }
    }

    pub fn goal_index(&self) -> Option<usize> {
        self.goal_index
    }

    pub fn commitment(&self) -> Commitment {
        self.commitment
    }
}

/// The candidate goal sites, the start pose and the arrival tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    sites: Vec<PlanarPose>,
    reach_tolerance: f64,
    start: PlanarPose,
}

impl GoalSet {
    pub fn new(sites: Vec<PlanarPose>, reach_tolerance: f64, start: PlanarPose) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Config("goal set is empty".into()));
        }
        if !(reach_tolerance > 0.0 && reach_tolerance.is_finite()) {
            return Err(Error::Config(format!("reach tolerance {reach_tolerance} must be positive")));
        }
        for (i, a) in sites.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::Config(format!("goal {i} is not finite")));
            }
            if a.distance(&start) <= reach_tolerance {
                return Err(Error::Config(format!("goal {i} lies within reach of the start pose")));
            }
            for b in &sites[..i] {
                if a.distance(b) <= DIRECTION_EPS {
                    return Err(Error::Config(format!("goal {i} duplicates an earlier site")));
                }
            }
        }
        Ok(Self { sites, reach_tolerance, start })
    }

    /// Sites fanned out symmetrically around the +y axis, `radius` from the
    /// start pose and `separation` radians apart.
    pub fn fan(n: usize, radius: f64, separation: f64, reach_tolerance: f64) -> Result<Self> {
        let start = PlanarPose::default();
        let mid = (n as f64 - 1.0) / 2.0;
        let sites = (0..n)
            .map(|i| {
                // index 0 sits on the −x side
                let angle = (i as f64 - mid) * separation;
                PlanarPose::new(radius * angle.sin(), radius * angle.cos(), 0.0)
            })
            .collect();
        Self::new(sites, reach_tolerance, start)
    }

    pub fn sites(&self) -> &[PlanarPose] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, index: usize) -> Option<&PlanarPose> {
        self.sites.get(index)
    }

    pub fn reach_tolerance(&self) -> f64 {
        self.reach_tolerance
    }

    pub fn start(&self) -> PlanarPose {
        self.start
    }

    /// Direction from `pose` toward goal `index`.
    pub fn direction_to(&self, pose: &PlanarPose, index: usize) -> Result<Vec2> {
        let site = self.sites.get(index).ok_or(Error::GoalIndex { index, len: self.sites.len() })?;
        unit_direction(pose, site)
    }
}

impl Default for GoalSet {
    /// Three sites 0.5 m from the start, 40° apart, 3 cm arrival tolerance.
    fn default() -> Self {
        Self::fan(3, 0.5, 40f64.to_radians(), 0.03).expect("default goal geometry is valid")
    }
}
