//! Fixed-step RK4 rollouts, experiment assembly and trajectory metrics.

pub mod config;
pub mod experiments;
mod frechet;

use serde::{Deserialize, Serialize};

pub use frechet::{arc_length_resample, discrete_frechet, frechet_distance, FRECHET_SAMPLES};

use crate::forcing::StepDiagnostics;
use crate::linalg::{is_finite_vector, ASYMMETRY_WARNING};
use crate::{FabricError, Result, State, Vector};

/// What a dynamics reports at a recorded state.
#[derive(Debug, Clone)]
pub struct Sample {
    pub acceleration: Vector,
    pub energy: EnergySample,
    pub diagnostics: StepDiagnostics,
    pub rates: RateSample,
    pub metric_asymmetry: f64,
}

impl Sample {
    pub fn bare(acceleration: Vector) -> Self {
        Self {
            acceleration,
            energy: EnergySample::default(),
            diagnostics: StepDiagnostics::default(),
            rates: RateSample::default(),
            metric_asymmetry: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    /// System Hamiltonian `H_e`.
    pub system: f64,
    /// Execution energy `L_ex`.
    pub execution: f64,
    /// Potential `ψ`.
    pub potential: f64,
}

/// Instrumented rates at a recorded state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    /// `q̇ᵀ(M_e q̈ + f_e)`.
    pub system: f64,
    /// `∂ψᵀ q̇`.
    pub potential: f64,
    /// `q̇ᵀ M_e q̇`.
    pub kinetic: f64,
}

pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    /// Acceleration only, used at intermediate RK4 stages.
    fn acceleration(&self, t: f64, q: &Vector, qd: &Vector) -> Result<Vector>;
    /// Acceleration plus recorded quantities.
    fn observe(&self, t: f64, q: &Vector, qd: &Vector) -> Result<Sample> {
        Ok(Sample::bare(self.acceleration(t, q, qd)?))
    }
    /// Task-space distance used by the convergence criterion.
    fn goal_distance(&self, _q: &Vector) -> Option<f64> {
        None
    }
}

/// Dynamics given by a closure `(q, q̇, t) ↦ q̈`.
pub struct FnDynamics<F> {
    dim: usize,
    f: F,
}

impl<F> FnDynamics<F>
where
    F: Fn(&Vector, &Vector, f64) -> Result<Vector> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Dynamics for FnDynamics<F>
where
    F: Fn(&Vector, &Vector, f64) -> Result<Vector> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn acceleration(&self, t: f64, q: &Vector, qd: &Vector) -> Result<Vector> {
        (self.f)(q, qd, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BarrierViolation,
    Converged,
    MaxTime,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BarrierViolation => "barrier_violation",
            Self::Converged => "converged",
            Self::MaxTime => "max_time",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    /// Index of the recorded row the event is attached to.
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<State>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCriterion {
    pub speed_tol: f64,
    pub distance_tol: f64,
    pub sustain: f64,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            speed_tol: 1e-3,
            distance_tol: 0.1,
            sustain: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Stops at the first sustained convergence when set.
    pub convergence: Option<ConvergenceCriterion>,
    pub seed: u64,
}

/// Time-indexed result of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub label: String,
    pub dt: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub energies: Vec<EnergySample>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub rates: Vec<RateSample>,
    pub events: Vec<Event>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl RolloutRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &Event {
        self.events.last().expect("every rollout ends with a terminal event")
    }

    pub fn final_position(&self) -> Vector {
        Vector::from_column_slice(self.positions.last().expect("non-empty rollout"))
    }

    pub fn final_velocity(&self) -> Vector {
        Vector::from_column_slice(self.velocities.last().expect("non-empty rollout"))
    }

    /// `max |H(t) − H(0)| / |H(0)|` of the recorded system energy.
    pub fn relative_energy_drift(&self) -> f64 {
        let h0 = self.energies[0].system;
        self.energies
            .iter()
            .map(|e| (e.system - h0).abs())
            .fold(0.0, f64::max)
            / h0.abs()
    }
}

/// Integrates `dynamics` with classical RK4 on the lift `(q, q̇)`.
///
/// Evaluation errors and non-finite accelerations end the rollout with a
/// barrier-violation event carrying the state; otherwise it ends with a
/// converged or max-time event.
pub fn integrate(
    dynamics: &dyn Dynamics,
    label: impl Into<String>,
    q0: &Vector,
    qd0: &Vector,
    opts: &RolloutOptions,
) -> Result<RolloutRecord> {
    if !(opts.dt > 0.0) || !(opts.horizon >= 0.0) {
        return Err(FabricError::InvalidParameter(format!(
            "dt must be positive and horizon non-negative (dt={}, horizon={})",
            opts.dt, opts.horizon
        )));
    }
    crate::error::check_state("rollout", dynamics.dim(), q0, qd0)?;
    let steps = (opts.horizon / opts.dt).round() as usize;
    let dt = opts.dt;
    let mut rec = RolloutRecord {
        label: label.into(),
        dt,
        times: Vec::with_capacity(steps + 1),
        positions: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        diagnostics: Vec::with_capacity(steps + 1),
        rates: Vec::with_capacity(steps + 1),
        events: Vec::new(),
        seed: opts.seed,
        warnings: Vec::new(),
    };
    let mut q = q0.clone();
    let mut qd = qd0.clone();
    let mut settled_since: Option<f64> = None;
    let mut warned = false;

    let violation = |rec: &mut RolloutRecord, t: f64, step: usize, msg: String, q: &Vector, qd: &Vector| {
        rec.events.push(Event {
            kind: EventKind::BarrierViolation,
            time: t,
            step,
            message: Some(msg),
            state: Some(State::new(q, qd)),
        });
    };

    for k in 0..=steps {
        let t = k as f64 * dt;
        let sample = match dynamics.observe(t, &q, &qd) {
            Ok(s) if is_finite_vector(&s.acceleration) => s,
            Ok(_) => {
                let step = rec.times.len().saturating_sub(1);
                violation(&mut rec, t, step, "non-finite acceleration".into(), &q, &qd);
                break;
            }
            Err(e) => {
                let step = rec.times.len().saturating_sub(1);
                violation(&mut rec, t, step, e.to_string(), &q, &qd);
                break;
            }
        };
        if sample.metric_asymmetry > ASYMMETRY_WARNING && !warned {
            rec.warnings.push(format!(
                "metric asymmetry {:.3e} at t={t} exceeds {ASYMMETRY_WARNING:e}",
                sample.metric_asymmetry
            ));
            warned = true;
        }
        rec.times.push(t);
        rec.positions.push(q.iter().copied().collect());
        rec.velocities.push(qd.iter().copied().collect());
        rec.energies.push(sample.energy);
        rec.diagnostics.push(sample.diagnostics);
        rec.rates.push(sample.rates);
        let step = rec.times.len() - 1;

        if let (Some(crit), Some(dist)) = (opts.convergence, dynamics.goal_distance(&q)) {
            if dist < crit.distance_tol && qd.norm() < crit.speed_tol {
                let since = *settled_since.get_or_insert(t);
                if t - since >= crit.sustain - 1e-9 {
                    rec.events.push(Event {
                        kind: EventKind::Converged,
                        time: t,
                        step,
                        message: None,
                        state: None,
                    });
                    break;
                }
            } else {
                settled_since = None;
            }
        }
        if k == steps {
            rec.events.push(Event {
                kind: EventKind::MaxTime,
                time: t,
                step,
                message: None,
                state: None,
            });
            break;
        }

        match rk4_step(dynamics, t, &q, &qd, &sample.acceleration, dt) {
            Ok((qn, qdn)) => {
                q = qn;
                qd = qdn;
            }
            Err(e) => {
                violation(&mut rec, t, step, e.to_string(), &q, &qd);
                break;
            }
        }
    }
    Ok(rec)
}

fn rk4_step(
    dynamics: &dyn Dynamics,
    t: f64,
    q: &Vector,
    qd: &Vector,
    a1: &Vector,
    dt: f64,
) -> Result<(Vector, Vector)> {
    let half = 0.5 * dt;
    let finite = |a: Vector, q: &Vector, qd: &Vector| -> Result<Vector> {
        if is_finite_vector(&a) {
            Ok(a)
        } else {
            Err(FabricError::NonFinite {
                what: "acceleration",
                state: State::new(q, qd),
            })
        }
    };
    let v1 = qd.clone();
    let q2 = q + &v1 * half;
    let v2 = qd + a1 * half;
    let a2 = finite(dynamics.acceleration(t + half, &q2, &v2)?, &q2, &v2)?;
    let q3 = q + &v2 * half;
    let v3 = qd + &a2 * half;
    let a3 = finite(dynamics.acceleration(t + half, &q3, &v3)?, &q3, &v3)?;
    let q4 = q + &v3 * dt;
    let v4 = qd + &a3 * dt;
    let a4 = finite(dynamics.acceleration(t + dt, &q4, &v4)?, &q4, &v4)?;
    let qn = q + (v1 + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
    let qdn = qd + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    Ok((qn, qdn))
}

/// RK4 rollout of a bare acceleration closure over `[0, horizon]`.
pub fn rk4_rollout(
    accel: impl Fn(&Vector, &Vector, f64) -> Result<Vector> + Sync,
    q0: &Vector,
    qd0: &Vector,
    dt: f64,
    horizon: f64,
) -> Result<RolloutRecord> {
    let dynamics = FnDynamics::new(q0.len(), accel);
    integrate(
        &dynamics,
        "rollout",
        q0,
        qd0,
        &RolloutOptions {
            dt,
            horizon,
            convergence: None,
            seed: 0,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: &[f64]) -> Vector {
        Vector::from_row_slice(a)
    }

    #[test]
    fn free_particle_is_exact() {
        let r = rk4_rollout(|q, _, _| Ok(Vector::zeros(q.len())), &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), 0.01, 1.0).unwrap();
        assert_eq!(r.len(), 101);
        assert!((r.final_position() - v(&[1.0, 0.0])).norm() < 1e-13);
        assert_eq!(r.terminal().kind, EventKind::MaxTime);
        assert_eq!(r.events.len(), 1);
    }

    #[test]
    fn times_have_constant_step() {
        let r = rk4_rollout(|q, _, _| Ok(-q), &v(&[1.0]), &v(&[0.0]), 0.01, 2.0).unwrap();
        for w in r.times.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let r = rk4_rollout(|q, _, _| Ok(-q), &v(&[1.0]), &v(&[0.0]), 0.01, 16.0).unwrap();
        let mut drift: f64 = 0.0;
        for (i, t) in r.times.iter().enumerate() {
            let (x, xd) = (r.positions[i][0], r.velocities[i][0]);
            assert!((x - t.cos()).abs() < 1e-8);
            drift = drift.max((0.5 * (x * x + xd * xd) - 0.5).abs() / 0.5);
        }
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn non_finite_acceleration_halts_with_state() {
        let r = rk4_rollout(
            |q, _, _| Ok(if q[0] > 0.5 { v(&[f64::NAN]) } else { v(&[0.0]) }),
            &v(&[0.0]),
            &v(&[1.0]),
            0.01,
            2.0,
        )
        .unwrap();
        let ev = r.terminal();
        assert_eq!(ev.kind, EventKind::BarrierViolation);
        assert!(ev.state.is_some());
        assert_eq!(r.events.len(), 1);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(rk4_rollout(|q, _, _| Ok(-q), &v(&[1.0]), &v(&[0.0]), 0.0, 1.0).is_err());
    }
}
