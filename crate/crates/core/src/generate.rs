//! Closed-loop trajectory generation: vel proposes a velocity, the angle is
//! integrated, stp decides whether to stop, and a force source supplies the
//! force at the new angle.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FillOracle, StaticContext};
use crate::error::{Error, Result};
use crate::network::{
    argmax, context_vector, forward_frc, forward_stp, forward_vel, NetKind, NetworkBundle,
    Recurrent,
};
use crate::scalar::Real;

/// Supplies the sensed force during generation.
pub trait ForceSource<T> {
    /// Starts a fresh trajectory at `theta_1` and returns f_1.
    fn begin(&mut self, theta_1: T, z: &StaticContext) -> Result<T>;
    /// Force at the newly integrated angle.
    fn next(&mut self, theta: T) -> Result<T>;
}

fn checked<T: Real>(f: T, what: &str) -> Result<T> {
    if f.is_finite() && f >= T::zero() {
        Ok(f)
    } else {
        Err(Error::NonFinite(format!("{what} returned force {f}")))
    }
}

impl<T: Real> ForceSource<T> for FillOracle {
    fn begin(&mut self, theta_1: T, _z: &StaticContext) -> Result<T> {
        self.reset();
        checked(T::lit(self.observe(theta_1.as_f64())), "fill oracle")
    }

    fn next(&mut self, theta: T) -> Result<T> {
        checked(T::lit(self.observe(theta.as_f64())), "fill oracle")
    }
}

/// A force that never changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantForce<T>(pub T);

impl<T: Real> ForceSource<T> for ConstantForce<T> {
    fn begin(&mut self, _theta_1: T, _z: &StaticContext) -> Result<T> {
        checked(self.0, "constant source")
    }

    fn next(&mut self, _theta: T) -> Result<T> {
        checked(self.0, "constant source")
    }
}

/// The frc network as a force source. Negative estimates are clamped to 0.
pub struct NetworkForce<'a, T> {
    net: &'a NetworkBundle<T>,
    run: Option<Recurrent<'a, T>>,
    z: Vec<T>,
}

impl<'a, T: Real> NetworkForce<'a, T> {
    pub fn new(net: &'a NetworkBundle<T>) -> Result<Self> {
        net.expect_kind(NetKind::Frc)?;
        Ok(NetworkForce {
            net,
            run: None,
            z: Vec::new(),
        })
    }

    fn estimate(&mut self, theta: T) -> Result<T> {
        let run = self.run.as_mut().ok_or(Error::InvalidArgument(
            "frc source used before begin".into(),
        ))?;
        let f = forward_frc(run, theta, &self.z)?;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("frc estimate {f}")));
        }
        Ok(f.max(T::zero()))
    }
}

impl<T: Real> ForceSource<T> for NetworkForce<'_, T> {
    fn begin(&mut self, theta_1: T, z: &StaticContext) -> Result<T> {
        self.z = context_vector(z);
        let first = crate::network::input_frame(NetKind::Frc, theta_1, T::zero(), &self.z);
        self.run = Some(self.net.start(&first)?);
        self.estimate(theta_1)
    }

    fn next(&mut self, theta: T) -> Result<T> {
        self.estimate(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    StoppedByStp,
    HitMaxSteps,
    /// The force source failed while producing the force for `step`.
    ForceFailure {
        step: usize,
        detail: String,
    },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::StoppedByStp => f.write_str("stopped_by_stp"),
            Termination::HitMaxSteps => f.write_str("hit_max_steps"),
            Termination::ForceFailure { step, detail } => {
                write!(f, "force_failure at step {step}: {detail}")
            }
        }
    }
}

/// One generated pour.
///
/// `theta` has one more entry than `omega`. `force[t]` and `p_stop[t]` are
/// the inputs and stp output at step t; a force computed for the angle after
/// the last step is discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTrajectory<T> {
    pub theta: Vec<T>,
    pub omega: Vec<T>,
    pub force: Vec<T>,
    pub p_stop: Vec<[T; 2]>,
    pub termination: Termination,
}

impl<T: Real> GeneratedTrajectory<T> {
    pub fn steps(&self) -> usize {
        self.omega.len()
    }

    /// Checks θ_{t+1} = θ_t + ω_t bit-exactly and the sequence lengths.
    pub fn check_integration(&self) -> bool {
        self.theta.len() == self.omega.len() + 1
            && self
                .omega
                .iter()
                .enumerate()
                .all(|(t, &w)| self.theta[t] + w == self.theta[t + 1])
    }

    /// Turns a force failure into an error.
    pub fn into_result(self) -> Result<Self> {
        match &self.termination {
            Termination::ForceFailure { step, detail } => Err(Error::ForceSource {
                step: *step,
                detail: detail.clone(),
            }),
            _ => Ok(self),
        }
    }

    /// CSV with columns `t,theta_deg,omega,force_lbf,p_stop`; the last
    /// angle row has empty step columns. A trailing comment line records
    /// the termination and step count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,theta_deg,omega,force_lbf,p_stop\n");
        for (t, theta) in self.theta.iter().enumerate() {
            out.push_str(&format!("{},{}", t + 1, theta.as_f64()));
            if t < self.omega.len() {
                out.push_str(&format!(
                    ",{},{},{}",
                    self.omega[t].as_f64(),
                    self.force[t].as_f64(),
                    self.p_stop[t][1].as_f64()
                ));
            } else {
                out.push_str(",,,");
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "# termination={} steps={}\n",
            self.termination,
            self.steps()
        ));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Generation with an external force source. Both networks are initialized
/// from `[θ_1, f_1, z]`; the loop runs at most `t_max` velocity steps.
pub fn generate_live<T: Real, F: ForceSource<T> + ?Sized>(
    vel: &NetworkBundle<T>,
    stp: &NetworkBundle<T>,
    force_src: &mut F,
    theta_1: T,
    z: &StaticContext,
    t_max: usize,
) -> Result<GeneratedTrajectory<T>> {
    vel.expect_kind(NetKind::Vel)?;
    stp.expect_kind(NetKind::Stp)?;
    if t_max == 0 {
        return Err(Error::InvalidArgument("t_max must be at least 1".into()));
    }
    if !theta_1.is_finite() {
        return Err(Error::NonFinite("initial angle".into()));
    }
    let zv: Vec<T> = context_vector(z);
    let mut traj = GeneratedTrajectory {
        theta: vec![theta_1],
        omega: Vec::new(),
        force: Vec::new(),
        p_stop: Vec::new(),
        termination: Termination::HitMaxSteps,
    };
    let mut f = match force_src.begin(theta_1, z) {
        Ok(f) => f,
        Err(e) => {
            traj.termination = Termination::ForceFailure {
                step: 1,
                detail: e.to_string(),
            };
            return Ok(traj);
        }
    };
    let first = crate::network::input_frame(NetKind::Vel, theta_1, f, &zv);
    let mut vel_run = vel.start(&first)?;
    let mut stp_run = stp.start(&first)?;

    let mut theta = theta_1;
    for t in 1..=t_max {
        let omega = forward_vel(&mut vel_run, theta, f, &zv)?;
        let next = theta + omega;
        let p = forward_stp(&mut stp_run, theta, f, &zv)?;
        traj.omega.push(omega);
        traj.theta.push(next);
        traj.force.push(f);
        traj.p_stop.push(p);
        if argmax(&p) == 1 {
            traj.termination = Termination::StoppedByStp;
            return Ok(traj);
        }
        if t == t_max {
            break;
        }
        theta = next;
        f = match force_src.next(theta) {
            Ok(f) => f,
            Err(e) => {
                traj.termination = Termination::ForceFailure {
                    step: t + 1,
                    detail: e.to_string(),
                };
                return Ok(traj);
            }
        };
    }
    traj.termination = Termination::HitMaxSteps;
    Ok(traj)
}

/// Generation in simulation: frc supplies f_1 from `[θ_1, z]` and every
/// later force from the freshly integrated angle.
pub fn generate_simulated<T: Real>(
    frc: &NetworkBundle<T>,
    vel: &NetworkBundle<T>,
    stp: &NetworkBundle<T>,
    theta_1: T,
    z: &StaticContext,
    t_max: usize,
) -> Result<GeneratedTrajectory<T>> {
    let mut src = NetworkForce::new(frc)?;
    generate_live(vel, stp, &mut src, theta_1, z, t_max)
}
