//! Seven-compartment SEIR-type model: susceptible, exposed, infected,
//! quarantined, recovered, dead and protected (insusceptible) populations,
//! with time-varying recovery and mortality rates.
//!
//! The controlled variant scales the infection flow by `u1`, adds `u2` to the
//! protection rate and `u3` to the recovery rate. Both variants conserve the
//! total population.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_forward, TimeGrid, Trajectory};

/// Exponent arguments are clamped to this magnitude before `exp`.
const EXP_CLAMP: f64 = 700.0;

pub const COMPARTMENTS: [&str; 7] = ["S", "E", "I", "Q", "R", "D", "P"];

/// Compartment values (or their time derivatives) at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub q: f64,
    pub r: f64,
    pub d: f64,
    pub p: f64,
}

impl StateVec {
    pub const ZERO: StateVec = StateVec {
        s: 0.0,
        e: 0.0,
        i: 0.0,
        q: 0.0,
        r: 0.0,
        d: 0.0,
        p: 0.0,
    };

    pub fn from_array(a: [f64; 7]) -> Self {
        let [s, e, i, q, r, d, p] = a;
        StateVec {
            s,
            e,
            i,
            q,
            r,
            d,
            p,
        }
    }

    pub fn to_array(self) -> [f64; 7] {
        [self.s, self.e, self.i, self.q, self.r, self.d, self.p]
    }

    /// Sum of all compartments.
    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.q + self.r + self.d + self.p
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Fails if any compartment is below `-tolerance`.
    pub fn check_nonnegative(&self, tolerance: f64) -> Result<()> {
        for (name, v) in COMPARTMENTS.iter().zip(self.to_array()) {
            if v < -tolerance {
                return Err(Error::InvalidArgument(format!(
                    "compartment {name} is negative ({v})"
                )));
            }
        }
        Ok(())
    }
}

impl From<[f64; 7]> for StateVec {
    fn from(a: [f64; 7]) -> Self {
        StateVec::from_array(a)
    }
}

impl From<StateVec> for [f64; 7] {
    fn from(x: StateVec) -> Self {
        x.to_array()
    }
}

/// Componentwise sum of a state.
pub fn total_population(x: &StateVec) -> f64 {
    x.total()
}

/// Rate constants of the model. Rates are per day, `lambda3`/`kappa3` are days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Protection rate.
    pub alpha: f64,
    /// Infection rate.
    pub beta: f64,
    /// Inverse of the average latent time.
    pub gamma: f64,
    /// Rate at which infectious people enter quarantine.
    pub delta: f64,
    /// Recovery-rate sigmoid: plateau, steepness, midpoint.
    pub lambda: [f64; 3],
    /// Mortality-rate bump: scale, width, centre.
    pub kappa: [f64; 3],
}

impl ModelParams {
    /// Rates fitted for Italy, September to November 2020.
    pub const ITALY_2020: ModelParams = ModelParams {
        alpha: 1.1775e-7,
        beta: 3.97,
        gamma: 0.0048,
        delta: 0.1432,
        lambda: [0.0181, 0.8111, 6.9882],
        kappa: [0.00062, 0.0233, 54.0351],
    };

    /// Starting point used for the Italy calibration.
    pub const ITALY_2020_GUESS: ModelParams = ModelParams {
        alpha: 0.06,
        beta: 1.0,
        gamma: 5.0,
        delta: 0.5,
        lambda: [0.01, 0.1, 10.0],
        kappa: [0.001, 0.001, 10.0],
    };

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda1", self.lambda[0]),
            ("lambda2", self.lambda[1]),
            ("lambda3", self.lambda[2]),
            ("kappa1", self.kappa[0]),
            ("kappa2", self.kappa[1]),
            ("kappa3", self.kappa[2]),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Recovery rate `lambda1 / (1 + exp(-lambda2 (t - lambda3)))`.
    pub fn lambda_rate(&self, t: f64) -> f64 {
        let [l1, l2, l3] = self.lambda;
        let arg = (-l2 * (t - l3)).clamp(-EXP_CLAMP, EXP_CLAMP);
        l1 / (1.0 + arg.exp())
    }

    /// Mortality rate `kappa1 / (exp(kappa2 (t - kappa3)) + exp(-kappa2 (t - kappa3)))`.
    pub fn kappa_rate(&self, t: f64) -> f64 {
        let [k1, k2, k3] = self.kappa;
        let arg = (k2 * (t - k3)).clamp(-EXP_CLAMP, EXP_CLAMP);
        k1 / (arg.exp() + (-arg).exp())
    }
}

pub fn lambda_rate(t: f64, p: &ModelParams) -> f64 {
    p.lambda_rate(t)
}

pub fn kappa_rate(t: f64, p: &ModelParams) -> f64 {
    p.kappa_rate(t)
}

/// Intervention levels: social distancing `u1` (multiplies the infection
/// flow), preventive means `u2` and treatment `u3` (both per day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlVec {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl ControlVec {
    /// The control that reduces the controlled system to the uncontrolled one.
    pub const NEUTRAL: ControlVec = ControlVec {
        u1: 1.0,
        u2: 0.0,
        u3: 0.0,
    };

    pub fn new(u1: f64, u2: f64, u3: f64) -> Self {
        ControlVec { u1, u2, u3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ControlVec::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u1, self.u2, self.u3]
    }
}

impl From<[f64; 3]> for ControlVec {
    fn from(a: [f64; 3]) -> Self {
        ControlVec::from_array(a)
    }
}

/// Admissible box for the controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl ControlBounds {
    /// `u1 in [0.1, 1]`, `u2, u3 in [0, 1]`.
    pub const ITALY_2020: ControlBounds = ControlBounds {
        min: [0.1, 0.0, 0.0],
        max: [1.0, 1.0, 1.0],
    };

    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = ControlBounds { min, max };
        b.validate()?;
        Ok(b)
    }

    /// Bounds collapsed onto a single control value.
    pub fn pinned(u: ControlVec) -> Self {
        let a = u.to_array();
        ControlBounds { min: a, max: a }
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            let (lo, hi) = (self.min[k], self.max[k]);
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "control bounds for u{} invalid: [{lo}, {hi}]",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: &ControlVec) -> bool {
        u.to_array()
            .iter()
            .enumerate()
            .all(|(k, v)| *v >= self.min[k] && *v <= self.max[k])
    }

    /// Componentwise projection onto the box.
    pub fn project(&self, u: [f64; 3]) -> ControlVec {
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = u[k].max(self.min[k]).min(self.max[k]);
        }
        ControlVec::from_array(out)
    }

    pub fn midpoint(&self) -> ControlVec {
        ControlVec::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }
}

/// Total population `N`, fixed by the initial state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Population(f64);

impl Population {
    /// Italy's resident population at the start of 2020.
    pub const ITALY_2020: f64 = 60_461_826.0;

    pub fn new(n: f64) -> Result<Self> {
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "population must be positive, got {n}"
            )));
        }
        Ok(Population(n))
    }

    pub fn of_state(x: &StateVec) -> Result<Self> {
        Population::new(x.total())
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Rate constants together with the population they act on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeirModel {
    pub params: ModelParams,
    pub population: Population,
}

impl SeirModel {
    pub fn new(params: ModelParams, population: Population) -> Result<Self> {
        params.validate()?;
        Ok(SeirModel { params, population })
    }

    /// Right-hand side of the uncontrolled system.
    pub fn rhs(&self, t: f64, x: &StateVec) -> StateVec {
        self.rhs_controlled(t, x, &ControlVec::NEUTRAL)
    }

    /// Right-hand side of the controlled system.
    ///
    /// Evaluates the same floating-point expression as [`SeirModel::rhs`], so
    /// `u = (1, 0, 0)` reproduces it bit for bit.
    pub fn rhs_controlled(&self, t: f64, x: &StateVec, u: &ControlVec) -> StateVec {
        let p = &self.params;
        let n = self.population.get();
        let infection = p.beta * u.u1 * x.s * x.i / n;
        let protection = (p.alpha + u.u2) * x.s;
        let recovery = (p.lambda_rate(t) + u.u3) * x.q;
        let death = p.kappa_rate(t) * x.q;
        let incubation = p.gamma * x.e;
        let quarantine = p.delta * x.i;
        StateVec {
            s: -infection - protection,
            e: infection - incubation,
            i: incubation - quarantine,
            q: quarantine - recovery - death,
            r: recovery,
            d: death,
            p: protection,
        }
    }

    /// Integrates the uncontrolled system over `grid` and checks that no
    /// compartment undershoots zero by more than `1e-9 N`.
    pub fn simulate(&self, x0: &StateVec, grid: &TimeGrid) -> Result<Trajectory<7>> {
        let traj = integrate_forward(
            |t, y| Ok(self.rhs(t, &StateVec::from_array(*y)).to_array()),
            x0.to_array(),
            grid,
        )?;
        self.check_trajectory(&traj)?;
        Ok(traj)
    }

    pub(crate) fn check_trajectory(&self, traj: &Trajectory<7>) -> Result<()> {
        let tol = 1e-9 * self.population.get();
        for (t, v) in traj.iter() {
            StateVec::from_array(*v)
                .check_nonnegative(tol)
                .map_err(|e| Error::InvalidArgument(format!("at t = {t}: {e}")))?;
        }
        Ok(())
    }
}

/// Free function form of [`SeirModel::rhs`].
pub fn rhs_uncontrolled(t: f64, x: &StateVec, p: &ModelParams, n: Population) -> StateVec {
    SeirModel {
        params: *p,
        population: n,
    }
    .rhs(t, x)
}

/// Free function form of [`SeirModel::rhs_controlled`].
pub fn rhs_controlled(
    t: f64,
    x: &StateVec,
    u: &ControlVec,
    p: &ModelParams,
    n: Population,
) -> StateVec {
    SeirModel {
        params: *p,
        population: n,
    }
    .rhs_controlled(t, x, u)
}

/// Initial state for a run: `Q0`, `R0`, `D0`, `P0` and the reconstructed
/// `E0`, `I0`; `S0` closes the balance against `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub population: f64,
    pub e0: f64,
    pub i0: f64,
    pub q0: f64,
    pub r0: f64,
    pub d0: f64,
    pub p0: f64,
}

impl InitialConditions {
    /// Italy on 2020-09-01. `E0` and `I0` are not observed; they are the
    /// calibration against the published uncontrolled-model columns.
    pub const ITALY_2020: InitialConditions = InitialConditions {
        population: Population::ITALY_2020,
        e0: 96_564.78,
        i0: 2_303.09,
        q0: 26_754.0,
        r0: 207_944.0,
        d0: 35_491.0,
        p0: 0.0,
    };

    pub fn state(&self) -> Result<StateVec> {
        let rest = self.e0 + self.i0 + self.q0 + self.r0 + self.d0 + self.p0;
        let x = StateVec {
            s: self.population - rest,
            e: self.e0,
            i: self.i0,
            q: self.q0,
            r: self.r0,
            d: self.d0,
            p: self.p0,
        };
        if !x.is_finite() {
            return Err(Error::InvalidArgument("initial state not finite".into()));
        }
        x.check_nonnegative(0.0)?;
        Population::new(self.population)?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SeirModel {
        SeirModel::new(ModelParams::ITALY_2020, Population::new(1.0e6).unwrap()).unwrap()
    }

    #[test]
    fn lambda_midpoint_is_half_plateau() {
        let p = ModelParams::ITALY_2020;
        assert!((p.lambda_rate(p.lambda[2]) - 0.00905).abs() < 1e-15);
    }

    #[test]
    fn kappa_symmetric_about_centre() {
        let p = ModelParams::ITALY_2020;
        let c = p.kappa[2];
        assert_eq!(p.kappa_rate(c), p.kappa[0] / 2.0);
        for s in [0.5, 3.0, 17.25, 80.0] {
            let a = p.kappa_rate(c + s);
            let b = p.kappa_rate(c - s);
            assert!((a - b).abs() <= 1e-18, "{a} vs {b}");
        }
    }

    #[test]
    fn rates_do_not_overflow() {
        let p = ModelParams {
            lambda: [1.0, 50.0, 0.0],
            kappa: [1.0, 50.0, 0.0],
            ..ModelParams::ITALY_2020
        };
        for t in [-1.0e6, -100.0, 100.0, 1.0e6] {
            assert!(p.lambda_rate(t).is_finite());
            assert!(p.kappa_rate(t).is_finite());
            assert!(p.kappa_rate(t) >= 0.0);
        }
    }

    #[test]
    fn fully_protected_population_is_stationary() {
        let m = model();
        let x = StateVec {
            p: 1.0e6,
            ..StateVec::ZERO
        };
        assert_eq!(m.rhs(3.0, &x), StateVec::ZERO);
    }

    #[test]
    fn zero_distancing_blocks_new_exposures() {
        let m = model();
        let x = StateVec::from_array([9.0e5, 0.0, 5.0e4, 1.0e4, 3.0e4, 1.0e3, 9.0e3]);
        let dx = m.rhs_controlled(2.0, &x, &ControlVec::new(0.0, 0.0, 0.0));
        assert_eq!(dx.e, 0.0);
    }

    #[test]
    fn neutral_control_is_bitwise_uncontrolled() {
        let m = model();
        let x = StateVec::from_array([9.0e5, 2.0e4, 5.0e4, 1.0e4, 3.0e4, 1.0e3, 9.0e3]);
        for t in [0.0, 1.3, 45.0] {
            let a = m.rhs(t, &x).to_array();
            let b = m.rhs_controlled(t, &x, &ControlVec::NEUTRAL).to_array();
            for k in 0..7 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn total_population_sums() {
        assert_eq!(StateVec::from_array([1.0; 7]).total(), 7.0);
        assert_eq!(total_population(&StateVec::ZERO), 0.0);
        let x0 = InitialConditions::ITALY_2020.state().unwrap();
        assert!((x0.total() - Population::ITALY_2020).abs() <= 1e-15 * Population::ITALY_2020);
    }

    #[test]
    fn population_must_be_positive() {
        assert!(matches!(
            Population::new(0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            Population::new(-5.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Population::new(f64::NAN).is_err());
    }

    #[test]
    fn negative_parameters_rejected() {
        let p = ModelParams {
            gamma: -0.1,
            ..ModelParams::ITALY_2020
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn projection_clips_each_component() {
        let b = ControlBounds::ITALY_2020;
        let u = b.project([0.0, 3.0, 0.5]);
        assert_eq!(u, ControlVec::new(0.1, 1.0, 0.5));
        assert!(b.contains(&u));
        assert!(ControlBounds::new([0.5, 0.0, 0.0], [0.1, 1.0, 1.0]).is_err());
    }
}
