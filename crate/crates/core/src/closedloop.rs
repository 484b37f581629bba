//! Closed-loop integrators for the three model problems and the two
//! feedback laws.
//!
//! * Cutoff transport with trace feedback: for `0 < mu alpha < 1` the
//!   closed loop reduces to `y(t) = e^{-mu t} S(t) y0`, evaluated exactly.
//! * Outgoing transport with multiplicative feedback: solved along
//!   characteristics, `y(x,t) = y0(x-t) exp(-mu t - mu int_{x-t}^x k)`.
//! * Neumann heat equation with `y + y_x` feedback: implicit Euler, one
//!   tridiagonal solve per step.
//!
//! First-order upwind schemes for the two transport problems cross-check
//! the exact solutions.

use std::io::Write;

use crate::banach::{Grid, GridFunction, NormKind};
use crate::error::{invalid, Error, Result};
use crate::operators::ControlOperatorModel;
use crate::semigroup::{split_steps, GeneratorMatrix, HeatScheme, SemigroupModel};

/// Default relative threshold for the bang-bang zero test.
pub const DEFAULT_EPS_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackLaw {
    /// `u = -mu C y`, always on.
    OutputFeedback { mu: f64 },
    /// `v = -mu` while the feedback operator does not annihilate the state.
    BangBang { mu: f64, eps_rel: f64 },
}

impl FeedbackLaw {
    pub fn bang_bang(mu: f64) -> Self {
        Self::BangBang {
            mu,
            eps_rel: DEFAULT_EPS_REL,
        }
    }

    pub fn mu(&self) -> f64 {
        match *self {
            Self::OutputFeedback { mu } | Self::BangBang { mu, .. } => mu,
        }
    }

    /// Scalar control value applied at state `y`.
    pub fn value(&self, model: &ControlOperatorModel, y: &GridFunction) -> Result<f64> {
        match *self {
            Self::OutputFeedback { mu } => Ok(-mu),
            Self::BangBang { mu, eps_rel } => bang_bang_value(model, y, mu, eps_rel),
        }
    }
}

/// `-mu` if `|B y| > eps_rel |y|`, else `0`.
pub fn bang_bang_value(
    model: &ControlOperatorModel,
    y: &GridFunction,
    mu: f64,
    eps_rel: f64,
) -> Result<f64> {
    let by = model.x_part(y)?.norm();
    Ok(if by > eps_rel * y.norm() { -mu } else { 0.0 })
}

/// Time-stamped closed-loop states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    pub norms: Vec<f64>,
    pub controls: Vec<f64>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, y: GridFunction, control: f64) {
        self.times.push(t);
        self.norms.push(y.norm());
        self.states.push(y);
        self.controls.push(control);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the stored time closest to `t`, if within `tol`.
    pub fn index_near(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// CSV with header `t,norm,control`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"t,norm,control\n")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.times[i], self.norms[i], self.controls[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlantKind {
    /// Cutoff transport on `(0, 1)` with trace feedback.
    Example1,
    /// Outgoing transport on the half line with multiplicative feedback.
    Example2,
    /// Neumann heat equation with `y + y_x` feedback.
    Example3,
    /// Heat generator with a bounded `b I` feedback.
    Matrix,
}

impl PlantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
            Self::Matrix => "matrix",
        }
    }
}

/// A semigroup together with its feedback operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub kind: PlantKind,
    pub semigroup: SemigroupModel,
    pub operator: ControlOperatorModel,
}

impl Plant {
    pub fn example1(grid: Grid, alpha: f64) -> Result<Self> {
        Ok(Self {
            kind: PlantKind::Example1,
            semigroup: SemigroupModel::LeftShiftCutoff { grid },
            operator: ControlOperatorModel::dirac_trace(alpha)?,
        })
    }

    pub fn example2(k: GridFunction) -> Result<Self> {
        let grid = *k.grid();
        Ok(Self {
            kind: PlantKind::Example2,
            semigroup: SemigroupModel::RightShift { grid },
            operator: ControlOperatorModel::multiplication(k)?,
        })
    }

    pub fn example3(grid: Grid, dt: f64) -> Result<Self> {
        Ok(Self {
            kind: PlantKind::Example3,
            semigroup: SemigroupModel::heat(grid, dt, HeatScheme::ImplicitEuler)?,
            operator: ControlOperatorModel::IdentityPlusDerivative,
        })
    }

    pub fn matrix(grid: Grid, dt: f64, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(invalid("b", "must be finite"));
        }
        Ok(Self {
            kind: PlantKind::Matrix,
            semigroup: SemigroupModel::heat(grid, dt, HeatScheme::ImplicitEuler)?,
            operator: ControlOperatorModel::ScaledIdentity { b },
        })
    }

    pub fn grid(&self) -> &Grid {
        self.semigroup.grid()
    }

    pub fn norm_kind(&self) -> NormKind {
        self.semigroup.norm_kind()
    }

    pub fn generator(&self) -> GeneratorMatrix {
        self.semigroup.generator()
    }

    pub fn native_step(&self) -> f64 {
        self.semigroup.native_step()
    }

    /// Closed-loop states at the requested times under bang-bang feedback.
    pub fn simulate(&self, y0: &GridFunction, mu: f64, times: &[f64]) -> Result<Trajectory> {
        match (&self.kind, &self.operator) {
            (PlantKind::Example1, ControlOperatorModel::DiracTrace { alpha }) => {
                simulate_example1_exact(y0, *alpha, mu, times)
            }
            (PlantKind::Example2, ControlOperatorModel::Multiplication { k }) => {
                simulate_example2_exact(y0, k, mu, times)
            }
            (PlantKind::Example3 | PlantKind::Matrix, _) => {
                implicit_closed_loop(self, y0, FeedbackLaw::bang_bang(mu), times)
            }
            _ => Err(Error::Unsupported(format!(
                "{} with {}",
                self.kind.as_str(),
                self.operator.name()
            ))),
        }
    }
}

fn check_gain(mu: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be non-negative, got {mu}")));
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(invalid("times", "must start at 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    Ok(())
}

/// Evenly spaced times `0, h, 2h, ...` up to `t_final`, with `t_final`
/// appended if it is not a multiple of `h`.
pub fn time_grid(h: f64, t_final: f64) -> Vec<f64> {
    let (k, rem) = split_steps(t_final, h);
    let mut times: Vec<f64> = (0..=k).map(|i| i as f64 * h).collect();
    if rem > 0.0 {
        times.push(t_final);
    }
    times
}

/// Cutoff transport closed by the trace feedback, `y(t) = e^{-mu t} S(t) y0`.
pub fn simulate_example1_exact(
    y0: &GridFunction,
    alpha: f64,
    mu: f64,
    times: &[f64],
) -> Result<Trajectory> {
    check_gain(mu)?;
    if mu * alpha.abs() >= 1.0 {
        return Err(invalid(
            "mu",
            format!("mu * alpha = {} must stay below 1", mu * alpha.abs()),
        ));
    }
    check_times(times)?;
    let model = SemigroupModel::LeftShiftCutoff { grid: *y0.grid() };
    let op = ControlOperatorModel::dirac_trace(alpha)?;
    let mut traj = Trajectory::default();
    for &t in times {
        let y = model.evaluate(y0, t)?.scaled((-mu * t).exp());
        let v = bang_bang_value(&op, &y, mu, DEFAULT_EPS_REL)?;
        traj.push(t, y, v);
    }
    Ok(traj)
}

/// Outgoing transport with `v = -mu` and multiplier `1 + k`, solved along
/// characteristics. The integral of `k` is exact for the piecewise-constant
/// cell profile.
pub fn simulate_example2_exact(
    y0: &GridFunction,
    k: &GridFunction,
    mu: f64,
    times: &[f64],
) -> Result<Trajectory> {
    check_gain(mu)?;
    check_times(times)?;
    y0.ensure_same_grid(k)?;
    let op = ControlOperatorModel::multiplication(k.clone())?;
    let grid = *y0.grid();
    let dx = grid.dx();
    let n = grid.n_cells();

    if let Some(last) = y0.values().iter().rposition(|&v| v != 0.0) {
        let t_max = *times.last().unwrap();
        let reach = grid.x_min() + (last + 1) as f64 * dx + t_max;
        if reach > grid.x_max() + 1e-9 * dx {
            return Err(Error::SupportEscapes(format!(
                "data reaches x = {reach} but x_max = {}; increase x_max",
                grid.x_max()
            )));
        }
    }

    // cumulative integral of k at the cell edges
    let mut k_edges = Vec::with_capacity(n + 1);
    k_edges.push(0.0);
    let mut acc = 0.0;
    for &kv in k.values() {
        acc += kv * dx;
        k_edges.push(acc);
    }
    let k_cum = |x: f64| -> f64 {
        let p = ((x - grid.x_min()) / dx).clamp(0.0, n as f64);
        let j = (p.floor() as usize).min(n - 1);
        let th = p - j as f64;
        (1.0 - th) * k_edges[j] + th * k_edges[j + 1]
    };

    let transport = SemigroupModel::RightShift { grid };
    let mut traj = Trajectory::default();
    for &t in times {
        let shifted = transport.evaluate(y0, t)?;
        let vals: Vec<f64> = shifted
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v == 0.0 {
                    return 0.0;
                }
                let x = grid.center(i);
                let s = (x - t).max(grid.x_min());
                v * (-mu * t - mu * (k_cum(x) - k_cum(s))).exp()
            })
            .collect();
        let y = shifted.with_values(vals);
        let c = bang_bang_value(&op, &y, mu, DEFAULT_EPS_REL)?;
        traj.push(t, y, c);
    }
    Ok(traj)
}

/// Implicit Euler for `y' = (A + v B) y`, `v` re-evaluated from the law at
/// the start of every step. Stores the requested times.
fn implicit_closed_loop(
    plant: &Plant,
    y0: &GridFunction,
    law: FeedbackLaw,
    times: &[f64],
) -> Result<Trajectory> {
    check_gain(law.mu())?;
    check_times(times)?;
    let SemigroupModel::HeatNeumann { dt, .. } = plant.semigroup else {
        return Err(Error::Unsupported("implicit loop needs the heat model".into()));
    };
    if y0.grid() != plant.grid() {
        return Err(Error::GridMismatch("initial state".into()));
    }
    let a = plant.generator();
    let b = plant.operator.operator_matrix(plant.grid())?;
    let closed = a.matrix().plus_scaled(-law.mu(), &b);
    let open = a.matrix().clone();
    let step = |y: &GridFunction, h: f64| -> Result<GridFunction> {
        let v = law.value(&plant.operator, y)?;
        let m = if v != 0.0 { &closed } else { &open };
        Ok(y.with_values(m.affine(1.0, -h).solve(y.values(), 0.0)?))
    };

    // cache the full-step factorization target; partial steps are rare
    let full_closed = closed.affine(1.0, -dt);
    let full_open = open.affine(1.0, -dt);
    let full_step = |y: &GridFunction| -> Result<GridFunction> {
        let v = law.value(&plant.operator, y)?;
        let m = if v != 0.0 { &full_closed } else { &full_open };
        Ok(y.with_values(m.solve(y.values(), 0.0)?))
    };

    let mut traj = Trajectory::default();
    let mut y = y0.clone();
    traj.push(0.0, y.clone(), law.value(&plant.operator, &y)?);
    for w in times.windows(2) {
        let (steps, rem) = split_steps(w[1] - w[0], dt);
        for _ in 0..steps {
            y = full_step(&y)?;
        }
        if rem > 0.0 {
            y = step(&y, rem)?;
        }
        let v = law.value(&plant.operator, &y)?;
        traj.push(w[1], y.clone(), v);
    }
    Ok(traj)
}

/// Heat equation `y_t = y_xx + v (y + y_x)` with Neumann data, stepped by
/// implicit Euler; every `stride`-th step is stored, plus `t_final`.
pub fn simulate_heat_closedloop(
    y0: &GridFunction,
    law: FeedbackLaw,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(invalid("stride", "must be positive"));
    }
    let plant = Plant::example3(*y0.grid(), dt)?;
    let times = time_grid(dt * stride as f64, t_final);
    implicit_closed_loop(&plant, y0, law, &times)
}

/// Same loop for any heat-generator plant (example 3 or the matrix mode).
pub fn simulate_implicit(
    plant: &Plant,
    y0: &GridFunction,
    law: FeedbackLaw,
    times: &[f64],
) -> Result<Trajectory> {
    implicit_closed_loop(plant, y0, law, times)
}

/// First-order upwind transport plus implicit source, Lie-split.
/// Example 1 moves data left with outflow at `x_min`; example 2 moves it
/// right with zero inflow at `x_min`.
pub fn simulate_upwind_fd(
    plant: &Plant,
    y0: &GridFunction,
    mu: f64,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory> {
    check_gain(mu)?;
    let grid = *plant.grid();
    let dx = grid.dx();
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if dt > dx * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, dx });
    }
    let c = (dt / dx).min(1.0);
    let n = grid.n_cells();
    let rate: Vec<f64> = match (&plant.kind, &plant.operator) {
        (PlantKind::Example1, ControlOperatorModel::DiracTrace { alpha }) => {
            if mu * alpha.abs() >= 1.0 {
                return Err(invalid("mu", "mu * alpha must stay below 1"));
            }
            vec![mu; n]
        }
        (PlantKind::Example2, ControlOperatorModel::Multiplication { k }) => {
            k.values().iter().map(|kv| mu * (1.0 + kv)).collect()
        }
        _ => {
            return Err(Error::Unsupported(
                "upwind scheme covers the two transport examples".into(),
            ))
        }
    };
    let leftward = plant.kind == PlantKind::Example1;
    let op = &plant.operator;

    let mut traj = Trajectory::default();
    let mut y = y0.clone();
    traj.push(0.0, y.clone(), bang_bang_value(op, &y, mu, DEFAULT_EPS_REL)?);
    let (steps, rem) = split_steps(t_final, dt);
    let advance = |y: &GridFunction, h: f64| -> GridFunction {
        let ch = c * h / dt;
        let v = y.values();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let upstream = if leftward {
                if i + 1 < n {
                    v[i + 1]
                } else {
                    0.0
                }
            } else if i > 0 {
                v[i - 1]
            } else {
                0.0
            };
            let moved = (1.0 - ch) * v[i] + ch * upstream;
            out[i] = moved / (1.0 + h * rate[i]);
        }
        y.with_values(out)
    };
    for s in 0..steps + usize::from(rem > 0.0) {
        let h = if s < steps { dt } else { rem };
        y = advance(&y, h);
        let t = if s < steps { (s + 1) as f64 * dt } else { t_final };
        let v = bang_bang_value(op, &y, mu, DEFAULT_EPS_REL)?;
        traj.push(t, y.clone(), v);
    }
    Ok(traj)
}

/// Largest norm of `y(t) - S(t) y0 + mu int_0^t S(t-s) B y(s) ds` over the
/// stored times, with the trapezoid rule on the stored steps. Only defined
/// when the feedback operator maps into the state space.
pub fn vcf_residual(plant: &Plant, traj: &Trajectory, mu: f64) -> Result<f64> {
    if plant.kind == PlantKind::Example1 {
        return Err(Error::Unsupported(
            "the trace feedback is not representable in the state space".into(),
        ));
    }
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let sg = &plant.semigroup;
    let op = &plant.operator;
    let y0 = &traj.states[0];
    let mut free = y0.clone();
    let mut integral = GridFunction::zeros(*y0.grid(), y0.norm_kind());
    let mut f_prev = op.full_operator(y0)?;
    let mut worst: f64 = 0.0;
    for n in 1..traj.len() {
        let h = traj.times[n] - traj.times[n - 1];
        free = sg.evaluate(&free, h)?;
        let mut carried = integral.clone();
        carried.axpy(0.5 * h, &f_prev)?;
        integral = sg.evaluate(&carried, h)?;
        let f = op.full_operator(&traj.states[n])?;
        integral.axpy(0.5 * h, &f)?;
        f_prev = f;

        let mut r = traj.states[n].sub(&free)?;
        r.axpy(mu, &integral)?;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Largest relative violation of
/// `2 mu int_s^t <B y, J(y)> <= |y(s)|^2 - |y(t)|^2` over stored pairs
/// `s <= t`, normalized by `|y(s)|^2`. Non-positive means the inequality holds.
pub fn dissipation_violation(plant: &Plant, traj: &Trajectory, mu: f64) -> Result<f64> {
    let p: Vec<f64> = traj
        .states
        .iter()
        .map(|y| plant.operator.x_part_pairing(y))
        .collect::<Result<_>>()?;
    let mut cum = vec![0.0; traj.len()];
    for n in 1..traj.len() {
        let h = traj.times[n] - traj.times[n - 1];
        cum[n] = cum[n - 1] + 0.5 * h * (p[n] + p[n - 1]);
    }
    let mut worst = f64::NEG_INFINITY;
    for s in 0..traj.len() {
        let ns = traj.norms[s].powi(2);
        if ns == 0.0 {
            continue;
        }
        for t in s..traj.len() {
            let lhs = 2.0 * mu * (cum[t] - cum[s]);
            let rhs = ns - traj.norms[t].powi(2);
            worst = worst.max((lhs - rhs) / ns);
        }
    }
    Ok(worst)
}
