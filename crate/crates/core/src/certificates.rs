//! Sampled estimates of the constants behind the stabilization argument:
//! admissibility bounds `M`, the observability constant `delta`, the proof
//! constant `c`, the Lipschitz pair `(k1, k2)`, the gain window, the
//! per-period decay factor `q` and fitted decay rates.
//!
//! Every estimate is a max or min over a finite seeded sample family, so it
//! is an empirical bound and never a proof.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::banach::{Grid, GridFunction, NormKind};
use crate::closedloop::{time_grid, Plant, PlantKind, Trajectory};
use crate::error::{invalid, Error, Result, StageExt};
use crate::operators::{ControlOperatorModel, Observation};
use crate::semigroup::{split_steps, SemigroupModel};

/// Time-integral resolution when the horizon is not an even number of
/// native steps.
pub const FALLBACK_TIME_STEPS: usize = 200;

/// Relative change tolerated when the sample count doubles.
pub const STABILITY_TOL: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleFamily {
    Bumps,
    RandomPiecewise,
    BoundaryConcentrated,
    SmoothModes,
}

impl SampleFamily {
    pub const ALL: [SampleFamily; 4] = [
        Self::Bumps,
        Self::RandomPiecewise,
        Self::BoundaryConcentrated,
        Self::SmoothModes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bumps => "bumps",
            Self::RandomPiecewise => "random_piecewise",
            Self::BoundaryConcentrated => "boundary_concentrated",
            Self::SmoothModes => "smooth_modes",
        }
    }
}

impl fmt::Display for SampleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| invalid("family", format!("unknown sample family `{s}`")))
    }
}

/// Deterministic description of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub family: SampleFamily,
}

impl SampleSpec {
    pub fn new(count: usize, seed: u64, family: SampleFamily) -> Result<Self> {
        if count == 0 {
            return Err(invalid("count", "must be positive"));
        }
        Ok(Self {
            count,
            seed,
            family,
        })
    }

    /// Twice the samples under a different seed.
    pub fn refreshed(&self) -> Self {
        Self {
            count: 2 * self.count,
            seed: self.seed.wrapping_add(1),
            family: self.family,
        }
    }
}

/// Samples supported in `window`, which must lie inside the grid.
pub fn generate_samples(
    spec: &SampleSpec,
    grid: Grid,
    norm: NormKind,
    window: (f64, f64),
) -> Result<Vec<GridFunction>> {
    let (a, b) = window;
    if !(a < b && a >= grid.x_min() && b <= grid.x_max()) {
        return Err(invalid(
            "window",
            format!("({a}, {b}) must be a subinterval of ({}, {})", grid.x_min(), grid.x_max()),
        ));
    }
    let inside: Vec<usize> = (0..grid.n_cells())
        .filter(|&i| (a..=b).contains(&grid.center(i)))
        .collect();
    if inside.is_empty() {
        return Err(invalid("window", "contains no cell centre"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = grid.n_cells();
    let dx = grid.dx();
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut v = vec![0.0; n];
        match spec.family {
            SampleFamily::Bumps => {
                let c = rng.gen_range(a..b);
                let w = (b - a) * rng.gen_range(0.05..0.5);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let amp = sign * rng.gen_range(0.5..2.0);
                for &j in &inside {
                    let u = (grid.center(j) - c) / w;
                    if u.abs() < 0.5 {
                        v[j] = amp * (std::f64::consts::PI * u).cos().powi(2);
                    }
                }
                if v.iter().all(|&x| x == 0.0) {
                    let j = *inside
                        .iter()
                        .min_by(|&&p, &&q| {
                            (grid.center(p) - c).abs().total_cmp(&(grid.center(q) - c).abs())
                        })
                        .unwrap();
                    v[j] = amp;
                }
            }
            SampleFamily::RandomPiecewise => {
                let pieces = rng.gen_range(1..=8usize);
                let mut breaks: Vec<f64> = (1..pieces).map(|_| rng.gen_range(a..b)).collect();
                breaks.sort_by(f64::total_cmp);
                let levels: Vec<f64> = (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for &j in &inside {
                    let p = breaks.partition_point(|&x| x <= grid.center(j));
                    v[j] = levels[p];
                }
            }
            SampleFamily::BoundaryConcentrated => {
                // unit mass on 1..=base cells at the window start, width <= 0.01
                let base = ((0.01 / dx).round() as usize).max(1);
                let cells = (base - i % base).min(inside.len());
                let height = 1.0 / (cells as f64 * dx);
                for &j in &inside[..cells] {
                    v[j] = height;
                }
            }
            SampleFamily::SmoothModes => {
                let coef: Vec<f64> = (0..5)
                    .map(|m| rng.gen_range(-1.0..1.0) / (1.0 + m as f64))
                    .collect();
                for &j in &inside {
                    let s = std::f64::consts::PI * (grid.center(j) - a) / (b - a);
                    v[j] = coef
                        .iter()
                        .enumerate()
                        .map(|(m, c)| c * (m as f64 * s).cos())
                        .sum();
                }
            }
        }
        out.push(GridFunction::new(grid, v, norm)?);
    }
    Ok(out)
}

/// Composite midpoint rule on `(0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MidpointRule {
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl MidpointRule {
    /// Steps of twice the native step when the horizon allows it, so every
    /// node is a grid-aligned time; otherwise [`FALLBACK_TIME_STEPS`] steps.
    pub fn for_step(step: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {horizon}")));
        }
        let (k, rem) = split_steps(horizon, step);
        if rem == 0.0 && k >= 2 && k % 2 == 0 {
            return Ok(Self {
                h: 2.0 * step,
                nodes: (0..k / 2).map(|j| (2 * j + 1) as f64 * step).collect(),
            });
        }
        let h = horizon / FALLBACK_TIME_STEPS as f64;
        Ok(Self {
            h,
            nodes: (0..FALLBACK_TIME_STEPS).map(|j| (j as f64 + 0.5) * h).collect(),
        })
    }
}

/// `S(t) y` at increasing times. The heat semigroup is advanced
/// incrementally; shifts are evaluated directly.
fn orbit(sg: &SemigroupModel, y: &GridFunction, times: &[f64]) -> Result<Vec<GridFunction>> {
    match sg {
        SemigroupModel::HeatNeumann { .. } => {
            let mut out = Vec::with_capacity(times.len());
            let mut cur = y.clone();
            let mut prev = 0.0;
            for &t in times {
                cur = sg.evaluate(&cur, t - prev)?;
                prev = t;
                out.push(cur.clone());
            }
            Ok(out)
        }
        _ => times.iter().map(|&t| sg.evaluate(y, t)).collect(),
    }
}

fn max_of(values: impl IntoIterator<Item = Option<f64>>) -> f64 {
    values.into_iter().flatten().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdmissibilityKind {
    /// `|int_0^T S(T-s) B u(s) ds| <= M |u|_{L1(0,T)}`
    Control,
    /// `int_0^T |C S(t) y| dt <= M |y|`
    Observation,
    /// `int_0^T |C int_0^t S(t-s) B u(s) ds| dt <= M |u|_{L1(0,T)}`
    Joint,
}

const PROFILES: usize = 5;

/// Time profiles of the control inputs: on, first half, second half, last
/// tenth, exponential.
fn profile(p: usize, s: f64, horizon: f64) -> f64 {
    let r = s / horizon;
    match p {
        0 => 1.0,
        1 => f64::from(u8::from(r < 0.5)),
        2 => f64::from(u8::from(r >= 0.5)),
        3 => f64::from(u8::from(r >= 0.9)),
        _ => (-r).exp(),
    }
}

fn control_bases(op: &ControlOperatorModel, samples: &[GridFunction]) -> Vec<Observation> {
    match op {
        ControlOperatorModel::DiracTrace { .. } => vec![Observation::Scalar(1.0)],
        _ => samples.iter().cloned().map(Observation::Field).collect(),
    }
}

/// Largest admissibility ratio over the samples. Zero denominators are
/// skipped.
pub fn estimate_admissibility(
    kind: AdmissibilityKind,
    plant: &Plant,
    horizon: f64,
    samples: &[GridFunction],
) -> Result<f64> {
    let rule = MidpointRule::for_step(plant.native_step(), horizon)?;
    let sg = &plant.semigroup;
    let op = &plant.operator;
    let h = rule.h;
    match kind {
        AdmissibilityKind::Observation => {
            let ratios = samples
                .par_iter()
                .map(|y| -> Result<Option<f64>> {
                    let ny = y.norm();
                    if ny == 0.0 {
                        return Ok(None);
                    }
                    let mut acc = 0.0;
                    for z in orbit(sg, y, &rule.nodes)? {
                        acc += op.apply_observation(&z)?.norm();
                    }
                    Ok(Some(h * acc / ny))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(max_of(ratios))
        }
        AdmissibilityKind::Control | AdmissibilityKind::Joint => {
            let generator = plant.generator();
            let bases = control_bases(op, samples);
            let ratios = bases
                .par_iter()
                .map(|base| -> Result<Option<f64>> {
                    let nb = base.norm();
                    if nb == 0.0 {
                        return Ok(None);
                    }
                    let bu = op.control_input(&generator, base)?;
                    let mut best: Option<f64> = None;
                    if kind == AdmissibilityKind::Control {
                        // int S(T-s) g(s) Bu ds with T - s running over the nodes
                        let states = orbit(sg, &bu, &rule.nodes)?;
                        for p in 0..PROFILES {
                            let mut num = GridFunction::zeros(*bu.grid(), bu.norm_kind());
                            let mut den = 0.0;
                            for (s, z) in rule.nodes.iter().zip(&states) {
                                num.axpy(h * profile(p, horizon - s, horizon), z)?;
                                den += h * profile(p, *s, horizon).abs() * nb;
                            }
                            if den > 0.0 {
                                best = Some(best.unwrap_or(0.0).max(num.norm() / den));
                            }
                        }
                    } else {
                        let half = sg.evaluate(&bu, 0.5 * h)?;
                        let last = rule.nodes.len() - 1;
                        for p in 0..PROFILES {
                            let mut inner = GridFunction::zeros(*bu.grid(), bu.norm_kind());
                            let mut outer = 0.0;
                            let mut den = 0.0;
                            for (j, s) in rule.nodes.iter().enumerate() {
                                let g = profile(p, *s, horizon);
                                inner = sg.evaluate(&inner, h)?;
                                inner.axpy(h * g, &half)?;
                                let w = if j == last { 0.5 } else { 1.0 };
                                outer += w * h * op.apply_observation(&inner)?.norm();
                                den += h * g.abs() * nb;
                            }
                            if den > 0.0 {
                                best = Some(best.unwrap_or(0.0).max(outer / den));
                            }
                        }
                    }
                    Ok(best)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(max_of(ratios))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObservabilityMode {
    /// Pairing of the X-part, denominator `|S(T) y|^2`.
    XPart,
    /// Resolvent-smoothed pairing, denominator `|S(T) y|^2`.
    Fbc,
    /// Pairing of the full operator, denominator `|y|^2`.
    Miyadera,
}

impl ObservabilityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::XPart => "xpart",
            Self::Fbc => "fbc",
            Self::Miyadera => "miyadera",
        }
    }

    /// The mode whose pairing is representable for the plant.
    pub fn for_plant(kind: PlantKind) -> Self {
        match kind {
            PlantKind::Example2 => Self::Miyadera,
            _ => Self::XPart,
        }
    }
}

impl FromStr for ObservabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::XPart, Self::Fbc, Self::Miyadera]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid("mode", format!("unknown observability mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityEstimate {
    pub delta: f64,
    pub used_samples: usize,
    /// Samples with `S(T) y = 0`, measured against `|y|^2` instead.
    pub fallback_samples: usize,
    /// Samples whose resolvent ladder did not settle.
    pub unconverged_samples: usize,
}

impl ObservabilityEstimate {
    pub fn convention(&self) -> &'static str {
        match self.fallback_samples {
            0 => "final_state",
            n if n == self.used_samples => "initial_state",
            _ => "mixed",
        }
    }
}

/// Smallest `int_0^T pairing(S(t) y) dt / denominator` over the samples.
pub fn estimate_observability(
    mode: ObservabilityMode,
    plant: &Plant,
    horizon: f64,
    samples: &[GridFunction],
) -> Result<ObservabilityEstimate> {
    let rule = MidpointRule::for_step(plant.native_step(), horizon)?;
    let sg = &plant.semigroup;
    let op = &plant.operator;
    let generator = plant.generator();
    // (ratio, fallback, unconverged)
    let per = samples
        .par_iter()
        .map(|y| -> Result<Option<(f64, bool, usize)>> {
            let ny = y.norm();
            if ny == 0.0 {
                return Ok(None);
            }
            let mut acc = 0.0;
            let mut unconverged = 0;
            for z in orbit(sg, y, &rule.nodes)? {
                acc += match mode {
                    ObservabilityMode::XPart => op.x_part_pairing(&z)?,
                    ObservabilityMode::Fbc => {
                        let f = op.f_bc_limsup(&generator, &z)?;
                        unconverged += usize::from(!f.converged);
                        f.value
                    }
                    ObservabilityMode::Miyadera => z.duality_select().pair(&op.full_operator(&z)?)?,
                };
            }
            let integral = rule.h * acc;
            let (den, fallback) = match mode {
                ObservabilityMode::Miyadera => (ny * ny, false),
                _ => {
                    let nt = sg.evaluate(y, horizon)?.norm();
                    if nt == 0.0 {
                        (ny * ny, true)
                    } else {
                        (nt * nt, false)
                    }
                }
            };
            Ok(Some((integral / den, fallback, unconverged)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut est = ObservabilityEstimate {
        delta: f64::INFINITY,
        used_samples: 0,
        fallback_samples: 0,
        unconverged_samples: 0,
    };
    for (r, fb, unc) in per.into_iter().flatten() {
        est.delta = est.delta.min(r);
        est.used_samples += 1;
        est.fallback_samples += usize::from(fb);
        est.unconverged_samples += usize::from(unc > 0);
    }
    if est.used_samples == 0 {
        return Err(Error::InsufficientData("every sample is zero".into()));
    }
    Ok(est)
}

/// Largest `[int F(S(t) y0) - int F(y(t))] / (mu |y0|^2)` over the samples,
/// `F` the X-part pairing and `y` the closed loop at gain `mu`; clipped at 0.
pub fn estimate_proof_constant_c(
    plant: &Plant,
    horizon: f64,
    mu: f64,
    samples: &[GridFunction],
) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    let rule = MidpointRule::for_step(plant.native_step(), horizon)?;
    let op = &plant.operator;
    let mut times = Vec::with_capacity(rule.nodes.len() + 1);
    times.push(0.0);
    times.extend_from_slice(&rule.nodes);
    let values = samples
        .par_iter()
        .map(|y| -> Result<Option<f64>> {
            let ny = y.norm();
            if ny == 0.0 {
                return Ok(None);
            }
            let mut open = 0.0;
            for z in orbit(&plant.semigroup, y, &rule.nodes)? {
                open += op.x_part_pairing(&z)?;
            }
            let traj = plant.simulate(y, mu, &times)?;
            let mut closed = 0.0;
            for z in &traj.states[1..] {
                closed += op.x_part_pairing(z)?;
            }
            Ok(Some(rule.h * (open - closed) / (mu * ny * ny)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(max_of(values))
}

/// Terms of the two-part Lipschitz bound for one pair:
/// `|F(y) - F(z)|`, `(|y|_C + |z|_C) |y - z|` and `(|y| + |z|) |C(y - z)|`,
/// with `|y|_C = |y| + |C y|`.
pub fn lipschitz_terms(
    op: &ControlOperatorModel,
    y: &GridFunction,
    z: &GridFunction,
) -> Result<(f64, f64, f64)> {
    let d = (op.x_part_pairing(y)? - op.x_part_pairing(z)?).abs();
    let graph = |v: &GridFunction| -> Result<f64> { Ok(v.norm() + op.apply_observation(v)?.norm()) };
    let diff = y.sub(z)?;
    let a = (graph(y)? + graph(z)?) * diff.norm();
    let b = (y.norm() + z.norm()) * op.apply_observation(&diff)?.norm();
    Ok((d, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub k1: f64,
    pub k2: f64,
    pub pairs: usize,
}

const K1_GRID: usize = 200;

/// Smallest `k1 + k2` on a `k1` grid such that the two-part bound holds on
/// every sampled pair: consecutive samples and each sample against its
/// double.
pub fn estimate_lipschitz(op: &ControlOperatorModel, samples: &[GridFunction]) -> Result<LipschitzEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let mut pairs = Vec::new();
    for w in samples.windows(2) {
        pairs.push((w[0].clone(), w[1].clone()));
    }
    for y in samples {
        pairs.push((y.clone(), y.scaled(2.0)));
    }
    let terms = pairs
        .par_iter()
        .map(|(y, z)| lipschitz_terms(op, y, z))
        .collect::<Result<Vec<_>>>()?;

    let slack = |d: f64| 1e-12 * d.max(1.0);
    let k1_max = terms
        .iter()
        .filter(|t| t.1 > 0.0)
        .map(|&(d, a, _)| d / a)
        .fold(0.0, f64::max);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=K1_GRID {
        let k1 = k1_max * i as f64 / K1_GRID as f64;
        let mut k2: f64 = 0.0;
        let mut feasible = true;
        for &(d, a, b) in &terms {
            let excess = d - k1 * a;
            if excess <= slack(d) {
                continue;
            }
            if b > 0.0 {
                k2 = k2.max(excess / b);
            } else {
                feasible = false;
                break;
            }
        }
        if feasible && best.is_none_or(|(b1, b2)| k1 + k2 < b1 + b2) {
            best = Some((k1, k2));
        }
    }
    let (k1, k2) = best.ok_or_else(|| Error::InsufficientData("no admissible pair".into()))?;
    Ok(LipschitzEstimate {
        k1,
        k2,
        pairs: terms.len(),
    })
}

/// `q = (1 + 2 mu^2 (delta mu (M^2 / (1 - M mu))^2 + c)) / (1 + 2 mu delta)`
pub fn compute_q(mu: f64, delta: f64, m: f64, c: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    if !(m >= 0.0) || m * mu >= 1.0 {
        return Err(invalid("mu", format!("M mu = {} must be below 1", m * mu)));
    }
    let r = m * m / (1.0 - m * mu);
    Ok((1.0 + 2.0 * mu * mu * (delta * mu * r * r + c)) / (1.0 + 2.0 * mu * delta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainWindow {
    pub alpha: f64,
    pub cap: f64,
    pub pass: bool,
}

const GAIN_GRID: usize = 1000;

/// Largest `alpha <= 1/(2M)` with `q < 1` on every grid gain in `(0, alpha]`.
pub fn gain_window(m: f64, delta: f64, c: f64) -> Result<GainWindow> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid("M", format!("must be positive, got {m}")));
    }
    let cap = 0.5 / m;
    let mut alpha = 0.0;
    for i in 1..=GAIN_GRID {
        let mu = cap * i as f64 / GAIN_GRID as f64;
        if compute_q(mu, delta, m, c)? < 1.0 {
            alpha = mu;
        } else {
            break;
        }
    }
    Ok(GainWindow {
        alpha,
        cap,
        pass: alpha > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateVerdict {
    pub pass: bool,
    /// Largest `|y(kT)|^2 / (q^k |y0|^2)`.
    pub worst_ratio: f64,
    /// Largest `k` checked.
    pub periods: usize,
}

/// Checks `|y(kT)|^2 <= q^k |y0|^2 (1 + 1e-6)` at every stored multiple of `T`.
pub fn verify_iterate_bound(traj: &Trajectory, q: f64, horizon: f64) -> Result<IterateVerdict> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    let tol = 1e-9 * horizon.max(1.0);
    match traj.times.last() {
        Some(&t) if t >= 2.0 * horizon - tol => {}
        _ => {
            return Err(Error::InsufficientData(
                "trajectory shorter than two periods".into(),
            ))
        }
    }
    let n0 = traj.norms[0] * traj.norms[0];
    let mut verdict = IterateVerdict {
        pass: true,
        worst_ratio: 0.0,
        periods: 0,
    };
    let mut k = 0usize;
    while let Some(i) = traj.index_near(k as f64 * horizon, tol) {
        let nk = traj.norms[i] * traj.norms[i];
        let bound = q.powi(k as i32) * n0;
        let ratio = if nk == 0.0 {
            0.0
        } else if bound > 0.0 {
            nk / bound
        } else {
            f64::INFINITY
        };
        verdict.pass &= nk <= bound * (1.0 + 1e-6);
        verdict.worst_ratio = verdict.worst_ratio.max(ratio);
        verdict.periods = k;
        k += 1;
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub sigma: f64,
    pub prefactor: f64,
    /// The state reached exactly zero; `sigma` is `+inf`.
    pub nilpotent: bool,
    pub points: usize,
}

/// Least-squares fit of `ln |y(t)|` on `[t_min, t_final]`.
pub fn fit_decay_rate(traj: &Trajectory, t_min: f64) -> Result<DecayFit> {
    let n0 = *traj
        .norms
        .first()
        .ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    if n0 > 0.0 && traj.norms.iter().any(|&n| n == 0.0) {
        let peak = traj.norms.iter().copied().fold(0.0, f64::max);
        return Ok(DecayFit {
            sigma: f64::INFINITY,
            prefactor: peak / n0,
            nilpotent: true,
            points: 0,
        });
    }
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.norms)
        .filter(|&(&t, &n)| t >= t_min && n > 1e-300)
        .map(|(&t, &n)| (t, n.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} usable points after t = {t_min}, need 5",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let tb = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let lb = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tb).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - tb) * (p.1 - lb)).sum();
    let slope = stl / stt;
    Ok(DecayFit {
        sigma: -slope + 0.0,
        prefactor: (lb - slope * tb).exp() / n0,
        nilpotent: false,
        points: pts.len(),
    })
}

/// Storage times for a closed-loop run over `periods` horizons: roughly 50
/// per horizon, every one of them grid-aligned when the horizon is.
pub fn storage_times(plant: &Plant, horizon: f64, periods: usize) -> Vec<f64> {
    let step = plant.native_step();
    let (nt, rem) = split_steps(horizon, step);
    let h = if rem == 0.0 && nt > 0 {
        let target = (nt / 50).max(1);
        let s = (1..=target).rev().find(|s| nt % s == 0).unwrap_or(1);
        s as f64 * step
    } else {
        horizon / 50.0
    };
    time_grid(h, periods as f64 * horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub horizon: f64,
    pub samples: SampleSpec,
    /// Support window of the samples.
    pub window: (f64, f64),
    /// Periods simulated for the iterate check.
    pub periods: usize,
    pub fit_t_min: f64,
    pub check_stability: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub model: PlantKind,
    pub horizon: f64,
    pub samples: SampleSpec,
    pub m_control: f64,
    pub m_observation: f64,
    pub m_joint: f64,
    pub m: f64,
    pub delta_mode: ObservabilityMode,
    pub delta: ObservabilityEstimate,
    /// `delta` over a unit horizon, for comparison with `T`-free statements.
    pub delta_unit_horizon: f64,
    pub c: f64,
    /// Gain at which `c` was estimated.
    pub c_mu: f64,
    pub lipschitz: LipschitzEstimate,
    pub window: Option<GainWindow>,
    pub mu_star: f64,
    pub q_mu_star: f64,
    pub iterate: Option<IterateVerdict>,
    pub decay: Option<DecayFit>,
    pub sampling_stable: Option<bool>,
    pub verdict: Verdict,
}

impl CertificateReport {
    /// Ordered `(key, value)` pairs shared by the text block and the CSV row.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        vec![
            ("model", self.model.as_str().into()),
            ("horizon", self.horizon.to_string()),
            ("sample_count", self.samples.count.to_string()),
            ("sample_seed", self.samples.seed.to_string()),
            ("sample_family", self.samples.family.as_str().into()),
            ("m_control", self.m_control.to_string()),
            ("m_observation", self.m_observation.to_string()),
            ("m_joint", self.m_joint.to_string()),
            ("m", self.m.to_string()),
            ("delta_mode", self.delta_mode.as_str().into()),
            ("delta", self.delta.delta.to_string()),
            ("delta_convention", self.delta.convention().into()),
            ("delta_unit_horizon", self.delta_unit_horizon.to_string()),
            ("c", self.c.to_string()),
            ("c_mu", self.c_mu.to_string()),
            ("k1", self.lipschitz.k1.to_string()),
            ("k2", self.lipschitz.k2.to_string()),
            ("alpha", opt(self.window.map(|w| w.alpha.to_string()))),
            ("mu_star", self.mu_star.to_string()),
            ("q_mu_star", self.q_mu_star.to_string()),
            (
                "iterate_bound",
                opt(self.iterate.map(|v| Verdict::from_bool(v.pass).as_str().into())),
            ),
            ("iterate_worst_ratio", opt(self.iterate.map(|v| v.worst_ratio.to_string()))),
            ("iterate_periods", opt(self.iterate.map(|v| v.periods.to_string()))),
            ("sigma_emp", opt(self.decay.map(|d| d.sigma.to_string()))),
            ("prefactor_emp", opt(self.decay.map(|d| d.prefactor.to_string()))),
            ("nilpotent", opt(self.decay.map(|d| d.nilpotent.to_string()))),
            ("sampling_stable", opt(self.sampling_stable.map(|s| s.to_string()))),
            ("verdict", self.verdict.as_str().into()),
        ]
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn csv_header(&self) -> String {
        let keys: Vec<&str> = self.fields().into_iter().map(|(k, _)| k).collect();
        keys.join(",")
    }

    pub fn csv_row(&self) -> String {
        let vals: Vec<String> = self.fields().into_iter().map(|(_, v)| v).collect();
        vals.join(",")
    }
}

/// Admissibility and observability constants for one sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub m_control: f64,
    pub m_observation: f64,
    pub m_joint: f64,
    pub delta: ObservabilityEstimate,
}

impl Constants {
    pub fn m(&self) -> f64 {
        self.m_control.max(self.m_observation).max(self.m_joint)
    }
}

pub fn estimate_constants(
    plant: &Plant,
    horizon: f64,
    mode: ObservabilityMode,
    samples: &[GridFunction],
) -> Result<Constants> {
    use AdmissibilityKind::*;
    Ok(Constants {
        m_control: estimate_admissibility(Control, plant, horizon, samples).stage("control admissibility")?,
        m_observation: estimate_admissibility(Observation, plant, horizon, samples)
            .stage("observation admissibility")?,
        m_joint: estimate_admissibility(Joint, plant, horizon, samples).stage("joint admissibility")?,
        delta: estimate_observability(mode, plant, horizon, samples).stage("observability")?,
    })
}

/// Upper end of the gains for which the closed loop is defined.
fn well_posed_limit(plant: &Plant) -> f64 {
    match plant.operator {
        ControlOperatorModel::DiracTrace { alpha } if alpha != 0.0 => 1.0 / alpha.abs(),
        _ => f64::INFINITY,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= STABILITY_TOL * a.abs().max(b.abs()) || a.abs().max(b.abs()) < 1e-12
}

/// Constants, then `c` at half the gain cap, the gain window, `mu* =
/// alpha/2`, `c` again at `mu*`, `q(mu*)`, and a closed-loop run from `y0`
/// at `mu*` for the iterate bound and the fitted rate.
pub fn certify(plant: &Plant, y0: &GridFunction, opts: &CertifyOptions) -> Result<CertificateReport> {
    let grid = *plant.grid();
    let samples = generate_samples(&opts.samples, grid, plant.norm_kind(), opts.window).stage("samples")?;
    let mode = ObservabilityMode::for_plant(plant.kind);
    let k = estimate_constants(plant, opts.horizon, mode, &samples)?;
    let delta_unit_horizon = if opts.horizon == 1.0 {
        k.delta.delta
    } else {
        estimate_observability(mode, plant, 1.0, &samples)
            .stage("observability, unit horizon")?
            .delta
    };
    let lipschitz = estimate_lipschitz(&plant.operator, &samples).stage("lipschitz")?;
    let m = k.m();
    let delta = k.delta.delta;
    let limit = well_posed_limit(plant);

    let mut report = CertificateReport {
        model: plant.kind,
        horizon: opts.horizon,
        samples: opts.samples,
        m_control: k.m_control,
        m_observation: k.m_observation,
        m_joint: k.m_joint,
        m,
        delta_mode: mode,
        delta: k.delta,
        delta_unit_horizon,
        c: 0.0,
        c_mu: 0.0,
        lipschitz,
        window: None,
        mu_star: 0.0,
        q_mu_star: f64::NAN,
        iterate: None,
        decay: None,
        sampling_stable: None,
        verdict: Verdict::Fail,
    };
    if !(delta > 0.0 && m > 0.0) {
        return Ok(report);
    }

    let mu0 = 0.5 * (0.5 / m).min(0.5 * limit);
    let c0 = estimate_proof_constant_c(plant, opts.horizon, mu0, &samples).stage("proof constant")?;
    let mut window = gain_window(m, delta, c0).stage("gain window")?;
    window.alpha = window.alpha.min(0.5 * limit);
    report.window = Some(window);
    report.c = c0;
    report.c_mu = mu0;
    if !window.pass {
        return Ok(report);
    }
    let mu_star = 0.5 * window.alpha;
    let c_star = estimate_proof_constant_c(plant, opts.horizon, mu_star, &samples).stage("proof constant")?;
    let q = compute_q(mu_star, delta, m, c_star).stage("decay factor")?;
    report.c = c_star;
    report.c_mu = mu_star;
    report.mu_star = mu_star;
    report.q_mu_star = q;

    let times = storage_times(plant, opts.horizon, opts.periods);
    let traj = plant.simulate(y0, mu_star, &times).stage("closed-loop run")?;
    report.iterate = Some(verify_iterate_bound(&traj, q, opts.horizon).stage("iterate bound")?);
    report.decay = Some(fit_decay_rate(&traj, opts.fit_t_min).stage("decay fit")?);

    if opts.check_stability {
        let fresh = opts.samples.refreshed();
        let more = generate_samples(&fresh, grid, plant.norm_kind(), opts.window).stage("samples")?;
        let k2 = estimate_constants(plant, opts.horizon, mode, &more)?;
        let c2 = estimate_proof_constant_c(plant, opts.horizon, mu_star, &more).stage("proof constant")?;
        report.sampling_stable = Some(
            close(k.m_control, k2.m_control)
                && close(k.m_observation, k2.m_observation)
                && close(k.m_joint, k2.m_joint)
                && close(delta, k2.delta.delta)
                && close(c_star, c2),
        );
    }
    report.verdict = Verdict::from_bool(delta > 0.0 && q < 1.0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedloop::simulate_example2_exact;

    fn ex2_plant(x_max: f64, n: usize) -> Plant {
        let g = Grid::new(0.0, x_max, n).unwrap();
        let k = GridFunction::from_fn(g, NormKind::L1, |x| 0.5 * (-x).exp()).unwrap();
        Plant::example2(k).unwrap()
    }

    #[test]
    fn q_matches_rational_evaluation() {
        // mu = 1/10, delta = M = c = 1: q = (4141/4050) / (6/5) = 4141/4860
        let q = compute_q(0.1, 1.0, 1.0, 1.0).unwrap();
        assert!((q - 4141.0 / 4860.0).abs() < 1e-15);
        assert!((q - 0.852058).abs() < 1e-6);
    }

    #[test]
    fn q_limits() {
        let mu = 1e-6;
        let q = compute_q(mu, 0.7, 1.0, 2.0).unwrap();
        assert!(q < 1.0);
        assert!((q - (1.0 - 2.0 * mu * 0.7)).abs() < 1e-10);
        for mu in [0.01, 0.1, 0.4] {
            assert!(compute_q(mu, 0.0, 1.0, 1.0).unwrap() >= 1.0);
        }
        assert!(compute_q(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(compute_q(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gain_window_examples() {
        let w = gain_window(1.0, 1.0, 1.0).unwrap();
        assert!(w.pass && w.alpha > 0.0);
        assert!(compute_q(0.5 * w.alpha, 1.0, 1.0, 1.0).unwrap() < 1.0);
        // grid-search oracle: every grid gain up to alpha has q < 1
        for i in 1..=1000 {
            let mu = w.cap * i as f64 / 1000.0;
            if mu <= w.alpha {
                assert!(compute_q(mu, 1.0, 1.0, 1.0).unwrap() < 1.0);
            }
        }
        let fail = gain_window(1.0, 0.0, 1.0).unwrap();
        assert!(!fail.pass && fail.alpha == 0.0);
        assert!(gain_window(1e6, 1.0, 1.0).unwrap().alpha <= 0.5e-6);
        assert!(gain_window(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn samples_are_deterministic_and_windowed() {
        let g = Grid::new(0.0, 4.0, 400).unwrap();
        for family in SampleFamily::ALL {
            let spec = SampleSpec::new(20, 7, family).unwrap();
            let a = generate_samples(&spec, g, NormKind::L1, (0.0, 2.0)).unwrap();
            let b = generate_samples(&spec, g, NormKind::L1, (0.0, 2.0)).unwrap();
            assert_eq!(a, b);
            for y in &a {
                assert!(!y.is_zero(), "{family}");
                for (i, v) in y.values().iter().enumerate() {
                    if g.center(i) > 2.0 {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
        let spec = SampleSpec::new(3, 7, SampleFamily::Bumps).unwrap();
        assert!(generate_samples(&spec, g, NormKind::L1, (1.0, 5.0)).is_err());
        assert!(SampleSpec::new(0, 1, SampleFamily::Bumps).is_err());
        assert_eq!("smooth_modes".parse::<SampleFamily>().unwrap(), SampleFamily::SmoothModes);
    }

    #[test]
    fn boundary_sample_is_unit_mass_at_window_start() {
        let g = Grid::new(0.0, 12.0, 1200).unwrap();
        let spec = SampleSpec::new(1, 0, SampleFamily::BoundaryConcentrated).unwrap();
        let y = &generate_samples(&spec, g, NormKind::L1, (0.0, 2.0)).unwrap()[0];
        assert_eq!(y.values()[0], 100.0);
        assert!(y.values()[1..].iter().all(|&v| v == 0.0));
        assert!((y.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_rule_aligns_when_possible() {
        let r = MidpointRule::for_step(0.01, 1.0).unwrap();
        assert_eq!(r.nodes.len(), 50);
        assert!((r.h - 0.02).abs() < 1e-15);
        assert!((r.nodes[0] - 0.01).abs() < 1e-15);
        let f = MidpointRule::for_step(0.3, 1.0).unwrap();
        assert_eq!(f.nodes.len(), FALLBACK_TIME_STEPS);
    }

    #[test]
    fn example2_observation_admissibility() {
        let p = ex2_plant(14.0, 1400);
        let spec = SampleSpec::new(30, 3, SampleFamily::Bumps).unwrap();
        let s = generate_samples(&spec, *p.grid(), NormKind::L1, (0.0, 3.0)).unwrap();
        let m = estimate_admissibility(AdmissibilityKind::Observation, &p, 10.0, &s).unwrap();
        assert!(m > 0.0 && m <= 0.5, "{m}");

        // closed form 100 int_0^0.01 (K(x + T) - K(x)) dx, K(x) = -0.5 e^{-x}
        let spec = SampleSpec::new(1, 0, SampleFamily::BoundaryConcentrated).unwrap();
        let s = generate_samples(&spec, *p.grid(), NormKind::L1, (0.0, 3.0)).unwrap();
        let m = estimate_admissibility(AdmissibilityKind::Observation, &p, 10.0, &s).unwrap();
        let oracle = 50.0 * (1.0 - (-10.0f64).exp()) * (1.0 - (-0.01f64).exp());
        assert!((m - oracle).abs() <= 0.01 * oracle, "{m} vs {oracle}");
        assert!(m >= 0.49);
    }

    #[test]
    fn control_admissibility_of_zero_operator_is_zero() {
        let g = Grid::unit(50).unwrap();
        let p = Plant::matrix(g, g.dx(), 0.0).unwrap();
        let spec = SampleSpec::new(5, 1, SampleFamily::SmoothModes).unwrap();
        let s = generate_samples(&spec, g, NormKind::Sup, (0.0, 1.0)).unwrap();
        assert_eq!(estimate_admissibility(AdmissibilityKind::Control, &p, 1.0, &s).unwrap(), 0.0);
        assert_eq!(estimate_admissibility(AdmissibilityKind::Joint, &p, 1.0, &s).unwrap(), 0.0);
    }

    #[test]
    fn control_admissibility_of_isometry_is_one() {
        let p = ex2_plant(6.0, 600);
        let spec = SampleSpec::new(5, 1, SampleFamily::Bumps).unwrap();
        let s = generate_samples(&spec, *p.grid(), NormKind::L1, (0.0, 2.0)).unwrap();
        let m = estimate_admissibility(AdmissibilityKind::Control, &p, 1.0, &s).unwrap();
        assert!((m - 1.0).abs() < 1e-12, "{m}");
    }

    #[test]
    fn observability_examples() {
        // identity feedback on a contraction semigroup: delta >= T
        let g = Grid::unit(100).unwrap();
        let p = Plant::matrix(g, g.dx(), 1.0).unwrap();
        let spec = SampleSpec::new(10, 5, SampleFamily::SmoothModes).unwrap();
        let s = generate_samples(&spec, g, NormKind::Sup, (0.0, 1.0)).unwrap();
        let e = estimate_observability(ObservabilityMode::XPart, &p, 1.0, &s).unwrap();
        assert!(e.delta >= 1.0 - 1e-12, "{}", e.delta);
        assert_eq!(e.convention(), "final_state");

        let p = ex2_plant(8.0, 800);
        let s = generate_samples(&spec, *p.grid(), NormKind::L1, (0.0, 4.0)).unwrap();
        for t in [1.0, 2.0] {
            let e = estimate_observability(ObservabilityMode::Miyadera, &p, t, &s).unwrap();
            assert!(e.delta >= t - 0.5, "{t}: {}", e.delta);
        }

        // nilpotent shift: the final state vanishes, fall back to |y|^2
        let g = Grid::unit(200).unwrap();
        let p = Plant::example1(g, 1.0).unwrap();
        let s = generate_samples(&spec, g, NormKind::L1, (0.0, 1.0)).unwrap();
        let e = estimate_observability(ObservabilityMode::XPart, &p, 1.0, &s).unwrap();
        assert!(e.delta > 0.0);
        assert_eq!(e.convention(), "initial_state");
    }

    #[test]
    fn all_zero_samples_are_an_error() {
        let g = Grid::unit(20).unwrap();
        let p = Plant::example1(g, 1.0).unwrap();
        let z = vec![GridFunction::zeros(g, NormKind::L1)];
        assert!(estimate_observability(ObservabilityMode::XPart, &p, 1.0, &z).is_err());
    }

    #[test]
    fn proof_constant_matches_closed_form_for_example1() {
        // y0 = 1: c(mu) = (1/mu) int_0^1 (1 - e^{-2 mu t}) (1 - t)^2 dt
        let g = Grid::unit(1000).unwrap();
        let p = Plant::example1(g, 1.0).unwrap();
        let y0 = vec![GridFunction::constant(g, NormKind::L1, 1.0)];
        for mu in [1e-4, 0.2] {
            let c = estimate_proof_constant_c(&p, 1.0, mu, &y0).unwrap();
            let n = 20000;
            let oracle: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) / n as f64;
                    (1.0 - (-2.0 * mu * t).exp()) * (1.0 - t).powi(2)
                })
                .sum::<f64>()
                / (n as f64 * mu);
            assert!((c - oracle).abs() < 2e-3 * oracle.max(1e-3), "{mu}: {c} vs {oracle}");
        }
        // mu -> 0: the closed loop approaches the open loop, mu c -> 0
        let c = estimate_proof_constant_c(&p, 1.0, 1e-8, &y0).unwrap();
        assert!(1e-8 * c < 1e-8);
        assert!(estimate_proof_constant_c(&p, 1.0, 0.0, &y0).is_err());
    }

    #[test]
    fn lipschitz_identical_pair_has_zero_residual() {
        let p = ex2_plant(4.0, 400);
        let y = GridFunction::from_fn(*p.grid(), NormKind::L1, |x| (-x).exp()).unwrap();
        assert_eq!(lipschitz_terms(&p.operator, &y, &y).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn lipschitz_estimate_holds_on_its_pairs() {
        let p = ex2_plant(4.0, 400);
        let spec = SampleSpec::new(20, 9, SampleFamily::RandomPiecewise).unwrap();
        let s = generate_samples(&spec, *p.grid(), NormKind::L1, (0.0, 4.0)).unwrap();
        let est = estimate_lipschitz(&p.operator, &s).unwrap();
        // (1, 1) is admissible analytically, so the minimal sum cannot exceed 2
        assert!(est.k1 + est.k2 <= 2.0 + 1e-9, "{est:?}");
        for w in s.windows(2) {
            let (d, a, b) = lipschitz_terms(&p.operator, &w[0], &w[1]).unwrap();
            assert!(d <= est.k1 * a + est.k2 * b + 1e-9 * d.max(1.0));
            assert!(d <= a + b + 1e-12);
        }
        let y = &s[0];
        let (d, a, b) = lipschitz_terms(&p.operator, y, &y.scaled(2.0)).unwrap();
        assert!(d <= est.k1 * a + est.k2 * b + 1e-9 * d.max(1.0));
    }

    #[test]
    fn lipschitz_needs_the_graph_norm_term() {
        // y, z differ only where k vanishes: C(y - z) = 0 but F(y) != F(z)
        let g = Grid::new(0.0, 2.0, 200).unwrap();
        let k = GridFunction::from_fn(g, NormKind::L1, |x| if x < 1.0 { 0.5 } else { 0.0 }).unwrap();
        let op = ControlOperatorModel::multiplication(k).unwrap();
        let y = GridFunction::from_fn(g, NormKind::L1, |x| if x < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let z = GridFunction::from_fn(g, NormKind::L1, |x| if x < 1.0 { 1.0 } else { 0.5 }).unwrap();
        let (d, a, b) = lipschitz_terms(&op, &y, &z).unwrap();
        assert!(d > 0.0 && a > 0.0);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn multiplier_pairing_difference_bound() {
        // |<ky, J y> - <kz, J z>| <= min over the two orderings of
        // |y||k(y - z)| + |y - z||kz|
        let p = ex2_plant(4.0, 400);
        let ControlOperatorModel::Multiplication { k } = &p.operator else {
            unreachable!()
        };
        let spec = SampleSpec::new(40, 11, SampleFamily::RandomPiecewise).unwrap();
        let s = generate_samples(&spec, *p.grid(), NormKind::L1, (0.0, 4.0)).unwrap();
        let f = |y: &GridFunction| y.duality_select().pair(&k.mul(y).unwrap()).unwrap();
        for w in s.windows(2) {
            let (y, z) = (&w[0], &w[1]);
            let d = y.sub(z).unwrap();
            let kd = k.mul(&d).unwrap().norm();
            let lhs = (f(y) - f(z)).abs();
            let r1 = y.norm() * kd + d.norm() * k.mul(z).unwrap().norm();
            let r2 = z.norm() * kd + d.norm() * k.mul(y).unwrap().norm();
            assert!(lhs <= r1.min(r2) * (1.0 + 1e-12) + 1e-15);
        }
    }

    fn exp_traj(sigma: f64, n: usize) -> Trajectory {
        let g = Grid::unit(4).unwrap();
        let mut tr = Trajectory::default();
        for i in 0..n {
            let t = i as f64 * 0.1;
            tr.push(t, GridFunction::constant(g, NormKind::Sup, 2.0 * (-sigma * t).exp()), 0.0);
        }
        tr
    }

    #[test]
    fn decay_fit_examples() {
        let f = fit_decay_rate(&exp_traj(0.5, 50), 0.0).unwrap();
        assert!((f.sigma - 0.5).abs() < 1e-12);
        assert!((f.prefactor - 1.0).abs() < 1e-12);
        let c = fit_decay_rate(&exp_traj(0.0, 50), 0.0).unwrap();
        assert!(c.sigma.abs() < 1e-14);
        assert!(fit_decay_rate(&exp_traj(0.5, 4), 0.0).is_err());

        let g = Grid::unit(100).unwrap();
        let y0 = GridFunction::constant(g, NormKind::L1, 1.0);
        let tr = crate::closedloop::simulate_example1_exact(&y0, 1.0, 0.2, &time_grid(0.1, 2.0)).unwrap();
        let n = fit_decay_rate(&tr, 0.0).unwrap();
        assert!(n.nilpotent && n.sigma == f64::INFINITY);
    }

    #[test]
    fn decay_fit_on_exact_example2() {
        let g = Grid::new(0.0, 12.0, 1200).unwrap();
        let k = GridFunction::zeros(g, NormKind::L1);
        let y0 = GridFunction::from_fn(g, NormKind::L1, |x| if x < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let tr = simulate_example2_exact(&y0, &k, 0.5, &time_grid(0.1, 10.0)).unwrap();
        let f = fit_decay_rate(&tr, 1.0).unwrap();
        assert!((f.sigma - 0.5).abs() < 1e-6);
    }

    #[test]
    fn iterate_bound_examples() {
        let tr = exp_traj(0.5, 41);
        let v = verify_iterate_bound(&tr, 1.0, 1.0).unwrap();
        assert!(v.pass && v.periods == 4);
        let tight = (-1.0f64).exp();
        assert!(verify_iterate_bound(&tr, tight, 1.0).unwrap().pass);
        assert!(!verify_iterate_bound(&tr, 0.9 * tight, 1.0).unwrap().pass);
        assert!(verify_iterate_bound(&exp_traj(0.5, 15), 1.0, 1.0).is_err());
    }

    #[test]
    fn report_text_is_flat_and_ordered() {
        let p = ex2_plant(14.0, 700);
        let y0 = GridFunction::from_fn(*p.grid(), NormKind::L1, |x| if x < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let opts = CertifyOptions {
            horizon: 1.0,
            samples: SampleSpec::new(8, 1, SampleFamily::Bumps).unwrap(),
            window: (0.0, 2.0),
            periods: 10,
            fit_t_min: 1.0,
            check_stability: false,
        };
        let r = certify(&p, &y0, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let text = r.to_text();
        assert!(text.starts_with("model = example2\n"));
        assert!(text.ends_with("verdict = PASS\n"));
        assert_eq!(r.csv_header().split(',').count(), r.csv_row().split(',').count());
        assert_eq!(certify(&p, &y0, &opts).unwrap().to_text(), text);
    }

    #[test]
    fn zero_feedback_fails_certification() {
        let g = Grid::unit(50).unwrap();
        let p = Plant::matrix(g, g.dx(), 0.0).unwrap();
        let y0 = GridFunction::constant(g, NormKind::Sup, 1.0);
        let opts = CertifyOptions {
            horizon: 1.0,
            samples: SampleSpec::new(4, 1, SampleFamily::SmoothModes).unwrap(),
            window: (0.0, 1.0),
            periods: 3,
            fit_t_min: 0.0,
            check_stability: false,
        };
        let r = certify(&p, &y0, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.delta.delta, 0.0);
    }
}
