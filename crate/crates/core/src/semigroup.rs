//! Semigroup evaluators and resolvent operations.
//!
//! Three models are provided:
//!
//! * [`SemigroupModel::LeftShiftCutoff`]: `(S(t)y)(x) = y(x + t)` on `(0, 1)`,
//!   zero once `x + t > 1`. Nilpotent: `S(t) = 0` for `t >= 1`.
//! * [`SemigroupModel::RightShift`]: `(S(t)y)(x) = y(x - t)`, zero-filled below
//!   `0`, on a truncation `(0, x_max)` of the half line.
//! * [`SemigroupModel::HeatNeumann`]: implicit time stepping of `y_t = y_xx`
//!   with homogeneous Neumann data on `(0, 1)`.
//!
//! Shifts by a whole number of cells are exact. Other shifts fall back to
//! linear interpolation between cell centers; [`SemigroupModel::is_aligned`]
//! reports which case applies.

use crate::banach::{Grid, GridFunction, NormKind};
use crate::error::{invalid, Error, Result};

/// Tridiagonal matrix. `lower[i]` multiplies `x[i-1]` in row `i`,
/// `upper[i]` multiplies `x[i+1]`; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.diag.fill(1.0);
        m
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `a * I + b * self`
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| b * v).collect(),
            diag: self.diag.iter().map(|v| a + b * v).collect(),
            upper: self.upper.iter().map(|v| b * v).collect(),
        }
    }

    /// `self + c * other`
    pub fn plus_scaled(&self, c: f64, other: &Tridiagonal) -> Self {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        Self {
            lower: zip(&self.lower, &other.lower),
            diag: zip(&self.diag, &other.diag),
            upper: zip(&self.upper, &other.upper),
        }
    }

    /// Thomas algorithm. `lambda` is only used to label a zero-pivot error.
    pub fn solve(&self, rhs: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular { row: 0, lambda });
        }
        c[0] = self.upper[0] / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { row: i, lambda });
            }
            c[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// Discrete generator on a grid, with the norm it is meant to be dissipative in.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    grid: Grid,
    norm: NormKind,
    matrix: Tridiagonal,
}

impl GeneratorMatrix {
    pub fn new(grid: Grid, norm: NormKind, matrix: Tridiagonal) -> Result<Self> {
        if matrix.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{}x{} matrix on {} cells",
                matrix.len(),
                matrix.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, norm, matrix })
    }

    pub fn zero(grid: Grid, norm: NormKind) -> Self {
        Self {
            grid,
            norm,
            matrix: Tridiagonal::zeros(grid.n_cells()),
        }
    }

    /// Upwind `y'` with inflow value `y(x_max) = 0`.
    pub fn left_shift_upwind(grid: Grid) -> Self {
        let n = grid.n_cells();
        let h = 1.0 / grid.dx();
        let mut m = Tridiagonal::zeros(n);
        m.diag.fill(-h);
        m.upper[..n - 1].fill(h);
        Self {
            grid,
            norm: NormKind::L1,
            matrix: m,
        }
    }

    /// Upwind `-y'` with inflow value `y(x_min) = 0`.
    pub fn right_shift_upwind(grid: Grid) -> Self {
        let n = grid.n_cells();
        let h = 1.0 / grid.dx();
        let mut m = Tridiagonal::zeros(n);
        m.diag.fill(-h);
        m.lower[1..].fill(h);
        Self {
            grid,
            norm: NormKind::L1,
            matrix: m,
        }
    }

    /// Second difference with mirrored ghost cells (homogeneous Neumann).
    pub fn heat_neumann(grid: Grid) -> Self {
        let n = grid.n_cells();
        let h2 = 1.0 / (grid.dx() * grid.dx());
        let mut m = Tridiagonal::zeros(n);
        for i in 0..n {
            let mut d = 0.0;
            if i > 0 {
                m.lower[i] = h2;
                d -= h2;
            }
            if i + 1 < n {
                m.upper[i] = h2;
                d -= h2;
            }
            m.diag[i] = d;
        }
        Self {
            grid,
            norm: NormKind::Sup,
            matrix: m,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    pub fn apply(&self, y: &GridFunction) -> Result<GridFunction> {
        self.check(y)?;
        Ok(y.with_values(self.matrix.matvec(y.values())))
    }

    /// Solves `(lambda I - A) w = z`.
    pub fn resolvent_apply(&self, lambda: f64, z: &GridFunction) -> Result<GridFunction> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        self.check(z)?;
        let w = self.matrix.affine(lambda, -1.0).solve(z.values(), lambda)?;
        Ok(z.with_values(w))
    }

    /// Induced norm of `lambda (lambda I - A)^{-1}`: max column sum in `L1`
    /// (the uniform cell weight cancels), max row sum in sup.
    pub fn resolvent_norm(&self, lambda: f64) -> Result<f64> {
        let n = self.grid.n_cells();
        let shifted = self.matrix.affine(lambda, -1.0);
        let mut col_sums = vec![0.0; n];
        let mut row_sums = vec![0.0; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = shifted.solve(&e, lambda)?;
            e[j] = 0.0;
            for (i, v) in col.iter().enumerate() {
                let a = (lambda * v).abs();
                col_sums[j] += a;
                row_sums[i] += a;
            }
        }
        let sums = match self.norm {
            NormKind::L1 => col_sums,
            NormKind::Sup => row_sums,
        };
        Ok(sums.into_iter().fold(0.0, f64::max))
    }

    fn check(&self, y: &GridFunction) -> Result<()> {
        if *y.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "state on {:?}, generator on {:?}",
                y.grid(),
                self.grid
            )));
        }
        Ok(())
    }
}

/// `lambda (lambda I - A)^{-1} B u`, the resolvent-smoothed control action.
pub fn resolvent_smoother<U: ?Sized>(
    generator: &GeneratorMatrix,
    b_apply: impl Fn(&U) -> Result<GridFunction>,
    lambda: f64,
    u: &U,
) -> Result<GridFunction> {
    let bu = b_apply(u)?;
    Ok(generator.resolvent_apply(lambda, &bu)?.scaled(lambda))
}

/// Powers of ten used to approach `lambda -> infinity`.
pub fn lambda_ladder() -> Vec<f64> {
    (1..=12).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatScheme {
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SemigroupModel {
    LeftShiftCutoff { grid: Grid },
    RightShift { grid: Grid },
    HeatNeumann { grid: Grid, dt: f64, scheme: HeatScheme },
}

impl SemigroupModel {
    pub fn heat(grid: Grid, dt: f64, scheme: HeatScheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(Self::HeatNeumann { grid, dt, scheme })
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Self::LeftShiftCutoff { grid }
            | Self::RightShift { grid }
            | Self::HeatNeumann { grid, .. } => grid,
        }
    }

    pub fn norm_kind(&self) -> NormKind {
        match self {
            Self::LeftShiftCutoff { .. } | Self::RightShift { .. } => NormKind::L1,
            Self::HeatNeumann { .. } => NormKind::Sup,
        }
    }

    /// Time resolution at which evaluation is exact composition: one cell
    /// for the shifts, one time step for the heat model.
    pub fn native_step(&self) -> f64 {
        match self {
            Self::LeftShiftCutoff { grid } | Self::RightShift { grid } => grid.dx(),
            Self::HeatNeumann { dt, .. } => *dt,
        }
    }

    pub fn is_aligned(&self, t: f64) -> bool {
        match self {
            Self::LeftShiftCutoff { grid } | Self::RightShift { grid } => {
                grid.aligned_cells(t).is_some()
            }
            Self::HeatNeumann { dt, .. } => split_steps(t, *dt).1 == 0.0,
        }
    }

    pub fn generator(&self) -> GeneratorMatrix {
        match self {
            Self::LeftShiftCutoff { grid } => GeneratorMatrix::left_shift_upwind(*grid),
            Self::RightShift { grid } => GeneratorMatrix::right_shift_upwind(*grid),
            Self::HeatNeumann { grid, .. } => GeneratorMatrix::heat_neumann(*grid),
        }
    }

    /// `S(t) y0`.
    pub fn evaluate(&self, y0: &GridFunction, t: f64) -> Result<GridFunction> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTime(t));
        }
        if y0.grid() != self.grid() {
            return Err(Error::GridMismatch(format!(
                "initial state on {:?}, model on {:?}",
                y0.grid(),
                self.grid()
            )));
        }
        match self {
            Self::LeftShiftCutoff { grid } => Ok(shift(y0, grid, t, Direction::Left)),
            Self::RightShift { grid } => Ok(shift(y0, grid, t, Direction::Right)),
            Self::HeatNeumann { grid, dt, scheme } => {
                let a = GeneratorMatrix::heat_neumann(*grid);
                let (steps, rem) = split_steps(t, *dt);
                let mut y = y0.values().to_vec();
                let full = HeatStep::new(a.matrix(), *dt, *scheme);
                for _ in 0..steps {
                    y = full.apply(&y)?;
                }
                if rem > 0.0 {
                    y = HeatStep::new(a.matrix(), rem, *scheme).apply(&y)?;
                }
                Ok(y0.with_values(y))
            }
        }
    }

    /// `|S(t) S(s) y0 - S(t + s) y0|`
    pub fn semigroup_law_residual(&self, y0: &GridFunction, t: f64, s: f64) -> Result<f64> {
        let composed = self.evaluate(&self.evaluate(y0, s)?, t)?;
        let direct = self.evaluate(y0, t + s)?;
        Ok(composed.sub(&direct)?.norm())
    }
}

/// Splits `t` into whole steps of `dt` plus a shortened last step.
/// A remainder within rounding of a whole step is dropped.
pub(crate) fn split_steps(t: f64, dt: f64) -> (usize, f64) {
    let r = t / dt;
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.max(1.0) {
        return (k as usize, 0.0);
    }
    let k = r.floor();
    (k as usize, t - k * dt)
}

struct HeatStep {
    lhs: Tridiagonal,
    rhs: Option<Tridiagonal>,
}

impl HeatStep {
    fn new(a: &Tridiagonal, h: f64, scheme: HeatScheme) -> Self {
        match scheme {
            HeatScheme::ImplicitEuler => Self {
                lhs: a.affine(1.0, -h),
                rhs: None,
            },
            HeatScheme::CrankNicolson => Self {
                lhs: a.affine(1.0, -0.5 * h),
                rhs: Some(a.affine(1.0, 0.5 * h)),
            },
        }
    }

    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        match &self.rhs {
            None => self.lhs.solve(y, 0.0),
            Some(r) => self.lhs.solve(&r.matvec(y), 0.0),
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Left,
    Right,
}

fn shift(y0: &GridFunction, grid: &Grid, t: f64, dir: Direction) -> GridFunction {
    let n = grid.n_cells();
    let v = y0.values();
    let mut out = vec![0.0; n];
    let m = t / grid.dx();
    if m >= n as f64 + 1.0 {
        return y0.with_values(out);
    }
    // source value at fractional cell offset, zero outside the window
    let at = |j: isize| -> f64 {
        if j >= 0 && (j as usize) < n {
            v[j as usize]
        } else {
            0.0
        }
    };
    match grid.aligned_cells(t) {
        Some(k) => {
            let k = k as isize;
            for (i, o) in out.iter_mut().enumerate() {
                let i = i as isize;
                *o = match dir {
                    Direction::Left => at(i + k),
                    Direction::Right => at(i - k),
                };
            }
        }
        None => {
            let k = m.floor() as isize;
            let theta = m - m.floor();
            for (i, o) in out.iter_mut().enumerate() {
                let i = i as isize;
                *o = match dir {
                    Direction::Left => (1.0 - theta) * at(i + k) + theta * at(i + k + 1),
                    Direction::Right => (1.0 - theta) * at(i - k) + theta * at(i - k - 1),
                };
            }
        }
    }
    y0.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(grid: Grid, norm: NormKind, c: f64, w: f64) -> GridFunction {
        GridFunction::from_fn(grid, norm, |x| {
            let u = (x - c) / w;
            if u.abs() < 0.5 {
                (std::f64::consts::PI * u).cos().powi(2)
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn thomas_matches_dense_product() {
        let n = 6;
        let mut m = Tridiagonal::zeros(n);
        for i in 0..n {
            m.diag[i] = 4.0 + i as f64;
            if i > 0 {
                m.lower[i] = -1.0 - 0.1 * i as f64;
            }
            if i + 1 < n {
                m.upper[i] = 0.5;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = m.matvec(&x);
        let sol = m.solve(&b, 0.0).unwrap();
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = Tridiagonal::zeros(3);
        assert!(matches!(m.solve(&[1.0, 1.0, 1.0], 2.0), Err(Error::Singular { row: 0, .. })));
    }

    #[test]
    fn identity_at_time_zero() {
        let g = Grid::unit(50).unwrap();
        let models = [
            SemigroupModel::LeftShiftCutoff { grid: g },
            SemigroupModel::RightShift { grid: g },
            SemigroupModel::heat(g, 0.01, HeatScheme::ImplicitEuler).unwrap(),
        ];
        for m in models {
            let y = bump(g, m.norm_kind(), 0.4, 0.3);
            assert_eq!(m.evaluate(&y, 0.0).unwrap(), y);
        }
    }

    #[test]
    fn negative_time_is_an_error() {
        let g = Grid::unit(10).unwrap();
        let m = SemigroupModel::RightShift { grid: g };
        let y = GridFunction::zeros(g, NormKind::L1);
        assert!(matches!(m.evaluate(&y, -0.1), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn left_shift_is_nilpotent() {
        let g = Grid::unit(64).unwrap();
        let m = SemigroupModel::LeftShiftCutoff { grid: g };
        let y = GridFunction::constant(g, NormKind::L1, 3.0);
        for t in [1.0, 1.0 + 1e-3, 1.5, 7.0, 1e9] {
            assert!(m.evaluate(&y, t).unwrap().is_zero(), "t = {t}");
        }
    }

    #[test]
    fn left_shift_moves_data_towards_zero() {
        let g = Grid::unit(4).unwrap();
        let m = SemigroupModel::LeftShiftCutoff { grid: g };
        let y = GridFunction::new(g, vec![1.0, 2.0, 3.0, 4.0], NormKind::L1).unwrap();
        assert_eq!(m.evaluate(&y, 0.5).unwrap().values(), &[3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn right_shift_is_isometric_inside_window() {
        let g = Grid::new(0.0, 10.0, 1000).unwrap();
        let m = SemigroupModel::RightShift { grid: g };
        let y = bump(g, NormKind::L1, 0.7, 1.0);
        for k in [1, 17, 250, 800] {
            let t = k as f64 * g.dx();
            assert_eq!(m.evaluate(&y, t).unwrap().norm(), y.norm());
        }
    }

    #[test]
    fn non_aligned_shift_is_flagged_and_interpolates() {
        let g = Grid::unit(10).unwrap();
        let m = SemigroupModel::RightShift { grid: g };
        assert!(m.is_aligned(0.3));
        assert!(!m.is_aligned(0.35));
        let y = GridFunction::new(g, (0..10).map(|i| i as f64).collect(), NormKind::L1).unwrap();
        let s = m.evaluate(&y, 0.05).unwrap();
        assert_eq!(s.values()[0], 0.0);
        assert!((s.values()[4] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn heat_preserves_constants() {
        let g = Grid::unit(40).unwrap();
        for scheme in [HeatScheme::ImplicitEuler, HeatScheme::CrankNicolson] {
            let m = SemigroupModel::heat(g, 0.025, scheme).unwrap();
            let y = GridFunction::constant(g, NormKind::Sup, 1.0);
            let s = m.evaluate(&y, 0.73).unwrap();
            assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn aligned_semigroup_law_is_exact() {
        let g = Grid::unit(100).unwrap();
        let shifts = [
            SemigroupModel::LeftShiftCutoff { grid: g },
            SemigroupModel::RightShift { grid: g },
        ];
        for m in shifts {
            let y = bump(g, NormKind::L1, 0.5, 0.4);
            assert_eq!(m.semigroup_law_residual(&y, 0.13, 0.2).unwrap(), 0.0);
        }
        let heat = SemigroupModel::heat(g, 0.01, HeatScheme::ImplicitEuler).unwrap();
        let y = bump(g, NormKind::Sup, 0.3, 0.4);
        assert_eq!(heat.semigroup_law_residual(&y, 0.05, 0.07).unwrap(), 0.0);
    }

    #[test]
    fn heat_law_residual_shrinks_with_dt_when_misaligned() {
        // oracle: residual against the aligned composition, measured at two step sizes
        let g = Grid::unit(50).unwrap();
        let y = bump(g, NormKind::Sup, 0.3, 0.3);
        let res = |dt: f64| {
            SemigroupModel::heat(g, dt, HeatScheme::ImplicitEuler)
                .unwrap()
                .semigroup_law_residual(&y, 0.0137, 0.0213)
                .unwrap()
        };
        let r1 = res(2e-3);
        let r2 = res(1e-3);
        assert!(r1 > 0.0);
        assert!(r1 <= 5.0 * 2e-3, "{r1}");
        assert!(r2 <= 5.0 * 1e-3, "{r2}");
    }

    #[test]
    fn resolvent_of_zero_generator_divides() {
        let g = Grid::unit(5).unwrap();
        let a = GeneratorMatrix::zero(g, NormKind::L1);
        let z = GridFunction::new(g, vec![1.0, -2.0, 3.0, 0.5, 4.0], NormKind::L1).unwrap();
        let w = a.resolvent_apply(4.0, &z).unwrap();
        assert_eq!(w.values(), z.scaled(0.25).values());
        assert!(a.resolvent_apply(0.0, &z).is_err());
    }

    #[test]
    fn hille_yosida_bound_on_all_generators() {
        let g = Grid::unit(60).unwrap();
        for a in [
            GeneratorMatrix::left_shift_upwind(g),
            GeneratorMatrix::right_shift_upwind(g),
            GeneratorMatrix::heat_neumann(g),
        ] {
            for lambda in [1.0, 10.0, 100.0, 1e3, 1e4] {
                let r = a.resolvent_norm(lambda).unwrap();
                assert!(r <= 1.0 + 1e-8, "{:?} lambda={lambda}: {r}", a.norm_kind());
            }
        }
    }

    #[test]
    fn resolvent_contracts_sampled_states() {
        let g = Grid::unit(80).unwrap();
        for a in [
            GeneratorMatrix::left_shift_upwind(g),
            GeneratorMatrix::heat_neumann(g),
        ] {
            let z = bump(g, a.norm_kind(), 0.6, 0.5);
            for lambda in [1.0, 10.0, 1e3, 1e6] {
                let w = a.resolvent_apply(lambda, &z).unwrap().scaled(lambda);
                assert!(w.norm() <= z.norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn resolvent_acts_diagonally_on_heat_modes() {
        // discrete Neumann modes cos(m pi x_i) with eigenvalue -(4/dx^2) sin^2(m pi dx / 2)
        let n = 64;
        let g = Grid::unit(n).unwrap();
        let dx = g.dx();
        let a = GeneratorMatrix::heat_neumann(g);
        for mode in [1usize, 3, 7] {
            let phi = GridFunction::from_fn(g, NormKind::Sup, |x| {
                (mode as f64 * std::f64::consts::PI * x).cos()
            })
            .unwrap();
            let s = (mode as f64 * std::f64::consts::PI * dx / 2.0).sin();
            let eig = -4.0 / (dx * dx) * s * s;
            let av = a.apply(&phi).unwrap();
            for (u, v) in av.values().iter().zip(phi.values()) {
                assert!((u - eig * v).abs() < 1e-9 * eig.abs());
            }
            for lambda in [1.0, 50.0, 1e4] {
                let w = a.resolvent_apply(lambda, &phi).unwrap().scaled(lambda);
                let f = lambda / (lambda - eig);
                for (u, v) in w.values().iter().zip(phi.values()) {
                    assert!((u - f * v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn smoother_of_identity_tends_to_identity() {
        let g = Grid::unit(100).unwrap();
        let a = GeneratorMatrix::heat_neumann(g);
        let u = GridFunction::from_fn(g, NormKind::Sup, |x| (std::f64::consts::PI * x).cos())
            .unwrap();
        let ident = |v: &GridFunction| Ok(v.clone());
        let w = resolvent_smoother(&a, ident, 1e6, &u).unwrap();
        let rel = w.sub(&u).unwrap().norm() / u.norm();
        assert!(rel <= 1e-4, "{rel}");
    }

    #[test]
    fn split_steps_tolerates_rounding() {
        assert_eq!(split_steps(0.3, 0.1), (3, 0.0));
        assert_eq!(split_steps(0.0, 0.1), (0, 0.0));
        let (k, r) = split_steps(0.35, 0.1);
        assert_eq!(k, 3);
        assert!((r - 0.05).abs() < 1e-12);
    }

    #[test]
    fn crank_nicolson_is_not_sup_contractive_at_large_ratio() {
        // dt / dx^2 = 100: no discrete maximum principle
        let g = Grid::unit(100).unwrap();
        let cn = SemigroupModel::heat(g, 0.01, HeatScheme::CrankNicolson).unwrap();
        let ie = SemigroupModel::heat(g, 0.01, HeatScheme::ImplicitEuler).unwrap();
        let y = GridFunction::new(g, (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(), NormKind::Sup)
            .unwrap();
        assert!(cn.evaluate(&y, 0.01).unwrap().norm() > 1.0);
        assert!(ie.evaluate(&y, 0.01).unwrap().norm() <= 1.0);
    }
}
