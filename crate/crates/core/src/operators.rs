//! Control and observation operators of the three model problems.
//!
//! | model                     | full operator `Bfull`   | factorization `B C`                 | X-part          |
//! |---------------------------|-------------------------|-------------------------------------|-----------------|
//! | [`DiracTrace`]            | `y + alpha y(1) A a`    | `B q = q A a`, `C y = alpha y(1)`   | `y`             |
//! | [`Multiplication`]        | `(1 + k) y`             | `B = I`, `C = (1 + k)`              | `(1 + k) y`     |
//! | [`IdentityPlusDerivative`]| `y + y'`                | `B = I`, `C = I + d/dx`             | `y + y'`        |
//! | [`ScaledIdentity`]        | `b y`                   | `B = b I`, `C = I`                  | `b y`           |
//!
//! `a` is the constant function `1`, so `A a` is not in the state space for
//! the cutoff transport model; only its discrete image is representable.
//!
//! [`DiracTrace`]: ControlOperatorModel::DiracTrace
//! [`Multiplication`]: ControlOperatorModel::Multiplication
//! [`IdentityPlusDerivative`]: ControlOperatorModel::IdentityPlusDerivative
//! [`ScaledIdentity`]: ControlOperatorModel::ScaledIdentity

use crate::banach::{Grid, GridFunction, NormKind};
use crate::error::{invalid, Error, Result};
use crate::semigroup::{lambda_ladder, resolvent_smoother, GeneratorMatrix, Tridiagonal};

#[derive(Debug, Clone, PartialEq)]
pub enum ControlOperatorModel {
    /// Point observation `alpha y(1)` fed back through `A_{-1} a`.
    DiracTrace { alpha: f64 },
    /// `y -> (1 + k) y` with `k` integrable and `|k|_1 < 1`.
    Multiplication { k: GridFunction },
    /// `y -> y + y'` with a forward difference.
    IdentityPlusDerivative,
    /// `y -> b y`, a bounded reference operator.
    ScaledIdentity { b: f64 },
}

/// Value of an observation: scalar for the trace, a field otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Scalar(f64),
    Field(GridFunction),
}

impl Observation {
    pub fn norm(&self) -> f64 {
        match self {
            Observation::Scalar(v) => v.abs(),
            Observation::Field(f) => f.norm(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Observation::Scalar(v) => Observation::Scalar(c * v),
            Observation::Field(f) => Observation::Field(f.scaled(c)),
        }
    }

    pub fn as_field(&self) -> Option<&GridFunction> {
        match self {
            Observation::Field(f) => Some(f),
            Observation::Scalar(_) => None,
        }
    }
}

/// Forward difference `(y[i+1] - y[i]) / dx`, zero in the last cell
/// (mirrored ghost value).
pub fn forward_difference(y: &GridFunction) -> GridFunction {
    let dx = y.grid().dx();
    let v = y.values();
    let n = v.len();
    let mut d = vec![0.0; n];
    for i in 0..n - 1 {
        d[i] = (v[i + 1] - v[i]) / dx;
    }
    y.with_values(d)
}

/// Value at the right end `x_max`, extrapolated linearly from the two
/// outermost cell centers.
pub fn right_trace(y: &GridFunction) -> f64 {
    let v = y.values();
    let n = v.len();
    1.5 * v[n - 1] - 0.5 * v[n - 2]
}

impl ControlOperatorModel {
    pub fn dirac_trace(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        Ok(Self::DiracTrace { alpha })
    }

    /// Checks `|k|_1 < 1` on the grid of `k`.
    pub fn multiplication(k: GridFunction) -> Result<Self> {
        if k.norm_kind() != NormKind::L1 {
            return Err(invalid("k", "multiplier must live in L1"));
        }
        let nk = k.norm();
        if nk >= 1.0 {
            return Err(invalid("k", format!("|k|_1 = {nk} must be < 1")));
        }
        Ok(Self::Multiplication { k })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DiracTrace { .. } => "dirac_trace",
            Self::Multiplication { .. } => "multiplication",
            Self::IdentityPlusDerivative => "identity_plus_derivative",
            Self::ScaledIdentity { .. } => "scaled_identity",
        }
    }

    fn check_k(&self, y: &GridFunction) -> Result<()> {
        if let Self::Multiplication { k } = self {
            k.ensure_same_grid(y)?;
        }
        Ok(())
    }

    /// `C y`, the output used in the admissibility estimates.
    pub fn apply_observation(&self, y: &GridFunction) -> Result<Observation> {
        self.check_k(y)?;
        Ok(match self {
            Self::DiracTrace { alpha } => Observation::Scalar(alpha * right_trace(y)),
            Self::Multiplication { k } => Observation::Field(k.mul(y)?),
            Self::IdentityPlusDerivative => Observation::Field(y.add(&forward_difference(y))?),
            Self::ScaledIdentity { .. } => Observation::Field(y.clone()),
        })
    }

    /// The full bilinear operator applied to `y`. Not representable for the
    /// trace model, whose image leaves the state space.
    pub fn full_operator(&self, y: &GridFunction) -> Result<GridFunction> {
        self.check_k(y)?;
        match self {
            Self::DiracTrace { .. } => Err(Error::Unsupported(
                "the trace feedback maps outside the state space".into(),
            )),
            Self::Multiplication { k } => {
                let mut out = y.clone();
                out.axpy(1.0, &k.mul(y)?)?;
                Ok(out)
            }
            Self::IdentityPlusDerivative => y.add(&forward_difference(y)),
            Self::ScaledIdentity { b } => Ok(y.scaled(*b)),
        }
    }

    /// Projection of the feedback operator onto the state space.
    pub fn x_part(&self, y: &GridFunction) -> Result<GridFunction> {
        match self {
            Self::DiracTrace { .. } => Ok(y.clone()),
            _ => self.full_operator(y),
        }
    }

    /// `<X-part(y), J(y)>`
    pub fn x_part_pairing(&self, y: &GridFunction) -> Result<f64> {
        y.duality_select().pair(&self.x_part(y)?)
    }

    /// The part of the operator that is only bounded relative to `A`.
    pub fn relatively_bounded_part(&self, y: &GridFunction) -> Result<Observation> {
        self.check_k(y)?;
        Ok(match self {
            Self::ScaledIdentity { b } => Observation::Field(y.scaled(*b)),
            _ => self.apply_observation(y)?,
        })
    }

    /// Tridiagonal matrix of the full operator, for implicit closed-loop steps.
    pub fn operator_matrix(&self, grid: &Grid) -> Result<Tridiagonal> {
        let n = grid.n_cells();
        match self {
            Self::DiracTrace { .. } => Err(Error::Unsupported(
                "the trace feedback has no matrix on the state grid".into(),
            )),
            Self::Multiplication { k } => {
                if k.grid() != grid {
                    return Err(Error::GridMismatch("multiplier grid".into()));
                }
                let mut m = Tridiagonal::zeros(n);
                for (d, kv) in m.diag.iter_mut().zip(k.values()) {
                    *d = 1.0 + kv;
                }
                Ok(m)
            }
            Self::IdentityPlusDerivative => {
                let h = 1.0 / grid.dx();
                let mut m = Tridiagonal::identity(n);
                for i in 0..n - 1 {
                    m.diag[i] -= h;
                    m.upper[i] = h;
                }
                Ok(m)
            }
            Self::ScaledIdentity { b } => Ok(Tridiagonal::identity(n).affine(0.0, *b)),
        }
    }

    /// Input of the control operator in the factorization `B C`.
    pub fn factor_output(&self, y: &GridFunction) -> Result<Observation> {
        self.check_k(y)?;
        Ok(match self {
            Self::DiracTrace { alpha } => Observation::Scalar(alpha * right_trace(y)),
            Self::Multiplication { .. } | Self::IdentityPlusDerivative => {
                Observation::Field(self.full_operator(y)?)
            }
            Self::ScaledIdentity { .. } => Observation::Field(y.clone()),
        })
    }

    /// `B u`. For the trace model this is `u A a` with the discrete generator.
    pub fn control_input(&self, generator: &GeneratorMatrix, u: &Observation) -> Result<GridFunction> {
        match (self, u) {
            (Self::DiracTrace { .. }, Observation::Scalar(q)) => {
                let grid = *generator.grid();
                let a = GridFunction::constant(grid, generator.norm_kind(), 1.0);
                Ok(generator.apply(&a)?.scaled(*q))
            }
            (Self::ScaledIdentity { b }, Observation::Field(f)) => Ok(f.scaled(*b)),
            (Self::Multiplication { .. } | Self::IdentityPlusDerivative, Observation::Field(f)) => {
                Ok(f.clone())
            }
            _ => Err(Error::Unsupported(format!(
                "control input of the wrong shape for {}",
                self.name()
            ))),
        }
    }

    /// `limsup_{lambda -> inf} <lambda R(lambda, A) B C y, J(y)>` along
    /// [`lambda_ladder`].
    pub fn f_bc_limsup(&self, generator: &GeneratorMatrix, y: &GridFunction) -> Result<FbcValue> {
        if y.is_zero() {
            return Ok(FbcValue {
                value: 0.0,
                converged: true,
                lambda: 0.0,
            });
        }
        let j = y.duality_select();
        let cy = self.factor_output(y)?;
        let ladder = lambda_ladder();
        let mut values = Vec::with_capacity(ladder.len());
        for &lambda in &ladder {
            let smoothed =
                resolvent_smoother(generator, |u| self.control_input(generator, u), lambda, &cy)?;
            let v = j.pair(&smoothed)?;
            if let Some(&prev) = values.last() {
                let prev: f64 = prev;
                if (v - prev).abs() < 1e-8 * v.abs().max(prev.abs()).max(f64::MIN_POSITIVE) {
                    return Ok(FbcValue {
                        value: v,
                        converged: true,
                        lambda,
                    });
                }
            }
            values.push(v);
        }
        let tail = &values[values.len().saturating_sub(3)..];
        Ok(FbcValue {
            value: tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            converged: false,
            lambda: *ladder.last().unwrap(),
        })
    }

    /// `sup |B y| / (|y| + |A y|)` over the samples.
    pub fn check_a_boundedness(
        &self,
        generator: &GeneratorMatrix,
        samples: &[GridFunction],
    ) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for y in samples {
            let denom = y.norm() + generator.apply(y)?.norm();
            if denom == 0.0 {
                continue;
            }
            sup = sup.max(self.relatively_bounded_part(y)?.norm() / denom);
        }
        Ok(sup)
    }
}

/// Result of the resolvent-smoothed pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbcValue {
    pub value: f64,
    pub converged: bool,
    /// Last `lambda` evaluated.
    pub lambda: f64,
}
