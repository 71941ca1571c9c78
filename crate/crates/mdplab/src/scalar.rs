//! Scalar abstraction so the numerical core works for any IEEE float width.
//!
//! All solver math is written against [`Scalar`]; `f64` is the default used
//! by the generators, file formats and the CLI (see the aliases at the crate
//! root). Tolerances are associated constants because a sensible threshold
//! depends on the float width: a 1e-12 row-sum check is meaningless in `f32`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Display + LowerExp + Debug + Default + Send + Sync + 'static
{
    /// Allowed deviation of a transition (or stochastic-policy) row sum from 1.
    const ROW_SUM_TOLERANCE: Self;
    /// Absolute tolerance for value-vector equality comparisons.
    const VALUE_TOLERANCE: Self;
    /// An action must beat the current value by more than this to count as a
    /// strict improvement; guards policy iteration against tie flapping.
    const IMPROVEMENT_TOLERANCE: Self;
    /// Pivot magnitude below which Gaussian elimination reports a singular system.
    const SOLVE_PIVOT_TOLERANCE: Self;
    /// Pivot / reduced-cost threshold for the simplex tableau.
    const LP_PIVOT_TOLERANCE: Self;
    /// Constraint violation allowed in a solution the simplex reports optimal.
    const LP_FEASIBILITY_TOLERANCE: Self;
    /// Residual threshold that lets modified policy iteration declare its
    /// approximate value estimate converged.
    const MPI_RESIDUAL_TOLERANCE: Self;

    /// Conversion from an `f64` literal; exact for `f64`, rounded for `f32`.
    fn real(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any Scalar")
    }
}

impl Scalar for f64 {
    const ROW_SUM_TOLERANCE: Self = 1e-12;
    const VALUE_TOLERANCE: Self = 1e-9;
    const IMPROVEMENT_TOLERANCE: Self = 1e-9;
    const SOLVE_PIVOT_TOLERANCE: Self = 1e-12;
    const LP_PIVOT_TOLERANCE: Self = 1e-9;
    const LP_FEASIBILITY_TOLERANCE: Self = 1e-7;
    const MPI_RESIDUAL_TOLERANCE: Self = 1e-10;
}

impl Scalar for f32 {
    const ROW_SUM_TOLERANCE: Self = 1e-5;
    const VALUE_TOLERANCE: Self = 1e-4;
    const IMPROVEMENT_TOLERANCE: Self = 1e-4;
    const SOLVE_PIVOT_TOLERANCE: Self = 1e-6;
    const LP_PIVOT_TOLERANCE: Self = 1e-5;
    const LP_FEASIBILITY_TOLERANCE: Self = 1e-3;
    const MPI_RESIDUAL_TOLERANCE: Self = 1e-4;
}
