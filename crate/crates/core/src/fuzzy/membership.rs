use std::fmt;

use super::FuzzyError;

/// Piecewise-linear membership function.
///
/// Degenerate edges are allowed: `a == b` makes a left shoulder and
/// `c == d` (or `b == c` for a triangle) a right shoulder, so
/// `Triangular { a: 0, b: 0, c: 10 }` is 1.0 at x = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        let mf = MembershipFunction::Triangular { a, b, c };
        mf.validate()?;
        Ok(mf)
    }

    pub fn trapezoidal(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        let mf = MembershipFunction::Trapezoidal { a, b, c, d };
        mf.validate()?;
        Ok(mf)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            MembershipFunction::Triangular { a, b, c } => vec![a, b, c],
            MembershipFunction::Trapezoidal { a, b, c, d } => vec![a, b, c, d],
        }
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let pts = self.breakpoints();
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(FuzzyError::InvalidMembership(format!("non-finite breakpoint in {self}")));
        }
        if pts.windows(2).any(|w| w[0] > w[1]) {
            return Err(FuzzyError::InvalidMembership(format!("breakpoints must be nondecreasing in {self}")));
        }
        Ok(())
    }

    /// Support of the function, `[first breakpoint, last breakpoint]`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            MembershipFunction::Triangular { a, c, .. } => (a, c),
            MembershipFunction::Trapezoidal { a, d, .. } => (a, d),
        }
    }

    /// Degree of membership of `x`; 0 outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, c, d) = match *self {
            MembershipFunction::Triangular { a, b, c } => (a, b, b, c),
            MembershipFunction::Trapezoidal { a, b, c, d } => (a, b, c, d),
        };
        if x.is_nan() || x < a || x > d {
            return 0.0;
        }
        let degree = if x < b {
            (x - a) / (b - a)
        } else if x <= c {
            1.0
        } else if d > c {
            (d - x) / (d - c)
        } else {
            1.0
        };
        degree.clamp(0.0, 1.0)
    }
}

/// Free-function form of [`MembershipFunction::eval`].
pub fn eval_membership(mf: &MembershipFunction, x: f64) -> f64 {
    mf.eval(x)
}

impl fmt::Display for MembershipFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MembershipFunction::Triangular { a, b, c } => write!(f, "tri({a}, {b}, {c})"),
            MembershipFunction::Trapezoidal { a, b, c, d } => write!(f, "trap({a}, {b}, {c}, {d})"),
        }
    }
}
