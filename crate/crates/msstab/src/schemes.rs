//! Catalog of the six stochastic linear two-step Maruyama methods and the
//! maps from test-equation parameters to the reduced recurrence
//! coefficients (scalar case) and matrices (system case).
//!
//! Catalog entries are stored as exact integer rationals so a value like
//! 5/12 is converted to floating point exactly once, at use.

use crate::error::{Error, Result};
use crate::linalg::{lu_inverse, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Condition-number guard for the resolvent `alpha0*I - h*beta0*F`.
pub const RESOLVENT_COND_LIMIT: f64 = 1e12;

/// Largest supported system dimension (stability matrices up to 256x256).
pub const MAX_SYSTEM_DIM: usize = 8;

/// Exact rational scheme coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub const fn new(num: i64, den: i64) -> Self {
        Ratio { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

const fn r(num: i64, den: i64) -> Ratio {
    Ratio::new(num, den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Ab2,
    Ab2i,
    Am2,
    Am2i,
    Bdf2,
    Bdf2i,
}

impl SchemeName {
    pub const ALL: [SchemeName; 6] = [
        SchemeName::Ab2,
        SchemeName::Ab2i,
        SchemeName::Am2,
        SchemeName::Am2i,
        SchemeName::Bdf2,
        SchemeName::Bdf2i,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            SchemeName::Ab2 => "ab2",
            SchemeName::Ab2i => "ab2i",
            SchemeName::Am2 => "am2",
            SchemeName::Am2i => "am2i",
            SchemeName::Bdf2 => "bdf2",
            SchemeName::Bdf2i => "bdf2i",
        }
    }
}

impl std::fmt::Display for SchemeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.token())
    }
}

impl std::str::FromStr for SchemeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ab2" => Ok(SchemeName::Ab2),
            "ab2i" => Ok(SchemeName::Ab2i),
            "am2" => Ok(SchemeName::Am2),
            "am2i" => Ok(SchemeName::Am2i),
            "bdf2" => Ok(SchemeName::Bdf2),
            "bdf2i" => Ok(SchemeName::Bdf2i),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// One two-step method's coefficients, normalized to `alpha0 = gamma1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeSpec {
    pub name: SchemeName,
    pub alpha: [Ratio; 3],
    pub beta: [Ratio; 3],
    pub gamma: [Ratio; 2],
    pub eta: Option<[Ratio; 2]>,
}

impl SchemeSpec {
    pub fn improved(&self) -> bool {
        self.eta.is_some()
    }
}

const AB2: SchemeSpec = SchemeSpec {
    name: SchemeName::Ab2,
    alpha: [r(1, 1), r(-1, 1), r(0, 1)],
    beta: [r(0, 1), r(3, 2), r(-1, 2)],
    gamma: [r(1, 1), r(0, 1)],
    eta: None,
};

const AB2I: SchemeSpec = SchemeSpec {
    name: SchemeName::Ab2i,
    eta: Some([r(0, 1), r(-1, 2)]),
    ..AB2
};

const AM2: SchemeSpec = SchemeSpec {
    name: SchemeName::Am2,
    alpha: [r(1, 1), r(-1, 1), r(0, 1)],
    beta: [r(5, 12), r(8, 12), r(-1, 12)],
    gamma: [r(1, 1), r(0, 1)],
    eta: None,
};

const AM2I: SchemeSpec = SchemeSpec {
    name: SchemeName::Am2i,
    eta: Some([r(-5, 12), r(-1, 12)]),
    ..AM2
};

const BDF2: SchemeSpec = SchemeSpec {
    name: SchemeName::Bdf2,
    alpha: [r(1, 1), r(-4, 3), r(1, 3)],
    beta: [r(2, 3), r(0, 1), r(0, 1)],
    gamma: [r(1, 1), r(-1, 3)],
    eta: None,
};

const BDF2I: SchemeSpec = SchemeSpec {
    name: SchemeName::Bdf2i,
    eta: Some([r(-2, 3), r(1, 3)]),
    ..BDF2
};

/// Catalog lookup; the six entries are the method table rows, bit-exact.
pub fn catalog(name: SchemeName) -> &'static SchemeSpec {
    match name {
        SchemeName::Ab2 => &AB2,
        SchemeName::Ab2i => &AB2I,
        SchemeName::Am2 => &AM2,
        SchemeName::Am2i => &AM2I,
        SchemeName::Bdf2 => &BDF2,
        SchemeName::Bdf2i => &BDF2I,
    }
}

/// Scalar linear test equation `dX = lambda X dt + mu X dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTestEq {
    pub lambda: Complex64,
    pub mu: Complex64,
}

impl ScalarTestEq {
    pub fn new(lambda: Complex64, mu: Complex64) -> Self {
        ScalarTestEq { lambda, mu }
    }

    pub fn real(lambda: f64, mu: f64) -> Self {
        ScalarTestEq {
            lambda: lambda.into(),
            mu: mu.into(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.lambda.im == 0.0 && self.mu.im == 0.0
    }
}

/// Coefficients of the reduced scalar recurrence
/// `X_i = a X_{i-1} + c X_{i-2} + b X_{i-1} xi_{i-1} + d X_{i-2} xi_{i-2}`.
/// For improved schemes `b` and `d` hold the starred values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    /// `h * lambda`
    pub x: Complex64,
    /// `mu * sqrt(h)`
    pub y: Complex64,
}

impl ReducedCoeffs {
    pub fn from_abcd(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        ReducedCoeffs {
            a,
            b,
            c,
            d,
            x: Complex64::new(0.0, 0.0),
            y: Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Maps `(lambda, mu, h)` to the reduced recurrence coefficients
/// `a = (-alpha1 + beta1 x)/(1 - beta0 x)` etc., with the improved schemes'
/// `b* = b + (1 + eta1) x y / (1 - beta0 x)` and
/// `d* = d + (gamma2 + eta2) x y / (1 - beta0 x)` replacing `b`, `d`.
pub fn reduce_scalar(spec: &SchemeSpec, eq: &ScalarTestEq, h: f64) -> Result<ReducedCoeffs> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive, got {h}"
        )));
    }
    let x = eq.lambda * h;
    let y = eq.mu * h.sqrt();
    let alpha0 = spec.alpha[0].as_f64();
    let denom = alpha0 - spec.beta[0].as_f64() * x;
    if denom.norm() <= 1e-14 {
        return Err(Error::SingularDenominator {
            magnitude: denom.norm(),
        });
    }
    let a = (-spec.alpha[1].as_f64() + spec.beta[1].as_f64() * x) / denom;
    let c = (-spec.alpha[2].as_f64() + spec.beta[2].as_f64() * x) / denom;
    let gamma1 = spec.gamma[0].as_f64();
    let gamma2 = spec.gamma[1].as_f64();
    let mut b = gamma1 * y / denom;
    let mut d = gamma2 * y / denom;
    if let Some(eta) = spec.eta {
        b += (gamma1 + eta[0].as_f64()) * x * y / denom;
        d += (gamma2 + eta[1].as_f64()) * x * y / denom;
    }
    Ok(ReducedCoeffs { a, b, c, d, x, y })
}

/// System of linear test equations `dX = F X dt + sum_r G_r X dW_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTestEq {
    drift: Mat,
    diffusion: Vec<Mat>,
}

impl SystemTestEq {
    pub fn new(drift: Mat, diffusion: Vec<Mat>) -> Result<Self> {
        let d = drift.n_rows();
        if !drift.is_square() {
            return Err(Error::DimensionMismatch {
                context: "drift matrix must be square".into(),
            });
        }
        if d == 0 || d > MAX_SYSTEM_DIM {
            return Err(Error::InvalidConfig(format!(
                "system dimension {d} outside supported range 1..={MAX_SYSTEM_DIM}"
            )));
        }
        if diffusion.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one diffusion matrix required".into(),
            ));
        }
        for g in &diffusion {
            if g.n_rows() != d || g.n_cols() != d {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "diffusion matrix is {}x{}, drift is {d}x{d}",
                        g.n_rows(),
                        g.n_cols()
                    ),
                });
            }
        }
        Ok(SystemTestEq { drift, diffusion })
    }

    pub fn dim(&self) -> usize {
        self.drift.n_rows()
    }

    pub fn noise_count(&self) -> usize {
        self.diffusion.len()
    }

    pub fn drift(&self) -> &Mat {
        &self.drift
    }

    pub fn diffusion(&self) -> &[Mat] {
        &self.diffusion
    }
}

/// JSON wire format for [`SystemTestEq`]: `{"F": [[...]], "G": [[[...]], ...]}`.
#[derive(Serialize, Deserialize)]
struct SystemTestEqWire {
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    g: Vec<Vec<Vec<f64>>>,
}

impl SystemTestEq {
    pub fn from_json(json: &str) -> Result<Self> {
        let wire: SystemTestEqWire = serde_json::from_str(json)
            .map_err(|e| Error::InvalidConfig(format!("bad system JSON: {e}")))?;
        let drift = Mat::from_rows(&wire.f)?;
        let diffusion = wire
            .g
            .iter()
            .map(|g| Mat::from_rows(g))
            .collect::<Result<Vec<_>>>()?;
        SystemTestEq::new(drift, diffusion)
    }

    pub fn to_json(&self) -> String {
        let f: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.drift[(i, j)]).collect())
            .collect();
        let g: Vec<Vec<Vec<f64>>> = self
            .diffusion
            .iter()
            .map(|m| {
                (0..self.dim())
                    .map(|i| (0..self.dim()).map(|j| m[(i, j)]).collect())
                    .collect()
            })
            .collect();
        serde_json::to_string(&SystemTestEqWire { f, g }).expect("serializing plain floats")
    }
}

/// Matrices of the reduced system recurrence
/// `X_i = A X_{i-1} + C X_{i-2} + sum_r B_r X_{i-1} xi_{r,i-1} + sum_r D_r X_{i-2} xi_{r,i-2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Mat,
    pub c: Mat,
    pub b: Vec<Mat>,
    pub d: Vec<Mat>,
    pub improved: bool,
}

impl SystemMatrices {
    pub fn dim(&self) -> usize {
        self.a.n_rows()
    }

    pub fn noise_count(&self) -> usize {
        self.b.len()
    }
}

/// Maps `(F, {G_r}, h)` to the system recurrence matrices through the
/// resolvent `(alpha0 I - h beta0 F)^-1`, with the improved schemes adding
/// `h^(3/2) (gamma_j + eta_j) F G_r` inside the noise terms.
pub fn reduce_system(spec: &SchemeSpec, eq: &SystemTestEq, h: f64) -> Result<SystemMatrices> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive, got {h}"
        )));
    }
    let d = eq.dim();
    let eye = Mat::identity(d);
    let f = eq.drift();
    let resolvent = eye
        .scaled(spec.alpha[0].as_f64())
        .sub(&f.scaled(h * spec.beta[0].as_f64()));
    let (inv, cond) = lu_inverse(&resolvent)?;
    if cond > RESOLVENT_COND_LIMIT {
        return Err(Error::SingularResolvent { cond });
    }

    let a = inv.matmul(
        &eye.scaled(-spec.alpha[1].as_f64())
            .add(&f.scaled(h * spec.beta[1].as_f64())),
    );
    let c = inv.matmul(
        &eye.scaled(-spec.alpha[2].as_f64())
            .add(&f.scaled(h * spec.beta[2].as_f64())),
    );

    let sqrt_h = h.sqrt();
    let h32 = h * sqrt_h;
    let gamma1 = spec.gamma[0].as_f64();
    let gamma2 = spec.gamma[1].as_f64();
    let mut b = Vec::with_capacity(eq.noise_count());
    let mut dd = Vec::with_capacity(eq.noise_count());
    for g in eq.diffusion() {
        let mut br = inv.matmul(&g.scaled(sqrt_h * gamma1));
        let mut dr = inv.matmul(&g.scaled(sqrt_h * gamma2));
        if let Some(eta) = spec.eta {
            let fg = f.matmul(g);
            br = br.add(&inv.matmul(&fg.scaled(h32 * (gamma1 + eta[0].as_f64()))));
            dr = dr.add(&inv.matmul(&fg.scaled(h32 * (gamma2 + eta[1].as_f64()))));
        }
        b.push(br);
        dd.push(dr);
    }
    Ok(SystemMatrices {
        a,
        c,
        b,
        d: dd,
        improved: spec.improved(),
    })
}
