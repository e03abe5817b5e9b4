//! Root-location machinery for the degree-4 characteristic polynomial of the
//! mean-square stability matrix: Schur coefficients, the Schur-Cohn and Jury
//! criteria, determinant minors, and a Durand-Kerner root oracle.
//!
//! All criteria decide whether every root of
//! `P(z) = z^4 + p1 z^3 + p2 z^2 + p3 z + p4`
//! lies strictly inside the unit disk. They are algebraically equivalent;
//! the redundant routes exist so each can cross-check the others.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Half-width of the band around a criterion boundary (or around spectral
/// radius 1) inside which verdicts report `Marginal` instead of flapping.
pub const MARGIN_TOL: f64 = 1e-9;

/// Floor below which a denominator of the Schur coefficient recursion is
/// treated as degenerate.
pub const DENOM_FLOOR: f64 = 1e-14;

/// Iteration cap for the Durand-Kerner root finder.
pub const ROOT_ITERATION_CAP: usize = 500;

/// Coefficients of the monic quartic `z^4 + p1 z^3 + p2 z^2 + p3 z + p4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticCoeffs {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl QuarticCoeffs {
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Self {
        QuarticCoeffs { p1, p2, p3, p4 }
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite() && self.p3.is_finite() && self.p4.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.p1
            .abs()
            .max(self.p2.abs())
            .max(self.p3.abs())
            .max(self.p4.abs())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (((z + self.p1) * z + self.p2) * z + self.p3) * z + self.p4
    }
}

/// Schur (reflection) coefficients of the pair `(P, P^#)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurCoefficients {
    pub nu0: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
}

impl SchurCoefficients {
    pub fn all_inside_unit(&self) -> bool {
        self.nu0.abs() < 1.0 && self.nu1.abs() < 1.0 && self.nu2.abs() < 1.0 && self.nu3.abs() < 1.0
    }
}

/// Roots of a quartic together with the worst residual `max |P(root)|`.
#[derive(Debug, Clone, Copy)]
pub struct RootSet {
    pub roots: [Complex64; 4],
    pub residual: f64,
}

impl RootSet {
    pub fn spectral_radius(&self) -> f64 {
        self.roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityStatus {
    Stable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for StabilityStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StabilityStatus::Stable => write!(f, "stable"),
            StabilityStatus::Unstable => write!(f, "unstable"),
            StabilityStatus::Marginal => write!(f, "marginal"),
        }
    }
}

/// Outcome of a stability test. `witness` is the governing scalar: the
/// smallest criterion margin (right side minus left side) for closed-form
/// criteria, or the spectral radius for radius-based verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub witness: f64,
    pub failed_condition: Option<usize>,
}

impl StabilityVerdict {
    /// Builds a verdict from criterion margins; a positive margin means the
    /// corresponding strict inequality holds.
    pub fn from_margins(margins: &[f64], tol: f64) -> Self {
        for (i, &m) in margins.iter().enumerate() {
            if m < -tol {
                return StabilityVerdict {
                    status: StabilityStatus::Unstable,
                    witness: m,
                    failed_condition: Some(i + 1),
                };
            }
        }
        let min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= tol {
            StabilityVerdict {
                status: StabilityStatus::Marginal,
                witness: min,
                failed_condition: None,
            }
        } else {
            StabilityVerdict {
                status: StabilityStatus::Stable,
                witness: min,
                failed_condition: None,
            }
        }
    }

    /// Like [`StabilityVerdict::from_margins`], but margins at index
    /// `inclusive_from` onward come from non-strict (>=) conditions, where
    /// equality passes.
    pub fn from_margins_mixed(margins: &[f64], inclusive_from: usize, tol: f64) -> Self {
        for (i, &m) in margins.iter().enumerate() {
            if m < -tol {
                return StabilityVerdict {
                    status: StabilityStatus::Unstable,
                    witness: m,
                    failed_condition: Some(i + 1),
                };
            }
        }
        let marginal = margins.iter().enumerate().any(|(i, &m)| {
            if i < inclusive_from {
                m <= tol
            } else {
                m < 0.0
            }
        });
        let min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        let status = if marginal {
            StabilityStatus::Marginal
        } else {
            StabilityStatus::Stable
        };
        StabilityVerdict {
            status,
            witness: min,
            failed_condition: None,
        }
    }

    pub fn from_radius(rho: f64, tol: f64) -> Self {
        let status = if (rho - 1.0).abs() <= tol {
            StabilityStatus::Marginal
        } else if rho < 1.0 {
            StabilityStatus::Stable
        } else {
            StabilityStatus::Unstable
        };
        StabilityVerdict {
            status,
            witness: rho,
            failed_condition: None,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.status == StabilityStatus::Stable
    }
}

/// Closed-form Schur coefficients of `(P, P^#)`:
/// `nu0 = p4`, `nu1 = (p3 - p4 p1) / (1 - p4^2)`, and the nested quotients
/// for `nu2`, `nu3`. Fails with `DegenerateDenominator(k)` when the k-th
/// denominator underflows [`DENOM_FLOOR`].
pub fn schur_coefficients(p: &QuarticCoeffs) -> Result<SchurCoefficients> {
    let (p1, p2, p3, p4) = (p.p1, p.p2, p.p3, p.p4);
    let nu0 = p4;

    let d1 = 1.0 - p4 * p4;
    if d1.abs() < DENOM_FLOOR {
        return Err(Error::DegenerateDenominator { index: 1 });
    }
    let v = p3 - p4 * p1; // p3 - p4 p1
    let w = p1 - p4 * p3; // p1 - p4 p3
    let q = p2 - p4 * p2; // p2 (1 - p4)
    let nu1 = v / d1;

    let d2 = d1 * d1 - v * v;
    if d2.abs() < DENOM_FLOOR {
        return Err(Error::DegenerateDenominator { index: 2 });
    }
    let nu2 = (d1 * q - v * w) / d2;

    let num3 = w - v * q / d1 - nu2 * (w - v * q / d1);
    let d3 = d1 - v * v / d1 - nu2 * (q - v * w / d1);
    if d3.abs() < DENOM_FLOOR {
        return Err(Error::DegenerateDenominator { index: 3 });
    }
    let nu3 = num3 / d3;

    Ok(SchurCoefficients { nu0, nu1, nu2, nu3 })
}

/// Schur coefficients through the generic `(P_k, Q_k)` polynomial recursion
/// `P_k = (P_{k-1} - nu_{k-1} Q_{k-1}) / z`, `Q_k = Q_{k-1} - nu_{k-1} P_{k-1}`.
/// Independent route used to cross-check the closed forms, which suffer
/// cancellation near `|p4| -> 1`.
pub fn schur_coefficients_recursive(p: &QuarticCoeffs) -> Result<SchurCoefficients> {
    // Ascending coefficient order: index 0 is the constant term.
    let mut pk = vec![p.p4, p.p3, p.p2, p.p1, 1.0];
    let mut qk = vec![1.0, p.p1, p.p2, p.p3, p.p4];
    let mut nus = [0.0; 4];
    for (k, nu_k) in nus.iter_mut().enumerate() {
        if k > 0 && qk[0].abs() < DENOM_FLOOR {
            return Err(Error::DegenerateDenominator { index: k });
        }
        let nu = pk[0] / qk[0];
        *nu_k = nu;
        let next_p: Vec<f64> = pk
            .iter()
            .zip(&qk)
            .map(|(a, b)| a - nu * b)
            .skip(1)
            .collect();
        let next_q: Vec<f64> = qk
            .iter()
            .zip(&pk)
            .map(|(a, b)| a - nu * b)
            .take(next_p.len())
            .collect();
        pk = next_p;
        qk = next_q;
    }
    Ok(SchurCoefficients {
        nu0: nus[0],
        nu1: nus[1],
        nu2: nus[2],
        nu3: nus[3],
    })
}

/// Margins of the four (SC) inequalities; all positive iff every root of `P`
/// lies strictly inside the unit disk.
pub fn schur_cohn_margins(p: &QuarticCoeffs) -> [f64; 4] {
    let (p1, p2, p3, p4) = (p.p1, p.p2, p.p3, p.p4);
    let u = 1.0 - p4 * p4;
    let v = p3 - p4 * p1;
    let w = p1 - p4 * p3;
    let q = p2 - p4 * p2;
    [
        1.0 - p4,
        u - v.abs(),
        (u * u - v * v) - (u * q - v * w).abs(),
        (u * (1.0 + p2 + p4) - (p1 + p3) * v) - ((1.0 + p4) * w - p2 * v).abs(),
    ]
}

/// Full Schur-Cohn criterion (SC): four inequalities on `p1..p4`.
pub fn schur_cohn_general(p: &QuarticCoeffs) -> StabilityVerdict {
    StabilityVerdict::from_margins(&schur_cohn_margins(p), MARGIN_TOL)
}

/// Margins of the three simplified (SCJ) inequalities.
pub fn schur_cohn_jury_margins(p: &QuarticCoeffs) -> [f64; 3] {
    let (p1, p2, p3, p4) = (p.p1, p.p2, p.p3, p.p4);
    let u = 1.0 - p4 * p4;
    let v = p3 - p4 * p1;
    let w = p1 - p4 * p3;
    [
        1.0 - p4,
        (1.0 + p2 + p4) - (p1 + p3).abs(),
        (u * u - v * v) - (p2 * (1.0 - p4) * u - v * w).abs(),
    ]
}

/// Margin of the Elaydi restatement of the third (SCJ) condition. Equivalent
/// to the Jury form only where the first two (SCJ) conditions hold.
pub fn elaydi_third_margin(p: &QuarticCoeffs) -> f64 {
    let (p1, p2, p3, p4) = (p.p1, p.p2, p.p3, p.p4);
    let lhs = (p2 * (1.0 - p4) + p4 * (1.0 - p4 * p4) + p1 * (p4 * p1 - p3)).abs();
    let rhs = p2 * p4 * (1.0 - p4) + 1.0 - p4 * p4 + p3 * (p1 * p4 - p3);
    rhs - lhs
}

/// Simplified Jury criterion (SCJ). When the first two conditions hold, the
/// third is also evaluated in the Elaydi form and the two must agree; a
/// disagreement beyond tolerance is a conditioning failure, not a verdict.
pub fn schur_cohn_jury(p: &QuarticCoeffs) -> Result<StabilityVerdict> {
    let margins = schur_cohn_jury_margins(p);
    if margins[0] > MARGIN_TOL && margins[1] > MARGIN_TOL {
        let alt = elaydi_third_margin(p);
        let jury = margins[2];
        if jury.abs() > 1e-12 && alt.abs() > 1e-12 && (jury > 0.0) != (alt > 0.0) {
            return Err(Error::CriterionDisagreement { jury, elaydi: alt });
        }
    }
    Ok(StabilityVerdict::from_margins(&margins, MARGIN_TOL))
}

/// Leading principal minors `det Delta_k`, k = 1..4, of the Schur-Cohn matrix
/// `Delta_4(P, P^#) = X X^T - Y Y^T` with `X`, `Y` the lower-triangular
/// Toeplitz matrices of `(1, p1, p2, p3)` and `(p4, p3, p2, p1)`. All four
/// positive iff `P` is Schur stable. Determinants by cofactor expansion.
pub fn schur_cohn_determinants(p: &QuarticCoeffs) -> [f64; 4] {
    let (p1, p2, p3, p4) = (p.p1, p.p2, p.p3, p.p4);
    let x = [
        [1.0, 0.0, 0.0, 0.0],
        [p1, 1.0, 0.0, 0.0],
        [p2, p1, 1.0, 0.0],
        [p3, p2, p1, 1.0],
    ];
    let y = [
        [p4, 0.0, 0.0, 0.0],
        [p3, p4, 0.0, 0.0],
        [p2, p3, p4, 0.0],
        [p1, p2, p3, p4],
    ];
    let mut delta = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += x[i][k] * x[j][k] - y[i][k] * y[j][k];
            }
            delta[i][j] = s;
        }
    }

    let d = &delta;
    let det1 = d[0][0];
    let det2 = d[0][0] * d[1][1] - d[0][1] * d[1][0];
    let det3 = d[0][0] * (d[1][1] * d[2][2] - d[1][2] * d[2][1])
        - d[0][1] * (d[1][0] * d[2][2] - d[1][2] * d[2][0])
        + d[0][2] * (d[1][0] * d[2][1] - d[1][1] * d[2][0]);
    let minor3 = |r: [usize; 3], c: [usize; 3]| {
        d[r[0]][c[0]] * (d[r[1]][c[1]] * d[r[2]][c[2]] - d[r[1]][c[2]] * d[r[2]][c[1]])
            - d[r[0]][c[1]] * (d[r[1]][c[0]] * d[r[2]][c[2]] - d[r[1]][c[2]] * d[r[2]][c[0]])
            + d[r[0]][c[2]] * (d[r[1]][c[0]] * d[r[2]][c[1]] - d[r[1]][c[1]] * d[r[2]][c[0]])
    };
    let det4 = d[0][0] * minor3([1, 2, 3], [1, 2, 3]) - d[0][1] * minor3([1, 2, 3], [0, 2, 3])
        + d[0][2] * minor3([1, 2, 3], [0, 1, 3])
        - d[0][3] * minor3([1, 2, 3], [0, 1, 2]);
    [det1, det2, det3, det4]
}

/// All four roots of the quartic by Durand-Kerner simultaneous iteration.
/// Starting guesses sit on a circle of radius `max(1, max|p_i|)^(1/4)`
/// rotated off the real axis. Converged when the worst residual drops below
/// `1e-10 * max(1, max|p_i|)`.
pub fn quartic_roots(p: &QuarticCoeffs) -> Result<RootSet> {
    quartic_roots_from_phase(p, 0.4)
}

fn quartic_roots_from_phase(p: &QuarticCoeffs, phase: f64) -> Result<RootSet> {
    let tol = 1e-10 * p.max_abs().max(1.0);
    // |P(z)| cannot be driven below the f64 evaluation noise near a root;
    // for large roots that floor exceeds the absolute tolerance.
    let noise_floor = |z: Complex64| {
        let m = z.norm();
        8.0 * f64::EPSILON
            * ((((m + p.p1.abs()) * m + p.p2.abs()) * m + p.p3.abs()) * m + p.p4.abs())
    };
    let radius = p.max_abs().max(1.0).powf(0.25);
    let mut z: [Complex64; 4] = std::array::from_fn(|k| {
        Complex64::from_polar(radius, phase + std::f64::consts::FRAC_PI_2 * k as f64)
    });

    for _ in 0..ROOT_ITERATION_CAP {
        let residual = z.iter().map(|&zi| p.eval(zi).norm()).fold(0.0, f64::max);
        if residual <= tol || z.iter().all(|&zi| p.eval(zi).norm() <= noise_floor(zi)) {
            return Ok(RootSet { roots: z, residual });
        }
        for i in 0..4 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // Coincident iterates: nudge apart and retry next sweep.
                z[i] += Complex64::new(1e-8 * (1.0 + radius), 1e-8);
                continue;
            }
            z[i] -= p.eval(z[i]) / denom;
        }
    }
    let residual = z.iter().map(|&zi| p.eval(zi).norm()).fold(0.0, f64::max);
    if residual <= tol || z.iter().all(|&zi| p.eval(zi).norm() <= noise_floor(zi)) {
        Ok(RootSet { roots: z, residual })
    } else {
        Err(Error::NoConvergence {
            iterations: ROOT_ITERATION_CAP,
        })
    }
}

/// Spectral radius of the quartic's root set; retries Durand-Kerner from
/// perturbed starting phases if an attempt stalls.
pub fn quartic_spectral_radius(p: &QuarticCoeffs) -> Result<f64> {
    let mut last = Error::NoConvergence {
        iterations: ROOT_ITERATION_CAP,
    };
    for attempt in 0..4 {
        match quartic_roots_from_phase(p, 0.4 + 0.37 * attempt as f64) {
            Ok(rs) => return Ok(rs.spectral_radius()),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Radius-based verdict through the root oracle.
pub fn root_oracle_verdict(p: &QuarticCoeffs) -> Result<StabilityVerdict> {
    Ok(StabilityVerdict::from_radius(
        quartic_spectral_radius(p)?,
        MARGIN_TOL,
    ))
}
