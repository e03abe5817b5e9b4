//! Scalar-case mean-square stability analysis: the 4x4 stability matrix, its
//! characteristic quartic, the necessary-and-sufficient stability
//! conditions, the specialized conditions for Adams-Bashforth/Moulton
//! (d = 0) and hereditary (b = 0) recurrences, closed-form stability regions
//! and conditional step-size bounds for AB2 and AM2, and the classifier that
//! ties them together.

use crate::error::{Error, Result};
use crate::polystab::{self, QuarticCoeffs, StabilityStatus, StabilityVerdict, MARGIN_TOL};
use crate::schemes::{catalog, reduce_scalar, ReducedCoeffs, ScalarTestEq, SchemeName};
use num_complex::Complex64;
use rayon::prelude::*;

/// The 4x4 mean-square stability matrix of the reduced scalar recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMatrixScalar {
    pub entries: [[Complex64; 4]; 4],
}

impl StabilityMatrixScalar {
    /// Numeric characteristic polynomial det(zI - S) by evaluation at five
    /// points and polynomial interpolation. Test oracle for the closed-form
    /// coefficient formulas; exposed for the cross-validation path.
    pub fn charpoly_interpolated(&self) -> [Complex64; 5] {
        let nodes: [Complex64; 5] = std::array::from_fn(|k| {
            Complex64::from_polar(2.0, 0.3 + std::f64::consts::TAU * k as f64 / 5.0)
        });
        let values: Vec<Complex64> = nodes.iter().map(|&z| self.char_det(z)).collect();
        // Lagrange interpolation, collecting monomial coefficients.
        let mut coeffs = [Complex64::new(0.0, 0.0); 5];
        for (i, &zi) in nodes.iter().enumerate() {
            // basis polynomial prod_{j!=i} (z - z_j) / (z_i - z_j)
            let mut basis = vec![Complex64::new(1.0, 0.0)];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in nodes.iter().enumerate() {
                if i == j {
                    continue;
                }
                denom *= zi - zj;
                let mut next = vec![Complex64::new(0.0, 0.0); basis.len() + 1];
                for (k, &b) in basis.iter().enumerate() {
                    next[k] -= b * zj;
                    next[k + 1] += b;
                }
                basis = next;
            }
            let w = values[i] / denom;
            for (k, &b) in basis.iter().enumerate() {
                coeffs[k] += w * b;
            }
        }
        coeffs // ascending: coeffs[4] z^4 + ... + coeffs[0]
    }

    #[allow(clippy::needless_range_loop)] // skip-one minor extraction
    fn char_det(&self, z: Complex64) -> Complex64 {
        // det(zI - S) of the 4x4 by cofactor expansion over the first column.
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, (mrow, srow)) in m.iter_mut().zip(&self.entries).enumerate() {
            for (j, (mv, &sv)) in mrow.iter_mut().zip(srow).enumerate() {
                *mv = if i == j { z - sv } else { -sv };
            }
        }
        let det3 = |a: [[Complex64; 3]; 3]| {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        };
        let minor = |skip_row: usize, skip_col: usize| {
            let mut sub = [[Complex64::new(0.0, 0.0); 3]; 3];
            let mut r = 0;
            for i in 0..4 {
                if i == skip_row {
                    continue;
                }
                let mut c = 0;
                for j in 0..4 {
                    if j == skip_col {
                        continue;
                    }
                    sub[r][c] = m[i][j];
                    c += 1;
                }
                r += 1;
            }
            det3(sub)
        };
        m[0][0] * minor(0, 0) - m[1][0] * minor(1, 0) + m[2][0] * minor(2, 0)
            - m[3][0] * minor(3, 0)
    }
}

/// Entrywise construction of the scalar stability matrix.
pub fn build_stability_matrix(rc: &ReducedCoeffs) -> StabilityMatrixScalar {
    let (a, b, c, d) = (rc.a, rc.b, rc.c, rc.d);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let entries = [
        [
            Complex64::from(a.norm_sqr() + b.norm_sqr()),
            a.conj() * c,
            a * c.conj(),
            Complex64::from(c.norm_sqr() + d.norm_sqr())
                + a * b * d.conj()
                + a.conj() * b.conj() * d,
        ],
        [a.conj(), zero, c.conj(), b * d.conj()],
        [a, c, zero, b.conj() * d],
        [one, zero, zero, zero],
    ];
    StabilityMatrixScalar { entries }
}

/// Real coefficients of the characteristic quartic of the stability matrix.
pub fn quartic_coeffs(rc: &ReducedCoeffs) -> QuarticCoeffs {
    let (a, b, c, d) = (rc.a, rc.b, rc.c, rc.d);
    let (a2, b2, c2, d2) = (a.norm_sqr(), b.norm_sqr(), c.norm_sqr(), d.norm_sqr());
    let p1 = -a2 - b2;
    let p2 = -2.0 * c2 - d2 - 2.0 * (a * b * d.conj()).re - 2.0 * (a * a * c.conj()).re;
    let p3 = -2.0 * (a.conj() * b * c * d.conj()).re - a2 * c2 + b2 * c2;
    let p4 = c2 * c2 + c2 * d2;
    QuarticCoeffs::new(p1, p2, p3, p4)
}

/// An algebraically identical regrouping of `p3`; kept separate from
/// [`quartic_coeffs`] so tests can check the identity.
pub fn p3_proof_form(rc: &ReducedCoeffs) -> f64 {
    let (a, b, c, d) = (rc.a, rc.b, rc.c, rc.d);
    -2.0 * (a.conj() * b * c * d.conj()).re + c.norm_sqr() * (b.norm_sqr() - a.norm_sqr())
}

/// Margins of the three necessary-and-sufficient conditions; all positive
/// iff the reduced recurrence is asymptotically mean-square stable.
pub fn theorem_margins(rc: &ReducedCoeffs) -> [f64; 3] {
    let (a, b, c, d) = (rc.a, rc.b, rc.c, rc.d);
    let (a2, b2, c2, d2) = (a.norm_sqr(), b.norm_sqr(), c.norm_sqr(), d.norm_sqr());

    let m1 = 1.0 - c2 * (c2 + d2);

    let lhs2 = a2 * (1.0 + c2) + b2 * (1.0 - c2) + 2.0 * (a.conj() * b * c * d.conj()).re;
    let rhs2 = (1.0 - c2) * (1.0 - c2)
        - (1.0 - c2) * d2
        - 2.0 * (a * b * d.conj()).re
        - 2.0 * (a * a * c.conj()).re;
    let m2 = rhs2 - lhs2;

    // Third condition; its factors are the quartic coefficients in disguise.
    let p = quartic_coeffs(rc);
    let (p1, p2, p3, p4) = (p.p1, p.p2, p.p3, p.p4);
    let lhs3 = (p2 * (1.0 - p4) * (1.0 - p4 * p4) - (p3 - p4 * p1) * (p1 - p4 * p3)).abs();
    let rhs3 = (1.0 - p4 * p4) * (1.0 - p4 * p4) - (p3 - p4 * p1) * (p3 - p4 * p1);
    let m3 = rhs3 - lhs3;

    [m1, m2, m3]
}

/// Necessary-and-sufficient stability test for the reduced recurrence. For
/// improved schemes the starred coefficients must already sit in `b`, `d`
/// (which is what [`reduce_scalar`] produces).
pub fn theorem_conditions(rc: &ReducedCoeffs) -> StabilityVerdict {
    StabilityVerdict::from_margins(&theorem_margins(rc), MARGIN_TOL)
}

/// The theorem's sufficient set: second condition plus `|c|^2 + |d|^2 < 1`
/// and the two sign conditions. Implies the full three-condition test.
pub fn sufficient_conditions(rc: &ReducedCoeffs) -> bool {
    let (a, b, c, d) = (rc.a, rc.b, rc.c, rc.d);
    let (a2, c2, d2) = (a.norm_sqr(), c.norm_sqr(), d.norm_sqr());
    let m = theorem_margins(rc);
    m[1] > 0.0
        && c2 + d2 < 1.0
        && (a * b * d.conj()).re + (a.conj() * b * c * d.conj()).re >= 0.0
        && (a * a * c.conj()).re >= -a2 * c2
}

/// Stability conditions specialized to `d = 0` (Adams-Bashforth / Adams-
/// Moulton shape). Applies the proposition's clauses literally; condition
/// indices are 1 (the two inequalities of the first display), 2 (the noise
/// bound) and 3 (the sign clause).
pub fn abam_conditions(rc: &ReducedCoeffs) -> Result<StabilityVerdict> {
    if rc.d != Complex64::new(0.0, 0.0) {
        return Err(Error::NotApplicable("abam_conditions requires d = 0"));
    }
    let (a, b, c) = (rc.a, rc.b, rc.c);
    let (a2, b2, c2) = (a.norm_sqr(), b.norm_sqr(), c.norm_sqr());
    let re_a2c = (a * a * c.conj()).re;

    let m1 = (1.0 - c.norm()).min((1.0 - c2) * (1.0 - c2) - (a2 * (1.0 + c2) + 2.0 * re_a2c));
    let m2 = if 1.0 - c2 > 1e-14 {
        1.0 - c2 - a2 * (1.0 + c2) / (1.0 - c2) - 2.0 * re_a2c / (1.0 - c2) - b2
    } else {
        -1.0
    };
    let m3 = re_a2c + a2 * c2;
    // the sign clause is non-strict: equality passes
    Ok(StabilityVerdict::from_margins_mixed(
        &[m1, m2, m3],
        2,
        MARGIN_TOL,
    ))
}

/// Stability conditions specialized to `b = 0` (hereditary shape with zero
/// lag). Condition indices: 1 and 2 for the first display's inequalities,
/// 3 for the sign clause.
pub fn hereditary_conditions(rc: &ReducedCoeffs) -> Result<StabilityVerdict> {
    if rc.b != Complex64::new(0.0, 0.0) {
        return Err(Error::NotApplicable("hereditary_conditions requires b = 0"));
    }
    let (a, c, d) = (rc.a, rc.c, rc.d);
    let (a2, c2, d2) = (a.norm_sqr(), c.norm_sqr(), d.norm_sqr());
    let re_a2c = (a * a * c.conj()).re;

    let m1 = 1.0 - (c2 + d2);
    let m2 = (1.0 - c2) * (1.0 - c2) - (1.0 - c2) * d2 - (a2 * (1.0 + c2) + 2.0 * re_a2c);
    let m3 = re_a2c + a2 * c2;
    Ok(StabilityVerdict::from_margins_mixed(
        &[m1, m2, m3],
        2,
        MARGIN_TOL,
    ))
}

/// Asymptotic mean-square stability of the scalar SDE itself:
/// `Re(lambda) + |mu|^2 / 2 < 0`.
pub fn sde_stable(eq: &ScalarTestEq) -> bool {
    eq.lambda.re + eq.mu.norm_sqr() / 2.0 < 0.0
}

/// Closed-form AB2 stability region for real parameters:
/// `-1 < lambda h < 0` and `mu^2 < 2 lambda (lambda h - 2)(lambda h + 1) / (lambda h + 2)`.
pub fn region_ab2(h: f64, lambda: f64, mu: f64) -> bool {
    let x = lambda * h;
    -1.0 < x && x < 0.0 && mu * mu < 2.0 * lambda * (x - 2.0) * (x + 1.0) / (x + 2.0)
}

/// Closed-form AM2 stability region for real parameters:
/// `-6 < lambda h < 0` and `mu^2 < lambda (lambda h - 2)(lambda h + 6) / (2 (3 - lambda h))`.
pub fn region_am2(h: f64, lambda: f64, mu: f64) -> bool {
    let x = lambda * h;
    -6.0 < x && x < 0.0 && mu * mu < lambda * (x - 2.0) * (x + 6.0) / (2.0 * (3.0 - x))
}

/// Distance of `mu^2` to the AB2 region bound, plus the interval margins;
/// used by grid tests to exclude boundary-adjacent cells.
pub fn region_ab2_margin(h: f64, lambda: f64, mu: f64) -> f64 {
    let x = lambda * h;
    let interval = (x + 1.0).min(-x);
    let bound = 2.0 * lambda * (x - 2.0) * (x + 1.0) / (x + 2.0) - mu * mu;
    interval.min(bound)
}

pub fn region_am2_margin(h: f64, lambda: f64, mu: f64) -> f64 {
    let x = lambda * h;
    let interval = (x + 6.0).min(-x);
    let bound = lambda * (x - 2.0) * (x + 6.0) / (2.0 * (3.0 - x)) - mu * mu;
    interval.min(bound)
}

/// Conditional step-size bound for AB2. Real parameters use
/// `min(-1/lambda, (mu^2 + 2 lambda + sqrt((mu^2 + 2 lambda)(mu^2 + 18 lambda))) / (4 lambda^2))`;
/// complex parameters the corresponding domain bound. The bound is
/// sufficient, not tight; parameters strictly outside the SDE domain are
/// rejected.
pub fn h0_ab2(eq: &ScalarTestEq) -> Result<f64> {
    if eq.lambda.re + eq.mu.norm_sqr() / 2.0 > 0.0 {
        return Err(Error::OutsideDomain);
    }
    if eq.is_real() {
        let (lam, mu) = (eq.lambda.re, eq.mu.re);
        let s = mu * mu + 2.0 * lam;
        let t = mu * mu + 18.0 * lam;
        let second = (s + (s * t).sqrt()) / (4.0 * lam * lam);
        Ok((-1.0 / lam).min(second))
    } else {
        let lam_abs2 = eq.lambda.norm_sqr();
        let mu2 = eq.mu.norm_sqr();
        let re_lam = eq.lambda.re;
        let h1 = (mu2 / (2.0 * lam_abs2))
            .min((4.0 * (-2.0 * re_lam - mu2) / (-6.0 * re_lam * lam_abs2)).sqrt());
        Ok((1.0 / eq.lambda.norm()).min(h1))
    }
}

/// Conditional step-size bound for AM2 (real parameters):
/// `min(-6/lambda, (-mu^2 - 2 lambda + sqrt((mu^2 + 2 lambda)(mu^2 + 8 lambda))) / lambda^2)`.
pub fn h0_am2(lambda: f64, mu: f64) -> Result<f64> {
    if lambda + mu * mu / 2.0 > 0.0 {
        return Err(Error::OutsideDomain);
    }
    let s = mu * mu + 2.0 * lambda;
    let t = mu * mu + 8.0 * lambda;
    let second = (-s + (s * t).sqrt()) / (lambda * lambda);
    Ok((-6.0 / lambda).min(second))
}

/// Classifies one `(scheme, lambda, mu, h)` point through the reduction and
/// the theorem conditions.
pub fn classify(scheme: SchemeName, eq: &ScalarTestEq, h: f64) -> Result<StabilityVerdict> {
    let rc = reduce_scalar(catalog(scheme), eq, h)?;
    Ok(theorem_conditions(&rc))
}

/// Verdicts of every criterion route for one reduced recurrence, with the
/// consistency findings the `check` command reports.
#[derive(Debug, Clone)]
pub struct CrossCheck {
    pub theorem: StabilityVerdict,
    pub schur_cohn: StabilityVerdict,
    pub jury: StabilityVerdict,
    pub roots: StabilityVerdict,
    pub spectral_radius: f64,
    /// Proposition verdicts where applicable (d = 0 resp. b = 0).
    pub abam: Option<StabilityVerdict>,
    pub hereditary: Option<StabilityVerdict>,
    /// Human-readable disagreements. Criterion-route disagreements make the
    /// check inconsistent; proposition mismatches are reported as findings
    /// only, since their clause structure mixes sufficiency.
    pub findings: Vec<String>,
    pub consistent: bool,
}

/// Evaluates theorem, Schur-Cohn, Jury and root-oracle verdicts and compares
/// them, ignoring samples inside the marginal band.
pub fn cross_validate(rc: &ReducedCoeffs) -> Result<CrossCheck> {
    let p = quartic_coeffs(rc);
    let theorem = theorem_conditions(rc);
    let schur_cohn = polystab::schur_cohn_general(&p);
    let jury = polystab::schur_cohn_jury(&p)?;
    let rho = polystab::quartic_spectral_radius(&p)?;
    let roots = StabilityVerdict::from_radius(rho, MARGIN_TOL);

    let mut findings = Vec::new();
    let mut consistent = true;
    let decisive = (rho - 1.0).abs() > MARGIN_TOL;
    if decisive {
        let routes = [
            ("theorem", theorem),
            ("schur-cohn", schur_cohn),
            ("jury", jury),
        ];
        for (name, v) in routes {
            if v.status != StabilityStatus::Marginal && v.status != roots.status {
                findings.push(format!(
                    "{name} verdict {} disagrees with root oracle {} (rho = {rho})",
                    v.status, roots.status
                ));
                consistent = false;
            }
        }
    }

    let abam = if rc.d == Complex64::new(0.0, 0.0) {
        let v = abam_conditions(rc)?;
        if decisive && v.status != StabilityStatus::Marginal && v.status != roots.status {
            findings.push(format!(
                "abam proposition verdict {} differs from root oracle {} (rho = {rho})",
                v.status, roots.status
            ));
        }
        Some(v)
    } else {
        None
    };
    let hereditary = if rc.b == Complex64::new(0.0, 0.0) {
        let v = hereditary_conditions(rc)?;
        if decisive && v.status != StabilityStatus::Marginal && v.status != roots.status {
            findings.push(format!(
                "hereditary proposition verdict {} differs from root oracle {} (rho = {rho})",
                v.status, roots.status
            ));
        }
        Some(v)
    } else {
        None
    };

    Ok(CrossCheck {
        theorem,
        schur_cohn,
        jury,
        roots,
        spectral_radius: rho,
        abam,
        hereditary,
        findings,
        consistent,
    })
}

/// Which parameter set a region membership test refers to: the complex
/// `(lambda, mu)` stability domain or the real stability region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Domain,
    Region,
}

/// A scheme's stability domain/region at a fixed step size.
#[derive(Debug, Clone, Copy)]
pub struct RegionSpec {
    pub scheme: SchemeName,
    pub h: f64,
    pub kind: RegionKind,
}

impl RegionSpec {
    pub fn new(scheme: SchemeName, h: f64, kind: RegionKind) -> Result<Self> {
        if h.is_nan() || h <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive, got {h}"
            )));
        }
        Ok(RegionSpec { scheme, h, kind })
    }

    /// Membership of `(lambda, mu)` in the scheme's stability set.
    pub fn contains(&self, lambda: Complex64, mu: Complex64) -> Result<StabilityVerdict> {
        if self.kind == RegionKind::Region && (lambda.im != 0.0 || mu.im != 0.0) {
            return Err(Error::NotApplicable(
                "real stability region requires real parameters",
            ));
        }
        classify(self.scheme, &ScalarTestEq::new(lambda, mu), self.h)
    }
}

/// One raster cell of a region scan.
#[derive(Debug, Clone)]
pub struct RegionRow {
    /// `lambda * h`
    pub x: f64,
    /// `mu^2 * h`
    pub y: f64,
    pub scheme: String,
    pub verdict: StabilityStatus,
}

/// Configuration of a region scan over the `(x, Y) = (lambda h, mu^2 h)` plane.
#[derive(Debug, Clone)]
pub struct RegionScan {
    pub schemes: Vec<SchemeName>,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for RegionScan {
    fn default() -> Self {
        RegionScan {
            schemes: SchemeName::ALL.to_vec(),
            x_min: -8.0,
            x_max: 0.0,
            y_min: 0.0,
            y_max: 16.0,
            nx: 400,
            ny: 400,
        }
    }
}

/// Rasterizes the stability verdict of each scheme over cell centers of the
/// `(x, Y)` grid, plus the `sde` pseudo-scheme for the triangle
/// `0 < Y < -2x`. The verdict is step-size free: the reduced coefficients
/// depend on `(x, Y)` only, so the scan fixes `h = 1`.
pub fn region_scan(cfg: &RegionScan) -> Result<Vec<RegionRow>> {
    if cfg.nx == 0 || cfg.ny == 0 {
        return Err(Error::InvalidConfig(
            "grid resolution must be positive".into(),
        ));
    }
    let dx = (cfg.x_max - cfg.x_min) / cfg.nx as f64;
    let dy = (cfg.y_max - cfg.y_min) / cfg.ny as f64;
    let cells: Vec<(f64, f64)> = (0..cfg.nx)
        .flat_map(|i| {
            let x = cfg.x_min + (i as f64 + 0.5) * dx;
            (0..cfg.ny).map(move |j| (x, cfg.y_min + (j as f64 + 0.5) * dy))
        })
        .collect();

    let rows: Result<Vec<Vec<RegionRow>>> = cells
        .par_iter()
        .map(|&(x, y)| {
            let mut out = Vec::with_capacity(cfg.schemes.len() + 1);
            let eq = ScalarTestEq::real(x, y.max(0.0).sqrt());
            for &scheme in &cfg.schemes {
                let verdict = classify(scheme, &eq, 1.0)?;
                out.push(RegionRow {
                    x,
                    y,
                    scheme: scheme.token().into(),
                    verdict: verdict.status,
                });
            }
            let sde_margin = (-2.0 * x - y).min(y);
            let status = if sde_margin.abs() <= MARGIN_TOL {
                StabilityStatus::Marginal
            } else if sde_margin > 0.0 {
                StabilityStatus::Stable
            } else {
                StabilityStatus::Unstable
            };
            out.push(RegionRow {
                x,
                y,
                scheme: "sde".into(),
                verdict: status,
            });
            Ok(out)
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// CSV serialization of a region scan, header `x,Y,scheme,verdict`.
pub fn region_rows_to_csv(rows: &[RegionRow]) -> String {
    let mut out = String::from("x,Y,scheme,verdict\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.x, r.y, r.scheme, r.verdict));
    }
    out
}
