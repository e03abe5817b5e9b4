//! System-case mean-square stability: the Kronecker-block stability matrix
//! of a two-step method applied to a linear system of test equations,
//! spectral-radius verdicts, and the closed-form SDE-level conditions for
//! the 2x2 single-noise and two-noise example systems.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::polystab::StabilityVerdict;
use crate::schemes::{catalog, reduce_system, SchemeName, SystemMatrices, SystemTestEq};

/// Marginality band for spectral-radius verdicts; looser than the scalar
/// closed-form band because the radius comes from an iterative eigensolve.
pub const RADIUS_MARGIN: f64 = 1e-7;

/// The `4 d^2 x 4 d^2` stability matrix assembled from Kronecker blocks,
/// with the coupling block
/// `R = sum_r (A (x) D_r)(B_r (x) I) + sum_r (D_r (x) A)(I (x) B_r)`.
pub fn build_system_stability_matrix(sm: &SystemMatrices) -> Result<Mat> {
    let d = sm.dim();
    if !sm.a.is_square() || !sm.c.is_square() || sm.c.n_rows() != d {
        return Err(Error::DimensionMismatch {
            context: "A and C must be square of equal size".into(),
        });
    }
    if sm.b.len() != sm.d.len() {
        return Err(Error::DimensionMismatch {
            context: "B_r and D_r counts differ".into(),
        });
    }
    for m in sm.b.iter().chain(sm.d.iter()) {
        if m.n_rows() != d || m.n_cols() != d {
            return Err(Error::DimensionMismatch {
                context: "noise matrix size mismatch".into(),
            });
        }
    }

    let eye = Mat::identity(d);
    let d2 = d * d;
    let mut s11 = sm.a.kron(&sm.a);
    let mut s14 = sm.c.kron(&sm.c);
    let mut s24 = Mat::zeros(d2, d2);
    let mut s34 = Mat::zeros(d2, d2);
    for (b, dd) in sm.b.iter().zip(&sm.d) {
        s11 = s11.add(&b.kron(b));
        s14 = s14.add(&dd.kron(dd));
        // R
        s14 = s14.add(&sm.a.kron(dd).matmul(&b.kron(&eye)));
        s14 = s14.add(&dd.kron(&sm.a).matmul(&eye.kron(b)));
        s24 = s24.add(&dd.kron(b));
        s34 = s34.add(&b.kron(dd));
    }

    let mut s = Mat::zeros(4 * d2, 4 * d2);
    s.set_block(0, 0, &s11);
    s.set_block(0, d2, &sm.a.kron(&sm.c));
    s.set_block(0, 2 * d2, &sm.c.kron(&sm.a));
    s.set_block(0, 3 * d2, &s14);
    s.set_block(d2, 0, &sm.a.kron(&eye));
    s.set_block(d2, 2 * d2, &sm.c.kron(&eye));
    s.set_block(d2, 3 * d2, &s24);
    s.set_block(2 * d2, 0, &eye.kron(&sm.a));
    s.set_block(2 * d2, d2, &eye.kron(&sm.c));
    s.set_block(2 * d2, 3 * d2, &s34);
    s.set_block(3 * d2, 0, &Mat::identity(d2));
    Ok(s)
}

/// Spectral radius via Hessenberg reduction and shifted QR.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "spectral radius of non-square matrix".into(),
        });
    }
    if m.n_rows() > 256 {
        return Err(Error::InvalidConfig(format!(
            "matrix order {} exceeds 256",
            m.n_rows()
        )));
    }
    let eig = linalg::eigenvalues(m)?;
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Spectral abscissa (largest real part of an eigenvalue) of a real matrix;
/// the continuous-time stability indicator.
pub fn spectral_abscissa(m: &Mat) -> Result<f64> {
    let eig = linalg::eigenvalues(m)?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Norm-based spectral radius estimate by repeated squaring; an
/// eigensolver-independent cross-check for verdict-level use.
pub fn gelfand_radius(m: &Mat) -> f64 {
    linalg::gelfand_radius(m)
}

/// MS-stability of the single-noise example system:
/// `lambda + (|sigma| + |eps|)^2 / 2 < 0`.
pub fn sde_system_stable_single_noise(lambda: f64, sigma: f64, eps: f64) -> bool {
    lambda + 0.5 * (sigma.abs() + eps.abs()).powi(2) < 0.0
}

/// MS-stability of the two-noise example system:
/// `lambda + (sigma^2 + eps^2) / 2 < 0`.
pub fn sde_system_stable_two_noise(lambda: f64, sigma: f64, eps: f64) -> bool {
    lambda + 0.5 * (sigma * sigma + eps * eps) < 0.0
}

/// The 2x2 single-noise example system: `F = lambda I`,
/// `G = [[sigma, eps], [eps, sigma]]`.
pub fn single_noise_system(lambda: f64, sigma: f64, eps: f64) -> SystemTestEq {
    let f = Mat::identity(2).scaled(lambda);
    let g = Mat::from_rows(&[vec![sigma, eps], vec![eps, sigma]]).expect("2x2");
    SystemTestEq::new(f, vec![g]).expect("valid 2x2 system")
}

/// The 2x2 two-noise example system: `F = lambda I`, `G_1 = sigma I`,
/// `G_2 = [[0, -eps], [eps, 0]]`.
pub fn two_noise_system(lambda: f64, sigma: f64, eps: f64) -> SystemTestEq {
    let f = Mat::identity(2).scaled(lambda);
    let g1 = Mat::identity(2).scaled(sigma);
    let g2 = Mat::from_rows(&[vec![0.0, -eps], vec![eps, 0.0]]).expect("2x2");
    SystemTestEq::new(f, vec![g1, g2]).expect("valid 2x2 system")
}

/// Continuous-time MS stability matrix of the SDE system,
/// `F (+) F + sum_r G_r (x) G_r` with `(+)` the Kronecker sum. For the 2x2
/// example systems this reproduces the closed-form matrices with entries
/// `2 lambda + sigma^2`, `sigma eps`, `eps^2`. The zero solution of the SDE
/// is MS-stable iff the spectral abscissa is negative. Extension beyond the
/// example systems; the CLI keeps it behind a flag.
pub fn sde_ms_matrix(eq: &SystemTestEq) -> Mat {
    let d = eq.dim();
    let eye = Mat::identity(d);
    let f = eq.drift();
    let mut s = f.kron(&eye).add(&eye.kron(f));
    for g in eq.diffusion() {
        s = s.add(&g.kron(g));
    }
    s
}

/// Classifies a `(scheme, system, h)` point by the spectral radius of the
/// assembled stability matrix: stable iff `rho < 1` with a `1e-7` marginal
/// band.
pub fn classify_system(scheme: SchemeName, eq: &SystemTestEq, h: f64) -> Result<StabilityVerdict> {
    let sm = reduce_system(catalog(scheme), eq, h)?;
    let s = build_system_stability_matrix(&sm)?;
    let rho = spectral_radius(&s)?;
    Ok(StabilityVerdict::from_radius(rho, RADIUS_MARGIN))
}

/// Spectral radius of the assembled stability matrix, without the verdict.
pub fn system_spectral_radius(scheme: SchemeName, eq: &SystemTestEq, h: f64) -> Result<f64> {
    let sm = reduce_system(catalog(scheme), eq, h)?;
    spectral_radius(&build_system_stability_matrix(&sm)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polystab::StabilityStatus;
    use crate::scalar::{build_stability_matrix, classify};
    use crate::schemes::{reduce_scalar, ScalarTestEq};

    #[test]
    fn d1_reduction_equals_scalar_matrix() {
        let eq1 = ScalarTestEq::real(-2.0, 1.1);
        let eq = SystemTestEq::new(
            Mat::from_rows(&[vec![-2.0]]).unwrap(),
            vec![Mat::from_rows(&[vec![1.1]]).unwrap()],
        )
        .unwrap();
        for name in SchemeName::ALL {
            let rc = reduce_scalar(catalog(name), &eq1, 0.5).unwrap();
            let scalar_s = build_stability_matrix(&rc);
            let sm = reduce_system(catalog(name), &eq, 0.5).unwrap();
            let sys_s = build_system_stability_matrix(&sm).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (sys_s[(i, j)] - scalar_s.entries[i][j].re).abs() < 1e-13,
                        "{name} entry ({i},{j})"
                    );
                    assert_eq!(scalar_s.entries[i][j].im, 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_matrices_leave_identity_block() {
        let z = Mat::zeros(2, 2);
        let sm = SystemMatrices {
            a: z.clone(),
            c: z.clone(),
            b: vec![z.clone()],
            d: vec![z.clone()],
            improved: false,
        };
        let s = build_system_stability_matrix(&sm).unwrap();
        let mut expected = Mat::zeros(16, 16);
        expected.set_block(12, 0, &Mat::identity(4));
        assert!(s.max_abs_diff(&expected) == 0.0);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let sm = SystemMatrices {
            a: Mat::zeros(2, 2),
            c: Mat::zeros(2, 2),
            b: vec![Mat::zeros(3, 3)],
            d: vec![Mat::zeros(2, 2)],
            improved: false,
        };
        assert!(matches!(
            build_system_stability_matrix(&sm),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Mat::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        let mut diag = Mat::zeros(4, 4);
        for (i, v) in [0.5, -0.25, 0.1, 0.0].iter().enumerate() {
            diag[(i, i)] = *v;
        }
        assert!((spectral_radius(&diag).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sde_level_conditions() {
        assert!(sde_system_stable_single_noise(-5.0, 1.0, 1.0));
        assert!(!sde_system_stable_single_noise(0.0, 0.0, 0.0));
        assert!(!sde_system_stable_single_noise(-2.0, 1.0, 1.0)); // boundary, strict

        assert!(sde_system_stable_two_noise(-5.0, 1.0, 2.0));
        assert!(!sde_system_stable_two_noise(0.0, 0.0, 0.0));
        assert!(!sde_system_stable_two_noise(-1.0, 1.0, 1.0)); // boundary, strict
    }

    #[test]
    fn sde_ms_matrix_matches_closed_forms() {
        let (lam, sig, eps) = (-3.0, 0.7, 1.2);
        let s = sde_ms_matrix(&single_noise_system(lam, sig, eps));
        let e = Mat::from_rows(&[
            vec![2.0 * lam + sig * sig, sig * eps, eps * sig, eps * eps],
            vec![sig * eps, 2.0 * lam + sig * sig, eps * eps, eps * sig],
            vec![eps * sig, eps * eps, 2.0 * lam + sig * sig, sig * eps],
            vec![eps * eps, eps * sig, sig * eps, 2.0 * lam + sig * sig],
        ])
        .unwrap();
        assert!(s.max_abs_diff(&e) < 1e-14);

        let s2 = sde_ms_matrix(&two_noise_system(lam, sig, eps));
        let e2 = Mat::from_rows(&[
            vec![2.0 * lam + sig * sig, 0.0, 0.0, eps * eps],
            vec![0.0, 2.0 * lam + sig * sig, -eps * eps, 0.0],
            vec![0.0, -eps * eps, 2.0 * lam + sig * sig, 0.0],
            vec![eps * eps, 0.0, 0.0, 2.0 * lam + sig * sig],
        ])
        .unwrap();
        assert!(s2.max_abs_diff(&e2) < 1e-14);

        // abscissa of the single-noise matrix is 2 lambda + (sigma + eps)^2
        let alpha = spectral_abscissa(&s).unwrap();
        assert!((alpha - (2.0 * lam + (sig + eps) * (sig + eps))).abs() < 1e-10);
    }

    #[test]
    fn classify_system_matches_scalar_at_d1() {
        let eq = SystemTestEq::new(
            Mat::from_rows(&[vec![-4.0]]).unwrap(),
            vec![Mat::from_rows(&[vec![1.5]]).unwrap()],
        )
        .unwrap();
        for name in SchemeName::ALL {
            for h in [0.25, 1.0] {
                let sys = classify_system(name, &eq, h).unwrap();
                let sc = classify(name, &ScalarTestEq::real(-4.0, 1.5), h).unwrap();
                assert_eq!(sys.status, sc.status, "{name} at h = {h}");
            }
        }
    }

    #[test]
    fn gelfand_agrees_with_qr_radius() {
        let eq = two_noise_system(-1.8, 1.33, 1.33);
        for name in SchemeName::ALL {
            let sm = reduce_system(catalog(name), &eq, 0.5).unwrap();
            let s = build_system_stability_matrix(&sm).unwrap();
            let qr = spectral_radius(&s).unwrap();
            let ge = gelfand_radius(&s);
            assert!((qr - ge).abs() < 1e-6, "{name}: qr {qr} vs gelfand {ge}");
        }
    }

    #[test]
    fn frozen_exhibit_radii() {
        // single-noise exhibit: improved AM2/BDF2 stable, standard AM2 not
        let eq = single_noise_system(-5.0, 1.56, 1.56);
        assert!(sde_system_stable_single_noise(-5.0, 1.56, 1.56));
        let rho_am2 = system_spectral_radius(SchemeName::Am2, &eq, 0.5).unwrap();
        let rho_am2i = system_spectral_radius(SchemeName::Am2i, &eq, 0.5).unwrap();
        assert!((rho_am2 - 1.300428).abs() < 1e-4, "rho_am2 = {rho_am2}");
        assert!((rho_am2i - 0.628665).abs() < 1e-4, "rho_am2i = {rho_am2i}");
        assert_eq!(
            classify_system(SchemeName::Am2, &eq, 0.5).unwrap().status,
            StabilityStatus::Unstable
        );
        assert_eq!(
            classify_system(SchemeName::Am2i, &eq, 0.5).unwrap().status,
            StabilityStatus::Stable
        );
    }
}
