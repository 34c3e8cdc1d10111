//! Small dense linear-algebra helpers shared by the integrators.

use crate::{Error, Matrix, Result};

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// The input must be symmetric within `1e-10` (relative to its largest
/// entry). Eigenvalues below zero are clipped before taking the root, and the
/// number of clipped eigenvalues is returned alongside the root so callers
/// can report projection events.
pub fn psd_sqrt_counted(s: &Matrix) -> Result<(Matrix, usize)> {
    let scale = s.amax().max(1.0);
    let max_asym = max_asymmetry(s);
    if max_asym > 1e-10 * scale {
        return Err(Error::NotSymmetric {
            max_asym,
            tol: 1e-10 * scale,
        });
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut clipped = 0usize;
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < 0.0 {
                clipped += 1;
                0.0
            } else {
                l.sqrt()
            }
        })
        .collect();
    let d = s.nrows();
    let mut out = Matrix::zeros(d, d);
    // Q diag(sqrt) Q^T
    for k in 0..d {
        let q = eig.eigenvectors.column(k);
        out.syger(roots[k], &q, &q, 1.0);
    }
    for r in 0..d {
        for c in (r + 1)..d {
            out[(r, c)] = out[(c, r)];
        }
    }
    Ok((out, clipped))
}

/// [`psd_sqrt_counted`] without the clip count.
pub fn psd_sqrt(s: &Matrix) -> Result<Matrix> {
    psd_sqrt_counted(s).map(|(m, _)| m)
}

/// Largest absolute entry of `S - S^T`.
pub fn max_asymmetry(s: &Matrix) -> f64 {
    let d = s.nrows();
    let mut m = 0.0f64;
    for r in 0..d {
        for c in (r + 1)..d {
            m = m.max((s[(r, c)] - s[(c, r)]).abs());
        }
    }
    m
}

/// Project a nearly-symmetric matrix onto the PSD cone (eigenvalue clipping),
/// returning the number of clipped eigenvalues.
pub fn psd_project(s: &mut Matrix) -> usize {
    let sym = (&*s + s.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        *s = sym;
        return 0;
    }
    let d = s.nrows();
    let mut out = Matrix::zeros(d, d);
    let mut clipped = 0;
    for k in 0..d {
        let l = eig.eigenvalues[k];
        if l < 0.0 {
            clipped += 1;
            continue;
        }
        let q = eig.eigenvectors.column(k);
        out.syger(l, &q, &q, 1.0);
    }
    for r in 0..d {
        for c in (r + 1)..d {
            out[(r, c)] = out[(c, r)];
        }
    }
    *s = out;
    clipped
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_scalar() {
        let i3 = Matrix::identity(3, 3);
        assert_eq!(psd_sqrt(&i3).unwrap(), i3);
        let s = Matrix::from_element(1, 1, 4.0);
        assert_eq!(psd_sqrt(&s).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn rejects_asymmetric() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = 0.5;
        assert!(matches!(psd_sqrt(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn clips_negative_eigenvalues() {
        let mut m = Matrix::identity(2, 2);
        m[(1, 1)] = -1.0;
        let (root, clipped) = psd_sqrt_counted(&m).unwrap();
        assert_eq!(clipped, 1);
        assert!((root[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(root[(1, 1)].abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn reconstructs_random_psd(seed in 0u64..500, d in 1usize..6) {
            let mut rng = crate::rng::driver_rng(seed);
            use rand::Rng;
            let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let s = &a * a.transpose();
            let root = psd_sqrt(&s).unwrap();
            let back = &root * &root;
            prop_assert!((back - &s).amax() <= 1e-10 * s.amax().max(1.0));
        }
    }
}
