//! Small dense complex linear algebra: vectors, matrices, and the
//! SVD-based Moore–Penrose pseudo-inverse used by zero-forcing.
//!
//! Storage is delegated to `nalgebra`; the newtypes keep the rest of the
//! crate independent of that choice and enforce the finiteness invariants.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inconsistent linear system: residual {residual:.3e}")]
    Inconsistent { residual: f64 },
    #[error("SVD failed to converge")]
    Svd,
}

/// Complex column vector (channel rows are stored as vectors too).
#[derive(Debug, Clone, PartialEq)]
pub struct CVec(DVector<Complex64>);

/// Dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat(DMatrix<Complex64>);

impl CVec {
    pub fn new(entries: Vec<Complex64>) -> Result<Self, NumError> {
        if entries.is_empty() {
            return Err(NumError::Empty("vector"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumError::NonFinite("vector"));
        }
        Ok(CVec(DVector::from_vec(entries)))
    }

    pub fn zeros(len: usize) -> Self {
        CVec(DVector::zeros(len))
    }

    pub fn from_inner(v: DVector<Complex64>) -> Self {
        CVec(v)
    }

    pub fn inner(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, a: f64) -> CVec {
        CVec(self.0.map(|z| z * a))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Row-times-column product `h · w` without conjugation, the receive
    /// gain of beamformer `w` at a user with channel row `h`.
    pub fn dot(&self, w: &CVec) -> Complex64 {
        self.0.iter().zip(w.0.iter()).map(|(a, b)| a * b).sum()
    }
}

impl CMat {
    pub fn from_rows(rows: &[&CVec]) -> Result<Self, NumError> {
        let first = rows.first().ok_or(NumError::Empty("matrix"))?;
        let cols = first.len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumError::Dimension("ragged rows".into()));
        }
        Ok(CMat(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i].0[j])))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[Complex64]) -> Result<Self, NumError> {
        if rows == 0 || cols == 0 {
            return Err(NumError::Empty("matrix"));
        }
        if data.len() != rows * cols {
            return Err(NumError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let m = CMat(DMatrix::from_row_slice(rows, cols, data));
        m.check_finite()?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        CMat(DMatrix::identity(n, n))
    }

    pub fn from_inner(m: DMatrix<Complex64>) -> Self {
        CMat(m)
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn column(&self, j: usize) -> CVec {
        CVec(self.0.column(j).into_owned())
    }

    pub fn adjoint(&self) -> CMat {
        CMat(self.0.adjoint())
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        CMat(&self.0 * &other.0)
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        CVec(&self.0 * &v.0)
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        CMat(&self.0 - &other.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_finite(&self) -> Result<(), NumError> {
        if self.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            Err(NumError::NonFinite("matrix"))
        } else {
            Ok(())
        }
    }
}

/// Moore–Penrose pseudo-inverse through the SVD.
///
/// Singular values below `σ_max · max(rows, cols) · ε` are treated as zero,
/// so rank-deficient input is accepted.
pub fn pseudo_inverse(g: &CMat) -> Result<CMat, NumError> {
    g.check_finite()?;
    let (rows, cols) = (g.rows(), g.cols());
    let svd = g.0.clone().svd(true, true);
    let (u, v_t) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(NumError::Svd),
    };
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = sigma_max * rows.max(cols) as f64 * f64::EPSILON;
    let mut pinv = DMatrix::<Complex64>::zeros(cols, rows);
    for (i, &s) in sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let vi = v_t.row(i).adjoint();
        let ui = u.column(i).adjoint();
        pinv += (vi * ui) * Complex64::new(1.0 / s, 0.0);
    }
    let out = CMat(pinv);
    out.check_finite()?;
    Ok(out)
}

/// Relative Frobenius residuals of the four Moore–Penrose conditions.
#[derive(Debug, Clone, Copy)]
pub struct PenroseResiduals {
    pub ggg: f64,
    pub ggg_plus: f64,
    pub gg_hermitian: f64,
    pub gg_plus_hermitian: f64,
}

impl PenroseResiduals {
    pub fn max(&self) -> f64 {
        self.ggg
            .max(self.ggg_plus)
            .max(self.gg_hermitian)
            .max(self.gg_plus_hermitian)
    }
}

pub fn penrose_residuals(g: &CMat, g_plus: &CMat) -> PenroseResiduals {
    let rel = |a: &CMat, scale: f64| a.frobenius() / scale.max(f64::MIN_POSITIVE);
    let gg = g.mul(g_plus);
    let pg = g_plus.mul(g);
    PenroseResiduals {
        ggg: rel(&gg.mul(g).sub(g), g.frobenius()),
        ggg_plus: rel(&pg.mul(g_plus).sub(g_plus), g_plus.frobenius()),
        gg_hermitian: rel(&gg.sub(&gg.adjoint()), gg.frobenius()),
        gg_plus_hermitian: rel(&pg.sub(&pg.adjoint()), pg.frobenius()),
    }
}

/// Sampled check that `G⁺ b` is the minimum-norm solution of `G w = b`.
///
/// Null-space directions come from `I − G⁺G` applied to random vectors;
/// returns `true` when no perturbed solution is shorter. An inconsistent
/// system is reported as an error.
pub fn min_norm_property_check<R: Rng + ?Sized>(
    g: &CMat,
    b: &CVec,
    samples: usize,
    rng: &mut R,
) -> Result<bool, NumError> {
    if b.len() != g.rows() {
        return Err(NumError::Dimension(format!(
            "rhs has {} entries, matrix has {} rows",
            b.len(),
            g.rows()
        )));
    }
    let g_plus = pseudo_inverse(g)?;
    let w = g_plus.mul_vec(b);
    let residual = (g.mul_vec(&w).0 - &b.0).norm();
    let scale = b.norm().max(1.0);
    if residual > 1e-9 * scale {
        return Err(NumError::Inconsistent { residual });
    }
    let projector = CMat::identity(g.cols()).sub(&g_plus.mul(g));
    let base = w.norm_sqr();
    for _ in 0..samples {
        let z = random_cvec(g.cols(), rng);
        let v = projector.mul_vec(&z);
        let alt = CVec(&w.0 + &v.0);
        if alt.norm_sqr() < base * (1.0 - 1e-12) - 1e-15 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Entries drawn i.i.d. CN(0, 1).
pub fn random_cvec<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec(DVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    }))
}

pub fn random_cmat<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat(DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    }))
}
