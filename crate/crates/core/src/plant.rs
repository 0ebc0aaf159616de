//! SISO state-space plants and the spectral quantities the bounds consume.
//!
//! The plant is `x_{k+1} = A x_k + B e_k`, `y_k = C x_k`. From it we extract
//! the eigenvalues of `A`, the product `Π max{1, |λ_i|}`, the relative degree
//! `ν` (first nonvanishing Markov parameter `C A^ν B`), its value `ρ`, and the
//! finite zeros: the points where the Rosenbrock matrix
//!
//! ```text
//! [ A - zI  B ]
//! [   C     0 ]
//! ```
//!
//! loses rank.

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold for declaring a Markov parameter zero.
pub const DEFAULT_TOL_MARKOV: f64 = 1e-9;
/// Relative threshold for numerical rank decisions in zero computation.
pub const DEFAULT_TOL_RANK: f64 = 1e-8;
/// Pole/zero pairs closer than this (relative) are reported as cancellations.
pub const DEFAULT_TOL_CANCEL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidModel(
                "A: state dimension must be at least 1".into(),
            ));
        }
        if a.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "A: expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != n {
            return Err(Error::InvalidModel(format!(
                "B: expected {n} entries, got {}",
                b.len()
            )));
        }
        if c.len() != n {
            return Err(Error::InvalidModel(format!(
                "C: expected {n} entries, got {}",
                c.len()
            )));
        }
        for (name, finite) in [
            ("A", a.iter().all(|v| v.is_finite())),
            ("B", b.iter().all(|v| v.is_finite())),
            ("C", c.iter().all(|v| v.is_finite())),
        ] {
            if !finite {
                return Err(Error::InvalidModel(format!(
                    "{name}: entries must be finite"
                )));
            }
        }
        Ok(Self { a, b, c })
    }

    /// Build from row-major nested vectors.
    pub fn from_rows(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Self> {
        let n = a.len();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "A: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let a = DMatrix::from_fn(n, n, |i, j| a[i][j]);
        Self::new(
            a,
            DVector::from_column_slice(b),
            RowDVector::from_row_slice(c),
        )
    }

    /// First-order plant `x_{k+1} = a x_k + e_k`, `y_k = x_k`.
    pub fn scalar(a: f64) -> Result<Self> {
        Self::from_rows(&[vec![a]], &[1.0], &[1.0])
    }

    /// Controllable-canonical realization of `b(z)/a(z)` with `a` monic.
    ///
    /// `den = [a_1, ..., a_n]` for `a(z) = z^n + a_1 z^{n-1} + ... + a_n`, and
    /// `num = [b_1, ..., b_n]` for `b(z) = b_1 z^{n-1} + ... + b_n` (strictly
    /// proper, so the numerator has at most `n` coefficients).
    pub fn companion(num: &[f64], den: &[f64]) -> Result<Self> {
        let n = den.len();
        if n == 0 {
            return Err(Error::InvalidModel(
                "A: denominator degree must be at least 1".into(),
            ));
        }
        if num.len() != n {
            return Err(Error::InvalidModel(format!(
                "C: numerator needs {n} coefficients, got {}",
                num.len()
            )));
        }
        // State ordering x = [w_{k-n+1}, ..., w_k] so that y = Σ b_i w_{k-i+1}.
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = -den[n - 1 - j];
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let c = RowDVector::from_fn(n, |_, j| num[n - 1 - j]);
        Self::new(a, b, c)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    /// Similarity transform `(T A T⁻¹, T B, C T⁻¹)`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("transform is singular".into()))?;
        Self::new(t * &self.a * &t_inv, t * &self.b, &self.c * &t_inv)
    }
}

/// On-disk plant format: `{ "A": [[..],..], "B": [..], "C": [..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
}

impl TryFrom<PlantFile> for StateSpaceModel {
    type Error = Error;

    fn try_from(f: PlantFile) -> Result<Self> {
        StateSpaceModel::from_rows(&f.a, &f.b, &f.c)
    }
}

impl From<&StateSpaceModel> for PlantFile {
    fn from(m: &StateSpaceModel) -> Self {
        let n = m.state_dim();
        PlantFile {
            a: (0..n)
                .map(|i| m.a.row(i).iter().copied().collect())
                .collect(),
            b: m.b.iter().copied().collect(),
            c: m.c.iter().copied().collect(),
        }
    }
}

impl StateSpaceModel {
    /// Parse and validate a plant JSON document.
    ///
    /// NaN and infinities are not representable in JSON, so they surface as
    /// parse errors; overflowing literals such as `1e999` are rejected by the
    /// finiteness check.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlantFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        file.try_into()
    }
}

/// Numerical tolerances for plant analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub tol_markov: f64,
    pub tol_rank: f64,
    pub tol_cancel: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tol_markov: DEFAULT_TOL_MARKOV,
            tol_rank: DEFAULT_TOL_RANK,
            tol_cancel: DEFAULT_TOL_CANCEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantCharacteristics {
    pub state_dim: usize,
    pub poles: Vec<Complex64>,
    pub unstable_pole_product: f64,
    pub finite_zeros: Vec<Complex64>,
    pub nmp_zero_product: f64,
    pub relative_degree: usize,
    pub markov_gain: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Eigenvalues of `A` and `Π max{1, |λ_i|}`.
pub fn analyze_poles(model: &StateSpaceModel) -> (Vec<Complex64>, f64) {
    let mut poles: Vec<Complex64> = model.a.complex_eigenvalues().iter().copied().collect();
    sort_complex(&mut poles);
    let product = magnitude_product(&poles);
    (poles, product)
}

/// `Π max{1, |φ|}` over a list of zeros. Empty product is 1.
pub fn nmp_zero_product(zeros: &[Complex64]) -> f64 {
    magnitude_product(zeros)
}

fn magnitude_product(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm().max(1.0)).product()
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Relative degree `ν = min{i : |C A^i B| > tol·‖C‖‖A‖^i‖B‖}` and `ρ = C A^ν B`.
pub fn relative_degree_and_gain(model: &StateSpaceModel) -> Result<(usize, f64)> {
    relative_degree_and_gain_with(model, DEFAULT_TOL_MARKOV)
}

pub fn relative_degree_and_gain_with(
    model: &StateSpaceModel,
    tol_markov: f64,
) -> Result<(usize, f64)> {
    let n = model.state_dim();
    let norm_a = spectral_norm(&model.a);
    let norm_bc = model.b.norm() * model.c.norm();
    let mut v = model.b.clone();
    let mut norm_a_pow = 1.0;
    for i in 0..=n {
        let markov = model.c.dot(&v.transpose());
        let scale = norm_bc * norm_a_pow;
        if markov.abs() > tol_markov * scale {
            return Ok((i, markov));
        }
        v = &model.a * v;
        norm_a_pow *= norm_a;
    }
    Err(Error::ZeroTransferFunction(n))
}

/// Finite zeros of the plant, i.e. the finite generalized eigenvalues of the
/// pencil `([A B; C 0], diag(I, 0))`.
pub fn compute_finite_zeros(model: &StateSpaceModel) -> Result<Vec<Complex64>> {
    compute_finite_zeros_with(model, &AnalysisOptions::default())
}

/// The infinite eigenvalues of the Rosenbrock pencil are deflated exactly
/// before any eigenvalue computation. With `ν` and `ρ` known, the rows
/// `C, CA, ..., CA^ν` are linearly independent, the subspace
/// `V = ker[C; CA; ...; CA^ν]` has dimension `n - ν - 1` and is invariant under
/// `(I - B ρ⁻¹ C A^ν) A`, and the restriction of that map to `V` is the regular
/// part of the pencil. Its eigenvalues are exactly the rank-drop points.
pub fn compute_finite_zeros_with(
    model: &StateSpaceModel,
    opts: &AnalysisOptions,
) -> Result<Vec<Complex64>> {
    let n = model.state_dim();
    let (nu, rho) = relative_degree_and_gain_with(model, opts.tol_markov)?;
    let zero_count = n - nu - 1;
    if zero_count == 0 {
        return Ok(Vec::new());
    }

    // Stack [C; CA; ...; CA^ν] and form the projector onto its row space.
    let mut stack = DMatrix::zeros(nu + 1, n);
    let mut row = model.c.clone();
    for i in 0..=nu {
        stack.set_row(i, &row);
        row = &row * &model.a;
    }
    // `row` now holds C A^{ν+1}.
    let qr = stack.transpose().qr();
    let r_diag = qr.r().diagonal().map(f64::abs);
    let r_max = r_diag.max();
    if r_diag.min() <= opts.tol_rank * r_max {
        return Err(Error::DegenerateRealization(format!(
            "observability stack of depth {} is numerically rank deficient",
            nu + 1
        )));
    }
    let q_row = qr.q();
    let complement = DMatrix::identity(n, n) - &q_row * q_row.transpose();
    let eig = SymmetricEigen::new(complement);

    // Eigenvalues of an orthogonal projector are 0 or 1; take the unit ones.
    let mut basis_cols: Vec<usize> = (0..n).filter(|&j| eig.eigenvalues[j] > 0.5).collect();
    if basis_cols.len() != zero_count {
        return Err(Error::DegenerateRealization(format!(
            "expected a {zero_count}-dimensional zero subspace, found {}",
            basis_cols.len()
        )));
    }
    basis_cols.sort_unstable();
    let basis = DMatrix::from_fn(n, zero_count, |i, j| eig.eigenvectors[(i, basis_cols[j])]);

    let zero_dynamics = &model.a - &model.b * (&row / rho);
    let reduced = basis.transpose() * zero_dynamics * &basis;
    let mut zeros: Vec<Complex64> = reduced.complex_eigenvalues().iter().copied().collect();
    if zeros.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::DegenerateRealization("non-finite zero".into()));
    }
    sort_complex(&mut zeros);
    Ok(zeros)
}

/// Full analysis with default tolerances.
pub fn analyze(model: &StateSpaceModel) -> Result<PlantCharacteristics> {
    analyze_with(model, &AnalysisOptions::default())
}

pub fn analyze_with(
    model: &StateSpaceModel,
    opts: &AnalysisOptions,
) -> Result<PlantCharacteristics> {
    let (poles, unstable_pole_product) = analyze_poles(model);
    let (relative_degree, markov_gain) = relative_degree_and_gain_with(model, opts.tol_markov)?;
    let finite_zeros = compute_finite_zeros_with(model, opts)?;
    let nmp = nmp_zero_product(&finite_zeros);

    let mut warnings = Vec::new();
    if relative_degree == 0 {
        warnings.push(format!(
            "relative degree is 0 (CB = {markov_gain} is nonzero); the output bound assumes a positive relative degree"
        ));
    }
    for z in &finite_zeros {
        if let Some(p) = poles
            .iter()
            .find(|p| (*p - z).norm() <= opts.tol_cancel * p.norm().max(1.0))
        {
            warnings.push(format!(
                "near pole/zero cancellation at {:.6}{:+.6}i (pole {:.6}{:+.6}i); realization may be non-minimal",
                z.re, z.im, p.re, p.im
            ));
        }
    }

    Ok(PlantCharacteristics {
        state_dim: model.state_dim(),
        poles,
        unstable_pole_product,
        finite_zeros,
        nmp_zero_product: nmp,
        relative_degree,
        markov_gain,
        warnings,
    })
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn double_integrator(c: [f64; 2]) -> StateSpaceModel {
        StateSpaceModel::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[0.0, 1.0], &c).unwrap()
    }

    #[test]
    fn pole_products() {
        let (_, p) = analyze_poles(&StateSpaceModel::scalar(0.5).unwrap());
        assert_eq!(p, 1.0);

        let m = StateSpaceModel::from_rows(
            &[vec![2.0, 0.0], vec![0.0, -0.5]],
            &[1.0, 1.0],
            &[1.0, 1.0],
        )
        .unwrap();
        let (_, p) = analyze_poles(&m);
        assert_abs_diff_eq!(p, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_pair_poles() {
        let m = StateSpaceModel::from_rows(
            &[vec![0.0, -4.0], vec![1.0, 0.0]],
            &[1.0, 0.0],
            &[0.0, 1.0],
        )
        .unwrap();
        let (poles, p) = analyze_poles(&m);
        assert_eq!(poles.len(), 2);
        for pole in &poles {
            // roots of λ² + 4
            assert_abs_diff_eq!((pole * pole + 4.0).norm(), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(p, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn relative_degree_examples() {
        assert_eq!(
            relative_degree_and_gain(&double_integrator([-2.0, 1.0])).unwrap(),
            (0, 1.0)
        );
        assert_eq!(
            relative_degree_and_gain(&StateSpaceModel::scalar(0.5).unwrap()).unwrap(),
            (0, 1.0)
        );
        assert_eq!(
            relative_degree_and_gain(&double_integrator([1.0, 0.0])).unwrap(),
            (1, 1.0)
        );
    }

    #[test]
    fn zero_transfer_function_is_rejected() {
        let m =
            StateSpaceModel::from_rows(&[vec![0.3, 0.0], vec![0.0, 0.7]], &[1.0, 0.0], &[0.0, 1.0])
                .unwrap();
        assert!(matches!(
            relative_degree_and_gain(&m),
            Err(Error::ZeroTransferFunction(2))
        ));
        assert!(matches!(
            compute_finite_zeros(&m),
            Err(Error::ZeroTransferFunction(_))
        ));
    }

    #[test]
    fn zeros_examples() {
        let z = compute_finite_zeros(&double_integrator([-2.0, 1.0])).unwrap();
        assert_eq!(z.len(), 1);
        assert_abs_diff_eq!(z[0].re, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(z[0].im, 0.0, epsilon = 1e-10);

        assert!(compute_finite_zeros(&StateSpaceModel::scalar(0.5).unwrap())
            .unwrap()
            .is_empty());

        let z = compute_finite_zeros(&double_integrator([0.5, 1.0])).unwrap();
        assert_eq!(z.len(), 1);
        assert_abs_diff_eq!(z[0].re, -0.5, epsilon = 1e-10);

        // ν = 1: no finite zeros for 1/z².
        assert!(compute_finite_zeros(&double_integrator([1.0, 0.0]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn nmp_products() {
        assert_eq!(nmp_zero_product(&[]), 1.0);
        assert_eq!(nmp_zero_product(&[Complex64::new(2.0, 0.0)]), 2.0);
        assert_abs_diff_eq!(
            nmp_zero_product(&[Complex64::new(-0.5, 0.0), Complex64::new(0.0, 3.0)]),
            3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn companion_matches_double_integrator() {
        // (z - 2)/z²
        let m = StateSpaceModel::companion(&[1.0, -2.0], &[0.0, 0.0]).unwrap();
        let ch = analyze(&m).unwrap();
        assert_eq!(ch.relative_degree, 0);
        assert_eq!(ch.markov_gain, 1.0);
        assert_abs_diff_eq!(ch.nmp_zero_product, 2.0, epsilon = 1e-10);
        assert_eq!(ch.unstable_pole_product, 1.0);
        assert!(ch
            .warnings
            .iter()
            .any(|w| w.contains("relative degree is 0")));
    }

    #[test]
    fn cancellation_is_flagged() {
        // (z - 0.5)/((z - 0.5)(z - 0.2))
        let m = StateSpaceModel::companion(&[1.0, -0.5], &[-0.7, 0.1]).unwrap();
        let ch = analyze(&m).unwrap();
        assert!(
            ch.warnings.iter().any(|w| w.contains("cancellation")),
            "{:?}",
            ch.warnings
        );
    }

    #[test]
    fn validation_names_fields() {
        let err =
            StateSpaceModel::from_rows(&[vec![1.0, 0.0], vec![0.0]], &[1.0, 0.0], &[1.0, 0.0])
                .unwrap_err();
        assert!(err.to_string().contains("A: row 1"));
        let err = StateSpaceModel::from_rows(&[vec![1.0]], &[1.0, 2.0], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("B:"));
        let err = StateSpaceModel::from_rows(&[vec![f64::NAN]], &[1.0], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("A: entries must be finite"));
        let err = StateSpaceModel::from_json(r#"{"A": [[0.5]], "B": [1]}"#).unwrap_err();
        assert!(err.to_string().contains("`C`"), "{err}");
        let err =
            StateSpaceModel::from_json(r#"{"A": [[1e999]], "B": [1], "C": [1]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn json_round_trip() {
        let m = double_integrator([-2.0, 1.0]);
        let text = serde_json::to_string(&PlantFile::from(&m)).unwrap();
        assert_eq!(StateSpaceModel::from_json(&text).unwrap(), m);
    }
}
