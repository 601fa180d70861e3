//! Dense complex linear algebra on small, labelled Hilbert spaces.
//!
//! Every vector and operator carries its [`Basis`]; binary operations refuse
//! to combine objects expressed in different bases.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance used when tagging an operator as unitary or as a projector.
pub const TAG_TOL: f64 = 1e-12;

/// Normalization slack accepted by [`projector_from`].
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },
    #[error("unknown basis label `{0}`")]
    UnknownLabel(String),
    #[error("operator is not unitary (max |U^dag U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("operator is not a projector (max deviation = {deviation:e})")]
    NotProjector { deviation: f64 },
    #[error("empty basis")]
    EmptyBasis,
}

pub type Result<T> = std::result::Result<T, HilbertError>;

/// Ordered list of basis-ket names.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Basis(Arc<[String]>);

impl Basis {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(HilbertError::EmptyBasis);
        }
        Ok(Self(labels.into()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.0
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_string()))
    }

    /// The basis ket named `label`.
    pub fn ket(&self, label: &str) -> Result<StateVector> {
        let idx = self.index_of(label)?;
        Ok(StateVector::basis_ket(self.clone(), idx))
    }

    fn ensure_same(&self, other: &Basis, what: &str) -> Result<()> {
        if Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0 {
            Ok(())
        } else {
            Err(HilbertError::DimensionMismatch(format!(
                "{what}: bases {:?} and {:?} differ",
                self.0, other.0
            )))
        }
    }
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Basis,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: Basis, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(HilbertError::DimensionMismatch(format!(
                "{} amplitudes for a {}-dimensional basis",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn zero(basis: Basis) -> Self {
        let n = basis.dim();
        Self {
            basis,
            amplitudes: vec![ZERO; n],
        }
    }

    pub fn basis_ket(basis: Basis, index: usize) -> Self {
        let mut s = Self::zero(basis);
        s.amplitudes[index] = ONE;
        s
    }

    /// Builds a vector from `(label, amplitude)` pairs; unlisted kets get zero.
    pub fn from_labels(basis: Basis, terms: &[(&str, C64)]) -> Result<Self> {
        let mut s = Self::zero(basis);
        for (label, a) in terms {
            let i = s.basis.index_of(label)?;
            s.amplitudes[i] += *a;
        }
        Ok(s)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: &str) -> Result<C64> {
        Ok(self.amplitudes[self.basis.index_of(label)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() < tol
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        self.basis.ensure_same(&other.basis, "add")?;
        Ok(Self {
            basis: self.basis.clone(),
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.basis.ensure_same(&other.basis, "compare")?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, l) in self.amplitudes.iter().zip(self.basis.labels()) {
            if a.norm() < 1e-15 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{}>", a.re, a.im, l)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// What an operator has been verified to be at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Unitary,
    Projector,
}

/// Dense square matrix acting on a labelled space, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    basis: Basis,
    matrix: Vec<C64>,
    kind: OperatorKind,
}

impl Operator {
    pub fn from_matrix(basis: Basis, matrix: Vec<C64>) -> Result<Self> {
        let n = basis.dim();
        if matrix.len() != n * n {
            return Err(HilbertError::DimensionMismatch(format!(
                "{} entries for a {n}x{n} operator",
                matrix.len()
            )));
        }
        Ok(Self {
            basis,
            matrix,
            kind: OperatorKind::General,
        })
    }

    /// Operator whose j-th column is `images[j]`, i.e. the linear map sending
    /// basis ket j to `images[j]`.
    pub fn from_images(basis: Basis, images: &[StateVector]) -> Result<Self> {
        let n = basis.dim();
        if images.len() != n {
            return Err(HilbertError::DimensionMismatch(format!(
                "{} images for a {n}-dimensional basis",
                images.len()
            )));
        }
        let mut matrix = vec![ZERO; n * n];
        for (j, img) in images.iter().enumerate() {
            basis.ensure_same(img.basis(), "from_images")?;
            for (i, a) in img.amplitudes().iter().enumerate() {
                matrix[i * n + j] = *a;
            }
        }
        Self::from_matrix(basis, matrix)
    }

    pub fn identity(basis: Basis) -> Self {
        let n = basis.dim();
        let mut matrix = vec![ZERO; n * n];
        for i in 0..n {
            matrix[i * n + i] = ONE;
        }
        Self {
            basis,
            matrix,
            kind: OperatorKind::Unitary,
        }
    }

    pub fn zero(basis: Basis) -> Self {
        let n = basis.dim();
        Self {
            basis,
            matrix: vec![ZERO; n * n],
            kind: OperatorKind::General,
        }
    }

    /// Verifies unitarity at [`TAG_TOL`] and tags the operator.
    pub fn into_unitary(mut self) -> Result<Self> {
        let deviation = self.unitarity_deviation();
        if deviation >= TAG_TOL {
            return Err(HilbertError::NotUnitary { deviation });
        }
        self.kind = OperatorKind::Unitary;
        Ok(self)
    }

    /// Verifies `P = P^dag` and `P^2 = P` at [`TAG_TOL`] and tags the operator.
    pub fn into_projector(mut self) -> Result<Self> {
        let deviation = self.projector_deviation();
        if deviation >= TAG_TOL {
            return Err(HilbertError::NotProjector { deviation });
        }
        self.kind = OperatorKind::Projector;
        Ok(self)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        let mut matrix = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[j * n + i] = self.matrix[i * n + j].conj();
            }
        }
        let kind = match self.kind {
            OperatorKind::Unitary | OperatorKind::Projector => self.kind,
            OperatorKind::General => OperatorKind::General,
        };
        Self {
            basis: self.basis.clone(),
            matrix,
            kind,
        }
    }

    /// Operator product `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        self.basis.ensure_same(&rhs.basis, "compose")?;
        let n = self.dim();
        let mut matrix = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.matrix[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    matrix[i * n + j] += a * rhs.matrix[k * n + j];
                }
            }
        }
        let kind = if self.kind == OperatorKind::Unitary && rhs.kind == OperatorKind::Unitary {
            OperatorKind::Unitary
        } else {
            OperatorKind::General
        };
        Ok(Self {
            basis: self.basis.clone(),
            matrix,
            kind,
        })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        self.basis.ensure_same(&rhs.basis, "add")?;
        Ok(Self {
            basis: self.basis.clone(),
            matrix: self
                .matrix
                .iter()
                .zip(&rhs.matrix)
                .map(|(a, b)| a + b)
                .collect(),
            kind: OperatorKind::General,
        })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Self> {
        self.add(&rhs.scaled(C64::new(-1.0, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            basis: self.basis.clone(),
            matrix: self.matrix.iter().map(|a| a * factor).collect(),
            kind: OperatorKind::General,
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.basis.ensure_same(&other.basis, "compare")?;
        Ok(self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `max |U^dag U - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.matrix[k * n + i].conj() * self.matrix[k * n + j];
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// `max(max |P - P^dag|, max |P^2 - P|)`.
    pub fn projector_deviation(&self) -> f64 {
        let herm = self.max_abs_diff(&self.adjoint()).expect("same basis");
        let sq = self.compose(self).expect("same basis");
        let idem = sq.max_abs_diff(self).expect("same basis");
        herm.max(idem)
    }
}

/// `<a|b>`, conjugate-linear in the first argument.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.basis.ensure_same(&b.basis, "inner")?;
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

pub fn apply(op: &Operator, s: &StateVector) -> Result<StateVector> {
    op.basis.ensure_same(&s.basis, "apply")?;
    let n = op.dim();
    let amplitudes = (0..n)
        .map(|i| {
            op.matrix[i * n..(i + 1) * n]
                .iter()
                .zip(&s.amplitudes)
                .map(|(m, a)| m * a)
                .sum()
        })
        .collect();
    Ok(StateVector {
        basis: s.basis.clone(),
        amplitudes,
    })
}

/// The rank-one projector `|s><s|`.
pub fn projector_from(s: &StateVector) -> Result<Operator> {
    let norm = s.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(HilbertError::NotNormalized { norm });
    }
    let n = s.dim();
    let mut matrix = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            matrix[i * n + j] = s.amplitudes[i] * s.amplitudes[j].conj();
        }
    }
    Operator::from_matrix(s.basis.clone(), matrix)?.into_projector()
}

pub fn check_unitary(op: &Operator, tol: f64) -> bool {
    op.unitarity_deviation() < tol
}
