//! Hilbert and Thompson projective metrics on the positive orthant, and the
//! component maps whose composition drives the bridge iteration.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{BridgeError, Result};
use crate::graph::{PositivityMode, ProductKernel};

/// Tolerance on the unit mass of a probability vector.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// A vector in the interior of the positive orthant.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveVector(Array1<f64>);

impl PositiveVector {
    pub fn new(entries: Array1<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(BridgeError::Input("empty vector".into()));
        }
        if let Some((i, v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(BridgeError::Domain(format!(
                "entry {} = {v} is not strictly positive and finite",
                i + 1
            )));
        }
        Ok(Self(entries))
    }

    pub fn ones(n: usize) -> Self {
        Self(Array1::ones(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    /// Scaled copy with unit 1-norm, plus the norm that was divided out.
    pub fn normalized(&self) -> (Self, f64) {
        let norm = self.0.sum();
        (Self(&self.0 / norm), norm)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.0 * c)
    }
}

impl std::ops::Index<usize> for PositiveVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn log_ratios(x: &PositiveVector, y: &PositiveVector) -> Result<Array1<f64>> {
    if x.len() != y.len() {
        return Err(BridgeError::Input(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.0
        .iter()
        .zip(y.0.iter())
        .map(|(a, b)| a.ln() - b.ln())
        .collect())
}

fn max_min(v: ArrayView1<f64>) -> (f64, f64) {
    v.iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &r| {
            (hi.max(r), lo.min(r))
        })
}

/// `log(max_i(x_i/y_i) / min_i(x_i/y_i))`, computed from log-ratios.
pub fn hilbert_distance(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    let r = log_ratios(x, y)?;
    let (hi, lo) = max_min(r.view());
    Ok((hi - lo).max(0.0))
}

/// `log max(max_i(x_i/y_i), max_i(y_i/x_i))`.
pub fn thompson_distance(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    let r = log_ratios(x, y)?;
    let (hi, lo) = max_min(r.view());
    Ok(hi.max(-lo).max(0.0))
}

fn check_probability(name: &str, v: &Array1<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(BridgeError::Input(format!(
            "{name} has length {}, expected {n}",
            v.len()
        )));
    }
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
    {
        return Err(BridgeError::Input(format!(
            "{name}({}) = {x} is negative",
            i + 1
        )));
    }
    let total = v.sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(BridgeError::Input(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

/// The composite map `x -> E^T(D_0(E(R_p(D_N(x)))))`.
///
/// `x` plays the role of the terminal co-potential: `D_N` and `R_p` produce
/// the terminal potential, `E` carries it back to time 0, `D_0` matches the
/// initial marginal and `E^T` carries the co-potential forward again.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedMap {
    kernel: Array2<f64>,
    kernel_t: Array2<f64>,
    nu0: Array1<f64>,
    nu_n: Array1<f64>,
    exponent: f64,
    mode: PositivityMode,
}

impl ComposedMap {
    /// `exponent` is `eta / (eta + 1)` and must lie in `[0, 1)`.
    pub fn new(
        kernel: &ProductKernel,
        nu0: Array1<f64>,
        nu_n: Array1<f64>,
        exponent: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&exponent) {
            return Err(BridgeError::Domain(format!(
                "exponent {exponent} outside [0, 1)"
            )));
        }
        Self::build(kernel, nu0, nu_n, exponent)
    }

    /// Exponent-one map of the classical bridge (hard terminal constraint).
    pub fn classical(kernel: &ProductKernel, nu0: Array1<f64>, nu_n: Array1<f64>) -> Result<Self> {
        Self::build(kernel, nu0, nu_n, 1.0)
    }

    fn build(
        kernel: &ProductKernel,
        nu0: Array1<f64>,
        nu_n: Array1<f64>,
        exponent: f64,
    ) -> Result<Self> {
        let n = kernel.matrix.nrows();
        check_probability("nu0", &nu0, n)?;
        check_probability("nuN", &nu_n, n)?;
        let mode = kernel.mode().ok_or_else(|| {
            BridgeError::Precondition("product kernel has an all-zero row or column".into())
        })?;
        Ok(Self {
            kernel: kernel.matrix.clone(),
            kernel_t: kernel.transpose(),
            nu0,
            nu_n,
            exponent,
            mode,
        })
    }

    pub fn n(&self) -> usize {
        self.nu0.len()
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn mode(&self) -> PositivityMode {
        self.mode
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn nu0(&self) -> &Array1<f64> {
        &self.nu0
    }

    pub fn nu_n(&self) -> &Array1<f64> {
        &self.nu_n
    }

    /// `y = K x`.
    pub fn apply_e(&self, x: &Array1<f64>) -> Result<PositiveVector> {
        positive_image(self.kernel.dot(x), "row")
    }

    /// `y = K^T x`.
    pub fn apply_e_adjoint(&self, x: &Array1<f64>) -> Result<PositiveVector> {
        positive_image(self.kernel_t.dot(x), "column")
    }

    /// Terminal potential `(nu_N / x)^p` for a terminal co-potential `x`.
    pub fn terminal_potential(&self, x: &PositiveVector) -> Result<Array1<f64>> {
        apply_r(&apply_d(&self.nu_n, x)?, self.exponent)
    }

    pub fn apply_c(&self, x: &PositiveVector) -> Result<PositiveVector> {
        let phi_n = self.terminal_potential(x)?;
        let phi_0 = self.apply_e(&phi_n)?;
        let phi_hat_0 = apply_d(&self.nu0, &phi_0)?;
        self.apply_e_adjoint(&phi_hat_0)
    }
}

fn positive_image(y: Array1<f64>, what: &str) -> Result<PositiveVector> {
    if let Some((i, _)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(BridgeError::Degeneracy(format!(
            "image entry {} is zero; kernel {what} {} has no support on the input",
            i + 1,
            i + 1
        )));
    }
    PositiveVector::new(y)
}

/// Componentwise `target_i / x_i`. Zero target mass yields zero output.
pub fn apply_d(target: &Array1<f64>, x: &PositiveVector) -> Result<Array1<f64>> {
    if target.len() != x.len() {
        return Err(BridgeError::Input(format!(
            "length mismatch: {} vs {}",
            target.len(),
            x.len()
        )));
    }
    if let Some((i, t)) = target.iter().enumerate().find(|(_, t)| !(**t >= 0.0)) {
        return Err(BridgeError::Domain(format!(
            "target({}) = {t} is negative",
            i + 1
        )));
    }
    Ok(target / x.as_array())
}

/// Componentwise power `x_i^p`, with `0^0 = 1`.
pub fn apply_r(x: &Array1<f64>, p: f64) -> Result<Array1<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BridgeError::Domain(format!("exponent {p} outside [0, 1]")));
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(BridgeError::Domain(format!(
            "entry {} = {v} is negative",
            i + 1
        )));
    }
    Ok(x.mapv(|v| if p == 0.0 { 1.0 } else { v.powf(p) }))
}

/// Projective diameter `max log(g_ij g_kl / (g_il g_kj))`; infinite if any entry is zero.
pub fn projective_diameter(k: &Array2<f64>) -> f64 {
    if k.iter().any(|&v| !(v > 0.0)) {
        return f64::INFINITY;
    }
    let logs = k.mapv(f64::ln);
    let n = k.nrows();
    let mut diameter = 0.0f64;
    // for a fixed row pair (i, k) the quadruple maximum separates into
    // max_j r_j - min_l r_l with r = log g_i. - log g_k.
    for i in 0..n {
        for kk in 0..n {
            if i == kk {
                continue;
            }
            let r = &logs.row(i) - &logs.row(kk);
            let (hi, lo) = max_min(r.view());
            diameter = diameter.max(hi - lo);
        }
    }
    diameter
}

/// Birkhoff contraction ratio `tanh(diameter / 4)`; 1 for an infinite diameter.
pub fn birkhoff_ratio(k: &Array2<f64>) -> f64 {
    let d = projective_diameter(k);
    if d.is_infinite() {
        1.0
    } else {
        (d / 4.0).tanh()
    }
}
