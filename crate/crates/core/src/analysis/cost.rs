//! Memory and operation-count formulas for conv and dense layers.
//!
//! Conv: `|w| = k (c w h + 1) p`, `IIM = c M N p`,
//! `GOM = k (M - w + s)(N - h + s) / s^2 * p`, `TOSC = IIM + |w| + 2 GOM`,
//! `NOpL = (c w h)(M - w + s)(N - h + s) k / s^2`,
//! `TOpL = 2 (c w h)(M - w + s)(N - h + s) / s^2`.
//! Dense: `TSpDL = (|grad w| + |w| + 2n + 2m) p` with `|w| = n m + m`, ops `2 n m`.
//!
//! Non-integral quotients are floored once, after the full product.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Conv,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCostInputs {
    pub kind: CostKind,
    /// Kernels.
    pub k: u64,
    /// Input channels.
    pub c: u64,
    /// Kernel width and height.
    pub w: u64,
    pub h: u64,
    pub s: u64,
    /// Input spatial dims (rows, columns).
    pub m: u64,
    pub n_cols: u64,
    /// Dense input and output neurons.
    pub n: u64,
    pub m_o: u64,
    /// Bytes per element.
    pub p: u64,
}

pub const F64_BYTES: u64 = 8;

impl LayerCostInputs {
    #[allow(clippy::too_many_arguments)]
    pub fn conv(k: u64, c: u64, w: u64, h: u64, s: u64, m: u64, n_cols: u64) -> Self {
        Self { kind: CostKind::Conv, k, c, w, h, s, m, n_cols, n: 0, m_o: 0, p: F64_BYTES }
    }

    pub fn dense(n: u64, m_o: u64) -> Self {
        Self { kind: CostKind::Dense, k: 0, c: 0, w: 0, h: 0, s: 0, m: 0, n_cols: 0, n, m_o, p: F64_BYTES }
    }

    pub fn with_bytes(mut self, p: u64) -> Self {
        self.p = p;
        self
    }

    fn expect(&self, kind: CostKind, op: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::input(format!("{op} needs a {kind:?} layer, got {:?}", self.kind)));
        }
        Ok(())
    }

    /// `(M - w + s, N - h + s)`, both required positive.
    fn effective(&self) -> Result<(u64, u64)> {
        if self.s == 0 {
            return Err(Error::input("stride must be positive"));
        }
        let a = (self.m + self.s).checked_sub(self.w).filter(|&v| v > 0);
        let b = (self.n_cols + self.s).checked_sub(self.h).filter(|&v| v > 0);
        match (a, b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::input(format!(
                "kernel {}x{} with stride {} leaves no output on a {}x{} input",
                self.w, self.h, self.s, self.m, self.n_cols
            ))),
        }
    }
}

fn mul(values: &[u64]) -> Result<u64> {
    values
        .iter()
        .try_fold(1u64, |acc, &v| acc.checked_mul(v))
        .ok_or_else(|| Error::input("cost overflows 64 bits"))
}

pub fn conv_params(i: &LayerCostInputs) -> Result<u64> {
    i.expect(CostKind::Conv, "conv_params")?;
    mul(&[i.k, mul(&[i.c, i.w, i.h])? + 1])
}

pub fn dense_params(i: &LayerCostInputs) -> Result<u64> {
    i.expect(CostKind::Dense, "dense_params")?;
    Ok(mul(&[i.n, i.m_o])? + i.m_o)
}

/// `k (c w h + 1) p`
pub fn weight_memory(i: &LayerCostInputs) -> Result<u64> {
    mul(&[conv_params(i)?, i.p])
}

/// `c M N p`
pub fn input_image_memory(i: &LayerCostInputs) -> Result<u64> {
    i.expect(CostKind::Conv, "input_image_memory")?;
    mul(&[i.c, i.m, i.n_cols, i.p])
}

/// `floor(k (M - w + s)(N - h + s) p / s^2)`
pub fn generated_output_memory(i: &LayerCostInputs) -> Result<u64> {
    i.expect(CostKind::Conv, "generated_output_memory")?;
    let (a, b) = i.effective()?;
    Ok(mul(&[i.k, a, b, i.p])? / (i.s * i.s))
}

/// `IIM + |w| + 2 GOM`
pub fn total_operational_space(i: &LayerCostInputs) -> Result<u64> {
    Ok(input_image_memory(i)? + weight_memory(i)? + 2 * generated_output_memory(i)?)
}

/// Dense-layer space with `2n + 2m_o` neuron storage.
pub fn dense_space(i: &LayerCostInputs) -> Result<u64> {
    let w = dense_params(i)?;
    mul(&[2 * w + 2 * i.n + 2 * i.m_o, i.p])
}

/// Variant with `2m_o` in place of `2n`; this is the form that reproduces
/// the published Dense-1 figure.
pub fn dense_space_compat(i: &LayerCostInputs) -> Result<u64> {
    let w = dense_params(i)?;
    mul(&[2 * w + 4 * i.m_o, i.p])
}

/// `floor((c w h)(M - w + s)(N - h + s) k / s^2)`
pub fn conv_nopl(i: &LayerCostInputs) -> Result<u64> {
    i.expect(CostKind::Conv, "conv_nopl")?;
    let (a, b) = i.effective()?;
    Ok(mul(&[i.c, i.w, i.h, a, b, i.k])? / (i.s * i.s))
}

/// Exact `2 (c w h)(M - w + s)(N - h + s) / s^2`.
pub fn conv_topl_exact(i: &LayerCostInputs) -> Result<Ratio<u64>> {
    i.expect(CostKind::Conv, "conv_topl")?;
    let (a, b) = i.effective()?;
    Ok(Ratio::new(mul(&[2, i.c, i.w, i.h, a, b])?, i.s * i.s))
}

pub fn conv_topl(i: &LayerCostInputs) -> Result<u64> {
    Ok(conv_topl_exact(i)?.to_integer())
}

/// `2 n m_o`
pub fn dense_ops(i: &LayerCostInputs) -> Result<u64> {
    i.expect(CostKind::Dense, "dense_ops")?;
    mul(&[2, i.n, i.m_o])
}

/// Which spatial dimension [`asymptotic_check`] varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    M,
    N,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearityReport {
    pub dimension: Dimension,
    pub base: u64,
    /// TOpL at `d, 2d, 3d, 4d`.
    pub values: [Ratio<u64>; 4],
    /// `TOpL(2d) - TOpL(d)` over `d`.
    pub slope: Ratio<u64>,
    /// `G (N - b)` (or `G (M - a)`), with `G = 2 c w h / s^2`, `a = w - s`, `b = h - s`.
    pub expected_slope: Ratio<u64>,
    /// Equal first differences over the four points.
    pub affine: bool,
}

/// Evaluates TOpL at `d, 2d, 3d, 4d` along one dimension, with the other
/// fixed, and checks that it is affine there with the predicted slope.
pub fn asymptotic_check(i: &LayerCostInputs, dimension: Dimension) -> Result<LinearityReport> {
    i.expect(CostKind::Conv, "asymptotic_check")?;
    let base = match dimension {
        Dimension::M => i.m,
        Dimension::N => i.n_cols,
    };
    let at = |mult: u64| {
        let mut j = *i;
        match dimension {
            Dimension::M => j.m = base * mult,
            Dimension::N => j.n_cols = base * mult,
        }
        conv_topl_exact(&j)
    };
    let values = [at(1)?, at(2)?, at(3)?, at(4)?];
    let diffs = [values[1] - values[0], values[2] - values[1], values[3] - values[2]];
    let affine = diffs.iter().all(|&d| d == diffs[0]);
    let (a, b) = i.effective()?;
    let g = Ratio::new(2 * i.c * i.w * i.h, i.s * i.s);
    let other = match dimension {
        Dimension::M => b,
        Dimension::N => a,
    };
    Ok(LinearityReport {
        dimension,
        base,
        values,
        slope: diffs[0] / Ratio::from_integer(base.max(1)),
        expected_slope: g * Ratio::from_integer(other),
        affine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> LayerCostInputs {
        LayerCostInputs::conv(1, 1, 1, 1, 1, 1, 1)
    }

    #[test]
    fn unit_cases() {
        assert_eq!(weight_memory(&unit()).unwrap(), 16);
        assert_eq!(input_image_memory(&unit()).unwrap(), 8);
        assert_eq!(generated_output_memory(&unit()).unwrap(), 8);
        assert_eq!(total_operational_space(&unit()).unwrap(), 40);
        assert_eq!(dense_space(&LayerCostInputs::dense(1, 1)).unwrap(), 64);
    }

    #[test]
    fn wrong_kind() {
        assert!(weight_memory(&LayerCostInputs::dense(4, 2)).is_err());
        assert!(dense_ops(&unit()).is_err());
    }

    #[test]
    fn empty_output_rejected() {
        let i = LayerCostInputs::conv(1, 1, 5, 5, 1, 3, 3);
        assert!(generated_output_memory(&i).is_err());
    }

    #[test]
    fn stride_one_unit_kernel_collapses() {
        let i = LayerCostInputs::conv(4, 2, 1, 1, 1, 7, 9);
        assert_eq!(generated_output_memory(&i).unwrap(), 4 * 7 * 9 * 8);
        assert_eq!(conv_topl(&i).unwrap(), 2 * 2 * 7 * 9);
    }
}
