//! Market-neutral portfolios built from a linear factor model.
//!
//! With returns `dR = Λ dF + dX` and factors estimated as `dF = Λ̃ dR`, the
//! portfolio `p̃ᵢ = eᵢ - (row i of ΛΛ̃)` earns exactly `dXᵢ`. Holding `πᵢ`
//! units of each costs `π·p` dollars, where `pᵢ = p̃ᵢ·𝟙`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkernels::{from_rows, to_rows};
use crate::{Mat, Vector};

/// A matrix in a JSON document: either a list of rows or one flat row-major list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixRepr {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixRepr {
    pub fn to_mat(&self, nrows: usize, ncols: usize, what: &str) -> Result<Mat> {
        let m = match self {
            MatrixRepr::Rows(rows) => {
                if rows.is_empty() && nrows * ncols == 0 {
                    Mat::zeros(nrows, ncols)
                } else {
                    from_rows(rows, what)?
                }
            }
            MatrixRepr::Flat(v) => {
                if v.len() != nrows * ncols {
                    return Err(Error::invalid(format!(
                        "{what}: expected {} entries, got {}",
                        nrows * ncols,
                        v.len()
                    )));
                }
                Mat::from_row_slice(nrows, ncols, v)
            }
        };
        if m.shape() != (nrows, ncols) {
            return Err(Error::invalid(format!(
                "{what}: expected {nrows}x{ncols}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }

    pub fn from_mat(m: &Mat) -> Self {
        MatrixRepr::Rows(to_rows(m))
    }
}

/// JSON document for a [`FactorModel`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FactorModelDoc {
    pub n_assets: usize,
    pub n_factors: usize,
    pub loadings: MatrixRepr,
    pub regression: MatrixRepr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    /// Λ, `n_assets × n_factors`.
    loadings: Mat,
    /// Λ̃, `n_factors × n_assets`.
    regression: Mat,
}

impl FactorModel {
    pub fn new(loadings: Mat, regression: Mat) -> Result<Self> {
        let (n, k) = loadings.shape();
        if n == 0 {
            return Err(Error::invalid("factor model needs at least one asset"));
        }
        if regression.shape() != (k, n) {
            return Err(Error::invalid(format!(
                "regression matrix must be {k}x{n}, got {}x{}",
                regression.nrows(),
                regression.ncols()
            )));
        }
        if !loadings.iter().chain(regression.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("factor model has non-finite entries"));
        }
        Ok(Self { loadings, regression })
    }

    /// Λ = 0: returns are themselves the residuals.
    pub fn no_factors(n_assets: usize) -> Self {
        Self {
            loadings: Mat::zeros(n_assets, 0),
            regression: Mat::zeros(0, n_assets),
        }
    }

    pub fn from_doc(doc: &FactorModelDoc) -> Result<Self> {
        let loadings = doc.loadings.to_mat(doc.n_assets, doc.n_factors, "loadings")?;
        let regression = doc.regression.to_mat(doc.n_factors, doc.n_assets, "regression")?;
        Self::new(loadings, regression)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FactorModelDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> FactorModelDoc {
        FactorModelDoc {
            n_assets: self.n_assets(),
            n_factors: self.n_factors(),
            loadings: MatrixRepr::from_mat(&self.loadings),
            regression: MatrixRepr::from_mat(&self.regression),
        }
    }

    pub fn n_assets(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn loadings(&self) -> &Mat {
        &self.loadings
    }

    pub fn regression(&self) -> &Mat {
        &self.regression
    }

    /// Decomposes a return increment into `(dF, dX)` with `dF = Λ̃ dR` and
    /// `dX = dR - Λ dF`.
    pub fn decompose(&self, d_returns: &Vector) -> Result<(Vector, Vector)> {
        if d_returns.len() != self.n_assets() {
            return Err(Error::invalid("return vector length differs from n_assets"));
        }
        let d_factors = &self.regression * d_returns;
        let d_resid = d_returns - &self.loadings * &d_factors;
        Ok((d_factors, d_resid))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketNeutralBasis {
    /// `c_ik = Σ_j Λ̃_jk Λ_ij`.
    c_matrix: Mat,
    /// Row `i` holds the dollar holdings of portfolio `p̃ᵢ` in each asset.
    portfolios: Mat,
    /// Capital per unit of each portfolio.
    capital: Vector,
}

impl MarketNeutralBasis {
    pub fn c_matrix(&self) -> &Mat {
        &self.c_matrix
    }

    pub fn portfolios(&self) -> &Mat {
        &self.portfolios
    }

    pub fn capital(&self) -> &Vector {
        &self.capital
    }

    pub fn dim(&self) -> usize {
        self.capital.len()
    }

    /// Returns of the basis portfolios, `(p̃ᵢ·dR)ᵢ`.
    pub fn replication_check(&self, d_returns: &Vector) -> Result<Vector> {
        if d_returns.len() != self.dim() {
            return Err(Error::invalid("return vector length differs from basis size"));
        }
        Ok(&self.portfolios * d_returns)
    }

    /// Dollars deployed by holding `pi`: `π·p`.
    pub fn capital_of(&self, pi: &Vector) -> Result<f64> {
        if pi.len() != self.dim() {
            return Err(Error::invalid("portfolio length differs from basis size"));
        }
        Ok(pi.dot(&self.capital))
    }
}

pub fn build_basis(fm: &FactorModel) -> MarketNeutralBasis {
    let n = fm.n_assets();
    let c_matrix = fm.loadings() * fm.regression();
    let portfolios = Mat::identity(n, n) - &c_matrix;
    let capital = Vector::from_fn(n, |i, _| 1.0 - c_matrix.row(i).sum());
    MarketNeutralBasis {
        c_matrix,
        portfolios,
        capital,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_asset_model() -> FactorModel {
        FactorModel::new(
            Mat::from_row_slice(2, 1, &[1.0, 1.0]),
            Mat::from_row_slice(1, 2, &[0.5, 0.5]),
        )
        .unwrap()
    }

    fn random_model(n: usize, k: usize, seed: u64) -> FactorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = Mat::from_fn(n, k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let lt = Mat::from_fn(k, n, |_, _| (rng.random::<f64>() * 2.0 - 1.0) / n as f64);
        FactorModel::new(l, lt).unwrap()
    }

    #[test]
    fn zero_loadings_give_identity_basis() {
        let fm = FactorModel::new(Mat::zeros(3, 2), Mat::from_element(2, 3, 0.7)).unwrap();
        let b = build_basis(&fm);
        assert_eq!(b.c_matrix(), &Mat::zeros(3, 3));
        assert_eq!(b.portfolios(), &Mat::identity(3, 3));
        assert_eq!(b.capital(), &Vector::from_element(3, 1.0));
        let dr = Vector::from_vec(vec![0.3, -1.0, 2.5]);
        assert_eq!(b.replication_check(&dr).unwrap(), dr);
        let ones = Vector::from_element(100, 1.0);
        assert_eq!(build_basis(&FactorModel::no_factors(100)).capital_of(&ones).unwrap(), 100.0);
        assert_eq!(b.capital_of(&Vector::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn two_asset_hand_example() {
        let b = build_basis(&two_asset_model());
        assert_eq!(b.c_matrix(), &Mat::from_element(2, 2, 0.5));
        assert_eq!(b.portfolios().row(0).transpose(), Vector::from_vec(vec![0.5, -0.5]));
        assert_eq!(b.portfolios().row(1).transpose(), Vector::from_vec(vec![-0.5, 0.5]));
        assert_eq!(b.capital(), &Vector::zeros(2));
        let dr = Vector::from_vec(vec![1.0, 0.0]);
        let (df, dx) = two_asset_model().decompose(&dr).unwrap();
        assert_eq!(df[0], 0.5);
        assert_eq!(dx, Vector::from_vec(vec![0.5, -0.5]));
        assert_eq!(b.replication_check(&dr).unwrap(), dx);
        assert_eq!(b.capital_of(&Vector::from_vec(vec![3.0, -7.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_errors() {
        assert!(FactorModel::new(Mat::zeros(3, 2), Mat::zeros(3, 2)).is_err());
        let b = build_basis(&two_asset_model());
        assert!(b.replication_check(&Vector::zeros(3)).is_err());
        assert!(b.capital_of(&Vector::zeros(1)).is_err());
    }

    #[test]
    fn replication_at_desk_scale() {
        let fm = random_model(100, 5, 9);
        let b = build_basis(&fm);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let dr = Vector::from_fn(100, |_, _| rng.random::<f64>() - 0.5);
            let (_, dx) = fm.decompose(&dr).unwrap();
            let got = b.replication_check(&dr).unwrap();
            worst = worst.max((got - dx).amax());
        }
        assert!(worst < 1e-10, "{worst:e}");
    }

    #[test]
    fn json_round_trip_and_flat_form() {
        let fm = random_model(4, 2, 3);
        let text = serde_json::to_string(&fm.to_doc()).unwrap();
        assert_eq!(FactorModel::from_json(&text).unwrap(), fm);
        let flat = r#"{"n_assets":2,"n_factors":1,"loadings":[1,1],"regression":[0.5,0.5]}"#;
        assert_eq!(FactorModel::from_json(flat).unwrap(), two_asset_model());
        let bad = r#"{"n_assets":2,"n_factors":1,"loadings":[1,1],"regression":[0.5]}"#;
        assert!(FactorModel::from_json(bad).is_err());
        let unknown = r#"{"n_assets":2,"n_factors":1,"loadings":[1,1],"regression":[0.5,0.5],"x":1}"#;
        assert!(FactorModel::from_json(unknown).is_err());
    }

    proptest! {
        #[test]
        fn replication_is_exact(seed in 0u64..1000, n in 1usize..12, k in 0usize..4) {
            let fm = random_model(n, k, seed);
            let b = build_basis(&fm);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let dr = Vector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let want = &dr - fm.loadings() * (fm.regression() * &dr);
            let got = b.replication_check(&dr).unwrap();
            prop_assert!((got - want).amax() < 1e-12);
            for i in 0..n {
                let row_sum: f64 = b.c_matrix().row(i).sum();
                prop_assert!((b.capital()[i] - (1.0 - row_sum)).abs() < 1e-14);
                prop_assert!((b.capital()[i] - b.portfolios().row(i).sum()).abs() < 1e-12);
            }
        }
    }
}
