//! First-order jets of matrix- and scalar-valued fields on the chart:
//! a value together with its raw coordinate derivatives along the n_P
//! Q-directions followed by the n_V f-directions. Product/inverse rules
//! propagate the derivatives through the frame assembly.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct MJet {
    pub v: DMatrix<f64>,
    pub d: Vec<DMatrix<f64>>,
}

impl MJet {
    pub fn constant(v: DMatrix<f64>, ndirs: usize) -> Self {
        let (r, c) = v.shape();
        Self {
            v,
            d: vec![DMatrix::zeros(r, c); ndirs],
        }
    }

    pub fn new(v: DMatrix<f64>, d: Vec<DMatrix<f64>>) -> Self {
        Self { v, d }
    }

    pub fn ndirs(&self) -> usize {
        self.d.len()
    }

    pub fn mul(&self, rhs: &MJet) -> MJet {
        let v = &self.v * &rhs.v;
        let d = self
            .d
            .iter()
            .zip(&rhs.d)
            .map(|(da, db)| da * &rhs.v + &self.v * db)
            .collect();
        MJet { v, d }
    }

    pub fn add(&self, rhs: &MJet) -> MJet {
        MJet {
            v: &self.v + &rhs.v,
            d: self.d.iter().zip(&rhs.d).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &MJet) -> MJet {
        MJet {
            v: &self.v - &rhs.v,
            d: self.d.iter().zip(&rhs.d).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> MJet {
        MJet {
            v: -&self.v,
            d: self.d.iter().map(|a| -a).collect(),
        }
    }

    pub fn transpose(&self) -> MJet {
        MJet {
            v: self.v.transpose(),
            d: self.d.iter().map(|a| a.transpose()).collect(),
        }
    }

    /// Inverse jet; returns None when the value is not invertible.
    pub fn inverse(&self) -> Option<MJet> {
        let vi = self.v.clone().try_inverse()?;
        let d = self
            .d
            .iter()
            .map(|da| -(&vi * da * &vi))
            .collect();
        Some(MJet { v: vi, d })
    }

    /// Scale by a scalar jet.
    pub fn scale(&self, s: &SJet) -> MJet {
        MJet {
            v: &self.v * s.v,
            d: self
                .d
                .iter()
                .zip(&s.d)
                .map(|(da, ds)| da * s.v + &self.v * *ds)
                .collect(),
        }
    }

    /// log det of a positive-definite value.
    pub fn log_det(&self) -> Option<SJet> {
        let chol = self.v.clone().cholesky()?;
        let ld = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let vi = chol.inverse();
        let d = self.d.iter().map(|da| (&vi * da).trace()).collect();
        Some(SJet { v: ld, d })
    }

    /// Determinant jet (general square value).
    pub fn det(&self) -> Option<SJet> {
        let vi = self.v.clone().try_inverse()?;
        let det = self.v.determinant();
        let d = self.d.iter().map(|da| det * (&vi * da).trace()).collect();
        Some(SJet { v: det, d })
    }
}

#[derive(Debug, Clone)]
pub struct SJet {
    pub v: f64,
    pub d: Vec<f64>,
}

impl SJet {
    pub fn constant(v: f64, ndirs: usize) -> Self {
        Self {
            v,
            d: vec![0.0; ndirs],
        }
    }

    pub fn mul(&self, rhs: &SJet) -> SJet {
        SJet {
            v: self.v * rhs.v,
            d: self
                .d
                .iter()
                .zip(&rhs.d)
                .map(|(a, b)| a * rhs.v + self.v * b)
                .collect(),
        }
    }

    pub fn sqrt(&self) -> SJet {
        let r = self.v.sqrt();
        SJet {
            v: r,
            d: self.d.iter().map(|a| 0.5 * a / r).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_jet_matches_fd() {
        // M(t) = A + t B around t = 0, one direction
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.1, -0.4, 0.2, 0.3]);
        let jet = MJet::new(a.clone(), vec![b.clone()]);
        let inv = jet.inverse().unwrap();
        let h = 1e-6;
        let fp = (&a + &b * h).try_inverse().unwrap();
        let fm = (&a - &b * h).try_inverse().unwrap();
        let fd = (fp - fm) / (2.0 * h);
        assert_abs_diff_eq!(inv.d[0], fd, epsilon = 1e-9);
    }

    #[test]
    fn logdet_jet_matches_fd() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.1, -0.4, -0.4, 0.3]);
        let jet = MJet::new(a.clone(), vec![b.clone()]);
        let ld = jet.log_det().unwrap();
        let h = 1e-6;
        let fd = ((&a + &b * h).determinant().ln() - (&a - &b * h).determinant().ln()) / (2.0 * h);
        assert_abs_diff_eq!(ld.d[0], fd, epsilon = 1e-9);
    }
}
