use nalgebra::{DMatrix, DVector};

use crate::match_data::WeightedObservation;

/// Which goal count is regressed on which covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Goals scored against the opponent's Elo and location.
    Scored,
    /// Goals conceded against the opponent's Elo and location.
    Conceded,
    /// Goals scored, additionally conditioned on the opponent's goals.
    Conditional,
}

impl Target {
    /// Number of regression coefficients including the intercept.
    pub fn n_coefficients(self) -> usize {
        match self {
            Target::Scored | Target::Conceded => 3,
            Target::Conditional => 4,
        }
    }

    pub fn response(self, obs: &WeightedObservation) -> u32 {
        match self {
            Target::Scored | Target::Conditional => obs.goals_for(),
            Target::Conceded => obs.goals_against(),
        }
    }

    /// Covariate row `[1, elo_opp, loc, (opp_goals)]`.
    pub fn row(self, obs: &WeightedObservation) -> Vec<f64> {
        let mut row = vec![1.0, obs.elo_opp(), obs.loc()];
        if self == Target::Conditional {
            row.push(f64::from(obs.goals_against()));
        }
        row
    }
}

/// Weighted regression data with an internal affine rescaling of the Elo column.
///
/// Coefficients are always reported on the raw covariate scale; the rescaling
/// only conditions the optimization.
#[derive(Debug, Clone)]
pub struct Design {
    /// Rescaled covariates, intercept in column 0.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Design {
    pub fn from_observations(observations: &[WeightedObservation], target: Target) -> Self {
        let rows: Vec<Vec<f64>> = observations.iter().map(|o| target.row(o)).collect();
        let y = observations.iter().map(|o| f64::from(target.response(o))).collect();
        let w = observations.iter().map(|o| o.weight).collect();
        Self::new(&rows, y, w)
    }

    /// `rows` carry the intercept in column 0 and the Elo covariate in column 1.
    pub fn new(rows: &[Vec<f64>], y: Vec<f64>, w: Vec<f64>) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(1, Vec::len);
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        if p > 1 && n > 0 {
            let mean = rows.iter().map(|r| r[1]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|r| (r[1] - mean).powi(2)).sum::<f64>() / n as f64;
            center[1] = mean;
            if var.sqrt() > 1e-12 {
                scale[1] = var.sqrt();
            }
        }
        let x = DMatrix::from_fn(n, p, |i, j| (rows[i][j] - center[j]) / scale[j]);
        Self {
            x,
            y,
            w,
            center,
            scale,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Columns (other than the intercept) with no spread in the data.
    pub fn constant_columns(&self) -> Vec<bool> {
        (0..self.p())
            .map(|j| {
                if j == 0 || self.n() == 0 {
                    return false;
                }
                let col = self.x.column(j);
                let first = col[0];
                col.iter().all(|v| (v - first).abs() < 1e-12)
            })
            .collect()
    }

    pub fn to_raw(&self, internal: &DVector<f64>) -> Vec<f64> {
        let mut raw: Vec<f64> = internal
            .iter()
            .zip(&self.scale)
            .map(|(c, s)| c / s)
            .collect();
        let shift: f64 = (1..self.p()).map(|j| raw[j] * self.center[j]).sum();
        raw[0] -= shift;
        raw
    }

    pub fn to_internal(&self, raw: &[f64]) -> DVector<f64> {
        let mut internal = DVector::from_fn(self.p(), |j, _| raw[j] * self.scale[j]);
        let shift: f64 = (1..self.p()).map(|j| raw[j] * self.center[j]).sum();
        internal[0] += shift;
        internal
    }

    /// Linear predictor on the internal scale for row `i`.
    pub fn eta(&self, coef: &DVector<f64>, i: usize) -> f64 {
        self.x.row(i).iter().zip(coef.iter()).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_internal_round_trip() {
        let rows = vec![
            vec![1.0, 1800.0, 1.0],
            vec![1.0, 2000.0, -1.0],
            vec![1.0, 1650.0, 0.0],
        ];
        let d = Design::new(&rows, vec![1.0, 0.0, 2.0], vec![1.0; 3]);
        let raw = vec![2.47, -0.00107, 0.27];
        let back = d.to_raw(&d.to_internal(&raw));
        for (a, b) in raw.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let internal = d.to_internal(&raw);
        for (i, r) in rows.iter().enumerate() {
            let direct: f64 = r.iter().zip(&raw).map(|(x, c)| x * c).sum();
            assert!((d.eta(&internal, i) - direct).abs() < 1e-10);
        }
    }
}
