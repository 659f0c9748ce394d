use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::model::{hardcore_indicator, sufficient_stats, GibbsModel, Intensity};

/// Logistic regression design over quadrature points (data then dummies).
///
/// Columns are the trend regressors followed by one sufficient statistic per
/// interaction component. The response is 1 on data rows, and every row has
/// offset `-log rho(point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticDesign {
    names: Vec<String>,
    n_trend: usize,
    n_rows: usize,
    x: Vec<f64>,
    y: Vec<bool>,
    offset: Vec<f64>,
    excluded_data: usize,
}

impl LogisticDesign {
    /// Builds a design from raw parts; `x` is row-major.
    pub fn from_parts(names: Vec<String>, n_trend: usize, x: Vec<f64>, y: Vec<bool>, offset: Vec<f64>) -> Result<Self> {
        let p = names.len();
        let n = y.len();
        if n_trend > p || x.len() != n * p || offset.len() != n {
            return Err(Error::LengthMismatch {
                expected: n * p,
                found: x.len(),
            });
        }
        if x.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateFit("design contains non-finite values".into()));
        }
        let ones = y.iter().filter(|&&v| v).count();
        if ones == 0 {
            return Err(Error::DegenerateFit("no data rows".into()));
        }
        if ones == n {
            return Err(Error::DegenerateFit("no dummy rows".into()));
        }
        Ok(LogisticDesign {
            names,
            n_trend,
            n_rows: n,
            x,
            y,
            offset,
            excluded_data: 0,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn n_trend(&self) -> usize {
        self.n_trend
    }

    pub fn n_interaction(&self) -> usize {
        self.names.len() - self.n_trend
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn response(&self) -> &[bool] {
        &self.y
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn n_data_rows(&self) -> usize {
        self.y.iter().filter(|&&v| v).count()
    }

    pub fn n_dummy_rows(&self) -> usize {
        self.n_rows - self.n_data_rows()
    }

    /// Data points dropped because their hardcore indicator was 0.
    pub fn excluded_data(&self) -> usize {
        self.excluded_data
    }
}

/// Assembles the logistic design for `structure` (its interaction
/// strengths and trend coefficients are ignored).
///
/// `rho` is the dummy intensity. Sufficient statistics are always taken
/// against the data pattern; for a data point its own position is excluded.
/// Quadrature points whose hardcore indicator is 0 are dropped.
pub fn build_logistic_design(
    data: &PointPattern,
    dummies: &PointPattern,
    structure: &GibbsModel,
    rho: &dyn Intensity,
) -> Result<LogisticDesign> {
    let trend = structure.trend();
    let mut names = trend.coefficient_names();
    let n_trend = names.len();
    names.extend((1..=structure.n_components()).map(|j| format!("interaction_{j}")));
    let p = names.len();

    let hardcore = structure.hardcore();
    let pts = data.points();
    let mut x = Vec::with_capacity((data.len() + dummies.len()) * p);
    let mut y = Vec::with_capacity(data.len() + dummies.len());
    let mut offset = Vec::with_capacity(data.len() + dummies.len());
    let mut excluded_data = 0;

    let mut push_row = |u: &crate::geometry::StPoint, is_data: bool| -> Result<()> {
        let rate = rho.rate(u)?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::DegenerateFit(format!(
                "dummy intensity {rate} at ({}, {}, {}) is not positive",
                u.x, u.y, u.t
            )));
        }
        x.extend(trend.regressors(u)?);
        x.extend(sufficient_stats(u, pts, structure).into_iter().map(f64::from));
        y.push(is_data);
        offset.push(-rate.ln());
        Ok(())
    };

    for u in pts {
        if hardcore_indicator(u, pts, hardcore) {
            push_row(u, true)?;
        } else {
            excluded_data += 1;
        }
    }
    for u in dummies.points() {
        if hardcore_indicator(u, pts, hardcore) {
            push_row(u, false)?;
        }
    }
    let mut design = LogisticDesign::from_parts(names, n_trend, x, y, offset)?;
    design.excluded_data = excluded_data;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{StPoint, StWindow};
    use crate::model::{ConstantIntensity, Hardcore, InteractionComponent, TrendModel};

    fn pat(points: &[(f64, f64, f64)]) -> PointPattern {
        PointPattern::new(
            points.iter().map(|&(x, y, t)| StPoint::new(x, y, t)).collect(),
            StWindow::unit_cube(),
        )
        .unwrap()
    }

    #[test]
    fn poisson_structure_has_only_trend_columns() {
        let data = pat(&[(0.1, 0.1, 0.1), (0.2, 0.2, 0.2)]);
        let dummies = pat(&[(0.7, 0.7, 0.7)]);
        let m = GibbsModel::poisson(TrendModel::homogeneous(1.0));
        let d = build_logistic_design(&data, &dummies, &m, &ConstantIntensity(8.0)).unwrap();
        assert_eq!(d.names(), ["intercept"]);
        assert_eq!(d.n_rows(), 3);
        assert!((d.offset()[0] + 8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn toy_pattern_statistics_match_enumeration() {
        // Data: a and b are 0.03 apart in space and 0.02 in time; c is far.
        let data = pat(&[(0.30, 0.30, 0.30), (0.33, 0.30, 0.32), (0.80, 0.80, 0.80)]);
        // Dummy d1 is within (0.05, 0.05) of both a and b; d2 sees only c.
        let dummies = pat(&[(0.31, 0.32, 0.31), (0.80, 0.84, 0.78)]);
        let m = GibbsModel::new(
            TrendModel::homogeneous(1.0),
            vec![InteractionComponent::strauss(1.0, 0.05, 0.05)],
            Hardcore::NONE,
        )
        .unwrap();
        let d = build_logistic_design(&data, &dummies, &m, &ConstantIntensity(10.0)).unwrap();
        let s: Vec<f64> = (0..d.n_rows()).map(|i| d.row(i)[1]).collect();
        assert_eq!(s, vec![1.0, 1.0, 0.0, 2.0, 1.0]);
        assert_eq!(d.response(), [true, true, true, false, false]);
    }

    #[test]
    fn isolated_point_has_zero_statistics() {
        let data = pat(&[(0.1, 0.1, 0.1), (0.9, 0.9, 0.9)]);
        let dummies = pat(&[(0.5, 0.5, 0.5)]);
        let m = GibbsModel::new(
            TrendModel::homogeneous(1.0),
            vec![
                InteractionComponent::strauss(1.0, 0.05, 0.05),
                InteractionComponent::strauss(1.0, 0.1, 0.1),
            ],
            Hardcore::NONE,
        )
        .unwrap();
        let d = build_logistic_design(&data, &dummies, &m, &ConstantIntensity(3.0)).unwrap();
        assert_eq!(&d.row(0)[1..], &[0.0, 0.0]);
    }

    #[test]
    fn hardcore_rows_are_dropped() {
        let data = pat(&[(0.5, 0.5, 0.5), (0.505, 0.5, 0.5), (0.1, 0.1, 0.1)]);
        let dummies = pat(&[(0.501, 0.5, 0.5), (0.9, 0.9, 0.9)]);
        let m = GibbsModel::new(
            TrendModel::homogeneous(1.0),
            vec![InteractionComponent::strauss(1.0, 0.05, 0.05)],
            Hardcore::new(0.01, 0.01),
        )
        .unwrap();
        let d = build_logistic_design(&data, &dummies, &m, &ConstantIntensity(3.0)).unwrap();
        assert_eq!(d.excluded_data(), 2);
        assert_eq!(d.n_data_rows(), 1);
        assert_eq!(d.n_dummy_rows(), 1);
    }

    #[test]
    fn empty_data_is_degenerate() {
        let data = pat(&[]);
        let dummies = pat(&[(0.5, 0.5, 0.5)]);
        let m = GibbsModel::poisson(TrendModel::homogeneous(1.0));
        let err = build_logistic_design(&data, &dummies, &m, &ConstantIntensity(3.0)).unwrap_err();
        assert!(err.to_string().contains("degenerate logistic fit"));
        let err = build_logistic_design(&dummies, &data, &m, &ConstantIntensity(3.0)).unwrap_err();
        assert!(err.to_string().contains("no dummy rows"));
    }
}
