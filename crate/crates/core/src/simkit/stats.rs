use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("both standard deviations are zero")]
    ZeroVariance,
    #[error("no samples")]
    Empty,
}

pub fn mean(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation (divides by `n`).
pub fn population_std(xs: &[f64]) -> Result<f64, StatsError> {
    let m = mean(xs)?;
    Ok((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt())
}

/// Equal-n pooled standardized mean difference `(m1 - m2) / sqrt((s1^2 + s2^2) / 2)`.
pub fn cohens_d(mean1: f64, std1: f64, mean2: f64, std2: f64) -> Result<f64, StatsError> {
    let pooled = (0.5 * (std1 * std1 + std2 * std2)).sqrt();
    if pooled == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((mean1 - mean2) / pooled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let d = cohens_d(11.4, 5.004, 4.0, 1.096).unwrap();
        assert!((d - 2.043).abs() < 0.005, "{d}");
        let d = cohens_d(7.8, 3.763, 1.8, 0.4).unwrap();
        assert!((d - 2.242).abs() < 0.005, "{d}");
    }

    #[test]
    fn equal_means_and_zero_variance() {
        assert_eq!(cohens_d(3.0, 1.0, 3.0, 2.0).unwrap(), 0.0);
        assert_eq!(cohens_d(3.0, 0.0, 1.0, 0.0), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn population_moments() {
        let xs = [2.0, 2.0, 2.0, 2.0, 1.0];
        assert!((mean(&xs).unwrap() - 1.8).abs() < 1e-12);
        assert!((population_std(&xs).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(mean(&[]), Err(StatsError::Empty));
    }
}
