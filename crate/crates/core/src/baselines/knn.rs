use crate::error::{Error, Result};

/// Euclidean k-nearest-neighbor majority vote.
///
/// Distance ties go to the lower training index, vote ties to the lower class.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    points: Vec<Vec<f64>>,
    labels: Vec<u8>,
    k: usize,
}

impl KnnModel {
    pub fn fit(points: Vec<Vec<f64>>, labels: Vec<u8>, k: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("empty training set".into()));
        }
        if points.len() != labels.len() {
            return Err(Error::Shape(format!("{} points, {} labels", points.len(), labels.len())));
        }
        if k == 0 || k > points.len() {
            return Err(Error::Config(format!("k = {k} must lie in 1..={}", points.len())));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("training points of mixed dimension".into()));
        }
        Ok(Self { points, labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn predict(&self, query: &[f64]) -> Result<u8> {
        if query.len() != self.points[0].len() {
            return Err(Error::Shape(format!(
                "query has dimension {}, model {}",
                query.len(),
                self.points[0].len()
            )));
        }
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let classes = *self.labels.iter().max().unwrap() as usize + 1;
        let mut votes = vec![0usize; classes];
        for &(_, i) in &dist[..self.k] {
            votes[self.labels[i] as usize] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Ok(best as u8)
    }

    pub fn predict_all(&self, queries: &[Vec<f64>]) -> Result<Vec<u8>> {
        queries.iter().map(|q| self.predict(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_training_point_wins_with_k1() {
        let m = KnnModel::fit(vec![vec![0.0], vec![5.0]], vec![0, 1], 1).unwrap();
        assert_eq!(m.predict(&[5.0]).unwrap(), 1);
        assert_eq!(m.predict(&[0.1]).unwrap(), 0);
    }

    #[test]
    fn majority_of_three() {
        let m = KnnModel::fit(vec![vec![1.0], vec![2.0], vec![3.0], vec![10.0]], vec![1, 1, 0, 0], 3).unwrap();
        assert_eq!(m.predict(&[2.0]).unwrap(), 1);
    }

    #[test]
    fn vote_tie_goes_to_lower_class() {
        let m = KnnModel::fit(vec![vec![1.0], vec![-1.0]], vec![1, 0], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn distance_tie_goes_to_lower_index() {
        let m = KnnModel::fit(vec![vec![1.0], vec![-1.0], vec![9.0]], vec![1, 0, 0], 1).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn invalid_fits() {
        assert!(KnnModel::fit(vec![], vec![], 1).is_err());
        assert!(KnnModel::fit(vec![vec![0.0]], vec![0], 2).is_err());
        assert!(KnnModel::fit(vec![vec![0.0]], vec![0], 0).is_err());
    }
}
