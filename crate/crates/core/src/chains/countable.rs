use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MarkovKernel, Observe};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Largest stationary mass a truncated kernel may drop.
pub const MAX_MASS_DEFICIT: f64 = 1e-14;

/// Row-stochastic sparse matrix on {0, …, K} with its stationary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CountableKernel<T> {
    rows: Vec<Vec<(usize, T)>>,
    pi: Vec<T>,
    log_pi: Vec<T>,
    cdf: Vec<T>,
    mass_deficit: T,
}

impl<T: Real> CountableKernel<T> {
    pub fn new(rows: Vec<Vec<(usize, T)>>, pi: Vec<T>, mass_deficit: T) -> Result<Self> {
        let log_pi = pi.iter().map(|p| p.ln()).collect();
        Self::build(rows, pi, log_pi, mass_deficit)
    }

    fn build(rows: Vec<Vec<(usize, T)>>, pi: Vec<T>, log_pi: Vec<T>, mass_deficit: T) -> Result<Self> {
        let n = rows.len();
        if n == 0 || pi.len() != n {
            return invalid(format!("{n} rows but {} stationary weights", pi.len()));
        }
        let tol_row = T::lit(1e-12);
        for (j, row) in rows.iter().enumerate() {
            let mut s = T::zero();
            for &(k, p) in row {
                if k >= n {
                    return invalid(format!("row {j} points to state {k} outside 0..{n}"));
                }
                if !(p >= T::zero()) {
                    return invalid(format!("negative transition probability in row {j}"));
                }
                s += p;
            }
            if (s - T::one()).abs() > tol_row {
                return invalid(format!("row {j} sums to {s}"));
            }
        }
        if pi.iter().any(|p| !(*p >= T::zero())) {
            return invalid("stationary weights must be nonnegative");
        }
        let total: T = pi.iter().copied().sum();
        if (total - T::one()).abs() > tol_row {
            return invalid(format!("stationary weights sum to {total}"));
        }
        let mut pi_p = vec![T::zero(); n];
        for (j, row) in rows.iter().enumerate() {
            for &(k, p) in row {
                pi_p[k] += pi[j] * p;
            }
        }
        let l1: T = pi_p.iter().zip(&pi).map(|(a, b)| (*a - *b).abs()).sum();
        if l1 > T::lit(1e-10) {
            return invalid(format!("stationarity defect {l1} in L1"));
        }
        let mut acc = T::zero();
        let cdf = pi
            .iter()
            .map(|p| {
                acc += *p;
                acc
            })
            .collect();
        Ok(CountableKernel { rows, pi, log_pi, cdf, mass_deficit })
    }

    /// Every row equal to π.
    pub fn iid(pi: Vec<T>) -> Result<Self> {
        let row: Vec<(usize, T)> = pi.iter().copied().enumerate().filter(|(_, p)| *p > T::zero()).collect();
        let rows = vec![row; pi.len()];
        Self::new(rows, pi, T::zero())
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, T)>] {
        &self.rows
    }

    pub fn pi(&self) -> &[T] {
        &self.pi
    }

    pub fn log_pi(&self) -> &[T] {
        &self.log_pi
    }

    pub fn mass_deficit(&self) -> T {
        self.mass_deficit
    }
}

impl<T: Real> MarkovKernel<T> for CountableKernel<T> {
    type State = usize;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let u = T::open_unit(rng);
        let i = self.cdf.partition_point(|c| *c < u);
        Ok(i.min(self.size() - 1))
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let row = &self.rows[x];
        let mut u = T::open_unit(rng);
        for &(k, p) in row {
            if u < p {
                return k;
            }
            u -= p;
        }
        row.last().map(|e| e.0).unwrap_or(x)
    }
}

/// Ψ given by a table over the states of a countable chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TableObservable<T>(pub Vec<T>);

impl<T: Real> Observe<usize, T> for TableObservable<T> {
    #[inline]
    fn psi(&self, s: &usize) -> T {
        self.0[*s]
    }
}

/// Backward recurrence time chain with P(T ≥ j) = γ^{j(j+1)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardRecurrenceSpec<T> {
    pub gamma: T,
}

impl<T: Real> BackwardRecurrenceSpec<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma < T::one()) {
            return invalid(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        Ok(BackwardRecurrenceSpec { gamma })
    }

    /// ln P(T ≥ j).
    pub fn log_tail(&self, j: usize) -> T {
        let jf = T::lit(j as f64);
        jf * (jf + T::one()) * T::lit(0.5) * self.gamma.ln()
    }

    pub fn tail(&self, j: usize) -> T {
        self.log_tail(j).exp()
    }

    /// P(T = j).
    pub fn prob(&self, j: usize) -> T {
        self.tail(j) * (T::one() - self.gamma.powi(j as i32 + 1))
    }

    /// E T = Σ_{j≥1} P(T ≥ j).
    pub fn expected_t(&self) -> T {
        let mut s = T::zero();
        for j in 1.. {
            let t = self.tail(j);
            s += t;
            if t <= s * T::epsilon() * T::lit(1e-3) || j > 10_000 {
                break;
            }
        }
        s
    }

    /// Stationary mass beyond state K.
    pub fn mass_beyond(&self, k: usize) -> T {
        let z = T::one() + self.expected_t();
        let mut s = T::zero();
        for j in k + 1.. {
            let t = self.tail(j) / z;
            s += t;
            if t <= s * T::epsilon() * T::lit(1e-3) || j > k + 10_000 {
                break;
            }
        }
        s
    }

    /// The two hypotheses under which the gap bound is proved:
    /// 3 E T < P(T = 0) and P(T ≥ 1) ≥ sup_k P(T ≥ k+1)/P(T ≥ k).
    pub fn gap_hypotheses_hold(&self) -> bool {
        let ratio_sup = self.gamma; // γ^{k+1} is largest at k = 0
        T::lit(3.0) * self.expected_t() < self.prob(0) && self.tail(1) >= ratio_sup
    }

    /// Smallest truncation whose stationary mass deficit is at most `target`.
    pub fn truncation_for(&self, target: T) -> usize {
        let mut k = 1;
        while self.mass_beyond(k) > target {
            k += 1;
        }
        k
    }
}

/// Truncation to {0, …, K}: the last row returns to 0, which keeps the
/// renormalized π exactly stationary.
pub fn backward_recurrence_kernel<T: Real>(spec: &BackwardRecurrenceSpec<T>, k: usize) -> Result<CountableKernel<T>> {
    BackwardRecurrenceSpec::new(spec.gamma)?;
    if k == 0 {
        return invalid("truncation K must be at least 1");
    }
    let deficit = spec.mass_beyond(k);
    if deficit > T::lit(MAX_MASS_DEFICIT) {
        return Err(Error::Config(format!(
            "truncation K = {k} drops stationary mass {deficit}; need K >= {}",
            spec.truncation_for(T::lit(MAX_MASS_DEFICIT))
        )));
    }
    let mut rows = Vec::with_capacity(k + 1);
    for j in 0..k {
        let up = spec.gamma.powi(j as i32 + 1);
        rows.push(vec![(0, T::one() - up), (j + 1, up)]);
    }
    rows.push(vec![(0, T::one())]);
    let log_z = (0..=k).map(|j| spec.tail(j)).sum::<T>().ln();
    let log_pi: Vec<T> = (0..=k).map(|j| spec.log_tail(j) - log_z).collect();
    let pi = log_pi.iter().map(|l| l.exp()).collect();
    CountableKernel::build(rows, pi, log_pi, deficit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_point_one() {
        let spec = BackwardRecurrenceSpec::new(0.1f64).unwrap();
        let et = spec.expected_t();
        // oracle: the series 0.1 + 0.001 + 1e-6 + 1e-10 + …
        let oracle: f64 = (1..12).map(|j| 10f64.powi(-(j * (j + 1) / 2))).sum();
        assert!((et - oracle).abs() < 1e-16);
        assert!((et - 0.101001).abs() < 1e-6);
        let kern = backward_recurrence_kernel(&spec, 30).unwrap();
        assert_eq!(kern.rows()[0], vec![(0, 0.9), (1, 0.1)]);
        assert!((kern.pi()[0] - 1.0 / (1.0 + et)).abs() < 1e-15);
        assert!(spec.gap_hypotheses_hold());
        for j in 0..30 {
            assert_eq!(kern.rows()[j][1].1, 0.1f64.powi(j as i32 + 1));
        }
    }

    #[test]
    fn small_truncation_rejected() {
        let spec = BackwardRecurrenceSpec::new(0.5f64).unwrap();
        assert!(matches!(backward_recurrence_kernel(&spec, 3), Err(Error::Config(_))));
        let k = spec.truncation_for(1e-14);
        assert!(backward_recurrence_kernel(&spec, k).is_ok());
    }

    #[test]
    fn invariants_checked() {
        assert!(CountableKernel::new(vec![vec![(0, 0.5)]], vec![1.0f64], 0.0).is_err());
        assert!(CountableKernel::new(vec![vec![(1, 1.0)], vec![(1, 1.0)]], vec![0.5f64, 0.5], 0.0).is_err());
        let k = CountableKernel::iid(vec![0.2f64, 0.3, 0.5]).unwrap();
        assert_eq!(k.rows()[1].len(), 3);
    }
}
