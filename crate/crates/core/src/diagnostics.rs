//! Operator diagnostics for countable kernels and the Gaussian AR(1) chain.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chains::{BackwardRecurrenceSpec, CountableKernel};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadValue, Tolerance};
use crate::scalar::Real;

/// (Pf)(j) = Σ_k p_{j,k} f(k).
pub fn apply_p<T: Real, V: QuadValue<T>>(kernel: &CountableKernel<T>, f: &[V]) -> Result<Vec<V>> {
    if f.len() != kernel.size() {
        return invalid(format!("vector of length {} for a kernel on {} states", f.len(), kernel.size()));
    }
    Ok(kernel.rows().iter().map(|row| row.iter().fold(V::zero(), |acc, &(k, p)| acc + f[k] * p)).collect())
}

/// ‖f‖_{L^q(π)}^q.
pub fn lq_norm_pow<T: Real, V: QuadValue<T>>(kernel: &CountableKernel<T>, f: &[V], q: T) -> T {
    kernel.pi().iter().zip(f).map(|(p, v)| *p * v.magnitude().powf(q)).sum()
}

pub fn l2_norm<T: Real, V: QuadValue<T>>(kernel: &CountableKernel<T>, f: &[V]) -> T {
    lq_norm_pow(kernel, f, T::lit(2.0)).sqrt()
}

/// π(f).
pub fn pi_mean<T: Real, V: QuadValue<T>>(kernel: &CountableKernel<T>, f: &[V]) -> V {
    kernel.pi().iter().zip(f).fold(V::zero(), |acc, (p, v)| acc + *v * *p)
}

/// Entries of D^{1/2} P D^{−1/2}, D = diag(π), as a sparse row list.
fn weighted_rows<T: Real>(kernel: &CountableKernel<T>) -> Vec<Vec<(usize, T)>> {
    let lp = kernel.log_pi();
    let half = T::lit(0.5);
    kernel
        .rows()
        .iter()
        .enumerate()
        .map(|(j, row)| {
            if lp[j] == T::neg_infinity() {
                return Vec::new();
            }
            row.iter()
                .filter(|(k, p)| *p > T::zero() && lp[*k] > T::neg_infinity())
                .map(|&(k, p)| (k, p * ((lp[j] - lp[k]) * half).exp()))
                .collect()
        })
        .collect()
}

fn mat_vec<T: Real>(rows: &[Vec<(usize, T)>], v: &[T], out: &mut [T]) {
    for (o, row) in out.iter_mut().zip(rows) {
        *o = row.iter().map(|&(k, m)| m * v[k]).sum();
    }
}

fn mat_t_vec<T: Real>(rows: &[Vec<(usize, T)>], v: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for (j, row) in rows.iter().enumerate() {
        for &(k, m) in row {
            out[k] += m * v[j];
        }
    }
}

fn norm2<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularValueEstimate<T> {
    pub value: T,
    /// ‖AᵀA v − σ² v‖ for the returned unit vector v.
    pub residual: T,
    pub iterations: usize,
}

/// Largest singular value of A by power iteration on AᵀA; `apply` computes A v
/// and `apply_t` computes Aᵀ w.
fn top_singular<T: Real>(
    n: usize,
    n_out: usize,
    mut apply: impl FnMut(&[T], &mut [T]),
    mut apply_t: impl FnMut(&[T], &mut [T]),
    rel_tol: T,
    certificate: T,
) -> Result<SingularValueEstimate<T>> {
    let mut v: Vec<T> = (0..n)
        .map(|j| T::one() / T::lit((j + 1) as f64).sqrt() * if j % 2 == 0 { T::one() } else { -T::one() })
        .collect();
    let mut w = vec![T::zero(); n_out];
    let mut z = vec![T::zero(); n];
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let mut log = Vec::new();
    let max_iter = 200_000;
    let mut lam = T::zero();
    let mut resid = T::infinity();
    for it in 1..=max_iter {
        apply(&v, &mut w);
        apply_t(&w, &mut z);
        lam = v.iter().zip(&z).map(|(a, b)| *a * *b).sum();
        resid = v.iter().zip(&z).map(|(a, b)| (*b - lam * *a).powi(2)).sum::<T>().sqrt();
        let nz = norm2(&z);
        if nz == T::zero() {
            return Ok(SingularValueEstimate { value: T::zero(), residual: T::zero(), iterations: it });
        }
        if resid <= rel_tol * lam.abs() || resid <= T::min_positive_value() {
            return Ok(SingularValueEstimate { value: lam.max(T::zero()).sqrt(), residual: resid, iterations: it });
        }
        if it % 1000 == 0 {
            log.push(format!("iter {it}: sigma^2 = {lam}, residual = {resid}"));
        }
        for (a, b) in v.iter_mut().zip(&z) {
            *a = *b / nz;
        }
    }
    if resid <= certificate {
        return Ok(SingularValueEstimate { value: lam.max(T::zero()).sqrt(), residual: resid, iterations: max_iter });
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge after {max_iter} iterations; log: {}",
        log.join("; ")
    )))
}

/// a = sup{‖Pf‖₂ : π(f) = 0, ‖f‖₂ ≤ 1}, the norm of P on L²₀(π).
pub fn operator_norm_l20<T: Real>(kernel: &CountableKernel<T>) -> Result<SingularValueEstimate<T>> {
    let rows = weighted_rows(kernel);
    let u: Vec<T> = kernel.log_pi().iter().map(|l| (*l * T::lit(0.5)).exp()).collect();
    let n = kernel.size();
    let deflate = |v: &mut [T]| {
        let c: T = v.iter().zip(&u).map(|(a, b)| *a * *b).sum();
        v.iter_mut().zip(&u).for_each(|(a, b)| *a -= c * *b);
    };
    let mut buf = vec![T::zero(); n];
    let mut buf_t = vec![T::zero(); n];
    let est = top_singular(
        n,
        n,
        |v, out| {
            buf.copy_from_slice(v);
            deflate(&mut buf);
            mat_vec(&rows, &buf, out);
            deflate(out);
        },
        |w, out| {
            buf_t.copy_from_slice(w);
            deflate(&mut buf_t);
            mat_t_vec(&rows, &buf_t, out);
            deflate(out);
        },
        T::lit(1e-13).max(T::tol_floor()),
        T::lit(1e-8),
    )?;
    Ok(est)
}

/// sup_{‖f‖₂ ≤ 1} Σ_{j ≥ k} |Pf(j)|² π(j).
pub fn ui2_tail_sup<T: Real>(kernel: &CountableKernel<T>, k: usize) -> Result<T> {
    let rows = weighted_rows(kernel);
    let n = kernel.size();
    let tail: Vec<Vec<(usize, T)>> = rows.into_iter().skip(k).collect();
    let est = top_singular(
        n,
        tail.len(),
        |v, out| mat_vec(&tail, v, out),
        |w, out| mat_t_vec(&tail, w, out),
        T::lit(1e-12).max(T::tol_floor()),
        T::lit(1e-8),
    )?;
    Ok(est.value * est.value)
}

/// 2 P(T ≥ k) + 2 Σ_{j ≥ k} γ^{j+1}.
pub fn ui2_tail_bound<T: Real>(spec: &BackwardRecurrenceSpec<T>, k: usize) -> T {
    let g = spec.gamma;
    let two = T::lit(2.0);
    two * spec.tail(k) + two * g.powi(k as i32 + 1) / (T::one() - g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ui2Point<T> {
    pub k: usize,
    pub numeric: T,
    pub bound: T,
}

pub fn ui2_tail_curve<T: Real>(
    spec: &BackwardRecurrenceSpec<T>,
    kernel: &CountableKernel<T>,
    ks: impl IntoIterator<Item = usize>,
) -> Result<Vec<Ui2Point<T>>> {
    ks.into_iter()
        .map(|k| Ok(Ui2Point { k, numeric: ui2_tail_sup(kernel, k)?, bound: ui2_tail_bound(spec, k) }))
        .collect()
}

/// w(k) = qk(k+1)/4 − (q−1)k(k−1)/2.
pub fn hyper_weight<T: Real>(q: T, k: usize) -> T {
    let kf = T::lit(k as f64);
    q * kf * (kf + T::one()) / T::lit(4.0) - (q - T::one()) * kf * (kf - T::one()) / T::lit(2.0)
}

/// ln ‖P f_k‖_q^q = (q/2 − 1) ln(1 + E T) + w(k) ln γ.
pub fn hyper_norm_fk<T: Real>(gamma: T, q: T, k: usize) -> Result<T> {
    let spec = BackwardRecurrenceSpec::new(gamma)?;
    if !(q > T::lit(2.0)) {
        return invalid(format!("q must exceed 2, got {q}"));
    }
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let half = T::lit(0.5);
    Ok((q * half - T::one()) * (T::one() + spec.expected_t()).ln() + hyper_weight(q, k) * gamma.ln())
}

/// f_k = √((1 + E T)/P(T ≥ k)) · 1{k}.
pub fn hyper_test_function<T: Real>(spec: &BackwardRecurrenceSpec<T>, size: usize, k: usize) -> Vec<T> {
    let mut f = vec![T::zero(); size];
    if k < size {
        f[k] = (((T::one() + spec.expected_t()).ln() - spec.log_tail(k)) * T::lit(0.5)).exp();
    }
    f
}

/// ln ‖P f_k‖_q^q evaluated through `apply_p`.
pub fn hyper_norm_fk_direct<T: Real>(
    spec: &BackwardRecurrenceSpec<T>,
    kernel: &CountableKernel<T>,
    q: T,
    k: usize,
) -> Result<T> {
    let f = hyper_test_function(spec, kernel.size(), k);
    let pf = apply_p(kernel, &f)?;
    let terms: Vec<T> = kernel
        .log_pi()
        .iter()
        .zip(&pf)
        .filter(|(_, v)| **v != T::zero())
        .map(|(lp, v)| *lp + q * v.abs().ln())
        .collect();
    let m = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return Err(Error::Numeric("P f_k vanishes identically".into()));
    }
    Ok(m + terms.iter().map(|t| (*t - m).exp()).sum::<T>().ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Divergent,
    Boundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ar1HyperIntegral<T> {
    pub verdict: Verdict,
    /// (1 − ρ)(1 + ρ − qρ) for ρ > 0 (with |ρ| in general); its sign decides.
    pub determinant_factor: T,
    /// Closed form (1 − ρ²)^{−q/2} / √det Q when finite.
    pub value: Option<T>,
    pub quadrature_r5: T,
    pub quadrature_r8: T,
    pub quadrature_verdict: Verdict,
}

/// ∫∫ π(dx) π(dy) p(x, y)^q for the Gaussian AR(1) kernel.
pub fn ar1_hyper_integral<T: Real>(rho: T, q: T) -> Result<Ar1HyperIntegral<T>> {
    if !(rho.abs() > T::zero() && rho.abs() < T::one()) {
        return invalid(format!("need 0 < |rho| < 1, got {rho}"));
    }
    if !(q > T::lit(2.0)) {
        return invalid(format!("q must exceed 2, got {q}"));
    }
    let r = rho.abs();
    let one = T::one();
    let v = one - rho * rho;
    let factor = (one - r) * (one + r - q * r);
    let det = factor * (one + r) * (one - r + q * r) / (v * v);
    let verdict = if factor.abs() <= T::lit(1e-12) {
        Verdict::Boundary
    } else if factor > T::zero() {
        Verdict::Finite
    } else {
        Verdict::Divergent
    };
    let value = (verdict == Verdict::Finite).then(|| v.powf(-q * T::lit(0.5)) / det.sqrt());
    let (q11, q12) = (one + q * rho * rho / v, -q * rho / v);
    let norm = v.powf(-q * T::lit(0.5)) / T::TAU();
    let box_integral = |radius: T| -> Result<T> {
        let pts = grid(radius);
        let inner = |x: T| -> T {
            integrate(
                |y: T| (-(q11 * x * x + T::lit(2.0) * q12 * x * y + q11 * y * y) * T::lit(0.5)).exp(),
                &pts,
                Tolerance::new(T::zero()).with_rel(T::lit(1e-10)),
            )
            .value
        };
        let outer = integrate(inner, &pts, Tolerance::new(T::zero()).with_rel(T::lit(1e-9)));
        Ok(outer.value * norm)
    };
    let r5 = box_integral(T::lit(5.0))?;
    let r8 = box_integral(T::lit(8.0))?;
    let quadrature_verdict = if r8 > T::lit(10.0) * r5 { Verdict::Divergent } else { Verdict::Finite };
    Ok(Ar1HyperIntegral {
        verdict,
        determinant_factor: factor,
        value,
        quadrature_r5: r5,
        quadrature_r8: r8,
        quadrature_verdict,
    })
}

fn grid<T: Real>(radius: T) -> Vec<T> {
    (0..=16).map(|i| -radius + radius * T::lit(i as f64 / 8.0)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonSolution<T> {
    pub delta: Vec<Complex<T>>,
    pub iterations: usize,
    /// ‖(I − P)δ − χ‖₂.
    pub residual: T,
    pub gap: T,
}

/// δ = Σ_{m ≥ 0} P^m χ for π-centered χ.
pub fn poisson_solve<T: Real>(kernel: &CountableKernel<T>, chi: &[Complex<T>], tol: T) -> Result<PoissonSolution<T>> {
    if chi.len() != kernel.size() {
        return invalid("dimension mismatch in poisson_solve");
    }
    let scale = l2_norm(kernel, chi).max(T::one());
    if pi_mean(kernel, chi).norm() > T::lit(1e-10) * scale {
        return invalid("chi must have zero stationary mean");
    }
    let gap = operator_norm_l20(kernel)?.value;
    if gap >= T::one() - T::lit(1e-6) {
        return Err(Error::Numeric(format!("L2_0 norm {gap} too close to 1: the resolvent series may not converge")));
    }
    let mut delta = chi.to_vec();
    let mut term = chi.to_vec();
    let mut iterations = 0;
    while l2_norm(kernel, &term) >= tol {
        term = apply_p(kernel, &term)?;
        for (d, t) in delta.iter_mut().zip(&term) {
            *d = *d + *t;
        }
        iterations += 1;
        if iterations > 1_000_000 {
            return Err(Error::Numeric("resolvent series did not reach tolerance".into()));
        }
    }
    let pd = apply_p(kernel, &delta)?;
    let r: Vec<Complex<T>> = delta.iter().zip(&pd).zip(chi).map(|((d, p), c)| *d - *p - *c).collect();
    Ok(PoissonSolution { residual: l2_norm(kernel, &r), delta, iterations, gap })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceDecay<T> {
    /// Empirical autocovariances at lags 0..=max_lag.
    pub autocov: Vec<T>,
    /// Fitted geometric rate η̂ ∈ [0, 1).
    pub eta_hat: T,
    /// Lags used in the log-linear fit.
    pub fitted_lags: Vec<usize>,
    /// Lags at which |ĉ(k)| exceeds 2π η̂^k ‖χ‖²_∞ by more than three
    /// standard errors.
    pub violations: Vec<usize>,
}

/// Autocovariances of χ along stationary paths and a log-linear decay fit.
pub fn covariance_decay<T: Real>(paths: &[Vec<T>], chi_sup: T, max_lag: usize) -> Result<CovarianceDecay<T>> {
    let total: usize = paths.iter().map(|p| p.len()).sum();
    if max_lag == 0 || paths.iter().any(|p| p.len() <= max_lag) || total < 100 * (max_lag + 1) {
        return Err(Error::Statistical(format!(
            "insufficient data for covariance decay: {total} observations for {max_lag} lags"
        )));
    }
    let mean = paths.iter().flatten().copied().sum::<T>() / T::lit(total as f64);
    let mut autocov = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut s = T::zero();
        let mut cnt = 0usize;
        for p in paths {
            for i in 0..p.len() - lag {
                s += (p[i] - mean) * (p[i + lag] - mean);
            }
            cnt += p.len() - lag;
        }
        autocov.push(s / T::lit(cnt as f64));
    }
    let se = autocov[0] / T::lit(total as f64).sqrt();
    let mut fitted_lags = Vec::new();
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (lag, c) in autocov.iter().enumerate().skip(1) {
        if c.abs() <= T::lit(5.0) * se {
            break;
        }
        let x = T::lit(lag as f64);
        let y = (c.abs() / autocov[0]).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        fitted_lags.push(lag);
    }
    let m = T::lit(fitted_lags.len() as f64);
    let eta_hat = match fitted_lags.len() {
        0 => T::zero(),
        1 => (sy).exp(),
        _ => ((m * sxy - sx * sy) / (m * sxx - sx * sx)).exp(),
    }
    .min(T::one() - T::epsilon())
    .max(T::zero());
    let bound = T::TAU() * chi_sup * chi_sup;
    let violations = autocov
        .iter()
        .enumerate()
        .filter(|(lag, c)| c.abs() > bound * eta_hat.powi(*lag as i32) + T::lit(3.0) * se)
        .map(|(lag, _)| lag)
        .collect();
    Ok(CovarianceDecay { autocov, eta_hat, fitted_lags, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::backward_recurrence_kernel;

    fn two_state(p: f64) -> CountableKernel<f64> {
        CountableKernel::new(vec![vec![(0, 1.0 - p), (1, p)], vec![(0, p), (1, 1.0 - p)]], vec![0.5, 0.5], 0.0).unwrap()
    }

    #[test]
    fn two_state_gap() {
        for &p in &[0.1, 0.3, 0.5, 0.8] {
            let a = operator_norm_l20(&two_state(p)).unwrap().value;
            assert!((a - (1.0 - 2.0 * p).abs()).abs() < 1e-10, "p={p}: {a}");
        }
    }

    #[test]
    fn iid_gap_zero_and_poisson_identity() {
        let k = CountableKernel::iid(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(operator_norm_l20(&k).unwrap().value < 1e-12);
        let chi = vec![Complex::new(1.0, 0.5), Complex::new(-2.0, 1.0), Complex::new(0.8, -0.8)];
        let sol = poisson_solve(&k, &chi, 1e-12).unwrap();
        for (d, c) in sol.delta.iter().zip(&chi) {
            assert!((d - c).norm() < 1e-12);
        }
    }

    #[test]
    fn stochastic_and_contraction() {
        let spec = BackwardRecurrenceSpec::new(0.1).unwrap();
        let k = backward_recurrence_kernel(&spec, 30).unwrap();
        let ones = vec![1.0; 31];
        assert!(apply_p(&k, &ones).unwrap().iter().all(|v: &f64| (v - 1.0).abs() < 1e-15));
        assert!(apply_p(&k, &ones[..3]).is_err());
        let f: Vec<f64> = (0..31).map(|j| (j as f64 * 1.7).sin()).collect();
        assert!(l2_norm(&k, &apply_p(&k, &f).unwrap()) <= l2_norm(&k, &f));
    }

    #[test]
    fn backward_operator_display() {
        let spec = BackwardRecurrenceSpec::new(0.2).unwrap();
        let k = backward_recurrence_kernel(&spec, spec.truncation_for(1e-15)).unwrap();
        let f: Vec<f64> = (0..k.size()).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let pf = apply_p(&k, &f).unwrap();
        for j in 0..k.size() - 1 {
            let expect = spec.prob(j) / spec.tail(j) * f[0] + 0.2f64.powi(j as i32 + 1) * f[j + 1];
            assert!((pf[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn weight_formula() {
        assert_eq!(hyper_weight(3.0, 7), 0.0);
        assert_eq!(hyper_weight(3.0, 20), -65.0);
        for k in 1..30 {
            let kf = k as f64;
            assert!((hyper_weight(3.0, k) - (-kf * kf + 7.0 * kf) / 4.0).abs() < 1e-12);
        }
        let v = hyper_norm_fk(0.1, 3.0, 20).unwrap();
        assert!((v - (0.5 * 1.101001f64.ln() + 65.0 * 10f64.ln())).abs() < 1e-5);
        assert!(hyper_norm_fk(0.1, 2.0, 3).is_err());
    }

    #[test]
    fn poisson_residual() {
        let spec = BackwardRecurrenceSpec::new(0.1).unwrap();
        let k = backward_recurrence_kernel(&spec, 30).unwrap();
        let mut chi: Vec<Complex<f64>> =
            (0..31).map(|j| Complex::new((j as f64).cos(), (j as f64 * 0.3).sin())).collect();
        let m = pi_mean(&k, &chi);
        chi.iter_mut().for_each(|c| *c -= m);
        let sol = poisson_solve(&k, &chi, 1e-12).unwrap();
        assert!(sol.residual < 1e-8);
        assert!(l2_norm(&k, &sol.delta) <= l2_norm(&k, &chi) / (1.0 - sol.gap) + 1e-12);
    }
}
