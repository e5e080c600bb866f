//! Principle-of-conditioning quantities along trajectories.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::{stream_rng, MarkovKernel, Trajectory};
use crate::conditional::ConditionalLaw;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::stable::{levy_exponent_truncated, StableParams};
use crate::tails::TailModel;

/// Modulus slack allowed for quadrature-computed conditional CFs.
pub const CF_MODULUS_SLACK: f64 = 1e-12;

fn check_b<T: Real>(b: T) -> Result<()> {
    if !(b > T::zero()) || !b.is_finite() {
        return invalid(format!("normalization B must be positive and finite, got {b}"));
    }
    Ok(())
}

fn check_h<T: Real>(h: T) -> Result<()> {
    if !(h > T::zero()) {
        return invalid(format!("truncation level h must be positive, got {h}"));
    }
    Ok(())
}

fn check_modulus<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if z.norm() > T::one() + T::lit(CF_MODULUS_SLACK) {
        return Err(Error::Numeric(format!("conditional CF has modulus {} > 1", z.norm())));
    }
    Ok(z)
}

/// (P e^{iθΨ/B})(x).
pub fn cond_cf<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    x: &L::State,
    theta: T,
    obs: &L::Obs,
    b: T,
) -> Result<Complex<T>> {
    check_b(b)?;
    let v = law.cf_minus_one(x, obs, theta / b)? + T::one();
    check_modulus(v)
}

fn prefix<S, T>(traj: &Trajectory<S, T>) -> Result<&[S]> {
    if traj.states.len() < 2 {
        return invalid("trajectory needs at least one step");
    }
    Ok(&traj.states[..traj.states.len() - 1])
}

/// Σ_{j=1}^n |1 − cond_cf(X_{j−1})|².
pub fn poc_condition_sum<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    traj: &Trajectory<L::State, T>,
    theta: T,
    obs: &L::Obs,
    b: T,
) -> Result<T> {
    check_b(b)?;
    let mut s = T::zero();
    for x in prefix(traj)? {
        s += law.cf_minus_one(x, obs, theta / b)?.norm_sqr();
    }
    Ok(s)
}

/// A_n = B⁻¹ Σ_j E(Ψ(X_j) 1{|Ψ(X_j)| ≤ hB} | X_{j−1}).
pub fn conditional_centering_an<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    traj: &Trajectory<L::State, T>,
    obs: &L::Obs,
    b: T,
    h: T,
) -> Result<T> {
    check_b(b)?;
    check_h(h)?;
    let mut s = T::zero();
    for x in prefix(traj)? {
        s += law.truncated(x, obs, h * b)?.mean;
    }
    Ok(s / b)
}

/// Φ_n^h(θ) = Σ_j [cond_cf_j − 1 − iθB⁻¹ E(Ψ 1{|Ψ| ≤ hB} | X_{j−1})].
pub fn phi_n_exponent<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    traj: &Trajectory<L::State, T>,
    theta: T,
    obs: &L::Obs,
    b: T,
    h: T,
) -> Result<Complex<T>> {
    let p = path_poc(law, &traj.states, obs, &[theta], b, h)?;
    Ok(p.phi[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductVsExp<T> {
    /// Π_j cond_cf_j · e^{−iθA_n}.
    pub product: Complex<T>,
    /// exp(Φ_n^h(θ)).
    pub exp_form: Complex<T>,
    pub gap: T,
    /// Σ_j |1 − cond_cf_j|².
    pub condition_sum: T,
}

impl<T: Real> ProductVsExp<T> {
    /// gap ≤ 5·S(θ).
    pub fn bound_holds(&self) -> bool {
        self.gap <= T::lit(5.0) * self.condition_sum
    }
}

pub fn product_vs_exp_check<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    traj: &Trajectory<L::State, T>,
    theta: T,
    obs: &L::Obs,
    b: T,
    h: T,
) -> Result<ProductVsExp<T>> {
    let p = path_poc(law, &traj.states, obs, &[theta], b, h)?;
    Ok(p.product_vs_exp(0))
}

/// Moment terms of the bound n|1 − cond_cf|² ≤ θ⁴I₁ + 16I₂ + 2θ²I₃.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentTerms<T> {
    pub i1: T,
    pub i2: T,
    pub i3: T,
}

impl<T: Real> MomentTerms<T> {
    pub fn bound(&self, theta: T) -> T {
        let t2 = theta * theta;
        t2 * t2 * self.i1 + T::lit(16.0) * self.i2 + T::lit(2.0) * t2 * self.i3
    }
}

/// I₁ = n B⁻⁴ (E(Ψ²1|x))², I₂ = n P(|Ψ| > hB | x)², I₃ = n B⁻² (E(Ψ1|x))².
pub fn moment_terms<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    x: &L::State,
    obs: &L::Obs,
    b: T,
    h: T,
    n: usize,
) -> Result<MomentTerms<T>> {
    check_b(b)?;
    check_h(h)?;
    let m = law.truncated(x, obs, h * b)?;
    Ok(terms_from(m.mean, m.second, m.tail_prob, b, T::lit(n as f64)))
}

fn terms_from<T: Real>(mean: T, second: T, tail: T, b: T, n: T) -> MomentTerms<T> {
    let b2 = b * b;
    MomentTerms { i1: n * (second / b2) * (second / b2), i2: n * tail * tail, i3: n * (mean / b) * (mean / b) }
}

/// All PoC quantities of one path, for several θ in a single pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoc<T> {
    pub thetas: Vec<T>,
    pub condition_sum: Vec<T>,
    pub phi: Vec<Complex<T>>,
    /// Π_j cond_cf_j · e^{−iθA_n}.
    pub product: Vec<Complex<T>>,
    pub a_n: T,
    /// Path averages of the moment terms at X_0, …, X_{n−1}.
    pub terms: MomentTerms<T>,
    pub max_cf_modulus: T,
}

impl<T: Real> PathPoc<T> {
    pub fn product_vs_exp(&self, k: usize) -> ProductVsExp<T> {
        let exp_form = self.phi[k].exp();
        ProductVsExp {
            product: self.product[k],
            exp_form,
            gap: (self.product[k] - exp_form).norm(),
            condition_sum: self.condition_sum[k],
        }
    }
}

pub fn path_poc<T: Real, L: ConditionalLaw<T>>(
    law: &L,
    states: &[L::State],
    obs: &L::Obs,
    thetas: &[T],
    b: T,
    h: T,
) -> Result<PathPoc<T>> {
    check_b(b)?;
    check_h(h)?;
    if states.len() < 2 {
        return invalid("trajectory needs at least one step");
    }
    let n = states.len() - 1;
    let k = thetas.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut cond = vec![T::zero(); k];
    let mut sum_cf = vec![zero; k];
    let mut prod = vec![Complex::new(T::one(), T::zero()); k];
    let mut mean_sum = T::zero();
    let mut terms = MomentTerms::default();
    let mut max_mod = T::zero();
    let nf = T::lit(n as f64);
    for x in &states[..n] {
        let m = law.truncated(x, obs, h * b)?;
        mean_sum += m.mean;
        let t = terms_from(m.mean, m.second, m.tail_prob, b, nf);
        terms.i1 += t.i1;
        terms.i2 += t.i2;
        terms.i3 += t.i3;
        for (i, &th) in thetas.iter().enumerate() {
            let c = law.cf_minus_one(x, obs, th / b)?;
            let z = check_modulus(c + T::one())?;
            max_mod = max_mod.max(z.norm());
            cond[i] += c.norm_sqr();
            sum_cf[i] = sum_cf[i] + c;
            prod[i] = prod[i] * z;
        }
    }
    let a_n = mean_sum / b;
    let phi: Vec<Complex<T>> =
        thetas.iter().zip(&sum_cf).map(|(&th, s)| s - Complex::new(T::zero(), th * a_n)).collect();
    let product =
        thetas.iter().zip(&prod).map(|(&th, p)| p * Complex::new((th * a_n).cos(), -(th * a_n).sin())).collect();
    terms.i1 = terms.i1 / nf;
    terms.i2 = terms.i2 / nf;
    terms.i3 = terms.i3 / nf;
    Ok(PathPoc { thetas: thetas.to_vec(), condition_sum: cond, phi, product, a_n, terms, max_cf_modulus: max_mod })
}

/// Ensemble PoC statistics at one n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocLevel<T> {
    pub n: usize,
    pub b: T,
    pub mean_condition_sum: Vec<T>,
    pub mean_phi: Vec<Complex<T>>,
    pub mean_product: Vec<Complex<T>>,
    pub target_phi: Vec<Complex<T>>,
    /// sup over the θ-grid of |mean Φ_n^h − Φ^h|.
    pub phi_distance: T,
    pub mean_a_n: T,
    pub mean_terms: MomentTerms<T>,
    /// Largest gap / (5 S(θ)) over paths and θ (≤ 1 when the bound holds).
    pub max_gap_ratio: T,
    pub gap_violations: usize,
    pub max_cf_modulus: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocRun<T> {
    pub thetas: Vec<T>,
    pub h: T,
    pub replicates: usize,
    pub seed: u64,
    pub levels: Vec<PocLevel<T>>,
    /// Least-squares slope of log mean S(θ) against log n, per θ.
    pub condition_sum_slopes: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocSettings<T> {
    pub ns: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub thetas: Vec<T>,
    pub h: T,
}

/// Replicate stream for (n-index, replicate).
pub fn replicate_stream(n_index: usize, rep: usize) -> u64 {
    ((n_index as u64) << 32) | rep as u64
}

/// Simulates `replicates` stationary paths per n and aggregates PoC
/// statistics. `make_law(n, B)` supplies the conditional law used at that
/// n, which lets callers tabulate for the frequencies θ/B and level hB.
pub fn run_poc<T, K, L, F>(
    kernel: &K,
    make_law: F,
    obs: &L::Obs,
    tail: &TailModel<T>,
    cfg: &PocSettings<T>,
) -> Result<PocRun<T>>
where
    T: Real,
    K: MarkovKernel<T>,
    L: ConditionalLaw<T, State = K::State>,
    F: Fn(usize, T) -> Result<L>,
{
    if cfg.replicates == 0 || cfg.ns.is_empty() || cfg.thetas.is_empty() {
        return invalid("PoC run needs replicates, an n-grid and a θ-grid");
    }
    check_h(cfg.h)?;
    let target = StableParams::strictly_stable(tail.alpha, tail.c_plus, tail.c_minus, cfg.h)?;
    let target_phi: Vec<Complex<T>> =
        cfg.thetas.iter().map(|&t| levy_exponent_truncated(t, &target)).collect::<Result<_>>()?;
    let mut levels = Vec::with_capacity(cfg.ns.len());
    for (ni, &n) in cfg.ns.iter().enumerate() {
        if n == 0 {
            return invalid("n must be at least 1");
        }
        let b = tail.solve_bn(n as u64)?;
        let law = make_law(n, b)?;
        let paths: Vec<PathPoc<T>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let states = simulate_states(kernel, n, cfg.seed, replicate_stream(ni, r))?;
                path_poc(&law, &states, obs, &cfg.thetas, b, cfg.h)
            })
            .collect::<Result<_>>()?;
        levels.push(aggregate(n, b, &paths, &target_phi));
    }
    let slopes = (0..cfg.thetas.len())
        .map(|k| {
            let pts: Vec<(T, T)> = levels
                .iter()
                .filter(|l| l.mean_condition_sum[k] > T::zero())
                .map(|l| (T::lit(l.n as f64).ln(), l.mean_condition_sum[k].ln()))
                .collect();
            ls_slope(&pts)
        })
        .collect();
    Ok(PocRun {
        thetas: cfg.thetas.clone(),
        h: cfg.h,
        replicates: cfg.replicates,
        seed: cfg.seed,
        levels,
        condition_sum_slopes: slopes,
    })
}

/// X_0, …, X_n of a stationary path.
pub fn simulate_states<T: Real, K: MarkovKernel<T>>(
    kernel: &K,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<K::State>> {
    let mut rng = stream_rng(seed, stream);
    let mut x = kernel.initial(&mut rng)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(x);
    for _ in 0..n {
        x = kernel.step(x, &mut rng);
        out.push(x);
    }
    Ok(out)
}

fn aggregate<T: Real>(n: usize, b: T, paths: &[PathPoc<T>], target_phi: &[Complex<T>]) -> PocLevel<T> {
    let k = target_phi.len();
    let inv = T::one() / T::lit(paths.len() as f64);
    let zero = Complex::new(T::zero(), T::zero());
    let mut s = vec![T::zero(); k];
    let mut phi = vec![zero; k];
    let mut prod = vec![zero; k];
    let mut a = T::zero();
    let mut terms = MomentTerms::default();
    let mut ratio = T::zero();
    let mut violations = 0;
    let mut max_mod = T::zero();
    for p in paths {
        for i in 0..k {
            s[i] += p.condition_sum[i] * inv;
            phi[i] = phi[i] + p.phi[i] * inv;
            prod[i] = prod[i] + p.product[i] * inv;
            let pe = p.product_vs_exp(i);
            if !pe.bound_holds() {
                violations += 1;
            }
            if pe.condition_sum > T::zero() {
                ratio = ratio.max(pe.gap / (T::lit(5.0) * pe.condition_sum));
            }
        }
        a += p.a_n * inv;
        terms.i1 += p.terms.i1 * inv;
        terms.i2 += p.terms.i2 * inv;
        terms.i3 += p.terms.i3 * inv;
        max_mod = max_mod.max(p.max_cf_modulus);
    }
    let dist = phi.iter().zip(target_phi).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max);
    PocLevel {
        n,
        b,
        mean_condition_sum: s,
        mean_phi: phi,
        mean_product: prod,
        target_phi: target_phi.to_vec(),
        phi_distance: dist,
        mean_a_n: a,
        mean_terms: terms,
        max_gap_ratio: ratio,
        gap_violations: violations,
        max_cf_modulus: max_mod,
    }
}

/// Least-squares slope; NaN with fewer than two points.
pub fn ls_slope<T: Real>(pts: &[(T, T)]) -> T {
    if pts.len() < 2 {
        return T::nan();
    }
    let m = T::lit(pts.len() as f64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let my = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
