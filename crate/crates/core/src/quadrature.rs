//! Adaptive Gauss–Kronrod and Gauss–Hermite rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_745_998,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue<T: Real>: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> {
    fn magnitude(self) -> T;
}

impl<T: Real> QuadValue<T> for T {
    fn magnitude(self) -> T {
        self.abs()
    }
}

impl<T: Real> QuadValue<T> for Complex<T> {
    fn magnitude(self) -> T {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
    pub max_intervals: usize,
}

impl<T: Real> Tolerance<T> {
    pub fn new(abs: T) -> Self {
        Tolerance { abs: abs.max(T::tol_floor()), rel: T::zero(), max_intervals: 20_000 }
    }

    pub fn with_rel(mut self, rel: T) -> Self {
        self.rel = rel;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad<V, T> {
    pub value: V,
    pub error: T,
    pub evals: usize,
    pub converged: bool,
}

impl<V, T: Real> Quad<V, T> {
    pub fn require(self, what: &str) -> Result<V> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Numeric(format!(
                "{what}: quadrature did not converge (error estimate {:e} after {} evaluations)",
                self.error.as_f64(),
                self.evals
            )))
        }
    }
}

fn gk21<T, V, F>(f: &mut F, a: T, b: T) -> (V, T)
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    let c = (a + b) * T::lit(0.5);
    let r = (b - a) * T::lit(0.5);
    let fc = f(c);
    let mut k = fc * T::lit(WGK[10]);
    let mut g = V::zero();
    for i in 0..10 {
        let dx = r * T::lit(XGK[i]);
        let s = f(c - dx) + f(c + dx);
        k = k + s * T::lit(WGK[i]);
        if i % 2 == 1 {
            g = g + s * T::lit(WG[i / 2]);
        }
    }
    ((k * r), ((k - g) * r).magnitude())
}

struct Piece<T, V> {
    a: T,
    b: T,
    value: V,
    error: T,
}

impl<T: Real, V> PartialEq for Piece<T, V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real, V> Eq for Piece<T, V> {}
impl<T: Real, V> PartialOrd for Piece<T, V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real, V> Ord for Piece<T, V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive 21-point Gauss–Kronrod integration over the consecutive
/// intervals defined by `points` (which must be sorted).
pub fn integrate<T, V, F>(mut f: F, points: &[T], tol: Tolerance<T>) -> Quad<V, T>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Piece<T, V>> = Vec::new();
    let mut evals = 0usize;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk21(&mut f, w[0], w[1]);
            evals += 21;
            heap.push(Piece { a: w[0], b: w[1], value, error });
        }
    }
    let total = |heap: &BinaryHeap<Piece<T, V>>, done: &[Piece<T, V>]| {
        let mut v = V::zero();
        let mut e = T::zero();
        for p in heap.iter().chain(done.iter()) {
            v = v + p.value;
            e += p.error;
        }
        (v, e)
    };
    let (mut value, mut error) = total(&heap, &done);
    let mut converged = error <= tol.abs.max(tol.rel * value.magnitude());
    let mut intervals = heap.len();
    while !converged && intervals < tol.max_intervals {
        let Some(worst) = heap.pop() else { break };
        let mid = (worst.a + worst.b) * T::lit(0.5);
        let width = worst.b - worst.a;
        if mid <= worst.a || mid >= worst.b || width <= T::epsilon() * T::lit(16.0) * mid.abs() {
            done.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evals += 42;
        intervals += 1;
        value = value - worst.value + v1 + v2;
        error = error - worst.error + e1 + e2;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
        if error <= tol.abs.max(tol.rel * value.magnitude()) {
            let (v, e) = total(&heap, &done);
            value = v;
            error = e;
            converged = error <= tol.abs.max(tol.rel * value.magnitude());
        }
    }
    let (value, error) = total(&heap, &done);
    let converged = converged || error <= tol.abs.max(tol.rel * value.magnitude());
    Quad { value, error, evals, converged }
}

/// Gauss–Hermite rule for the weight e^{−x²}.
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Gauss–Hermite order must be positive".into()));
        }
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        // Jacobi matrix: zero diagonal, off-diagonal sqrt(k/2).
        let off2: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
        let below = |x: f64| {
            let mut count = 0usize;
            let mut q = -x;
            if q < 0.0 {
                count += 1;
            }
            for e2 in &off2 {
                let prev = if q == 0.0 { f64::EPSILON } else { q };
                q = -x - e2 / prev;
                if q < 0.0 {
                    count += 1;
                }
            }
            count
        };
        let bound = (2.0 * nf).sqrt() + 1.0;
        let mut x = vec![0.0f64; n];
        let mut w = vec![0.0f64; n];
        for i in 0..n.div_ceil(2) {
            // i-th largest eigenvalue: the one with n - 1 - i eigenvalues below it
            let target = n - 1 - i;
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if below(mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut pp = 0.0;
            for it in 0..3 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                if it < 2 && pp != 0.0 {
                    let step = p1 / pp;
                    if step.abs() < hi - lo + 1e-12 {
                        z -= step;
                    }
                }
            }
            if !pp.is_finite() || pp == 0.0 {
                return Err(Error::Numeric(format!("Gauss–Hermite node {i} of {n} failed")));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Ok(GaussHermite { nodes: x.into_iter().map(T::lit).collect(), weights: w.into_iter().map(T::lit).collect() })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// E f(Z) for Z standard normal.
    pub fn expect_normal<V, F>(&self, mut f: F) -> V
    where
        V: QuadValue<T>,
        F: FnMut(T) -> V,
    {
        let scale = T::one() / T::PI().sqrt();
        let mut acc = V::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(*x * T::SQRT_2()) * (*w * scale);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q: Quad<f64, f64> = integrate(|x| x * x * x - 2.0 * x, &[0.0, 2.0], Tolerance::new(1e-13));
        assert!(q.converged);
        assert!((q.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let q: Quad<f64, f64> = integrate(|x: f64| x.powf(-0.5), &[0.0, 1.0], Tolerance::new(1e-10));
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn complex_oscillatory() {
        let q: Quad<Complex<f64>, f64> =
            integrate(|x: f64| Complex::new(0.0, 3.0 * x).exp(), &[0.0, 1.0, 2.0], Tolerance::new(1e-12));
        let exact = (Complex::new(0.0, 6.0).exp() - 1.0) / Complex::new(0.0, 3.0);
        assert!((q.value - exact).norm() < 1e-12);
    }

    #[test]
    fn hermite_moments() {
        for &n in &[8usize, 64, 128, 256] {
            let gh = GaussHermite::<f64>::new(n).unwrap();
            let m0: f64 = gh.expect_normal(|_| 1.0);
            let m2: f64 = gh.expect_normal(|z| z * z);
            let m4: f64 = gh.expect_normal(|z| z.powi(4));
            assert!((m0 - 1.0).abs() < 1e-12, "n={n} m0={m0}");
            assert!((m2 - 1.0).abs() < 1e-12);
            assert!((m4 - 3.0).abs() < 1e-11);
        }
    }
}
