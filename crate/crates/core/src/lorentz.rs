//! Decreasing rearrangements and Lorentz norms of grid functions.
//!
//! A grid function is treated as piecewise constant on its cells, so the
//! decreasing rearrangement `f*` is an exact step function obtained by a
//! weighted sort, and the maximal function `f**(t) = (1/t)∫_0^t f*` is of the
//! form `a + b/t` on every step. Norms follow
//!
//! ```text
//!   ‖f‖_{L^{p,q}} = ( (p/q) ∫_0^∞ [t^{1/p} f**(t)]^q dt/t )^{1/q},   q < ∞
//!   ‖f‖_{L^{p,∞}} = sup_{t>0} t^{1/p} f**(t)
//! ```
//!
//! and the rearrangement quasi-norm `‖f‖*_{L^{p,q}}` is the same expression
//! with `f*` in place of `f**`. With `p = q` the quasi-norm is exactly the
//! `L^p` norm; the `f**` norm is only equivalent to it (Hardy's inequality).

use crate::error::{Error, Result};

/// Sample values together with the measure of the cell each sample represents.
pub trait Measured {
    fn samples(&self) -> &[f64];
    fn cell_measure(&self, index: usize) -> f64;

    fn total_measure(&self) -> f64 {
        (0..self.samples().len()).map(|i| self.cell_measure(i)).sum()
    }
}

/// Exponents of a Lorentz space `L^{p,q}`. `f64::INFINITY` encodes ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzParams {
    p: f64,
    q: f64,
}

impl LorentzParams {
    /// Validates `p > 1`, `q ≥ 1`. The weak branch `q = ∞` also accepts
    /// `p = 1`, where `sup t f**(t)` is the `L^1` norm.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if p.is_nan() || q.is_nan() {
            return Err(Error::domain("Lorentz exponents must not be NaN"));
        }
        if q < 1.0 {
            return Err(Error::domain(format!("Lorentz exponent q = {q} < 1")));
        }
        if q.is_infinite() {
            if p < 1.0 {
                return Err(Error::domain(format!("weak Lorentz exponent p = {p} < 1")));
            }
        } else {
            if p <= 1.0 {
                return Err(Error::domain(format!("Lorentz exponent p = {p} ≤ 1")));
            }
            if p.is_infinite() {
                return Err(Error::domain("p = ∞ requires q = ∞"));
            }
        }
        Ok(Self { p, q })
    }

    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, f64::INFINITY)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Exact decreasing rearrangement of a piecewise-constant grid function.
#[derive(Debug, Clone)]
pub struct RearrangementProfile {
    /// `t_0 = 0 < t_1 ≤ … ≤ t_K`, cumulative cell measures in sorted order.
    breakpoints: Vec<f64>,
    /// `f*` on `(t_{k-1}, t_k]`, non-increasing.
    values: Vec<f64>,
    /// `∫_0^{t_k} f*`, aligned with `breakpoints`.
    cumulative: Vec<f64>,
    total_measure: f64,
}

pub fn rearrange<F: Measured + ?Sized>(field: &F) -> Result<RearrangementProfile> {
    let measures: Vec<f64> = (0..field.samples().len()).map(|i| field.cell_measure(i)).collect();
    rearrange_samples(field.samples(), &measures)
}

pub fn rearrange_samples(values: &[f64], measures: &[f64]) -> Result<RearrangementProfile> {
    if values.is_empty() {
        return Err(Error::domain("cannot rearrange an empty field"));
    }
    if values.len() != measures.len() {
        return Err(Error::domain(format!(
            "{} samples but {} cell measures",
            values.len(),
            measures.len()
        )));
    }
    if let Some(i) = measures.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::domain(format!(
            "cell {i} has non-positive measure {}",
            measures[i]
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("sample {i} is not finite")));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort on |f| descending; equal magnitudes keep ascending cell index
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));

    let mut breakpoints = Vec::with_capacity(values.len() + 1);
    let mut sorted = Vec::with_capacity(values.len());
    let mut cumulative = Vec::with_capacity(values.len() + 1);
    breakpoints.push(0.0);
    cumulative.push(0.0);
    let (mut t, mut s) = (0.0, 0.0);
    for &i in &order {
        let v = values[i].abs();
        t += measures[i];
        s += v * measures[i];
        breakpoints.push(t);
        sorted.push(v);
        cumulative.push(s);
    }
    Ok(RearrangementProfile {
        breakpoints,
        values: sorted,
        cumulative,
        total_measure: t,
    })
}

// 6-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691,
    0.467_913_934_572_691,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

impl RearrangementProfile {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// `∫ |f| = ∫_0^∞ f*`.
    pub fn l1(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn sup(&self) -> f64 {
        self.values[0]
    }

    pub fn f_star(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.total_measure {
            return 0.0;
        }
        // first k with t < t_{k+1}
        let k = self.breakpoints[1..].partition_point(|&b| b <= t);
        self.values[k.min(self.values.len() - 1)]
    }

    pub fn f_double_star(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.total_measure {
            return self.l1() / t;
        }
        let k = self.breakpoints[1..].partition_point(|&b| b < t);
        let k = k.min(self.values.len() - 1);
        (self.cumulative[k] + self.values[k] * (t - self.breakpoints[k])) / t
    }

    /// Measure of `{f* > s}`; equals the measure of `{|f| > s}`.
    pub fn distribution(&self, s: f64) -> f64 {
        let k = self.values.partition_point(|&v| v > s);
        self.breakpoints[k]
    }

    /// `∫_0^∞ (f*)^p dt`.
    pub fn integral_pow(&self, p: f64) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(v, w)| v.powf(p) * (w[1] - w[0]))
            .sum()
    }

    pub fn lorentz_norm(&self, params: LorentzParams) -> f64 {
        let (p, q) = (params.p, params.q);
        if self.l1() == 0.0 {
            return 0.0;
        }
        if q.is_infinite() {
            if p.is_infinite() {
                return self.values[0];
            }
            // t^{1/p} f**(t) = a t^{1/p} + b t^{1/p-1} has only an interior
            // minimum on each step, so the sup sits on a breakpoint.
            let inv_p = 1.0 / p;
            return self
                .breakpoints
                .iter()
                .zip(&self.cumulative)
                .skip(1)
                .map(|(&t, &s)| t.powf(inv_p - 1.0) * s)
                .fold(0.0, f64::max);
        }

        let qp = q / p;
        // trailing zeros of f* belong to the tail where f** = S/t
        let active = self.values.partition_point(|&v| v > 0.0);
        let mut sum = 0.0;
        for k in 0..active {
            let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
            if t1 <= t0 {
                continue;
            }
            let v = self.values[k];
            if k == 0 || t0 == 0.0 {
                // f** ≡ v on the first step
                sum += v.powf(q) * t1.powf(qp) / qp;
                continue;
            }
            let b = self.cumulative[k] - v * t0;
            sum += integrate_log(t0, t1, |t| t.powf(qp) * (v + b / t).powf(q));
        }
        let t_tail = self.breakpoints[active];
        let s = self.l1();
        sum += s.powf(q) * t_tail.powf(qp - q) / (q - qp);
        ((p / q) * sum).powf(1.0 / q)
    }

    /// Rearrangement quasi-norm `‖f‖*_{L^{p,q}}` (with `f*` instead of `f**`).
    /// Defined for any `p > 0`, `q > 0`.
    pub fn lorentz_quasinorm(&self, p: f64, q: f64) -> f64 {
        if q.is_infinite() {
            if p.is_infinite() {
                return self.values[0];
            }
            return self
                .values
                .iter()
                .zip(&self.breakpoints[1..])
                .map(|(v, t)| t.powf(1.0 / p) * v)
                .fold(0.0, f64::max);
        }
        let qp = q / p;
        let sum: f64 = self
            .values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(v, w)| v.powf(q) * (w[1].powf(qp) - w[0].powf(qp)) / qp)
            .sum();
        ((p / q) * sum).powf(1.0 / q)
    }
}

/// `∫_{t0}^{t1} g(t) dt/t` by Gauss-Legendre in `ln t`, split into panels of
/// log-width at most 0.5.
fn integrate_log(t0: f64, t1: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (a, b) = (t0.ln(), t1.ln());
    let panels = ((b - a) / 0.5).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for j in 0..panels {
        let mid = a + (j as f64 + 0.5) * width;
        let half = 0.5 * width;
        total += GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * g((mid + half * x).exp()))
            .sum::<f64>()
            * half;
    }
    total
}

pub fn lorentz_norm<F: Measured + ?Sized>(field: &F, params: LorentzParams) -> Result<f64> {
    Ok(rearrange(field)?.lorentz_norm(params))
}

pub fn lorentz_quasinorm<F: Measured + ?Sized>(field: &F, p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::domain(format!(
            "quasi-norm exponents must be positive, got ({p}, {q})"
        )));
    }
    Ok(rearrange(field)?.lorentz_quasinorm(p, q))
}

/// Direct `(Σ |f_i|^p m_i)^{1/p}`; `p = ∞` gives the max.
pub fn lp_norm_samples(values: &[f64], measures: impl Fn(usize) -> f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs().powf(p) * measures(i))
        .sum::<f64>()
        .powf(1.0 / p)
}

pub fn lp_norm<F: Measured + ?Sized>(field: &F, p: f64) -> f64 {
    lp_norm_samples(field.samples(), |i| field.cell_measure(i), p)
}

/// Exponent triples for the Lorentz Hölder inequality
/// `‖fg‖_{L^{p3,r3}} ≤ C ‖f‖_{L^{p1,r1}} ‖g‖_{L^{p2,r2}}`.
#[derive(Debug, Clone, Copy)]
pub struct HolderExponents {
    pub p1: f64,
    pub r1: f64,
    pub p2: f64,
    pub r2: f64,
    pub p3: f64,
    pub r3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderOutcome {
    Ratio(f64),
    /// One of the factors has zero norm; the ratio is undefined.
    DegenerateDenominator,
}

impl HolderOutcome {
    pub fn ratio(self) -> Option<f64> {
        match self {
            HolderOutcome::Ratio(r) => Some(r),
            HolderOutcome::DegenerateDenominator => None,
        }
    }
}

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

pub fn check_holder<F: Measured + ?Sized>(f: &F, g: &F, e: HolderExponents) -> Result<HolderOutcome> {
    if (recip(e.p3) - recip(e.p1) - recip(e.p2)).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "Hölder exponents violate 1/p3 = 1/p1 + 1/p2 ({}, {}, {})",
            e.p1, e.p2, e.p3
        )));
    }
    if recip(e.r1) + recip(e.r2) < recip(e.r3) - 1e-12 {
        return Err(Error::domain(format!(
            "Hölder exponents violate 1/r1 + 1/r2 ≥ 1/r3 ({}, {}, {})",
            e.r1, e.r2, e.r3
        )));
    }
    let (fs, gs) = (f.samples(), g.samples());
    if fs.len() != gs.len() {
        return Err(Error::domain("Hölder check needs fields on one grid"));
    }
    let measures: Vec<f64> = (0..fs.len()).map(|i| f.cell_measure(i)).collect();
    if (0..gs.len()).any(|i| (g.cell_measure(i) - measures[i]).abs() > 1e-12 * measures[i]) {
        return Err(Error::domain("Hölder check needs fields on one grid"));
    }
    let product: Vec<f64> = fs.iter().zip(gs).map(|(a, b)| a * b).collect();

    let nf = rearrange_samples(fs, &measures)?.lorentz_norm(LorentzParams::new(e.p1, e.r1)?);
    let ng = rearrange_samples(gs, &measures)?.lorentz_norm(LorentzParams::new(e.p2, e.r2)?);
    if nf == 0.0 || ng == 0.0 {
        return Ok(HolderOutcome::DegenerateDenominator);
    }
    let nfg = rearrange_samples(&product, &measures)?.lorentz_norm(LorentzParams::new(e.p3, e.r3)?);
    Ok(HolderOutcome::Ratio(nfg / (nf * ng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone)]
    struct Cells {
        values: Vec<f64>,
        measures: Vec<f64>,
    }

    impl Measured for Cells {
        fn samples(&self) -> &[f64] {
            &self.values
        }
        fn cell_measure(&self, i: usize) -> f64 {
            self.measures[i]
        }
    }

    fn uniform(values: Vec<f64>, h: f64) -> Cells {
        let measures = vec![h; values.len()];
        Cells { values, measures }
    }

    fn indicator(m: f64) -> Cells {
        // 16 cells of measure m/8, half of them switched on
        let mut v = vec![0.0; 16];
        for x in v.iter_mut().step_by(2) {
            *x = 1.0;
        }
        uniform(v, m / 8.0)
    }

    #[test]
    fn indicator_rearranges_to_step() {
        let f = indicator(4.0);
        let prof = rearrange(&f).unwrap();
        assert_eq!(prof.f_star(0.0), 1.0);
        assert_eq!(prof.f_star(3.99), 1.0);
        assert_eq!(prof.f_star(4.0), 0.0);
        assert_eq!(prof.f_star(7.5), 0.0);
        assert!((prof.total_measure() - 8.0).abs() < 1e-15);
    }

    #[test]
    fn constant_field_is_single_level() {
        let f = uniform(vec![-2.5; 10], 0.3);
        let prof = rearrange(&f).unwrap();
        assert!(prof.values().iter().all(|&v| v == 2.5));
        assert!((prof.total_measure() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn empty_field_rejected() {
        let f = uniform(vec![], 1.0);
        assert!(matches!(rearrange(&f), Err(Error::Domain(_))));
    }

    #[test]
    fn ties_keep_cell_order() {
        // identical magnitudes but different cell measures: ties broken by index
        let f = Cells {
            values: vec![1.0, -1.0, 1.0],
            measures: vec![0.5, 1.0, 2.0],
        };
        let prof = rearrange(&f).unwrap();
        assert_eq!(prof.breakpoints(), &[0.0, 0.5, 1.5, 3.5]);
    }

    #[test]
    fn weak_norm_of_indicator() {
        for &(m, p) in &[(4.0, 2.0), (0.5, 3.0), (10.0, 1.5)] {
            let f = indicator(m);
            let n = lorentz_norm(&f, LorentzParams::weak(p).unwrap()).unwrap();
            let expected: f64 = f64::powf(m, 1.0 / p);
            assert!(
                (n - expected).abs() < 1e-12 * expected,
                "m={m} p={p}: {n} vs {expected}"
            );
        }
        let n = lorentz_norm(&indicator(4.0), LorentzParams::weak(2.0).unwrap()).unwrap();
        assert!((n - 2.0).abs() < 1e-12);
    }

    #[test]
    fn strong_norm_of_indicator_matches_closed_form() {
        // f** = min(1, m/t): ∫ [t^{1/p} f**]^q dt/t = m^{q/p} (p/q) p/(p-1)
        let m = 3.0;
        for &(p, q) in &[(2.0, 2.0), (3.0, 1.0), (1.5, 4.0), (4.0, 2.5)] {
            let f = indicator(m);
            let n = lorentz_norm(&f, LorentzParams::new(p, q).unwrap()).unwrap();
            let expected = ((p / q) * m.powf(q / p) * (p / q) * p / (p - 1.0)).powf(1.0 / q);
            assert!(
                (n - expected).abs() < 1e-12 * expected,
                "p={p} q={q}: {n} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let f = uniform(vec![0.0; 8], 1.0);
        assert_eq!(lorentz_norm(&f, LorentzParams::new(2.0, 3.0).unwrap()).unwrap(), 0.0);
        assert_eq!(lorentz_norm(&f, LorentzParams::weak(2.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(LorentzParams::new(1.0, 2.0).is_err());
        assert!(LorentzParams::new(0.5, f64::INFINITY).is_err());
        assert!(LorentzParams::new(2.0, 0.5).is_err());
        assert!(LorentzParams::new(f64::INFINITY, 3.0).is_err());
        assert!(LorentzParams::new(1.0, f64::INFINITY).is_ok());
        assert!(LorentzParams::new(f64::INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn weak_l1_is_l1_and_weak_linf_is_sup() {
        let f = uniform(vec![0.5, -3.0, 1.0, 0.0, 2.0], 0.25);
        let w1 = lorentz_norm(&f, LorentzParams::weak(1.0).unwrap()).unwrap();
        assert!((w1 - lp_norm(&f, 1.0)).abs() < 1e-14);
        let winf = lorentz_norm(&f, LorentzParams::weak(f64::INFINITY).unwrap()).unwrap();
        assert_eq!(winf, 3.0);
    }

    #[test]
    fn holder_indicator_ratio_is_one() {
        let f = indicator(2.0);
        let e = HolderExponents {
            p1: 4.0,
            r1: f64::INFINITY,
            p2: 4.0,
            r2: f64::INFINITY,
            p3: 2.0,
            r3: f64::INFINITY,
        };
        let r = check_holder(&f, &f, e).unwrap().ratio().unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_with_unit_multiplier() {
        let f = uniform(vec![0.3, 1.2, -0.7, 2.0, 0.1, 0.0], 0.5);
        let g = uniform(vec![1.0; 6], 0.5);
        let e = HolderExponents {
            p1: 3.0,
            r1: 2.0,
            p2: f64::INFINITY,
            r2: f64::INFINITY,
            p3: 3.0,
            r3: 2.0,
        };
        let r = check_holder(&f, &g, e).unwrap().ratio().unwrap();
        assert!(r <= 1.0 + 1e-9);
    }

    #[test]
    fn holder_rejects_bad_exponents_and_flags_zero() {
        let f = indicator(1.0);
        let bad = HolderExponents {
            p1: 4.0,
            r1: 1.0,
            p2: 4.0,
            r2: 1.0,
            p3: 3.0,
            r3: 1.0,
        };
        assert!(check_holder(&f, &f, bad).is_err());
        let zero = uniform(vec![0.0; 16], 1.0 / 8.0);
        let e = HolderExponents {
            p1: 4.0,
            r1: f64::INFINITY,
            p2: 4.0,
            r2: f64::INFINITY,
            p3: 2.0,
            r3: f64::INFINITY,
        };
        assert_eq!(
            check_holder(&zero, &f, e).unwrap(),
            HolderOutcome::DegenerateDenominator
        );
    }

    fn field_strategy() -> impl Strategy<Value = Cells> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(-5.0f64..5.0, n),
                proptest::collection::vec(0.01f64..2.0, n),
            )
                .prop_map(|(values, measures)| Cells { values, measures })
        })
    }

    proptest! {
        #[test]
        fn rearrangement_is_equimeasurable(f in field_strategy(), s in 0.0f64..5.0) {
            let prof = rearrange(&f).unwrap();
            let direct: f64 = f.values.iter().zip(&f.measures)
                .filter(|(v, _)| v.abs() > s).map(|(_, m)| m).sum();
            prop_assert!((prof.distribution(s) - direct).abs() <= 1e-12 * (1.0 + direct));
            for w in prof.values().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn quasinorm_pp_is_lp(f in field_strategy(), p in 1.1f64..6.0) {
            let lp = lp_norm(&f, p);
            let star = lorentz_quasinorm(&f, p, p).unwrap();
            prop_assert!((star - lp).abs() <= 1e-10 * (1.0 + lp));
            // f** dominates f*, and Hardy bounds the f** norm by p/(p-1)
            let ns = lorentz_norm(&f, LorentzParams::new(p, p).unwrap()).unwrap();
            prop_assert!(ns >= lp * (1.0 - 1e-10));
            prop_assert!(ns <= lp * p / (p - 1.0) * (1.0 + 1e-9));
        }

        #[test]
        fn weak_norm_dominated_by_strong(f in field_strategy(), p in 1.2f64..5.0, q in 1.0f64..8.0) {
            // t0^{1/p} f**(t0) ≤ (q/p)^{2/q} ‖f‖_{L^{p,q}} under the (p/q) normalization
            let weak = lorentz_norm(&f, LorentzParams::weak(p).unwrap()).unwrap();
            let strong = lorentz_norm(&f, LorentzParams::new(p, q).unwrap()).unwrap();
            prop_assert!(weak <= (q / p).powf(2.0 / q) * strong * (1.0 + 1e-9));
        }

        #[test]
        fn norms_are_homogeneous(f in field_strategy(), lambda in -4.0f64..4.0, p in 1.2f64..5.0) {
            let scaled = Cells { values: f.values.iter().map(|v| lambda * v).collect(), measures: f.measures.clone() };
            for params in [LorentzParams::weak(p).unwrap(), LorentzParams::new(p, 2.0).unwrap()] {
                let a = lorentz_norm(&f, params).unwrap();
                let b = lorentz_norm(&scaled, params).unwrap();
                prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (1.0 + b));
            }
        }
    }
}
