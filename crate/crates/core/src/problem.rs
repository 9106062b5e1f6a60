//! PDE instances and the numerical Legendre transform.
//!
//! A [`ProblemSpec`] describes
//!
//! ```text
//! -u_t - ½σ²(t,x) u_xx - b(t,x) u_x + H(t,x,u_x) = 0,   u(T,·) = U
//! ```
//!
//! in one space dimension. The Hamiltonian must be convex and coercive in
//! `p`; its convex dual `L(t,x,q) = sup_p {pq - H(t,x,p)}` is what the
//! backward operator actually consumes.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::baselines::ColeHopfParams;
use crate::error::{Error, Result};
use crate::optimize::golden_min;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type PhaseFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Number of points in the conjugation search grid.
pub const CONJUGATION_POINTS: usize = 2001;
/// Bracket tolerance of the golden-section refinement in conjugation.
pub const CONJUGATION_TOL: f64 = 1e-10;
/// Largest radius tried when bracketing the coercivity radius of `L`.
pub const MAX_COERCIVITY_RADIUS: f64 = 1e8;

/// Space-time box over which envelopes and sampled invariants are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl SampleBox {
    pub const T_POINTS: usize = 21;
    pub const X_POINTS: usize = 41;

    pub fn new(t_min: f64, t_max: f64, x_min: f64, x_max: f64) -> Self {
        SampleBox {
            t_min,
            t_max,
            x_min,
            x_max,
        }
    }

    /// The 21×41 uniform (t, x) lattice.
    pub fn lattice(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let nt = Self::T_POINTS;
        let nx = Self::X_POINTS;
        (0..nt).flat_map(move |i| {
            let t = self.t_min + (self.t_max - self.t_min) * i as f64 / (nt - 1) as f64;
            (0..nx).map(move |j| {
                let x = self.x_min + (self.x_max - self.x_min) * j as f64 / (nx - 1) as f64;
                (t, x)
            })
        })
    }
}

#[derive(Clone)]
pub struct CoefficientField {
    sigma: FieldFn,
    drift: FieldFn,
    /// Declared bound `M` on |σ| and |b|.
    pub bound: f64,
    /// Declared Lipschitz constant in x.
    pub lipschitz: f64,
}

impl CoefficientField {
    pub fn new(sigma: FieldFn, drift: FieldFn, bound: f64, lipschitz: f64) -> Self {
        CoefficientField {
            sigma,
            drift,
            bound,
            lipschitz,
        }
    }

    pub fn constant(sigma: f64, drift: f64) -> Self {
        CoefficientField {
            sigma: Arc::new(move |_, _| sigma),
            drift: Arc::new(move |_, _| drift),
            bound: sigma.abs().max(drift.abs()),
            lipschitz: 0.0,
        }
    }

    #[inline]
    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        (self.sigma)(t, x)
    }

    #[inline]
    pub fn drift(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

/// A convex, coercive Hamiltonian `H(t,x,p)`.
#[derive(Clone)]
pub struct HamiltonianSpec {
    eval: PhaseFn,
    coercivity: ScalarFn,
    analytic_dual: Option<PhaseFn>,
    tx_free: bool,
}

impl HamiltonianSpec {
    /// `coercivity(y)` must return a radius beyond which `H(t,x,p)/|p| >= y`
    /// for every `(t, x)`.
    pub fn new(eval: PhaseFn, coercivity: ScalarFn) -> Self {
        HamiltonianSpec {
            eval,
            coercivity,
            analytic_dual: None,
            tx_free: false,
        }
    }

    pub fn with_dual(mut self, dual: PhaseFn) -> Self {
        self.analytic_dual = Some(dual);
        self
    }

    /// Declares that `H` does not depend on `(t, x)`, so envelopes collapse.
    pub fn independent_of_tx(mut self) -> Self {
        self.tx_free = true;
        self
    }

    pub fn without_dual(mut self) -> Self {
        self.analytic_dual = None;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, p: f64) -> f64 {
        (self.eval)(t, x, p)
    }

    pub fn coercivity_radius(&self, y: f64) -> f64 {
        (self.coercivity)(y)
    }

    pub fn has_analytic_dual(&self) -> bool {
        self.analytic_dual.is_some()
    }

    pub fn is_tx_free(&self) -> bool {
        self.tx_free
    }

    pub fn quadratic() -> Self {
        HamiltonianSpec::new(Arc::new(|_, _, p| 0.5 * p * p), Arc::new(|y| (2.0 * y).max(0.0)))
            .with_dual(Arc::new(|_, _, q| 0.5 * q * q))
            .independent_of_tx()
    }

    /// `H = a p + p²/2`, dual `(q - a)²/2`.
    pub fn quadratic_drift(a: f64) -> Self {
        HamiltonianSpec::new(
            Arc::new(move |_, _, p| a * p + 0.5 * p * p),
            Arc::new(move |y| (2.0 * (y + a.abs())).max(0.0)),
        )
        .with_dual(Arc::new(move |_, _, q| 0.5 * (q - a) * (q - a)))
        .independent_of_tx()
    }

    /// `H = p⁴/4`, dual `(3/4)|q|^{4/3}`.
    pub fn quartic() -> Self {
        HamiltonianSpec::new(
            Arc::new(|_, _, p| 0.25 * p.powi(4)),
            Arc::new(|y| (4.0 * y.max(0.0)).cbrt()),
        )
        .with_dual(Arc::new(|_, _, q: f64| 0.75 * q.abs().powf(4.0 / 3.0)))
        .independent_of_tx()
    }
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("analytic_dual", &self.analytic_dual.is_some())
            .field("tx_free", &self.tx_free)
            .finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct TerminalDatum {
    eval: ScalarFn,
    pub lipschitz: f64,
    pub bound: f64,
}

impl TerminalDatum {
    pub fn new(eval: ScalarFn, lipschitz: f64, bound: f64) -> Self {
        TerminalDatum {
            eval,
            lipschitz,
            bound,
        }
    }

    pub fn clamp(k: f64) -> Self {
        TerminalDatum::new(Arc::new(move |x: f64| x.max(0.0).min(k)), 1.0, k.abs())
    }

    pub fn constant(c: f64) -> Self {
        TerminalDatum::new(Arc::new(move |_| c), 0.0, c.abs())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

impl fmt::Debug for TerminalDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalDatum")
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

/// Maximizes `p q - f(p)` over `p`: grid search on `[-radius, radius]` with
/// one doubling if the argmax lands on the boundary, then golden-section
/// refinement of the winning bracket. Ties go to the smallest `|p|`.
///
/// Returns `(value, argmax)`.
pub fn conjugate(f: impl Fn(f64) -> f64, q: f64, radius: f64) -> Result<(f64, f64)> {
    conjugate_scan(&f, q, radius, |p_at, n| {
        (0..n).map(|k| p_at(k) * q - f(p_at(k))).collect()
    })
}

/// [`conjugate`] with the grid stage evaluated in parallel, for expensive `f`.
pub fn conjugate_par(f: impl Fn(f64) -> f64 + Sync, q: f64, radius: f64) -> Result<(f64, f64)> {
    conjugate_scan(&f, q, radius, |p_at, n| {
        (0..n).into_par_iter().map(|k| p_at(k) * q - f(p_at(k))).collect()
    })
}

fn conjugate_scan(
    f: &impl Fn(f64) -> f64,
    q: f64,
    radius: f64,
    scan: impl Fn(&(dyn Fn(usize) -> f64 + Sync), usize) -> Vec<f64>,
) -> Result<(f64, f64)> {
    let n = CONJUGATION_POINTS;
    let mut r = radius.max(1e-3);
    for attempt in 0..2 {
        let step = 2.0 * r / (n - 1) as f64;
        let p_at = move |k: usize| -r + k as f64 * step;
        let values = scan(&p_at, n);
        let mut best_k = 0;
        let mut best = f64::NEG_INFINITY;
        for (k, &g) in values.iter().enumerate() {
            if g > best || (g == best && p_at(k).abs() < p_at(best_k).abs()) {
                best = g;
                best_k = k;
            }
        }
        if best_k == 0 || best_k == n - 1 {
            if attempt == 0 {
                r *= 2.0;
                continue;
            }
            return Err(Error::NonCoercive { q, radius: r });
        }
        let (p_ref, neg) = golden_min(p_at(best_k - 1), p_at(best_k + 1), CONJUGATION_TOL, |p| {
            f(p) - p * q
        });
        return Ok(if -neg > best {
            (-neg, p_ref)
        } else {
            (best, p_at(best_k))
        });
    }
    unreachable!()
}

/// `L(t,x,q) = sup_p {pq - H(t,x,p)}`; uses the analytic dual when declared.
pub fn legendre_transform(h: &HamiltonianSpec, t: f64, x: f64, q: f64) -> Result<f64> {
    if let Some(dual) = &h.analytic_dual {
        return Ok(dual(t, x, q));
    }
    numerical_legendre_transform(h, t, x, q)
}

/// Same as [`legendre_transform`] but always conjugates numerically.
pub fn numerical_legendre_transform(h: &HamiltonianSpec, t: f64, x: f64, q: f64) -> Result<f64> {
    let h0 = h.eval(t, x, 0.0).abs();
    let radius = h.coercivity_radius(h0 + q.abs() + 1.0);
    conjugate(|p| h.eval(t, x, p), q, radius).map(|(v, _)| v)
}

fn envelope_radius(h: &HamiltonianSpec, sample: &SampleBox, q: f64) -> f64 {
    let h0 = if h.tx_free {
        h.eval(0.0, 0.0, 0.0).abs()
    } else {
        sample
            .lattice()
            .map(|(t, x)| h.eval(t, x, 0.0).abs())
            .fold(0.0, f64::max)
    };
    h.coercivity_radius(h0 + q.abs() + 1.0)
}

/// `(L_*(q), L^*(q))`: conjugates of the upper and lower (t,x)-envelopes of
/// `H` over the sample lattice.
pub fn dual_envelopes(h: &HamiltonianSpec, sample: &SampleBox, q: f64) -> Result<(f64, f64)> {
    if h.tx_free {
        let l = legendre_transform(h, 0.0, 0.0, q)?;
        return Ok((l, l));
    }
    let radius = envelope_radius(h, sample, q);
    let pts: Vec<(f64, f64)> = sample.lattice().collect();
    let h_upper = |p: f64| {
        pts.iter()
            .map(|&(t, x)| h.eval(t, x, p))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let h_lower = |p: f64| {
        pts.iter()
            .map(|&(t, x)| h.eval(t, x, p))
            .fold(f64::INFINITY, f64::min)
    };
    let (lower, _) = conjugate_par(h_upper, q, radius)?;
    let (upper, _) = conjugate_par(h_lower, q, radius)?;
    clamp_to_lattice(h, &pts, q, (lower, upper))
}

/// Widens `(lower, upper)` to cover `L(t,x,q)` at every lattice point, so
/// rounding in the two conjugations never breaks the sandwich.
fn clamp_to_lattice(h: &HamiltonianSpec, pts: &[(f64, f64)], q: f64, env: (f64, f64)) -> Result<(f64, f64)> {
    let values: Vec<f64> = pts
        .par_iter()
        .map(|&(t, x)| legendre_transform(h, t, x, q))
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(env, |(lo, hi), l| (lo.min(l), hi.max(l))))
}

/// `(H^*(p), H_*(p))` over the sample lattice.
fn lattice_envelope(h: &HamiltonianSpec, pts: &[(f64, f64)], p: f64) -> (f64, f64) {
    pts.iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &(t, x)| {
            let v = h.eval(t, x, p);
            (hi.max(v), lo.min(v))
        })
}

/// Lattice envelopes tabulated on `CONJUGATION_POINTS` nodes of `[-radius, radius]`.
#[derive(Debug)]
struct EnvelopeTable {
    radius: f64,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl EnvelopeTable {
    fn build(h: &HamiltonianSpec, pts: &[(f64, f64)], radius: f64) -> Self {
        let n = CONJUGATION_POINTS;
        let step = 2.0 * radius / (n - 1) as f64;
        let (upper, lower) = (0..n)
            .into_par_iter()
            .map(|k| lattice_envelope(h, pts, -radius + k as f64 * step))
            .unzip();
        EnvelopeTable { radius, upper, lower }
    }

    fn p_at(&self, k: usize) -> f64 {
        -self.radius + k as f64 * 2.0 * self.radius / (CONJUGATION_POINTS - 1) as f64
    }

    /// Grid argmax of `p q - values[k]`, or `None` when it sits on the boundary.
    fn argmax(&self, values: &[f64], q: f64) -> Option<(usize, f64)> {
        let mut best_k = 0;
        let mut best = f64::NEG_INFINITY;
        for (k, v) in values.iter().enumerate() {
            let g = self.p_at(k) * q - v;
            if g > best || (g == best && self.p_at(k).abs() < self.p_at(best_k).abs()) {
                best = g;
                best_k = k;
            }
        }
        (best_k != 0 && best_k != values.len() - 1).then_some((best_k, best))
    }
}

/// The convex dual of a problem's Hamiltonian together with its envelope
/// bounds and the minimizer radius function ξ.
#[derive(Clone, Debug)]
pub struct DualHamiltonian {
    hamiltonian: HamiltonianSpec,
    sample: SampleBox,
    /// Constant multiplying the Lipschitz bound inside ξ.
    pub radius_constant: f64,
    xi_memo: Arc<Mutex<HashMap<u64, f64>>>,
    table: Arc<Mutex<Option<EnvelopeTable>>>,
}

impl DualHamiltonian {
    pub fn new(hamiltonian: HamiltonianSpec, sample: SampleBox) -> Self {
        DualHamiltonian {
            hamiltonian,
            sample,
            radius_constant: 1.0,
            xi_memo: Arc::default(),
            table: Arc::default(),
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, q: f64) -> Result<f64> {
        legendre_transform(&self.hamiltonian, t, x, q)
    }

    pub fn lower_env(&self, q: f64) -> Result<f64> {
        self.envelopes(q).map(|e| e.0)
    }

    pub fn upper_env(&self, q: f64) -> Result<f64> {
        self.envelopes(q).map(|e| e.1)
    }

    /// Same values as [`dual_envelopes`], but the grid stage reads envelope
    /// values tabulated once per handle; only the golden-section refinement
    /// sweeps the lattice again.
    pub fn envelopes(&self, q: f64) -> Result<(f64, f64)> {
        let h = &self.hamiltonian;
        if h.tx_free {
            return dual_envelopes(h, &self.sample, q);
        }
        let needed = envelope_radius(h, &self.sample, q);
        let pts: Vec<(f64, f64)> = self.sample.lattice().collect();
        let mut guard = self.table.lock().expect("envelope table poisoned");
        if guard.as_ref().is_none_or(|t| t.radius < needed) {
            let radius = guard.as_ref().map_or(needed, |t| needed.max(2.0 * t.radius));
            *guard = Some(EnvelopeTable::build(h, &pts, radius));
        }
        let mut conj = |upper: bool| -> Result<f64> {
            loop {
                let table = guard.as_ref().expect("table built above");
                let values = if upper { &table.lower } else { &table.upper };
                match table.argmax(values, q) {
                    Some((k, best)) => {
                        let env = |p: f64| {
                            let (hi, lo) = lattice_envelope(h, &pts, p);
                            if upper {
                                lo
                            } else {
                                hi
                            }
                        };
                        let (_, neg) =
                            golden_min(table.p_at(k - 1), table.p_at(k + 1), CONJUGATION_TOL, |p| {
                                env(p) - p * q
                            });
                        return Ok(best.max(-neg));
                    }
                    None if table.radius < 2.0 * needed => {
                        let radius = 2.0 * table.radius;
                        *guard = Some(EnvelopeTable::build(h, &pts, radius));
                    }
                    None => {
                        return Err(Error::NonCoercive {
                            q,
                            radius: table.radius,
                        })
                    }
                }
            }
        };
        let lower = conj(false)?;
        let upper = conj(true)?;
        drop(guard);
        clamp_to_lattice(h, &pts, q, (lower, upper))
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn sample_box(&self) -> &SampleBox {
        &self.sample
    }

    /// `H^*(0) = sup_{(t,x)} H(t,x,0)` over the sample lattice.
    pub fn h_upper_at_zero(&self) -> f64 {
        let h = &self.hamiltonian;
        if h.tx_free {
            return h.eval(0.0, 0.0, 0.0);
        }
        self.sample
            .lattice()
            .map(|(t, x)| h.eval(t, x, 0.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max{|L^*(0)|, |H^*(0)|}`, the per-step growth constant of the operator.
    pub fn stability_constant(&self) -> Result<f64> {
        Ok(self.upper_env(0.0)?.abs().max(self.h_upper_at_zero().abs()))
    }

    /// Smallest radius `r` with `L_*(±r)/r >= y`, i.e. the coercivity radius
    /// of the dual uniformly in `(t, x)`.
    pub fn coercivity_radius(&self, y: f64) -> Result<f64> {
        let holds = |r: f64| -> Result<bool> {
            let lo = self.lower_env(r)?.min(self.lower_env(-r)?);
            Ok(lo / r >= y)
        };
        let mut hi = 1.0;
        while !holds(hi)? {
            hi *= 2.0;
            if hi > MAX_COERCIVITY_RADIUS {
                return Err(Error::NonCoercive { q: y, radius: hi });
            }
        }
        let mut lo = 0.0;
        if hi > 1.0 {
            lo = hi / 2.0;
        }
        while hi - lo > 1e-8 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid > 0.0 && holds(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// ξ(z) = max{K_L(|L^*(0)| + z), 1}.
    ///
    /// When `H` depends on `(t, x)` every envelope evaluation sweeps the
    /// sample lattice, so `z` is first rounded up to 7 significant bits and
    /// the result memoized; ξ is increasing, so the rounded value still
    /// bounds the minimizer.
    pub fn xi(&self, z: f64) -> Result<f64> {
        if self.hamiltonian.tx_free || !(z > 0.0) || !z.is_finite() {
            return self.xi_exact(z);
        }
        let step = 2f64.powi(z.log2().floor() as i32 - 6);
        let z = (z / step).ceil() * step;
        let key = z.to_bits();
        if let Some(&v) = self.xi_memo.lock().expect("xi memo poisoned").get(&key) {
            return Ok(v);
        }
        let v = self.xi_exact(z)?;
        self.xi_memo.lock().expect("xi memo poisoned").insert(key, v);
        Ok(v)
    }

    fn xi_exact(&self, z: f64) -> Result<f64> {
        let l0 = self.upper_env(0.0)?.abs();
        Ok(self.coercivity_radius(l0 + z)?.max(1.0))
    }
}

/// Radius bound on `|x - y*|/Δ` for propagating a function with Lipschitz
/// constant `lip`: ξ(C·lip).
pub fn minimizer_radius(dual: &DualHamiltonian, lip: f64) -> Result<f64> {
    if !(lip >= 0.0) {
        return Err(Error::InvalidArgument(format!("Lipschitz bound {lip} < 0")));
    }
    dual.xi(dual.radius_constant * lip)
}

/// A complete PDE instance.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub coeffs: CoefficientField,
    pub hamiltonian: HamiltonianSpec,
    pub dual: DualHamiltonian,
    pub terminal: TerminalDatum,
    pub horizon: f64,
    /// Set when the instance is the Cole-Hopf benchmark with a closed form.
    pub benchmark: Option<ColeHopfParams>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        coeffs: CoefficientField,
        hamiltonian: HamiltonianSpec,
        terminal: TerminalDatum,
        horizon: f64,
        sample: SampleBox,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon T = {horizon} must be > 0"
            )));
        }
        let dual = DualHamiltonian::new(hamiltonian.clone(), sample);
        Ok(ProblemSpec {
            name: name.into(),
            coeffs,
            hamiltonian,
            dual,
            terminal,
            horizon,
            benchmark: None,
        })
    }

    /// σ = 1, b = 0, H = p²/2, U = clamp(x, 0, K).
    pub fn cole_hopf(k: f64, horizon: f64) -> Result<Self> {
        let mut prob = ProblemSpec::new(
            "cole-hopf",
            CoefficientField::constant(1.0, 0.0),
            HamiltonianSpec::quadratic(),
            TerminalDatum::clamp(k),
            horizon,
            SampleBox::new(0.0, horizon, -15.0, 25.0),
        )?;
        prob.benchmark = Some(ColeHopfParams::new(k, horizon)?);
        Ok(prob)
    }

    pub fn quadratic_drift(a: f64, k: f64, horizon: f64) -> Result<Self> {
        ProblemSpec::new(
            "quadratic-drift",
            CoefficientField::constant(1.0, 0.0),
            HamiltonianSpec::quadratic_drift(a),
            TerminalDatum::clamp(k),
            horizon,
            SampleBox::new(0.0, horizon, -15.0, 25.0),
        )
    }

    pub fn quartic(k: f64, horizon: f64) -> Result<Self> {
        ProblemSpec::new(
            "quartic",
            CoefficientField::constant(1.0, 0.0),
            HamiltonianSpec::quartic(),
            TerminalDatum::clamp(k),
            horizon,
            SampleBox::new(0.0, horizon, -15.0, 25.0),
        )
    }

    pub fn with_terminal(mut self, terminal: TerminalDatum) -> Self {
        self.terminal = terminal;
        self.benchmark = None;
        self
    }

    pub fn with_coefficients(mut self, coeffs: CoefficientField) -> Self {
        self.coeffs = coeffs;
        self.benchmark = None;
        self
    }

    pub fn with_radius_constant(mut self, c: f64) -> Self {
        self.dual.radius_constant = c;
        self
    }

    /// Sampled checks of the declared assumptions. Returns one message per
    /// violated invariant; an empty list means nothing was flagged.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let sample = *self.dual.sample_box();
        let lattice: Vec<(f64, f64)> = sample.lattice().collect();
        let c = &self.coeffs;
        let fd = 1e-6;
        for &(t, x) in &lattice {
            let (s, b) = (c.sigma(t, x), c.drift(t, x));
            if s.abs() > c.bound + 1e-12 || b.abs() > c.bound + 1e-12 {
                issues.push(format!(
                    "coefficient bound {} exceeded at (t={t}, x={x})",
                    c.bound
                ));
                break;
            }
            let ds = (c.sigma(t, x + fd) - s).abs() / fd;
            let db = (c.drift(t, x + fd) - b).abs() / fd;
            if ds.max(db) > c.lipschitz * (1.0 + 1e-4) + 1e-6 {
                issues.push(format!(
                    "coefficient Lipschitz constant {} exceeded at (t={t}, x={x})",
                    c.lipschitz
                ));
                break;
            }
        }
        let u = &self.terminal;
        for j in 0..400 {
            let x = sample.x_min + (sample.x_max - sample.x_min) * j as f64 / 399.0;
            if u.eval(x).abs() > u.bound + 1e-12 {
                issues.push(format!("terminal bound {} exceeded at x={x}", u.bound));
                break;
            }
            let slope = (u.eval(x + fd) - u.eval(x)).abs() / fd;
            if slope > u.lipschitz * (1.0 + 1e-4) + 1e-6 {
                issues.push(format!(
                    "terminal Lipschitz constant {} exceeded at x={x}",
                    u.lipschitz
                ));
                break;
            }
        }
        let h = &self.hamiltonian;
        let ps: Vec<f64> = (0..41).map(|k| -10.0 + 0.5 * k as f64).collect();
        'convex: for &(t, x) in lattice.iter().step_by(37) {
            for (i, &p1) in ps.iter().enumerate() {
                for &p2 in &ps[i + 1..] {
                    let mid = h.eval(t, x, 0.5 * (p1 + p2));
                    let chord = 0.5 * (h.eval(t, x, p1) + h.eval(t, x, p2));
                    if mid > chord + 1e-10 * (1.0 + chord.abs()) {
                        issues.push(format!("H not convex in p at (t={t}, x={x}, p={p1}..{p2})"));
                        break 'convex;
                    }
                }
            }
        }
        'coercive: for &(t, x) in lattice.iter().step_by(37) {
            for y in [0.5, 1.0, 2.0, 5.0, 10.0] {
                let r = h.coercivity_radius(y);
                for m in [1.0, 1.5, 3.0] {
                    for p in [m * r, -m * r] {
                        if p != 0.0 && h.eval(t, x, p) / p.abs() < y - 1e-9 {
                            issues.push(format!(
                                "coercivity radius K_H({y}) = {r} too small at (t={t}, x={x})"
                            ));
                            break 'coercive;
                        }
                    }
                }
            }
        }
        if h.has_analytic_dual() {
            'dual: for &(t, x) in lattice.iter().step_by(97) {
                for q in [-3.0, -1.0, 0.0, 0.5, 2.0] {
                    let analytic = legendre_transform(h, t, x, q);
                    let numeric = numerical_legendre_transform(h, t, x, q);
                    match (analytic, numeric) {
                        (Ok(a), Ok(n)) if (a - n).abs() <= 1e-6 * (1.0 + a.abs()) => {}
                        (a, n) => {
                            issues.push(format!(
                                "declared dual disagrees with numerical conjugate at (t={t}, x={x}, q={q}): {a:?} vs {n:?}"
                            ));
                            break 'dual;
                        }
                    }
                }
            }
        }
        issues
    }
}
