//! Ground-truth physical processes: the LTI plant, the two-state context
//! chain, the AoI-indexed covariance sums and the violation indicator.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete-time LTI plant `x' = A x + B u + w`, `w ~ N(0, Rw)`, with the
/// scalar output row `C` used for goal and trigger tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: RowDVector<f64>,
    rw: DMatrix<f64>,
}

impl SystemModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: RowDVector<f64>, rw: DMatrix<f64>) -> Result<Self> {
        let m = a.nrows();
        if m == 0 || a.ncols() != m {
            return Err(Error::Config(format!("A must be square with m >= 1, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != m || b.ncols() == 0 {
            return Err(Error::Config(format!("B must be {m}xn with n >= 1, got {}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != m {
            return Err(Error::Config(format!("C must be 1x{m}, got 1x{}", c.ncols())));
        }
        if rw.nrows() != m || rw.ncols() != m {
            return Err(Error::Config(format!("Rw must be {m}x{m}, got {}x{}", rw.nrows(), rw.ncols())));
        }
        let all = a.iter().chain(b.iter()).chain(c.iter()).chain(rw.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Config("model matrices must have finite entries".into()));
        }
        check_psd(&rw)?;
        Ok(Self { a, b, c, rw })
    }

    /// Load-frequency-control plant used throughout the case study.
    pub fn lfc() -> Self {
        Self::new(
            DMatrix::from_row_slice(3, 3, &[-0.08, 6.0, 0.0, 0.0, -0.25, 0.25, -0.4167, 0.0, -1.25]),
            DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.25]),
            RowDVector::from_row_slice(&[1.0, 0.0, 0.0]),
            DMatrix::identity(3, 3) * 1e-7,
        )
        .expect("built-in model is valid")
    }

    /// The slowly-evolving alternative plant (spectral radius 1.1).
    pub fn lfc_quasi_static() -> Self {
        Self::lfc()
            .with_a(DMatrix::from_row_slice(3, 3, &[0.08, 1.1, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 1.1]))
            .expect("built-in model is valid")
    }

    pub fn with_a(&self, a: DMatrix<f64>) -> Result<Self> {
        Self::new(a, self.b.clone(), self.c.clone(), self.rw.clone())
    }

    pub fn with_b(&self, b: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), b, self.c.clone(), self.rw.clone())
    }

    pub fn with_noise(&self, rw: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), rw)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn rw(&self) -> &DMatrix<f64> {
        &self.rw
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Scalar output `C x`.
    pub fn output(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(&x.transpose())
    }

    /// Scalar quadratic form `C M Cᵀ`.
    pub fn output_variance(&self, m: &DMatrix<f64>) -> f64 {
        (&self.c * m * self.c.transpose())[(0, 0)]
    }

    pub fn noise_sampler(&self) -> NoiseSampler {
        NoiseSampler::new(&self.rw).expect("Rw validated at construction")
    }
}

fn check_psd(rw: &DMatrix<f64>) -> Result<()> {
    let scale = rw.amax().max(1.0);
    if (rw - rw.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Config("Rw must be symmetric".into()));
    }
    let min_eig = rw.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-12 * scale {
        return Err(Error::Config(format!("Rw must be positive semidefinite (min eigenvalue {min_eig:e})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub k: u64,
}

impl PlantState {
    pub fn zero(m: usize) -> Self {
        Self { x: DVector::zeros(m), k: 0 }
    }
}

/// `x' = A x + B u + w`.
pub fn plant_step(model: &SystemModel, state: &PlantState, u: &DVector<f64>, w: &DVector<f64>) -> Result<PlantState> {
    let m = model.state_dim();
    if state.x.len() != m || w.len() != m || u.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "plant step expects x,w of length {m} and u of length {}, got {}, {}, {}",
            model.input_dim(),
            state.x.len(),
            w.len(),
            u.len()
        )));
    }
    Ok(PlantState { x: model.a() * &state.x + model.b() * u + w, k: state.k + 1 })
}

/// Draws from `N(0, Rw)` through a precomputed square-root factor. The
/// factor comes from a symmetric eigendecomposition so singular (and zero)
/// covariances are handled.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    factor: DMatrix<f64>,
}

impl NoiseSampler {
    pub fn new(rw: &DMatrix<f64>) -> Result<Self> {
        if rw.nrows() != rw.ncols() {
            return Err(Error::Config("noise covariance must be square".into()));
        }
        check_psd(rw)?;
        let eig = rw.clone().symmetric_eigen();
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self { factor })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }
}

/// One draw of the process noise for `model`.
pub fn sample_noise<R: Rng + ?Sized>(model: &SystemModel, rng: &mut R) -> DVector<f64> {
    model.noise_sampler().sample(rng)
}

/// Environment condition. `Sensitive` is the context with the tighter
/// tolerance (v = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Context {
    Nominal,
    Sensitive,
}

impl Context {
    pub fn bit(self) -> u8 {
        match self {
            Context::Nominal => 0,
            Context::Sensitive => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Context::Nominal
        } else {
            Context::Sensitive
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Context::Nominal => Context::Sensitive,
            Context::Sensitive => Context::Nominal,
        }
    }
}

/// Symmetric two-state chain: stay with `p_self`, switch with `1 - p_self`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextChain {
    p_self: f64,
}

impl ContextChain {
    pub fn new(p_self: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_self) {
            return Err(Error::validation("context.p_self", "p_self ∈ [0,1]"));
        }
        Ok(Self { p_self })
    }

    pub fn p_self(&self) -> f64 {
        self.p_self
    }

    pub fn p_switch(&self) -> f64 {
        1.0 - self.p_self
    }

    /// `P(v' = to | v = from)`.
    pub fn prob(&self, from: Context, to: Context) -> f64 {
        if from == to {
            self.p_self
        } else {
            self.p_switch()
        }
    }
}

pub fn context_step<R: Rng + ?Sized>(chain: &ContextChain, v: Context, rng: &mut R) -> Context {
    if rng.gen::<f64>() < chain.p_self() {
        v
    } else {
        v.flipped()
    }
}

/// Context-dependent violation thresholds on `|C x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub zeta0: f64,
    pub zeta1: f64,
}

impl Thresholds {
    pub fn new(zeta0: f64, zeta1: f64) -> Result<Self> {
        if !(zeta0 > 0.0 && zeta0.is_finite()) {
            return Err(Error::validation("thresholds.zeta0", "zeta0 > 0"));
        }
        if !(zeta1 > 0.0 && zeta1.is_finite()) {
            return Err(Error::validation("thresholds.zeta1", "zeta1 > 0"));
        }
        Ok(Self { zeta0, zeta1 })
    }

    pub fn lfc() -> Self {
        Self { zeta0: 0.1, zeta1: 0.01 }
    }

    pub fn for_context(&self, v: Context) -> f64 {
        match v {
            Context::Nominal => self.zeta0,
            Context::Sensitive => self.zeta1,
        }
    }
}

/// `Θ(Δ) = Σ_{i=1..Δ} A^{i-1} Rw (Aᵀ)^{i-1}`: estimation-error covariance at AoI `delta`.
pub fn error_covariance(model: &SystemModel, delta: u32) -> Result<DMatrix<f64>> {
    if delta < 1 {
        return Err(Error::Argument("AoI must be >= 1".into()));
    }
    let a = model.a();
    let mut power = DMatrix::identity(model.state_dim(), model.state_dim());
    let mut sum = DMatrix::zeros(model.state_dim(), model.state_dim());
    for _ in 0..delta {
        sum += &power * model.rw() * power.transpose();
        power = a * power;
    }
    Ok(sum)
}

/// `Φ(Δ) = Σ_{i=1..Δ} A^i Rw (Aᵀ)^i + Rw`: plant covariance one slot after a
/// successful cancellation computed from an estimate of AoI `delta`.
pub fn plant_covariance_after_control(model: &SystemModel, delta: u32) -> Result<DMatrix<f64>> {
    if delta < 1 {
        return Err(Error::Argument("AoI must be >= 1".into()));
    }
    let a = model.a();
    let mut power = a.clone();
    let mut sum = model.rw().clone();
    for _ in 0..delta {
        sum += &power * model.rw() * power.transpose();
        power = a * power;
    }
    Ok(sum)
}

/// Goal indicator: true iff `|C x| > ζ_v` for the true context.
pub fn violation_indicator(th: &Thresholds, model: &SystemModel, x: &PlantState, v: Context) -> bool {
    model.output(&x.x).abs() > th.for_context(v)
}

pub fn spectral_radius(model: &SystemModel) -> f64 {
    spectral_radius_of(model.a()).expect("A is square by construction")
}

pub fn spectral_radius_of(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Config(format!("spectral radius needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, b: f64, rw: f64) -> SystemModel {
        SystemModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            RowDVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, rw),
        )
        .unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let m = SystemModel::lfc();
        let next = plant_step(&m, &PlantState::zero(3), &DVector::zeros(1), &DVector::zeros(3)).unwrap();
        assert_eq!(next.x, DVector::zeros(3));
        assert_eq!(next.k, 1);
    }

    #[test]
    fn unit_state_maps_to_first_column() {
        let m = SystemModel::lfc();
        let x = PlantState { x: DVector::from_vec(vec![1.0, 0.0, 0.0]), k: 0 };
        let next = plant_step(&m, &x, &DVector::zeros(1), &DVector::zeros(3)).unwrap();
        assert_eq!(next.x.as_slice(), &[-0.08, 0.0, -0.4167]);
    }

    #[test]
    fn identity_input_cancels_dynamics() {
        let a = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, -0.4, 0.9]);
        let m = SystemModel::new(a.clone(), DMatrix::identity(2, 2), RowDVector::from_row_slice(&[1.0, 0.0]), DMatrix::zeros(2, 2)).unwrap();
        let x = PlantState { x: DVector::from_vec(vec![0.7, -2.0]), k: 3 };
        let u = -(&a * &x.x);
        let next = plant_step(&m, &x, &u, &DVector::zeros(2)).unwrap();
        assert!(next.x.amax() < 1e-15);
    }

    #[test]
    fn plant_step_rejects_bad_dimensions() {
        let m = SystemModel::lfc();
        let err = plant_step(&m, &PlantState::zero(2), &DVector::zeros(1), &DVector::zeros(3));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn model_rejects_non_psd_noise() {
        let m = SystemModel::lfc();
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(matches!(m.with_noise(bad), Err(Error::Config(_))));
        assert!(matches!(NoiseSampler::new(&DMatrix::from_element(1, 1, -1.0)), Err(Error::Config(_))));
    }

    #[test]
    fn zero_noise_always_zero() {
        let m = SystemModel::lfc().with_noise(DMatrix::zeros(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_noise(&m, &mut rng), DVector::zeros(3));
        }
    }

    #[test]
    fn noise_sample_covariance_matches() {
        let m = SystemModel::lfc();
        let s = m.noise_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut acc = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let w = s.sample(&mut rng);
            acc += &w * w.transpose();
        }
        acc /= n as f64;
        for i in 0..3 {
            assert!((acc[(i, i)] - 1e-7).abs() < 0.1e-7, "diag {i}: {}", acc[(i, i)]);
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let s = SystemModel::lfc().noise_sampler();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn context_chain_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stay = ContextChain::new(1.0).unwrap();
        let flip = ContextChain::new(0.0).unwrap();
        let mut v = Context::Nominal;
        for _ in 0..100 {
            assert_eq!(context_step(&stay, v, &mut rng), v);
            let next = context_step(&flip, v, &mut rng);
            assert_eq!(next, v.flipped());
            v = next;
        }
        assert!(ContextChain::new(1.2).is_err());
    }

    #[test]
    fn symmetric_chain_occupancy_is_half() {
        let chain = ContextChain::new(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = Context::Nominal;
        let n = 100_000;
        let mut ones = 0;
        for _ in 0..n {
            v = context_step(&chain, v, &mut rng);
            ones += v.bit() as usize;
        }
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn covariance_sums_small_aoi() {
        let m = SystemModel::lfc();
        let a = m.a();
        assert_eq!(error_covariance(&m, 1).unwrap(), *m.rw());
        let two = m.rw() + a * m.rw() * a.transpose();
        assert_relative_eq!(error_covariance(&m, 2).unwrap(), two, epsilon = 1e-20);
        assert_relative_eq!(plant_covariance_after_control(&m, 1).unwrap(), two, epsilon = 1e-20);
        assert!(matches!(error_covariance(&m, 0), Err(Error::Argument(_))));
        assert!(matches!(plant_covariance_after_control(&m, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn noiseless_plant_has_zero_covariance() {
        let m = SystemModel::lfc().with_noise(DMatrix::zeros(3, 3)).unwrap();
        for d in 1..10 {
            assert_eq!(plant_covariance_after_control(&m, d).unwrap(), DMatrix::zeros(3, 3));
        }
    }

    #[test]
    fn violation_boundaries() {
        let m = SystemModel::lfc();
        let th = Thresholds::lfc();
        let at = |cx: f64| PlantState { x: DVector::from_vec(vec![cx, 0.3, -0.2]), k: 0 };
        assert!(!violation_indicator(&th, &m, &PlantState::zero(3), Context::Nominal));
        assert!(!violation_indicator(&th, &m, &PlantState::zero(3), Context::Sensitive));
        assert!(!violation_indicator(&th, &m, &at(0.05), Context::Nominal));
        assert!(violation_indicator(&th, &m, &at(-0.05), Context::Sensitive));
        assert!(!violation_indicator(&th, &m, &at(0.1), Context::Nominal));
        assert!(!violation_indicator(&th, &m, &at(0.01), Context::Sensitive));
    }

    #[test]
    fn spectral_radius_cases() {
        assert_relative_eq!(spectral_radius_of(&DMatrix::identity(3, 3)).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(spectral_radius_of(&(DMatrix::identity(2, 2) * 2.0)).unwrap(), 2.0, epsilon = 1e-12);
        assert!(spectral_radius(&SystemModel::lfc()) > 1.0);
        assert!(matches!(spectral_radius_of(&DMatrix::zeros(2, 3)), Err(Error::Config(_))));
        assert_relative_eq!(spectral_radius(&scalar(-1.5, 1.0, 0.0)), 1.5, epsilon = 1e-12);
    }
}
