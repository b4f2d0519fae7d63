//! Automorphism step families of ℂᵏ with exact inverses, coefficient
//! sequences with the decay constraints required by the basin constructions,
//! and composed forward/inverse iteration.
//!
//! Composition is zero-based throughout: `F(n) = F_n ∘ ⋯ ∘ F_0`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::num::{ExtComplex, ExtReal, LogMag};

#[derive(Debug, Error)]
pub enum MapsError {
    #[error("dimension mismatch: step expects {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step has no inverse")]
    NoInverse,
    #[error("invalid polynomial for this family: {0}")]
    InvalidPolynomial(String),
    #[error("invalid coefficient sequence: {0}")]
    InvalidSequence(String),
    #[error("non-finite input coordinate")]
    NonFinite,
}

/// Point of ℂᵏ in extended-exponent coordinates.
#[derive(Clone, Debug)]
pub struct CPoint(pub Vec<ExtComplex>);

impl CPoint {
    pub fn zero(dim: usize) -> Self {
        Self(vec![ExtComplex::ZERO; dim])
    }

    pub fn from_f64(coords: &[(f64, f64)]) -> Result<Self, MapsError> {
        coords
            .iter()
            .map(|&(re, im)| ExtComplex::from_f64_pair(re, im).map_err(|_| MapsError::NonFinite))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    pub fn from_complex(coords: &[Complex64]) -> Result<Self, MapsError> {
        let pairs: Vec<(f64, f64)> = coords.iter().map(|c| (c.re, c.im)).collect();
        Self::from_f64(&pairs)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_f64(&self) -> Vec<(f64, f64)> {
        self.0.iter().map(|c| c.to_f64_pair()).collect()
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.0
            .iter()
            .map(|c| {
                let (re, im) = c.to_f64_pair();
                Complex64::new(re, im)
            })
            .collect()
    }

    pub fn is_overflow(&self) -> bool {
        self.0.iter().any(|c| c.is_overflow())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    /// sup-norm: the largest coordinate modulus.
    pub fn norm_inf(&self) -> ExtReal {
        let mut worst = ExtReal::ZERO;
        for c in &self.0 {
            let m = c.modulus_sq();
            if m.magnitude_ge(worst) {
                worst = m;
            }
        }
        worst.sqrt()
    }

    /// Euclidean norm.
    pub fn norm_euclid(&self) -> ExtReal {
        let mut acc = ExtReal::ZERO;
        for c in &self.0 {
            acc = acc.add(c.modulus_sq());
        }
        acc.sqrt()
    }

    /// Membership in the closed polydisc of radius `c` around the origin.
    pub fn in_closed_polydisc(&self, c: ExtReal) -> bool {
        let c_sq = c.mul(c);
        self.0.iter().all(|z| c_sq.magnitude_ge(z.modulus_sq()))
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self(
            self.0
                .iter()
                .zip(&rhs.0)
                .map(|(a, b)| a.add(*b))
                .collect(),
        )
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self(
            self.0
                .iter()
                .zip(&rhs.0)
                .map(|(a, b)| a.sub(*b))
                .collect(),
        )
    }

    pub fn scale(&self, r: ExtReal) -> Self {
        Self(self.0.iter().map(|c| c.scale(r)).collect())
    }

    pub fn dist_euclid(&self, rhs: &Self) -> ExtReal {
        self.sub(rhs).norm_euclid()
    }
}

/// One-variable polynomial `P(z) = Σ cᵢ zⁱ` with real coefficients.
#[derive(Clone, Debug)]
pub struct PolySpec {
    coeffs: Vec<f64>,
    coeffs_ext: Vec<ExtReal>,
}

impl PartialEq for PolySpec {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl PolySpec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, MapsError> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(MapsError::InvalidPolynomial(
                "coefficients must be a nonempty finite list".into(),
            ));
        }
        let coeffs_ext = coeffs
            .iter()
            .map(|&c| ExtReal::from_f64(c).expect("finite"))
            .collect();
        Ok(Self { coeffs, coeffs_ext })
    }

    /// Constant polynomial.
    pub fn constant(c: f64) -> Self {
        Self::new(vec![c]).expect("finite constant")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The constant term `c₀ = P(0)`.
    pub fn c0(&self) -> f64 {
        self.coeffs[0]
    }

    /// Check the positivity constraints of the quadratic-head family:
    /// all coefficients non-negative and `P(0) > 0`.
    pub fn validate_positive(&self) -> Result<(), MapsError> {
        if self.coeffs[0] <= 0.0 {
            return Err(MapsError::InvalidPolynomial(format!(
                "constant term must be positive, got {}",
                self.coeffs[0]
            )));
        }
        if self.coeffs.iter().any(|&c| c < 0.0) {
            return Err(MapsError::InvalidPolynomial(
                "all coefficients must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Horner evaluation in extended-exponent arithmetic.
    pub fn eval_ext(&self, z: ExtComplex) -> ExtComplex {
        let mut acc = ExtComplex::ZERO;
        for &c in self.coeffs_ext.iter().rev() {
            acc = acc.mul(z).add(ExtComplex::from_real(c));
        }
        acc
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// For non-negative coefficients, `sup_{|z| ≤ r} |P(z)| = P(r)`.
    pub fn sup_on_disc(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    fn descriptor(&self) -> String {
        let mut s = String::from("poly[");
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{c:?}");
        }
        s.push(']');
        s
    }
}

/// How an explicit coefficient list continues beyond its stored prefix.
/// Cubing keeps both decay constraints with room to spare.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailRule {
    Cubes,
}

/// Coefficient sequence `{a_n}`, held in the log domain: the values
/// underflow native floats around n ≈ 7 for the default generator.
#[derive(Clone, Debug)]
pub enum CoeffSequence {
    /// `log a_n = −K·gⁿ`; both decay constraints hold exactly when `g > 2`.
    Generator { k_scale: f64, growth: f64 },
    /// Stored prefix of `log a_n`, continued by `tail` beyond it.
    Explicit { logs: Vec<LogMag>, tail: TailRule },
}

impl CoeffSequence {
    pub fn generator(k_scale: f64, growth: f64) -> Result<Self, MapsError> {
        if !(k_scale > 0.0) || !(growth > 0.0) {
            return Err(MapsError::InvalidSequence(
                "generator requires K > 0 and g > 0".into(),
            ));
        }
        Ok(Self::Generator { k_scale, growth })
    }

    pub fn explicit(logs: Vec<LogMag>) -> Result<Self, MapsError> {
        if logs.is_empty() {
            return Err(MapsError::InvalidSequence("empty explicit list".into()));
        }
        if logs.iter().any(|l| !(l.value() < 0.0)) {
            return Err(MapsError::InvalidSequence(
                "explicit log values must be negative (a_n < 1)".into(),
            ));
        }
        Ok(Self::Explicit {
            logs,
            tail: TailRule::Cubes,
        })
    }

    /// `log a_n` (natural log).
    pub fn log_a(&self, n: usize) -> LogMag {
        match self {
            Self::Generator { k_scale, growth } => {
                LogMag::new(-k_scale * growth.powi(n as i32))
            }
            Self::Explicit { logs, tail } => {
                if n < logs.len() {
                    logs[n]
                } else {
                    let last = logs[logs.len() - 1].value();
                    let extra = (n + 1 - logs.len()) as i32;
                    match tail {
                        TailRule::Cubes => LogMag::new(last * 3f64.powi(extra)),
                    }
                }
            }
        }
    }

    /// Stored prefix length (generator: unbounded).
    pub fn prefix_len(&self) -> Option<usize> {
        match self {
            Self::Generator { .. } => None,
            Self::Explicit { logs, .. } => Some(logs.len()),
        }
    }

    fn descriptor(&self) -> String {
        match self {
            Self::Generator { k_scale, growth } => format!("gen(K={k_scale:?},g={growth:?})"),
            Self::Explicit { logs, .. } => {
                let mut s = String::from("explicit[");
                for (i, l) in logs.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    let _ = write!(s, "{:?}", l.value());
                }
                s.push_str("];tail=cubes");
                s
            }
        }
    }
}

/// Per-index report row for the sequence constraints.
#[derive(Clone, Copy, Debug)]
pub struct SequenceCheck {
    pub n: usize,
    /// `0 < a_{n+1} < a_n² < 1`, checked in log domain.
    pub squares_ok: bool,
    /// `2^{-(n+1)} log a_{n+1} < 2^{-n} log a_n` (prefix form of
    /// `a_n^{2^{-n}} → 0`).
    pub root_decay_ok: bool,
}

#[derive(Clone, Debug)]
pub struct SequenceReport {
    pub rows: Vec<SequenceCheck>,
    /// Analytic root-decay verdict for generators (`g > 2`); `None` for
    /// explicit lists, where only the prefix rows speak.
    pub generator_root_decay: Option<bool>,
    pub pass: bool,
}

/// Check both decay constraints up to `n_max` (log domain).
pub fn validate_sequence(seq: &CoeffSequence, n_max: usize) -> SequenceReport {
    let mut rows = Vec::with_capacity(n_max);
    let mut all = true;
    for n in 0..n_max {
        let la = seq.log_a(n).value();
        let lb = seq.log_a(n + 1).value();
        let squares_ok = la < 0.0 && lb < 2.0 * la;
        let root_decay_ok = lb / 2f64.powi(n as i32 + 1) < la / 2f64.powi(n as i32);
        all &= squares_ok && root_decay_ok;
        rows.push(SequenceCheck {
            n,
            squares_ok,
            root_decay_ok,
        });
    }
    let generator_root_decay = match seq {
        CoeffSequence::Generator { growth, .. } => {
            let ok = *growth > 2.0;
            all &= ok;
            Some(ok)
        }
        CoeffSequence::Explicit { .. } => None,
    };
    SequenceReport {
        rows,
        generator_root_decay,
        pass: all,
    }
}

/// One automorphism step.
#[derive(Clone)]
pub enum AutoStep {
    /// Shift-like in ℂᵏ (k ≥ 2):
    /// `z ↦ (z₁²P(z₁) + a·z_k, a·z₁, …, a·z_{k−1})`.
    ShiftLike {
        log_a: LogMag,
        a: ExtReal,
        p: PolySpec,
        dim: usize,
    },
    /// Hénon-like in ℂ²: `(z₁, z₂) ↦ (a·z₂ + p(z₁), a·z₁)` with a general
    /// polynomial p.
    HenonLike {
        log_a: LogMag,
        a: ExtReal,
        p: PolySpec,
    },
    /// `(z₁, z₂) ↦ (z₁ + z₂, ½(1 − z₂ − e^{z₁+z₂}))`; attracting fixed
    /// points at (2mπi, 0). The transcendental part is evaluated natively.
    RosayRudin,
    /// `z ↦ α·z`.
    DiagLinear { alpha: f64, dim: usize },
    /// Conjugation by a translation: `z ↦ F(z + c) − c`, used to move a
    /// non-origin fixed point of the base step to the origin.
    Shifted {
        base: Box<AutoStep>,
        center: Vec<(f64, f64)>,
    },
    /// Arbitrary closures; the inverse is optional.
    Custom {
        dim: usize,
        forward: Arc<dyn Fn(&CPoint) -> CPoint + Send + Sync>,
        inverse: Option<Arc<dyn Fn(&CPoint) -> CPoint + Send + Sync>>,
        tag: String,
    },
}

impl std::fmt::Debug for AutoStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ShiftLike { log_a, p, dim, .. } => f
                .debug_struct("ShiftLike")
                .field("log_a", &log_a.value())
                .field("p", &p.coeffs)
                .field("dim", dim)
                .finish(),
            Self::HenonLike { log_a, p, .. } => f
                .debug_struct("HenonLike")
                .field("log_a", &log_a.value())
                .field("p", &p.coeffs)
                .finish(),
            Self::RosayRudin => write!(f, "RosayRudin"),
            Self::DiagLinear { alpha, dim } => {
                write!(f, "DiagLinear(alpha={alpha}, dim={dim})")
            }
            Self::Shifted { base, center } => f
                .debug_struct("Shifted")
                .field("base", base)
                .field("center", center)
                .finish(),
            Self::Custom { dim, tag, .. } => write!(f, "Custom(dim={dim}, tag={tag})"),
        }
    }
}

impl AutoStep {
    pub fn shift_like(log_a: LogMag, p: PolySpec, dim: usize) -> Result<Self, MapsError> {
        if dim < 2 {
            return Err(MapsError::DimensionMismatch {
                expected: 2,
                got: dim,
            });
        }
        p.validate_positive()?;
        Ok(Self::ShiftLike {
            a: ExtReal::from_log_mag(log_a),
            log_a,
            p,
            dim,
        })
    }

    pub fn henon_like(log_a: LogMag, p: PolySpec) -> Self {
        Self::HenonLike {
            a: ExtReal::from_log_mag(log_a),
            log_a,
            p,
        }
    }

    pub fn diag_linear(alpha: f64, dim: usize) -> Self {
        assert!(alpha != 0.0 && alpha.is_finite(), "alpha must be invertible");
        Self::DiagLinear { alpha, dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ShiftLike { dim, .. } => *dim,
            Self::HenonLike { .. } | Self::RosayRudin => 2,
            Self::DiagLinear { dim, .. } => *dim,
            Self::Shifted { base, .. } => base.dim(),
            Self::Custom { dim, .. } => *dim,
        }
    }

    fn check_dim(&self, z: &CPoint) -> Result<(), MapsError> {
        if z.dim() != self.dim() {
            return Err(MapsError::DimensionMismatch {
                expected: self.dim(),
                got: z.dim(),
            });
        }
        Ok(())
    }

    /// Forward application.
    pub fn apply(&self, z: &CPoint) -> Result<CPoint, MapsError> {
        self.check_dim(z)?;
        Ok(match self {
            Self::ShiftLike { a, p, dim, .. } => {
                let z1 = z.0[0];
                let head = z1.mul(z1).mul(p.eval_ext(z1));
                let mut out = Vec::with_capacity(*dim);
                out.push(head.add(z.0[*dim - 1].scale(*a)));
                for i in 0..*dim - 1 {
                    out.push(z.0[i].scale(*a));
                }
                CPoint(out)
            }
            Self::HenonLike { a, p, .. } => {
                let head = p.eval_ext(z.0[0]);
                CPoint(vec![head.add(z.0[1].scale(*a)), z.0[0].scale(*a)])
            }
            Self::RosayRudin => rosay_rudin_forward(z),
            Self::DiagLinear { alpha, .. } => {
                let a = ExtReal::from_f64(*alpha).expect("finite alpha");
                z.scale(a)
            }
            Self::Shifted { base, center } => {
                let c = CPoint::from_f64(center).expect("finite center");
                base.apply(&z.add(&c))?.sub(&c)
            }
            Self::Custom { forward, .. } => forward(z),
        })
    }

    /// Exact inverse application.
    pub fn apply_inverse(&self, w: &CPoint) -> Result<CPoint, MapsError> {
        self.check_dim(w)?;
        Ok(match self {
            Self::ShiftLike { a, p, dim, .. } => {
                // z_i = w_{i+1}/a for i = 1..k−1, then the head equation.
                let mut z = Vec::with_capacity(*dim);
                for i in 1..*dim {
                    z.push(w.0[i].div_real(*a));
                }
                let z1 = z[0];
                let head = z1.mul(z1).mul(p.eval_ext(z1));
                let zk = w.0[0].sub(head).div_real(*a);
                z.push(zk);
                CPoint(z)
            }
            Self::HenonLike { a, p, .. } => {
                let z1 = w.0[1].div_real(*a);
                let z2 = w.0[0].sub(p.eval_ext(z1)).div_real(*a);
                CPoint(vec![z1, z2])
            }
            Self::RosayRudin => rosay_rudin_inverse(w),
            Self::DiagLinear { alpha, .. } => {
                let a = ExtReal::from_f64(*alpha).expect("finite alpha");
                CPoint(w.0.iter().map(|c| c.div_real(a)).collect())
            }
            Self::Shifted { base, center } => {
                let c = CPoint::from_f64(center).expect("finite center");
                base.apply_inverse(&w.add(&c))?.sub(&c)
            }
            Self::Custom { inverse, .. } => match inverse {
                Some(inv) => inv(w),
                None => return Err(MapsError::NoInverse),
            },
        })
    }
}

fn ext_from_complex(c: Complex64) -> ExtComplex {
    if !c.re.is_finite() || !c.im.is_finite() {
        // Transcendental overflow saturates like exponent overflow.
        let re = if c.re.is_finite() {
            ExtReal::from_f64(c.re).unwrap()
        } else {
            ExtReal::overflowed(if c.re < 0.0 { -1 } else { 1 })
        };
        let im = if c.im.is_finite() {
            ExtReal::from_f64(c.im).unwrap()
        } else {
            ExtReal::overflowed(if c.im < 0.0 { -1 } else { 1 })
        };
        return ExtComplex::new(re, im);
    }
    ExtComplex::from_f64_pair(c.re, c.im).expect("finite")
}

fn complex_from_ext(c: ExtComplex) -> Complex64 {
    let (re, im) = c.to_f64_pair();
    Complex64::new(re, im)
}

fn rosay_rudin_forward(z: &CPoint) -> CPoint {
    let s = z.0[0].add(z.0[1]);
    let es = complex_from_ext(s).exp();
    let one = ExtComplex::ONE;
    let half = ExtReal::from_f64(0.5).unwrap();
    let inner = one.sub(z.0[1]).sub(ext_from_complex(es));
    CPoint(vec![s, inner.scale(half)])
}

fn rosay_rudin_inverse(w: &CPoint) -> CPoint {
    // z₂ = 1 − 2w₂ − e^{w₁}, z₁ = w₁ − z₂.
    let ew = complex_from_ext(w.0[0]).exp();
    let two = ExtReal::from_f64(2.0).unwrap();
    let z2 = ExtComplex::ONE
        .sub(w.0[1].scale(two))
        .sub(ext_from_complex(ew));
    let z1 = w.0[0].sub(z2);
    CPoint(vec![z1, z2])
}

/// Lazily-indexed sequence of automorphism steps, fixed dimension.
#[derive(Clone)]
pub struct MapSequence {
    dim: usize,
    step_fn: Arc<dyn Fn(usize) -> AutoStep + Send + Sync>,
    descriptor: String,
}

impl std::fmt::Debug for MapSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MapSequence(dim={}, {})", self.dim, self.descriptor)
    }
}

impl MapSequence {
    /// Shift-like sequence with the given coefficient schedule. The
    /// polynomial must satisfy the positivity constraints.
    pub fn shift_like(dim: usize, coeffs: CoeffSequence, p: PolySpec) -> Result<Self, MapsError> {
        p.validate_positive()?;
        if dim < 2 {
            return Err(MapsError::DimensionMismatch {
                expected: 2,
                got: dim,
            });
        }
        let descriptor = format!("shift_like(k={dim},{},{})", coeffs.descriptor(), p.descriptor());
        let pc = p.clone();
        let cc = coeffs.clone();
        Ok(Self {
            dim,
            step_fn: Arc::new(move |n| {
                AutoStep::shift_like(cc.log_a(n), pc.clone(), dim).expect("validated at build")
            }),
            descriptor,
        })
    }

    /// Hénon-like sequence `(a_n w + p(z), a_n z)` in ℂ².
    pub fn henon_like(coeffs: CoeffSequence, p: PolySpec) -> Self {
        let descriptor = format!("henon_like({},{})", coeffs.descriptor(), p.descriptor());
        Self {
            dim: 2,
            step_fn: Arc::new(move |n| AutoStep::henon_like(coeffs.log_a(n), p.clone())),
            descriptor,
        }
    }

    /// Contracting triangular shear of ℂ², constant at every step:
    /// `(z₁, z₂) ↦ (α z₁ + β z₂², α z₂)`, inverse
    /// `(w₁, w₂) ↦ ((w₁ − β(w₂/α)²)/α, w₂/α)`. Satisfies the uniform upper
    /// bound on small balls while staying genuinely nonlinear.
    pub fn shear_contraction(alpha: f64, beta: f64) -> Self {
        assert!(alpha != 0.0 && alpha.is_finite() && beta.is_finite());
        let descriptor = format!("shear_contraction(alpha={alpha:?},beta={beta:?})");
        let a = ExtReal::from_f64(alpha).expect("finite");
        let b = ExtReal::from_f64(beta).expect("finite");
        Self {
            dim: 2,
            step_fn: Arc::new(move |_| AutoStep::Custom {
                dim: 2,
                forward: Arc::new(move |z: &CPoint| {
                    let sq = z.0[1].mul(z.0[1]);
                    CPoint(vec![z.0[0].scale(a).add(sq.scale(b)), z.0[1].scale(a)])
                }),
                inverse: Some(Arc::new(move |w: &CPoint| {
                    let z2 = w.0[1].div_real(a);
                    let z1 = w.0[0].sub(z2.mul(z2).scale(b)).div_real(a);
                    CPoint(vec![z1, z2])
                })),
                tag: "shear".into(),
            }),
            descriptor,
        }
    }

    /// Constant diagonal contraction `z ↦ αz` at every step.
    pub fn diag_linear(alpha: f64, dim: usize) -> Self {
        let descriptor = format!("diag_linear(alpha={alpha:?},k={dim})");
        Self {
            dim,
            step_fn: Arc::new(move |_| AutoStep::diag_linear(alpha, dim)),
            descriptor,
        }
    }

    /// The Rosay–Rudin automorphism at every step, conjugated so that the
    /// attracting fixed point (2mπi, 0) sits at the origin.
    pub fn rosay_rudin(m: i64) -> Self {
        let descriptor = format!("rosay_rudin(m={m})");
        Self {
            dim: 2,
            step_fn: Arc::new(move |_| {
                if m == 0 {
                    AutoStep::RosayRudin
                } else {
                    AutoStep::Shifted {
                        base: Box::new(AutoStep::RosayRudin),
                        center: vec![(0.0, 2.0 * std::f64::consts::PI * m as f64), (0.0, 0.0)],
                    }
                }
            }),
            descriptor,
        }
    }

    /// Sequence from an arbitrary step generator.
    pub fn from_fn(
        dim: usize,
        descriptor: impl Into<String>,
        f: impl Fn(usize) -> AutoStep + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            step_fn: Arc::new(f),
            descriptor: descriptor.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Canonical text describing the sequence; feeds scenario manifests.
    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn step_at(&self, n: usize) -> AutoStep {
        let s = (self.step_fn)(n);
        debug_assert_eq!(s.dim(), self.dim);
        s
    }

    /// `[z, F(0)(z), …, F(n)(z)]` with `F(n) = F_n ∘ ⋯ ∘ F_0`. Iteration
    /// stops early once a coordinate overflows (the escaped sentinel), so the
    /// final entry of a short orbit is the overflowed point.
    pub fn forward_orbit(&self, z: &CPoint, n: usize) -> Result<Vec<CPoint>, MapsError> {
        let mut orbit = Vec::with_capacity(n + 2);
        orbit.push(z.clone());
        let mut cur = z.clone();
        for i in 0..=n {
            cur = self.step_at(i).apply(&cur)?;
            let stop = cur.is_overflow();
            orbit.push(cur.clone());
            if stop {
                break;
            }
        }
        Ok(orbit)
    }

    /// `F(n)(z)` alone.
    pub fn apply_n(&self, z: &CPoint, n: usize) -> Result<CPoint, MapsError> {
        let mut cur = self.step_at(0).apply(z)?;
        for i in 1..=n {
            if cur.is_overflow() {
                return Ok(cur);
            }
            cur = self.step_at(i).apply(&cur)?;
        }
        Ok(cur)
    }

    /// `F(n)⁻¹(w) = F_0⁻¹ ∘ ⋯ ∘ F_n⁻¹ (w)`.
    pub fn apply_inverse_chain(&self, w: &CPoint, n: usize) -> Result<CPoint, MapsError> {
        let mut cur = w.clone();
        for i in (0..=n).rev() {
            cur = self.step_at(i).apply_inverse(&cur)?;
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(coords: &[(f64, f64)]) -> CPoint {
        CPoint::from_f64(coords).unwrap()
    }

    fn log_of(a: f64) -> LogMag {
        LogMag::new(a.ln())
    }

    #[test]
    fn shift_like2_hand_example() {
        // a = 0.1, P ≡ 1: (1, 1) ↦ (0.1 + 1, 0.1).
        let step = AutoStep::shift_like(log_of(0.1), PolySpec::constant(1.0), 2).unwrap();
        let w = step.apply(&pt(&[(1.0, 0.0), (1.0, 0.0)])).unwrap();
        let coords = w.to_f64();
        assert!((coords[0].0 - 1.1).abs() < 1e-12);
        assert!((coords[1].0 - 0.1).abs() < 1e-12);

        let z = step.apply_inverse(&w).unwrap();
        let back = z.to_f64();
        assert!((back[0].0 - 1.0).abs() < 1e-10);
        assert!((back[1].0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn origin_fixed_by_all_families() {
        let zero2 = CPoint::zero(2);
        let steps = [
            AutoStep::shift_like(log_of(0.1), PolySpec::constant(1.0), 2).unwrap(),
            AutoStep::henon_like(log_of(0.3), PolySpec::new(vec![0.0, 0.0, 1.0]).unwrap()),
            AutoStep::RosayRudin,
            AutoStep::diag_linear(0.5, 2),
        ];
        for step in steps {
            let w = step.apply(&zero2).unwrap();
            assert!(w.is_zero(), "{step:?} moved the origin to {:?}", w.to_f64());
        }
    }

    #[test]
    fn rosay_rudin_shifted_fixed_point() {
        let seq = MapSequence::rosay_rudin(1);
        let w = seq.step_at(0).apply(&CPoint::zero(2)).unwrap();
        // (2πi, 0) is fixed by the base map, so the shifted step fixes 0.
        let n = w.norm_inf().to_f64();
        assert!(n < 1e-12, "shifted fixed point moved by {n}");
    }

    #[test]
    fn diag_linear_inverse() {
        let step = AutoStep::diag_linear(0.5, 2);
        let z = step.apply_inverse(&pt(&[(1.0, 0.0), (0.0, 0.0)])).unwrap();
        assert_eq!(z.to_f64()[0].0, 2.0);
    }

    #[test]
    fn shift_like_k_permutation_structure() {
        let step = AutoStep::shift_like(log_of(0.25), PolySpec::constant(1.0), 4).unwrap();
        let z = pt(&[(0.1, 0.2), (0.3, -0.1), (0.05, 0.0), (-0.2, 0.4)]);
        let w = step.apply(&z).unwrap();
        // Coordinates 2..k of the image are exactly a·(coordinates 1..k−1).
        let a = ExtReal::from_log_mag(log_of(0.25));
        for i in 0..3 {
            let want = z.0[i].scale(a);
            let diff = w.0[i + 1].sub(want).modulus().to_f64();
            assert_eq!(diff, 0.0);
        }
    }

    #[test]
    fn inverse_round_trip_with_tiny_coefficient() {
        // For tiny a_n the inverse is only meaningful on image points: the
        // contracted coordinate of a generic point sits below the mantissa of
        // the dominant one. Forward-of-inverse on the image stays exact.
        let step = AutoStep::shift_like(LogMag::new(-27.0), PolySpec::constant(1.0), 2).unwrap();
        let z = pt(&[(0.3, 0.1), (-0.2, 0.05)]);
        let w = step.apply(&z).unwrap();
        let back = step.apply(&step.apply_inverse(&w).unwrap()).unwrap();
        let err = back.dist_euclid(&w).to_f64() / w.norm_euclid().to_f64();
        assert!(err < 1e-12, "relative error {err}");
    }

    #[test]
    fn custom_without_inverse_errors() {
        let step = AutoStep::Custom {
            dim: 2,
            forward: Arc::new(|z: &CPoint| z.clone()),
            inverse: None,
            tag: "id".into(),
        };
        assert!(matches!(
            step.apply_inverse(&CPoint::zero(2)),
            Err(MapsError::NoInverse)
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let step = AutoStep::diag_linear(0.5, 3);
        assert!(matches!(
            step.apply(&CPoint::zero(2)),
            Err(MapsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forward_orbit_shape_and_zero() {
        let seq = MapSequence::shift_like(
            2,
            CoeffSequence::generator(1.0, 3.0).unwrap(),
            PolySpec::constant(1.0),
        )
        .unwrap();
        let orbit = seq.forward_orbit(&CPoint::zero(2), 0).unwrap();
        assert_eq!(orbit.len(), 2); // [z, F(0)(z)]
        assert!(orbit[1].is_zero());

        let orbit = seq.forward_orbit(&CPoint::zero(2), 7).unwrap();
        assert!(orbit.iter().all(|p| p.is_zero()));
    }

    #[test]
    fn forward_orbit_log_norm_strictly_decreasing() {
        let seq = MapSequence::shift_like(
            2,
            CoeffSequence::generator(1.0, 3.0).unwrap(),
            PolySpec::constant(1.0),
        )
        .unwrap();
        let orbit = seq
            .forward_orbit(&pt(&[(0.1, 0.0), (0.1, 0.0)]), 10)
            .unwrap();
        let logs: Vec<f64> = orbit
            .iter()
            .map(|p| p.norm_inf().log_magnitude().value())
            .collect();
        for w in logs.windows(2) {
            assert!(w[1] < w[0], "log norms {logs:?} not strictly decreasing");
        }
    }

    /// Exact-rational cross-check of the composed iteration at low n: the
    /// step coefficient and starting point are f64 values, hence exact
    /// rationals, and the whole orbit can be recomputed in BigRational.
    #[test]
    fn forward_orbit_matches_rational_iteration() {
        use num::rational::BigRational;
        use num::FromPrimitive;

        let a = 0.1f64;
        let step = AutoStep::ShiftLike {
            log_a: log_of(a),
            a: ExtReal::from_f64(a).unwrap(),
            p: PolySpec::constant(1.0),
            dim: 2,
        };
        let seq_a = BigRational::from_f64(a).unwrap();
        let mut rz1 = BigRational::from_f64(0.1).unwrap();
        let mut rz2 = rz1.clone();

        let mut z = pt(&[(0.1, 0.0), (0.1, 0.0)]);
        for _ in 0..4 {
            z = step.apply(&z).unwrap();
            let nz1 = &seq_a * &rz2 + &rz1 * &rz1;
            let nz2 = &seq_a * &rz1;
            rz1 = nz1;
            rz2 = nz2;

            let got = z.to_f64();
            let want1 = rational_to_f64(&rz1);
            let want2 = rational_to_f64(&rz2);
            assert!((got[0].0 - want1).abs() <= 1e-12 * want1.abs());
            assert!((got[1].0 - want2).abs() <= 1e-12 * want2.abs());
        }
    }

    fn rational_to_f64(r: &num::rational::BigRational) -> f64 {
        use num::ToPrimitive;
        r.to_f64().unwrap()
    }

    #[test]
    fn validate_generator_sequences() {
        let good = CoeffSequence::generator(1.0, 3.0).unwrap();
        let rep = validate_sequence(&good, 40);
        assert!(rep.pass);
        assert_eq!(rep.generator_root_decay, Some(true));

        // g = 2 makes 2^{-n} log a_n constant: root decay fails.
        let flat = CoeffSequence::generator(1.0, 2.0).unwrap();
        let rep = validate_sequence(&flat, 10);
        assert!(!rep.pass);
        assert_eq!(rep.generator_root_decay, Some(false));
        assert!(rep.rows.iter().all(|r| !r.root_decay_ok));
    }

    #[test]
    fn validate_explicit_prefix() {
        // 0.009 < 0.1² = 0.01: prefix passes.
        let seq =
            CoeffSequence::explicit(vec![log_of(0.1), log_of(0.009)]).unwrap();
        let rep = validate_sequence(&seq, 1);
        assert!(rep.pass, "{:?}", rep.rows);

        let bad = CoeffSequence::explicit(vec![log_of(0.1), log_of(0.02)]).unwrap();
        assert!(!validate_sequence(&bad, 1).pass);
    }

    #[test]
    fn shift_like_rejects_bad_polynomials() {
        assert!(MapSequence::shift_like(
            2,
            CoeffSequence::generator(1.0, 3.0).unwrap(),
            PolySpec::new(vec![0.0, 1.0]).unwrap(),
        )
        .is_err());
        assert!(MapSequence::shift_like(
            2,
            CoeffSequence::generator(1.0, 3.0).unwrap(),
            PolySpec::new(vec![1.0, -0.5]).unwrap(),
        )
        .is_err());
    }

    proptest! {
        /// Inverse-of-forward round trip within the unit polydisc, moderate
        /// coefficients. The recovery error of the contracted coordinate
        /// scales like ulp·|z₁²P(z₁)|/(a·|z_k|), so a is kept above e⁻⁵.
        #[test]
        fn round_trip_in_unit_polydisc(
            re1 in -1.0f64..1.0, im1 in -1.0f64..1.0,
            re2 in -1.0f64..1.0, im2 in -1.0f64..1.0,
            a_log in -5.0f64..-0.1,
        ) {
            prop_assume!(re2.abs() + im2.abs() > 1e-3);
            let step = AutoStep::shift_like(
                LogMag::new(a_log),
                PolySpec::new(vec![1.0, 1.0]).unwrap(),
                2,
            ).unwrap();
            let z = pt(&[(re1, im1), (re2, im2)]);
            let w = step.apply(&z).unwrap();
            let back = step.apply_inverse(&w).unwrap();
            let denom = z.norm_euclid().to_f64().max(1e-300);
            let err = back.dist_euclid(&z).to_f64() / denom;
            prop_assert!(err < 1e-10, "round-trip error {err}");
        }

        /// Inverse-of-forward round trip for Hénon-like steps with moderate a.
        #[test]
        fn henon_round_trip(
            re1 in -1.0f64..1.0, im1 in -1.0f64..1.0,
            re2 in -1.0f64..1.0, im2 in -1.0f64..1.0,
        ) {
            let step = AutoStep::henon_like(
                LogMag::new(-1.2),
                PolySpec::new(vec![0.0, 0.0, 1.0, 0.01]).unwrap(),
            );
            let z = pt(&[(re1, im1), (re2, im2)]);
            let w = step.apply(&z).unwrap();
            let back = step.apply_inverse(&w).unwrap();
            let denom = z.norm_euclid().to_f64().max(1e-12);
            let err = back.dist_euclid(&z).to_f64() / denom;
            prop_assert!(err < 1e-10, "round-trip error {err}");
        }

        #[test]
        fn rosay_rudin_round_trip(
            re1 in -0.5f64..0.5, im1 in -0.5f64..0.5,
            re2 in -0.5f64..0.5, im2 in -0.5f64..0.5,
        ) {
            let z = pt(&[(re1, im1), (re2, im2)]);
            let w = AutoStep::RosayRudin.apply(&z).unwrap();
            let back = AutoStep::RosayRudin.apply_inverse(&w).unwrap();
            let err = back.dist_euclid(&z).to_f64();
            prop_assert!(err < 1e-12, "round-trip error {err}");
        }
    }
}
