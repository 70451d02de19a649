//! Guaranteed-lower-bound constants, conditions and certificates.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlbParams {
    pub alpha: f64,
    pub c_apx: f64,
    pub h_max: f64,
    pub dim: usize,
    /// δ = C_apx² h_max²
    pub delta: f64,
    /// Λ = (C_apx + 2/(n+1)) C_apx/(n+1)
    pub lambda_const: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn derive_constants(alpha: f64, c_apx: f64, h_max: f64, dim: usize) -> Result<GlbParams> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
    }
    positive("C_apx", c_apx)?;
    positive("h_max", h_max)?;
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let n1 = (dim + 1) as f64;
    Ok(GlbParams {
        alpha,
        c_apx,
        h_max,
        dim,
        delta: c_apx * c_apx * h_max * h_max,
        // (C + 2/(n+1)) C/(n+1) with a single final division
        lambda_const: c_apx * (c_apx * n1 + 2.0) / (n1 * n1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// δλ + αΛ ≤ 1 with a reference eigenvalue
    I,
    /// δλ_h + αΛ ≤ 1
    Ii,
    /// max{α, min{λ, λ_h} h_max²} ≤ κ_CR⁻²
    LowestOrder,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::I => "i",
            Condition::Ii => "ii",
            Condition::LowestOrder => "lowest-order",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "i" => Some(Condition::I),
            "ii" => Some(Condition::Ii),
            "lowest-order" => Some(Condition::LowestOrder),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedLowerBound,
    NotCertified,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::CertifiedLowerBound => "certified-lower-bound",
            Verdict::NotCertified => "not-certified",
        }
    }
}

/// The decisive condition with its left-hand side, threshold and
/// `margin = threshold − lhs`. Margins of the individually evaluated
/// conditions are kept alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlbCertificate {
    pub condition: Condition,
    pub lhs: f64,
    pub threshold: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub margin_i: Option<f64>,
    pub margin_ii: Option<f64>,
}

impl GlbCertificate {
    fn new(condition: Condition, lhs: f64, threshold: f64) -> Self {
        let margin = threshold - lhs;
        Self {
            condition,
            lhs,
            threshold,
            margin,
            verdict: if margin >= 0.0 { Verdict::CertifiedLowerBound } else { Verdict::NotCertified },
            margin_i: None,
            margin_ii: None,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedLowerBound
    }

    /// Parses the key=value block written by `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("certificate line without '=': {line}")))?;
            map.insert(k.trim(), v.trim());
        }
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::InvalidArgument(format!("certificate lacks '{k}'")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::InvalidArgument(format!("certificate field '{k}' is not a number")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "none" => Ok(None),
                v => v.parse().map(Some).map_err(|_| Error::InvalidArgument(format!("certificate field '{k}' is not a number"))),
            }
        };
        let condition =
            Condition::parse(get("condition")?).ok_or_else(|| Error::InvalidArgument("unknown certificate condition".into()))?;
        let mut cert = Self::new(condition, num("lhs")?, num("threshold")?);
        cert.margin_i = opt("margin_i")?;
        cert.margin_ii = opt("margin_ii")?;
        if get("verdict")? != cert.verdict.name() {
            return Err(Error::InvalidArgument("certificate verdict disagrees with its margin".into()));
        }
        Ok(cert)
    }
}

impl fmt::Display for GlbCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:e}"));
        writeln!(f, "condition={}", self.condition.name())?;
        writeln!(f, "lhs={:e}", self.lhs)?;
        writeln!(f, "threshold={:e}", self.threshold)?;
        writeln!(f, "margin={:e}", self.margin)?;
        writeln!(f, "margin_i={}", opt(self.margin_i))?;
        writeln!(f, "margin_ii={}", opt(self.margin_ii))?;
        writeln!(f, "verdict={}", self.verdict.name())
    }
}

/// Evaluates (ii) and, when a reference eigenvalue is given, (i); the
/// certificate reports the condition with the larger margin.
pub fn check_conditions(params: &GlbParams, lambda_ref: Option<f64>, lambda_h: f64) -> GlbCertificate {
    let stab = params.alpha * params.lambda_const;
    let ii = GlbCertificate::new(Condition::Ii, params.delta * lambda_h + stab, 1.0);
    let i = lambda_ref.map(|l| GlbCertificate::new(Condition::I, params.delta * l + stab, 1.0));
    let mut best = match i {
        Some(i) if i.margin > ii.margin => i,
        _ => ii,
    };
    best.margin_i = i.map(|c| c.margin);
    best.margin_ii = Some(ii.margin);
    best
}

/// Lowest-order (k = 1) test `max{α, min{λ, λ_h} h_max²} ≤ κ_CR⁻²`; without
/// a reference eigenvalue `λ_h` alone is used.
pub fn check_lowest_order(alpha: f64, h_max: f64, kappa_cr: f64, lambda_ref: Option<f64>, lambda_h: f64) -> GlbCertificate {
    let lam = lambda_ref.map_or(lambda_h, |l| l.min(lambda_h));
    let lhs = alpha.max(lam * h_max * h_max);
    GlbCertificate::new(Condition::LowestOrder, lhs, 1.0 / (kappa_cr * kappa_cr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_by_hand() {
        let p = derive_constants(0.0, 1.0, 0.5, 2).unwrap();
        assert_eq!(p.delta, 0.25);
        assert_eq!(p.lambda_const, 5.0 / 9.0);
        assert!(derive_constants(0.0, 0.0, 0.5, 2).is_err());
        assert!(derive_constants(-1.0, 1.0, 0.5, 2).is_err());
        assert!(derive_constants(0.0, 1.0, 0.0, 2).is_err());
        let q = derive_constants(0.0, 1.0, 0.25, 2).unwrap();
        assert_eq!(q.delta, p.delta / 4.0);
    }

    #[test]
    fn conditions_by_hand() {
        let p = derive_constants(0.0, 1.0, 0.5, 2).unwrap();
        let c = check_conditions(&p, None, 3.0);
        assert_eq!((c.condition, c.lhs, c.margin), (Condition::Ii, 0.75, 0.25));
        assert!(c.is_certified());
        assert_eq!(c.margin_i, None);
        let c = check_conditions(&p, None, 5.0);
        assert_eq!(c.lhs, 1.25);
        assert!(!c.is_certified());
        let c = check_conditions(&p, Some(3.6), 5.0);
        assert_eq!(c.condition, Condition::I);
        assert!(c.is_certified());
        assert_eq!(c.margin_ii, Some(-0.25));
    }

    #[test]
    fn lowest_order_by_hand() {
        let c = check_lowest_order(0.0, 1.0 / 64.0, 1.0 / 10f64.sqrt(), None, 52.35);
        assert!((c.lhs - 52.35 / 4096.0).abs() < 1e-15);
        assert!((c.threshold - 10.0).abs() < 1e-12);
        assert!(c.is_certified());
        let c = check_lowest_order(11.0, 1.0 / 64.0, 1.0 / 10f64.sqrt(), None, 1e-6);
        assert!(!c.is_certified());
        let c = check_lowest_order(0.0, 1.0 / 64.0, 1e200, None, 1e-3);
        assert!(!c.is_certified());
        let c = check_lowest_order(0.0, 0.5, 1.0, Some(2.0), 3.0);
        assert_eq!(c.lhs, 0.5);
    }

    #[test]
    fn certificate_round_trip() {
        let p = derive_constants(0.1, 0.3, 0.125, 2).unwrap();
        for cert in [check_conditions(&p, Some(52.3), 51.0), check_lowest_order(0.1, 0.125, 0.1893, None, 51.0)] {
            let text = cert.to_string();
            assert!(text.contains("verdict="));
            assert_eq!(GlbCertificate::parse(&text).unwrap(), cert);
        }
        assert!(GlbCertificate::parse("condition=ii\nlhs=2\nthreshold=1\nmargin_i=none\nmargin_ii=-1\nverdict=certified-lower-bound").is_err());
    }

    fn monotone_draw(alpha: f64, c_apx: f64, h: f64, lam: f64, d_alpha: f64, d_h: f64, kappa: f64) {
        let base = derive_constants(alpha, c_apx, h, 2).unwrap();
        let more = derive_constants(alpha + d_alpha, c_apx, h + d_h, 2).unwrap();
        for lr in [None, Some(lam * 1.1)] {
            let a = check_conditions(&base, lr, lam);
            let b = check_conditions(&more, lr, lam);
            assert!(a.is_certified() || !b.is_certified());
            let a = check_lowest_order(alpha, h, kappa, lr, lam);
            let b = check_lowest_order(alpha + d_alpha, h + d_h, kappa, lr, lam);
            assert!(a.is_certified() || !b.is_certified());
        }
    }

    #[test]
    fn monotone_on_seeded_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            monotone_draw(
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.01..3.0),
                rng.gen_range(1e-3..1.0),
                rng.gen_range(1.0..500.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..0.5),
                rng.gen_range(0.05..2.0),
            );
        }
    }

    proptest! {
        #[test]
        fn monotone_property(
            alpha in 0.0..2.0f64, c_apx in 0.01..3.0f64, h in 1e-3..1.0f64, lam in 1.0..500.0f64,
            d_alpha in 0.0..1.0f64, d_h in 0.0..0.5f64, kappa in 0.05..2.0f64,
        ) {
            monotone_draw(alpha, c_apx, h, lam, d_alpha, d_h, kappa);
        }
    }
}
