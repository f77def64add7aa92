//! Analytic optima and thresholds: the stationarity solution of the
//! objective for general penalty slopes with corner clamping, the
//! repatriation and tariff levels that neutralize the incentive, the
//! credit-offset ridge, and the ordering factors of the three
//! residence-based regimes.

use std::fmt;

use thiserror::Error;

use crate::model::{
    alpha, classify_case, effective_differential, expected_penalty, objective, ModelError,
    ShiftCase, TaxRegime, TradeScenario,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    /// Slopes at or below 1 break the convexity the stationarity solution
    /// relies on; the numerical oracle handles them instead.
    #[error("penalty slope {slope} is not supported by closed forms; use the oracle for slopes <= 1")]
    SlopeNotSupported { slope: f64 },

    #[error("degenerate tax rates: {0}")]
    DegenerateRates(String),

    #[error("regime ordering not applicable: {0}")]
    OrderingNotApplicable(String),

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where the optimum sits relative to the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Stationary point strictly inside the band.
    Interior,
    /// The stationary deviation reached or passed the band limit; the
    /// price is clamped there. Beyond the limit the penalty saturates and
    /// the model no longer binds, so the clamped price carries a
    /// model-validity caveat.
    CornerAtLimit,
    /// No incentive to deviate; the optimum is the central price.
    NeutralAtCenter,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Interior => "interior",
            Boundary::CornerAtLimit => "corner_at_limit",
            Boundary::NeutralAtCenter => "neutral_at_center",
        })
    }
}

/// The analytic solution of one scenario under one regime.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub optimal_price: f64,
    /// `optimal_price - p_bar`; the level of manipulation.
    pub deviation: f64,
    pub case: ShiftCase,
    pub boundary: Boundary,
    pub alpha_at_optimum: f64,
    pub objective_value: f64,
    pub penalty_expectation: f64,
    /// Set when the penalized side has zero enforcement weight while the
    /// tax incentive is nonzero: no interior optimum exists and the
    /// corner only bounds an unbounded incentive.
    pub zero_enforcement: bool,
}

fn report_at(
    price: f64,
    case: ShiftCase,
    boundary: Boundary,
    zero_enforcement: bool,
    scenario: &TradeScenario,
    regime: &TaxRegime,
) -> Result<DeviationReport, ClosedFormError> {
    Ok(DeviationReport {
        optimal_price: price,
        deviation: price - scenario.range.p_bar,
        case,
        boundary,
        alpha_at_optimum: alpha(price, &scenario.range, &scenario.penalty),
        objective_value: objective(price, scenario, regime)?,
        penalty_expectation: expected_penalty(price, scenario),
        zero_enforcement,
    })
}

/// Solves the stationarity condition of the objective for the deviation.
///
/// With `D` the effective differential, `P` the signed distance to the
/// penalized limit and `G` the penalized country's enforcement weight,
/// the interior deviation for slope `r > 1` is
/// `sign(D) * (|D| * |P|^r / (r * G))^(1/(r-1))`, which for `r = 2`
/// reduces to `D * P^2 / (2G)`. Deviations reaching the band limit are
/// clamped and flagged [`Boundary::CornerAtLimit`]; zero enforcement
/// with a live incentive is reported as a flagged corner rather than an
/// error, since the unbounded incentive is meaningful in itself.
pub fn optimal_deviation(
    scenario: &TradeScenario,
    regime: &TaxRegime,
) -> Result<DeviationReport, ClosedFormError> {
    let r = scenario.penalty.slope;
    if r <= 1.0 {
        return Err(ClosedFormError::SlopeNotSupported { slope: r });
    }
    let differential = effective_differential(scenario, regime);
    if differential == 0.0 {
        return report_at(
            scenario.range.p_bar,
            ShiftCase::Neutral,
            Boundary::NeutralAtCenter,
            false,
            scenario,
            regime,
        );
    }
    let case = classify_case(scenario, regime);
    let limit_price = scenario.range.limit_price(case);
    let width = scenario.range.limit_offset(case).abs();
    let penalized = match case {
        ShiftCase::Htp => &scenario.host,
        ShiftCase::Ltp => &scenario.home,
        ShiftCase::Neutral => unreachable!("nonzero differential"),
    };
    let weight = penalized.enforcement_weight();
    if weight == 0.0 {
        return report_at(limit_price, case, Boundary::CornerAtLimit, true, scenario, regime);
    }
    let magnitude = if r == 2.0 {
        differential.abs() * width * width / (2.0 * weight)
    } else {
        (differential.abs() * width.powf(r) / (r * weight)).powf(1.0 / (r - 1.0))
    };
    if magnitude >= width {
        return report_at(limit_price, case, Boundary::CornerAtLimit, false, scenario, regime);
    }
    let deviation = if differential > 0.0 { magnitude } else { -magnitude };
    report_at(
        scenario.range.p_bar + deviation,
        case,
        Boundary::Interior,
        false,
        scenario,
        regime,
    )
}

/// Repatriation rate that sets the deduction-rule incentive to zero:
/// `b* = (t1 - t2(1+tau) + tau) / (t1 (1+tau) (1-t2))`. Returns `None`
/// when the required rate falls outside `[0, 1]` (for a host rate above
/// the home rate at zero tariff it would be negative).
pub fn neutralizing_repatriation(
    t1: f64,
    t2: f64,
    tariff: f64,
) -> Result<Option<f64>, ClosedFormError> {
    if t1 <= 0.0 {
        return Err(ClosedFormError::DegenerateRates(format!(
            "home tax rate must be positive, got {t1}"
        )));
    }
    if t2 >= 1.0 {
        return Err(ClosedFormError::DegenerateRates(format!(
            "host tax rate must be below 1, got {t2}"
        )));
    }
    let b = (t1 - t2 * (1.0 + tariff) + tariff) / (t1 * (1.0 + tariff) * (1.0 - t2));
    Ok((0.0..=1.0).contains(&b).then_some(b))
}

/// Tariff that cancels the exemption-rule incentive:
/// `tau* = (t2 - t1) / (1 - t2)`. Returns `None` when the host rate is
/// below the home rate, since no non-negative tariff can neutralize that
/// direction.
pub fn neutralizing_tariff(t1: f64, t2: f64) -> Result<Option<f64>, ClosedFormError> {
    if t2 >= 1.0 {
        return Err(ClosedFormError::DegenerateRates(format!(
            "host tax rate must be below 1, got {t2}"
        )));
    }
    let tau = (t2 - t1) / (1.0 - t2);
    Ok((tau >= 0.0).then_some(tau))
}

/// Host tax rate at which the deduction rule flips from low-side to
/// high-side shifting at zero tariff: `t2 = t1 (1-b) / (1 - t1 b)`.
/// Callers keep `t1 * b < 1`.
pub fn switch_over_host_rate(t1: f64, repatriation: f64) -> f64 {
    t1 * (1.0 - repatriation) / (1.0 - t1 * repatriation)
}

/// Repatriation rate at which the limited credit exactly offsets home
/// taxation of the repatriated profit: `b = q * t2 / t1`. May exceed 1;
/// callers clamp or flag.
pub fn credit_offset_repatriation(
    credit_rate: f64,
    t1: f64,
    t2: f64,
) -> Result<f64, ClosedFormError> {
    if t1 <= 0.0 {
        return Err(ClosedFormError::DegenerateRates(format!(
            "home tax rate must be positive, got {t1}"
        )));
    }
    Ok(credit_rate * t2 / t1)
}

/// The host-tax recovery factors of the three residence-based rules,
/// `(limited credit, proportional credit, deduction)`:
/// `(1 - b t1/t2, 1 - b, 1 - t1 b)`. Strictly increasing whenever the
/// low-side case binds all three rules, that is `0 < t2 < t1 < 1` and
/// `0 < b <= 1`.
pub fn regime_ordering(
    t1: f64,
    t2: f64,
    repatriation: f64,
) -> Result<(f64, f64, f64), ClosedFormError> {
    if !(t2 > 0.0 && t2 < t1 && t1 < 1.0) {
        return Err(ClosedFormError::OrderingNotApplicable(format!(
            "needs 0 < t2 < t1 < 1, got t1={t1}, t2={t2}"
        )));
    }
    if !(repatriation > 0.0 && repatriation <= 1.0) {
        return Err(ClosedFormError::OrderingNotApplicable(format!(
            "needs 0 < b <= 1, got b={repatriation}"
        )));
    }
    Ok((
        1.0 - repatriation * t1 / t2,
        1.0 - repatriation,
        1.0 - t1 * repatriation,
    ))
}
