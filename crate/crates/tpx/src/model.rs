//! Domain types and primitive quantities of the two-division
//! transfer-pricing problem: division profits, the price-driven penalty
//! probability, the expected tax penalty, global net income under each
//! foreign-profit-taxation rule, and the scalar objective the solvers
//! maximize.
//!
//! Everything here is a pure function of immutable inputs, so values are
//! freely shareable across threads.

use std::fmt;

use thiserror::Error;

/// Errors from scenario construction and per-price evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A field violates its documented bounds.
    #[error("invalid {field}: {message}")]
    InvalidField {
        field: &'static str,
        message: String,
    },

    /// The claimed foreign tax credit exceeds home taxation of the
    /// repatriated profit at the evaluated price. Carries both sides of
    /// the legality inequality `t1*b*pi2 >= t2*q*pi2`.
    #[error("limited tax credit constraint violated: home taxation {home_taxation} < claimed credit {claimed_credit}")]
    LimitedCreditConstraintViolated {
        home_taxation: f64,
        claimed_credit: f64,
    },
}

fn ensure(cond: bool, field: &'static str, message: &str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidField {
            field,
            message: message.to_string(),
        })
    }
}

/// One country's tax system: income tax rate, enforcement intensity, and
/// the per-unit penalty charged on detected mispricing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jurisdiction {
    /// Income tax rate, in `[0, 1)`.
    pub tax_rate: f64,
    /// Probability that the country detects and penalizes mispricing,
    /// independent of the firm's price choice. In `[0, 1]`.
    pub enforcement: f64,
    /// Penalty per unit of intra-firm trade, charged on detection. `>= 0`.
    pub unit_penalty: f64,
}

impl Jurisdiction {
    pub fn new(tax_rate: f64, enforcement: f64, unit_penalty: f64) -> Result<Self, ModelError> {
        ensure(
            tax_rate.is_finite() && (0.0..1.0).contains(&tax_rate),
            "tax_rate",
            "must lie in [0, 1)",
        )?;
        ensure(
            enforcement.is_finite() && (0.0..=1.0).contains(&enforcement),
            "enforcement",
            "must lie in [0, 1]",
        )?;
        ensure(
            unit_penalty.is_finite() && unit_penalty >= 0.0,
            "unit_penalty",
            "must be non-negative and finite",
        )?;
        Ok(Self {
            tax_rate,
            enforcement,
            unit_penalty,
        })
    }

    /// Detection probability times unit penalty. Only this product enters
    /// the expected penalty, so rescaling one against the other is neutral.
    pub fn enforcement_weight(&self) -> f64 {
        self.enforcement * self.unit_penalty
    }
}

/// The arm's-length band of market-acceptable prices around the central
/// consensus price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketPriceRange {
    /// Bottom limit of the band; shifting low triggers the penalty with
    /// certainty at or below this price. Positive.
    pub p_min: f64,
    /// Central market parameter.
    pub p_bar: f64,
    /// Top limit of the band; shifting high triggers the penalty with
    /// certainty at or above this price.
    pub p_max: f64,
}

impl MarketPriceRange {
    pub fn new(p_min: f64, p_bar: f64, p_max: f64) -> Result<Self, ModelError> {
        ensure(
            p_min.is_finite() && p_min > 0.0,
            "p_min",
            "must be positive and finite",
        )?;
        ensure(p_bar.is_finite(), "p_bar", "must be finite")?;
        ensure(p_min < p_bar, "p_min", "must be below p_bar")?;
        ensure(
            p_max.is_finite() && p_max > p_bar,
            "p_max",
            "must satisfy p_bar < p_max",
        )?;
        Ok(Self {
            p_min,
            p_bar,
            p_max,
        })
    }

    /// Full band width `p_max - p_min`.
    pub fn width(&self) -> f64 {
        self.p_max - self.p_min
    }

    /// Signed distance from the central price to the certain-penalty
    /// limit of the given case: positive toward `p_max`, negative toward
    /// `p_min`, zero for the neutral case.
    pub fn limit_offset(&self, case: ShiftCase) -> f64 {
        match case {
            ShiftCase::Htp => self.p_max - self.p_bar,
            ShiftCase::Ltp => self.p_min - self.p_bar,
            ShiftCase::Neutral => 0.0,
        }
    }

    /// The certain-penalty limit price of the given case (`p_bar` for the
    /// neutral case).
    pub fn limit_price(&self, case: ShiftCase) -> f64 {
        match case {
            ShiftCase::Htp => self.p_max,
            ShiftCase::Ltp => self.p_min,
            ShiftCase::Neutral => self.p_bar,
        }
    }
}

/// Curvature of the endogenous penalty probability in the deviation.
///
/// Slopes above 1 give the convex shape the closed forms require; slopes
/// in `(0, 1]` are still evaluable but only the numerical oracle handles
/// them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyModel {
    pub slope: f64,
}

impl PenaltyModel {
    pub fn new(slope: f64) -> Result<Self, ModelError> {
        ensure(
            slope.is_finite() && slope > 0.0,
            "slope",
            "must be positive and finite",
        )?;
        Ok(Self { slope })
    }
}

/// Direction of profit shifting implied by the price choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftCase {
    /// High transfer price: deviation above the central price, profit
    /// shifted toward the home country.
    Htp,
    /// Low transfer price: deviation below the central price, profit
    /// shifted toward the host country.
    Ltp,
    /// No incentive to deviate.
    Neutral,
}

impl fmt::Display for ShiftCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftCase::Htp => "HTP",
            ShiftCase::Ltp => "LTP",
            ShiftCase::Neutral => "neutral",
        })
    }
}

/// Foreign-profit-taxation rule applied by the home country.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaxRegime {
    /// Source-principle taxation: foreign profit is taxed abroad only.
    Exemption,
    /// Repatriated foreign profit is taxed at home with a credit for the
    /// foreign tax paid on it, proportional to the repatriated share.
    ProportionalCredit { repatriation: f64 },
    /// Repatriated foreign profit is taxed at home with a credit granted
    /// at `credit_rate`, legal only while the claimed credit does not
    /// exceed home taxation of the repatriated profit. Both rates are
    /// stored as candidates; legality depends on the realized subsidiary
    /// profit and is checked at evaluation time, not construction time.
    LimitedCredit { repatriation: f64, credit_rate: f64 },
    /// Foreign tax is deducted from the home tax base instead of credited.
    ForeignTaxDeduction { repatriation: f64 },
}

impl TaxRegime {
    /// Checks that every stored rate lies in `[0, 1]`.
    pub fn validate(&self) -> Result<(), ModelError> {
        let rate_ok = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        match *self {
            TaxRegime::Exemption => Ok(()),
            TaxRegime::ProportionalCredit { repatriation }
            | TaxRegime::ForeignTaxDeduction { repatriation } => ensure(
                rate_ok(repatriation),
                "repatriation",
                "must lie in [0, 1]",
            ),
            TaxRegime::LimitedCredit {
                repatriation,
                credit_rate,
            } => {
                ensure(rate_ok(repatriation), "repatriation", "must lie in [0, 1]")?;
                ensure(rate_ok(credit_rate), "credit_rate", "must lie in [0, 1]")
            }
        }
    }

    /// Stable lowercase name used in tables and scenario files.
    pub fn name(&self) -> &'static str {
        match self {
            TaxRegime::Exemption => "exemption",
            TaxRegime::ProportionalCredit { .. } => "proportional_credit",
            TaxRegime::LimitedCredit { .. } => "limited_credit",
            TaxRegime::ForeignTaxDeduction { .. } => "foreign_tax_deduction",
        }
    }

    /// Repatriation rate, when the regime has one.
    pub fn repatriation(&self) -> Option<f64> {
        match *self {
            TaxRegime::Exemption => None,
            TaxRegime::ProportionalCredit { repatriation }
            | TaxRegime::LimitedCredit { repatriation, .. }
            | TaxRegime::ForeignTaxDeduction { repatriation } => Some(repatriation),
        }
    }
}

/// Largest credit rate the limited-credit constraint allows for a given
/// repatriation rate while the subsidiary is profitable, backed off a
/// few ulps so the product comparison in [`global_net_income`] cannot
/// flip on rounding when the cap is hit exactly.
pub fn max_legal_credit_rate(t1: f64, t2: f64, repatriation: f64) -> f64 {
    if t2 <= 0.0 {
        return 1.0;
    }
    (t1 * repatriation / t2).min(1.0) * (1.0 - 4.0 * f64::EPSILON)
}

/// A two-division trade: the jurisdictions, the arm's-length band, the
/// penalty curvature, the trade volume, price-independent baseline
/// profits, and an optional import tariff.
///
/// Division profits are affine in the transfer price:
/// `pi1 = baseline_profit_home + p * volume` and
/// `pi2 = baseline_profit_host - p * (1 + tariff) * volume`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeScenario {
    /// Country of the parent division.
    pub home: Jurisdiction,
    /// Country of the subsidiary.
    pub host: Jurisdiction,
    pub range: MarketPriceRange,
    pub penalty: PenaltyModel,
    /// Units of goods exported from the parent to the subsidiary. Positive.
    pub volume: f64,
    /// Parent profit at `p = 0`: revenues minus costs, excluding the
    /// transfer itself.
    pub baseline_profit_home: f64,
    /// Subsidiary profit at `p = 0`.
    pub baseline_profit_host: f64,
    /// Ad valorem tariff the host country levies on the import value.
    pub tariff: f64,
}

impl TradeScenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        home: Jurisdiction,
        host: Jurisdiction,
        range: MarketPriceRange,
        penalty: PenaltyModel,
        volume: f64,
        baseline_profit_home: f64,
        baseline_profit_host: f64,
        tariff: f64,
    ) -> Result<Self, ModelError> {
        ensure(
            volume.is_finite() && volume > 0.0,
            "volume",
            "must be positive and finite",
        )?;
        ensure(
            baseline_profit_home.is_finite(),
            "baseline_profit_home",
            "must be finite",
        )?;
        ensure(
            baseline_profit_host.is_finite(),
            "baseline_profit_host",
            "must be finite",
        )?;
        ensure(
            tariff.is_finite() && tariff >= 0.0,
            "tariff",
            "must be non-negative and finite",
        )?;
        Ok(Self {
            home,
            host,
            range,
            penalty,
            volume,
            baseline_profit_home,
            baseline_profit_host,
            tariff,
        })
    }

    /// Re-checks every invariant; useful after mutating public fields.
    pub fn validate(&self) -> Result<(), ModelError> {
        Jurisdiction::new(self.home.tax_rate, self.home.enforcement, self.home.unit_penalty)?;
        Jurisdiction::new(self.host.tax_rate, self.host.enforcement, self.host.unit_penalty)?;
        MarketPriceRange::new(self.range.p_min, self.range.p_bar, self.range.p_max)?;
        PenaltyModel::new(self.penalty.slope)?;
        Self::new(
            self.home,
            self.host,
            self.range,
            self.penalty,
            self.volume,
            self.baseline_profit_home,
            self.baseline_profit_host,
            self.tariff,
        )
        .map(|_| ())
    }
}

/// Penalization probability driven by the firm's own price choice.
///
/// Zero at or on the safe side of the central price, one at or beyond the
/// certain-penalty limit, and `(|p - p_bar| / |p_limit - p_bar|)^slope`
/// in between. The absolute values keep odd and non-integer slopes
/// well-defined; the result is always in `[0, 1]`.
pub fn alpha(price: f64, range: &MarketPriceRange, penalty: &PenaltyModel) -> f64 {
    let deviation = price - range.p_bar;
    if deviation == 0.0 {
        return 0.0;
    }
    let limit = if deviation > 0.0 {
        range.p_max - range.p_bar
    } else {
        range.p_bar - range.p_min
    };
    let ratio = deviation.abs() / limit;
    if ratio >= 1.0 {
        1.0
    } else if penalty.slope == 2.0 {
        ratio * ratio
    } else {
        ratio.powf(penalty.slope)
    }
}

/// Expected tax penalty at `price`: the endogenous probability times the
/// harmed country's enforcement weight times the trade volume. The host
/// country penalizes prices above the central price, the home country
/// prices below it; at the central price the penalty is zero.
pub fn expected_penalty(price: f64, scenario: &TradeScenario) -> f64 {
    let deviation = price - scenario.range.p_bar;
    if deviation == 0.0 {
        return 0.0;
    }
    let harmed = if deviation > 0.0 {
        &scenario.host
    } else {
        &scenario.home
    };
    alpha(price, &scenario.range, &scenario.penalty) * harmed.enforcement_weight() * scenario.volume
}

/// Pretax profits `(parent, subsidiary)` at the given transfer price.
/// Exact affine forms; negative profits are allowed and propagate.
pub fn division_profits(price: f64, scenario: &TradeScenario) -> (f64, f64) {
    let transfer = price * scenario.volume;
    (
        scenario.baseline_profit_home + transfer,
        scenario.baseline_profit_host - transfer * (1.0 + scenario.tariff),
    )
}

pub(crate) fn global_net_income_unchecked(
    price: f64,
    scenario: &TradeScenario,
    regime: &TaxRegime,
) -> f64 {
    let (pi1, pi2) = division_profits(price, scenario);
    let t1 = scenario.home.tax_rate;
    let t2 = scenario.host.tax_rate;
    let base = (1.0 - t1) * pi1 + (1.0 - t2) * pi2;
    match *regime {
        TaxRegime::Exemption => base,
        // Home taxation -t1*b*pi2 plus a credit of min(t1, t2)*b*pi2:
        // one expression reproduces both the full offset (host rate
        // above home rate, where the correction is exactly zero) and the
        // partial one.
        TaxRegime::ProportionalCredit { repatriation } => {
            base + (t1.min(t2) - t1) * repatriation * pi2
        }
        TaxRegime::LimitedCredit {
            repatriation,
            credit_rate,
        } => base - t1 * repatriation * pi2 + t2 * credit_rate * pi2,
        TaxRegime::ForeignTaxDeduction { repatriation } => {
            base - t1 * repatriation * (pi2 - t2 * pi2)
        }
    }
}

/// After-tax global income under the given regime.
///
/// For the limited-credit rule the legality constraint
/// `t1*b*pi2 >= t2*q*pi2` is checked at the evaluated price, since the
/// subsidiary profit depends on it.
pub fn global_net_income(
    price: f64,
    scenario: &TradeScenario,
    regime: &TaxRegime,
) -> Result<f64, ModelError> {
    if let TaxRegime::LimitedCredit {
        repatriation,
        credit_rate,
    } = *regime
    {
        let (_, pi2) = division_profits(price, scenario);
        let home_taxation = scenario.home.tax_rate * repatriation * pi2;
        let claimed_credit = scenario.host.tax_rate * credit_rate * pi2;
        if home_taxation < claimed_credit {
            return Err(ModelError::LimitedCreditConstraintViolated {
                home_taxation,
                claimed_credit,
            });
        }
    }
    Ok(global_net_income_unchecked(price, scenario, regime))
}

pub(crate) fn objective_unchecked(
    price: f64,
    scenario: &TradeScenario,
    regime: &TaxRegime,
) -> f64 {
    global_net_income_unchecked(price, scenario, regime) - expected_penalty(price, scenario)
}

/// The maximand: global net income minus the expected penalty.
/// Piecewise-smooth in the price, with kinks only at the central price
/// and at the band limits.
pub fn objective(
    price: f64,
    scenario: &TradeScenario,
    regime: &TaxRegime,
) -> Result<f64, ModelError> {
    Ok(global_net_income(price, scenario, regime)? - expected_penalty(price, scenario))
}

/// Per-unit marginal effect of the price on global net income: the
/// coefficient `D` such that `dPi/dp = D * volume`. Its sign selects the
/// shifting case, its magnitude the strength of the incentive.
pub fn effective_differential(scenario: &TradeScenario, regime: &TaxRegime) -> f64 {
    let t1 = scenario.home.tax_rate;
    let t2 = scenario.host.tax_rate;
    let tau = scenario.tariff;
    match *regime {
        TaxRegime::Exemption => t2 * (1.0 + tau) - t1 - tau,
        TaxRegime::ProportionalCredit { repatriation } => {
            if t2 > t1 {
                // The credit exactly cancels home taxation, so the
                // repatriation rate drops out.
                t2 * (1.0 + tau) - t1 - tau
            } else {
                (t2 * (1.0 + tau) - t1) * (1.0 - repatriation)
                    - tau * (1.0 - t1 * repatriation)
            }
        }
        TaxRegime::LimitedCredit {
            repatriation,
            credit_rate,
        } => {
            t2 * (1.0 + tau) * (1.0 - credit_rate) - t1 * (1.0 - repatriation)
                - tau * (1.0 - t1 * repatriation)
        }
        TaxRegime::ForeignTaxDeduction { repatriation } => {
            (t2 * (1.0 + tau) - tau) * (1.0 - t1 * repatriation)
                - t1 * (1.0 - repatriation)
        }
    }
}

/// Shifting direction that raises global net income: the sign of
/// [`effective_differential`], with an exact zero mapping to neutral.
pub fn classify_case(scenario: &TradeScenario, regime: &TaxRegime) -> ShiftCase {
    let d = effective_differential(scenario, regime);
    if d > 0.0 {
        ShiftCase::Htp
    } else if d < 0.0 {
        ShiftCase::Ltp
    } else {
        ShiftCase::Neutral
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jurisdiction(t: f64, phi: f64, z: f64) -> Jurisdiction {
        Jurisdiction::new(t, phi, z).unwrap()
    }

    fn band(p_min: f64, p_bar: f64, p_max: f64) -> MarketPriceRange {
        MarketPriceRange::new(p_min, p_bar, p_max).unwrap()
    }

    /// The recurring setup: band [90, 100, 110], slope 2, volume 10.
    fn base_scenario(t1: f64, t2: f64) -> TradeScenario {
        TradeScenario::new(
            jurisdiction(t1, 0.6, 1.0),
            jurisdiction(t2, 0.6, 1.0),
            band(90.0, 100.0, 110.0),
            PenaltyModel::new(2.0).unwrap(),
            10.0,
            0.0,
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_bad_fields() {
        assert!(Jurisdiction::new(1.0, 0.5, 1.0).is_err());
        assert!(Jurisdiction::new(0.3, 1.2, 1.0).is_err());
        assert!(Jurisdiction::new(0.3, 0.5, -1.0).is_err());
        assert!(MarketPriceRange::new(0.0, 100.0, 110.0).is_err());
        assert!(MarketPriceRange::new(100.0, 100.0, 110.0).is_err());
        assert!(MarketPriceRange::new(90.0, 100.0, 100.0).is_err());
        assert!(PenaltyModel::new(0.0).is_err());
        assert!(TaxRegime::LimitedCredit {
            repatriation: 0.5,
            credit_rate: 1.2
        }
        .validate()
        .is_err());
    }

    #[test]
    fn alpha_at_reference_points() {
        let range = band(90.0, 100.0, 110.0);
        let quad = PenaltyModel::new(2.0).unwrap();
        assert_eq!(alpha(100.0, &range, &quad), 0.0);
        assert_eq!(alpha(110.0, &range, &quad), 1.0);
        assert_eq!(alpha(115.0, &range, &quad), 1.0);
        assert_eq!(alpha(90.0, &range, &quad), 1.0);
        assert!((alpha(105.0, &range, &quad) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn alpha_handles_odd_and_fractional_slopes() {
        let range = band(90.0, 100.0, 110.0);
        let cubic = PenaltyModel::new(3.0).unwrap();
        // Below the central price the deviation is negative; the absolute
        // ratio keeps the probability real and in [0, 1].
        let a = alpha(95.0, &range, &cubic);
        assert!((a - 0.125).abs() < 1e-15);
        let frac = PenaltyModel::new(1.5).unwrap();
        let b = alpha(95.0, &range, &frac);
        assert!((b - 0.5f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn expected_penalty_at_reference_points() {
        let scenario = TradeScenario::new(
            jurisdiction(0.3, 0.8, 1.0),
            jurisdiction(0.3, 0.5, 1.2),
            band(90.0, 100.0, 110.0),
            PenaltyModel::new(2.0).unwrap(),
            10.0,
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        assert_eq!(expected_penalty(100.0, &scenario), 0.0);
        // High side: host enforcement 0.5 * 1.2 applies.
        assert!((expected_penalty(105.0, &scenario) - 1.5).abs() < 1e-12);
        // Low side: home enforcement 0.8 * 1.0 applies.
        assert!((expected_penalty(95.0, &scenario) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn division_profits_are_affine() {
        let mut scenario = base_scenario(0.3, 0.3);
        scenario.volume = 1.0;
        assert_eq!(division_profits(100.0, &scenario), (100.0, -100.0));

        let mut scenario = base_scenario(0.3, 0.3);
        scenario.baseline_profit_home = 500.0;
        scenario.baseline_profit_host = 2000.0;
        assert_eq!(division_profits(100.0, &scenario), (1500.0, 1000.0));

        scenario.tariff = 0.1;
        let (pi1, pi2) = division_profits(100.0, &scenario);
        assert_eq!(pi1, 1500.0);
        assert!((pi2 - 900.0).abs() < 1e-9);
    }

    #[test]
    fn net_income_under_each_regime() {
        let mut scenario = base_scenario(0.3, 0.3);
        scenario.baseline_profit_home = 500.0;
        scenario.baseline_profit_host = 2000.0;
        let v = global_net_income(100.0, &scenario, &TaxRegime::Exemption).unwrap();
        assert!((v - 1750.0).abs() < 1e-9);

        // Full repatriation under the proportional credit with the home
        // rate above the host rate taxes everything at the home rate.
        let scenario = base_scenario(0.35, 0.25);
        let regime = TaxRegime::ProportionalCredit { repatriation: 1.0 };
        for p in [92.0, 100.0, 107.0] {
            let (pi1, pi2) = division_profits(p, &scenario);
            let v = global_net_income(p, &scenario, &regime).unwrap();
            assert!((v - 0.65 * (pi1 + pi2)).abs() < 1e-9);
        }

        // Deduction rule, direct evaluation.
        let mut scenario = base_scenario(0.3, 0.2);
        scenario.range = band(30.0, 50.0, 70.0);
        scenario.baseline_profit_host = 1000.0;
        let v = global_net_income(
            50.0,
            &scenario,
            &TaxRegime::ForeignTaxDeduction { repatriation: 1.0 },
        )
        .unwrap();
        assert!((v - 630.0).abs() < 1e-9);
    }

    #[test]
    fn limited_credit_legality_is_checked_per_price() {
        // pi2 stays positive here, so legality reduces to t1*b >= t2*q.
        let mut scenario = base_scenario(0.2, 0.3);
        scenario.baseline_profit_host = 5000.0;
        let illegal = TaxRegime::LimitedCredit {
            repatriation: 0.1,
            credit_rate: 1.0,
        };
        let err = global_net_income(100.0, &scenario, &illegal).unwrap_err();
        match err {
            ModelError::LimitedCreditConstraintViolated {
                home_taxation,
                claimed_credit,
            } => {
                assert!(home_taxation < claimed_credit);
            }
            other => panic!("unexpected error {other:?}"),
        }
        let legal = TaxRegime::LimitedCredit {
            repatriation: 0.9,
            credit_rate: 0.5,
        };
        assert!(global_net_income(100.0, &scenario, &legal).is_ok());
        assert!(objective(100.0, &scenario, &illegal).is_err());
    }

    #[test]
    fn objective_reference_values() {
        // At the central price the penalty vanishes.
        let scenario = base_scenario(0.25, 0.35);
        let regime = TaxRegime::Exemption;
        let at_center = objective(100.0, &scenario, &regime).unwrap();
        assert_eq!(
            at_center,
            global_net_income(100.0, &scenario, &regime).unwrap()
        );

        // Gap between the interior optimum and the central price.
        let p_star = 100.0 + 25.0 / 3.0;
        let gap = objective(p_star, &scenario, &regime).unwrap() - at_center;
        assert!((gap - 25.0 / 6.0).abs() < 1e-9);

        // Beyond the top limit the penalty is saturated, so the objective
        // keeps rising at the tax-differential slope.
        let above = objective(111.0, &scenario, &regime).unwrap()
            - objective(110.0, &scenario, &regime).unwrap();
        assert!((above - (0.35 - 0.25) * 10.0).abs() < 1e-9);
    }

    #[test]
    fn effective_differential_reference_values() {
        let mut scenario = base_scenario(0.25, 0.3);
        scenario.tariff = 0.1;
        let d = effective_differential(&scenario, &TaxRegime::Exemption);
        assert!((d - (-0.02)).abs() < 1e-12);

        let scenario = base_scenario(0.3, 0.3);
        let d = effective_differential(
            &scenario,
            &TaxRegime::ForeignTaxDeduction { repatriation: 0.5 },
        );
        assert!((d - 0.105).abs() < 1e-12);

        // Host rate above home rate: the proportional credit matches the
        // exemption rule for any repatriation rate.
        let scenario = base_scenario(0.2, 0.3);
        let exempt = effective_differential(&scenario, &TaxRegime::Exemption);
        for b in [0.0, 0.3, 0.9, 1.0] {
            let d = effective_differential(
                &scenario,
                &TaxRegime::ProportionalCredit { repatriation: b },
            );
            assert_eq!(d, exempt);
        }
    }

    #[test]
    fn classification_reference_cases() {
        let scenario = base_scenario(0.2, 0.3);
        assert_eq!(classify_case(&scenario, &TaxRegime::Exemption), ShiftCase::Htp);

        let scenario = base_scenario(0.3, 0.3);
        assert_eq!(
            classify_case(&scenario, &TaxRegime::Exemption),
            ShiftCase::Neutral
        );

        // At the canceling tariff the differential collapses to rounding
        // noise; the exact flip point is pinned by bisection elsewhere.
        let mut scenario = base_scenario(0.2, 0.3);
        scenario.tariff = 0.1 / 0.7;
        let d = effective_differential(&scenario, &TaxRegime::Exemption);
        assert!(d.abs() < 1e-15);
        scenario.tariff = 0.1 / 0.7 + 1e-9;
        assert_eq!(classify_case(&scenario, &TaxRegime::Exemption), ShiftCase::Ltp);
        scenario.tariff = 0.1 / 0.7 - 1e-9;
        assert_eq!(classify_case(&scenario, &TaxRegime::Exemption), ShiftCase::Htp);
    }

    /// Strategy over valid scenarios with both tax orderings and tariffs.
    fn scenario_strategy() -> impl Strategy<Value = TradeScenario> {
        (
            0.0..0.9f64,        // t1
            0.0..0.9f64,        // t2
            0.05..1.0f64,       // phi1
            0.05..1.0f64,       // phi2
            0.0..3.0f64,        // z1
            0.0..3.0f64,        // z2
            50.0..200.0f64,     // p_bar
            2.0..40.0f64,       // down width
            2.0..40.0f64,       // up width
            1.2..4.0f64,        // slope
            1.0..50.0f64,       // volume
            0.0..0.3f64,        // tariff
        )
            .prop_map(
                |(t1, t2, phi1, phi2, z1, z2, p_bar, down, up, slope, volume, tariff)| {
                    TradeScenario::new(
                        Jurisdiction::new(t1, phi1, z1).unwrap(),
                        Jurisdiction::new(t2, phi2, z2).unwrap(),
                        MarketPriceRange::new(p_bar - down, p_bar, p_bar + up).unwrap(),
                        PenaltyModel::new(slope).unwrap(),
                        volume,
                        0.0,
                        0.0,
                        tariff,
                    )
                    .unwrap()
                },
            )
    }

    proptest! {
        #[test]
        fn alpha_stays_in_unit_interval_and_grows_with_deviation(
            scenario in scenario_strategy(),
            x in 0.0..1.0f64,
            y in 0.0..1.0f64,
        ) {
            let range = scenario.range;
            let penalty = scenario.penalty;
            let probe = range.p_min - 5.0 + x * (range.p_max - range.p_min + 10.0);
            let a = alpha(probe, &range, &penalty);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(alpha(range.p_bar, &range, &penalty), 0.0);
            prop_assert_eq!(alpha(range.p_max, &range, &penalty), 1.0);
            prop_assert_eq!(alpha(range.p_min, &range, &penalty), 1.0);

            // Nondecreasing in the absolute deviation on each side.
            let (near, far) = if x <= y { (x, y) } else { (y, x) };
            let up_near = alpha(range.p_bar + near * (range.p_max - range.p_bar), &range, &penalty);
            let up_far = alpha(range.p_bar + far * (range.p_max - range.p_bar), &range, &penalty);
            prop_assert!(up_near <= up_far);
            let dn_near = alpha(range.p_bar - near * (range.p_bar - range.p_min), &range, &penalty);
            let dn_far = alpha(range.p_bar - far * (range.p_bar - range.p_min), &range, &penalty);
            prop_assert!(dn_near <= dn_far);
        }

        #[test]
        fn alpha_is_convex_per_side_for_steep_slopes(
            scenario in scenario_strategy(),
            a in 0.0..1.0f64,
            b in 0.0..1.0f64,
        ) {
            let range = scenario.range;
            let penalty = scenario.penalty; // slope > 1.2 by construction
            let lo = range.p_bar + a.min(b) * (range.p_max - range.p_bar);
            let hi = range.p_bar + a.max(b) * (range.p_max - range.p_bar);
            let mid = 0.5 * (lo + hi);
            let chord = 0.5 * (alpha(lo, &range, &penalty) + alpha(hi, &range, &penalty));
            prop_assert!(alpha(mid, &range, &penalty) <= chord + 1e-12);
        }

        #[test]
        fn net_income_is_affine_in_price(
            scenario in scenario_strategy(),
            b in 0.0..1.0f64,
            q in 0.0..1.0f64,
        ) {
            // Midpoint value equals the mean of the endpoint values for
            // every regime; the unchecked evaluation keeps the limited
            // credit defined even where the pair would be illegal.
            let regimes = [
                TaxRegime::Exemption,
                TaxRegime::ProportionalCredit { repatriation: b },
                TaxRegime::LimitedCredit { repatriation: b, credit_rate: q },
                TaxRegime::ForeignTaxDeduction { repatriation: b },
            ];
            let (lo, hi) = (scenario.range.p_min, scenario.range.p_max);
            for regime in &regimes {
                let a = global_net_income_unchecked(lo, &scenario, regime);
                let c = global_net_income_unchecked(hi, &scenario, regime);
                let m = global_net_income_unchecked(0.5 * (lo + hi), &scenario, regime);
                let scale = a.abs() + c.abs() + 1.0;
                prop_assert!((m - 0.5 * (a + c)).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn proportional_credit_matches_exemption_when_host_rate_higher(
            scenario in scenario_strategy(),
            b in 0.0..1.0f64,
            x in 0.0..1.0f64,
        ) {
            prop_assume!(scenario.host.tax_rate > scenario.home.tax_rate);
            let p = scenario.range.p_min + x * scenario.range.width();
            let credit = global_net_income_unchecked(
                p,
                &scenario,
                &TaxRegime::ProportionalCredit { repatriation: b },
            );
            let exempt = global_net_income_unchecked(p, &scenario, &TaxRegime::Exemption);
            prop_assert_eq!(credit, exempt);
        }

        #[test]
        fn limited_credit_on_offset_ridge_matches_exemption(
            scenario in scenario_strategy(),
            s in 0.0..1.0f64,
            x in 0.0..1.0f64,
        ) {
            let t1 = scenario.home.tax_rate;
            let t2 = scenario.host.tax_rate;
            prop_assume!(t1 > 0.01 && t2 > 0.01);
            // Parametrize the offset ridge t1*b = t2*q from whichever
            // side keeps both rates inside [0, 1].
            let (b, q) = if t1 >= t2 {
                (s * t2 / t1, s)
            } else {
                (s, s * t1 / t2)
            };
            let p = scenario.range.p_min + x * scenario.range.width();
            let ridge = global_net_income_unchecked(
                p,
                &scenario,
                &TaxRegime::LimitedCredit { repatriation: b, credit_rate: q },
            );
            let exempt = global_net_income_unchecked(p, &scenario, &TaxRegime::Exemption);
            let scale = exempt.abs().max(1.0);
            prop_assert!((ridge - exempt).abs() <= 1e-12 * scale);
        }

        #[test]
        fn equal_rates_without_tariff_peak_at_center(
            scenario in scenario_strategy(),
            x in 0.0..1.0f64,
        ) {
            let mut scenario = scenario;
            scenario.host.tax_rate = scenario.home.tax_rate;
            scenario.tariff = 0.0;
            let regime = TaxRegime::Exemption;
            let p = scenario.range.p_min + x * scenario.range.width();
            let at_center = objective(scenario.range.p_bar, &scenario, &regime).unwrap();
            let elsewhere = objective(p, &scenario, &regime).unwrap();
            let scale = at_center.abs().max(1.0);
            prop_assert!(elsewhere <= at_center + 1e-9 * scale);

            // Net income itself is flat in the price.
            let a = global_net_income(scenario.range.p_min, &scenario, &regime).unwrap();
            let b = global_net_income(scenario.range.p_max, &scenario, &regime).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }

        #[test]
        fn expected_penalty_is_continuous_at_the_kinks(
            scenario in scenario_strategy(),
        ) {
            let h = 1e-9 * scenario.range.p_bar;
            // The steepest slope of the expected penalty is bounded by
            // r * G * m / half_width on the shorter side.
            let g = scenario
                .home
                .enforcement_weight()
                .max(scenario.host.enforcement_weight());
            let half = (scenario.range.p_bar - scenario.range.p_min)
                .min(scenario.range.p_max - scenario.range.p_bar);
            let bound = scenario.penalty.slope * g * scenario.volume / half;
            for anchor in [scenario.range.p_min, scenario.range.p_bar, scenario.range.p_max] {
                let lo = expected_penalty(anchor - h, &scenario);
                let hi = expected_penalty(anchor + h, &scenario);
                prop_assert!((hi - lo).abs() <= 2.0 * h * bound + 1e-12);
            }
        }
    }
}
