//! Independent numerical maximization of the piecewise objective: a
//! dense price grid with golden-section refinement on each side of the
//! central price, brute-force grids over the repatriation controls, and
//! Kuhn-Tucker residual checks for the limited-credit rule.
//!
//! This module is the ground truth the closed forms are validated
//! against, so nothing here may reuse the analytic solution path.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    division_profits, objective, objective_unchecked, ModelError, TaxRegime, TradeScenario,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    /// The objective evaluated to NaN or infinity.
    #[error("objective is not finite at price {price}")]
    NonFiniteObjective { price: f64 },

    /// Every control grid point violates the credit constraint.
    #[error("no control grid point satisfies the credit constraint")]
    EmptyFeasibleSet,

    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Controls for the numerical maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    /// Dense-grid evaluations in the price. At least 1000.
    pub grid_points: usize,
    /// Golden-section stopping width relative to the domain width.
    pub refine_tolerance: f64,
    /// Price interval to search; defaults to the arm's-length band.
    pub domain: Option<(f64, f64)>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            grid_points: 4096,
            refine_tolerance: 1e-9,
            domain: None,
        }
    }
}

impl SolveSettings {
    fn validate(&self) -> Result<(), OracleError> {
        if self.grid_points < 1000 {
            return Err(OracleError::InvalidSettings(format!(
                "grid_points must be at least 1000, got {}",
                self.grid_points
            )));
        }
        if !(self.refine_tolerance.is_finite() && self.refine_tolerance > 0.0) {
            return Err(OracleError::InvalidSettings(format!(
                "refine_tolerance must be positive, got {}",
                self.refine_tolerance
            )));
        }
        Ok(())
    }

    fn resolved_domain(&self, scenario: &TradeScenario) -> Result<(f64, f64), OracleError> {
        let (lo, hi) = self
            .domain
            .unwrap_or((scenario.range.p_min, scenario.range.p_max));
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(OracleError::InvalidSettings(format!(
                "domain [{lo}, {hi}] is not a proper interval"
            )));
        }
        Ok((lo, hi))
    }
}

/// Domain-edge and filtering diagnostics for a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundaryFlags {
    /// Argmax sits on the lower edge of the search domain.
    pub lower_edge: bool,
    /// Argmax sits on the upper edge of the search domain.
    pub upper_edge: bool,
    /// Some control grid points were excluded as credit-illegal.
    pub controls_excluded: bool,
}

impl BoundaryFlags {
    pub fn is_empty(&self) -> bool {
        !(self.lower_edge || self.upper_edge || self.controls_excluded)
    }
}

/// Optimal repatriation controls reported by the joint search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlChoice {
    pub repatriation: f64,
    /// Only present for the limited-credit family.
    pub credit_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub argmax_price: f64,
    /// Set by the joint search, absent for price-only solves.
    pub controls: Option<ControlChoice>,
    /// Objective at the reported argmax.
    pub value: f64,
    pub boundary_flags: BoundaryFlags,
    /// Total objective evaluations spent.
    pub evaluations: u64,
}

/// Regime family searched by [`maximize_joint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeFamily {
    ProportionalCredit,
    LimitedCredit,
    ForeignTaxDeduction,
}

impl RegimeFamily {
    fn instantiate(&self, repatriation: f64, credit_rate: f64) -> TaxRegime {
        match self {
            RegimeFamily::ProportionalCredit => TaxRegime::ProportionalCredit { repatriation },
            RegimeFamily::LimitedCredit => TaxRegime::LimitedCredit {
                repatriation,
                credit_rate,
            },
            RegimeFamily::ForeignTaxDeduction => TaxRegime::ForeignTaxDeduction { repatriation },
        }
    }
}

/// Kuhn-Tucker diagnostics for a limited-credit candidate `(p, b, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Residual of the price stationarity condition of the Lagrangian.
    pub stationarity_residual: f64,
    /// Analytic multiplier on the credit constraint; equals the
    /// subsidiary profit at the evaluated price.
    pub multiplier: f64,
    /// `multiplier * (t1*b - t2*q) * (1 + tariff) * volume`.
    pub complementary_slackness: f64,
    /// Whether `t1*b*pi2 >= t2*q*pi2` holds at the evaluated price.
    pub primal_feasibility: bool,
    /// Whether the multiplier is non-negative.
    pub dual_feasibility: bool,
}

fn eval_point<F>(f: &F, price: f64, evaluations: &mut u64) -> Result<f64, OracleError>
where
    F: Fn(f64) -> Result<f64, OracleError>,
{
    *evaluations += 1;
    let value = f(price)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(OracleError::NonFiniteObjective { price })
    }
}

/// Golden-section maximization on `[a, b]`, assuming unimodality there.
/// Returns the best evaluated point; ties keep the lower price.
fn golden_max<F>(
    f: &F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    evaluations: &mut u64,
) -> Result<(f64, f64), OracleError>
where
    F: Fn(f64) -> Result<f64, OracleError>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval_point(f, x1, evaluations)?;
    let mut f2 = eval_point(f, x2, evaluations)?;
    let mut iterations = 0;
    while (b - a) > tol && iterations < 300 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval_point(f, x1, evaluations)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval_point(f, x2, evaluations)?;
        }
        iterations += 1;
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Value differences below this many epsilons of the profit scale are
/// treated as ties: the affine income terms wiggle at this level, so
/// finer distinctions would be rounding noise, not structure.
const TIE_WINDOW_ULPS: f64 = 16.0;

fn value_noise_scale(scenario: &TradeScenario) -> f64 {
    let (pi1, pi2) = division_profits(scenario.range.p_bar, scenario);
    pi1.abs() + pi2.abs() + 1.0
}

struct SearchOutcome {
    price: f64,
    value: f64,
    evaluations: u64,
}

/// Dense grid, per-side golden refinement, then an explicit comparison of
/// the side optima with the central price and the domain edges. Ties
/// within the noise window prefer the central price, then the lowest one.
fn search_price<F>(
    scenario: &TradeScenario,
    settings: &SolveSettings,
    f: &F,
) -> Result<SearchOutcome, OracleError>
where
    F: Fn(f64) -> Result<f64, OracleError>,
{
    let (lo, hi) = settings.resolved_domain(scenario)?;
    let mut evaluations = 0u64;

    let n = settings.grid_points;
    let denom = (n - 1) as f64;
    let mut grid_best = (f64::NAN, f64::NEG_INFINITY);
    for i in 0..n {
        let p = lo + (hi - lo) * (i as f64) / denom;
        let v = eval_point(f, p, &mut evaluations)?;
        if v > grid_best.1 || (v == grid_best.1 && p < grid_best.0) {
            grid_best = (p, v);
        }
    }

    let mut candidates: Vec<(f64, f64)> = vec![grid_best];
    let center = scenario.range.p_bar;

    // Unimodality holds per side only for slopes >= 1; below that the
    // dense grid is the whole answer.
    if scenario.penalty.slope >= 1.0 {
        let tol = settings.refine_tolerance * (hi - lo);
        if center > lo {
            candidates.push(golden_max(f, lo, center.min(hi), tol, &mut evaluations)?);
        }
        if center < hi {
            candidates.push(golden_max(f, center.max(lo), hi, tol, &mut evaluations)?);
        }
    }

    if (lo..=hi).contains(&center) {
        candidates.push((center, eval_point(f, center, &mut evaluations)?));
    }
    candidates.push((lo, eval_point(f, lo, &mut evaluations)?));
    candidates.push((hi, eval_point(f, hi, &mut evaluations)?));

    let vmax = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let window = TIE_WINDOW_ULPS * f64::EPSILON * value_noise_scale(scenario);
    let mut chosen: Option<(f64, f64)> = None;
    for &(p, v) in &candidates {
        if v + window < vmax {
            continue;
        }
        chosen = Some(match chosen {
            None => (p, v),
            Some((cp, cv)) => {
                if cp == center {
                    (cp, cv)
                } else if p == center || p < cp {
                    (p, v)
                } else {
                    (cp, cv)
                }
            }
        });
    }
    let (price, value) = chosen.expect("candidate list is never empty");
    Ok(SearchOutcome {
        price,
        value,
        evaluations,
    })
}

fn edge_flags(price: f64, scenario: &TradeScenario, settings: &SolveSettings) -> BoundaryFlags {
    let (lo, hi) = settings
        .resolved_domain(scenario)
        .expect("domain already validated");
    BoundaryFlags {
        lower_edge: price == lo,
        upper_edge: price == hi,
        controls_excluded: false,
    }
}

/// Maximizes the objective over the price domain for a fixed regime.
///
/// Credit-illegal evaluations under the limited-credit rule propagate as
/// errors; the joint search is the tool for exploring such controls.
pub fn maximize_price(
    scenario: &TradeScenario,
    regime: &TaxRegime,
    settings: &SolveSettings,
) -> Result<OracleResult, OracleError> {
    settings.validate()?;
    let f = |p: f64| objective(p, scenario, regime).map_err(OracleError::from);
    let out = search_price(scenario, settings, &f)?;
    Ok(OracleResult {
        argmax_price: out.price,
        controls: None,
        value: out.value,
        boundary_flags: edge_flags(out.price, scenario, settings),
        evaluations: out.evaluations,
    })
}

struct ControlPoint {
    repatriation: f64,
    credit_rate: f64,
    price: f64,
    value: f64,
}

/// Brute force over the repatriation rate (and the credit rate for the
/// limited-credit family) on a uniform grid in `[0, 1]`, maximizing the
/// price inside each point.
///
/// Limited-credit grid points are kept only when the legality constraint
/// holds at their inner-optimal price, since legality depends on the
/// realized subsidiary profit there; excluded points are flagged.
pub fn maximize_joint(
    scenario: &TradeScenario,
    family: RegimeFamily,
    settings: &SolveSettings,
    control_points: usize,
) -> Result<OracleResult, OracleError> {
    settings.validate()?;
    if control_points < 101 {
        return Err(OracleError::InvalidSettings(format!(
            "control grid needs at least 101 points per control, got {control_points}"
        )));
    }
    let denom = (control_points - 1) as f64;
    let q_count = if family == RegimeFamily::LimitedCredit {
        control_points
    } else {
        1
    };
    let t1 = scenario.home.tax_rate;
    let t2 = scenario.host.tax_rate;

    struct Row {
        points: Vec<ControlPoint>,
        evaluations: u64,
        excluded: u64,
    }

    let rows: Vec<Row> = (0..control_points)
        .into_par_iter()
        .map(|bi| -> Result<Row, OracleError> {
            let b = bi as f64 / denom;
            let mut row = Row {
                points: Vec::with_capacity(q_count),
                evaluations: 0,
                excluded: 0,
            };
            for qi in 0..q_count {
                let q = if q_count == 1 { 0.0 } else { qi as f64 / denom };
                let regime = family.instantiate(b, q);
                let f = |p: f64| Ok(objective_unchecked(p, scenario, &regime));
                let out = search_price(scenario, settings, &f)?;
                row.evaluations += out.evaluations;
                let legal = if family == RegimeFamily::LimitedCredit {
                    let (_, pi2) = division_profits(out.price, scenario);
                    t1 * b * pi2 >= t2 * q * pi2
                } else {
                    true
                };
                if legal {
                    row.points.push(ControlPoint {
                        repatriation: b,
                        credit_rate: q,
                        price: out.price,
                        value: out.value,
                    });
                } else {
                    row.excluded += 1;
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let evaluations: u64 = rows.iter().map(|r| r.evaluations).sum();
    let excluded: u64 = rows.iter().map(|r| r.excluded).sum();
    // Scanning in (b, q) order with a strictly-greater update keeps the
    // lexicographically smallest controls among exact value ties.
    let mut best: Option<&ControlPoint> = None;
    for row in &rows {
        for point in &row.points {
            if best.map_or(true, |cur| point.value > cur.value) {
                best = Some(point);
            }
        }
    }
    let best = best.ok_or(OracleError::EmptyFeasibleSet)?;
    let mut flags = edge_flags(best.price, scenario, settings);
    flags.controls_excluded = excluded > 0;
    Ok(OracleResult {
        argmax_price: best.price,
        controls: Some(ControlChoice {
            repatriation: best.repatriation,
            credit_rate: (family == RegimeFamily::LimitedCredit).then_some(best.credit_rate),
        }),
        value: best.value,
        boundary_flags: flags,
        evaluations,
    })
}

/// Signed slope of the expected penalty in the price: zero at the central
/// price and beyond the band limits where the probability saturates.
fn expected_penalty_slope(price: f64, scenario: &TradeScenario) -> f64 {
    let deviation = price - scenario.range.p_bar;
    if deviation == 0.0 {
        return 0.0;
    }
    let (harmed, limit) = if deviation > 0.0 {
        (&scenario.host, scenario.range.p_max - scenario.range.p_bar)
    } else {
        (&scenario.home, scenario.range.p_bar - scenario.range.p_min)
    };
    if deviation.abs() >= limit {
        return 0.0;
    }
    let r = scenario.penalty.slope;
    let shape = r * deviation.signum() * (deviation.abs() / limit).powf(r - 1.0) / limit;
    shape * harmed.enforcement_weight() * scenario.volume
}

/// Kuhn-Tucker residuals of the limited-credit Lagrangian at `(p, b, q)`,
/// with the analytic multiplier (the subsidiary profit at `p`). The
/// tariff-aware stationarity reduces to the tariff-free form at zero
/// tariff.
pub fn kkt_residuals(
    price: f64,
    repatriation: f64,
    credit_rate: f64,
    scenario: &TradeScenario,
) -> KktReport {
    let (_, pi2) = division_profits(price, scenario);
    let multiplier = pi2;
    let t1 = scenario.home.tax_rate;
    let t2 = scenario.host.tax_rate;
    let tau = scenario.tariff;
    let m = scenario.volume;
    let stationarity_residual = t2 * (1.0 + tau) * (1.0 - credit_rate) * m
        - t1 * (1.0 - repatriation) * m
        - tau * (1.0 - t1 * repatriation) * m
        - expected_penalty_slope(price, scenario)
        - multiplier * (t1 * repatriation - t2 * credit_rate) * (1.0 + tau) * m;
    let complementary_slackness =
        multiplier * (t1 * repatriation - t2 * credit_rate) * (1.0 + tau) * m;
    KktReport {
        stationarity_residual,
        multiplier,
        complementary_slackness,
        primal_feasibility: t1 * repatriation * pi2 >= t2 * credit_rate * pi2,
        dual_feasibility: multiplier >= 0.0,
    }
}

/// Central difference `(f(x+h) - f(x-h)) / (2h)`.
pub fn finite_difference<F>(f: F, at: f64, step: f64) -> Result<f64, OracleError>
where
    F: Fn(f64) -> f64,
{
    if !(step.is_finite() && step > 0.0) {
        return Err(OracleError::InvalidSettings(format!(
            "finite difference step must be positive, got {step}"
        )));
    }
    let hi = f(at + step);
    if !hi.is_finite() {
        return Err(OracleError::NonFiniteObjective { price: at + step });
    }
    let lo = f(at - step);
    if !lo.is_finite() {
        return Err(OracleError::NonFiniteObjective { price: at - step });
    }
    Ok((hi - lo) / (2.0 * step))
}
