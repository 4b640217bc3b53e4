//! Grid case model: buses, generators, loads, transmission lines, and the
//! 24-hour demand profile, with JSON parsing, validation, and per-hour load
//! construction.
//!
//! A case file is a single JSON object:
//!
//! ```json
//! {
//!   "buses": [1, 2, 3],
//!   "slack_bus": 3,
//!   "susceptance_mode": "reactance",
//!   "generators": [{"name": "G1", "bus": 1, "p_min_mw": 0.0, "p_max_mw": 100.0,
//!                   "startup_cost": 50.0, "marginal_cost": 10.0}],
//!   "loads": [{"name": "Load 1", "bus": 2, "share": 1.0}],
//!   "lines": [{"id": 1, "from_bus": 1, "to_bus": 2, "reactance_pu": 0.05,
//!              "susceptance_b": 20.0, "flow_limit_mw": 100.0}, ...],
//!   "demand_mw": [24 hourly totals]
//! }
//! ```
//!
//! `slack_bus` defaults to the highest-numbered bus and `susceptance_mode`
//! defaults to `reactance` when omitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hours in the scheduling horizon. The engine clears one day at a time.
pub const HOURS: usize = 24;

/// External bus number. Buses are identified by arbitrary positive integers;
/// vector positions come from the order of `GridCase::buses`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub usize);

impl std::fmt::Display for BusId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How line susceptances are read from the case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SusceptanceMode {
    /// b = 1 / reactance_pu for every line (the default).
    #[default]
    Reactance,
    /// b is taken from each line's `susceptance_b` column as printed.
    TableB,
}

/// A dispatchable generating unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub bus: BusId,
    /// Minimum stable output while committed, MW.
    pub p_min_mw: f64,
    /// Maximum output, MW.
    pub p_max_mw: f64,
    /// One-time cost charged when the unit transitions off -> on, dollars.
    pub startup_cost: f64,
    /// Energy cost, dollars per MWh.
    pub marginal_cost: f64,
}

/// A load point. Each load draws a fixed share of the hourly system demand.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub name: String,
    pub bus: BusId,
    /// Fraction of total system demand served at this bus. Shares sum to 1.
    pub share: f64,
    /// Draw at the profile's maximum hour, MW. Derived as share * max demand.
    pub base_mw: f64,
}

/// A transmission line. Flow is measured positive in the from -> to direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: usize,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub reactance_pu: f64,
    /// Susceptance used when the case runs in `table_b` mode.
    pub susceptance_b: f64,
    /// Thermal limit applied symmetrically in both directions, MW.
    pub flow_limit_mw: f64,
}

/// A complete market clearing case.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub buses: Vec<BusId>,
    pub slack: BusId,
    pub susceptance_mode: SusceptanceMode,
    pub generators: Vec<GeneratorSpec>,
    pub loads: Vec<LoadSpec>,
    pub lines: Vec<LineSpec>,
    /// Total system demand per hour, MW; exactly `HOURS` entries.
    pub demand_mw: Vec<f64>,
}

/// Validation severity. All current checks are errors; the level exists so
/// reports stay stable if advisory checks are added later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
}

/// One validation finding, tied to the field that triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("malformed case: {0}")]
    Schema(String),
    #[error("invalid case: {} ({} violation{})", first, count, if *count == 1 { "" } else { "s" })]
    Invalid { first: String, count: usize, violations: Vec<Violation> },
}

// Raw file schema. Loads carry only their share; slack and susceptance mode
// are optional with documented defaults.
#[derive(Serialize, Deserialize)]
struct CaseFile {
    buses: Vec<BusId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slack_bus: Option<BusId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    susceptance_mode: Option<SusceptanceMode>,
    generators: Vec<GeneratorSpec>,
    loads: Vec<LoadFile>,
    lines: Vec<LineSpec>,
    demand_mw: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LoadFile {
    name: String,
    bus: BusId,
    share: f64,
}

/// Parses and fully validates a case from JSON text.
///
/// Any validation violation fails the parse, so a returned case is always
/// internally consistent.
pub fn parse_case(text: &str) -> Result<GridCase, CaseError> {
    let file: CaseFile = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            CaseError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
        } else {
            CaseError::Schema(e.to_string())
        }
    })?;
    let slack = match file.slack_bus {
        Some(b) => b,
        None => *file.buses.iter().max().ok_or_else(|| CaseError::Schema("case has no buses".into()))?,
    };
    let peak = file.demand_mw.iter().cloned().fold(0.0f64, f64::max);
    let case = GridCase {
        buses: file.buses,
        slack,
        susceptance_mode: file.susceptance_mode.unwrap_or_default(),
        generators: file.generators,
        loads: file
            .loads
            .into_iter()
            .map(|l| LoadSpec { base_mw: l.share * peak, name: l.name, bus: l.bus, share: l.share })
            .collect(),
        lines: file.lines,
        demand_mw: file.demand_mw,
    };
    let violations = validate_case(&case);
    if let Some(first) = violations.first() {
        return Err(CaseError::Invalid {
            first: first.to_string(),
            count: violations.len(),
            violations,
        });
    }
    Ok(case)
}

/// Serializes a case back to its JSON file form. `parse_case` of the result
/// reproduces the case exactly.
pub fn serialize_case(case: &GridCase) -> String {
    let file = CaseFile {
        buses: case.buses.clone(),
        slack_bus: Some(case.slack),
        susceptance_mode: Some(case.susceptance_mode),
        generators: case.generators.clone(),
        loads: case
            .loads
            .iter()
            .map(|l| LoadFile { name: l.name.clone(), bus: l.bus, share: l.share })
            .collect(),
        lines: case.lines.clone(),
        demand_mw: case.demand_mw.clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("case serialization cannot fail");
    out.push('\n');
    out
}

fn push(violations: &mut Vec<Violation>, field: &str, message: String) {
    violations.push(Violation { severity: Severity::Error, field: field.to_string(), message });
}

/// Checks every structural invariant and returns all findings, ordered by
/// severity and then by field. An empty list means the case is usable.
pub fn validate_case(case: &GridCase) -> Vec<Violation> {
    let mut v = Vec::new();

    if case.buses.is_empty() {
        push(&mut v, "buses", "case must declare at least one bus".into());
    }
    let mut seen = std::collections::BTreeSet::new();
    for b in &case.buses {
        if !seen.insert(*b) {
            push(&mut v, "buses", format!("duplicate bus {}", b));
        }
    }
    let bus_exists = |b: BusId| case.buses.contains(&b);

    if !case.buses.is_empty() && !bus_exists(case.slack) {
        push(&mut v, "slack_bus", format!("slack bus {} is not in the bus list", case.slack));
    }

    let mut names = std::collections::BTreeSet::new();
    for g in &case.generators {
        if !names.insert(g.name.clone()) {
            push(&mut v, "generators", format!("duplicate generator name {:?}", g.name));
        }
        if !bus_exists(g.bus) {
            push(&mut v, "generators", format!("{} references unknown bus {}", g.name, g.bus));
        }
        if !(0.0 <= g.p_min_mw && g.p_min_mw <= g.p_max_mw) {
            push(
                &mut v,
                "generators",
                format!("{} needs 0 <= p_min ({}) <= p_max ({})", g.name, g.p_min_mw, g.p_max_mw),
            );
        }
        if g.startup_cost < 0.0 {
            push(&mut v, "generators", format!("{} has negative startup cost", g.name));
        }
    }

    let mut load_names = std::collections::BTreeSet::new();
    let mut share_sum = 0.0;
    for l in &case.loads {
        if !load_names.insert(l.name.clone()) {
            push(&mut v, "loads", format!("duplicate load name {:?}", l.name));
        }
        if !bus_exists(l.bus) {
            push(&mut v, "loads", format!("{} references unknown bus {}", l.name, l.bus));
        }
        if l.share < 0.0 {
            push(&mut v, "loads", format!("{} has negative share {}", l.name, l.share));
        }
        share_sum += l.share;
    }
    if !case.loads.is_empty() && (share_sum - 1.0).abs() > 1e-9 {
        push(&mut v, "loads", format!("shares sum to {} but must sum to 1 within 1e-9", share_sum));
    }

    let mut line_ids = std::collections::BTreeSet::new();
    for l in &case.lines {
        if !line_ids.insert(l.id) {
            push(&mut v, "lines", format!("duplicate line id {}", l.id));
        }
        if !bus_exists(l.from_bus) || !bus_exists(l.to_bus) {
            push(&mut v, "lines", format!("line {} references an unknown bus", l.id));
        }
        if l.from_bus == l.to_bus {
            push(&mut v, "lines", format!("line {} connects bus {} to itself", l.id, l.from_bus));
        }
        if l.reactance_pu <= 0.0 {
            push(&mut v, "lines", format!("line {} needs positive reactance", l.id));
        }
        if l.susceptance_b <= 0.0 {
            push(&mut v, "lines", format!("line {} needs positive susceptance", l.id));
        }
        if l.flow_limit_mw <= 0.0 {
            push(&mut v, "lines", format!("line {} needs a positive flow limit", l.id));
        }
    }

    if !case.buses.is_empty() && !is_connected(case) {
        push(&mut v, "lines", "the line graph does not connect all buses".into());
    }

    if case.demand_mw.len() != HOURS {
        push(
            &mut v,
            "demand_mw",
            format!("demand profile has {} entries, expected {}", case.demand_mw.len(), HOURS),
        );
    }
    let p_max_total: f64 = case.generators.iter().map(|g| g.p_max_mw).sum();
    for (i, d) in case.demand_mw.iter().enumerate() {
        if *d < 0.0 {
            push(&mut v, "demand_mw", format!("hour {} demand {} is negative", i + 1, d));
        } else if *d > p_max_total {
            push(
                &mut v,
                "demand_mw",
                format!(
                    "hour {} demand {} exceeds total generating capacity {}",
                    i + 1,
                    d,
                    p_max_total
                ),
            );
        }
    }

    v.sort_by(|a, b| {
        a.severity.cmp(&b.severity).then_with(|| a.field.cmp(&b.field)).then_with(|| a.message.cmp(&b.message))
    });
    v
}

fn is_connected(case: &GridCase) -> bool {
    let n = case.buses.len();
    if n <= 1 {
        return true;
    }
    let index = |b: BusId| case.buses.iter().position(|x| *x == b);
    let mut adj = vec![Vec::new(); n];
    for l in &case.lines {
        if let (Some(a), Some(b)) = (index(l.from_bus), index(l.to_bus)) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

impl GridCase {
    /// Position of a bus in the case's bus ordering.
    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|b| *b == bus)
    }

    /// Per-bus load for one hour (1-based), in bus order: share * total demand,
    /// summed when several loads sit on one bus.
    pub fn load_vector(&self, hour: usize) -> Vec<f64> {
        assert!(
            (1..=self.demand_mw.len()).contains(&hour),
            "hour {} outside 1..={}",
            hour,
            self.demand_mw.len()
        );
        let total = self.demand_mw[hour - 1];
        let mut out = vec![0.0; self.buses.len()];
        for l in &self.loads {
            let i = self.bus_index(l.bus).expect("validated case has known load buses");
            out[i] += l.share * total;
        }
        out
    }

    /// Hour (1-based) with the highest total demand; the first such hour on ties.
    pub fn peak_hour(&self) -> usize {
        let mut best = 0;
        for (i, d) in self.demand_mw.iter().enumerate() {
            if *d > self.demand_mw[best] {
                best = i;
            }
        }
        best + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn seven_bus_case() -> GridCase {
        parse_case(include_str!("../../../cases/case7_conventional.json")).expect("bundled case parses")
    }

    #[test]
    fn bundled_case_has_expected_shape() {
        let case = seven_bus_case();
        assert_eq!(case.buses.len(), 7);
        assert_eq!(case.slack, BusId(7));
        assert_eq!(case.susceptance_mode, SusceptanceMode::Reactance);
        assert_eq!(case.generators.len(), 3);
        assert_eq!(case.lines.len(), 7);
        assert_eq!(case.demand_mw.len(), HOURS);
        assert_eq!(case.demand_mw[15], 1100.0);
        // Generator table: (bus, p_min, p_max, startup, marginal).
        let g2 = &case.generators[1];
        assert_eq!(g2.bus, BusId(5));
        assert_eq!((g2.p_min_mw, g2.p_max_mw), (10.0, 500.0));
        assert_eq!((g2.startup_cost, g2.marginal_cost), (300.0, 20.0));
        // Line limits in id order.
        let limits: Vec<f64> = case.lines.iter().map(|l| l.flow_limit_mw).collect();
        assert_eq!(limits, vec![800.0, 300.0, 300.0, 800.0, 800.0, 500.0, 500.0]);
        // Load bases at the 1100 MW peak.
        let bases: Vec<f64> = case.loads.iter().map(|l| l.base_mw).collect();
        for (got, want) in bases.iter().zip([300.0, 200.0, 300.0, 300.0]) {
            assert!((got - want).abs() < 1e-9, "base: {:?}", bases);
        }
    }

    #[test]
    fn bundled_case_validates_clean() {
        assert_eq!(validate_case(&seven_bus_case()), Vec::new());
    }

    #[test]
    fn load_vector_splits_by_share() {
        let case = seven_bus_case();
        // Hour 4 carries 407 MW total; 407 is divisible by 11 so the split is exact.
        let lv = case.load_vector(4);
        let want = [0.0, 111.0, 74.0, 111.0, 0.0, 111.0, 0.0];
        for (got, want) in lv.iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "load vector {:?}", lv);
        }
        assert!((lv.iter().sum::<f64>() - 407.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_preserves_case() {
        let case = seven_bus_case();
        let text = serialize_case(&case);
        let back = parse_case(&text).expect("serialized case parses");
        assert_eq!(back, case);
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_case("{ \"buses\": [1, ") {
            Err(CaseError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    #[test]
    fn missing_field_is_a_schema_error() {
        match parse_case("{ \"buses\": [1] }") {
            Err(CaseError::Schema(msg)) => assert!(msg.contains("missing field"), "{}", msg),
            other => panic!("expected schema error, got {:?}", other),
        }
    }

    #[test]
    fn duplicate_generator_name_fails_parse() {
        let mut case = seven_bus_case();
        case.generators[1].name = "G1".into();
        let text = serialize_case(&case);
        match parse_case(&text) {
            Err(CaseError::Invalid { violations, .. }) => {
                assert!(violations.iter().any(|v| v.message.contains("duplicate generator name")));
            }
            other => panic!("expected invalid case, got {:?}", other),
        }
    }

    #[test]
    fn zero_lines_is_disconnected() {
        let mut case = seven_bus_case();
        case.lines.clear();
        let violations = validate_case(&case);
        assert!(
            violations.iter().any(|v| v.message.contains("does not connect")),
            "{:?}",
            violations
        );
    }

    #[test]
    fn excess_demand_is_flagged_per_hour() {
        let mut case = seven_bus_case();
        case.demand_mw[15] = 1200.0; // above the 1150 MW fleet capacity
        let violations = validate_case(&case);
        assert!(
            violations.iter().any(|v| v.field == "demand_mw" && v.message.contains("hour 16")),
            "{:?}",
            violations
        );
    }

    #[test]
    fn share_sum_must_be_one() {
        let mut case = seven_bus_case();
        case.loads[0].share += 0.01;
        let violations = validate_case(&case);
        assert!(violations.iter().any(|v| v.message.contains("must sum to 1")), "{:?}", violations);
    }

    #[test]
    fn defaults_fill_slack_and_mode() {
        let case = seven_bus_case();
        let mut text = serialize_case(&case);
        text = text.replace("  \"slack_bus\": 7,\n", "").replace("  \"susceptance_mode\": \"reactance\",\n", "");
        let parsed = parse_case(&text).expect("defaults apply");
        assert_eq!(parsed.slack, BusId(7));
        assert_eq!(parsed.susceptance_mode, SusceptanceMode::Reactance);
    }

    #[test]
    fn peak_hour_finds_first_maximum() {
        let case = seven_bus_case();
        assert_eq!(case.peak_hour(), 16);
    }
}
