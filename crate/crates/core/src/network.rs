//! DC network matrices: nodal susceptance matrix, slack reduction, line flow
//! matrix, power transfer distribution factors (PTDF), and flow evaluation.
//!
//! Conventions: vectors and matrix columns follow the case's bus order; line
//! rows follow the case's line order; flow is positive from -> to. The slack
//! bus absorbs any injection imbalance, which shows up as an all-zero slack
//! column in the PTDF.

use crate::grid::{GridCase, SusceptanceMode};
use crate::linalg::{self, Matrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("reduced susceptance matrix is singular; is the network connected?")]
    Singular,
    #[error("case references bus {0} that is not in the bus list")]
    UnknownBus(usize),
}

/// Nodal susceptance matrix B (buses x buses).
#[derive(Debug, Clone)]
pub struct SusceptanceMatrix {
    pub m: Matrix,
}

/// B with the slack row and column removed.
#[derive(Debug, Clone)]
pub struct ReducedSusceptance {
    pub m: Matrix,
    pub slack_index: usize,
}

/// Maps bus angles to line flows: entry (l, i) is +b_l at the from bus and
/// -b_l at the to bus of line l.
#[derive(Debug, Clone)]
pub struct LineFlowMatrix {
    pub m: Matrix,
}

/// Power transfer distribution factors (lines x buses): flow response of each
/// line to 1 MW injected at each bus and withdrawn at the slack.
#[derive(Debug, Clone)]
pub struct PtdfMatrix {
    pub m: Matrix,
    pub slack_index: usize,
}

/// Susceptance of one line under the case's mode.
pub fn line_susceptance(case: &GridCase, line: usize) -> f64 {
    let l = &case.lines[line];
    match case.susceptance_mode {
        SusceptanceMode::Reactance => 1.0 / l.reactance_pu,
        SusceptanceMode::TableB => l.susceptance_b,
    }
}

/// Builds the nodal susceptance matrix: diagonal entries sum the susceptances
/// of lines touching the bus; off-diagonals carry -b for each connecting line.
pub fn b_matrix(case: &GridCase) -> Result<SusceptanceMatrix, NetworkError> {
    let n = case.buses.len();
    let mut m = Matrix::zeros(n, n);
    for (idx, l) in case.lines.iter().enumerate() {
        let b = line_susceptance(case, idx);
        let i = case.bus_index(l.from_bus).ok_or(NetworkError::UnknownBus(l.from_bus.0))?;
        let j = case.bus_index(l.to_bus).ok_or(NetworkError::UnknownBus(l.to_bus.0))?;
        m.add_to(i, i, b);
        m.add_to(j, j, b);
        m.add_to(i, j, -b);
        m.add_to(j, i, -b);
    }
    Ok(SusceptanceMatrix { m })
}

/// Removes the slack row and column from B.
pub fn reduce_slack(b: &SusceptanceMatrix, slack_index: usize) -> ReducedSusceptance {
    let n = b.m.rows();
    assert!(slack_index < n, "slack index out of range");
    let mut m = Matrix::zeros(n - 1, n - 1);
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack_index).collect();
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            m.set(ri, rj, b.m.get(i, j));
        }
    }
    ReducedSusceptance { m, slack_index }
}

/// Builds the line flow matrix (lines x buses).
pub fn line_matrix(case: &GridCase) -> Result<LineFlowMatrix, NetworkError> {
    let n = case.buses.len();
    let mut m = Matrix::zeros(case.lines.len(), n);
    for (idx, l) in case.lines.iter().enumerate() {
        let b = line_susceptance(case, idx);
        let i = case.bus_index(l.from_bus).ok_or(NetworkError::UnknownBus(l.from_bus.0))?;
        let j = case.bus_index(l.to_bus).ok_or(NetworkError::UnknownBus(l.to_bus.0))?;
        m.set(idx, i, b);
        m.set(idx, j, -b);
    }
    Ok(LineFlowMatrix { m })
}

/// Computes the PTDF matrix T = X * [Binv 0; 0 0], where Binv is the inverse
/// of the slack-reduced susceptance matrix embedded back into full bus
/// indexing. The slack column is exactly zero.
pub fn compute_ptdf(case: &GridCase) -> Result<PtdfMatrix, NetworkError> {
    let n = case.buses.len();
    let slack_index =
        case.bus_index(case.slack).ok_or(NetworkError::UnknownBus(case.slack.0))?;
    let b = b_matrix(case)?;
    let reduced = reduce_slack(&b, slack_index);
    let x = line_matrix(case)?;
    if n == 1 {
        return Ok(PtdfMatrix { m: Matrix::zeros(case.lines.len(), 1), slack_index });
    }
    let inv = linalg::invert(&reduced.m).map_err(|_| NetworkError::Singular)?;
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack_index).collect();
    let mut embedded = Matrix::zeros(n, n);
    for (ri, &i) in keep.iter().enumerate() {
        for (rj, &j) in keep.iter().enumerate() {
            embedded.set(i, j, inv.get(ri, rj));
        }
    }
    Ok(PtdfMatrix { m: x.m.matmul(&embedded), slack_index })
}

/// Evaluates line flows for a per-bus net injection (generation minus load).
/// Any imbalance is implicitly absorbed at the slack bus.
pub fn line_flows(t: &PtdfMatrix, injection: &[f64]) -> Vec<f64> {
    t.m.matvec(injection)
}

/// Renders a matrix as CSV with 12 significant digits, one row per label.
pub fn matrix_to_csv(m: &Matrix, row_labels: &[String], col_labels: &[String]) -> String {
    assert_eq!(row_labels.len(), m.rows());
    assert_eq!(col_labels.len(), m.cols());
    let mut out = String::new();
    out.push_str("row");
    for c in col_labels {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for i in 0..m.rows() {
        out.push_str(&row_labels[i]);
        for j in 0..m.cols() {
            out.push(',');
            out.push_str(&format!("{:.11e}", m.get(i, j)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_case, BusId, GridCase, LineSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conventional() -> GridCase {
        parse_case(include_str!("../../../cases/case7_conventional.json")).unwrap()
    }

    fn table_b(case: &GridCase) -> GridCase {
        let mut c = case.clone();
        c.susceptance_mode = SusceptanceMode::TableB;
        c
    }

    /// Path-splitting oracle for a single-ring network with uniform line
    /// susceptance. The ring visits buses in line order (each line connects
    /// consecutive ring positions); injecting 1 MW at ring position p and
    /// withdrawing at the slack splits the flow between the two arcs in
    /// inverse proportion to their edge counts.
    fn ring_ptdf_oracle(ring_len: usize, slack_pos: usize, inj_pos: usize) -> Vec<f64> {
        let n = ring_len;
        let fwd = (slack_pos + n - inj_pos) % n; // edges on the forward arc
        let mut flows = vec![0.0; n];
        for e in 0..n {
            let on_forward = (e + n - inj_pos) % n < fwd;
            flows[e] = if on_forward {
                (n - fwd) as f64 / n as f64
            } else {
                -(fwd as f64) / n as f64
            };
        }
        if inj_pos == slack_pos {
            flows.iter_mut().for_each(|f| *f = 0.0);
        }
        flows
    }

    /// Ring position of each bus in the bundled case: line k connects
    /// position k-1 to position k, so the order is 1,3,5,7,6,4,2.
    const RING_ORDER: [usize; 7] = [1, 3, 5, 7, 6, 4, 2];

    #[test]
    fn uniform_mode_b_matrix_is_the_ring_laplacian() {
        let b = b_matrix(&conventional()).unwrap();
        for i in 0..7 {
            assert!((b.m.get(i, i) - 40.0).abs() < 1e-12, "diag {}", i);
            let off: f64 = (0..7).filter(|&j| j != i).map(|j| b.m.get(i, j)).sum();
            assert!((off + 40.0).abs() < 1e-12, "row {} off-diagonal sum", i);
        }
        // Neighbors on the ring get -20, non-neighbors 0.
        let idx = |bus: usize| RING_ORDER.iter().position(|&b| b == bus).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                if i == j {
                    continue;
                }
                let d = (idx(i + 1) as i32 - idx(j + 1) as i32).rem_euclid(7);
                let adjacent = d == 1 || d == 6;
                let want = if adjacent { -20.0 } else { 0.0 };
                assert!(
                    (b.m.get(i, j) - want).abs() < 1e-12,
                    "B[{},{}] = {}",
                    i,
                    j,
                    b.m.get(i, j)
                );
            }
        }
    }

    #[test]
    fn table_mode_b_matrix_matches_printed_values() {
        let b = b_matrix(&table_b(&conventional())).unwrap();
        let want_diag = [40.0, 70.0, 70.0, 150.0, 150.0, 110.0, 110.0];
        for (i, d) in want_diag.iter().enumerate() {
            assert!((b.m.get(i, i) - d).abs() < 1e-12, "diag {} = {}", i, b.m.get(i, i));
        }
        // Spot-check off-diagonals: -b of the connecting line.
        assert_eq!(b.m.get(0, 2), -20.0); // buses 1-3, line 1
        assert_eq!(b.m.get(2, 4), -50.0); // buses 3-5, line 2
        assert_eq!(b.m.get(4, 6), -100.0); // buses 5-7, line 3
        assert_eq!(b.m.get(6, 5), -10.0); // buses 7-6, line 4
        assert_eq!(b.m.get(5, 3), -100.0); // buses 6-4, line 5
        assert_eq!(b.m.get(3, 1), -50.0); // buses 4-2, line 6
        assert_eq!(b.m.get(1, 0), -20.0); // buses 2-1, line 7
        assert_eq!(b.m.get(0, 3), 0.0); // buses 1-4 are not adjacent
    }

    #[test]
    fn reduced_matrix_drops_slack_row_and_column() {
        let case = table_b(&conventional());
        let b = b_matrix(&case).unwrap();
        let reduced = reduce_slack(&b, 6);
        assert_eq!(reduced.m.rows(), 6);
        let want_diag = [40.0, 70.0, 70.0, 150.0, 150.0, 110.0];
        for (i, d) in want_diag.iter().enumerate() {
            assert!((reduced.m.get(i, i) - d).abs() < 1e-12);
        }
        assert_eq!(reduced.m.get(4, 2), -50.0); // buses 5-3 survive reduction
    }

    #[test]
    fn line_matrix_rows_carry_signed_susceptance() {
        let x = line_matrix(&conventional()).unwrap();
        assert_eq!(x.m.row(0), &[20.0, 0.0, -20.0, 0.0, 0.0, 0.0, 0.0]);
        // Line 3 runs bus 5 -> bus 7.
        assert_eq!(x.m.row(2), &[0.0, 0.0, 0.0, 0.0, 20.0, 0.0, -20.0]);
    }

    #[test]
    fn ptdf_matches_ring_path_splitting() {
        let case = conventional();
        let t = compute_ptdf(&case).unwrap();
        let slack_pos = RING_ORDER.iter().position(|&b| b == 7).unwrap();
        for (bus_idx, bus) in case.buses.iter().enumerate() {
            let pos = RING_ORDER.iter().position(|&b| b == bus.0).unwrap();
            let want = ring_ptdf_oracle(7, slack_pos, pos);
            for line in 0..7 {
                assert!(
                    (t.m.get(line, bus_idx) - want[line]).abs() < 1e-9,
                    "T[line {}, bus {}] = {} want {}",
                    line + 1,
                    bus,
                    t.m.get(line, bus_idx),
                    want[line]
                );
            }
        }
    }

    #[test]
    fn ptdf_key_fractions() {
        let t = compute_ptdf(&conventional()).unwrap();
        // Line 3 response: 6/7 from bus 5, 5/7 from bus 3, 4/7 from bus 1.
        assert!((t.m.get(2, 4) - 6.0 / 7.0).abs() < 1e-9);
        assert!((t.m.get(2, 2) - 5.0 / 7.0).abs() < 1e-9);
        assert!((t.m.get(2, 0) - 4.0 / 7.0).abs() < 1e-9);
        // Slack column is identically zero.
        for line in 0..7 {
            assert_eq!(t.m.get(line, 6), 0.0);
        }
    }

    #[test]
    fn flows_match_direct_angle_solution_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..40 {
            let n = rng.gen_range(2..=6);
            let case = random_connected_case(&mut rng, n);
            let t = match compute_ptdf(&case) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let injection: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let via_ptdf = line_flows(&t, &injection);

            // Independent route: solve B' theta = P directly, then f = b (th_f - th_t).
            let slack = case.bus_index(case.slack).unwrap();
            let b = b_matrix(&case).unwrap();
            let reduced = reduce_slack(&b, slack);
            let rhs: Vec<f64> =
                (0..n).filter(|&i| i != slack).map(|i| injection[i]).collect();
            let theta_red = crate::linalg::solve_dense(&reduced.m, &rhs).unwrap();
            let mut theta = vec![0.0; n];
            for (k, i) in (0..n).filter(|&i| i != slack).enumerate() {
                theta[i] = theta_red[k];
            }
            for (l, line) in case.lines.iter().enumerate() {
                let bsus = line_susceptance(&case, l);
                let i = case.bus_index(line.from_bus).unwrap();
                let j = case.bus_index(line.to_bus).unwrap();
                let direct = bsus * (theta[i] - theta[j]);
                assert!(
                    (via_ptdf[l] - direct).abs() < 1e-8,
                    "trial {} line {}: ptdf {} direct {}",
                    trial,
                    l,
                    via_ptdf[l],
                    direct
                );
            }
        }
    }

    fn random_connected_case(rng: &mut ChaCha8Rng, n: usize) -> GridCase {
        let buses: Vec<BusId> = (1..=n).map(BusId).collect();
        let mut lines = Vec::new();
        let mut id = 1;
        // Spanning chain keeps it connected; extra edges add meshes.
        for i in 1..n {
            lines.push(LineSpec {
                id,
                from_bus: BusId(i),
                to_bus: BusId(i + 1),
                reactance_pu: rng.gen_range(0.02..0.2),
                susceptance_b: rng.gen_range(5.0..50.0),
                flow_limit_mw: 1000.0,
            });
            id += 1;
        }
        for _ in 0..rng.gen_range(0..=n / 2) {
            let a = rng.gen_range(1..=n);
            let b = rng.gen_range(1..=n);
            if a != b {
                lines.push(LineSpec {
                    id,
                    from_bus: BusId(a),
                    to_bus: BusId(b),
                    reactance_pu: rng.gen_range(0.02..0.2),
                    susceptance_b: rng.gen_range(5.0..50.0),
                    flow_limit_mw: 1000.0,
                });
                id += 1;
            }
        }
        let mode = if rng.gen_bool(0.5) { SusceptanceMode::Reactance } else { SusceptanceMode::TableB };
        GridCase {
            buses,
            slack: BusId(n),
            susceptance_mode: mode,
            generators: Vec::new(),
            loads: Vec::new(),
            lines,
            demand_mw: vec![0.0; crate::grid::HOURS],
        }
    }

    #[test]
    fn peak_injection_loads_line_3_to_its_limit() {
        let case = conventional();
        let t = compute_ptdf(&case).unwrap();
        // Market solution at the 1100 MW peak: G1 = 500, G2 = 483.33, G3 = 116.67.
        let mut injection = vec![0.0; 7];
        injection[0] += 500.0;
        injection[4] += 2900.0 / 6.0;
        injection[6] += 700.0 / 6.0;
        for (i, l) in case.load_vector(16).iter().enumerate() {
            injection[i] -= l;
        }
        let flows = line_flows(&t, &injection);
        assert!((flows[2] - 300.0).abs() < 1e-9, "line 3 flow {}", flows[2]);
        for (l, f) in flows.iter().enumerate() {
            assert!(f.abs() <= case.lines[l].flow_limit_mw + 1e-9);
        }
    }

    #[test]
    fn csv_dump_uses_significant_digits() {
        let m = Matrix::from_rows(vec![vec![1.0 / 3.0]]);
        let csv = matrix_to_csv(&m, &["r".into()], &["c".into()]);
        assert_eq!(csv, "row,c\nr,3.33333333333e-1\n");
    }
}
