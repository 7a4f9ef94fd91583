//! Switch-state matrix generation for the distribution network.
//!
//! A matrix has one row per pixel-clock phase `p` and one column per switch
//! `w`. Row `p` is applied while input sample `m` (with `m % M == p`) is on
//! the broadcast net: every set switch deposits the sample's stored product
//! into the corresponding position of the moving adder chain. The write
//! enable pattern marks the output phases whose exiting sum is freshly
//! formed; on the remaining phases the output register holds.
//!
//! Generation is mechanical: for each output phase the reference tap set is
//! mapped onto the delay line and the deposit positions are switched on.
//! The derivation is pinned by golden tests against the three published
//! matrices and by output equivalence with the reference refocusing path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::RefocusShift;
use crate::refocus::{self, alignment_delay, view_taps, InterpMode, PrecisionMode};

/// Binary switch-state table driving one 1-D filter module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchMatrix {
    pub shift: RefocusShift,
    /// Number of switches (columns).
    pub width: usize,
    /// `M` phase rows of binary states.
    pub rows: Vec<Vec<u8>>,
    /// Per output phase (`k % M`): true where a fresh sum exits.
    pub we_pattern: Vec<bool>,
}

/// A generated matrix plus the scheduling data the simulator needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchPlan {
    pub matrix: SwitchMatrix,
    /// Per-cell linear blend weight numerators (same shape as the rows).
    pub blend: Vec<Vec<u8>>,
    /// How many cycles past its index an output's last tap may arrive.
    pub exit_delay: u32,
}

/// Generates the switch matrix for a shift (sample-and-hold upsampling).
pub fn gen_switch_matrix(shift: &RefocusShift) -> SwitchMatrix {
    gen_switch_plan(shift).matrix
}

/// Number of switches the filter for `shift` occupies.
pub fn tap_width(shift: &RefocusShift) -> usize {
    gen_switch_plan(shift).matrix.width
}

/// Generation for the sample-and-hold (nearest-neighbor) filter.
pub fn gen_switch_plan(shift: &RefocusShift) -> SwitchPlan {
    gen_switch_plan_interp(shift, InterpMode::NearestNeighbor)
}

/// Full generation: matrix, blend weights and exit delay.
///
/// Linear interpolation ramps between micro images, so outputs that share a
/// tap set under sample-and-hold still differ in their blend weights; every
/// phase then carries a fresh sum and the matrix widens accordingly.
pub fn gen_switch_plan_interp(shift: &RefocusShift, interp: InterpMode) -> SwitchPlan {
    let m = i64::from(shift.micro_size());
    let d = alignment_delay(shift);
    let reach = d + i64::from(shift.numerator()) * (m - 1);
    // any steady-state window clear of the boundary transient
    let base = ((reach / m) + 2) * m;

    let taps_of = |k: i64| view_taps(shift, k);
    let fresh = |k: i64| -> bool {
        let now = taps_of(k);
        let prev = taps_of(k - 1);
        now.iter()
            .zip(&prev)
            .any(|(a, b)| a.tap != b.tap || (interp == InterpMode::Linear && a.lambda != b.lambda))
    };

    // span covers taps older than the output index, delta covers newer ones
    let mut delta = 0i64;
    let mut span = 0i64;
    for k in base..base + m {
        if !fresh(k) {
            continue;
        }
        for vt in taps_of(k) {
            delta = delta.max(vt.tap - k);
            span = span.max(k - vt.tap);
        }
    }
    let width = (1 + delta + span) as usize;

    let mu = shift.micro_size() as usize;
    let mut rows = vec![vec![0u8; width]; mu];
    let mut blend = vec![vec![0u8; width]; mu];
    let mut we_pattern = vec![false; mu];
    for k in base..base + m {
        let q = k.rem_euclid(m) as usize;
        if !fresh(k) {
            continue;
        }
        we_pattern[q] = true;
        let exit = k + delta;
        for vt in taps_of(k) {
            let w = (width as i64 - 1 - (exit - vt.tap)) as usize;
            let p = vt.tap.rem_euclid(m) as usize;
            rows[p][w] = 1;
            blend[p][w] = vt.lambda as u8;
        }
    }

    SwitchPlan {
        matrix: SwitchMatrix {
            shift: *shift,
            width,
            rows,
            we_pattern,
        },
        blend,
        exit_delay: delta as u32,
    }
}

impl SwitchMatrix {
    /// Renders the matrix as a human-readable 0/1 table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "switch matrix a = {} (W = {}):\n",
            self.shift, self.width
        ));
        for (p, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|b| b.to_string()).collect();
            let we = if self.we_pattern[p] { "we" } else { "  " };
            out.push_str(&format!("  p={p} [{}] {we}\n", cells.join(" ")));
        }
        out
    }
}

/// One problem found by [`validate_matrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixViolation {
    pub check: &'static str,
    pub message: String,
}

/// Structural and behavioral validation report for a switch matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MatrixReport {
    pub violations: Vec<MatrixViolation>,
}

impl MatrixReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, check: &'static str, message: String) {
        self.violations.push(MatrixViolation { check, message });
    }
}

/// Checks the structural invariants of a matrix and smoke-tests it for
/// output equivalence with the reference refocusing path on a short row.
pub fn validate_matrix(matrix: &SwitchMatrix) -> MatrixReport {
    let mut report = MatrixReport::default();
    let m = matrix.shift.micro_size() as usize;

    if matrix.rows.len() != m {
        report.push(
            "rows",
            format!("expected {m} phase rows, got {}", matrix.rows.len()),
        );
    }
    for (p, row) in matrix.rows.iter().enumerate() {
        if row.len() != matrix.width {
            report.push(
                "width",
                format!(
                    "row {p} has {} entries, width says {}",
                    row.len(),
                    matrix.width
                ),
            );
        }
        if let Some(&bad) = row.iter().find(|&&b| b > 1) {
            report.push("binary", format!("row {p} contains non-binary entry {bad}"));
        }
        let ones = row.iter().filter(|&&b| b == 1).count();
        if ones == 0 {
            report.push("row_weight", format!("row {p} has no closed switch"));
        }
        if ones > m {
            report.push(
                "row_weight",
                format!("row {p} has {ones} closed switches, max {m}"),
            );
        }
    }
    if matrix.we_pattern.len() != m {
        report.push(
            "we_pattern",
            format!(
                "expected {m} write-enable flags, got {}",
                matrix.we_pattern.len()
            ),
        );
    } else if !matrix.we_pattern.iter().any(|&b| b) {
        report.push("we_pattern", "no phase ever enables output".to_string());
    }
    if !report.is_valid() {
        return report;
    }

    // behavioral smoke test against the reference path
    let row: Vec<u8> = (0..8 * m).map(|i| ((i * 37 + 11) % 251) as u8).collect();
    let (expect, expect_mask) = match refocus::refocus_1d(
        &row,
        &matrix.shift,
        InterpMode::NearestNeighbor,
        PrecisionMode::Exact,
    ) {
        Ok(r) => r,
        Err(e) => {
            report.push("smoke", format!("reference path failed: {e}"));
            return report;
        }
    };
    let mut module = crate::fir::FirModule::new(matrix, PrecisionMode::Exact);
    match module.run_stream(&row) {
        Ok(run) => {
            for k in 0..row.len() {
                if expect_mask[k] != run.mask[k] {
                    report.push(
                        "smoke",
                        format!("validity differs from reference at sample {k}"),
                    );
                    break;
                }
                if expect_mask[k] && expect[k] != run.samples[k] {
                    report.push(
                        "smoke",
                        format!(
                            "output differs from reference at sample {k}: {} vs {}",
                            run.samples[k], expect[k]
                        ),
                    );
                    break;
                }
            }
        }
        Err(e) => report.push("smoke", format!("module run failed: {e}")),
    }
    report
}

/// Convenience: parse-and-generate used by the command line surface.
pub fn matrix_to_json(matrix: &SwitchMatrix) -> Result<String> {
    serde_json::to_string_pretty(matrix).map_err(Error::from)
}
