//! Closed-form cycle-count and latency model for the module array.
//!
//! The model assumes maximal parallelization (one module per row and per
//! column) and counts the steps from the first sensor pixel entering the
//! logic until the last refocused pixel is available. Published benchmark
//! figures are embedded as named reference constants for comparison
//! reports; they are fixed references, never measurements.

use serde::Serialize;

use crate::error::{Error, Result};

/// Inputs of the cycle-count model.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimingParams {
    /// Multiply-stage cycles (stored product lookup).
    pub lambda: u64,
    /// Micro image size.
    pub m: u64,
    /// Frame width in pixels.
    pub k: u64,
    /// Frame height in pixels.
    pub l: u64,
    /// Pixel clock period in seconds.
    pub t_pclk: f64,
    /// Parallel degree; the model itself assumes the maximum.
    pub iota: u64,
}

impl TimingParams {
    pub fn new(lambda: u64, m: u64, k: u64, l: u64, t_pclk: f64, iota: u64) -> Result<Self> {
        if lambda < 1 {
            return Err(Error::InvalidArgument("lambda must be >= 1".into()));
        }
        if m < 1 || k < 1 || l < 1 || iota < 1 {
            return Err(Error::InvalidArgument(
                "m, k, l and iota must be positive".into(),
            ));
        }
        if t_pclk <= 0.0 {
            return Err(Error::InvalidArgument("t_pclk must be positive".into()));
        }
        Ok(Self {
            lambda,
            m,
            k,
            l,
            t_pclk,
            iota,
        })
    }
}

/// Steps to compute the first frame: `2(lambda + M) + 2(K-1) + (L-1)`.
pub fn steps_first_frame(p: &TimingParams) -> u64 {
    2 * (p.lambda + p.m) + 2 * (p.k - 1) + (p.l - 1)
}

/// Steps per subsequent pipelined frame: `(L-1) + (K-1)`.
pub fn steps_subsequent(k: u64, l: u64) -> u64 {
    (l - 1) + (k - 1)
}

/// Wall-clock duration of a cycle count in seconds.
pub fn latency(cycles: u64, t_pclk: f64) -> f64 {
    cycles as f64 * t_pclk
}

/// One published benchmark row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReferenceEntry {
    pub label: &'static str,
    pub clock_hz: f64,
    pub seconds: f64,
}

/// Published single-frame benchmark figures for a 3201x3201 capture.
pub const REFERENCE_RESULTS: [ReferenceEntry; 4] = [
    ReferenceEntry {
        label: "semi-systolic FIR array",
        clock_hz: 100.0e6,
        seconds: 96.2e-6,
    },
    ReferenceEntry {
        label: "FPGA integral projection",
        clock_hz: 100.0e6,
        seconds: 105.9e-3,
    },
    ReferenceEntry {
        label: "GPU shader",
        clock_hz: 1.35e9,
        seconds: 1.38e-3,
    },
    ReferenceEntry {
        label: "CPU Matlab",
        clock_hz: 3.40e9,
        seconds: 12.1,
    },
];

/// Model results next to the published reference figures.
#[derive(Debug, Clone, Serialize)]
pub struct TimingReport {
    pub params: TimingParams,
    pub eta: u64,
    pub eta_sub: u64,
    pub latency_first_s: f64,
    pub latency_sub_s: f64,
    pub references: Vec<ReferenceEntry>,
    /// Delay reduction of the model against the FPGA reference, percent.
    pub reduction_vs_fpga_percent: f64,
    pub speedup_vs_gpu: f64,
    pub speedup_vs_cpu: f64,
}

/// Evaluates the model and assembles the comparison report.
pub fn benchmark_report(p: &TimingParams) -> TimingReport {
    let eta = steps_first_frame(p);
    let eta_sub = steps_subsequent(p.k, p.l);
    let latency_first_s = latency(eta, p.t_pclk);
    let latency_sub_s = latency(eta_sub, p.t_pclk);
    let fpga = REFERENCE_RESULTS[1].seconds;
    let gpu = REFERENCE_RESULTS[2].seconds;
    let cpu = REFERENCE_RESULTS[3].seconds;
    TimingReport {
        params: *p,
        eta,
        eta_sub,
        latency_first_s,
        latency_sub_s,
        references: REFERENCE_RESULTS.to_vec(),
        reduction_vs_fpga_percent: 100.0 * (1.0 - latency_first_s / fpga),
        speedup_vs_gpu: gpu / latency_first_s,
        speedup_vs_cpu: cpu / latency_first_s,
    }
}

impl TimingReport {
    /// Plain-text table for terminal output.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "cycle model (lambda={}, M={}, K={}, L={}, T_PCLK={:.3} ns)\n",
            self.params.lambda,
            self.params.m,
            self.params.k,
            self.params.l,
            self.params.t_pclk * 1e9
        ));
        out.push_str(&format!(
            "  first frame : {:>10} cycles  {:>12.3} us\n",
            self.eta,
            self.latency_first_s * 1e6
        ));
        out.push_str(&format!(
            "  subsequent  : {:>10} cycles  {:>12.3} us\n",
            self.eta_sub,
            self.latency_sub_s * 1e6
        ));
        out.push_str(&format!(
            "  vs FPGA integral projection: {:.2}% delay reduction\n",
            self.reduction_vs_fpga_percent
        ));
        out.push_str(&format!(
            "  vs GPU: {:.1}x   vs CPU: {:.0}x\n",
            self.speedup_vs_gpu, self.speedup_vs_cpu
        ));
        out.push_str("  references:\n");
        for r in &self.references {
            out.push_str(&format!(
                "    {:<28} {:>8.2} MHz {:>12.4} ms\n",
                r.label,
                r.clock_hz / 1e6,
                r.seconds * 1e3
            ));
        }
        out
    }
}
