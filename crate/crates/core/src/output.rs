//! CSV and plot-script emission.

use std::fmt::Write as _;

use crate::functionals::EnergySample;
use crate::spectral::SpectrumReport;

/// Locale-independent float formatting that round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub const ENERGY_HEADER: &str = "t,E,E1,L,dE_residual";
pub const EIGEN_HEADER: &str = "re,im";

pub fn energy_csv(samples: &[EnergySample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(ENERGY_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.energy),
            fmt_f64(s.e1),
            fmt_f64(s.lyap),
            fmt_f64(s.de_residual)
        );
    }
    out
}

pub fn eigenvalues_csv(report: &SpectrumReport) -> String {
    let mut out = String::from(EIGEN_HEADER);
    out.push('\n');
    for l in &report.eigenvalues {
        let _ = writeln!(out, "{},{}", fmt_f64(l.re), fmt_f64(l.im));
    }
    out
}

/// gnuplot script plotting `E`, `E1` and `L` on a log scale.
pub fn energy_plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set xlabel 't'\n\
         set ylabel 'energy'\n\
         set terminal pngcairo size 900,600\n\
         set output 'energy.png'\n\
         plot '{csv_name}' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines\n"
    )
}

pub fn eigenvalue_plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xlabel 'Re'\n\
         set ylabel 'Im'\n\
         set xzeroaxis\n\
         set yzeroaxis\n\
         set terminal pngcairo size 900,600\n\
         set output 'eigenvalues.png'\n\
         plot '{csv_name}' every ::1 using 1:2 with points pt 7 ps 0.5\n"
    )
}

/// Scatter of the abscissa over the first two swept parameters.
pub fn sweep_plot_script(
    csv_name: &str,
    x_col: usize,
    y_col: usize,
    x_name: &str,
    y_name: &str,
) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xlabel '{x_name}'\n\
         set ylabel '{y_name}'\n\
         set cblabel 'spectral abscissa'\n\
         set palette defined (-1 'blue', 0 'white', 1 'red')\n\
         set terminal pngcairo size 900,600\n\
         set output 'sweep.png'\n\
         plot '{csv_name}' every ::1 using {x_col}:{y_col}:7 with points pt 5 ps 1.5 palette\n"
    )
}
