//! Whitespace-separated data files for gnuplot. Every file starts with a
//! `#` header naming its columns.

use std::fmt::Write as _;
use std::path::Path;

use kdv5::spectral::{forward_transform, GridFunction, TimeSeries};
use kdv5::verification::SmoothingReport;
use kdv5::Result;

fn save(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Columns `t re im` for the computed trace and `re im` for the datum.
pub fn trace(path: &Path, j: usize, computed: &TimeSeries, datum: &TimeSeries) -> Result<()> {
    let mut s = format!("# t  re(d^{j}u(0,t))  im  re(h{})  im\n", j + 1);
    for (k, (a, b)) in computed.values.iter().zip(&datum.values).enumerate() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}", computed.grid.point(k), a.re, a.im, b.re, b.im);
    }
    save(path, s)
}

/// Columns `xi |f^(xi)|`, in increasing frequency.
pub fn spectrum(path: &Path, label: &str, f: &GridFunction) -> Result<()> {
    let spec = forward_transform(f);
    let mut order: Vec<usize> = (0..spec.coeffs.len()).collect();
    order.sort_by(|a, b| spec.frequency(*a).total_cmp(&spec.frequency(*b)));
    let mut s = format!("# xi  |{label}^(xi)|\n");
    for k in order {
        let _ = writeln!(s, "{:.16e} {:.16e}", spec.frequency(k), spec.coeffs[k].norm());
    }
    save(path, s)
}

/// One file per `a`: columns `a nonlinear_norm linear_norm admissible`.
pub fn smoothing(dir: &Path, report: &SmoothingReport) -> Result<()> {
    for row in &report.rows {
        let mut s = String::from("# a  sup_t|N|_{H^{s+a}}  sup_t|L|_{H^{s+a}}  admissible\n");
        let _ = writeln!(
            s,
            "{:.16e} {:.16e} {:.16e} {}",
            row.a,
            row.nonlinear_norm,
            row.linear_norm,
            u8::from(row.admissible)
        );
        save(&dir.join(format!("smoothing_a{:.3}.dat", row.a)), s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kdv5::spectral::UniformGrid;
    use kdv5::verification::SmoothingRow;

    #[test]
    fn empty_report_writes_nothing() {
        let dir = std::env::temp_dir().join(format!("kdv5-plots-empty-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let rep = SmoothingReport {
            s: 0.3,
            rows: Vec::<SmoothingRow>::new(),
            band: (0.5, 2.5),
            slope_initial: None,
            slope_nonlinear: None,
            slope_gain_holds: false,
        };
        smoothing(&dir, &rep).unwrap();
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 0);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn spectrum_is_sorted_by_frequency() {
        let g = UniformGrid::centered(10.0, 16).unwrap();
        let f = GridFunction::from_real_fn(g, |x| (-x * x).exp());
        let path = std::env::temp_dir().join(format!("kdv5-spec-{}.dat", std::process::id()));
        spectrum(&path, "g", &f).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let xs: Vec<f64> = text.lines().skip(1).map(|l| l.split(' ').next().unwrap().parse().unwrap()).collect();
        assert_eq!(xs.len(), 16);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        std::fs::remove_file(&path).unwrap();
    }
}
