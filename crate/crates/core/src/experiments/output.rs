use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const TRAJECTORY_HEADER: &str = "t,norm2,norm_inf,charge,hamiltonian,energy,m_imag,n_real,mass";
pub const SWEEP_HEADER: &str = "axis,N,L,sigma,T_sim,T_star,valid,threshold,dt,refinements";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub(crate) fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.into_iter().collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(dir, name, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        assert_eq!(format_opt(None), "");
    }

    #[test]
    fn csv_layout() {
        let text = csv("a,b", vec![vec!["1".to_string(), "2".to_string()]]);
        assert_eq!(text, "a,b\n1,2\n");
    }
}
