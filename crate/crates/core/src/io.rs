//! Channel files, boundary CSV and plot scripts.
//!
//! A channel file is a JSON object:
//!
//! ```json
//! { "H1": [[2, 0.4]], "H2": [[0.4, 1]], "S": [[3.3333, 1.2346], [1.2346, 1.6667]] }
//! ```
//!
//! with exactly one of `"S"` or `"P"`. An aligned channel may instead give
//! noise covariances `"N1"`, `"N2"`; `"R0"` sets a common-rate target.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::channel::{AlignedChannel, ChannelSpec, PowerConstraint};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix, PSD_TOL};
use crate::tracer::{BoundaryPoint, RegionBoundary};

pub const CSV_HEADER: &str = "gamma0,alpha,R0_bits,R1_bits";
pub const CSV_LOG_BASE: &str = "# log_base=2";

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFile {
    pub spec: ChannelSpec,
    /// Present when the file gives `N1` and `N2` directly.
    pub aligned: Option<AlignedChannel>,
    pub r0: Option<f64>,
}

fn parse_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Parse { key: key.to_string(), msg: msg.into() }
}

fn rows_of(v: &Value, key: &str) -> Result<Vec<Vec<f64>>> {
    let rows = v.as_array().ok_or_else(|| parse_err(key, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(parse_err(key, "matrix has no rows"));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().ok_or_else(|| parse_err(key, format!("row {i} is not an array")))?;
        let mut row = Vec::with_capacity(r.len());
        for (j, x) in r.iter().enumerate() {
            let x = x
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(key, format!("entry ({i}, {j}) is not a finite number")))?;
            row.push(x);
        }
        out.push(row);
    }
    let width = out[0].len();
    if width == 0 || out.iter().any(|r| r.len() != width) {
        return Err(parse_err(key, "rows must be nonempty and of equal length"));
    }
    Ok(out)
}

fn matrix_of(v: &Value, key: &str) -> Result<Matrix> {
    Matrix::from_rows(&rows_of(v, key)?).map_err(|e| parse_err(key, e.to_string()))
}

fn sym_of(v: &Value, key: &str) -> Result<SymMatrix> {
    let rows = rows_of(v, key)?;
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(parse_err(key, format!("{key} must be square")));
    }
    SymMatrix::from_rows(&rows).map_err(|e| parse_err(key, e.to_string()))
}

/// Parses a channel document.
pub fn parse_channel_str(text: &str) -> Result<ChannelFile> {
    let doc: Value = serde_json::from_str(text).map_err(|e| parse_err("<document>", format!("malformed JSON: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| parse_err("<document>", "expected a JSON object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "H1" | "H2" | "S" | "P" | "N1" | "N2" | "R0") {
            return Err(parse_err(key, "unknown key"));
        }
    }

    let power = match (obj.get("S"), obj.get("P")) {
        (Some(_), Some(_)) => return Err(parse_err("S", "give exactly one of S or P, not both")),
        (None, None) => return Err(parse_err("S", "missing power constraint: give S or P")),
        (Some(s), None) => {
            let s = sym_of(s, "S")?;
            if !s.is_psd(PSD_TOL * s.max_abs().max(1.0)) {
                return Err(parse_err("S", "S is not positive semidefinite"));
            }
            PowerConstraint::Matrix(s)
        }
        (None, Some(p)) => {
            let p = p.as_f64().ok_or_else(|| parse_err("P", "P must be a number"))?;
            if !(p >= 0.0) || !p.is_finite() {
                return Err(parse_err("P", format!("P must be nonnegative, got {p}")));
            }
            PowerConstraint::Total(p)
        }
    };

    let noise = match (obj.get("N1"), obj.get("N2")) {
        (Some(a), Some(b)) => {
            let n1 = sym_of(a, "N1")?;
            let n2 = sym_of(b, "N2")?;
            for (n, key) in [(&n1, "N1"), (&n2, "N2")] {
                if n.cholesky().is_err() {
                    return Err(parse_err(key, format!("{key} is not positive definite")));
                }
            }
            Some((n1, n2))
        }
        (Some(_), None) => return Err(parse_err("N2", "N1 given without N2")),
        (None, Some(_)) => return Err(parse_err("N1", "N2 given without N1")),
        (None, None) => None,
    };

    let (h1, h2) = match (obj.get("H1"), obj.get("H2"), &noise) {
        (Some(a), Some(b), None) => (matrix_of(a, "H1")?, matrix_of(b, "H2")?),
        (None, None, Some((n1, n2))) => {
            // H_k = N_k^{-1/2} realizes the aligned channel
            let inv_sqrt = |n: &SymMatrix| n.map_eigenvalues(|x| 1.0 / x.sqrt()).to_matrix();
            (inv_sqrt(n1), inv_sqrt(n2))
        }
        (Some(_), Some(_), Some(_)) => return Err(parse_err("N1", "give either H1/H2 or N1/N2, not both")),
        (None, _, None) => return Err(parse_err("H1", "missing channel matrix")),
        (_, None, None) => return Err(parse_err("H2", "missing channel matrix")),
        (Some(_), None, Some(_)) | (None, Some(_), Some(_)) => {
            return Err(parse_err("H1", "give either H1/H2 or N1/N2, not both"))
        }
    };

    let t = h1.cols();
    if h2.cols() != t {
        return Err(parse_err("H2", format!("H2 has {} columns, H1 has {t}", h2.cols())));
    }
    if let PowerConstraint::Matrix(s) = &power {
        if s.dim() != t {
            return Err(parse_err("S", format!("S is {0}x{0}, expected {t}x{t}", s.dim())));
        }
    }
    let aligned = match noise {
        Some((n1, n2)) => {
            let s = match &power {
                PowerConstraint::Matrix(s) => s.clone(),
                PowerConstraint::Total(_) => {
                    return Err(parse_err("P", "aligned noise covariances need a matrix constraint S"))
                }
            };
            if n1.dim() != t || n2.dim() != t {
                return Err(parse_err("N2", "noise covariances must match S"));
            }
            Some(AlignedChannel::new(n1, n2, s).map_err(|e| parse_err("N1", e.to_string()))?)
        }
        None => None,
    };
    let r0 = match obj.get("R0") {
        None => None,
        Some(v) => {
            let r = v.as_f64().ok_or_else(|| parse_err("R0", "R0 must be a number"))?;
            if !(r >= 0.0) || !r.is_finite() {
                return Err(parse_err("R0", format!("R0 must be nonnegative, got {r}")));
            }
            Some(r)
        }
    };
    let spec = ChannelSpec::new(h1, h2, power).map_err(|e| parse_err("H1", e.to_string()))?;
    Ok(ChannelFile { spec, aligned, r0 })
}

pub fn parse_channel_document(path: &Path) -> Result<ChannelFile> {
    parse_channel_str(&fs::read_to_string(path)?)
}

pub fn parse_channel_file(path: &Path) -> Result<ChannelSpec> {
    Ok(parse_channel_document(path)?.spec)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// `x` with 12 significant digits, trailing zeros trimmed.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new leading digit
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// Boundary CSV text: a `# log_base=2` comment, the header, then rows by `γ₀`.
pub fn boundary_csv(b: &RegionBoundary) -> Result<String> {
    if b.points.is_empty() {
        return Err(Error::InvalidInput("boundary has no points".into()));
    }
    let mut pts = b.points.clone();
    pts.sort_by(|x, y| x.gamma0.total_cmp(&y.gamma0));
    let mut out = String::new();
    out.push_str(CSV_LOG_BASE);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in &pts {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_sig12(p.gamma0),
            format_sig12(p.alpha),
            format_sig12(p.r0),
            format_sig12(p.r1)
        ));
    }
    Ok(out)
}

pub fn witness_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.witnesses.json"))
}

/// Writes the CSV and, when present, the witnesses to `<stem>.witnesses.json`.
pub fn emit_boundary_csv(b: &RegionBoundary, path: &Path) -> Result<()> {
    let text = boundary_csv(b)?;
    if let Some(w) = &b.witnesses {
        let mut order: Vec<usize> = (0..b.points.len()).collect();
        order.sort_by(|&i, &j| b.points[i].gamma0.total_cmp(&b.points[j].gamma0));
        let entries: Vec<Value> = order
            .iter()
            .map(|&i| serde_json::json!({ "gamma0": b.points[i].gamma0, "witness": w[i] }))
            .collect();
        let doc = serde_json::json!({ "constraint": b.constraint_kind, "witnesses": entries });
        write_atomic(&witness_path(path), serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
    }
    write_atomic(path, text.as_bytes())
}

/// Parses boundary CSV text, skipping `#` comment lines.
pub fn parse_boundary_csv_str(text: &str) -> Result<Vec<BoundaryPoint>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(parse_err("<csv>", format!("expected header {CSV_HEADER}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err("<csv>", format!("row {}: {e}", i + 1)))?;
            if f.len() != 4 {
                return Err(parse_err("<csv>", format!("row {} has {} fields", i + 1, f.len())));
            }
            Ok(BoundaryPoint { gamma0: f[0], alpha: f[1], r0: f[2], r1: f[3] })
        })
        .collect()
}

pub fn parse_boundary_csv(path: &Path) -> Result<Vec<BoundaryPoint>> {
    parse_boundary_csv_str(&fs::read_to_string(path)?)
}

fn gnuplot_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Gnuplot script plotting `R1` against `R0` for each CSV, titled by file stem.
pub fn plot_script(csv_paths: &[PathBuf]) -> Result<String> {
    if csv_paths.is_empty() {
        return Err(Error::InvalidInput("plot script needs at least one CSV".into()));
    }
    let mut out = String::new();
    out.push_str("set datafile separator ','\n");
    out.push_str("set key autotitle columnhead\n");
    out.push_str("set key top right\n");
    out.push_str("set xlabel 'R0 (bits)'\n");
    out.push_str("set ylabel 'R1 (bits)'\n");
    out.push_str("set xrange [0:*]\n");
    out.push_str("set yrange [0:*]\n");
    let curves: Vec<String> = csv_paths
        .iter()
        .map(|p| {
            let title = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            format!(
                "{} using 3:4 with linespoints title {}",
                gnuplot_quote(&p.to_string_lossy()),
                gnuplot_quote(&title)
            )
        })
        .collect();
    out.push_str("plot ");
    out.push_str(&curves.join(", \\\n     "));
    out.push('\n');
    Ok(out)
}

pub fn emit_plot_script(csv_paths: &[PathBuf], path: &Path) -> Result<()> {
    write_atomic(path, plot_script(csv_paths)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::ConstraintKind;

    const EXAMPLE: &str = r#"{"H1": [[2, 0.4]], "H2": [[0.4, 1]], "S": [[3.3333, 1.2346], [1.2346, 1.6667]]}"#;

    fn key_of(r: Result<ChannelFile>) -> String {
        match r {
            Err(Error::Parse { key, .. }) => key,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_example() {
        let f = parse_channel_str(EXAMPLE).unwrap();
        assert_eq!(f.spec.t(), 2);
        assert!(matches!(f.spec.power(), PowerConstraint::Matrix(_)));
        let f = parse_channel_str(r#"{"H1": [[2, 0.4]], "H2": [[0.4, 1]], "P": 5}"#).unwrap();
        assert_eq!(f.spec.power(), &PowerConstraint::Total(5.0));
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(parse_channel_str("{")), "<document>");
        assert_eq!(key_of(parse_channel_str(r#"{"H1": [[1, 0]], "H2": [[0, 1, 2]], "P": 1}"#)), "H2");
        assert_eq!(key_of(parse_channel_str(r#"{"H1": [[1, 0]], "H2": [[0, 1]], "P": -1}"#)), "P");
        assert_eq!(key_of(parse_channel_str(r#"{"H1": [[1, 0]], "H2": [[0, 1]], "S": [[1]]}"#)), "S");
        assert_eq!(key_of(parse_channel_str(r#"{"H1": [[1, 0]], "H2": [[0, 1]]}"#)), "S");
        assert_eq!(key_of(parse_channel_str(r#"{"H1": [[1, 0]], "H2": [[0, 1]], "S": [[1,0],[0,1]], "P": 2}"#)), "S");
        assert_eq!(key_of(parse_channel_str(r#"{"H2": [[0, 1]], "P": 2}"#)), "H1");
        assert_eq!(key_of(parse_channel_str(r#"{"H1": [[1, "x"]], "H2": [[0, 1]], "P": 2}"#)), "H1");
        let err = parse_channel_str(r#"{"H1": [[1, 0]], "H2": [[0, 1]], "S": [[1, 2], [2, 1]]}"#).unwrap_err();
        assert!(err.to_string().contains("S is not positive semidefinite"), "{err}");
    }

    #[test]
    fn aligned_file_round_trips_noise() {
        let f = parse_channel_str(r#"{"N1": [[1]], "N2": [[2]], "S": [[3]], "R0": 0.1}"#).unwrap();
        let ch = f.aligned.unwrap();
        assert_eq!(ch.n2, SymMatrix::scalar(2.0));
        let back = crate::channel::align(&f.spec).unwrap();
        assert!((back.n2.get(0, 0) - 2.0).abs() < 1e-12);
        assert_eq!(f.r0, Some(0.1));
    }

    fn boundary(points: Vec<BoundaryPoint>) -> RegionBoundary {
        RegionBoundary { points, constraint_kind: ConstraintKind::MatrixPower, witnesses: None }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let b = boundary(vec![BoundaryPoint::from_alpha(1.0, 2.5), BoundaryPoint::from_alpha(0.0, 3.0 / 7.0)]);
        let text = boundary_csv(&b).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines.len(), 5); // trailing LF
        assert_eq!(lines[0], CSV_LOG_BASE);
        assert_eq!(lines[1], CSV_HEADER);
        assert!(lines[2].starts_with("0,"));
        assert!(!text.contains('\r'));
        let back = parse_boundary_csv_str(&text).unwrap();
        let mut sorted = b.points.clone();
        sorted.sort_by(|x, y| x.gamma0.total_cmp(&y.gamma0));
        for (p, q) in back.iter().zip(&sorted) {
            for (x, y) in [(p.gamma0, q.gamma0), (p.alpha, q.alpha), (p.r0, q.r0), (p.r1, q.r1)] {
                assert!((x - y).abs() <= 5e-12 * y.abs().max(1.0), "{x} vs {y}");
            }
        }
        assert_eq!(boundary_csv(&boundary(back)).unwrap(), text);
        assert!(boundary_csv(&boundary(vec![])).is_err());
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(1.0), "1");
        assert_eq!(format_sig12(6.142512345678912), "6.14251234568");
        assert_eq!(format_sig12(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(format_sig12(9.9999999999999), "10");
        assert_eq!(format_sig12(1.5e-9), "1.50000000000e-9");
        assert_eq!(format_sig12(1e-300).parse::<f64>().unwrap(), 1e-300);
    }

    #[test]
    fn plot_script_curves() {
        assert!(plot_script(&[]).is_err());
        let one = plot_script(&[PathBuf::from("a.csv")]).unwrap();
        assert_eq!(one.matches(" using 3:4").count(), 1);
        let four: Vec<PathBuf> = ["secrecy_S", "secrecy_P", "dms_S", "dms_P"].iter().map(|s| PathBuf::from(format!("{s}.csv"))).collect();
        let s = plot_script(&four).unwrap();
        assert_eq!(s.matches(" using 3:4").count(), 4);
        assert!(s.contains("title 'dms_P'"));
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"abc").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "abc");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x.csv"), b"abc").is_err());
    }
}
