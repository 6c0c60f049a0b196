//! Persistence and emission: canonical state JSON, audit reports, CSV traces,
//! eigenvalue listings, SVG plots, and the key=value run configuration.
//!
//! Canonical JSON has object keys sorted and every float printed as
//! `d.dddddddddddddddde±x` (17 significant digits), which round-trips `f64`
//! exactly. All files are written to a sibling temp file and renamed.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::construct::{ConstructionConfig, ConstructionState, SearchConfig, FORMAT_VERSION};
use crate::spectral::{CertifiedAmplitude, SpectralConfig};
use crate::verify::{AuditOptions, SpectrumAuditOptions, WitnessAuditOptions};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("malformed state: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("{origin}:{line}: {message}")]
    Config { origin: String, line: usize, message: String },
}

fn file_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

/// Writes `bytes` to `path` through a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(file_err(path))
}

/// Pretty printer with fixed 17-significant-digit floats.
struct Canonical<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident),*) => {$(
        fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        }
    )*};
}

impl Formatter for Canonical<'_> {
    delegate!(begin_array, end_array, end_array_value, begin_object, end_object, end_object_value, begin_object_value);

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
}

/// Canonical JSON text of any serializable value, newline-terminated.
/// Non-finite floats come out as `null`, which a state parse then rejects.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Canonical(PrettyFormatter::with_indent(b"  ")));
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn serialize_state(state: &ConstructionState) -> Result<String, IoError> {
    to_canonical_json(state)
}

pub fn parse_state(text: &str) -> Result<ConstructionState, IoError> {
    let state: ConstructionState = serde_json::from_str(text)?;
    if state.format_version != FORMAT_VERSION {
        return Err(IoError::Version { found: state.format_version, expected: FORMAT_VERSION });
    }
    Ok(state)
}

pub fn read_state(path: &Path) -> Result<ConstructionState, IoError> {
    parse_state(&fs::read_to_string(path).map_err(file_err(path))?)
}

pub fn write_state(path: &Path, state: &ConstructionState) -> Result<(), IoError> {
    write_atomic(path, serialize_state(state)?.as_bytes())
}

/// CSV trace with header `t,re,im,abs,error_radius`.
pub fn trace_csv(rows: &[(f64, CertifiedAmplitude)]) -> String {
    let mut out = String::from("t,re,im,abs,error_radius\n");
    for (t, a) in rows {
        let _ = writeln!(
            out,
            "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            a.value.re,
            a.value.im,
            a.value.norm(),
            a.error_radius
        );
    }
    out
}

/// One ascending eigenvalue per line under the header `eigenvalue`.
pub fn eigenvalue_csv(values: &[f64]) -> String {
    let mut out = String::from("eigenvalue\n");
    for e in values {
        let _ = writeln!(out, "{e:.16e}");
    }
    out
}

/// Line plot of `|μ̂(t)|` over `t` with axes and a few tick labels.
pub fn amplitude_svg(points: &[(f64, Complex64)]) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let t0 = points.first().map_or(0.0, |p| p.0);
    let t1 = points.last().map_or(1.0, |p| p.0);
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let x = |t: f64| pad + (t - t0) / span * (w - 2.0 * pad);
    let y = |a: f64| h - pad - a.clamp(0.0, 1.0) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        l = pad,
        t = pad,
        b = h - pad,
        r = w - pad
    );
    for k in 0..=4 {
        let a = k as f64 / 4.0;
        let _ =
            writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{a:.2}</text>"#, pad - 6.0, y(a) + 4.0);
        let tt = t0 + span * a;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{tt:.3}</text>"#,
            x(tt),
            h - pad + 16.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t</text>"#, w / 2.0, h - 8.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" font-size="12">|μ̂(t)|</text>"#, pad - 16.0);
    let coords: Vec<String> = points.iter().map(|(t, v)| format!("{:.3},{:.3}", x(*t), y(v.norm()))).collect();
    let _ =
        writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#, coords.join(" "));
    s.push_str("</svg>\n");
    s
}

/// Everything a run can be configured with. Layered as defaults, then a
/// key=value file, then command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stages: usize,
    pub epsilon: f64,
    pub l1: usize,
    pub m_cap: f64,
    pub max_box: usize,
    pub k_ceiling: f64,
    pub search_max_window: f64,
    pub witness_grid_step: Option<f64>,
    pub witness_tol: f64,
    pub spectrum_boxes: Vec<usize>,
    pub spectrum_margin: f64,
    pub spectrum_inner: f64,
    pub spectrum_max_gap: f64,
    pub spot_check_seed: Option<u64>,
    pub spot_check_count: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = ConstructionConfig::default();
        let w = WitnessAuditOptions::default();
        let s = SpectrumAuditOptions::default();
        Self {
            stages: crate::construct::DEFAULT_STAGES,
            epsilon: c.epsilon,
            l1: c.l1,
            m_cap: c.spectral.m_cap,
            max_box: c.spectral.max_box,
            k_ceiling: c.k_ceiling,
            search_max_window: c.search.max_window,
            witness_grid_step: w.grid_step_override,
            witness_tol: w.tol,
            spectrum_boxes: s.boxes,
            spectrum_margin: s.margin,
            spectrum_inner: s.inner,
            spectrum_max_gap: s.max_gap,
            spot_check_seed: None,
            spot_check_count: 16,
            out: None,
            svg: None,
        }
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        match key {
            "stages" => self.stages = num(value)?,
            "epsilon" => self.epsilon = num(value)?,
            "l1" => self.l1 = num(value)?,
            "m_cap" => self.m_cap = num(value)?,
            "max_box" => self.max_box = num(value)?,
            "k_ceiling" => self.k_ceiling = num(value)?,
            "search_max_window" => self.search_max_window = num(value)?,
            "witness_grid_step" => self.witness_grid_step = Some(num(value)?),
            "witness_tol" => self.witness_tol = num(value)?,
            "spectrum_boxes" => {
                self.spectrum_boxes = value.split(',').map(|b| num(b.trim())).collect::<Result<_, _>>()?
            }
            "spectrum_margin" => self.spectrum_margin = num(value)?,
            "spectrum_inner" => self.spectrum_inner = num(value)?,
            "spectrum_max_gap" => self.spectrum_max_gap = num(value)?,
            "spot_check_seed" => self.spot_check_seed = Some(num(value)?),
            "spot_check_count" => self.spot_check_count = num(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies a key=value document; `#` starts a comment, blank lines are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), IoError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| IoError::Config { origin: origin.to_string(), line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            self.set(k.trim(), v.trim()).map_err(err)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), IoError> {
        let text = fs::read_to_string(path).map_err(file_err(path))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return Err(format!("epsilon must lie in (0, 1/4), got {}", self.epsilon));
        }
        if self.stages < 1 {
            return Err("stages must be at least 1".into());
        }
        if self.l1 < 2 {
            return Err(format!("l1 must be at least 2, got {}", self.l1));
        }
        if self.m_cap.is_nan() || self.m_cap <= 0.0 || self.witness_tol.is_nan() || self.witness_tol <= 0.0 {
            return Err("m_cap and witness_tol must be positive".into());
        }
        Ok(())
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig { m_cap: self.m_cap, max_box: self.max_box, ..SpectralConfig::default() }
    }

    pub fn construction(&self) -> ConstructionConfig {
        let base = ConstructionConfig::default();
        ConstructionConfig {
            epsilon: self.epsilon,
            l1: self.l1,
            k_ceiling: self.k_ceiling,
            search: SearchConfig { max_window: self.search_max_window, ..base.search },
            spectral: self.spectral(),
            ..base
        }
    }

    pub fn audit_options(&self) -> AuditOptions {
        AuditOptions {
            witness: WitnessAuditOptions {
                grid_step_override: self.witness_grid_step,
                tol: self.witness_tol,
                spot_check: self.spot_check_seed.map(|s| (s, self.spot_check_count)),
            },
            spectrum: SpectrumAuditOptions {
                boxes: self.spectrum_boxes.clone(),
                margin: self.spectrum_margin,
                inner: self.spectrum_inner,
                max_gap: self.spectrum_max_gap,
                ..SpectrumAuditOptions::default()
            },
        }
    }
}
