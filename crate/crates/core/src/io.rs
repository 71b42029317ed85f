//! CSV and JSON persistence. Floats are written with 17 significant digits,
//! so every value round-trips exactly and output is byte-stable.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};
use crate::spectral::{Axis, Sampled, SpaceTimeField, UniformGrid};

/// `serde_json` formatter printing every `f64` as `{:.16e}`.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // Pretty layout first, then re-serialize through the digit formatter.
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PrettySeventeen::default());
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Pretty printer with the digit rule applied.
#[derive(Default)]
struct PrettySeventeen {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! forward {
    ($($name:ident $(, $arg:ident : $ty:ty)*);* $(;)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for PrettySeventeen {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        SeventeenDigits.write_f64(writer, value)
    }

    forward! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        begin_object_value;
        end_object_value;
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => structural(format!("csv: {other:?}")),
    }
}

/// CSV with header `coordinate,re,im`.
pub fn series_to_csv<A: Axis>(f: &Sampled<A>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([f.axis_name(), "re", "im"]).map_err(csv_error)?;
    for (k, v) in f.values.iter().enumerate() {
        w.write_record([
            format!("{:.16e}", f.grid.point(k)),
            format!("{:.16e}", v.re),
            format!("{:.16e}", v.im),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| structural(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

/// Parses [`series_to_csv`] output; the grid is recovered from the
/// coordinates, which must be uniformly spaced.
pub fn series_from_csv<A: Axis>(text: &str) -> Result<Sampled<A>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        if rec.len() != 3 {
            return Err(structural(format!("csv row has {} columns, expected 3", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| structural(format!("csv value `{}`: {e}", &rec[i])))
        };
        coords.push(num(0)?);
        values.push(C64::new(num(1)?, num(2)?));
    }
    if coords.len() < 2 {
        return Err(structural("csv needs at least two rows"));
    }
    let step = (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
    let grid = UniformGrid::new(coords[0], step, coords.len())?;
    for (k, c) in coords.iter().enumerate() {
        if (grid.point(k) - c).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(structural(format!("csv coordinates are not uniform at row {k}")));
        }
    }
    Sampled::new(grid, values)
}

/// JSON envelope: grid metadata plus interleaved values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub axis: String,
    pub grid: UniformGrid,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Envelope {
    pub fn of<A: Axis>(f: &Sampled<A>) -> Self {
        Self {
            axis: f.axis_name().to_string(),
            grid: f.grid,
            re: f.values.iter().map(|v| v.re).collect(),
            im: f.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn into_sampled<A: Axis>(self) -> Result<Sampled<A>> {
        if self.re.len() != self.im.len() {
            return Err(structural("envelope re/im lengths differ"));
        }
        let values = self.re.iter().zip(&self.im).map(|(a, b)| C64::new(*a, *b)).collect();
        Sampled::new(self.grid, values)
    }
}

/// Space-time field as CSV with header `x,t,re,im`, rows ordered by `t` then `x`.
pub fn field_to_csv(f: &SpaceTimeField, stride_x: usize, stride_t: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "t", "re", "im"]).map_err(csv_error)?;
    for it in (0..f.nt()).step_by(stride_t.max(1)) {
        for ix in (0..f.nx()).step_by(stride_x.max(1)) {
            let v = f.at(ix, it);
            w.write_record([
                format!("{:.16e}", f.xgrid.point(ix)),
                format!("{:.16e}", f.tgrid.point(it)),
                format!("{:.16e}", v.re),
                format!("{:.16e}", v.im),
            ])
            .map_err(csv_error)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| structural(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

/// Grid metadata accompanying a field CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldEnvelope {
    pub xgrid: UniformGrid,
    pub tgrid: UniformGrid,
    pub stride_x: usize,
    pub stride_t: usize,
    /// Name of the CSV file holding the samples.
    pub file: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{GridFunction, TimeSeries};
    use proptest::prelude::*;

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json_string(&serde_json::json!({"v": 0.1, "n": 3, "nan": f64::NAN})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("null"));
    }

    #[test]
    fn envelope_round_trip() {
        let g = UniformGrid::centered(4.0, 8).unwrap();
        let h = TimeSeries::from_fn(g, |t| C64::new(t.sin(), t.cos() / 3.0));
        let text = to_json_string(&Envelope::of(&h)).unwrap();
        let back: TimeSeries = serde_json::from_str::<Envelope>(&text).unwrap().into_sampled().unwrap();
        assert_eq!(back.grid, h.grid);
        assert_eq!(back.values, h.values);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        assert!(series_from_csv::<crate::spectral::Space>("x,re,im\n0,1\n1,2,3\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(vals in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40), origin in -5.0f64..5.0, step in 0.01f64..2.0) {
            let grid = UniformGrid::new(origin, step, vals.len()).unwrap();
            let f = GridFunction::new(grid, vals.iter().map(|(a, b)| C64::new(*a, *b)).collect()).unwrap();
            let back: GridFunction = series_from_csv(&series_to_csv(&f).unwrap()).unwrap();
            prop_assert!((back.grid.origin - origin).abs() <= 1e-12 * origin.abs().max(1.0));
            prop_assert!((back.grid.step - step).abs() <= 1e-12 * step);
            for (a, b) in back.values.iter().zip(&f.values) {
                prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
            }
        }
    }
}
