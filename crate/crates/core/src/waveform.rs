//! Time-indexed channel recordings and their columnar text form.
//!
//! The file is comma-separated: a header `time,<names...>` followed by one
//! row per step. Values use 17 significant digits so they read back
//! bit-exactly. In an N-wide set every channel has one column per scenario,
//! named `<channel>[<s>]`.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    pub width: usize,
    pub channels: Vec<String>,
    pub time: Vec<f64>,
    /// Column `c * width + s` holds channel `c` of scenario `s`.
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("waveform file line {line}: {message}")]
pub struct WaveformParseError {
    pub line: usize,
    pub message: String,
}

impl WaveformSet {
    pub fn new(channels: Vec<String>, width: usize) -> Self {
        let columns = vec![Vec::new(); channels.len() * width];
        WaveformSet { width, channels, time: Vec::new(), columns }
    }

    pub fn steps(&self) -> usize {
        self.time.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.columns.len());
        for c in &self.channels {
            if self.width == 1 {
                names.push(c.clone());
            } else {
                names.extend((0..self.width).map(|s| format!("{c}[{s}]")));
            }
        }
        names
    }

    /// Appends one row; `values` is laid out like [`Self::columns`].
    pub fn push_row(&mut self, t: f64, values: impl IntoIterator<Item = f64>) {
        self.time.push(t);
        let mut n = 0;
        for (col, v) in self.columns.iter_mut().zip(values) {
            col.push(v);
            n += 1;
        }
        debug_assert_eq!(n, self.columns.len());
    }

    pub fn channel(&self, name: &str, lane: usize) -> Option<&[f64]> {
        let c = self.channels.iter().position(|n| n == name)?;
        self.columns.get(c * self.width + lane).map(Vec::as_slice)
    }

    /// Scenario `lane` as a width-1 set.
    pub fn lane(&self, lane: usize) -> WaveformSet {
        assert!(lane < self.width, "lane {lane} out of width {}", self.width);
        WaveformSet {
            width: 1,
            channels: self.channels.clone(),
            time: self.time.clone(),
            columns: (0..self.channels.len())
                .map(|c| self.columns[c * self.width + lane].clone())
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for n in self.column_names() {
            out.push(',');
            out.push_str(&n);
        }
        out.push('\n');
        for (r, t) in self.time.iter().enumerate() {
            let _ = write!(out, "{t:.16e}");
            for col in &self.columns {
                let _ = write!(out, ",{:.16e}", col[r]);
            }
            out.push('\n');
        }
        out
    }

    /// Parses a file written by [`Self::to_csv`] (or an emitted program).
    pub fn from_csv(text: &str) -> Result<Self, WaveformParseError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(WaveformParseError { line: 1, message: "empty file".into() })?;
        let mut names = header.split(',');
        if names.next() != Some("time") {
            return Err(WaveformParseError { line: 1, message: "first column must be `time`".into() });
        }
        let names: Vec<&str> = names.collect();
        let (channels, width) = split_lane_names(&names);
        let mut set = WaveformSet::new(channels, width);
        for (i, line) in lines.enumerate() {
            let bad = |m: String| WaveformParseError { line: i + 2, message: m };
            let mut fields = line.split(',').map(|f| f.trim().parse::<f64>());
            let t = fields
                .next()
                .ok_or_else(|| bad("missing time".into()))?
                .map_err(|e| bad(e.to_string()))?;
            let values: Vec<f64> =
                fields.collect::<Result<_, _>>().map_err(|e| bad(e.to_string()))?;
            if values.len() != set.columns.len() {
                return Err(bad(format!("expected {} values, found {}", set.columns.len(), values.len())));
            }
            set.push_row(t, values);
        }
        Ok(set)
    }
}

fn split_lane_names(names: &[&str]) -> (Vec<String>, usize) {
    let parsed: Option<Vec<(&str, usize)>> = names
        .iter()
        .map(|n| {
            let open = n.rfind('[')?;
            let idx = n[open + 1..].strip_suffix(']')?.parse().ok()?;
            Some((&n[..open], idx))
        })
        .collect();
    if let Some(p) = parsed {
        let width = p.iter().take_while(|(b, _)| *b == p[0].0).count();
        let regular = width > 1
            && p.len() % width == 0
            && p.chunks(width).all(|ch| ch.iter().enumerate().all(|(s, (b, i))| *i == s && *b == ch[0].0));
        if regular {
            return (p.chunks(width).map(|ch| ch[0].0.to_string()).collect(), width);
        }
    }
    (names.iter().map(|s| s.to_string()).collect(), 1)
}
