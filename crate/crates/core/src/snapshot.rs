//! Plain-text snapshots of a coupled state.
//!
//! ```text
//! # fsisim snapshot
//! # t = 1.2500000000000000e-1
//! # nx = 32
//! # nz = 16
//! # length = 1.0000000000000000e0
//! # field sigma
//! <nz+1 rows of nx values, x fastest>
//! # field w1
//! # field w2
//! # field eta
//! <one row of nx values>
//! # field eta_t
//! ```
//!
//! Values carry 17 significant digits, so finite doubles survive a round
//! trip bit for bit. Writes go through a temporary file and a rename.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FsiError, Result};
use crate::fields::{BeamField, ScalarField, VectorField};
use crate::{CoupledState, Grid};

const FIELDS: [&str; 5] = ["sigma", "w1", "w2", "eta", "eta_t"];

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

pub fn format_snapshot(state: &CoupledState) -> String {
    let g = state.grid();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# fsisim snapshot\n# t = {:.16e}\n# nx = {}\n# nz = {}\n# length = {:.16e}",
        state.t, g.nx, g.nz, g.length
    );
    let fluid = [&state.sigma, &state.w.c1, &state.w.c2];
    for (name, f) in FIELDS.iter().zip(fluid) {
        let _ = writeln!(s, "# field {name}");
        for row in f.values.chunks(g.nx) {
            push_row(&mut s, row);
        }
    }
    for (name, f) in FIELDS[3..].iter().zip([&state.eta, &state.eta_t]) {
        let _ = writeln!(s, "# field {name}");
        push_row(&mut s, &f.values);
    }
    s
}

/// Writes atomically: `<path>.tmp` then rename.
pub fn write_snapshot(state: &CoupledState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !state.all_finite() {
        return Err(FsiError::Format {
            path: path.to_path_buf(),
            message: "refusing to write non-finite state".into(),
        });
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, format_snapshot(state)).map_err(|e| FsiError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| FsiError::io(path, e))
}

struct Reader<'a> {
    path: &'a Path,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> FsiError {
        FsiError::Format {
            path: self.path.to_path_buf(),
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.lines.next() {
                Some((i, l)) if !l.trim().is_empty() => return Ok((i + 1, l.trim())),
                Some(_) => continue,
                None => return Err(self.fail("unexpected end of file")),
            }
        }
    }

    fn header<V: std::str::FromStr>(&mut self, key: &str) -> Result<V> {
        let (n, l) = self.next_line()?;
        l.strip_prefix('#')
            .and_then(|r| r.trim().strip_prefix(key))
            .and_then(|r| r.trim().strip_prefix('='))
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| self.fail(format!("line {n}: expected `# {key} = ...`")))
    }

    fn block(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let (n, l) = self.next_line()?;
        if l.strip_prefix('#').map(str::trim) != Some(&format!("field {name}")) {
            return Err(self.fail(format!("line {n}: expected `# field {name}`")));
        }
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, l) = self.next_line()?;
            let before = out.len();
            for tok in l.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| self.fail(format!("line {n}: bad number `{tok}`")))?;
                out.push(v);
            }
            if out.len() - before != cols {
                return Err(self.fail(format!("line {n}: expected {cols} values, found {}", out.len() - before)));
            }
        }
        Ok(out)
    }
}

/// Parses snapshot text. With `expected`, the header must match that grid.
pub fn parse_snapshot(text: &str, path: &Path, expected: Option<&Grid>) -> Result<CoupledState> {
    let mut r = Reader {
        path,
        lines: text.lines().enumerate().peekable(),
    };
    let (_, first) = r.next_line()?;
    if first != "# fsisim snapshot" {
        return Err(r.fail("missing `# fsisim snapshot` header"));
    }
    let t: f64 = r.header("t")?;
    let nx: usize = r.header("nx")?;
    let nz: usize = r.header("nz")?;
    let length: f64 = r.header("length")?;
    let grid = Grid::new(nx, nz, length).map_err(|e| r.fail(e.to_string()))?;
    if let Some(want) = expected {
        if !grid.same_shape(want) || grid.length != want.length {
            return Err(FsiError::ShapeMismatch(format!(
                "snapshot grid {nx}x{nz} (L = {length}) does not match run grid {}x{} (L = {})",
                want.nx, want.nz, want.length
            )));
        }
    }
    let sigma = r.block("sigma", nz + 1, nx)?;
    let w1 = r.block("w1", nz + 1, nx)?;
    let w2 = r.block("w2", nz + 1, nx)?;
    let eta = r.block("eta", 1, nx)?;
    let eta_t = r.block("eta_t", 1, nx)?;
    if let Some((n, _)) = r.lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(r.fail(format!("line {}: trailing content", n + 1)));
    }
    Ok(CoupledState {
        sigma: ScalarField::from_values(grid, sigma)?,
        w: VectorField::new(ScalarField::from_values(grid, w1)?, ScalarField::from_values(grid, w2)?)?,
        eta: BeamField::from_values(grid, eta)?,
        eta_t: BeamField::from_values(grid, eta_t)?,
        t,
    })
}

pub fn read_snapshot(path: impl AsRef<Path>, expected: Option<&Grid>) -> Result<CoupledState> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FsiError::io(path, e))?;
    parse_snapshot(&text, path, expected)
}
