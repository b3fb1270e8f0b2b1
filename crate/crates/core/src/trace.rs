//! Recorded trajectories and their CSV form.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trajectory: losses `L_0..L_T`, steps `eta_1..eta_T`, and the noise
/// `U_1..U_T` of the recursion when the producer can decompose it.
///
/// `aux` holds additional per-step channels (martingale parts and similar);
/// their names live in `meta` under `aux1`, `aux2`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    losses: Vec<f64>,
    steps: Vec<f64>,
    noise: Option<Vec<f64>>,
    aux: Vec<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
}

impl Trace {
    pub fn new(losses: Vec<f64>, steps: Vec<f64>, noise: Option<Vec<f64>>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::structure("trace needs at least L_0"));
        }
        if steps.len() + 1 != losses.len() {
            return Err(Error::structure(format!(
                "{} losses but {} steps (expected one fewer step than losses)",
                losses.len(),
                steps.len()
            )));
        }
        if let Some(n) = &noise {
            if n.len() != steps.len() {
                return Err(Error::structure(format!(
                    "{} noise values for {} steps",
                    n.len(),
                    steps.len()
                )));
            }
        }
        if let Some((t, l)) = losses
            .iter()
            .enumerate()
            .find(|(_, l)| !(**l >= 0.0) || !l.is_finite())
        {
            return Err(Error::structure(format!(
                "loss L_{t} = {l} is not a finite nonnegative value"
            )));
        }
        if let Some((i, e)) = steps
            .iter()
            .enumerate()
            .find(|(_, e)| !(**e > 0.0 && **e < 1.0))
        {
            return Err(Error::structure(format!(
                "step eta_{} = {e} is not in (0, 1)",
                i + 1
            )));
        }
        Ok(Trace {
            losses,
            steps,
            noise,
            aux: Vec::new(),
            meta: BTreeMap::new(),
        })
    }

    /// Attaches a named per-step channel; it becomes column `aux{k}`.
    pub fn with_aux(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.steps.len() {
            return Err(Error::structure(format!(
                "aux channel `{name}` has {} values for {} steps",
                values.len(),
                self.steps.len()
            )));
        }
        self.aux.push(values);
        self.meta
            .insert(format!("aux{}", self.aux.len()), name.to_string());
        Ok(self)
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn noise(&self) -> Option<&[f64]> {
        self.noise.as_deref()
    }

    /// Number of iterations `T`.
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn aux(&self, name: &str) -> Option<&[f64]> {
        (1..=self.aux.len())
            .find(|k| self.meta.get(&format!("aux{k}")).map(String::as_str) == Some(name))
            .map(|k| self.aux[k - 1].as_slice())
    }

    pub fn aux_channels(&self) -> &[Vec<f64>] {
        &self.aux
    }

    /// Writes `t,loss,step,noise[,aux1,...]`. Row `t = 0` leaves the
    /// per-step columns empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t,loss,step");
        if self.noise.is_some() {
            header.push_str(",noise");
        }
        for k in 1..=self.aux.len() {
            header.push_str(&format!(",aux{k}"));
        }
        writeln!(w, "{header}")?;
        let extra = usize::from(self.noise.is_some()) + self.aux.len();
        writeln!(w, "0,{}{}", fmt_f64(self.losses[0]), ",".repeat(extra + 1))?;
        for t in 1..self.losses.len() {
            let mut row = format!(
                "{t},{},{}",
                fmt_f64(self.losses[t]),
                fmt_f64(self.steps[t - 1])
            );
            if let Some(n) = &self.noise {
                row.push(',');
                row.push_str(&fmt_f64(n[t - 1]));
            }
            for ch in &self.aux {
                row.push(',');
                row.push_str(&fmt_f64(ch[t - 1]));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// Parses the format produced by [`Trace::write_csv`]. Aux channel
    /// names are not stored in the CSV and come back as `aux1`, `aux2`, ...
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::structure("empty trace CSV"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[0] != "t" || cols[1] != "loss" || cols[2] != "step" {
            return Err(Error::structure(format!(
                "unexpected trace header `{header}`"
            )));
        }
        let has_noise = cols.get(3) == Some(&"noise");
        let n_aux = cols.len() - 3 - usize::from(has_noise);

        let mut losses = Vec::new();
        let mut steps = Vec::new();
        let mut noise = Vec::new();
        let mut aux = vec![Vec::new(); n_aux];
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::structure(format!(
                    "row {} has {} fields, header has {}",
                    row + 1,
                    fields.len(),
                    cols.len()
                )));
            }
            let t: usize = fields[0].parse().map_err(|_| {
                Error::structure(format!("bad index `{}` on row {}", fields[0], row + 1))
            })?;
            if t != losses.len() {
                return Err(Error::structure(format!(
                    "row {} has t={t}, expected {}",
                    row + 1,
                    losses.len()
                )));
            }
            losses.push(parse_f64(fields[1], row)?);
            if t > 0 {
                steps.push(parse_f64(fields[2], row)?);
                let mut k = 3;
                if has_noise {
                    noise.push(parse_f64(fields[3], row)?);
                    k = 4;
                }
                for (j, ch) in aux.iter_mut().enumerate() {
                    ch.push(parse_f64(fields[k + j], row)?);
                }
            }
        }
        let mut trace = Trace::new(losses, steps, has_noise.then_some(noise))?;
        for (j, ch) in aux.into_iter().enumerate() {
            trace = trace.with_aux(&format!("aux{}", j + 1), ch)?;
        }
        Ok(trace)
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::structure(format!("bad number `{s}` on row {}", row + 1)))
}
