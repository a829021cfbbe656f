//! Paired (x, y) datasets as TSV.
//!
//! ```text
//! # starsic dataset v1
//! seq	idx	radius_idx	phase_idx	x_re	x_im	y_re	y_im
//! 0	0	3	17	0.0012	-0.0004	0.0013	-0.0005
//! ```
//!
//! One row per symbol, sequences contiguous and in order. Floats are written
//! in shortest round-trip form, so reading back is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::constellation::SymbolSequence;
use crate::error::{Error, Result};

pub const MAGIC: &str = "# starsic dataset v1";
pub const HEADER: &str = "seq\tidx\tradius_idx\tphase_idx\tx_re\tx_im\ty_re\ty_im";

/// One transmitted sequence and its channel output.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSequence {
    pub x: SymbolSequence,
    pub y: Vec<Complex64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<DatasetSequence>,
}

impl Dataset {
    /// `(x, y)` slices in the form taken by the channel fits.
    pub fn pairs(&self) -> Vec<(&[Complex64], &[Complex64])> {
        self.sequences
            .iter()
            .map(|s| (s.x.values.as_slice(), s.y.as_slice()))
            .collect()
    }

    pub fn n_symbols(&self) -> usize {
        self.sequences.iter().map(|s| s.y.len()).sum()
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "{HEADER}")?;
        for (s, seq) in self.sequences.iter().enumerate() {
            if seq.x.len() != seq.y.len() {
                return Err(Error::invalid(format!("sequence {s}: x and y lengths differ")));
            }
            for i in 0..seq.y.len() {
                let (x, y) = (seq.x.values[i], seq.y[i]);
                writeln!(
                    out,
                    "{s}\t{i}\t{}\t{}\t{}\t{}\t{}\t{}",
                    seq.x.radius_idx[i], seq.x.phase_idx[i], x.re, x.im, y.re, y.im
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?), path)
    }

    /// Parses a dataset; `path` is used only in diagnostics.
    pub fn read<R: BufRead>(input: R, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Dataset {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = input.lines().enumerate();
        let expect = |want: &str, lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| {
            match lines.next() {
                Some((k, l)) if l.as_deref().map(str::trim_end).ok() == Some(want) => Ok(k),
                Some((k, _)) => Err(err(k + 1, format!("expected `{want}`"))),
                None => Err(err(1, "empty file".into())),
            }
        };
        expect(MAGIC, &mut lines)?;
        expect(HEADER, &mut lines)?;

        let mut data = Dataset::default();
        for (k, line) in lines {
            let line = line?;
            let lineno = k + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 8 {
                return Err(err(lineno, format!("expected 8 fields, found {}", fields.len())));
            }
            let int = |j: usize| -> Result<usize> {
                fields[j]
                    .parse()
                    .map_err(|_| err(lineno, format!("field {} is not an index: `{}`", j + 1, fields[j])))
            };
            let float = |j: usize| -> Result<f64> {
                let v: f64 = fields[j]
                    .parse()
                    .map_err(|_| err(lineno, format!("field {} is not a number: `{}`", j + 1, fields[j])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(lineno, format!("field {} is not finite", j + 1)))
                }
            };
            let (seq, idx) = (int(0)?, int(1)?);
            if seq == data.sequences.len() {
                data.sequences.push(DatasetSequence {
                    x: SymbolSequence {
                        radius_idx: Vec::new(),
                        phase_idx: Vec::new(),
                        values: Vec::new(),
                    },
                    y: Vec::new(),
                });
            } else if seq + 1 != data.sequences.len() {
                return Err(err(lineno, format!("sequence {seq} out of order")));
            }
            let cur = data.sequences.last_mut().expect("pushed above");
            if idx != cur.y.len() {
                return Err(err(lineno, format!("symbol index {idx} out of order")));
            }
            cur.x.radius_idx.push(int(2)?);
            cur.x.phase_idx.push(int(3)?);
            cur.x.values.push(Complex64::new(float(4)?, float(5)?));
            cur.y.push(Complex64::new(float(6)?, float(7)?));
        }
        Ok(data)
    }
}
