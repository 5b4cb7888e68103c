use std::io::{self, Write};

/// Writes `t,observable1,...` CSV rows.
pub struct TrajectoryWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, observables: &[&str]) -> io::Result<Self> {
        write!(out, "t")?;
        for name in observables {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        Ok(Self {
            out,
            columns: observables.len(),
        })
    }

    pub fn row(&mut self, t: f64, values: &[f64]) -> io::Result<()> {
        assert_eq!(values.len(), self.columns, "row has the wrong number of observables");
        write!(self.out, "{t}")?;
        for v in values {
            write!(self.out, ",{v}")?;
        }
        writeln!(self.out)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut w = TrajectoryWriter::new(Vec::new(), &["p_out", "norm"]).unwrap();
        w.row(0.0, &[0.0, 1.0]).unwrap();
        w.row(0.5, &[0.25, 1.0]).unwrap();
        assert_eq!(
            String::from_utf8(w.into_inner()).unwrap(),
            "t,p_out,norm\n0,0,1\n0.5,0.25,1\n"
        );
    }
}
