//! CSV helpers shared by the experiment drivers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Schema version written as the first (comment) line of every CSV file.
pub const CSV_SCHEMA: &str = "lahmesh-csv v1";

/// Shortest round-trip form is not used on purpose: every value carries 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Opens `path` and writes the `# <schema> <kind>` comment line.
pub fn csv_writer(path: &Path, kind: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# {CSV_SCHEMA} {kind}")?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_f64(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.5e-300).parse::<f64>().unwrap(), -2.5e-300);
    }
}
