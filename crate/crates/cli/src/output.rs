//! CSV emission. Every file starts with a `# config_hash=<sha256>` line
//! followed by a header row.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use crate::error::CliResult;
use crate::settings::Settings;

pub fn write_csv<S: AsRef<str>>(path: &Path, settings: &Settings, header: &[&str], rows: &[Vec<S>]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut file = File::create(path)?;
    writeln!(file, "# config_hash={}", settings.hash())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip text for a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_line_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.csv");
        let s = Settings::resolve("t", &[("a", "1")], None, &[]).unwrap();
        write_csv(&path, &s, &["k", "v"], &[vec!["1".to_string(), num(0.5)], vec!["x,y".into(), num(1e-20)]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# config_hash={}", s.hash()));
        assert_eq!(lines[1], "k,v");
        assert_eq!(lines[2], "1,0.5");
        assert_eq!(lines[3], "\"x,y\",0.00000000000000000001");
    }
}
