//! CSV artifacts, each preceded by `# key=value` lines echoing the config.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// Writes `# key=value` lines and then `rows` as CSV with a header.
pub fn write_csv<W: Write, T: Serialize>(mut out: W, config: &[(String, String)], rows: &[T]) -> std::io::Result<()> {
    for (k, v) in config {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}

pub fn write_csv_file<T: Serialize>(path: &Path, config: &[(String, String)], rows: &[T]) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(f), config, rows)
}

/// Config echoed at the top of a CSV artifact.
pub fn read_config_echo(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: usize,
        b: f64,
    }

    #[test]
    fn config_echo_round_trips() {
        let cfg = vec![("seed".to_string(), "3".to_string()), ("env.t_cost".to_string(), "2".to_string())];
        let mut buf = Vec::new();
        write_csv(&mut buf, &cfg, &[Row { a: 1, b: 0.5 }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_config_echo(&text), cfg);
        assert!(text.ends_with("a,b\n1,0.5\n"));
    }
}
