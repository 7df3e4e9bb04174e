use super::{waypoint_lines, CaptureError, DemonstrationRecord, RecordHeader, RecordWire, WaypointLine};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const RECORD_VERSION: u32 = 1;

/// Header line followed by one line per waypoint.
pub fn write_record<W: Write>(record: &DemonstrationRecord, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, &RecordHeader::from(record))?;
    out.write_all(b"\n")?;
    for line in waypoint_lines(record) {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_record<R: BufRead>(input: R) -> Result<DemonstrationRecord, CaptureError> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let io = |e: std::io::Error| CaptureError::SchemaViolation(format!("read failed: {e}"));
    let (_, first) = lines.next().ok_or_else(|| CaptureError::SchemaViolation("empty file".into()))?;
    let first = first.map_err(io)?;
    let header: RecordHeader = serde_json::from_str(&first)
        .map_err(|e| CaptureError::SchemaViolation(format!("line 1: missing or malformed header: {e}")))?;
    let mut body = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(io)?;
        let wp: WaypointLine = serde_json::from_str(&line)
            .map_err(|e| CaptureError::SchemaViolation(format!("line {}: {e}", i + 1)))?;
        body.push(wp);
    }
    RecordWire::assemble(header, body)
}

pub fn save_record(record: &DemonstrationRecord, path: &Path) -> Result<(), CaptureError> {
    let wrap = |source| CaptureError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(wrap)?;
    write_record(record, BufWriter::new(file)).map_err(wrap)
}

pub fn load_record(path: &Path) -> Result<DemonstrationRecord, CaptureError> {
    let file = File::open(path).map_err(|source| CaptureError::Io { path: path.to_path_buf(), source })?;
    read_record(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{DemoType, Trajectory};

    pub(crate) fn sample_record(n: usize, dof: usize) -> DemonstrationRecord {
        let configs: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..dof).map(|j| (k as f64 * 0.37 + j as f64).sin() / 3.0).collect())
            .collect();
        let trajectory = Trajectory::uniform(configs).unwrap();
        let torques = crate::capture::estimate_torques(&trajectory, &vec![0.3; dof], 1.7).unwrap();
        DemonstrationRecord {
            trajectory,
            torques,
            demo_type: DemoType::Correction,
            robot_name: "ur5e".into(),
            scene_id: "scene".into(),
            started_at: 1.7e9,
            sample_interval: 0.05,
            raw_duration: 1.7,
            joint_names: (0..dof).map(|j| format!("j{j}")).collect(),
            request_id: Some("req-1".into()),
        }
    }

    #[test]
    fn round_trip_exact() {
        let rec = sample_record(3, 2);
        let mut buf = Vec::new();
        write_record(&rec, &mut buf).unwrap();
        assert_eq!(read_record(buf.as_slice()).unwrap(), rec);
    }

    #[test]
    fn line_count() {
        let rec = sample_record(200, 6);
        let mut buf = Vec::new();
        write_record(&rec, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 201);
    }

    #[test]
    fn missing_header() {
        let rec = sample_record(3, 2);
        let mut buf = Vec::new();
        write_record(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let headless: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_record(headless.as_bytes()), Err(CaptureError::SchemaViolation(_))));
        assert!(matches!(read_record(&b""[..]), Err(CaptureError::SchemaViolation(_))));
    }

    #[test]
    fn inconsistent_width() {
        let rec = sample_record(3, 2);
        let mut buf = Vec::new();
        write_record(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\"tau\":[", "\"tau\":[0.0,", 1);
        assert!(matches!(read_record(text.as_bytes()), Err(CaptureError::SchemaViolation(_))));
    }

    #[test]
    fn single_document_json_round_trip() {
        let rec = sample_record(5, 3);
        let back: DemonstrationRecord = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(back, rec);
    }
}
