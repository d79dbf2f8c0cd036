//! Request streams as CSV: `day,id,ox,oy,dx,dy,t,wtp`, one row per
//! customer, `t` in clock minutes.

use std::path::Path;

use anyhow::{bail, Context};
use mms_core::{Point, Request};

const HEADER: [&str; 8] = ["day", "id", "ox", "oy", "dx", "dy", "t", "wtp"];

/// Writes `days[d - 1]` as the requests of day `d`.
pub fn write(path: &Path, days: &[Vec<Request>]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(HEADER)?;
    for (d, requests) in days.iter().enumerate() {
        for r in requests {
            w.write_record([
                (d + 1).to_string(),
                r.id.to_string(),
                r.origin.x.to_string(),
                r.origin.y.to_string(),
                r.destination.x.to_string(),
                r.destination.y.to_string(),
                r.desired_pickup.to_string(),
                r.wtp.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a request file. Days must run from 1 without gaps; rows of a day
/// are sorted by pickup time.
pub fn read(path: &Path) -> anyhow::Result<Vec<Vec<Request>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(HEADER) {
        bail!("{}: line 1: expected header {}", path.display(), HEADER.join(","));
    }
    let mut days: Vec<Vec<Request>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("{}: line {line}", path.display()))?;
        let field = |k: usize| -> anyhow::Result<&str> { rec.get(k).with_context(|| format!("{}: line {line}: missing {}", path.display(), HEADER[k])) };
        let real = |k: usize| -> anyhow::Result<f64> {
            let v = field(k)?;
            v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).with_context(|| format!("{}: line {line}: bad {} {v:?}", path.display(), HEADER[k]))
        };
        let day: usize = field(0)?.trim().parse().with_context(|| format!("{}: line {line}: bad day", path.display()))?;
        let id: usize = field(1)?.trim().parse().with_context(|| format!("{}: line {line}: bad id", path.display()))?;
        if day == 0 {
            bail!("{}: line {line}: days start at 1", path.display());
        }
        if days.len() < day {
            days.resize(day, Vec::new());
        }
        days[day - 1].push(Request {
            id,
            origin: Point::new(real(2)?, real(3)?),
            destination: Point::new(real(4)?, real(5)?),
            desired_pickup: real(6)?,
            wtp: real(7)?,
        });
    }
    if let Some(d) = days.iter().position(Vec::is_empty) {
        bail!("{}: day {} has no requests", path.display(), d + 1);
    }
    for day in &mut days {
        day.sort_by(|a, b| a.desired_pickup.total_cmp(&b.desired_pickup));
    }
    Ok(days)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mms_core::sim::day_requests;
    use mms_core::{Network, Scenario};

    fn temp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("mms-requests-{}-{name}.csv", std::process::id()))
    }

    #[test]
    fn round_trip_is_exact() {
        let mut s = Scenario { lambda_per_hour: 40.0, ..Default::default() };
        s.wtp.sigma = 1.0;
        let net = Network::build(&s.network).unwrap();
        let days: Vec<_> = (1..=2).map(|d| day_requests(&s, &net, d).unwrap()).collect();
        let path = temp("rt");
        write(&path, &days).unwrap();
        assert_eq!(read(&path).unwrap(), days);
    }

    #[test]
    fn errors_name_the_line() {
        let path = temp("bad");
        std::fs::write(&path, "day,id,ox,oy,dx,dy,t,wtp\n1,0,1,1,2,2,430,3\n1,1,1,x,2,2,431,3\n").unwrap();
        let err = format!("{:#}", read(&path).unwrap_err());
        assert!(err.contains("line 3"), "{err}");

        std::fs::write(&path, "day,id,ox,oy,dx,dy,t,wtp\n2,0,1,1,2,2,430,3\n").unwrap();
        assert!(format!("{:#}", read(&path).unwrap_err()).contains("day 1"));

        std::fs::write(&path, "id,day\n").unwrap();
        assert!(format!("{:#}", read(&path).unwrap_err()).contains("line 1"));
    }
}
