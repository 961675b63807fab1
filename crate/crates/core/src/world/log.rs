//! Replayable observation log: a header line followed by one JSON record per
//! timestamp.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Observation;
use crate::Error;

pub const OBSERVATION_LOG_VERSION: u32 = 1;
const FORMAT: &str = "langworld-observations";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    site: String,
}

pub fn write_observation_log<W: Write>(
    mut out: W,
    site: &str,
    observations: &[Observation],
) -> Result<(), Error> {
    let header = Header {
        format: FORMAT.to_string(),
        version: OBSERVATION_LOG_VERSION,
        site: site.to_string(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(json_err)?)?;
    for o in observations {
        writeln!(out, "{}", serde_json::to_string(o).map_err(json_err)?)?;
    }
    Ok(())
}

/// Returns the site name and the observations, in file order.
pub fn read_observation_log<R: BufRead>(input: R) -> Result<(String, Vec<Observation>), Error> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Format {
        what: "observation log",
        message: "missing header line".into(),
    })??;
    let header: Header = serde_json::from_str(&first).map_err(json_err)?;
    if header.format != FORMAT {
        return Err(Error::Format {
            what: "observation log",
            message: format!("unexpected format tag {:?}", header.format),
        });
    }
    if header.version != OBSERVATION_LOG_VERSION {
        return Err(Error::UnsupportedSchema {
            what: "observation log",
            found: header.version,
            expected: OBSERVATION_LOG_VERSION,
        });
    }
    let mut observations = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        observations.push(serde_json::from_str(&line).map_err(json_err)?);
    }
    Ok((header.site, observations))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format {
        what: "observation log",
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::world::{simulate, ClassifierRegistry};

    #[test]
    fn log_replays_exactly() {
        let spec = fixtures::site2();
        let obs = simulate(&spec, &ClassifierRegistry::default()).unwrap();
        let mut buf = Vec::new();
        write_observation_log(&mut buf, &spec.name, &obs).unwrap();
        let (site, back) = read_observation_log(buf.as_slice()).unwrap();
        assert_eq!(site, "site2");
        assert_eq!(back, obs);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = "{\"format\":\"langworld-observations\",\"version\":9,\"site\":\"x\"}\n";
        assert!(matches!(
            read_observation_log(text.as_bytes()),
            Err(Error::UnsupportedSchema { found: 9, .. })
        ));
    }
}
