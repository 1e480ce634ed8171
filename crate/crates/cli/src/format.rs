//! Instance and solution files.
//!
//! An instance file opens with one `key=value` header line declaring the
//! lifetime semantics and, optionally, the start address:
//!
//! ```text
//! semantics=InEx,start_address=4096
//! 1,0,4,16
//! 2,2,5,8,64
//! ```
//!
//! Records are `id,start,end,size[,alignment]`, decimal integers only. Blank
//! lines and lines starting with `#` are skipped. Jobs are converted to the
//! internal exclusive semantics on ingestion and validated afterwards.
//!
//! A solution file lists `id,offset` records and closes with a
//! `makespan=<bytes>` trailer.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use memplan::{convert, validate_job, ConversionError, Job, JobId, Semantics, ValidationError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("missing `semantics=` header")]
    MissingHeader,
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: usize, id: JobId },
    #[error("line {line}: {source}")]
    Validation {
        line: usize,
        #[source]
        source: ValidationError,
    },
    #[error("line {line}: {source}")]
    Conversion {
        line: usize,
        #[source]
        source: ConversionError,
    },
    #[error("missing `makespan=` trailer")]
    MissingMakespan,
}

/// An ingested instance, jobs already expressed in exclusive semantics.
#[derive(Clone, Debug)]
pub struct ParsedInstance {
    pub jobs: Vec<Job>,
    pub declared: Semantics,
    pub start_address: u64,
}

pub fn parse_instance(path: &Path) -> Result<ParsedInstance, FormatError> {
    parse_instance_str(&std::fs::read_to_string(path)?)
}

pub fn parse_instance_str(text: &str) -> Result<ParsedInstance, FormatError> {
    parse_instance_str_with(text, None)
}

/// Like [`parse_instance_str`], but `semantics`, when given, overrides the
/// interpretation declared in the header.
pub fn parse_instance_str_with(
    text: &str,
    semantics: Option<Semantics>,
) -> Result<ParsedInstance, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(FormatError::MissingHeader)?;
    let (header_semantics, start_address) = parse_header(header_line, header)?;
    let declared = semantics.unwrap_or(header_semantics);

    let mut jobs = Vec::new();
    let mut seen: HashSet<JobId> = HashSet::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() < 4 || fields.len() > 5 {
            return Err(FormatError::MalformedLine {
                line,
                detail: format!("expected id,start,end,size[,alignment], got `{text}`"),
            });
        }
        let num = |field: &str, what: &str| -> Result<u64, FormatError> {
            field.parse().map_err(|_| FormatError::MalformedLine {
                line,
                detail: format!("{what} `{field}` is not a decimal integer"),
            })
        };
        let id = num(fields[0], "id")?;
        let start = num(fields[1], "start")?;
        let end = num(fields[2], "end")?;
        let size = num(fields[3], "size")?;
        let mut job = Job::buffer(id, size, start, end);
        if fields.len() == 5 {
            job.alignment = Some(num(fields[4], "alignment")?);
        }
        if !seen.insert(id) {
            return Err(FormatError::DuplicateId { line, id });
        }
        let converted = convert(std::slice::from_ref(&job), declared, Semantics::Ex)
            .map_err(|source| FormatError::Conversion { line, source })?
            .pop()
            .unwrap();
        validate_job(&converted).map_err(|source| FormatError::Validation { line, source })?;
        jobs.push(converted);
    }
    Ok(ParsedInstance {
        jobs,
        declared,
        start_address,
    })
}

fn parse_header(line: usize, header: &str) -> Result<(Semantics, u64), FormatError> {
    let mut semantics = None;
    let mut start_address = 0;
    for part in header.split(',').map(str::trim) {
        let Some((key, value)) = part.split_once('=') else {
            return Err(FormatError::MalformedLine {
                line,
                detail: format!("header entry `{part}` is not key=value"),
            });
        };
        match key.trim() {
            "semantics" => {
                semantics =
                    Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|e: String| FormatError::MalformedLine {
                                line,
                                detail: e,
                            })?,
                    )
            }
            "start_address" => {
                start_address = value.trim().parse().map_err(|_| FormatError::MalformedLine {
                    line,
                    detail: format!("start_address `{value}` is not a decimal integer"),
                })?
            }
            other => {
                return Err(FormatError::MalformedLine {
                    line,
                    detail: format!("unknown header key `{other}`"),
                })
            }
        }
    }
    semantics
        .map(|s| (s, start_address))
        .ok_or(FormatError::MissingHeader)
}

/// Serializes jobs (given in exclusive semantics) under `target` semantics.
pub fn write_instance(
    jobs: &[Job],
    target: Semantics,
    start_address: u64,
) -> Result<String, ConversionError> {
    let expressed = convert(jobs, Semantics::Ex, target)?;
    let mut out = String::new();
    if start_address == 0 {
        let _ = writeln!(out, "semantics={}", target.as_str());
    } else {
        let _ = writeln!(
            out,
            "semantics={},start_address={start_address}",
            target.as_str()
        );
    }
    for j in expressed {
        match j.alignment {
            Some(a) => {
                let _ = writeln!(out, "{},{},{},{},{a}", j.id, j.start, j.end, j.size);
            }
            None => {
                let _ = writeln!(out, "{},{},{},{}", j.id, j.start, j.end, j.size);
            }
        }
    }
    Ok(out)
}

/// A parsed solution file.
#[derive(Clone, Debug)]
pub struct SolutionFile {
    pub offsets: HashMap<JobId, u64>,
    pub reported_makespan: u64,
}

pub fn parse_solution(path: &Path) -> Result<SolutionFile, FormatError> {
    parse_solution_str(&std::fs::read_to_string(path)?)
}

pub fn parse_solution_str(text: &str) -> Result<SolutionFile, FormatError> {
    let mut offsets = HashMap::new();
    let mut makespan = None;
    for (line, text) in text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    {
        if let Some(value) = text.strip_prefix("makespan=") {
            makespan = Some(value.trim().parse().map_err(|_| FormatError::MalformedLine {
                line,
                detail: format!("makespan `{value}` is not a decimal integer"),
            })?);
            continue;
        }
        let Some((id, offset)) = text.split_once(',') else {
            return Err(FormatError::MalformedLine {
                line,
                detail: format!("expected id,offset, got `{text}`"),
            });
        };
        let id: JobId = id.trim().parse().map_err(|_| FormatError::MalformedLine {
            line,
            detail: format!("id `{id}` is not a decimal integer"),
        })?;
        let offset: u64 = offset
            .trim()
            .parse()
            .map_err(|_| FormatError::MalformedLine {
                line,
                detail: format!("offset `{offset}` is not a decimal integer"),
            })?;
        if offsets.insert(id, offset).is_some() {
            return Err(FormatError::DuplicateId { line, id });
        }
    }
    Ok(SolutionFile {
        offsets,
        reported_makespan: makespan.ok_or(FormatError::MissingMakespan)?,
    })
}

pub fn write_solution(offsets: &HashMap<JobId, u64>, makespan: u64) -> String {
    let mut ids: Vec<JobId> = offsets.keys().copied().collect();
    ids.sort_unstable();
    let mut out = String::new();
    for id in ids {
        let _ = writeln!(out, "{id},{}", offsets[&id]);
    }
    let _ = writeln!(out, "makespan={makespan}");
    out
}
