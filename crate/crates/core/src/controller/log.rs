//! Command log in CSV form: `cycle,kind,channel,rank,bankgroup,bank,row,column,mode`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::address::DramCoord;
use crate::dram::{CommandKind, DramCommand, RowMode};

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("command log record {record}: {msg}")]
    Record { record: usize, msg: String },
}

const HEADER: [&str; 9] = ["cycle", "kind", "channel", "rank", "bankgroup", "bank", "row", "column", "mode"];

pub fn write_command_log<W: Write>(out: W, cmds: &[DramCommand]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for c in cmds {
        w.write_record([
            c.issue_cycle.to_string(),
            c.kind.as_str().to_string(),
            c.coord.channel.to_string(),
            c.coord.rank.to_string(),
            c.coord.bankgroup.to_string(),
            c.coord.bank.to_string(),
            c.coord.row.to_string(),
            c.coord.column.to_string(),
            c.mode.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_command_log<R: Read>(input: R) -> Result<Vec<DramCommand>, LogError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| LogError::Record { record: i + 1, msg };
        if rec.len() != HEADER.len() {
            return Err(bad(format!("expected {} fields, got {}", HEADER.len(), rec.len())));
        }
        let num = |k: usize| -> Result<u64, LogError> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad {} `{}`", HEADER[k], &rec[k])))
        };
        let kind = CommandKind::parse(rec[1].trim()).ok_or_else(|| bad(format!("bad kind `{}`", &rec[1])))?;
        let mode = RowMode::parse(rec[8].trim()).ok_or_else(|| bad(format!("bad mode `{}`", &rec[8])))?;
        let coord = DramCoord {
            channel: num(2)? as u32,
            rank: num(3)? as u32,
            bankgroup: num(4)? as u32,
            bank: num(5)? as u32,
            row: num(6)? as u32,
            column: num(7)? as u32,
            byte: 0,
        };
        let mut cmd = DramCommand::new(kind, coord, mode);
        cmd.issue_cycle = num(0)?;
        out.push(cmd);
    }
    Ok(out)
}
