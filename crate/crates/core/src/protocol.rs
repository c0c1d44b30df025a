//! Experiment protocols: line-based instruction lists run by the engine.
//!
//! ```text
//! CHAMBER,wt,standard
//! SEED,42            # optional, must come first
//! SET,load_in,0.5
//! WAIT,2000          # milliseconds
//! MSR,100,7          # 100 rows at 7 Hz
//! ```

use std::fmt;

use thiserror::Error;

use crate::variables::{Chamber, Config};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ProtocolError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Seed(u64),
    Set { variable: String, value: f64 },
    Wait { ms: u64 },
    Msr { count: u64, hz: f64 },
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Seed(s) => write!(f, "SEED,{s}"),
            Instruction::Set { variable, value } => write!(f, "SET,{variable},{value}"),
            Instruction::Wait { ms } => write!(f, "WAIT,{ms}"),
            Instruction::Msr { count, hz } => write!(f, "MSR,{count},{hz}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub config: Config,
    pub instructions: Vec<Instruction>,
}

impl Protocol {
    pub fn new(config: Config) -> Self {
        Protocol { config, instructions: Vec::new() }
    }

    pub fn chamber(&self) -> Chamber {
        self.config.chamber()
    }

    pub fn seed(&self) -> Option<u64> {
        match self.instructions.first() {
            Some(Instruction::Seed(s)) => Some(*s),
            _ => None,
        }
    }

    /// Total number of rows the protocol emits.
    pub fn row_count(&self) -> u64 {
        self.instructions
            .iter()
            .map(|i| if let Instruction::Msr { count, .. } = i { *count } else { 0 })
            .sum()
    }

    pub fn set(mut self, variable: &str, value: f64) -> Self {
        self.instructions.push(Instruction::Set { variable: variable.to_string(), value });
        self
    }

    pub fn wait(mut self, ms: u64) -> Self {
        self.instructions.push(Instruction::Wait { ms });
        self
    }

    pub fn msr(mut self, count: u64, hz: f64) -> Self {
        self.instructions.push(Instruction::Msr { count, hz });
        self
    }

    /// Check every instruction; errors report the instruction's line in the
    /// serialized form (header is line 1).
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.instructions.is_empty() {
            return Err(ProtocolError { line: 1, message: "protocol has no instructions".into() });
        }
        for (i, ins) in self.instructions.iter().enumerate() {
            check_instruction(self.config, ins, i == 0)
                .map_err(|message| ProtocolError { line: i + 2, message })?;
        }
        Ok(())
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CHAMBER,{},{}", self.chamber().code(), self.config.short_name())?;
        for ins in &self.instructions {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

fn check_instruction(config: Config, ins: &Instruction, first: bool) -> Result<(), String> {
    match ins {
        Instruction::Seed(_) if !first => Err("SEED must be the first instruction".into()),
        Instruction::Seed(_) => Ok(()),
        Instruction::Set { variable, value } => config
            .variable(variable)
            .and_then(|v| v.check_settable(*value))
            .map_err(|e| e.to_string()),
        Instruction::Wait { .. } => Ok(()),
        Instruction::Msr { count, hz } => {
            if *count == 0 {
                return Err("MSR count must be at least 1".into());
            }
            let max = config.chamber().max_rate_hz();
            if !(*hz > 0.0) || !hz.is_finite() {
                Err(format!("frequency {hz} must be positive"))
            } else if *hz > max {
                Err(format!("frequency {hz} exceeds {max} Hz limit"))
            } else {
                Ok(())
            }
        }
    }
}

fn number<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, String> {
    field.trim().parse().map_err(|_| format!("malformed {what} '{}'", field.trim()))
}

fn parse_instruction(fields: &[&str]) -> Result<Instruction, String> {
    let arity = |n: usize| {
        if fields.len() == n {
            Ok(())
        } else {
            Err(format!("{} takes {} field(s), got {}", fields[0], n - 1, fields.len() - 1))
        }
    };
    match fields[0] {
        "SEED" => {
            arity(2)?;
            Ok(Instruction::Seed(number(fields[1], "seed")?))
        }
        "SET" => {
            arity(3)?;
            let value: f64 = number(fields[2], "number")?;
            if !value.is_finite() {
                return Err(format!("malformed number '{}'", fields[2].trim()));
            }
            Ok(Instruction::Set { variable: fields[1].trim().to_string(), value })
        }
        "WAIT" => {
            arity(2)?;
            Ok(Instruction::Wait { ms: number(fields[1], "duration (integer milliseconds)")? })
        }
        "MSR" => {
            arity(3)?;
            Ok(Instruction::Msr {
                count: number(fields[1], "row count")?,
                hz: number(fields[2], "frequency")?,
            })
        }
        other => Err(format!("unknown instruction '{other}'")),
    }
}

pub fn parse_protocol(text: &str) -> Result<Protocol, ProtocolError> {
    let mut config = None;
    let mut instructions = Vec::new();
    let mut last_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        let err = |message: String| ProtocolError { line, message };
        let Some(cfg) = config else {
            if fields[0] != "CHAMBER" || fields.len() != 3 {
                return Err(err("expected header CHAMBER,<lt|wt>,<configuration>".into()));
            }
            let chamber: Chamber = fields[1].parse().map_err(|e: crate::variables::VariableError| err(e.to_string()))?;
            config = Some(Config::from_parts(chamber, fields[2]).map_err(|e| err(e.to_string()))?);
            continue;
        };
        let ins = parse_instruction(&fields).map_err(err)?;
        check_instruction(cfg, &ins, instructions.is_empty()).map_err(err)?;
        instructions.push(ins);
    }
    let Some(config) = config else {
        return Err(ProtocolError { line: 1, message: "missing CHAMBER header".into() });
    };
    if instructions.is_empty() {
        return Err(ProtocolError { line: last_line, message: "protocol has no instructions".into() });
    }
    Ok(Protocol { config, instructions })
}

pub fn serialize_protocol(p: &Protocol) -> String {
    p.to_string()
}
