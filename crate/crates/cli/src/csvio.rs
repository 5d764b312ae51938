//! Reading period relations from CSV files and writing results back.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use periodk::dsl::parse_number;
use periodk::relation::{Attribute, DataType, PeriodRow, Rational, Schema, SqlPeriodRelation, Tuple, Value};
use periodk::telement::{Interval, Tick, TimeDomain};
use periodk::{Error, Result};

/// Where a relation comes from: `name=path:begin,end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableBinding {
    pub name: String,
    pub path: PathBuf,
    pub begin: String,
    pub end: String,
    /// Declared column types; other columns are inferred.
    pub types: BTreeMap<String, DataType>,
}

impl FromStr for TableBinding {
    type Err = String;

    /// `name=path:begin,end`, or `name=path` for columns `t_begin,t_end`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, rest) = s
            .split_once('=')
            .ok_or_else(|| format!("expected name=path:begin,end, got `{s}`"))?;
        if name.is_empty() {
            return Err(format!("missing relation name in `{s}`"));
        }
        let (path, begin, end) = match rest.rsplit_once(':') {
            Some((path, cols)) if cols.contains(',') => {
                let (b, e) = cols.split_once(',').expect("checked");
                (path, b.to_owned(), e.to_owned())
            }
            _ => (rest, "t_begin".to_owned(), "t_end".to_owned()),
        };
        if path.is_empty() || begin.is_empty() || end.is_empty() {
            return Err(format!("expected name=path:begin,end, got `{s}`"));
        }
        Ok(TableBinding {
            name: name.to_owned(),
            path: PathBuf::from(path),
            begin,
            end,
            types: BTreeMap::new(),
        })
    }
}

/// Parses `name=col:type,col:type`.
pub fn parse_types(s: &str) -> std::result::Result<(String, BTreeMap<String, DataType>), String> {
    let (name, cols) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=col:type,..., got `{s}`"))?;
    let mut types = BTreeMap::new();
    for part in cols.split(',').filter(|p| !p.is_empty()) {
        let (col, ty) = part
            .split_once(':')
            .ok_or_else(|| format!("expected col:type, got `{part}`"))?;
        let ty = ty.parse::<DataType>().map_err(|e| e.to_string())?;
        types.insert(col.to_owned(), ty);
    }
    Ok((name.to_owned(), types))
}

/// A CSV file read into memory, not yet typed.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub binding: TableBinding,
    pub header: Vec<String>,
    /// Line number and fields of every data row.
    pub records: Vec<(usize, Vec<String>)>,
    begin_idx: usize,
    end_idx: usize,
}

fn csv_error(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        row,
        msg: msg.into(),
    }
}

pub fn read_table(binding: &TableBinding) -> Result<RawTable> {
    let file = std::fs::File::open(&binding.path).map_err(|e| csv_error(&binding.path, 0, e.to_string()))?;
    read_table_from(binding, file)
}

pub fn read_table_from(binding: &TableBinding, input: impl std::io::Read) -> Result<RawTable> {
    let path = &binding.path;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let find = |col: &str| {
        header
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| csv_error(path, 1, format!("missing column `{col}`")))
    };
    let begin_idx = find(&binding.begin)?;
    let end_idx = find(&binding.end)?;
    for col in binding.types.keys() {
        find(col)?;
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            csv_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        records.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(RawTable {
        binding: binding.clone(),
        header,
        records,
        begin_idx,
        end_idx,
    })
}

fn parse_value(s: &str, ty: DataType) -> Option<Value> {
    if s.is_empty() {
        return Some(Value::Null);
    }
    match ty {
        DataType::Str => Some(Value::str(s)),
        DataType::Int => s.trim().parse().ok().map(Value::Int),
        DataType::Rational => match parse_number(s.trim())? {
            Value::Int(i) => Some(Value::Rat(Rational::from_integer(i128::from(i)))),
            v => Some(v),
        },
    }
}

impl RawTable {
    fn data_columns(&self) -> impl Iterator<Item = (usize, &str)> {
        self.header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.begin_idx && *i != self.end_idx)
            .map(|(i, h)| (i, h.as_str()))
    }

    fn ticks(&self, line: usize, fields: &[String]) -> Result<(Tick, Tick)> {
        let path = &self.binding.path;
        let tick = |idx: usize, col: &str| {
            let s = fields[idx].trim();
            s.parse::<Tick>()
                .map_err(|_| csv_error(path, line, format!("`{col}` value `{s}` is not an integer tick")))
        };
        Ok((tick(self.begin_idx, &self.binding.begin)?, tick(self.end_idx, &self.binding.end)?))
    }

    /// Smallest begin and largest end over all rows.
    pub fn tick_range(&self) -> Result<Option<(Tick, Tick)>> {
        let mut range: Option<(Tick, Tick)> = None;
        for (line, fields) in &self.records {
            let (b, e) = self.ticks(*line, fields)?;
            range = Some(match range {
                None => (b, e),
                Some((lo, hi)) => (lo.min(b), hi.max(e)),
            });
        }
        Ok(range)
    }

    /// Declared types, otherwise the narrowest of int, rational and str that
    /// fits every non-empty value.
    pub fn schema(&self) -> Result<Schema> {
        let attrs = self
            .data_columns()
            .map(|(i, name)| {
                let ty = self.binding.types.get(name).copied().unwrap_or_else(|| {
                    let values = || self.records.iter().map(|(_, f)| f[i].as_str()).filter(|s| !s.is_empty());
                    if values().all(|s| parse_value(s, DataType::Int).is_some()) {
                        DataType::Int
                    } else if values().all(|s| parse_value(s, DataType::Rational).is_some()) {
                        DataType::Rational
                    } else {
                        DataType::Str
                    }
                });
                Attribute::new(name, ty)
            })
            .collect();
        Schema::new(attrs)
    }

    /// Typed rows; identical rows accumulate multiplicity.
    pub fn into_relation(&self, domain: TimeDomain) -> Result<SqlPeriodRelation> {
        let schema = self.schema()?;
        let path = &self.binding.path;
        let columns: Vec<usize> = self.data_columns().map(|(i, _)| i).collect();
        let mut rows = Vec::with_capacity(self.records.len());
        for (line, fields) in &self.records {
            let (b, e) = self.ticks(*line, fields)?;
            if b >= e {
                return Err(csv_error(path, *line, format!("begin {b} is not before end {e}")));
            }
            let interval = Interval::new(b, e).map_err(|e| csv_error(path, *line, e.to_string()))?;
            domain
                .check_interval(interval)
                .map_err(|e| csv_error(path, *line, e.to_string()))?;
            let mut values = Vec::with_capacity(columns.len());
            for (attr, &i) in schema.attrs().iter().zip(&columns) {
                let raw = &fields[i];
                let v = parse_value(raw, attr.ty).ok_or_else(|| {
                    csv_error(path, *line, format!("`{}` value `{raw}` is not {}", attr.name, attr.ty))
                })?;
                values.push(v);
            }
            rows.push(PeriodRow::new(Tuple::new(values), interval, 1));
        }
        SqlPeriodRelation::new(schema, domain, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    /// Decimal places for rationals.
    pub precision: u32,
    /// Write a `mult` column instead of repeating duplicate rows.
    pub with_multiplicity: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            precision: 4,
            with_multiplicity: false,
        }
    }
}

/// Rounds half to even at `precision` decimals.
pub fn render_rational(r: &Rational, precision: u32) -> String {
    let scale = 10i128.pow(precision);
    let scaled = r * Rational::from_integer(scale);
    let floor = scaled.floor();
    let frac = scaled - floor;
    let mut n = floor.to_integer();
    let half = Rational::new(1, 2);
    if frac > half || (frac == half && n % 2 != 0) {
        n += 1;
    }
    let sign = if n < 0 { "-" } else { "" };
    let abs = n.unsigned_abs();
    let scale = scale as u128;
    if precision == 0 {
        return format!("{sign}{abs}");
    }
    format!(
        "{sign}{}.{:0width$}",
        abs / scale,
        abs % scale,
        width = precision as usize
    )
}

pub fn render_value(v: &Value, precision: u32) -> String {
    match v {
        Value::Null => String::new(),
        Value::Int(i) => i.to_string(),
        Value::Rat(r) => render_rational(r, precision),
        Value::Str(s) => s.clone(),
    }
}

/// Writes rows in the given order with `t_begin,t_end` as the last columns.
pub fn write_rows<'a>(
    out: impl Write,
    schema: &Schema,
    rows: impl IntoIterator<Item = (&'a Tuple, Interval, u64)>,
    opts: &OutputOptions,
) -> Result<()> {
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = schema.names().collect();
    if opts.with_multiplicity {
        header.push("mult");
    }
    header.extend(["t_begin", "t_end"]);
    w.write_record(&header).map_err(io)?;
    for (tuple, interval, mult) in rows {
        let mut fields: Vec<String> = tuple.values().iter().map(|v| render_value(v, opts.precision)).collect();
        let copies = if opts.with_multiplicity {
            fields.push(mult.to_string());
            1
        } else {
            mult
        };
        fields.push(interval.begin().to_string());
        fields.push(interval.end().to_string());
        for _ in 0..copies {
            w.write_record(&fields).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_relation(out: impl Write, r: &SqlPeriodRelation, opts: &OutputOptions) -> Result<()> {
    write_rows(
        out,
        r.schema(),
        r.rows().iter().map(|row| (&row.tuple, row.interval, row.mult)),
        opts,
    )
}
