//! MATPOWER version-2 case files, restricted to numeric scalars and numeric
//! matrices assigned to `mpc.<name>`.

use super::IoError;
use crate::network::{Branch, Bus, BusKind, CostCurve, Generator, NetworkError, PowerSystem};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const MIN_BUS_COLUMNS: usize = 13;
pub const MIN_BRANCH_COLUMNS: usize = 13;
pub const MIN_GEN_COLUMNS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<Vec<f64>>,
    /// Line of the opening bracket.
    pub line: usize,
}

impl Table {
    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Raw numeric content of a case file. Extra columns and extra tables are
/// kept as read.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseFile {
    pub name: Option<String>,
    pub version: Option<String>,
    pub base_mva: f64,
    pub bus: Table,
    pub gen: Table,
    pub branch: Table,
    pub gencost: Option<Table>,
    /// Other numeric matrices by field name.
    pub extra: BTreeMap<String, Table>,
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, IoError> {
    let v = match tok {
        "Inf" | "inf" => f64::INFINITY,
        "-Inf" | "-inf" => f64::NEG_INFINITY,
        _ => tok
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan() && tok.bytes().any(|b| b.is_ascii_digit()))
            .ok_or_else(|| parse_err(line, format!("non-numeric token '{tok}' in matrix")))?,
    };
    Ok(v)
}

struct OpenMatrix {
    name: String,
    start: usize,
    rows: Vec<Vec<f64>>,
    current: Vec<f64>,
}

impl OpenMatrix {
    fn end_row(&mut self, line: usize) -> Result<(), IoError> {
        if self.current.is_empty() {
            return Ok(());
        }
        if let Some(first) = self.rows.first() {
            if first.len() != self.current.len() {
                return Err(parse_err(
                    line,
                    format!(
                        "row of mpc.{} has {} columns, expected {}",
                        self.name,
                        self.current.len(),
                        first.len()
                    ),
                ));
            }
        }
        self.rows.push(std::mem::take(&mut self.current));
        Ok(())
    }

    /// Consumes matrix content; returns the text after `]` when the matrix closes.
    fn feed<'a>(&mut self, text: &'a str, line: usize) -> Result<Option<&'a str>, IoError> {
        let (body, rest) = match text.find(']') {
            Some(p) => (&text[..p], Some(&text[p + 1..])),
            None => (text, None),
        };
        for (k, chunk) in body.split(';').enumerate() {
            if k > 0 {
                self.end_row(line)?;
            }
            for tok in chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if tok.contains(['[', '{', '}', '(', ')', '\'', '"']) {
                    return Err(parse_err(line, format!("unsupported syntax '{tok}' in matrix")));
                }
                self.current.push(parse_number(tok, line)?);
            }
        }
        // Newlines also separate rows.
        self.end_row(line)?;
        Ok(rest)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(p) => &line[..p],
        None => line,
    }
}

/// Parses the supported subset of a MATPOWER case file.
pub fn parse_matpower(text: &str) -> Result<CaseFile, IoError> {
    let mut name = None;
    let mut version = None;
    let mut base_mva = None;
    let mut tables: BTreeMap<String, Table> = BTreeMap::new();
    let mut open: Option<OpenMatrix> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let mut content = strip_comment(raw).trim();
        if let Some(m) = open.as_mut() {
            match m.feed(content, line)? {
                None => continue,
                Some(rest) => {
                    let m = open.take().expect("open matrix");
                    tables.insert(
                        m.name.clone(),
                        Table {
                            rows: m.rows,
                            line: m.start,
                        },
                    );
                    content = rest.trim();
                    if !content.is_empty() && content != ";" {
                        return Err(parse_err(line, format!("unexpected text '{content}' after matrix")));
                    }
                    continue;
                }
            }
        }
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("function") {
            let rest = rest.trim();
            let fname = rest.rsplit('=').next().unwrap_or(rest).trim();
            name = Some(fname.to_string());
            continue;
        }
        let Some(rest) = content.strip_prefix("mpc.") else {
            return Err(parse_err(line, format!("unsupported statement '{content}'")));
        };
        let Some((field, rhs)) = rest.split_once('=') else {
            return Err(parse_err(line, format!("expected assignment in '{content}'")));
        };
        let field = field.trim();
        if field.is_empty() || !field.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(parse_err(line, format!("unsupported field expression 'mpc.{field}'")));
        }
        let rhs = rhs.trim();
        if let Some(body) = rhs.strip_prefix('[') {
            let mut m = OpenMatrix {
                name: field.to_string(),
                start: line,
                rows: Vec::new(),
                current: Vec::new(),
            };
            if let Some(rest) = m.feed(body, line)? {
                let rest = rest.trim();
                if !rest.is_empty() && rest != ";" {
                    return Err(parse_err(line, format!("unexpected text '{rest}' after matrix")));
                }
                tables.insert(field.to_string(), Table { rows: m.rows, line });
            } else {
                open = Some(m);
            }
            continue;
        }
        let value = rhs.trim_end_matches(';').trim();
        if let Some(s) = value.strip_prefix('\'').and_then(|v| v.strip_suffix('\'')) {
            if field == "version" {
                version = Some(s.to_string());
                continue;
            }
            return Err(parse_err(line, format!("string field mpc.{field} is not supported")));
        }
        if value.starts_with('{') || value.starts_with("struct") || value.starts_with("cell") {
            return Err(parse_err(line, format!("cell or struct field mpc.{field} is not supported")));
        }
        let v: f64 = value
            .parse()
            .map_err(|_| parse_err(line, format!("unsupported expression '{value}' for mpc.{field}")))?;
        if field == "baseMVA" {
            base_mva = Some(v);
        }
    }
    if let Some(m) = open {
        return Err(parse_err(m.start, format!("unterminated matrix mpc.{}", m.name)));
    }
    let base_mva = base_mva.ok_or_else(|| parse_err(last_line, "missing mpc.baseMVA"))?;
    if !(base_mva > 0.0) {
        return Err(parse_err(last_line, "mpc.baseMVA must be positive"));
    }
    let mut take = |key: &str, min: usize| -> Result<Table, IoError> {
        let t = tables
            .remove(key)
            .ok_or_else(|| parse_err(last_line, format!("missing required table mpc.{key}")))?;
        if !t.rows.is_empty() && t.columns() < min {
            return Err(parse_err(
                t.line,
                format!("mpc.{key} has {} columns, at least {min} required", t.columns()),
            ));
        }
        Ok(t)
    };
    let bus = take("bus", MIN_BUS_COLUMNS)?;
    let gen = take("gen", MIN_GEN_COLUMNS)?;
    let branch = take("branch", MIN_BRANCH_COLUMNS)?;
    let gencost = tables.remove("gencost");
    Ok(CaseFile {
        name,
        version,
        base_mva,
        bus,
        gen,
        branch,
        gencost,
        extra: tables,
    })
}

fn row_error(table: &str, row: usize, e: NetworkError) -> IoError {
    IoError::Case {
        table: table.to_string(),
        row: row + 1,
        message: e.to_string(),
    }
}

fn as_id(v: f64, table: &str, row: usize) -> Result<usize, IoError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(row_error(table, row, NetworkError::InvalidValue(format!("bus number {v}"))))
    }
}

fn cost_from_row(row: &[f64], base: f64, k: usize) -> Result<CostCurve, IoError> {
    let bad = |m: &str| row_error("gencost", k, NetworkError::InvalidCost(m.to_string()));
    if row.len() < 4 {
        return Err(bad("row too short"));
    }
    let n = row[3];
    if n < 0.0 || n.fract() != 0.0 {
        return Err(bad("invalid point or coefficient count"));
    }
    let n = n as usize;
    match row[0] as i64 {
        1 => {
            if row.len() < 4 + 2 * n {
                return Err(bad("too few breakpoint columns"));
            }
            let points = (0..n).map(|j| (row[4 + 2 * j] / base, row[5 + 2 * j])).collect();
            Ok(CostCurve::PiecewiseLinear { points })
        }
        2 => {
            if row.len() < 4 + n {
                return Err(bad("too few coefficient columns"));
            }
            // Highest order first, in $/MW^k; converted to ascending per-unit.
            let coefficients = (0..n).map(|k| row[4 + n - 1 - k] * base.powi(k as i32)).collect();
            Ok(CostCurve::Polynomial { coefficients })
        }
        m => Err(bad(&format!("unknown cost model {m}"))),
    }
}

/// Builds a per-unit network: powers divided by the base, angles in
/// radians, zero turns ratios replaced by 1, zero ratings meaning unlimited.
pub fn to_network(case: &CaseFile) -> Result<PowerSystem, IoError> {
    let base = case.base_mva;
    let deg = std::f64::consts::PI / 180.0;
    let mut buses = Vec::with_capacity(case.bus.rows.len());
    for (k, r) in case.bus.rows.iter().enumerate() {
        let id = as_id(r[0], "bus", k)?;
        let kind = match r[1] as u32 {
            4 => {
                return Err(row_error(
                    "bus",
                    k,
                    NetworkError::InvalidValue(format!("bus {id} is isolated (type 4)")),
                ))
            }
            code => BusKind::from_code(code)
                .filter(|_| r[1].fract() == 0.0)
                .ok_or_else(|| row_error("bus", k, NetworkError::InvalidValue(format!("bus type {}", r[1]))))?,
        };
        let mut b = Bus::new(id, kind);
        b.active_load = r[2] / base;
        b.reactive_load = r[3] / base;
        b.shunt_conductance = r[4] / base;
        b.shunt_susceptance = r[5] / base;
        b.voltage_magnitude = r[7];
        b.voltage_angle = r[8] * deg;
        b.base_kv = r[9];
        buses.push(b);
    }
    let mut generators = Vec::with_capacity(case.gen.rows.len());
    for (k, r) in case.gen.rows.iter().enumerate() {
        let mut g = Generator::new(as_id(r[0], "gen", k)?, r[1] / base);
        g.reactive_power = r[2] / base;
        g.reactive_max = r[3] / base;
        g.reactive_min = r[4] / base;
        g.voltage_setpoint = r[5];
        g.in_service = r[7] > 0.0;
        g.active_max = r[8] / base;
        g.active_min = r[9] / base;
        if let Some(costs) = &case.gencost {
            if let Some(row) = costs.rows.get(k) {
                g.cost = Some(cost_from_row(row, base, k)?);
            }
        }
        generators.push(g);
    }
    // Voltage-controlled buses take their magnitude from an in-service generator.
    for g in generators.iter().filter(|g| g.in_service) {
        if let Some(b) = buses.iter_mut().find(|b| b.id == g.bus) {
            if b.kind != BusKind::Pq {
                b.voltage_magnitude = g.voltage_setpoint;
            }
        }
    }
    let mut branches = Vec::with_capacity(case.branch.rows.len());
    for (k, r) in case.branch.rows.iter().enumerate() {
        let mut br = Branch::line(as_id(r[0], "branch", k)?, as_id(r[1], "branch", k)?, r[2], r[3]);
        br.shunt_susceptance = r[4];
        br.rating = r[5] / base;
        br.turns_ratio = if r[8] == 0.0 { 1.0 } else { r[8] };
        br.phase_shift = r[9] * deg;
        br.in_service = r[10] > 0.0;
        branches.push(br);
    }
    PowerSystem::new(base, buses, branches, generators).map_err(IoError::Network)
}

fn finite_or_inf(v: f64) -> String {
    if v == f64::INFINITY {
        "Inf".into()
    } else if v == f64::NEG_INFINITY {
        "-Inf".into()
    } else {
        format!("{v}")
    }
}

impl CaseFile {
    /// Case tables for a network; inverse of [`to_network`] up to the
    /// columns the network does not carry.
    pub fn from_network(sys: &PowerSystem, name: &str) -> Result<Self, IoError> {
        let base = sys.base_mva();
        let deg = 180.0 / std::f64::consts::PI;
        let bus = sys
            .buses()
            .iter()
            .map(|b| {
                vec![
                    b.id as f64,
                    b.kind.code() as f64,
                    b.active_load * base,
                    b.reactive_load * base,
                    b.shunt_conductance * base,
                    b.shunt_susceptance * base,
                    1.0,
                    b.voltage_magnitude,
                    b.voltage_angle * deg,
                    b.base_kv,
                    1.0,
                    1.1,
                    0.9,
                ]
            })
            .collect();
        let gen = sys
            .generators()
            .iter()
            .map(|g| {
                vec![
                    g.bus as f64,
                    g.active_power * base,
                    g.reactive_power * base,
                    g.reactive_max * base,
                    g.reactive_min * base,
                    g.voltage_setpoint,
                    base,
                    if g.in_service { 1.0 } else { 0.0 },
                    g.active_max * base,
                    g.active_min * base,
                ]
            })
            .collect();
        let mut branch = Vec::with_capacity(sys.branches().len());
        for (k, br) in sys.branches().iter().enumerate() {
            if br.shunt_conductance != 0.0 {
                return Err(row_error(
                    "branch",
                    k,
                    NetworkError::InvalidValue("branch shunt conductance has no MATPOWER column".into()),
                ));
            }
            let rate = br.rating * base;
            branch.push(vec![
                br.from_bus as f64,
                br.to_bus as f64,
                br.resistance,
                br.reactance,
                br.shunt_susceptance,
                rate,
                rate,
                rate,
                br.turns_ratio,
                br.phase_shift * deg,
                if br.in_service { 1.0 } else { 0.0 },
                -360.0,
                360.0,
            ]);
        }
        let gencost = if !sys.generators().is_empty() && sys.generators().iter().all(|g| g.cost.is_some()) {
            let rows = sys
                .generators()
                .iter()
                .map(|g| match g.cost.as_ref().expect("checked") {
                    CostCurve::Polynomial { coefficients } => {
                        let n = coefficients.len();
                        let mut row = vec![2.0, 0.0, 0.0, n as f64];
                        row.extend((0..n).rev().map(|k| coefficients[k] / base.powi(k as i32)));
                        row
                    }
                    CostCurve::PiecewiseLinear { points } => {
                        let mut row = vec![1.0, 0.0, 0.0, points.len() as f64];
                        for &(p, c) in points {
                            row.extend([p * base, c]);
                        }
                        row
                    }
                })
                .collect::<Vec<_>>();
            // Rows of a MATPOWER table share one width.
            let width = rows.iter().map(Vec::len).max().unwrap_or(0);
            let rows = rows
                .into_iter()
                .map(|mut r| {
                    r.resize(width, 0.0);
                    r
                })
                .collect();
            Some(Table { rows, line: 0 })
        } else {
            None
        };
        Ok(Self {
            name: Some(name.to_string()),
            version: Some("2".into()),
            base_mva: base,
            bus: Table { rows: bus, line: 0 },
            gen: Table { rows: gen, line: 0 },
            branch: Table { rows: branch, line: 0 },
            gencost,
            extra: BTreeMap::new(),
        })
    }

    pub fn to_matpower_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "function mpc = {}", self.name.as_deref().unwrap_or("case"));
        let _ = writeln!(s, "mpc.version = '{}';", self.version.as_deref().unwrap_or("2"));
        let _ = writeln!(s, "mpc.baseMVA = {};", self.base_mva);
        let mut write_table = |name: &str, t: &Table| {
            let _ = writeln!(s, "\nmpc.{name} = [");
            for r in &t.rows {
                let cells: Vec<String> = r.iter().map(|&v| finite_or_inf(v)).collect();
                let _ = writeln!(s, "\t{};", cells.join("\t"));
            }
            let _ = writeln!(s, "];");
        };
        write_table("bus", &self.bus);
        write_table("gen", &self.gen);
        write_table("branch", &self.branch);
        if let Some(g) = &self.gencost {
            write_table("gencost", g);
        }
        for (k, t) in &self.extra {
            write_table(k, t);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
\t1 3 0 0 0 0 1 1.06 0 132 1 1.06 0.94;
\t% a comment row
\t2 1 50 20 0 10 1 1 -5 132 1 1.06 0.94 7.5;
];
mpc.gen = [ 1 60 0 100 -100 1.06 100 1 200 0 ];
mpc.branch = [
\t1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360
];
mpc.gencost = [
\t2 0 0 3 0.01 40 0;
];
";

    fn with_row_widths_fixed(text: &str) -> String {
        text.replace(" 132 1 1.06 0.94;\n\t% a", " 132 1 1.06 0.94 0;\n\t% a")
    }

    #[test]
    fn parses_tiny_case() {
        let c = parse_matpower(&with_row_widths_fixed(TINY)).unwrap();
        assert_eq!(c.name.as_deref(), Some("tiny"));
        assert_eq!(c.base_mva, 100.0);
        assert_eq!(c.bus.rows.len(), 2);
        assert_eq!(c.bus.columns(), 14);
        assert_eq!(c.bus.rows[1][13], 7.5);
        assert_eq!(c.gen.rows.len(), 1);
        assert_eq!(c.branch.rows.len(), 1);

        let sys = to_network(&c).unwrap();
        assert_eq!(sys.buses()[0].kind, BusKind::Slack);
        assert_eq!(sys.buses()[0].base_kv, 132.0);
        assert!((sys.buses()[1].voltage_angle + 5f64.to_radians()).abs() < 1e-15);
        assert_eq!(sys.buses()[1].active_load, 0.5);
        assert_eq!(sys.buses()[1].shunt_susceptance, 0.1);
        assert_eq!(sys.branches()[0].turns_ratio, 1.0);
        assert_eq!(sys.generators()[0].active_max, 2.0);
        match sys.generators()[0].cost.as_ref().unwrap() {
            CostCurve::Polynomial { coefficients } => {
                assert_eq!(coefficients.len(), 3);
                assert_eq!(coefficients[0], 0.0);
                assert_eq!(coefficients[1], 4000.0);
                assert!((coefficients[2] - 100.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_reported_with_line() {
        match parse_matpower(TINY) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let unterminated = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 1 1 1 1;\n";
        assert!(matches!(parse_matpower(unterminated), Err(IoError::Parse { line: 2, .. })));
        let bad_token = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 x 0 0 0 1 1 0 1 1 1 1;\n];";
        assert!(matches!(parse_matpower(bad_token), Err(IoError::Parse { line: 3, .. })));
        let missing = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 1 1 1 1;\n];\n";
        match parse_matpower(missing) {
            Err(IoError::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("gen"));
            }
            other => panic!("{other:?}"),
        }
        let cell = "mpc.baseMVA = 100;\nmpc.bus_name = {\n'a';\n};";
        assert!(matches!(parse_matpower(cell), Err(IoError::Parse { line: 2, .. })));
        let short = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 1 1 1];\nmpc.gen=[];\nmpc.branch=[];";
        assert!(matches!(parse_matpower(short), Err(IoError::Parse { line: 2, .. })));
    }

    #[test]
    fn scientific_notation_and_commas() {
        let text = "mpc.baseMVA = 1e2;\nmpc.bus = [1, 3, 0, 0, 0, 0, 1, 1.0E0, 0, 1, 1, 1, 1];\nmpc.gen = [];\nmpc.branch = [];";
        let c = parse_matpower(text).unwrap();
        assert_eq!(c.base_mva, 100.0);
        assert_eq!(c.bus.rows[0][7], 1.0);
    }

    #[test]
    fn matpower_text_round_trip() {
        let c = parse_matpower(&with_row_widths_fixed(TINY)).unwrap();
        let again = parse_matpower(&c.to_matpower_string()).unwrap();
        assert_eq!(again.bus.rows, c.bus.rows);
        assert_eq!(again.branch.rows, c.branch.rows);
        assert_eq!(again.gencost.as_ref().unwrap().rows, c.gencost.as_ref().unwrap().rows);
    }

    #[test]
    fn isolated_bus_type_is_rejected() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 1 1 1 1; 2 4 0 0 0 0 1 1 0 1 1 1 1];\nmpc.gen = [];\nmpc.branch = [];";
        let c = parse_matpower(text).unwrap();
        assert!(matches!(to_network(&c), Err(IoError::Case { row: 2, .. })));
    }
}
