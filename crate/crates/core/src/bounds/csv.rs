use std::collections::BTreeMap;
use std::io::Write;

use super::{BoundId, BoundsError, SweepRow};

/// Decimal text of `x` rounded to 12 significant digits. Formatting the
/// parsed result again gives the same text.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// Header `param,<id>,...` followed by one line per row.
pub fn write_csv(rows: &[SweepRow], ids: &[BoundId], out: &mut impl Write) -> Result<(), BoundsError> {
    let mut header = String::from("param");
    for id in ids {
        header.push(',');
        header.push_str(id.as_str());
    }
    writeln!(out, "{header}")?;
    for row in rows {
        let mut line = format_value(row.parameter);
        for id in ids {
            let v = row.values.get(id).ok_or_else(|| {
                BoundsError::InvalidArgument(format!("row {} has no value for {id}", row.parameter))
            })?;
            line.push(',');
            line.push_str(&format_value(*v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_csv(text: &str) -> Result<(Vec<BoundId>, Vec<SweepRow>), BoundsError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(BoundsError::Csv {
        line: 1,
        message: "empty input".into(),
    })?;
    let mut cols = header.split(',');
    if cols.next().map(str::trim) != Some("param") {
        return Err(BoundsError::Csv {
            line: 1,
            message: "first column must be 'param'".into(),
        });
    }
    let ids = cols
        .map(|c| {
            c.trim().parse::<BoundId>().map_err(|message| BoundsError::Csv { line: 1, message })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (index, line) in lines {
        let err = |message: String| BoundsError::Csv {
            line: index + 1,
            message,
        };
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| err(format!("'{f}': {e}"))))
            .collect::<Result<_, _>>()?;
        if fields.len() != ids.len() + 1 {
            return Err(err(format!("expected {} fields, found {}", ids.len() + 1, fields.len())));
        }
        rows.push(SweepRow {
            parameter: fields[0],
            values: ids.iter().copied().zip(fields[1..].iter().copied()).collect::<BTreeMap<_, _>>(),
        });
    }
    Ok((ids, rows))
}
