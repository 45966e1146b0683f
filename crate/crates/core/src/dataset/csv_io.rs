use super::{convert_columns, Cell, Dataset, IngestError, RawColumn};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

/// Load a delimited text file and infer attribute types.
///
/// Row numbers in [`IngestError::RaggedRow`] are 1-based record positions in
/// the file, the header counting as row 1 when present.
pub fn load_csv(path: &Path, delimiter: u8, has_header: bool) -> Result<Dataset, IngestError> {
    let io_err = |source| IngestError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io_err)?;
    read_csv(file, delimiter, has_header)
}

pub fn read_csv<R: Read>(reader: R, delimiter: u8, has_header: bool) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records();
    let mut header: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<String>> = Vec::new();
    let mut width = None;
    let mut row_no = 0usize;
    for record in records.by_ref() {
        let record = record?;
        row_no += 1;
        match width {
            None => {
                width = Some(record.len());
                columns = vec![Vec::new(); record.len()];
                if has_header {
                    let names = record.iter().map(|s| s.trim().to_string()).collect();
                    header = Some(names);
                    continue;
                }
            }
            Some(w) if w != record.len() => return Err(IngestError::RaggedRow(row_no)),
            Some(_) => {}
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
    }

    if columns.is_empty() || columns[0].is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let names = header.unwrap_or_else(|| (1..=columns.len()).map(|i| format!("column_{i}")).collect());
    let raw: Vec<RawColumn> =
        names.into_iter().zip(columns).map(|(name, cells)| RawColumn { name, cells }).collect();
    let (metas, typed) = convert_columns(&raw)?;
    Ok(Dataset::from_columns(metas, typed))
}

/// Write with a header row. Missing cells are written as empty fields and
/// numbers use the shortest representation that round-trips.
pub fn write_csv(ds: &Dataset, path: &Path, delimiter: u8) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    write_csv_to(ds, file, delimiter)
}

pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W, delimiter: u8) -> Result<(), IngestError> {
    let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    wtr.write_record(ds.attributes().iter().map(|a| a.name.as_str()))?;
    for row in ds.rows() {
        wtr.write_record(row.iter().map(|cell| match cell {
            Cell::Number(v) => v.to_string(),
            Cell::Category(s) => s.clone(),
            Cell::Missing => String::new(),
        }))?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
