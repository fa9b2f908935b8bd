//! Wisconsin breast-cancer CSV (id, nine features, class 2 or 4).

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const WBC_FEATURES: usize = 9;
/// `floor(699 * 2 / 3)`; rows are split in file order.
pub const WBC_TRAIN_ROWS: usize = 466;

/// Loads the file and splits it into the first 466 rows and the rest.
///
/// Features are used at face value. A missing cell (`?`) becomes the mean
/// of that column over the non-missing training rows, in both splits.
/// Label 0 is benign (class 2), label 1 malignant (class 4).
pub fn load_wbc(path: &Path) -> Result<(Dataset, Dataset)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != WBC_FEATURES + 2 {
            return Err(Error::MalformedRow {
                row,
                reason: format!(
                    "expected {} columns, found {}",
                    WBC_FEATURES + 2,
                    record.len()
                ),
            });
        }
        for col in 1..=WBC_FEATURES {
            let raw = &record[col];
            if raw == "?" {
                cells.push(None);
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("feature {col} is not a number: {raw:?}"),
            })?;
            if !(1.0..=10.0).contains(&v) {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("feature {col} = {v} is outside [1, 10]"),
                });
            }
            cells.push(Some(v));
        }
        labels.push(match &record[WBC_FEATURES + 1] {
            "2" => 0,
            "4" => 1,
            other => {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("class must be 2 or 4, found {other:?}"),
                })
            }
        });
    }

    let total = labels.len();
    if total <= WBC_TRAIN_ROWS {
        return Err(Error::InvalidDataset(format!(
            "{} holds {total} rows; at least {} are needed for the train/test split",
            path.display(),
            WBC_TRAIN_ROWS + 1
        )));
    }

    let train_cells = &cells[..WBC_TRAIN_ROWS * WBC_FEATURES];
    let means: Vec<f64> = (0..WBC_FEATURES)
        .map(|col| {
            let present: Vec<f64> = train_cells
                .iter()
                .skip(col)
                .step_by(WBC_FEATURES)
                .flatten()
                .copied()
                .collect();
            present.iter().sum::<f64>() / present.len() as f64
        })
        .collect();
    if let Some(col) = means.iter().position(|m| m.is_nan()) {
        return Err(Error::InvalidDataset(format!(
            "feature {} is missing in every training row",
            col + 1
        )));
    }
    let inputs: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(k, c)| c.unwrap_or(means[k % WBC_FEATURES]))
        .collect();

    let split = WBC_TRAIN_ROWS * WBC_FEATURES;
    let train = Dataset::classification(
        inputs[..split].to_vec(),
        WBC_FEATURES,
        labels[..WBC_TRAIN_ROWS].to_vec(),
        2,
    )?;
    let test = Dataset::classification(
        inputs[split..].to_vec(),
        WBC_FEATURES,
        labels[WBC_TRAIN_ROWS..].to_vec(),
        2,
    )?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(rows: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for r in rows {
            writeln!(f, "{r}").unwrap();
        }
        f
    }

    fn synthetic(total: usize) -> Vec<String> {
        (0..total)
            .map(|k| {
                let feats: Vec<String> = (0..9).map(|c| ((k + c) % 10 + 1).to_string()).collect();
                let class = if k % 3 == 0 { 4 } else { 2 };
                format!("{},{},{class}", 1000 + k, feats.join(","))
            })
            .collect()
    }

    #[test]
    fn split_and_labels() {
        let f = file_with(&synthetic(699));
        let (train, test) = load_wbc(f.path()).unwrap();
        assert_eq!((train.len(), test.len()), (466, 233));
        assert_eq!(train.input_dim(), 9);
        assert_eq!(train.labels().unwrap()[0], 1);
        assert_eq!(train.labels().unwrap()[1], 0);
        assert_eq!(test.labels().unwrap()[0], usize::from(466 % 3 == 0));
        assert_eq!(test.input(0)[0], ((466 % 10) + 1) as f64);
    }

    #[test]
    fn missing_cell_gets_training_mean() {
        let mut rows = synthetic(699);
        rows[23] = rows[23]
            .split(',')
            .enumerate()
            .map(|(i, v)| {
                if i == 6 {
                    "?".to_string()
                } else {
                    v.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join(",");
        let f = file_with(&rows);
        let (train, _) = load_wbc(f.path()).unwrap();
        // Oracle: mean of column 6 over the other 465 training rows.
        let mean: f64 = (0..466)
            .filter(|&k| k != 23)
            .map(|k| ((k + 5) % 10 + 1) as f64)
            .sum::<f64>()
            / 465.0;
        assert!((train.input(23)[5] - mean).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_row() {
        let mut rows = synthetic(699);
        rows[9] = rows[9].replacen(",2", ",12", 1).replacen(",4", ",12", 1);
        let bad_range = load_wbc(file_with(&rows).path()).unwrap_err();
        assert!(
            matches!(bad_range, Error::MalformedRow { row: 10, .. }),
            "{bad_range}"
        );

        let mut rows = synthetic(699);
        rows[4] = "1,2,3".into();
        assert!(matches!(
            load_wbc(file_with(&rows).path()),
            Err(Error::MalformedRow { row: 5, .. })
        ));

        let mut rows = synthetic(699);
        rows[100] = rows[100].rsplit_once(',').unwrap().0.to_string() + ",3";
        assert!(matches!(
            load_wbc(file_with(&rows).path()),
            Err(Error::MalformedRow { row: 101, .. })
        ));

        assert!(matches!(
            load_wbc(file_with(&synthetic(100)).path()),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn stable_across_loads() {
        let f = file_with(&synthetic(699));
        assert_eq!(load_wbc(f.path()).unwrap(), load_wbc(f.path()).unwrap());
    }
}
