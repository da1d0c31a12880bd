//! Daily close-price panel: CSV loading, gap handling and simple returns.
//!
//! Input CSVs have a `date` column (ISO dates, strictly increasing) and one
//! column per symbol. Missing cells are forward-filled from the last
//! observation for gaps of up to [`MAX_FILL_DAYS`] trading days; dates still
//! missing any universe asset after filling are dropped. Returns are simple:
//! `r_t = p_t / p_{t-1} - 1`, aligned so row `t` of `returns` belongs to
//! `dates[t + 1]`.

use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1, ArrayView2, s};
use serde::Serialize;

use crate::error::{Error, Result};

/// Longest run of consecutive missing trading days that forward-fill bridges.
pub const MAX_FILL_DAYS: usize = 5;

/// Minimum usable panel rows for a full training window.
pub const MIN_PANEL_ROWS: usize = 756;

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct LoadStats {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub cells_filled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: Array2<f64>,
    returns: Array2<f64>,
}

impl PricePanel {
    /// Build a panel from fully observed prices. Validates shape, strictly
    /// increasing dates and positive prices, then computes returns.
    pub fn from_parts(
        symbols: Vec<String>,
        dates: Vec<NaiveDate>,
        prices: Array2<f64>,
    ) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != symbols.len() {
            return Err(Error::Data(format!(
                "price matrix is {}x{} but panel has {} dates and {} symbols",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                symbols.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::Data("panel needs at least two dates".into()));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(((r, c), v)) =
            prices.indexed_iter().find(|(_, v)| !v.is_finite() || **v <= 0.0)
        {
            return Err(Error::Data(format!(
                "non-positive or non-finite price {} for {} on {}",
                v, symbols[c], dates[r]
            )));
        }
        let n = prices.nrows();
        let mut returns = Array2::zeros((n - 1, prices.ncols()));
        for t in 1..n {
            for a in 0..prices.ncols() {
                returns[[t - 1, a]] = prices[[t, a]] / prices[[t - 1, a]] - 1.0;
            }
        }
        Ok(PricePanel { symbols, dates, prices, returns })
    }

    /// Load a CSV panel restricted to `universe`, applying the gap rules.
    /// Panels shorter than `min_rows` after cleaning are rejected.
    pub fn load_csv(
        path: &Path,
        universe: &[String],
        min_rows: usize,
    ) -> Result<(Self, LoadStats)> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;

        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
            .clone();
        let mut date_col = None;
        for (i, h) in headers.iter().enumerate() {
            if h.eq_ignore_ascii_case("date") {
                date_col = Some(i);
                break;
            }
        }
        let date_col = date_col
            .ok_or_else(|| Error::Data(format!("{}: no date column", path.display())))?;

        let mut sym_cols = Vec::with_capacity(universe.len());
        for sym in universe {
            let col = headers
                .iter()
                .position(|h| h == sym)
                .ok_or_else(|| Error::MissingSymbol { symbol: sym.clone() })?;
            sym_cols.push(col);
        }

        let mut dates: Vec<NaiveDate> = Vec::new();
        let mut raw: Vec<Vec<Option<f64>>> = Vec::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            let date_str = record.get(date_col).unwrap_or("");
            let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|e| {
                Error::Data(format!("{}: bad date {date_str:?}: {e}", path.display()))
            })?;
            if let Some(last) = dates.last() {
                if date <= *last {
                    return Err(Error::Data(format!(
                        "{}: dates not strictly increasing at {last} -> {date}",
                        path.display()
                    )));
                }
            }
            let mut row = Vec::with_capacity(sym_cols.len());
            for (&col, sym) in sym_cols.iter().zip(universe) {
                let cell = record.get(col).unwrap_or("");
                if cell.is_empty()
                    || cell.eq_ignore_ascii_case("na")
                    || cell.eq_ignore_ascii_case("nan")
                    || cell.eq_ignore_ascii_case("null")
                {
                    row.push(None);
                } else {
                    let v: f64 = cell.parse().map_err(|e| {
                        Error::Data(format!(
                            "{}: bad price {cell:?} for {sym} on {date}: {e}",
                            path.display()
                        ))
                    })?;
                    row.push(Some(v));
                }
            }
            dates.push(date);
            raw.push(row);
        }

        let rows_read = raw.len();
        let n_assets = universe.len();
        let mut cells_filled = 0usize;

        // Forward-fill short gaps per column.
        for a in 0..n_assets {
            let mut last_seen: Option<(usize, f64)> = None;
            for t in 0..raw.len() {
                match raw[t][a] {
                    Some(v) => last_seen = Some((t, v)),
                    None => {
                        if let Some((t0, v)) = last_seen {
                            if t - t0 <= MAX_FILL_DAYS {
                                raw[t][a] = Some(v);
                                cells_filled += 1;
                            }
                        }
                    }
                }
            }
        }

        let mut kept_dates = Vec::new();
        let mut values = Vec::new();
        for (t, row) in raw.iter().enumerate() {
            if row.iter().all(|c| c.is_some()) {
                kept_dates.push(dates[t]);
                values.extend(row.iter().map(|c| c.unwrap()));
            }
        }
        let rows_kept = kept_dates.len();
        let stats = LoadStats {
            rows_read,
            rows_dropped: rows_read - rows_kept,
            cells_filled,
        };
        if stats.rows_dropped > 0 {
            log::warn!(
                "panel {}: dropped {} of {} dates with unfillable gaps",
                path.display(),
                stats.rows_dropped,
                rows_read
            );
        }
        if rows_kept < min_rows {
            return Err(Error::InsufficientHistory { rows: rows_kept, need: min_rows });
        }
        let prices = Array2::from_shape_vec((rows_kept, n_assets), values)
            .expect("shape follows from construction");
        let panel = PricePanel::from_parts(universe.to_vec(), kept_dates, prices)?;
        Ok((panel, stats))
    }

    /// Write the panel back out as a plain price CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| {
            Error::Data(format!("{}: {e}", path.display()))
        })?;
        let mut header = vec!["date".to_string()];
        header.extend(self.symbols.iter().cloned());
        w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            for a in 0..self.symbols.len() {
                rec.push(format!("{}", self.prices[[t, a]]));
            }
            w.write_record(&rec).map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.symbols.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Number of return rows (`n_dates - 1`).
    pub fn n_returns(&self) -> usize {
        self.returns.nrows()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> ArrayView2<'_, f64> {
        self.prices.view()
    }

    pub fn returns(&self) -> ArrayView2<'_, f64> {
        self.returns.view()
    }

    /// Dates aligned with return rows: `return_dates()[t] == dates()[t + 1]`.
    pub fn return_dates(&self) -> &[NaiveDate] {
        &self.dates[1..]
    }

    pub fn symbol_index(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::MissingSymbol { symbol: symbol.to_string() })
    }

    /// Return column for one symbol.
    pub fn returns_for(&self, symbol: &str) -> Result<ArrayView1<'_, f64>> {
        let idx = self.symbol_index(symbol)?;
        Ok(self.returns.column(idx))
    }

    /// Trailing window of `len` return rows ending at return index `end`
    /// (inclusive). `None` when fewer than `len` rows are available.
    pub fn returns_window(&self, end: usize, len: usize) -> Option<ArrayView2<'_, f64>> {
        if len == 0 || end >= self.returns.nrows() || end + 1 < len {
            return None;
        }
        Some(self.returns.slice(s![end + 1 - len..=end, ..]))
    }

    /// All return rows up to and including return index `end`.
    pub fn returns_until(&self, end: usize) -> ArrayView2<'_, f64> {
        self.returns.slice(s![..=end, ..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::Datelike;
    use std::io::Write as _;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn weekday_dates(n: usize) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(n);
        let mut d = date("2015-01-05");
        while out.len() < n {
            if d.weekday().num_days_from_monday() < 5 {
                out.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        out
    }

    #[test]
    fn simple_returns_match_hand_computation() {
        let prices = Array2::from_shape_vec(
            (3, 2),
            vec![100.0, 50.0, 110.0, 45.0, 99.0, 54.0],
        )
        .unwrap();
        let panel = PricePanel::from_parts(
            vec!["A".into(), "B".into()],
            weekday_dates(3),
            prices,
        )
        .unwrap();
        assert_abs_diff_eq!(panel.returns()[[0, 0]], 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(panel.returns()[[0, 1]], -0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(panel.returns()[[1, 0]], -0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(panel.returns()[[1, 1]], 0.20, epsilon = 1e-15);
        assert_eq!(panel.return_dates()[0], panel.dates()[1]);
    }

    #[test]
    fn window_alignment() {
        let n = 50;
        let dates = weekday_dates(n);
        let prices = Array2::from_shape_fn((n, 3), |(t, a)| {
            100.0 + t as f64 + 10.0 * a as f64
        });
        let panel =
            PricePanel::from_parts(vec!["A".into(), "B".into(), "C".into()], dates, prices)
                .unwrap();
        let w = panel.returns_window(9, 10).unwrap();
        assert_eq!(w.nrows(), 10);
        assert_abs_diff_eq!(w[[0, 0]], panel.returns()[[0, 0]], epsilon = 0.0);
        assert!(panel.returns_window(8, 10).is_none());
        assert!(panel.returns_window(panel.n_returns(), 5).is_none());
        let last = panel.returns_window(panel.n_returns() - 1, 1).unwrap();
        assert_abs_diff_eq!(
            last[[0, 2]],
            panel.returns()[[panel.n_returns() - 1, 2]],
            epsilon = 0.0
        );
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn short_gaps_filled_long_gaps_dropped() {
        let mut body = String::from("date,AA,BB\n");
        let dates = weekday_dates(20);
        for (t, d) in dates.iter().enumerate() {
            // AA: missing on rows 3..=5 (3-day gap, fillable).
            // BB: missing on rows 8..=14 (7-day gap; first 5 filled, rows 13,14 dropped).
            let aa = if (3..=5).contains(&t) { String::new() } else { format!("{}", 100 + t) };
            let bb = if (8..=14).contains(&t) { String::new() } else { format!("{}", 200 + t) };
            body.push_str(&format!("{},{},{}\n", d.format("%Y-%m-%d"), aa, bb));
        }
        let f = write_csv(&body);
        let (panel, stats) = PricePanel::load_csv(
            f.path(),
            &["AA".to_string(), "BB".to_string()],
            2,
        )
        .unwrap();
        assert_eq!(stats.rows_read, 20);
        assert_eq!(stats.rows_dropped, 2);
        assert_eq!(stats.cells_filled, 3 + 5);
        assert_eq!(panel.n_dates(), 18);
        // Filled cells carry the last observation forward.
        let t3 = panel.dates().iter().position(|d| *d == dates[3]).unwrap();
        assert_abs_diff_eq!(panel.prices()[[t3, 0]], 102.0, epsilon = 0.0);
        let t12 = panel.dates().iter().position(|d| *d == dates[12]).unwrap();
        assert_abs_diff_eq!(panel.prices()[[t12, 1]], 207.0, epsilon = 0.0);
        // Rows 13 and 14 are gone.
        assert!(!panel.dates().contains(&dates[13]));
        assert!(!panel.dates().contains(&dates[14]));
    }

    #[test]
    fn leading_missing_rows_are_dropped_not_filled() {
        let mut body = String::from("date,AA,BB\n");
        for (t, d) in weekday_dates(10).iter().enumerate() {
            let aa = if t < 2 { String::new() } else { format!("{}", 100 + t) };
            body.push_str(&format!("{},{},200\n", d.format("%Y-%m-%d"), aa));
        }
        let f = write_csv(&body);
        let (panel, stats) =
            PricePanel::load_csv(f.path(), &["AA".to_string(), "BB".to_string()], 2).unwrap();
        assert_eq!(stats.rows_dropped, 2);
        assert_eq!(panel.n_dates(), 8);
    }

    #[test]
    fn unsorted_dates_rejected() {
        let f = write_csv("date,AA\n2020-01-02,1\n2020-01-01,2\n");
        let err = PricePanel::load_csv(f.path(), &["AA".to_string()], 1).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn missing_symbol_is_config_error() {
        let f = write_csv("date,AA\n2020-01-02,1\n");
        let err = PricePanel::load_csv(f.path(), &["ZZ".to_string()], 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn short_panel_is_insufficient_history() {
        let mut body = String::from("date,AA\n");
        for d in weekday_dates(100) {
            body.push_str(&format!("{},10\n", d.format("%Y-%m-%d")));
        }
        let f = write_csv(&body);
        let err =
            PricePanel::load_csv(f.path(), &["AA".to_string()], MIN_PANEL_ROWS).unwrap_err();
        match err {
            Error::InsufficientHistory { rows, need } => {
                assert_eq!(rows, 100);
                assert_eq!(need, MIN_PANEL_ROWS);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reload_is_bit_identical() {
        let mut body = String::from("date,AA,BB\n");
        for (t, d) in weekday_dates(30).iter().enumerate() {
            body.push_str(&format!(
                "{},{},{}\n",
                d.format("%Y-%m-%d"),
                100.0 + 0.37 * t as f64,
                50.0 - 0.11 * t as f64
            ));
        }
        let f = write_csv(&body);
        let universe = vec!["AA".to_string(), "BB".to_string()];
        let (a, _) = PricePanel::load_csv(f.path(), &universe, 2).unwrap();
        let (b, _) = PricePanel::load_csv(f.path(), &universe, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn write_then_load_round_trips() {
        let n = 40;
        let prices = Array2::from_shape_fn((n, 2), |(t, a)| {
            100.0 * (1.0 + 0.001 * (t as f64 + 1.0) * (a as f64 + 1.0)).powi(2)
        });
        let panel = PricePanel::from_parts(
            vec!["AA".into(), "BB".into()],
            weekday_dates(n),
            prices,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        panel.write_csv(&path).unwrap();
        let (back, stats) =
            PricePanel::load_csv(&path, &["AA".to_string(), "BB".to_string()], 2).unwrap();
        assert_eq!(stats.cells_filled, 0);
        assert_eq!(panel, back);
    }
}
