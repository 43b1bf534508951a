//! Daily price files to an empirical joint PMF of arithmetic returns.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamble::{Atom, GambleModel};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("row {row}: {symbol} price {price} is not positive")]
    NonPositivePrice { row: usize, symbol: String, price: f64 },
    #[error("row {row}: {symbol} price {text:?} is not a number")]
    BadPrice { row: usize, symbol: String, text: String },
    #[error("row {row}: date {text:?} is not ISO-8601")]
    BadDate { row: usize, text: String },
    #[error("row {row}: date {date} is not after the previous row")]
    UnsortedDates { row: usize, date: NaiveDate },
    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: usize, date: NaiveDate },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("no price columns selected")]
    NoSymbols,
    #[error("{symbol}: need at least 2 prices, have {len}")]
    TooShort { symbol: String, len: usize },
    #[error("series share {0} dates, need at least 2")]
    EmptyIntersection(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] crate::Error),
}

/// Adjusted closing prices of one asset on strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self, IngestError> {
        let symbol = symbol.into();
        if dates.len() != prices.len() || prices.len() < 2 {
            return Err(IngestError::TooShort {
                symbol,
                len: prices.len().min(dates.len()),
            });
        }
        for (i, &p) in prices.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(IngestError::NonPositivePrice {
                    row: i + 1,
                    symbol,
                    price: p,
                });
            }
        }
        for i in 1..dates.len() {
            if dates[i] == dates[i - 1] {
                return Err(IngestError::DuplicateDate { row: i + 1, date: dates[i] });
            }
            if dates[i] < dates[i - 1] {
                return Err(IngestError::UnsortedDates { row: i + 1, date: dates[i] });
            }
        }
        Ok(PriceSeries { symbol, dates, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub series: Vec<PriceSeries>,
    /// Data rows (1-based, header excluded) dropped for a missing value.
    pub dropped_rows: Vec<usize>,
}

/// Where an empirical model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub symbols: Vec<String>,
    pub start: String,
    pub end: String,
    /// Aligned price rows `T`; the model has `T - 1` atoms.
    pub rows: usize,
    /// Dates present in some series but not all.
    pub unmatched_dates: usize,
}

#[derive(Debug, Clone)]
pub struct EmpiricalPmf {
    pub model: GambleModel,
    pub provenance: Provenance,
}

impl EmpiricalPmf {
    pub fn to_json(&self) -> String {
        self.model.to_json(Some(&self.provenance))
    }
}

fn parse_date(text: &str) -> Option<NaiveDate> {
    let t = text.trim();
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .ok()
        .or_else(|| DateTime::parse_from_rfc3339(t).ok().map(|d| d.date_naive()))
        .or_else(|| NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S").ok().map(|d| d.date()))
}

/// Loads `date,<sym1>,<sym2>,...` price files.
///
/// `columns` maps symbol names to header columns; `None` takes every column
/// other than the first (date) column, named after its header.
pub fn load_prices(path: impl AsRef<Path>, columns: Option<&[(String, String)]>) -> Result<LoadReport, IngestError> {
    read_prices(std::fs::File::open(path)?, columns)
}

pub fn read_prices<R: Read>(reader: R, columns: Option<&[(String, String)]>) -> Result<LoadReport, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let selected: Vec<(String, usize)> = match columns {
        Some(map) => map
            .iter()
            .map(|(sym, col)| {
                header
                    .iter()
                    .position(|h| h == col)
                    .map(|i| (sym.clone(), i))
                    .ok_or_else(|| IngestError::MissingColumn(col.clone()))
            })
            .collect::<Result<_, _>>()?,
        None => header.iter().enumerate().skip(1).map(|(i, h)| (h.to_string(), i)).collect(),
    };
    if selected.is_empty() {
        return Err(IngestError::NoSymbols);
    }

    let mut dates = Vec::new();
    let mut prices: Vec<Vec<f64>> = vec![Vec::new(); selected.len()];
    let mut dropped_rows = Vec::new();
    let mut last: Option<NaiveDate> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let date_text = rec.get(0).unwrap_or("");
        let date = parse_date(date_text).ok_or_else(|| IngestError::BadDate {
            row,
            text: date_text.to_string(),
        })?;
        if let Some(prev) = last {
            if date == prev {
                return Err(IngestError::DuplicateDate { row, date });
            }
            if date < prev {
                return Err(IngestError::UnsortedDates { row, date });
            }
        }
        last = Some(date);

        let mut values = Vec::with_capacity(selected.len());
        for (sym, col) in &selected {
            let text = rec.get(*col).unwrap_or("");
            if text.is_empty() || text.eq_ignore_ascii_case("na") || text.eq_ignore_ascii_case("nan") {
                values.clear();
                break;
            }
            let price: f64 = text.parse().map_err(|_| IngestError::BadPrice {
                row,
                symbol: sym.clone(),
                text: text.to_string(),
            })?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(IngestError::NonPositivePrice {
                    row,
                    symbol: sym.clone(),
                    price,
                });
            }
            values.push(price);
        }
        if values.len() < selected.len() {
            dropped_rows.push(row);
            continue;
        }
        dates.push(date);
        for (series, v) in prices.iter_mut().zip(values) {
            series.push(v);
        }
    }

    let series = selected
        .into_iter()
        .zip(prices)
        .map(|((sym, _), p)| PriceSeries::new(sym, dates.clone(), p))
        .collect::<Result<_, _>>()?;
    Ok(LoadReport { series, dropped_rows })
}

/// Equal-weight empirical PMF of per-period arithmetic returns over the
/// dates common to every series.
pub fn to_returns(series: &[PriceSeries]) -> Result<EmpiricalPmf, IngestError> {
    let first = series.first().ok_or(IngestError::NoSymbols)?;
    let mut common: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    let mut all = common.clone();
    for s in &series[1..] {
        let d: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&d).copied().collect();
        all.extend(d);
    }
    if common.len() < 2 {
        return Err(IngestError::EmptyIntersection(common.len()));
    }
    let aligned: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            s.dates
                .iter()
                .zip(&s.prices)
                .filter(|(d, _)| common.contains(d))
                .map(|(_, &p)| p)
                .collect()
        })
        .collect();
    let rows = common.len();
    let weight = 1.0 / (rows - 1) as f64;
    let atoms = (0..rows - 1)
        .map(|t| {
            let x = aligned.iter().map(|p| (p[t + 1] - p[t]) / p[t]).collect();
            Atom::new(x, weight)
        })
        .collect();
    let model = GambleModel::new(atoms)?;
    let dates: Vec<&NaiveDate> = common.iter().collect();
    Ok(EmpiricalPmf {
        model,
        provenance: Provenance {
            symbols: series.iter().map(|s| s.symbol.clone()).collect(),
            start: dates[0].to_string(),
            end: dates[rows - 1].to_string(),
            rows,
            unmatched_dates: all.len() - rows,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{approximate, ApproxMethod};
    use crate::growth::{log_growth, maximize_growth};
    use crate::Error;
    use proptest::prelude::*;

    fn day(i: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    #[test]
    fn three_row_file() {
        let text = "date,ACME\n2013-01-02,100\n2013-01-03,110\n2013-01-04,99\n";
        let r = read_prices(text.as_bytes(), None).unwrap();
        assert_eq!(r.series.len(), 1);
        assert_eq!(r.series[0].symbol, "ACME");
        assert_eq!(r.series[0].prices, vec![100.0, 110.0, 99.0]);
        let pmf = to_returns(&r.series).unwrap();
        let xs: Vec<f64> = pmf.model.atoms().iter().map(|a| a.x[0]).collect();
        assert!((xs[0] - 0.1).abs() < 1e-15 && (xs[1] + 0.1).abs() < 1e-15);
        assert!(pmf.model.atoms().iter().all(|a| a.p == 0.5));
        assert_eq!(pmf.provenance.rows, 3);
    }

    #[test]
    fn two_prices_give_single_atom() {
        let s = PriceSeries::new("A", vec![day(0), day(1)], vec![100.0, 110.0]).unwrap();
        let pmf = to_returns(&[s]).unwrap();
        assert_eq!(pmf.model.atom_count(), 1);
        assert_eq!(pmf.model.atoms()[0].p, 1.0);
        assert!((pmf.model.atoms()[0].x[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_problem() {
        let zero = "date,A\n2013-01-02,100\n2013-01-03,0\n";
        assert!(matches!(
            read_prices(zero.as_bytes(), None),
            Err(IngestError::NonPositivePrice { row: 2, .. })
        ));
        let dup = "date,A\n2013-01-02,100\n2013-01-02,101\n";
        assert!(matches!(read_prices(dup.as_bytes(), None), Err(IngestError::DuplicateDate { row: 2, .. })));
        let unsorted = "date,A\n2013-01-03,100\n2013-01-02,101\n";
        assert!(matches!(
            read_prices(unsorted.as_bytes(), None),
            Err(IngestError::UnsortedDates { row: 2, .. })
        ));
        let bad = "date,A\nyesterday,100\n";
        assert!(matches!(read_prices(bad.as_bytes(), None), Err(IngestError::BadDate { row: 1, .. })));
        let map = vec![("X".to_string(), "B".to_string())];
        assert!(matches!(
            read_prices("date,A\n2013-01-02,1\n".as_bytes(), Some(&map)),
            Err(IngestError::MissingColumn(_))
        ));
    }

    #[test]
    fn missing_values_drop_whole_row() {
        let text = "date,A,B\n2013-01-02,10,20\n2013-01-03,,21\n2013-01-04,11,22\n2013-01-07T00:00:00Z,12,NA\n2013-01-08,13,23\n";
        let r = read_prices(text.as_bytes(), None).unwrap();
        assert_eq!(r.dropped_rows, vec![2, 4]);
        assert_eq!(r.series[0].prices, vec![10.0, 11.0, 13.0]);
        assert_eq!(r.series[1].prices, vec![20.0, 22.0, 23.0]);
    }

    #[test]
    fn symbol_mapping() {
        let text = "Date,tsla_adj,ibm_adj\n2013-01-02,35.36,196.35\n2013-01-03,34.77,195.27\n";
        let map = vec![
            ("IBM".to_string(), "ibm_adj".to_string()),
            ("TSLA".to_string(), "tsla_adj".to_string()),
        ];
        let r = read_prices(text.as_bytes(), Some(&map)).unwrap();
        assert_eq!(r.series[0].symbol, "IBM");
        assert_eq!(r.series[0].prices[0], 196.35);
    }

    #[test]
    fn intersection_join() {
        let a = PriceSeries::new("A", vec![day(0), day(1), day(2), day(3)], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = PriceSeries::new("B", vec![day(1), day(2), day(3), day(4)], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let pmf = to_returns(&[a, b]).unwrap();
        assert_eq!(pmf.provenance.rows, 3);
        assert_eq!(pmf.provenance.unmatched_dates, 2);
        assert_eq!(pmf.model.atoms()[0].x, vec![0.5, 0.2]);
        let c = PriceSeries::new("C", vec![day(10), day(11)], vec![1.0, 1.0]).unwrap();
        let d = PriceSeries::new("D", vec![day(0), day(1)], vec![1.0, 1.0]).unwrap();
        assert!(matches!(to_returns(&[c, d]), Err(IngestError::EmptyIntersection(0))));
    }

    #[test]
    fn constant_prices_are_degenerate() {
        let s = PriceSeries::new("A", (0..5).map(day).collect(), vec![50.0; 5]).unwrap();
        let pmf = to_returns(&[s]).unwrap();
        assert!(pmf.model.moments().covariance.iter().all(|v| *v == 0.0));
        assert!(matches!(
            crate::approx::gbm_solution(&pmf.model),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn ninety_row_two_symbol_file() {
        let mut text = String::from("date,TSLA,IBM\n");
        for i in 0..90 {
            let f = i as f64;
            text.push_str(&format!("{},{},{}\n", day(i), 35.0 + 0.3 * f, 190.0 + (f * 0.7).sin()));
        }
        let r = read_prices(text.as_bytes(), None).unwrap();
        assert_eq!(r.series.len(), 2);
        assert!(r.series.iter().all(|s| s.len() == 90));
        let pmf = to_returns(&r.series).unwrap();
        assert_eq!(pmf.model.atom_count(), 89);
        let json = pmf.to_json();
        assert!(json.contains("\"provenance\""));
        let back = GambleModel::from_json(&json).unwrap();
        assert_eq!(back.atoms(), pmf.model.atoms());
    }

    fn arb_prices(assets: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-0.08f64..0.1, assets), 3..60).prop_map(move |rets| {
            let mut rows = vec![vec![100.0; assets]];
            for r in rets {
                let last = rows.last().unwrap().clone();
                rows.push(last.iter().zip(&r).map(|(p, x)| p * (1.0 + x)).collect());
            }
            rows
        })
    }

    fn series_from(rows: &[Vec<f64>]) -> Vec<PriceSeries> {
        let dates: Vec<NaiveDate> = (0..rows.len() as u32).map(day).collect();
        (0..rows[0].len())
            .map(|j| PriceSeries::new(format!("S{j}"), dates.clone(), rows.iter().map(|r| r[j]).collect()).unwrap())
            .collect()
    }

    proptest! {
        #[test]
        fn returns_reconstruct_prices(rows in arb_prices(2)) {
            let series = series_from(&rows);
            let pmf = to_returns(&series).unwrap();
            let sum: f64 = pmf.model.atoms().iter().map(|a| a.p).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for (s, &p0) in rows[0].iter().enumerate() {
                let mut p = p0;
                for (t, a) in pmf.model.atoms().iter().enumerate() {
                    p *= 1.0 + a.x[s];
                    prop_assert!((p - rows[t + 1][s]).abs() <= 1e-10 * rows[t + 1][s]);
                }
            }
        }

        #[test]
        fn optimizer_dominates_repaired_approximations(rows in arb_prices(2)) {
            let pmf = to_returns(&series_from(&rows)).unwrap();
            let best = maximize_growth(&pmf.model, 1e-12).unwrap();
            prop_assert!(best.k_star.is_feasible(&pmf.model).unwrap());
            for method in [ApproxMethod::Taylor, ApproxMethod::Gbm] {
                if let Ok(sol) = approximate(&pmf.model, method) {
                    let g = log_growth(&sol.k_repaired, &pmf.model).unwrap();
                    prop_assert!(best.g_star >= g - 1e-12, "{:?}: {} < {}", method, best.g_star, g);
                }
            }
        }
    }
}
