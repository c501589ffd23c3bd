//! Input tables and their ingestion.
//!
//! A data directory holds three comma-separated tables, each with a header:
//!
//! | file             | columns                  |
//! |------------------|--------------------------|
//! | `households.csv` | `id,household`           |
//! | `covariates.csv` | `id,age,sex` (`F` / `M`) |
//! | `tests.csv`      | `id,week,result` (0 / 1) |
//!
//! Individuals are indexed densely in the order they appear in
//! `households.csv`. A week with no row in `tests.csv` is untested.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rippler_core::model::{ObservationMatrix, Population, TestResult};
use rippler_core::synthetic::{centre_covariates, SyntheticStudy};

use crate::error::{CliError, CliResult};

pub const HOUSEHOLDS_FILE: &str = "households.csv";
pub const COVARIATES_FILE: &str = "covariates.csv";
pub const TESTS_FILE: &str = "tests.csv";
pub const ID_MAP_FILE: &str = "id_map.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub week: usize,
    pub individual: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Original id of each individual, by dense index.
    pub ids: Vec<String>,
    /// Original id of each household, by dense index.
    pub household_ids: Vec<String>,
    pub household_of: Vec<usize>,
    pub ages: Vec<f64>,
    pub female: Vec<bool>,
    /// Sorted by (week, individual).
    pub tests: Vec<TestRecord>,
    pub n_steps: usize,
}

/// Rows of one table with the 1-based line number of each row.
fn read_table(path: &Path, columns: &[&str]) -> CliResult<Vec<(usize, Vec<String>)>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| CliError::parse(path, 1, e.to_string()))?.clone();
    let index: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| CliError::parse(path, 1, format!("missing column {c:?}")))
        })
        .collect::<CliResult<_>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push((line, index.iter().map(|&i| record[i].to_string()).collect()));
    }
    Ok(rows)
}

impl Dataset {
    /// Reads the three tables from `dir`. T is `n_steps` if given, else the
    /// latest test week.
    pub fn load(dir: &Path, n_steps: Option<usize>) -> CliResult<Self> {
        let households_path = dir.join(HOUSEHOLDS_FILE);
        let mut ids = Vec::new();
        let mut index_of: HashMap<String, usize> = HashMap::new();
        let mut household_ids: Vec<String> = Vec::new();
        let mut household_index: HashMap<String, usize> = HashMap::new();
        let mut household_of = Vec::new();
        for (_, row) in read_table(&households_path, &["id", "household"])? {
            let (id, hh) = (&row[0], &row[1]);
            if index_of.contains_key(id) {
                return Err(CliError::consistency(id, "listed twice in the households table"));
            }
            index_of.insert(id.clone(), ids.len());
            ids.push(id.clone());
            let next = household_ids.len();
            let h = *household_index.entry(hh.clone()).or_insert_with(|| {
                household_ids.push(hh.clone());
                next
            });
            household_of.push(h);
        }
        if ids.is_empty() {
            return Err(CliError::parse(&households_path, 1, "no individuals"));
        }
        let lookup = |id: &str, table: &str| {
            index_of
                .get(id)
                .copied()
                .ok_or_else(|| CliError::consistency(id, format!("appears in the {table} table but not in the households table")))
        };

        let covariates_path = dir.join(COVARIATES_FILE);
        let mut ages = vec![f64::NAN; ids.len()];
        let mut female = vec![false; ids.len()];
        let mut seen = vec![false; ids.len()];
        for (line, row) in read_table(&covariates_path, &["id", "age", "sex"])? {
            let j = lookup(&row[0], "covariates")?;
            if seen[j] {
                return Err(CliError::consistency(&row[0], "listed twice in the covariates table"));
            }
            seen[j] = true;
            let age: f64 = row[1]
                .parse()
                .ok()
                .filter(|a: &f64| a.is_finite() && *a >= 0.0)
                .ok_or_else(|| CliError::parse(&covariates_path, line, format!("invalid age {:?}", row[1])))?;
            ages[j] = age;
            female[j] = match row[2].to_ascii_uppercase().as_str() {
                "F" => true,
                "M" => false,
                other => return Err(CliError::parse(&covariates_path, line, format!("sex must be F or M, got {other:?}"))),
            };
        }
        if let Some(j) = seen.iter().position(|&s| !s) {
            return Err(CliError::consistency(&ids[j], "has no row in the covariates table"));
        }

        let tests_path = dir.join(TESTS_FILE);
        let mut tests = Vec::new();
        let mut cells = HashSet::new();
        for (line, row) in read_table(&tests_path, &["id", "week", "result"])? {
            let j = lookup(&row[0], "tests")?;
            let week: usize = row[1]
                .parse()
                .map_err(|_| CliError::parse(&tests_path, line, format!("invalid week {:?}", row[1])))?;
            if week == 0 {
                return Err(CliError::parse(&tests_path, line, "weeks are numbered from 1"));
            }
            if let Some(t) = n_steps {
                if week > t {
                    return Err(CliError::parse(&tests_path, line, format!("week {week} is past the last week {t}")));
                }
            }
            let positive = match row[2].as_str() {
                "1" => true,
                "0" => false,
                other => return Err(CliError::parse(&tests_path, line, format!("result must be 0 or 1, got {other:?}"))),
            };
            if !cells.insert((week, j)) {
                return Err(CliError::consistency(&row[0], format!("tested twice in week {week}")));
            }
            tests.push(TestRecord { week, individual: j, positive });
        }
        tests.sort_by_key(|r| (r.week, r.individual));

        let n_steps = match n_steps {
            Some(t) => t,
            None => tests.iter().map(|r| r.week).max().ok_or_else(|| {
                CliError::Config("no tests to take the number of weeks from; set n_steps".into())
            })?,
        };
        Ok(Self { ids, household_ids, household_of, ages, female, tests, n_steps })
    }

    /// A dataset for a simulated study, with ids `ind<j>` and `hh<h>`.
    pub fn from_study(study: &SyntheticStudy, y: &ObservationMatrix) -> Self {
        let n = study.n_individuals();
        let n_households = study.household_of.iter().max().map_or(0, |h| h + 1);
        let tests = Self::from_observations(y);
        Self {
            ids: (0..n).map(|j| format!("ind{j}")).collect(),
            household_ids: (0..n_households).map(|h| format!("hh{h}")).collect(),
            household_of: study.household_of.clone(),
            ages: study.ages.clone(),
            female: study.female.clone(),
            tests,
            n_steps: y.n_steps(),
        }
    }

    /// Test records of every tested cell, sorted by (week, individual).
    pub fn from_observations(y: &ObservationMatrix) -> Vec<TestRecord> {
        y.tested_cells()
            .map(|(t, j, r)| TestRecord { week: t, individual: j, positive: r == TestResult::Positive })
            .collect()
    }

    pub fn n_individuals(&self) -> usize {
        self.ids.len()
    }

    /// Population with age and sex centred on their means in this dataset.
    pub fn population(&self) -> CliResult<Population> {
        Ok(Population::new(self.household_of.clone(), centre_covariates(&self.ages, &self.female))?)
    }

    pub fn observations(&self) -> CliResult<ObservationMatrix> {
        let mut y = ObservationMatrix::untested(self.n_steps, self.n_individuals())?;
        for r in &self.tests {
            if r.week == 0 || r.week > self.n_steps {
                return Err(CliError::consistency(&self.ids[r.individual], format!("test week {} outside 1..={}", r.week, self.n_steps)));
            }
            y.set(r.week, r.individual, if r.positive { TestResult::Positive } else { TestResult::Negative });
        }
        Ok(y)
    }

    /// Writes the three input tables and the id map to `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut households = String::from("id,household\n");
        let mut covariates = String::from("id,age,sex\n");
        for j in 0..self.n_individuals() {
            households.push_str(&format!("{},{}\n", self.ids[j], self.household_ids[self.household_of[j]]));
            covariates.push_str(&format!("{},{},{}\n", self.ids[j], self.ages[j], if self.female[j] { "F" } else { "M" }));
        }
        let mut tests = String::from("id,week,result\n");
        for r in &self.tests {
            tests.push_str(&format!("{},{},{}\n", self.ids[r.individual], r.week, u8::from(r.positive)));
        }
        write_file(&dir.join(HOUSEHOLDS_FILE), &households)?;
        write_file(&dir.join(COVARIATES_FILE), &covariates)?;
        write_file(&dir.join(TESTS_FILE), &tests)?;
        self.write_id_map(dir)
    }

    /// Writes `index,id` for every individual.
    pub fn write_id_map(&self, dir: &Path) -> CliResult<()> {
        let mut map = String::from("index,id\n");
        for (j, id) in self.ids.iter().enumerate() {
            map.push_str(&format!("{j},{id}\n"));
        }
        write_file(&dir.join(ID_MAP_FILE), &map)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))
}
