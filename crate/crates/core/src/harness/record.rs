use crate::error::{RbcError, Result};
use crate::sim::N_HEATERS;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Per-step log of one evaluation episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub ra: f64,
    pub alpha: f64,
    pub controller: String,
    pub checkpoint: String,
    pub diverged: bool,
    /// Simulation time at the end of each action.
    pub time: Vec<f64>,
    pub nusselt: Vec<f64>,
    pub celldist: Vec<f64>,
    pub reward: Vec<f64>,
    pub cell_count: Vec<usize>,
    pub actions: Vec<[f64; N_HEATERS]>,
}

impl EpisodeRecord {
    pub fn new(ra: f64, alpha: f64, controller: &str, checkpoint: &str) -> Self {
        EpisodeRecord {
            ra,
            alpha,
            controller: controller.to_string(),
            checkpoint: checkpoint.to_string(),
            diverged: false,
            time: Vec::new(),
            nusselt: Vec::new(),
            celldist: Vec::new(),
            reward: Vec::new(),
            cell_count: Vec::new(),
            actions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn push(
        &mut self,
        time: f64,
        nusselt: f64,
        celldist: f64,
        reward: f64,
        cell_count: usize,
        action: [f64; N_HEATERS],
    ) {
        self.time.push(time);
        self.nusselt.push(nusselt);
        self.celldist.push(celldist);
        self.reward.push(reward);
        self.cell_count.push(cell_count);
        self.actions.push(action);
    }

    /// Output file stem, e.g. `ppo_ra10000_alpha0.25_ra10000_seed3`.
    pub fn file_stem(&self) -> String {
        format!("{}_ra{}_alpha{}_{}", self.controller, self.ra, self.alpha, self.checkpoint)
    }

    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = ["time", "nusselt", "celldist", "reward", "cell_count"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((0..N_HEATERS).map(|k| format!("heater{k}")));
        h
    }

    /// Writes a `#` metadata line followed by one CSV row per step.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "# ra={} alpha={} controller={} checkpoint={} diverged={}",
            self.ra, self.alpha, self.controller, self.checkpoint, self.diverged
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header())?;
        for k in 0..self.len() {
            let mut row = vec![
                self.time[k].to_string(),
                self.nusselt[k].to_string(),
                self.celldist[k].to_string(),
                self.reward[k].to_string(),
                self.cell_count[k].to_string(),
            ];
            row.extend(self.actions[k].iter().map(|a| a.to_string()));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl std::io::Read) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut meta = String::new();
        reader.read_line(&mut meta)?;
        let meta = meta
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| RbcError::Format("episode file lacks metadata line".into()))?;
        let mut record = EpisodeRecord::new(0.0, 0.0, "", "");
        let bad = |what: &str| RbcError::Format(format!("bad episode metadata field {what}"));
        for field in meta.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(field))?;
            match key {
                "ra" => record.ra = value.parse().map_err(|_| bad(key))?,
                "alpha" => record.alpha = value.parse().map_err(|_| bad(key))?,
                "controller" => record.controller = value.to_string(),
                "checkpoint" => record.checkpoint = value.to_string(),
                "diverged" => record.diverged = value.parse().map_err(|_| bad(key))?,
                _ => return Err(bad(key)),
            }
        }
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != Self::header() {
            return Err(RbcError::Format("unexpected episode columns".into()));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| RbcError::Format(format!("bad number '{s}' in episode file")))
        };
        for row in r.records() {
            let row = row?;
            let mut action = [0.0; N_HEATERS];
            for (k, a) in action.iter_mut().enumerate() {
                *a = num(&row[5 + k])?;
            }
            let cells = row[4]
                .parse()
                .map_err(|_| RbcError::Format(format!("bad cell count '{}'", &row[4])))?;
            record.push(num(&row[0])?, num(&row[1])?, num(&row[2])?, num(&row[3])?, cells, action);
        }
        Ok(record)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
