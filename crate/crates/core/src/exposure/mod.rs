//! Monthly exposure series, pregnancy windows and birth panels.

mod births;
mod panel;
mod transported;

use std::fmt;
use std::str::FromStr;

pub use births::{
    load_births, load_shorelines, load_trade, write_births, write_shorelines, write_trade,
    BirthRecord, Births, TradeFlow,
};
pub use panel::{
    assemble_panel, birth_cells, cell_label, exporter_series, grid_month_panel, passthrough_panel,
    ExclusionReport, PanelInputs, EXCLUSION_REASONS,
};
pub use transported::{
    exporter_weighted_mp, local_series, transported_series, TransportedExposure,
};

use crate::time::YearMonth;

/// Values over consecutive calendar months; `None` marks a missing month.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    first: YearMonth,
    values: Vec<Option<f64>>,
}

impl MonthlySeries {
    pub fn new(first: YearMonth, values: Vec<Option<f64>>) -> Self {
        MonthlySeries { first, values }
    }

    pub fn first(&self) -> YearMonth {
        self.first
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.values.len()).map(|k| self.first.offset(k as i32))
    }

    /// Value in `month`; `None` outside the covered range or when missing.
    pub fn get(&self, month: YearMonth) -> Option<f64> {
        let k = month.months_since(self.first);
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied().flatten()
    }

    pub fn scaled(&self, lambda: f64) -> MonthlySeries {
        MonthlySeries {
            first: self.first,
            values: self.values.iter().map(|v| v.map(|x| x * lambda)).collect(),
        }
    }
}

/// Where an exposure value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// The receiver cell's own concentration.
    Local,
    /// Transported from every sender.
    TransportedAll,
    /// Transported from senders clear of the shoreline buffer.
    Transported200km,
}

impl Provenance {
    pub const ALL: [Provenance; 3] = [
        Provenance::Local,
        Provenance::TransportedAll,
        Provenance::Transported200km,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Provenance::Local => "local",
            Provenance::TransportedAll => "transported_all",
            Provenance::Transported200km => "transported_200km",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Provenance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown provenance `{s}`; expected local, transported_all or transported_200km"))
    }
}

/// Inclusive range of month offsets relative to the birth month.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub name: &'static str,
    pub from: i32,
    pub to: i32,
}

impl Window {
    pub const IN_UTERO: Window = Window {
        name: "in_utero",
        from: -9,
        to: -1,
    };
    pub const PRECONCEPTION: Window = Window {
        name: "preconception",
        from: -12,
        to: -10,
    };
    pub const TRIMESTER1: Window = Window {
        name: "trimester1",
        from: -9,
        to: -7,
    };
    pub const TRIMESTER2: Window = Window {
        name: "trimester2",
        from: -6,
        to: -4,
    };
    pub const TRIMESTER3: Window = Window {
        name: "trimester3",
        from: -3,
        to: -1,
    };
    pub const POSTPARTUM: Window = Window {
        name: "postpartum",
        from: 0,
        to: 2,
    };

    pub const NAMED: [Window; 6] = [
        Window::IN_UTERO,
        Window::PRECONCEPTION,
        Window::TRIMESTER1,
        Window::TRIMESTER2,
        Window::TRIMESTER3,
        Window::POSTPARTUM,
    ];

    pub fn by_name(name: &str) -> Option<Window> {
        Window::NAMED.into_iter().find(|w| w.name == name)
    }

    pub fn months(self, birth: YearMonth) -> impl Iterator<Item = YearMonth> {
        (self.from..=self.to).map(move |k| birth.offset(k))
    }

    pub fn len(self) -> usize {
        (self.to - self.from + 1) as usize
    }

    pub fn is_empty(self) -> bool {
        self.to < self.from
    }
}

/// Why a window value could not be formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowIssue {
    Missing,
    NonPositive,
}

/// Sum of the series over the window months.
pub fn window_sum(series: &MonthlySeries, birth: YearMonth, w: Window) -> Result<f64, WindowIssue> {
    let mut sum = 0.0;
    for m in w.months(birth) {
        sum += series.get(m).ok_or(WindowIssue::Missing)?;
    }
    Ok(sum)
}

/// Natural log of the window sum.
pub fn window_exposure(
    series: &MonthlySeries,
    birth: YearMonth,
    w: Window,
) -> Result<f64, WindowIssue> {
    let s = window_sum(series, birth, w)?;
    if s > 0.0 {
        Ok(s.ln())
    } else {
        Err(WindowIssue::NonPositive)
    }
}

/// Natural log of the window mean.
pub fn window_log_mean(
    series: &MonthlySeries,
    birth: YearMonth,
    w: Window,
) -> Result<f64, WindowIssue> {
    let s = window_sum(series, birth, w)? / w.len() as f64;
    if s > 0.0 {
        Ok(s.ln())
    } else {
        Err(WindowIssue::NonPositive)
    }
}
