//! Renderer-independent plot descriptions. Each figure is a JSON document
//! naming CSV files, columns, styles and row filters; any plotting tool can
//! draw it without this library.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub title: String,
    /// Lines starting with this prefix in the data files are comments.
    pub comment_prefix: String,
    /// Panels in reading order; `animation` figures show them one at a time.
    pub panels: Vec<Panel>,
    pub animation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Line,
    Dashed,
    Points,
    Marker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    /// CSV path relative to the figure file.
    pub data: String,
    pub x: String,
    pub y: String,
    pub style: Style,
    pub filter: Option<Filter>,
}

/// Keeps rows whose `column` compares to `value` by `op`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    pub op: Op,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Eq,
    Gt,
}

impl Figure {
    pub fn new(title: &str, panels: Vec<Panel>) -> Self {
        Figure {
            title: title.to_string(),
            comment_prefix: "#".into(),
            panels,
            animation: false,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("figure serializes");
        s.push('\n');
        s
    }
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str, series: Vec<Series>) -> Self {
        Panel {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            series,
        }
    }
}

impl Series {
    pub fn new(label: &str, data: &str, x: &str, y: &str, style: Style) -> Self {
        Series {
            label: label.to_string(),
            data: format!("../{data}"),
            x: x.to_string(),
            y: y.to_string(),
            style,
            filter: None,
        }
    }

    pub fn filtered(mut self, column: &str, op: Op, value: f64) -> Self {
        self.filter = Some(Filter {
            column: column.to_string(),
            op,
            value,
        });
        self
    }
}

/// Stable and unstable parts of a branch file with an `nunst` column.
pub fn stability_series(label: &str, data: &str, x: &str, y: &str) -> Vec<Series> {
    vec![
        Series::new(&format!("{label} (stable)"), data, x, y, Style::Line).filtered("nunst", Op::Eq, 0.0),
        Series::new(&format!("{label} (unstable)"), data, x, y, Style::Dashed).filtered("nunst", Op::Gt, 0.0),
    ]
}
