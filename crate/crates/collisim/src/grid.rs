use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Evenly spaced values `start:stop:count`, both endpoints included. A bare
/// number is a one-point grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid range '{text}': {reason}")]
pub struct GridError {
    text: String,
    reason: &'static str,
}

impl Grid {
    pub fn point(x: f64) -> Self {
        Self { start: x, stop: x, count: 1 }
    }

    pub fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let span = self.stop - self.start;
                (0..n).map(|i| if i == n - 1 { self.stop } else { self.start + span * i as f64 / (n - 1) as f64 }).collect()
            }
        }
    }

    pub fn single(&self) -> Option<f64> {
        (self.count == 1).then_some(self.start)
    }
}

impl FromStr for Grid {
    type Err = GridError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason| GridError { text: text.to_string(), reason };
        let parts: Vec<&str> = text.trim().split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
        match parts.as_slice() {
            [x] => num(x).map(Grid::point).ok_or_else(|| err("not a finite number")),
            [a, b, n] => {
                let (start, stop) = (num(a).ok_or_else(|| err("bad start"))?, num(b).ok_or_else(|| err("bad stop"))?);
                let count: usize = n.trim().parse().map_err(|_| err("count must be a positive integer"))?;
                if count == 0 {
                    return Err(err("count must be a positive integer"));
                }
                if count == 1 && start != stop {
                    return Err(err("a one-point range needs start == stop"));
                }
                Ok(Grid { start, stop, count })
            }
            _ => Err(err("expected 'x' or 'start:stop:count'")),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.single() {
            Some(x) => write!(f, "{x}"),
            None => write!(f, "{}:{}:{}", self.start, self.stop, self.count),
        }
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.single() {
            Some(x) => serializer.serialize_f64(x),
            None => serializer.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(x) => Ok(Grid::point(x)),
            Raw::Int(x) => Ok(Grid::point(x as f64)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
