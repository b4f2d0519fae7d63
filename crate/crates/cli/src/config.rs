//! Run-configuration files: `[section]` headers over `key = value` lines,
//! `#` comments. Parsing is strict — unknown keys, type mismatches and
//! missing required keys are reported with their line numbers — and the
//! canonical emitter round-trips: `parse(emit(parse(text)))` equals
//! `parse(text)`.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    /// Sections in file order; each key with its defining line number.
    pub sections: Vec<RawSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSection {
    pub name: String,
    pub header_line: usize,
    pub entries: Vec<(usize, String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<RawSection> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                if name.is_empty() {
                    return Err(ConfigError {
                        line: line_no,
                        message: "empty section name".into(),
                    });
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(ConfigError {
                        line: line_no,
                        message: format!("duplicate section [{name}]"),
                    });
                }
                sections.push(RawSection {
                    name: name.to_string(),
                    header_line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            let section = sections.last_mut().ok_or(ConfigError {
                line: line_no,
                message: format!("key `{key}` before any [section] header"),
            })?;
            if section.entries.iter().any(|(_, k, _)| k == &key) {
                return Err(ConfigError {
                    line: line_no,
                    message: format!("duplicate key `{key}` in section [{}]", section.name),
                });
            }
            section.entries.push((line_no, key, value));
        }
        Ok(Self { sections })
    }

    /// Canonical text; reparsing yields an equal config (modulo line
    /// numbers, which the equality below ignores by construction).
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            let _ = writeln!(out, "[{}]", s.name);
            for (_, k, v) in &s.entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn section(&self, name: &str) -> Option<&RawSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Values compare equal when sections, keys and values match in order
    /// (line numbers excluded).
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn same_values(&self, other: &Self) -> bool {
        self.sections.len() == other.sections.len()
            && self.sections.iter().zip(&other.sections).all(|(a, b)| {
                a.name == b.name
                    && a.entries.len() == b.entries.len()
                    && a.entries
                        .iter()
                        .zip(&b.entries)
                        .all(|((_, ka, va), (_, kb, vb))| ka == kb && va == vb)
            })
    }
}

/// Strict reader over one section: every key must be consumed exactly once.
pub struct SectionReader<'a> {
    section: &'a RawSection,
    used: Vec<bool>,
}

impl<'a> SectionReader<'a> {
    pub fn new(cfg: &'a RawConfig, name: &str, required: bool) -> Result<Option<Self>, ConfigError> {
        match cfg.section(name) {
            Some(section) => Ok(Some(Self {
                used: vec![false; section.entries.len()],
                section,
            })),
            None if required => Err(ConfigError {
                line: 0,
                message: format!("missing required section [{name}]"),
            }),
            None => Ok(None),
        }
    }

    fn lookup(&mut self, key: &str) -> Option<(usize, &'a str)> {
        for (i, (line, k, v)) in self.section.entries.iter().enumerate() {
            if k == key {
                self.used[i] = true;
                return Some((*line, v.as_str()));
            }
        }
        None
    }

    pub fn str_opt(&mut self, key: &str) -> Option<(usize, &'a str)> {
        self.lookup(key)
    }

    pub fn str_required(&mut self, key: &str) -> Result<(usize, &'a str), ConfigError> {
        self.lookup(key).ok_or(ConfigError {
            line: self.section.header_line,
            message: format!("missing required key `{key}` in section [{}]", self.section.name),
        })
    }

    pub fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<f64>().map(Some).map_err(|_| ConfigError {
                line,
                message: format!("key `{key}`: expected a number, got `{v}`"),
            }),
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    /// A number or the literal `auto` (None).
    pub fn f64_auto(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some((_, "auto")) => Ok(None),
            Some((line, v)) => v.parse::<f64>().map(Some).map_err(|_| ConfigError {
                line,
                message: format!("key `{key}`: expected a number or `auto`, got `{v}`"),
            }),
        }
    }

    pub fn usize_opt(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<usize>().map(Some).map_err(|_| ConfigError {
                line,
                message: format!("key `{key}`: expected a non-negative integer, got `{v}`"),
            }),
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.usize_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.lookup(key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<u64>().map_err(|_| ConfigError {
                line,
                message: format!("key `{key}`: expected an integer, got `{v}`"),
            }),
        }
    }

    pub fn i64_or(&mut self, key: &str, default: i64) -> Result<i64, ConfigError> {
        match self.lookup(key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<i64>().map_err(|_| ConfigError {
                line,
                message: format!("key `{key}`: expected an integer, got `{v}`"),
            }),
        }
    }

    /// Comma-separated floats.
    pub fn f64_list_opt(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.lookup(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| ConfigError {
                    line,
                    message: format!("key `{key}`: expected comma-separated numbers, got `{v}`"),
                }),
        }
    }

    pub fn f64_list_required(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.f64_list_opt(key)?.ok_or(ConfigError {
            line: self.section.header_line,
            message: format!("missing required key `{key}` in section [{}]", self.section.name),
        })
    }

    /// Fail if any key in the section was never consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        for (i, (line, k, _)) in self.section.entries.iter().enumerate() {
            if !self.used[i] {
                return Err(ConfigError {
                    line: *line,
                    message: format!("unknown key `{k}` in section [{}]", self.section.name),
                });
            }
        }
        Ok(())
    }
}

/// Fail on sections the command does not recognize.
pub fn reject_unknown_sections(cfg: &RawConfig, allowed: &[&str]) -> Result<(), ConfigError> {
    for s in &cfg.sections {
        if !allowed.contains(&s.name.as_str()) {
            return Err(ConfigError {
                line: s.header_line,
                message: format!("unknown section [{}] for this command", s.name),
            });
        }
    }
    Ok(())
}
