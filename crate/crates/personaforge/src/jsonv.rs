//! Pointer-tracked JSON extraction.
//!
//! Loaders walk a parsed [`serde_json::Value`] through [`Cursor`] so every
//! shape error reports the JSON pointer of the offending node instead of a
//! byte offset.

use serde_json::Value;

/// A position inside a JSON document: the value plus its RFC 6901 pointer.
#[derive(Clone)]
pub struct Cursor<'a> {
    value: &'a Value,
    pointer: String,
}

/// A schema error: what was expected at which pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub pointer: String,
    pub expected: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at `{}`: expected {}", self.pointer, self.expected)
    }
}

fn escape_token(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

impl<'a> Cursor<'a> {
    pub fn root(value: &'a Value) -> Self {
        Cursor {
            value,
            pointer: String::new(),
        }
    }

    pub fn pointer(&self) -> &str {
        &self.pointer
    }

    fn err(&self, expected: impl Into<String>) -> SchemaError {
        SchemaError {
            pointer: self.pointer.clone(),
            expected: expected.into(),
        }
    }

    fn child(&self, value: &'a Value, token: &str) -> Cursor<'a> {
        Cursor {
            value,
            pointer: format!("{}/{}", self.pointer, escape_token(token)),
        }
    }

    pub fn field(&self, name: &str) -> Result<Cursor<'a>, SchemaError> {
        match self.value.get(name) {
            Some(v) => Ok(self.child(v, name)),
            None => Err(self.err(format!("object with field `{name}`"))),
        }
    }

    pub fn opt_field(&self, name: &str) -> Option<Cursor<'a>> {
        self.value
            .get(name)
            .filter(|v| !v.is_null())
            .map(|v| self.child(v, name))
    }

    pub fn array(&self) -> Result<Vec<Cursor<'a>>, SchemaError> {
        match self.value.as_array() {
            Some(items) => Ok(items
                .iter()
                .enumerate()
                .map(|(i, v)| self.child(v, &i.to_string()))
                .collect()),
            None => Err(self.err("an array")),
        }
    }

    pub fn str(&self) -> Result<&'a str, SchemaError> {
        self.value.as_str().ok_or_else(|| self.err("a string"))
    }

    pub fn non_empty_str(&self) -> Result<&'a str, SchemaError> {
        let s = self.str()?;
        if s.trim().is_empty() {
            return Err(self.err("a non-empty string"));
        }
        Ok(s)
    }

    pub fn bool(&self) -> Result<bool, SchemaError> {
        self.value.as_bool().ok_or_else(|| self.err("a boolean"))
    }

    pub fn u64(&self) -> Result<u64, SchemaError> {
        self.value
            .as_u64()
            .ok_or_else(|| self.err("an unsigned integer"))
    }

    pub fn f64(&self) -> Result<f64, SchemaError> {
        self.value.as_f64().ok_or_else(|| self.err("a number"))
    }

    pub fn entries(&self) -> Result<Vec<(&'a str, Cursor<'a>)>, SchemaError> {
        match self.value.as_object() {
            Some(map) => Ok(map
                .iter()
                .map(|(k, v)| (k.as_str(), self.child(v, k)))
                .collect()),
            None => Err(self.err("an object")),
        }
    }
}
